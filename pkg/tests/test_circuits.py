"""Circuit IR, topology builder, and ensemble sampler tests."""

import numpy as np
import pytest

from pauliprop.circuits import (
    Circuit,
    EnsembleSpec,
    FixedAngles,
    Gate,
    HaarSU4PerEdge,
    IndependentUniform,
    Layer,
    Layout,
    RotationPattern,
    RotationSet,
    SharedSingleAngle,
    Topology,
    build_brickwork_1d,
    build_staircase_2d,
    circuit_from_text,
    circuit_to_text,
    ensemble_rng,
    layout_from_topology,
    load_topology_edges,
    parse_topology_text,
    sample_circuit,
    sample_haar_su4,
    sample_haar_unitary,
)
from pauliprop.paulis import PauliString


# -- staircase -------------------------------------------------------------

def test_staircase_1x2():
    lay = build_staircase_2d(1, 2, 1)
    assert lay.layers == (((0, 1),),)


def test_staircase_2x2_order():
    lay = build_staircase_2d(2, 2, 1)
    # snake path 0,1,3,2; reverse edge order
    assert lay.layers == (((3, 2),), ((1, 3),), ((0, 1),))


def test_staircase_repetition_concat():
    once = build_staircase_2d(2, 2, 1).layers
    twice = build_staircase_2d(2, 2, 2).layers
    assert twice == once + once
    assert len(twice) == 6


def test_staircase_gate_count():
    for rows, cols in [(2, 3), (3, 3), (1, 5)]:
        lay = build_staircase_2d(rows, cols, 1)
        assert len(lay.layers) == rows * cols - 1


def test_staircase_too_small():
    with pytest.raises(ValueError):
        build_staircase_2d(1, 1, 1)


# -- brickwork ---------------------------------------------------------------

def test_brickwork_examples():
    lay = build_brickwork_1d(4, 2)
    assert lay.layers == (((0, 1), (2, 3)), ((1, 2),))
    lay = build_brickwork_1d(2, 3)
    assert lay.layers == (((0, 1),),) * 3
    lay = build_brickwork_1d(5, 1)
    assert lay.layers == (((0, 1), (2, 3)),)


def test_brickwork_periodic_covers_all():
    lay = build_brickwork_1d(8, 4, periodic=True)
    for layer in lay.layers:
        covered = sorted(q for s in layer for q in s)
        assert covered == list(range(8))


def test_brickwork_too_small():
    with pytest.raises(ValueError):
        build_brickwork_1d(1, 1)


# -- topologies --------------------------------------------------------------

def test_heavyhex_builtin():
    top = load_topology_edges("heavyhex127")
    assert top.n_qubits == 127
    assert len(top.edges) == 144
    degree = {}
    for u, v in top.edges:
        degree[u] = degree.get(u, 0) + 1
        degree[v] = degree.get(v, 0) + 1
    assert max(degree.values()) <= 3


def test_parse_topology_text():
    top = parse_topology_text("0 1\n1 2")
    assert top.n_qubits == 3 and top.edges == ((0, 1), (1, 2))
    with pytest.raises(ValueError):
        parse_topology_text("0 0")
    with pytest.raises(ValueError):
        parse_topology_text("0 a")
    with pytest.raises(ValueError):
        load_topology_edges("no_such_builtin")


def test_topology_file_round_trip(tmp_path):
    p = tmp_path / "edges.txt"
    p.write_text("# comment\n0 1\n2 1\n")
    top = load_topology_edges(p)
    assert top.edges == ((0, 1), (2, 1))


def test_layout_from_topology_greedy():
    top = parse_topology_text("0 1\n1 2\n2 3\n3 4")
    lay = layout_from_topology(top)
    for layer in lay.layers:
        qs = [q for s in layer for q in s]
        assert len(qs) == len(set(qs))
    flat = [s for layer in lay.layers for s in layer]
    assert sorted(flat) == sorted(top.edges)


# -- gates and layers ---------------------------------------------------------

def test_gate_validation():
    with pytest.raises(ValueError):
        Gate.clifford("CNOT", (0,))
    with pytest.raises(ValueError):
        Gate.clifford("Q", (0,))
    with pytest.raises(ValueError):
        Gate.unitary(np.eye(4) * 2.0, (0, 1))
    with pytest.raises(ValueError):
        Gate.rotation(PauliString.from_text("I"), 0.1, (0,))
    with pytest.raises(ValueError):
        Gate.rotation(PauliString.from_text("Z"), 0.1, (0, 1))


def test_layer_disjointness():
    g1 = Gate.clifford("H", (0,))
    g2 = Gate.clifford("H", (0,))
    with pytest.raises(ValueError):
        Layer((g1, g2))
    with pytest.raises(ValueError):
        Layer(())


def test_circuit_support_bounds():
    g = Gate.clifford("H", (3,))
    with pytest.raises(ValueError):
        Circuit(2, (Layer((g,)),))


# -- Haar sampling -------------------------------------------------------------

def test_haar_su4_unitarity_and_determinism():
    g = sample_haar_su4(np.random.default_rng(42))
    assert np.max(np.abs(g.matrix.conj().T @ g.matrix - np.eye(4))) < 1e-10
    g2 = sample_haar_su4(np.random.default_rng(42))
    assert np.array_equal(g.matrix, g2.matrix)


def test_haar_second_moment():
    # E |Tr U|^2 = 1 for Haar; check the empirical mean within 5 stderr
    rng = np.random.default_rng(7)
    vals = np.array(
        [abs(np.trace(sample_haar_unitary(4, rng))) ** 2 for _ in range(10_000)]
    )
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - 1.0) < 5 * se


# -- ensembles ------------------------------------------------------------------

def test_sample_circuit_haar_structure():
    spec = EnsembleSpec(build_staircase_2d(2, 2, 1))
    c = sample_circuit(spec, np.random.default_rng(0))
    assert c.depth == 3
    assert all(len(layer.gates) == 1 for layer in c.layers)
    assert all(layer.gates[0].kind == "unitary" for layer in c.layers)


def test_sample_circuit_shared_angle():
    top = parse_topology_text("0 1\n1 2\n2 3")
    spec = EnsembleSpec(
        layout_from_topology(top),
        RotationSet((RotationPattern("X"), RotationPattern("Z"), RotationPattern("ZZ"))),
        SharedSingleAngle(),
    )
    c = sample_circuit(spec, np.random.default_rng(3))
    angles = {g.angle for layer in c.layers for g in layer.gates}
    assert len(angles) == 1


def test_sample_circuit_deterministic():
    spec = EnsembleSpec(build_brickwork_1d(6, 3))
    c1 = sample_circuit(spec, np.random.default_rng(11))
    c2 = sample_circuit(spec, np.random.default_rng(11))
    assert circuit_to_text(c1) == circuit_to_text(c2)
    c3 = sample_circuit(spec, np.random.default_rng(12))
    assert circuit_to_text(c1) != circuit_to_text(c3)


def test_ensemble_rng_counter_scheme():
    a = ensemble_rng(5, 0).integers(0, 1 << 30)
    b = ensemble_rng(5, 1).integers(0, 1 << 30)
    a2 = ensemble_rng(5, 0).integers(0, 1 << 30)
    assert a == a2 and a != b


def test_fixed_angles_length_check():
    spec = EnsembleSpec(
        build_brickwork_1d(4, 1),
        RotationSet((RotationPattern("ZZ"),)),
        FixedAngles((0.1,)),
    )
    with pytest.raises(ValueError):
        sample_circuit(spec, np.random.default_rng(0))


def test_rotation_pattern_validation():
    with pytest.raises(ValueError):
        RotationPattern("W")
    with pytest.raises(ValueError):
        RotationPattern("X", angle_dist="gaussian")
    # a 1-qubit slot cannot host a two-site generator
    lay = Layout(3, (((0,), (1, 2)),))
    with pytest.raises(ValueError):
        EnsembleSpec(lay, RotationSet((RotationPattern("ZZ"),)))


def test_circuit_text_round_trip():
    spec = EnsembleSpec(
        build_brickwork_1d(5, 2),
        RotationSet((RotationPattern("X"), RotationPattern("ZZ"))),
    )
    c = sample_circuit(spec, np.random.default_rng(9))
    c2 = circuit_from_text(circuit_to_text(c))
    assert circuit_to_text(c2) == circuit_to_text(c)
    ch = Circuit(2, (Layer((Gate.clifford("CNOT", (0, 1)),)),))
    assert circuit_to_text(circuit_from_text(circuit_to_text(ch))) == circuit_to_text(ch)
    u = Circuit(2, (Layer((Gate.unitary(sample_haar_unitary(4, np.random.default_rng(1)), (0, 1)),)),))
    u2 = circuit_from_text(circuit_to_text(u))
    assert np.array_equal(u.layers[0].gates[0].matrix, u2.layers[0].gates[0].matrix)
