"""Shared circuit builders for the test suite."""

import numpy as np

from pauliprop.circuits import (
    CLIFFORD_NAMES,
    Circuit,
    EnsembleSpec,
    Gate,
    Layer,
    RotationPattern,
    RotationSet,
    build_brickwork_1d,
)
from pauliprop.paulis import PauliString


def random_clifford_circuit(n: int, depth: int, rng: np.random.Generator) -> Circuit:
    """One random named Clifford per layer on random qubits."""
    layers = []
    for _ in range(depth):
        name = CLIFFORD_NAMES[rng.integers(len(CLIFFORD_NAMES))]
        if name in ("CNOT", "CZ", "SWAP"):
            q = rng.choice(n, size=2, replace=False)
            layers.append(Layer((Gate.clifford(name, (int(q[0]), int(q[1]))),)))
        else:
            layers.append(Layer((Gate.clifford(name, (int(rng.integers(n)),)),)))
    return Circuit(n, tuple(layers))


def random_rotation_gate(n: int, rng: np.random.Generator) -> Gate:
    """Random 1- or 2-qubit rotation with a random non-identity generator."""
    m = int(rng.integers(1, 3))
    support = tuple(int(q) for q in rng.choice(n, size=m, replace=False))
    code = int(rng.integers(1, 4**m))
    x = z = 0
    for i in range(m):
        c = (code >> (2 * i)) & 3
        x |= ((c ^ (c >> 1)) & 1) << i
        z |= ((c >> 1) & 1) << i
    gen = PauliString(m, x, z)
    return Gate.rotation(gen, float(rng.uniform(0, 2 * np.pi)), support)


def rotation_brickwork_spec(n: int, reps: int, seed: int | None = None) -> EnsembleSpec:
    """RX/RZ on every qubit then RZZ over brickwork edges, repeated."""
    return EnsembleSpec(
        build_brickwork_1d(n, 2),
        RotationSet(
            (RotationPattern("X"), RotationPattern("Z"), RotationPattern("ZZ"))
        ),
        repetitions=reps,
        master_seed=seed,
    )


def haar_brickwork_spec(n: int, depth: int, seed: int | None = None, periodic: bool = False) -> EnsembleSpec:
    return EnsembleSpec(
        build_brickwork_1d(n, depth, periodic=periodic), master_seed=seed
    )
