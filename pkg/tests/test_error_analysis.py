"""Error-quantification tests.

Independent oracles used here: exact enumeration of the second-moment chain
for tiny registers, squared PTM rows of explicitly sampled Haar gates, and
the statevector-based empirical estimators.
"""

import math

import numpy as np
import pytest

from conftest import haar_brickwork_spec, rotation_brickwork_spec

from pauliprop.circuits import (
    EnsembleSpec,
    FixedAngles,
    Layout,
    RotationPattern,
    RotationSet,
    SharedSingleAngle,
    build_brickwork_1d,
    sample_haar_unitary,
)
from pauliprop.error_analysis import (
    MSEEstimate,
    UnsupportedEnsembleError,
    bootstrap_stderr,
    build_transfer,
    chernoff_samples,
    empirical_mse,
    mc_mse_estimate,
    mc_mse_profile,
    mse_bound,
    paired_estimates,
    pauli_count,
    trivial_estimator_stats,
    variance_stderr,
    weight1_variance_brickwork,
)
from pauliprop.paulis import PauliString, PauliSum
from pauliprop.propagation import zero_state


# -- closed-form quantities -----------------------------------------------------

def test_mse_bound_examples():
    assert mse_bound(0, 1.0) == pytest.approx(2 / 3)
    assert mse_bound(7, 1.0) == pytest.approx((2 / 3) ** 8)
    assert mse_bound(7, 1.0) == pytest.approx(0.03902, abs=5e-6)
    assert mse_bound(3, 0.0) == 0.0


def test_pauli_count_examples():
    assert pauli_count(2, 2)[0] == 16
    assert pauli_count(3, 1)[0] == 10
    exact, bound = pauli_count(64, 6)
    assert exact <= bound
    with pytest.raises(ValueError):
        pauli_count(3, 4)


def test_pauli_count_bound_range():
    for n in range(2, 65):
        for k in range(1, min(8, n) + 1):
            exact, bound = pauli_count(n, k)
            assert exact <= bound
    assert pauli_count(10, 0) == (1, 1.0)


def test_chernoff_samples():
    m = chernoff_samples(0.1, 0.05)
    assert m == math.ceil(math.log(40) / 0.02)
    with pytest.raises(ValueError):
        chernoff_samples(0.0, 0.5)


def test_weight1_variance_examples():
    z0 = PauliSum.from_terms(4, {"Z0": 1.0})
    assert weight1_variance_brickwork(1, z0) == pytest.approx(2 / 25)
    assert weight1_variance_brickwork(3, z0) == pytest.approx(0.0128)
    heavy = PauliSum.from_terms(4, {"Z0*Z1": 1.0})
    assert weight1_variance_brickwork(2, heavy) == 0.0


# -- transfers --------------------------------------------------------------------

def test_transfer_rows_sum_to_one():
    spec = rotation_brickwork_spec(5, 2)
    transfer = build_transfer(spec)
    transfer.validate()
    for layer in transfer.layers:
        for slot in layer:
            for code in range(4 ** len(slot.support)):
                row = slot.row_distribution(code)
                assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)


def test_rotation_transfer_rz_on_x():
    lay = Layout(1, (((0,),),))
    spec = EnsembleSpec(lay, RotationSet((RotationPattern("Z"),)))
    transfer = build_transfer(spec)
    slot = transfer.layers[0][0]
    # X (code 1) -> {X: 1/2, Y: 1/2}; Z (code 3) fixed
    assert slot.row_distribution(1) == {1: 0.5, 2: 0.5}
    assert slot.row_distribution(3) == {3: 1.0}
    assert slot.row_distribution(0) == {0: 1.0}


def test_haar_transfer_against_sampled_gates():
    # squared PTM rows of explicitly sampled Haar gates vs the 1/15 rule
    rng = np.random.default_rng(123)
    n_gates = 20_000
    z = (
        rng.standard_normal((n_gates, 4, 4)) + 1j * rng.standard_normal((n_gates, 4, 4))
    ) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    u = q * (d / np.abs(d))[:, None, :]

    from pauliprop.propagation import _basis_matrices

    basis = _basis_matrices(2)
    # row of X(x)I (code 4): squared overlaps with all 16 outputs
    conj = np.einsum("bij,jk,bkl->bil", u.conj().transpose(0, 2, 1), basis[4], u)
    rows = np.real(np.einsum("bij,qji->bq", conj, basis)) / 4.0
    sq = rows**2
    mean = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / np.sqrt(n_gates)
    assert mean[0] == pytest.approx(0.0, abs=1e-12)
    for c in range(1, 16):
        assert abs(mean[c] - 1 / 15) < 3 * se[c]


def test_transfer_rejects_correlated_angles():
    top = build_brickwork_1d(4, 2)
    spec = EnsembleSpec(
        top, RotationSet((RotationPattern("ZZ"),)), SharedSingleAngle()
    )
    with pytest.raises(UnsupportedEnsembleError):
        build_transfer(spec)
    spec = EnsembleSpec(
        top, RotationSet((RotationPattern("ZZ"),)), FixedAngles(tuple([0.3] * 6))
    )
    with pytest.raises(UnsupportedEnsembleError):
        build_transfer(spec)


# -- the MC path sampler ------------------------------------------------------------

def _exact_two_gate_chain_mse(k: int) -> float:
    """Exact enumeration for n=2, two Haar layers, O=Z0, zero state.

    Terminal Z0 transitions uniformly over 15 block Paulis (s_1), truncation
    iff weight(s_1) > k; then s_0 is uniform over 15 and Tr[P_0 rho]^2 picks
    the 3 diagonal strings.
    """
    from pauliprop.propagation import _block_pauli

    total = 0.0
    for c1 in range(1, 16):
        p1 = _block_pauli(2, c1)
        truncated = p1.weight > k
        for c0 in range(1, 16):
            p0 = _block_pauli(2, c0)
            d_sq = 1.0 if p0.x_mask == 0 else 0.0
            total += (1 / 15) * (1 / 15) * (d_sq if truncated else 0.0)
    return total


def test_exact_chain_value_frozen():
    # 9 truncated s_1 states x 3 diagonal s_0 states: (9/15)*(3/15) = 0.12
    assert _exact_two_gate_chain_mse(1) == pytest.approx(0.12)


def test_mc_two_overlapping_haar_gates():
    spec = haar_brickwork_spec(2, 2)
    o = PauliSum.from_terms(2, {"Z0": 1.0})
    est = mc_mse_estimate(spec, o, zero_state(2), 1, 40_000, np.random.default_rng(5))
    assert abs(est.mean - _exact_two_gate_chain_mse(1)) < 4 * est.stderr
    assert est.bound == pytest.approx(mse_bound(1, 1.0))


def test_mc_single_layer_weight1_no_truncation():
    spec = haar_brickwork_spec(4, 1)
    o = PauliSum.from_terms(4, {"Z0": 1.0})
    est = mc_mse_estimate(spec, o, zero_state(4), 1, 2_000, np.random.default_rng(6))
    assert est.mean == 0.0 and est.stderr == 0.0


def test_mc_k_equals_n_is_zero():
    spec = rotation_brickwork_spec(5, 2)
    o = PauliSum.from_terms(5, {"Z0": 1.0, "X1*X2": 0.5})
    est = mc_mse_estimate(spec, o, zero_state(5), 5, 2_000, np.random.default_rng(7))
    assert est.mean == 0.0


def test_mc_profile_monotone_and_var():
    spec = haar_brickwork_spec(6, 4)
    o = PauliSum.from_terms(6, {"Z0": 1.0})
    prof = mc_mse_profile(spec, o, zero_state(6), [0, 1, 2, 3], 30_000,
                          np.random.default_rng(8))
    means = [prof.per_k[k].mean for k in (0, 1, 2, 3)]
    assert all(a >= b for a, b in zip(means, means[1:]))
    for k in (0, 1, 2, 3):
        assert prof.per_k[k].bound_satisfied


def test_mc_var_f_matches_weingarten_single_gate():
    # one Haar 4x4 layer: Var f = E Tr[U^dag Z0 U rho]^2 = 1/5 exactly
    spec = haar_brickwork_spec(2, 1)
    o = PauliSum.from_terms(2, {"Z0": 1.0})
    prof = mc_mse_profile(spec, o, zero_state(2), [0], 50_000, np.random.default_rng(9))
    assert abs(prof.var_f_mean - 0.2) < 5 * prof.var_f_stderr


def test_mc_keep_paths():
    spec = haar_brickwork_spec(3, 2)
    o = PauliSum.from_terms(3, {"Z0": 1.0})
    est, paths = mc_mse_estimate(
        spec, o, zero_state(3), 1, 50, np.random.default_rng(10), keep_paths=True
    )
    assert len(paths) == 50
    for p in paths:
        assert len(p.chain) == 3  # P_L, P_1, P_0
        assert p.terminal == PauliString.from_text("Z0", 3)
        assert 0.0 <= p.x_value <= 1.0
        inter_w = max(q.weight for q in p.chain[:-1])
        assert p.truncated == (inter_w > 1)


# -- oracle-side estimators -----------------------------------------------------------

def test_empirical_mse_exact_at_full_k():
    spec = haar_brickwork_spec(4, 3)
    o = PauliSum.from_terms(4, {"Z0": 1.0})
    est = empirical_mse(spec, o, zero_state(4), 4, 40, np.random.default_rng(11))
    assert est.mean <= 1e-18


def test_estimator_cross_consistency_small():
    spec = haar_brickwork_spec(6, 3)
    o = PauliSum.from_terms(6, {"Z0": 1.0})
    emp = empirical_mse(spec, o, zero_state(6), 1, 300, np.random.default_rng(12))
    mc = mc_mse_estimate(spec, o, zero_state(6), 1, 100_000, np.random.default_rng(13))
    combined = math.hypot(emp.stderr, mc.stderr)
    assert abs(emp.mean - mc.mean) < 3 * combined


def test_trivial_estimator_stats():
    spec = haar_brickwork_spec(4, 2)
    o = PauliSum.from_terms(4, {"Z0": 1.0})
    mu, var = trivial_estimator_stats(spec, o, zero_state(4), 60, np.random.default_rng(14))
    assert mu == 0.0
    emp = empirical_mse(spec, o, zero_state(4), 1, 60, np.random.default_rng(14))
    assert var >= emp.mean - 1e-12  # variance-gap: MSE <= Var f
    # depth-0 ensemble: f is identically 1
    empty = EnsembleSpec(Layout(4, ()))
    mu, var = trivial_estimator_stats(empty, o, zero_state(4), 10, np.random.default_rng(15))
    assert var == pytest.approx(0.0, abs=1e-30)


def test_trivial_estimator_cap():
    spec = haar_brickwork_spec(16, 1)
    o = PauliSum.from_terms(16, {"Z0": 1.0})
    with pytest.raises(ValueError):
        trivial_estimator_stats(spec, o, zero_state(16), 5, np.random.default_rng(0))


def test_weight1_law_small():
    # ring brickwork, L scrambling layers after the initial one
    L = 1
    spec = haar_brickwork_spec(8, L + 1, periodic=True)
    o = PauliSum.from_terms(8, {"Z0": 1.0})
    _, f_tilde = paired_estimates(
        spec, o, zero_state(8), 1, 700, np.random.default_rng(16), with_oracle=False
    )
    var = f_tilde.var(ddof=1)
    se = variance_stderr(f_tilde)
    assert abs(var - weight1_variance_brickwork(L, o)) < 4 * se


def test_bootstrap_stderr_runs():
    rng = np.random.default_rng(17)
    x = rng.standard_normal(500)
    se = bootstrap_stderr(lambda a: a.mean(), (x,), 100, rng)
    assert 0.02 < se < 0.08  # stderr of the mean of 500 N(0,1) draws is ~0.045


def test_mse_estimate_flag():
    good = MSEEstimate(0.1, 0.01, 100, 0.2)
    bad = MSEEstimate(0.5, 0.01, 100, 0.2)
    assert good.bound_satisfied and not bad.bound_satisfied
