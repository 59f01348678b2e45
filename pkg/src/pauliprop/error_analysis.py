"""Analytic and Monte Carlo error quantification for truncated propagation.

The mean-squared error of the weight-k estimator over a random-circuit
ensemble decomposes over Pauli paths: sampling the terminal Pauli from the
observable's spectrum (prob a_P^2 / sum a^2) and walking backwards through
per-gate second-moment transfer distributions E_U Tr[U^dag s U t]^2 yields
an unbiased MSE estimate via

    X = (sum_P a_P^2) * Tr[P_0 rho]^2 * 1[some intermediate weight > k],

with 0 <= X <= sum_P a_P^2.  The same walk with the indicator dropped
estimates E f^2, hence the variance of the exact expectation value (the
trivial estimator's MSE).

Closed-form transfers: a Haar 4x4 block sends any non-identity restricted
Pauli to each of the 15 non-identity block Paulis with probability 1/15; a
single-qubit 2-design mixes uniformly over X, Y, Z; a rotation with a
uniform angle fixes commuting Paulis and flips a fair coin between the input
and its conjugate branch string otherwise (E cos^2 = E sin^2 = 1/2).  Signs
of branch strings are dropped throughout: every downstream quantity
(weights, Tr[P rho]^2) is sign-invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuits import (
    EnsembleSpec,
    FixedAngles,
    GateSlot,
    IndependentUniform,
    SharedSingleAngle,
    sample_circuit,
)
from .oracle import ORACLE_MAX_QUBITS, statevector_expectation
from .paulis import PauliString, PauliSum, pauli_commutes, pauli_multiply, sum_l2_mass
from .propagation import (
    ProductState,
    TruncationPolicy,
    _block_code,
    _block_pauli,
    _masks_to_words,
    _n_words,
    _set_bits_from_codes,
    _site_codes,
    _weights,
    _words_to_mask,
    estimate_expectation,
)


class UnsupportedEnsembleError(ValueError):
    """The ensemble has no closed-form second-moment transfer."""


def mse_bound(k: int, op_norm_sq: float) -> float:
    """(2/3)^(k+1) * op_norm_sq, the analytic average-error bound."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return (2.0 / 3.0) ** (k + 1) * op_norm_sq


def pauli_count(n: int, k: int) -> tuple[int, float]:
    """(exact, bound): sum_{l<=k} 3^l C(n,l) and (3en/k)^k (1 at k=0)."""
    if k > n:
        raise ValueError("k must not exceed n")
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    exact = sum(3**l * math.comb(n, l) for l in range(k + 1))
    bound = 1.0 if k == 0 else (3.0 * math.e * n / k) ** k
    return exact, bound


def chernoff_samples(eps: float, delta: float) -> int:
    """Paths needed for additive error eps*l2_mass with failure prob delta."""
    if not (0 < eps <= 1 and 0 < delta < 1):
        raise ValueError("need 0 < eps <= 1 and 0 < delta < 1")
    return math.ceil(math.log(2.0 / delta) / (2.0 * eps * eps))


@dataclass(frozen=True)
class MSEEstimate:
    """Monte Carlo mean +- stderr with the analytic bound alongside."""

    mean: float
    stderr: float
    samples: int
    bound: float

    @property
    def bound_satisfied(self) -> bool:
        return self.mean <= self.bound + 5.0 * self.stderr


# -- second-moment transfers --------------------------------------------------

@dataclass(frozen=True, eq=False)
class SlotTransfer:
    """Output distribution over restricted Paulis for one gate slot.

    kind "haar4"/"haar1": uniform mixing over the non-identity block Paulis.
    kind "rotation": `anti[r]` marks inputs anticommuting with the generator
    and `branch[r]` their unsigned conjugate branch code.
    """

    support: tuple[int, ...]
    kind: str
    anti: np.ndarray | None = None
    branch: np.ndarray | None = None

    def row_distribution(self, code: int) -> dict[int, float]:
        dim = 4 ** len(self.support)
        if code == 0:
            return {0: 1.0}
        if self.kind in ("haar4", "haar1"):
            return {c: 1.0 / (dim - 1) for c in range(1, dim)}
        if self.anti[code]:
            return {code: 0.5, int(self.branch[code]): 0.5}
        return {code: 1.0}


@dataclass(frozen=True)
class SecondMomentTransfer:
    """Per-layer slot transfers, aligned with the ensemble's slot layout."""

    n_qubits: int
    layers: tuple[tuple[SlotTransfer, ...], ...]

    def validate(self, tol: float = 1e-12) -> None:
        for layer in self.layers:
            for slot in layer:
                dim = 4 ** len(slot.support)
                for code in range(dim):
                    row = slot.row_distribution(code)
                    if abs(sum(row.values()) - 1.0) > tol:
                        raise AssertionError("transfer row does not sum to 1")
                if slot.row_distribution(0) != {0: 1.0}:
                    raise AssertionError("identity must map to identity")


def _rotation_tables(slot: GateSlot) -> tuple[np.ndarray, np.ndarray]:
    m = len(slot.support)
    dim = 4**m
    anti = np.zeros(dim, dtype=bool)
    branch = np.zeros(dim, dtype=np.int64)
    for r in range(1, dim):
        p = _block_pauli(m, r)
        if not pauli_commutes(p, slot.generator):
            anti[r] = True
            branch[r] = _block_code(pauli_multiply(p, slot.generator)[0])
    return anti, branch


def build_transfer(spec: EnsembleSpec) -> SecondMomentTransfer:
    """Closed-form transfer for the ensemble; validates every row.

    Raises UnsupportedEnsembleError for correlated angles (SharedSingleAngle
    or FixedAngles): their Fourier coefficients are not uncorrelated across
    paths, so the path sampler's MSE identity fails.  Fixed non-random
    unitary gates are rejected for the same reason.
    """
    if isinstance(spec.angle_correlation, (SharedSingleAngle, FixedAngles)):
        raise UnsupportedEnsembleError(
            "correlated rotation angles break path orthogonality"
        )
    assert isinstance(spec.angle_correlation, IndependentUniform)
    layers = []
    for slot_layer in spec.slot_layers():
        slots = []
        for slot in slot_layer:
            if slot.family in ("haar4", "haar1"):
                slots.append(SlotTransfer(slot.support, slot.family))
            elif slot.family == "rotation":
                anti, branch = _rotation_tables(slot)
                slots.append(SlotTransfer(slot.support, "rotation", anti, branch))
            else:
                raise UnsupportedEnsembleError(
                    f"no second-moment closed form for slot family {slot.family!r}"
                )
        layers.append(tuple(slots))
    transfer = SecondMomentTransfer(spec.n_qubits, tuple(layers))
    transfer.validate()
    return transfer


# -- the path sampler ----------------------------------------------------------

@dataclass(frozen=True)
class PathSample:
    """One sampled backward path, retained only in debug runs."""

    terminal: PauliString
    chain: tuple[PauliString, ...]  # P_L ... P_0
    truncated: bool
    x_value: float


class _PathWalker:
    """Vectorized backward walk over the transfer layers for many samples."""

    def __init__(self, transfer: SecondMomentTransfer, o: PauliSum, rng):
        self.transfer = transfer
        self.rng = rng
        self.n = transfer.n_qubits
        self.words = _n_words(self.n)
        items = sorted(o.terms.items(), key=lambda kv: (kv[0].x_mask, kv[0].z_mask))
        self.term_x = _masks_to_words([p.x_mask for p, _ in items], self.words)
        self.term_z = _masks_to_words([p.z_mask for p, _ in items], self.words)
        coeffs = np.array([a for _, a in items])
        self.l2 = float(np.dot(coeffs, coeffs))
        if self.l2 <= 0:
            raise ValueError("observable has zero mass")
        self.spectrum = coeffs**2 / self.l2
        self.identity_coeff = o.identity_coefficient()

    def walk(self, samples: int, keep_chain: bool = False):
        """Returns (max intermediate weight, s_0 masks, optional chain masks)."""
        rng = self.rng
        pick = rng.choice(len(self.spectrum), size=samples, p=self.spectrum)
        xs = self.term_x[pick].copy()
        zs = self.term_z[pick].copy()
        max_w = _weights(xs, zs)
        chains = [(xs.copy(), zs.copy())] if keep_chain else None
        n_layers = len(self.transfer.layers)
        for t, layer in enumerate(reversed(self.transfer.layers)):
            for slot in layer:
                self._transition(xs, zs, slot)
            if t < n_layers - 1:  # s_0 carries no weight constraint
                np.maximum(max_w, _weights(xs, zs), out=max_w)
            if keep_chain:
                chains.append((xs.copy(), zs.copy()))
        return max_w, xs, zs, chains

    def _transition(self, xs, zs, slot: SlotTransfer) -> None:
        rng = self.rng
        m = len(slot.support)
        codes = _site_codes(xs, zs, slot.support[0])
        if m == 2:
            codes = codes * 4 + _site_codes(xs, zs, slot.support[1])
        touched = np.flatnonzero(codes)
        if len(touched) == 0:
            return
        if slot.kind in ("haar4", "haar1"):
            dim = 4**m
            new_codes = rng.integers(1, dim, size=len(touched))
        else:
            tc = codes[touched]
            new_codes = tc.copy()
            anti_rows = slot.anti[tc]
            flip = rng.random(len(touched)) < 0.5
            jump = anti_rows & flip
            new_codes[jump] = slot.branch[tc[jump]]
        sel_x, sel_z = xs[touched], zs[touched]
        for q in slot.support:
            w, bit = divmod(q, 64)
            keep = np.uint64(~(1 << bit) & ((1 << 64) - 1))
            sel_x[:, w] &= keep
            sel_z[:, w] &= keep
        if m == 1:
            _set_bits_from_codes(sel_x, sel_z, slot.support[0], new_codes)
        else:
            _set_bits_from_codes(sel_x, sel_z, slot.support[0], new_codes >> 2)
            _set_bits_from_codes(sel_x, sel_z, slot.support[1], new_codes & 3)
        xs[touched] = sel_x
        zs[touched] = sel_z


def _trace_squared(xs, zs, rho: ProductState) -> np.ndarray:
    """Tr[P_0 rho]^2 per sample."""
    b = rho.bloch
    if np.all(b[:, 0] == 0) and np.all(b[:, 1] == 0) and np.all(b[:, 2] == 1):
        return (~np.any(xs != 0, axis=1)).astype(np.float64)
    vals = np.ones(len(xs))
    occupied = np.bitwise_or.reduce(xs | zs, axis=0)
    for q in range(rho.n_qubits):
        w, bit = divmod(q, 64)
        if not (int(occupied[w]) >> bit) & 1:
            continue
        codes = _site_codes(xs, zs, q)
        lut = np.array([1.0, b[q, 0], b[q, 1], b[q, 2]])
        vals *= lut[codes]
    return vals**2


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    mean = float(values.mean())
    if len(values) < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(len(values)))


@dataclass(frozen=True)
class MCProfile:
    """Shared-path MC results: one MSE estimate per k plus a Var f estimate."""

    per_k: dict[int, MSEEstimate]
    var_f_mean: float
    var_f_stderr: float


def mc_mse_profile(
    spec: EnsembleSpec,
    o: PauliSum,
    rho: ProductState,
    ks: list[int],
    samples: int,
    rng: np.random.Generator,
) -> MCProfile:
    """One path ensemble evaluated at every k (estimates are comonotone in k)."""
    transfer = build_transfer(spec)
    walker = _PathWalker(transfer, o, rng)
    max_w, xs, zs, _ = walker.walk(samples)
    d_sq = _trace_squared(xs, zs, rho)
    per_k = {}
    for k in ks:
        x_vals = walker.l2 * d_sq * (max_w > k)
        mean, se = _mean_stderr(x_vals)
        per_k[k] = MSEEstimate(mean, se, samples, mse_bound(k, walker.l2))
    f_sq = walker.l2 * d_sq
    m2, se2 = _mean_stderr(f_sq)
    return MCProfile(per_k, m2 - walker.identity_coeff**2, se2)


def mc_mse_estimate(
    spec: EnsembleSpec,
    o: PauliSum,
    rho: ProductState,
    k: int,
    samples: int,
    rng: np.random.Generator,
    keep_paths: bool = False,
) -> MSEEstimate | tuple[MSEEstimate, list[PathSample]]:
    """Certified Monte Carlo estimate of the mean squared error at cutoff k."""
    if samples < 1:
        raise ValueError("samples must be positive")
    if not keep_paths:
        return mc_mse_profile(spec, o, rho, [k], samples, rng).per_k[k]
    transfer = build_transfer(spec)
    walker = _PathWalker(transfer, o, rng)
    max_w, xs, zs, chains = walker.walk(samples, keep_chain=True)
    d_sq = _trace_squared(xs, zs, rho)
    x_vals = walker.l2 * d_sq * (max_w > k)
    mean, se = _mean_stderr(x_vals)
    est = MSEEstimate(mean, se, samples, mse_bound(k, walker.l2))
    paths = []
    n = spec.n_qubits
    for i in range(samples):
        chain = tuple(
            PauliString(n, _words_to_mask(cx[i]), _words_to_mask(cz[i]))
            for cx, cz in chains
        )
        paths.append(
            PathSample(chain[0], chain, bool(max_w[i] > k), float(x_vals[i]))
        )
    return est, paths


# -- oracle-based estimators ----------------------------------------------------

def paired_estimates(
    spec: EnsembleSpec,
    o: PauliSum,
    rho: ProductState,
    k: int,
    trials: int,
    rng: np.random.Generator,
    with_oracle: bool = True,
) -> tuple[np.ndarray | None, np.ndarray]:
    """(exact f, truncated f~) on the same sampled circuits (paired draws)."""
    if with_oracle and spec.n_qubits > ORACLE_MAX_QUBITS:
        raise ValueError("ensemble exceeds the oracle qubit cap")
    if trials < 1:
        raise ValueError("trials must be positive")
    seeds = rng.integers(0, 2**63 - 1, size=trials)
    policy = TruncationPolicy(k)
    f = np.zeros(trials) if with_oracle else None
    f_tilde = np.zeros(trials)
    for i in range(trials):
        c = sample_circuit(spec, np.random.default_rng(int(seeds[i])))
        f_tilde[i] = estimate_expectation(o, c, policy, rho)
        if with_oracle:
            f[i] = statevector_expectation(c, o, rho)
    return f, f_tilde


def empirical_mse(
    spec: EnsembleSpec,
    o: PauliSum,
    rho: ProductState,
    k: int,
    trials: int,
    rng: np.random.Generator,
) -> MSEEstimate:
    """Oracle-based MSE over sampled circuits; works for any ensemble."""
    f, f_tilde = paired_estimates(spec, o, rho, k, trials, rng)
    sq = (f - f_tilde) ** 2
    mean, se = _mean_stderr(sq)
    return MSEEstimate(mean, se, trials, mse_bound(k, sum_l2_mass(o)))


def trivial_estimator_stats(
    spec: EnsembleSpec,
    o: PauliSum,
    rho: ProductState,
    trials: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """(mu, variance): the always-guess-the-mean baseline and its MSE.

    mu = Tr[O]/2^n is the identity coefficient of O; the variance of the
    exact expectation value over the ensemble equals that estimator's MSE.
    """
    if spec.n_qubits > ORACLE_MAX_QUBITS:
        raise ValueError("ensemble exceeds the oracle qubit cap")
    seeds = rng.integers(0, 2**63 - 1, size=trials)
    vals = np.zeros(trials)
    for i in range(trials):
        c = sample_circuit(spec, np.random.default_rng(int(seeds[i])))
        vals[i] = statevector_expectation(c, o, rho)
    var = float(vals.var(ddof=1)) if trials > 1 else 0.0
    return o.identity_coefficient(), var


def weight1_variance_brickwork(depth: int, o: PauliSum) -> float:
    """(1/5)(2/5)^L times the weight-1 mass of O: the exact variance of the
    weight-1 estimator on brickwork ensembles whose every layer covers every
    qubit along L scrambling steps after the initial layer."""
    if depth < 1:
        raise ValueError("depth must be positive")
    mass1 = sum(a * a for p, a in o.terms.items() if p.weight == 1)
    return 0.2 * (0.4**depth) * mass1


def variance_stderr(values: np.ndarray) -> float:
    """Asymptotic stderr of the sample variance: sqrt((m4 - s^4)/N)."""
    n = len(values)
    centered = values - values.mean()
    m4 = float(np.mean(centered**4))
    s2 = float(np.var(values, ddof=1))
    return math.sqrt(max(m4 - s2 * s2, 0.0) / n)


def bootstrap_stderr(
    statistic, arrays: tuple[np.ndarray, ...], replicates: int, rng: np.random.Generator
) -> float:
    """Stderr of `statistic(*arrays)` under seeded nonparametric resampling."""
    n = len(arrays[0])
    vals = np.zeros(replicates)
    for b in range(replicates):
        idx = rng.integers(0, n, size=n)
        vals[b] = statistic(*(a[idx] for a in arrays))
    return float(vals.std(ddof=1))
