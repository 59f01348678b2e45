"""Heisenberg back-propagation of Pauli sums with low-weight truncation.

The observable O = sum a_P P is pushed through the circuit adjoint
(O -> U_j^dag O U_j, last layer first).  After each processed layer except
the final one, terms with weight > k (and optionally |a| < coeff_eps) are
dropped; the final layer is exempt because the expectation is evaluated
immediately afterwards and its output weight never feeds another layer.

Gate action is expressed through Pauli transfer matrices: real orthogonal
4^m x 4^m tables T[P][Q] = (1/2^m) Tr[U^dag P U Q] over the gate's support,
so applying a gate preserves sum a_P^2 exactly and only the truncation steps
lose mass.

The hot path works on numpy arrays: masks are (terms, words) uint64 blocks,
64 qubits per word, so 127-qubit registers cost two words per mask.
"""

from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

import numpy as np

from .circuits import Circuit, Gate, KIND_CLIFFORD, KIND_ROTATION
from .paulis import (
    DROP_TOL,
    PauliString,
    PauliSum,
    pauli_commutes,
    pauli_multiply,
    sum_truncate_weight,
)


class BudgetExceededError(RuntimeError):
    """Raised when an intermediate sum exceeds the max_terms budget."""

    def __init__(self, layer_index: int, terms: int, budget: int):
        super().__init__(
            f"term budget exceeded at layer {layer_index}: {terms} > {budget}"
        )
        self.layer_index = layer_index
        self.terms = terms
        self.budget = budget


@dataclass(frozen=True)
class TruncationPolicy:
    """Weight cutoff k, optional coefficient threshold, optional term budget."""

    weight_k: int
    coeff_eps: float = 0.0
    max_terms: int = 0  # 0 disables the budget

    def __post_init__(self) -> None:
        if self.weight_k < 0:
            raise ValueError("weight_k must be nonnegative")
        if self.coeff_eps < 0:
            raise ValueError("coeff_eps must be nonnegative")
        if self.max_terms < 0:
            raise ValueError("max_terms must be nonnegative")


# -- Pauli transfer matrices ------------------------------------------------

@dataclass(frozen=True, eq=False)
class PTMatrix:
    """T[P][Q] = (1/2^m) Tr[U^dag P U Q]; rows are inputs of the adjoint map.

    Site codes run I,X,Y,Z; a two-qubit block index is 4*code(site0) +
    code(site1) with site0 the first support qubit.
    """

    support_size: int
    table: np.ndarray

    def __post_init__(self) -> None:
        dim = 4**self.support_size
        if self.table.shape != (dim, dim):
            raise ValueError("PTM table shape mismatch")
        self.table.setflags(write=False)

    def orthogonality_defect(self) -> float:
        dim = self.table.shape[0]
        return float(np.max(np.abs(self.table @ self.table.T - np.eye(dim))))


# Adjoint conjugation images U^dag P U of the X/Z generators, per gate name.
# Single-qubit images are (letter, sign); two-qubit images are (two-letter
# dense text, sign) on the (site0, site1) block.
_CLIFFORD_GENERATOR_IMAGES = {
    "H": {"X": ("Z", 1), "Z": ("X", 1)},
    "S": {"X": ("Y", -1), "Z": ("Z", 1)},  # S = diag(1, i)
    "X": {"X": ("X", 1), "Z": ("Z", -1)},
    "Y": {"X": ("X", -1), "Z": ("Z", -1)},
    "Z": {"X": ("X", -1), "Z": ("Z", 1)},
    "CNOT": {"XI": ("XX", 1), "IX": ("IX", 1), "ZI": ("ZI", 1), "IZ": ("ZZ", 1)},
    "CZ": {"XI": ("XZ", 1), "IX": ("ZX", 1), "ZI": ("ZI", 1), "IZ": ("IZ", 1)},
    "SWAP": {"XI": ("IX", 1), "IX": ("XI", 1), "ZI": ("IZ", 1), "IZ": ("ZI", 1)},
}


def _block_code(p: PauliString) -> int:
    code = 0
    for q in range(p.n_qubits):
        code = code * 4 + p.site(q)
    return code


def _block_pauli(m: int, code: int) -> PauliString:
    sites = []
    for _ in range(m):
        sites.append(code % 4)
        code //= 4
    sites.reverse()
    x = z = 0
    for q, c in enumerate(sites):
        x |= ((c ^ (c >> 1)) & 1) << q
        z |= ((c >> 1) & 1) << q
    return PauliString(m, x, z)


def _clifford_image(name: str, p: PauliString) -> tuple[PauliString, float]:
    """U^dag P U for a named Clifford, via generator images and Pauli products."""
    m = p.n_qubits
    images = _CLIFFORD_GENERATOR_IMAGES[name]
    result = PauliString.identity(m)
    phase_exp = 0  # power of i
    sign = 1.0
    # factor P = i^{|x&z|} * (product of X_q) * (product of Z_q)
    phase_exp += (p.x_mask & p.z_mask).bit_count()
    for mask, letter in ((p.x_mask, "X"), (p.z_mask, "Z")):
        for q in range(m):
            if not (mask >> q) & 1:
                continue
            key = letter if m == 1 else ("IX"[q == 0] + "IX"[q == 1]).replace("X", letter)
            img_text, img_sign = images[key]
            img = PauliString.from_text(img_text)
            sign *= img_sign
            result, ph = pauli_multiply(result, img)
            phase_exp += ph.exponent
    phase_exp %= 4
    if phase_exp == 2:
        sign = -sign
    elif phase_exp != 0:
        raise AssertionError("Clifford image has a complex phase")
    return result, sign


def _rotation_row(p: PauliString, generator: PauliString, angle: float) -> list[tuple[int, float]]:
    """Row of exp(+i*t*G/2) P exp(-i*t*G/2) = cos t * P - i sin t * P G."""
    if pauli_commutes(p, generator):
        return [(_block_code(p), 1.0)]
    branch, ph = pauli_multiply(p, generator)
    # P anticommutes with G, so P*G is anti-Hermitian: phase is +-i
    sign = 1.0 if ph.exponent == 1 else -1.0
    return [(_block_code(p), np.cos(angle)), (_block_code(branch), sign * np.sin(angle))]


_PAULI_MATS = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


@functools.lru_cache(maxsize=4)
def _basis_matrices(m: int) -> np.ndarray:
    mats = []
    for code in range(4**m):
        p = _block_pauli(m, code)
        mat = np.array([[1.0 + 0j]])
        for q in range(m):
            mat = np.kron(mat, _PAULI_MATS[p.site(q)])
        mats.append(mat)
    out = np.array(mats)
    out.setflags(write=False)
    return out


def gate_ptm(g: Gate) -> PTMatrix:
    """Closed-form PTM for Cliffords and rotations; entrywise for unitaries."""
    m = len(g.support)
    dim = 4**m
    table = np.zeros((dim, dim))
    if g.kind == KIND_CLIFFORD:
        for r in range(dim):
            img, sign = _clifford_image(g.name, _block_pauli(m, r))
            table[r, _block_code(img)] = sign
    elif g.kind == KIND_ROTATION:
        for r in range(dim):
            for c, val in _rotation_row(_block_pauli(m, r), g.generator, g.angle):
                table[r, c] += val
    else:
        basis = _basis_matrices(m)
        conj = g.matrix.conj().T @ basis @ g.matrix
        table = np.real(np.einsum("pij,qji->pq", conj, basis)) / (2**m)
    return PTMatrix(m, table)


# -- product states ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductState:
    """Per-qubit Bloch expectations (<X>, <Y>, <Z>), each of norm <= 1."""

    bloch: np.ndarray  # shape (n, 3)

    def __post_init__(self) -> None:
        b = np.asarray(self.bloch, dtype=float)
        if b.ndim != 2 or b.shape[1] != 3:
            raise ValueError("bloch must have shape (n, 3)")
        norms = np.linalg.norm(b, axis=1)
        if np.any(norms > 1 + 1e-12):
            raise ValueError("per-qubit Bloch norm exceeds 1")
        b.setflags(write=False)
        object.__setattr__(self, "bloch", b)

    @property
    def n_qubits(self) -> int:
        return self.bloch.shape[0]

    def is_pure(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.abs(np.linalg.norm(self.bloch, axis=1) - 1) <= tol))


def zero_state(n: int) -> ProductState:
    b = np.zeros((n, 3))
    b[:, 2] = 1.0
    return ProductState(b)


def plus_state(n: int) -> ProductState:
    b = np.zeros((n, 3))
    b[:, 0] = 1.0
    return ProductState(b)


def product_state_trace(p: PauliString, rho: ProductState) -> float:
    """Tr[P rho]: product over sites of the matching Bloch component."""
    if p.n_qubits != rho.n_qubits:
        raise ValueError("size mismatch between Pauli and state")
    val = 1.0
    for q in p.support:
        val *= rho.bloch[q, p.site(q) - 1]
        if val == 0.0:
            break
    return val


# -- vectorized term arrays ---------------------------------------------------

def _n_words(n: int) -> int:
    return (n + 63) // 64


def _masks_to_words(masks: list[int], words: int) -> np.ndarray:
    out = np.zeros((len(masks), words), dtype=np.uint64)
    mask64 = (1 << 64) - 1
    for w in range(words):
        shift = 64 * w
        out[:, w] = np.fromiter(
            ((m >> shift) & mask64 for m in masks), dtype=np.uint64, count=len(masks)
        )
    return out


def _words_to_mask(row: np.ndarray) -> int:
    out = 0
    for w, val in enumerate(row):
        out |= int(val) << (64 * w)
    return out


def _weights(xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    return np.bitwise_count(xs | zs).sum(axis=1, dtype=np.int64)


def _site_codes(xs: np.ndarray, zs: np.ndarray, q: int) -> np.ndarray:
    w, bit = divmod(q, 64)
    xb = ((xs[:, w] >> np.uint64(bit)) & np.uint64(1)).astype(np.int64)
    zb = ((zs[:, w] >> np.uint64(bit)) & np.uint64(1)).astype(np.int64)
    return xb + zb * (3 - 2 * xb)


def _clear_bit(arr: np.ndarray, q: int) -> None:
    w, bit = divmod(q, 64)
    arr[:, w] &= np.uint64(~(1 << bit) & ((1 << 64) - 1))


def _set_bits_from_codes(xs: np.ndarray, zs: np.ndarray, q: int, codes: np.ndarray) -> None:
    w, bit = divmod(q, 64)
    xb = ((codes ^ (codes >> 1)) & 1).astype(np.uint64)
    zb = ((codes >> 1) & 1).astype(np.uint64)
    xs[:, w] |= xb << np.uint64(bit)
    zs[:, w] |= zb << np.uint64(bit)


class _Terms:
    """Unique-mask term table; the engine's working representation."""

    __slots__ = ("xs", "zs", "coeffs", "n_qubits")

    def __init__(self, xs: np.ndarray, zs: np.ndarray, coeffs: np.ndarray, n_qubits: int):
        self.xs = xs
        self.zs = zs
        self.coeffs = coeffs
        self.n_qubits = n_qubits

    def __len__(self) -> int:
        return len(self.coeffs)

    @staticmethod
    def from_sum(s: PauliSum) -> "_Terms":
        words = _n_words(s.n_qubits)
        items = sorted(s.terms.items(), key=lambda kv: (kv[0].x_mask, kv[0].z_mask))
        xs = _masks_to_words([p.x_mask for p, _ in items], words)
        zs = _masks_to_words([p.z_mask for p, _ in items], words)
        coeffs = np.array([a for _, a in items], dtype=np.float64)
        return _Terms(xs, zs, coeffs, s.n_qubits)

    def to_sum(self) -> PauliSum:
        out = PauliSum(self.n_qubits)
        for i in range(len(self.coeffs)):
            p = PauliString(
                self.n_qubits, _words_to_mask(self.xs[i]), _words_to_mask(self.zs[i])
            )
            out.terms[p] = float(self.coeffs[i])
        return out

    def l2_mass(self) -> float:
        return float(np.dot(self.coeffs, self.coeffs))

    def support_size(self) -> int:
        if len(self.coeffs) == 0:
            return 0
        return int(
            np.bitwise_count(np.bitwise_or.reduce(self.xs | self.zs, axis=0)).sum()
        )


def _apply_ptm_terms(terms: _Terms, support: tuple[int, ...], table: np.ndarray) -> _Terms:
    """Replace each term's restriction to `support` by its PTM image row.

    Outputs of non-identity restrictions are non-identity on the block (the
    identity column of an orthogonal PTM is a unit vector), so they can never
    collide with untouched terms and uniqueness is preserved without a global
    merge: only terms sharing the same off-support mask can collide, and those
    are accumulated group-by-group.
    """
    m = len(support)
    dim = 4**m
    codes = _site_codes(terms.xs, terms.zs, support[0])
    if m == 2:
        codes = codes * 4 + _site_codes(terms.xs, terms.zs, support[1])
    touched = codes != 0
    if not touched.any():
        return terms

    txs = terms.xs[touched].copy()
    tzs = terms.zs[touched].copy()
    tc = terms.coeffs[touched]
    tr = codes[touched]
    for q in support:
        _clear_bit(txs, q)
        _clear_bit(tzs, q)

    # group rows by their off-support masks
    keys = tuple(tzs[:, w] for w in range(tzs.shape[1] - 1, -1, -1)) + tuple(
        txs[:, w] for w in range(txs.shape[1] - 1, -1, -1)
    )
    order = np.lexsort(keys)
    txs, tzs, tc, tr = txs[order], tzs[order], tc[order], tr[order]
    if len(tc) == 1:
        starts = np.array([0])
    else:
        diff = np.any(txs[1:] != txs[:-1], axis=1) | np.any(tzs[1:] != tzs[:-1], axis=1)
        starts = np.concatenate(([0], np.flatnonzero(diff) + 1))

    rows = tc[:, None] * table[tr]
    acc = np.add.reduceat(rows, starts, axis=0)  # (groups, dim)
    keep = np.abs(acc) > DROP_TOL
    keep[:, 0] = False  # identity column is exactly zero for non-identity rows
    out_g, out_q = np.nonzero(keep)
    out_c = acc[keep]

    new_xs = txs[starts][out_g].copy()
    new_zs = tzs[starts][out_g].copy()
    if m == 1:
        _set_bits_from_codes(new_xs, new_zs, support[0], out_q)
    else:
        _set_bits_from_codes(new_xs, new_zs, support[0], out_q >> 2)
        _set_bits_from_codes(new_xs, new_zs, support[1], out_q & 3)

    rest = ~touched
    return _Terms(
        np.concatenate([terms.xs[rest], new_xs]),
        np.concatenate([terms.zs[rest], new_zs]),
        np.concatenate([terms.coeffs[rest], out_c]),
        terms.n_qubits,
    )


def _truncate_terms(
    terms: _Terms, weight_k: int | None, coeff_eps: float
) -> tuple[_Terms, float]:
    """Filter by weight and coefficient; returns (kept terms, dropped l2 mass)."""
    keep = np.ones(len(terms), dtype=bool)
    if weight_k is not None:
        keep &= _weights(terms.xs, terms.zs) <= weight_k
    if coeff_eps > 0:
        keep &= np.abs(terms.coeffs) >= coeff_eps
    if keep.all():
        return terms, 0.0
    dropped = terms.coeffs[~keep]
    kept = _Terms(terms.xs[keep], terms.zs[keep], terms.coeffs[keep], terms.n_qubits)
    return kept, float(np.dot(dropped, dropped))


def _trace_terms(terms: _Terms, rho: ProductState) -> float:
    """sum_P a_P Tr[P rho], vectorized over the term table."""
    if len(terms) == 0:
        return 0.0
    bloch = rho.bloch
    if np.all(bloch[:, 0] == 0) and np.all(bloch[:, 1] == 0) and np.all(bloch[:, 2] == 1):
        diagonal = ~np.any(terms.xs != 0, axis=1)
        return float(terms.coeffs[diagonal].sum())
    vals = terms.coeffs.copy()
    occupied = np.bitwise_or.reduce(terms.xs | terms.zs, axis=0)
    for q in range(terms.n_qubits):
        w, bit = divmod(q, 64)
        if not (int(occupied[w]) >> bit) & 1:
            continue
        codes = _site_codes(terms.xs, terms.zs, q)
        lut = np.array([1.0, bloch[q, 0], bloch[q, 1], bloch[q, 2]])
        vals *= lut[codes]
    return float(vals.sum())


# -- the propagation API -------------------------------------------------------

@dataclass(frozen=True)
class LayerStats:
    """One record per processed circuit layer (layer index is circuit time)."""

    layer: int
    terms_before: int
    terms_after: int
    mass_truncated: float
    millis: float
    support_size: int = 0


@dataclass
class PropagationResult:
    final: PauliSum
    layer_stats: list[LayerStats] = field(default_factory=list)
    peak_terms: int = 0
    initial_mass_truncated: float = 0.0
    total_millis: float = 0.0

    def total_truncated_mass(self) -> float:
        return self.initial_mass_truncated + sum(
            s.mass_truncated for s in self.layer_stats
        )


def apply_gate_adjoint(s: PauliSum, g: Gate, ptm: PTMatrix | None = None) -> PauliSum:
    """One adjoint gate application on a PauliSum; l2 mass is preserved."""
    if max(g.support) >= s.n_qubits:
        raise ValueError("gate support outside the sum's register")
    if ptm is None:
        ptm = gate_ptm(g)
    terms = _Terms.from_sum(s)
    return _apply_ptm_terms(terms, g.support, ptm.table).to_sum()


def back_propagate(
    o: PauliSum,
    c: Circuit,
    policy: TruncationPolicy,
    truncate_per_gate: bool = False,
) -> PropagationResult:
    """Low-weight Pauli propagation, steps 1-3.

    Step 1 keeps only weight <= k terms of O.  Layers are processed last to
    first; after each layer except layer 1 the weight cutoff (and coeff_eps,
    if set) is applied.  truncate_per_gate applies the cutoff after each gate
    instead of each layer; for one-gate layers the two coincide.
    """
    if o.n_qubits != c.n_qubits:
        raise ValueError("observable and circuit sizes differ")
    if policy.weight_k > c.n_qubits:
        raise ValueError("weight_k exceeds n_qubits")
    t0 = time.perf_counter()
    result = PropagationResult(final=PauliSum(o.n_qubits))

    start = sum_truncate_weight(o, policy.weight_k)
    result.initial_mass_truncated = max(
        0.0, _mass(o) - _mass(start)
    )
    terms = _Terms.from_sum(start)
    result.peak_terms = len(terms)

    budget = policy.max_terms

    def check_budget(count: int, layer_index: int) -> None:
        if budget and count > budget:
            raise BudgetExceededError(layer_index, count, budget)

    ptms = {}

    for rev, layer in enumerate(reversed(c.layers)):
        layer_index = c.depth - rev  # 1-based circuit-time index
        is_final = layer_index == 1
        lt0 = time.perf_counter()
        before = len(terms)
        mass_lost = 0.0
        for g in layer.gates:
            key = id(g)
            if key not in ptms:
                ptms[key] = gate_ptm(g)
            terms = _apply_ptm_terms(terms, g.support, ptms[key].table)
            result.peak_terms = max(result.peak_terms, len(terms))
            if truncate_per_gate and not is_final:
                terms, lost = _truncate_terms(terms, policy.weight_k, policy.coeff_eps)
                mass_lost += lost
            check_budget(len(terms), layer_index)
        if not truncate_per_gate and not is_final:
            terms, lost = _truncate_terms(terms, policy.weight_k, policy.coeff_eps)
            mass_lost += lost
            check_budget(len(terms), layer_index)
        result.layer_stats.append(
            LayerStats(
                layer=layer_index,
                terms_before=before,
                terms_after=len(terms),
                mass_truncated=mass_lost,
                millis=(time.perf_counter() - lt0) * 1e3,
                support_size=terms.support_size(),
            )
        )

    result.final = terms.to_sum()
    result.total_millis = (time.perf_counter() - t0) * 1e3
    return result


def _mass(s: PauliSum) -> float:
    return float(sum(a * a for a in s.terms.values()))


def estimate_expectation(
    o: PauliSum,
    c: Circuit,
    policy: TruncationPolicy,
    rho: ProductState,
) -> float:
    """The truncated estimate of Tr[U rho U^dag O]."""
    if rho.n_qubits != c.n_qubits:
        raise ValueError("state and circuit sizes differ")
    res = back_propagate(o, c, policy)
    return _trace_terms(_Terms.from_sum(res.final), rho)
