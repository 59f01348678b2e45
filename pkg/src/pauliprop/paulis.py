"""Bit-mask Pauli string algebra and the sparse real-coefficient Pauli sum.

A Pauli string on n qubits is stored as a pair of integer bit masks
(x_mask, z_mask); qubit q is I/X/Y/Z for (x, z) = (0,0)/(1,0)/(0,1)/(1,1).
Python integers act as arbitrary-width bitsets, so n > 64 works out of the
box.  Coefficients are real doubles: every operator handled here is
Hermitian, and the +-i phases that appear during Pauli multiplication fold
into the sign of the coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Coefficients below this magnitude are numerical dust from transfer-matrix
# application and are dropped on merge.
DROP_TOL = 1e-14

_PAULI_CHARS = "IXYZ"
# site code 0..3 (I,X,Y,Z) -> (x bit, z bit)
_CODE_TO_BITS = ((0, 0), (1, 0), (1, 1), (0, 1))
_BITS_TO_CODE = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}


@dataclass(frozen=True)
class PauliPhase:
    """Power of i modulo 4; the phase group of the Pauli algebra."""

    exponent: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "exponent", self.exponent % 4)

    @property
    def value(self) -> complex:
        return (1, 1j, -1, -1j)[self.exponent]

    def __mul__(self, other: "PauliPhase") -> "PauliPhase":
        return PauliPhase(self.exponent + other.exponent)


@dataclass(frozen=True)
class PauliString:
    """One n-qubit Pauli as paired X/Z bit masks."""

    n_qubits: int
    x_mask: int
    z_mask: int
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_qubits <= 0:
            raise ValueError("n_qubits must be positive")
        full = (1 << self.n_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask has bits above n_qubits")
        if self.x_mask < 0 or self.z_mask < 0:
            raise ValueError("masks must be nonnegative")
        object.__setattr__(
            self, "_hash", hash((self.n_qubits, self.x_mask, self.z_mask))
        )

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PauliString)
            and self.n_qubits == other.n_qubits
            and self.x_mask == other.x_mask
            and self.z_mask == other.z_mask
        )

    @property
    def weight(self) -> int:
        """Number of non-identity sites."""
        return (self.x_mask | self.z_mask).bit_count()

    @property
    def is_identity(self) -> bool:
        return not (self.x_mask | self.z_mask)

    @property
    def support(self) -> tuple[int, ...]:
        m = self.x_mask | self.z_mask
        return tuple(q for q in range(self.n_qubits) if (m >> q) & 1)

    def site(self, q: int) -> int:
        """Pauli code 0..3 (I,X,Y,Z) at qubit q."""
        return _BITS_TO_CODE[((self.x_mask >> q) & 1, (self.z_mask >> q) & 1)]

    def restrict(self, qubits: tuple[int, ...]) -> "PauliString":
        """The Pauli on the given qubits, reindexed to 0..len(qubits)-1."""
        x = z = 0
        for i, q in enumerate(qubits):
            x |= ((self.x_mask >> q) & 1) << i
            z |= ((self.z_mask >> q) & 1) << i
        return PauliString(len(qubits), x, z)

    # -- text forms ------------------------------------------------------

    def to_text(self) -> str:
        """Dense form, leftmost character = qubit 0 (e.g. "ZIII")."""
        return "".join(_PAULI_CHARS[self.site(q)] for q in range(self.n_qubits))

    def to_sparse_text(self) -> str:
        """Sparse form like "Z0*X3"; the identity prints as "I"."""
        if self.is_identity:
            return "I"
        return "*".join(f"{_PAULI_CHARS[self.site(q)]}{q}" for q in self.support)

    def __str__(self) -> str:
        return self.to_text()

    @staticmethod
    def identity(n_qubits: int) -> "PauliString":
        return PauliString(n_qubits, 0, 0)

    @staticmethod
    def from_masks(n_qubits: int, x_mask: int, z_mask: int) -> "PauliString":
        return PauliString(n_qubits, x_mask, z_mask)

    @staticmethod
    def single(n_qubits: int, q: int, letter: str) -> "PauliString":
        """Weight-1 string with `letter` (X/Y/Z) at qubit q."""
        code = _PAULI_CHARS.index(letter.upper())
        if code == 0:
            return PauliString.identity(n_qubits)
        xb, zb = _CODE_TO_BITS[code]
        return PauliString(n_qubits, xb << q, zb << q)

    @staticmethod
    def from_text(text: str, n_qubits: int | None = None) -> "PauliString":
        """Parse either the dense or the sparse literal form.

        Dense form infers n_qubits from the length unless given; the sparse
        form requires n_qubits (indices alone do not fix the register size).
        """
        text = text.strip()
        if not text:
            raise ValueError("empty Pauli literal")
        if text == "I" and n_qubits is not None:
            return PauliString.identity(n_qubits)
        if any(ch.isdigit() for ch in text) or "*" in text:
            if n_qubits is None:
                raise ValueError("sparse Pauli literal needs n_qubits")
            x = z = 0
            for factor in text.split("*"):
                factor = factor.strip()
                if factor == "I":
                    continue
                letter, idx = factor[0].upper(), factor[1:]
                if letter not in "XYZ" or not idx.isdigit():
                    raise ValueError(f"bad sparse Pauli factor {factor!r}")
                q = int(idx)
                if q >= n_qubits:
                    raise ValueError(f"qubit {q} out of range for n={n_qubits}")
                if (x | z) >> q & 1:
                    raise ValueError(f"qubit {q} repeated in {text!r}")
                xb, zb = _CODE_TO_BITS["IXYZ".index(letter)]
                x |= xb << q
                z |= zb << q
            return PauliString(n_qubits, x, z)
        if n_qubits is not None and len(text) != n_qubits:
            raise ValueError("dense literal length does not match n_qubits")
        x = z = 0
        for q, ch in enumerate(text.upper()):
            if ch not in _PAULI_CHARS:
                raise ValueError(f"bad Pauli character {ch!r}")
            xb, zb = _CODE_TO_BITS[_PAULI_CHARS.index(ch)]
            x |= xb << q
            z |= zb << q
        return PauliString(len(text), x, z)


def pauli_weight(p: PauliString) -> int:
    """popcount(x_mask | z_mask)."""
    return p.weight


def pauli_commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the number of sitewise-anticommuting qubits is even."""
    if p.n_qubits != q.n_qubits:
        raise ValueError("size mismatch between Pauli strings")
    anti = (p.x_mask & q.z_mask).bit_count() + (p.z_mask & q.x_mask).bit_count()
    return anti % 2 == 0


def pauli_multiply(p: PauliString, q: PauliString) -> tuple[PauliString, PauliPhase]:
    """Product P*Q = phase * R with R.x = P.x^Q.x, R.z = P.z^Q.z.

    Phase bookkeeping uses the canonical form P = i^{|x&z|} X^x Z^z, whose
    sitewise products pick up (-1)^{|P.z & Q.x|} from commuting Z past X.
    """
    if p.n_qubits != q.n_qubits:
        raise ValueError("size mismatch between Pauli strings")
    x3 = p.x_mask ^ q.x_mask
    z3 = p.z_mask ^ q.z_mask
    exponent = (
        (p.x_mask & p.z_mask).bit_count()
        + (q.x_mask & q.z_mask).bit_count()
        - (x3 & z3).bit_count()
        + 2 * (p.z_mask & q.x_mask).bit_count()
    )
    return PauliString(p.n_qubits, x3, z3), PauliPhase(exponent)


class PauliSum:
    """Sparse real-coefficient expansion O = sum_P a_P P.

    Stored as a dict PauliString -> float.  All keys share n_qubits and no
    stored coefficient is smaller in magnitude than DROP_TOL.
    """

    __slots__ = ("n_qubits", "terms")

    def __init__(self, n_qubits: int, terms: dict[PauliString, float] | None = None):
        self.n_qubits = n_qubits
        self.terms: dict[PauliString, float] = {}
        if terms:
            for p, a in terms.items():
                self.add_term(p, a)

    def add_term(self, p: PauliString, a: float) -> None:
        if p.n_qubits != self.n_qubits:
            raise ValueError("size mismatch between term and sum")
        c = self.terms.get(p, 0.0) + a
        if abs(c) < DROP_TOL:
            self.terms.pop(p, None)
        else:
            self.terms[p] = c

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, p: PauliString) -> float:
        return self.terms.get(p, 0.0)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PauliSum)
            and self.n_qubits == other.n_qubits
            and self.terms == other.terms
        )

    def copy(self) -> "PauliSum":
        out = PauliSum(self.n_qubits)
        out.terms = dict(self.terms)
        return out

    def identity_coefficient(self) -> float:
        return self.terms.get(PauliString.identity(self.n_qubits), 0.0)

    def __repr__(self) -> str:
        inner = " + ".join(
            f"{a:+g}*{p.to_sparse_text()}" for p, a in sorted(
                self.terms.items(), key=lambda kv: (kv[0].x_mask, kv[0].z_mask)
            )
        )
        return f"PauliSum({self.n_qubits}: {inner or '0'})"

    @staticmethod
    def from_terms(n_qubits: int, items: dict[str, float]) -> "PauliSum":
        """Build from {pauli literal: coefficient} (dense or sparse literals)."""
        out = PauliSum(n_qubits)
        for text, a in items.items():
            out.add_term(PauliString.from_text(text, n_qubits), a)
        return out


def sum_truncate_weight(s: PauliSum, k: int) -> PauliSum:
    """Sub-sum over terms with weight <= k; the input is unchanged."""
    out = PauliSum(s.n_qubits)
    for p, a in s.terms.items():
        if p.weight <= k:
            out.terms[p] = a
    return out


def sum_truncate_coeff(s: PauliSum, eps: float) -> PauliSum:
    """Drop terms with |a_P| < eps; eps = 0 is a no-op."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    out = PauliSum(s.n_qubits)
    for p, a in s.terms.items():
        if abs(a) >= eps:
            out.terms[p] = a
    return out


def sum_l2_mass(s: PauliSum) -> float:
    """sum_P a_P^2, the squared Pauli-2 norm in the unnormalized basis."""
    return float(sum(a * a for a in s.terms.values()))


def sum_weight_histogram(s: PauliSum) -> dict[int, tuple[int, float]]:
    """Per weight w: (term count, sum of a_P^2 over |P| = w)."""
    counts: dict[int, int] = {}
    masses: dict[int, float] = {}
    for p, a in s.terms.items():
        w = p.weight
        counts[w] = counts.get(w, 0) + 1
        masses[w] = masses.get(w, 0.0) + a * a
    return {w: (counts[w], masses[w]) for w in sorted(counts)}


def read_observable(text: str, n_qubits: int) -> PauliSum:
    """Parse observable text: a bare Pauli literal, or lines "coeff literal"."""
    stripped = text.strip()
    lines = [ln for ln in stripped.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    out = PauliSum(n_qubits)
    if len(lines) == 1 and len(lines[0].split()) == 1:
        out.add_term(PauliString.from_text(lines[0], n_qubits), 1.0)
        return out
    for ln in lines:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad observable line {ln!r}; want 'coeff pauli'")
        out.add_term(PauliString.from_text(parts[1], n_qubits), float(parts[0]))
    return out
