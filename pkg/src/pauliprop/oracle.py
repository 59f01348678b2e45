"""Brute-force statevector reference for small registers.

Everything here is built straight from gate definitions (dense matrices,
forward evolution), independent of the closed-form transfer matrices in the
propagation module, so the two can cross-check each other.
"""

from __future__ import annotations

import numpy as np

from .circuits import Circuit, Gate, KIND_CLIFFORD, KIND_ROTATION
from .paulis import PauliString, PauliSum
from .propagation import PTMatrix, ProductState

# 2^14 amplitudes keeps a single expectation well under a second.
ORACLE_MAX_QUBITS = 14

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)
_PAULIS = (_I2, _X, _Y, _Z)

# two-qubit basis is |site0 site1> with site0 the most significant bit
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
)
_CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)
_NAMED = {"H": _H, "S": _S, "X": _X, "Y": _Y, "Z": _Z, "CNOT": _CNOT, "CZ": _CZ, "SWAP": _SWAP}


def pauli_matrix(p: PauliString) -> np.ndarray:
    """Dense matrix of a Pauli string; qubit 0 is the most significant factor."""
    m = np.array([[1.0 + 0j]])
    for q in range(p.n_qubits):
        m = np.kron(m, _PAULIS[p.site(q)])
    return m


def gate_matrix(g: Gate) -> np.ndarray:
    """Dense matrix on the gate's support block, built from definitions."""
    if g.kind == KIND_CLIFFORD:
        return _NAMED[g.name]
    if g.kind == KIND_ROTATION:
        gm = pauli_matrix(g.generator)
        dim = gm.shape[0]
        return np.cos(g.angle / 2) * np.eye(dim) - 1j * np.sin(g.angle / 2) * gm
    return g.matrix


class StateVector:
    """Dense amplitudes, little-endian: bit q of the index is qubit q."""

    def __init__(self, n_qubits: int, amplitudes: np.ndarray):
        if n_qubits > ORACLE_MAX_QUBITS:
            raise ValueError(f"oracle capped at {ORACLE_MAX_QUBITS} qubits")
        if amplitudes.shape != (2**n_qubits,):
            raise ValueError("amplitude length mismatch")
        if abs(np.linalg.norm(amplitudes) - 1.0) > 1e-10:
            raise ValueError("state is not normalized")
        self.n_qubits = n_qubits
        self.amplitudes = amplitudes.astype(np.complex128)

    @staticmethod
    def from_product_state(rho: ProductState) -> "StateVector":
        n = rho.n_qubits
        if not rho.is_pure():
            raise ValueError("oracle input must be a pure product state")
        psi = np.array([1.0 + 0j])
        for q in range(n):
            bx, by, bz = rho.bloch[q]
            theta = np.arccos(np.clip(bz, -1.0, 1.0))
            phi = np.arctan2(by, bx)
            amp = np.array(
                [np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)]
            )
            psi = np.kron(amp, psi)  # qubit q becomes the next significant bit
        return StateVector(n, psi)

    def _axes(self, qubits: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(self.n_qubits - 1 - q for q in qubits)

    def apply_gate(self, g: Gate) -> None:
        m = gate_matrix(g)
        n = self.n_qubits
        t = self.amplitudes.reshape((2,) * n)
        axes = self._axes(g.support)
        t = np.moveaxis(t, axes, range(len(axes)))
        shape = t.shape
        t = (m @ t.reshape(m.shape[0], -1)).reshape(shape)
        t = np.moveaxis(t, range(len(axes)), axes)
        self.amplitudes = np.ascontiguousarray(t).reshape(-1)

    def apply_circuit(self, c: Circuit) -> None:
        for layer in c.layers:
            for g in layer.gates:
                self.apply_gate(g)

    def pauli_expectation(self, p: PauliString) -> float:
        """<psi|P|psi> via index arithmetic: P|b> = i^{|x&z|}(-1)^{|b&z|}|b^x>."""
        if p.n_qubits != self.n_qubits:
            raise ValueError("size mismatch")
        idx = np.arange(2**self.n_qubits, dtype=np.int64)
        flipped = self.amplitudes[idx ^ p.x_mask]
        signs = 1.0 - 2.0 * (
            np.bitwise_count((idx ^ p.x_mask) & p.z_mask).astype(np.float64) % 2
        )
        phase = 1j ** ((p.x_mask & p.z_mask).bit_count() % 4)
        val = np.vdot(self.amplitudes, phase * signs * flipped)
        return float(val.real)


def statevector_expectation(c: Circuit, o: PauliSum, rho: ProductState) -> float:
    """Exact Tr[U rho U^dag O] for n <= ORACLE_MAX_QUBITS, pure product rho."""
    if o.n_qubits != c.n_qubits or rho.n_qubits != c.n_qubits:
        raise ValueError("size mismatch")
    psi = StateVector.from_product_state(rho)
    psi.apply_circuit(c)
    return sum(a * psi.pauli_expectation(p) for p, a in o.terms.items())


def ptm_reference(g: Gate) -> PTMatrix:
    """Every entry (1/2^m) Tr[U^dag P U Q] by dense matrix algebra."""
    m = len(g.support)
    dim = 4**m
    u = gate_matrix(g)
    paulis = []
    for code in range(dim):
        sites = []
        c = code
        for _ in range(m):
            sites.append(c % 4)
            c //= 4
        sites.reverse()
        mat = np.array([[1.0 + 0j]])
        for s in sites:
            mat = np.kron(mat, _PAULIS[s])
        paulis.append(mat)
    table = np.zeros((dim, dim))
    for r in range(dim):
        conj = u.conj().T @ paulis[r] @ u
        for cidx in range(dim):
            table[r, cidx] = np.trace(conj @ paulis[cidx]).real / (2**m)
    return PTMatrix(m, table)
