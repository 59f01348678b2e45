"""Circuit IR, topology generators, and random-ensemble samplers.

A circuit is an ordered list of layers; gates within one layer have pairwise
disjoint supports.  Rotation gates follow the convention
PauliRotation(G, theta) = exp(-i * theta * G / 2).

Ensembles are reproducible and parallelizable: circuit i of an ensemble is
sampled from a generator seeded by (master_seed, i), so sampling is a pure
function of (spec, seed).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .paulis import PauliString

CLIFFORD_NAMES = ("H", "S", "X", "Y", "Z", "CNOT", "CZ", "SWAP")
_TWO_QUBIT_CLIFFORDS = ("CNOT", "CZ", "SWAP")

KIND_CLIFFORD = "clifford"
KIND_ROTATION = "rotation"
KIND_UNITARY = "unitary"


@dataclass(frozen=True, eq=False)
class Gate:
    """One- or two-qubit gate; build via the clifford/rotation/unitary factories."""

    support: tuple[int, ...]
    kind: str
    name: str | None = None
    generator: PauliString | None = None
    angle: float | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self) -> None:
        if len(self.support) not in (1, 2):
            raise ValueError("gate support must have 1 or 2 qubits")
        if len(set(self.support)) != len(self.support):
            raise ValueError("gate support qubits must be distinct")
        if any(q < 0 for q in self.support):
            raise ValueError("negative qubit index")

    @staticmethod
    def clifford(name: str, support: tuple[int, ...]) -> "Gate":
        name = name.upper()
        if name not in CLIFFORD_NAMES:
            raise ValueError(f"unknown Clifford gate {name!r}")
        want = 2 if name in _TWO_QUBIT_CLIFFORDS else 1
        if len(support) != want:
            raise ValueError(f"{name} acts on {want} qubit(s)")
        return Gate(tuple(support), KIND_CLIFFORD, name=name)

    @staticmethod
    def rotation(generator: PauliString, angle: float, support: tuple[int, ...]) -> "Gate":
        """exp(-i*angle*G/2); generator indexed within the support (length m)."""
        if generator.n_qubits != len(support):
            raise ValueError("generator must be restricted to the support")
        if generator.is_identity:
            raise ValueError("rotation generator must be non-identity")
        return Gate(tuple(support), KIND_ROTATION, generator=generator, angle=float(angle))

    @staticmethod
    def unitary(matrix: np.ndarray, support: tuple[int, ...]) -> "Gate":
        matrix = np.asarray(matrix, dtype=np.complex128)
        dim = 2 ** len(support)
        if matrix.shape != (dim, dim):
            raise ValueError("matrix shape does not match support")
        if np.max(np.abs(matrix.conj().T @ matrix - np.eye(dim))) > 1e-10:
            raise ValueError("matrix is not unitary within 1e-10")
        matrix.setflags(write=False)
        return Gate(tuple(support), KIND_UNITARY, matrix=matrix)


@dataclass(frozen=True)
class Layer:
    gates: tuple[Gate, ...]

    def __post_init__(self) -> None:
        if not self.gates:
            raise ValueError("empty layers are forbidden")
        seen: set[int] = set()
        for g in self.gates:
            for q in g.support:
                if q in seen:
                    raise ValueError(f"overlapping supports in layer at qubit {q}")
                seen.add(q)


@dataclass(frozen=True)
class Circuit:
    """Layer 1 (index 0) is applied first in circuit time."""

    n_qubits: int
    layers: tuple[Layer, ...]

    def __post_init__(self) -> None:
        for layer in self.layers:
            for g in layer.gates:
                if max(g.support) >= self.n_qubits:
                    raise ValueError("gate support outside register")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gate_count(self) -> int:
        return sum(len(layer.gates) for layer in self.layers)


@dataclass(frozen=True)
class Topology:
    n_qubits: int
    edges: tuple[tuple[int, int], ...]
    name: str = ""

    def __post_init__(self) -> None:
        for u, v in self.edges:
            if u == v:
                raise ValueError(f"self-loop edge ({u}, {v})")
            if not (0 <= u < self.n_qubits and 0 <= v < self.n_qubits):
                raise ValueError(f"edge ({u}, {v}) outside register")


@dataclass(frozen=True)
class Layout:
    """Gate-slot layering: per layer, the tuple of gate supports."""

    n_qubits: int
    layers: tuple[tuple[tuple[int, ...], ...], ...]
    name: str = ""

    def __post_init__(self) -> None:
        for layer in self.layers:
            seen: set[int] = set()
            for support in layer:
                for q in support:
                    if q in seen:
                        raise ValueError("overlapping supports in layout layer")
                    if not 0 <= q < self.n_qubits:
                        raise ValueError("layout support outside register")
                    seen.add(q)


# -- topology builders ----------------------------------------------------

def snake_path(rows: int, cols: int) -> list[int]:
    """Row 0 left-to-right, row 1 right-to-left, ...; qubit = r*cols + c."""
    path = []
    for r in range(rows):
        cs = range(cols) if r % 2 == 0 else range(cols - 1, -1, -1)
        path.extend(r * cols + c for c in cs)
    return path


def build_staircase_2d(rows: int, cols: int, repetitions: int) -> Layout:
    """Sequential two-qubit slots along the snake path of a rows x cols grid.

    Within each repetition the edges are emitted in reverse path order, so
    Heisenberg back-propagation (which meets the last layer first) of an
    observable on the top-left qubit grows by one qubit per gate and is
    global after one repetition.  Each gate occupies its own layer.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("staircase needs rows*cols >= 2")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    path = snake_path(rows, cols)
    edges = list(zip(path, path[1:]))[::-1]
    layers = tuple((edge,) for _ in range(repetitions) for edge in edges)
    return Layout(rows * cols, layers, name=f"staircase{rows}x{cols}")


def build_staircase_sweep_2d(rows: int, cols: int, repetitions: int) -> Layout:
    """Sequential two-qubit slots over every grid edge, anti-diagonal sweep.

    The sweep walks anti-diagonals from the top-left corner, taking each
    cell's right and down edges, so consecutive gates overlap and a corner
    observable still turns global within one repetition; unlike the minimal
    snake staircase this covers all 2*r*c - r - c grid edges, which is what
    drives the truncation error down exponentially with repetitions.  Edges
    are emitted in reverse sweep order per repetition (back-propagation
    meets the corner gate first); one gate per layer.
    """
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("staircase needs rows*cols >= 2")
    if repetitions < 1:
        raise ValueError("repetitions must be positive")
    edges: list[tuple[int, int]] = []
    for d in range(rows + cols - 1):
        for r in range(rows):
            c = d - r
            if not 0 <= c < cols:
                continue
            if c + 1 < cols:
                edges.append((r * cols + c, r * cols + c + 1))
            if r + 1 < rows:
                edges.append((r * cols + c, (r + 1) * cols + c))
    edges = edges[::-1]
    layers = tuple((edge,) for _ in range(repetitions) for edge in edges)
    return Layout(rows * cols, layers, name=f"staircase_sweep{rows}x{cols}")


def build_brickwork_1d(n: int, depth: int, periodic: bool = False) -> Layout:
    """Alternating even/odd nearest-neighbour pairings on a line.

    Odd layers pair (0,1),(2,3),...; even layers pair (1,2),(3,4),....  With
    periodic=True (n even) even layers also include (n-1, 0), so every layer
    covers every qubit.
    """
    if n < 2:
        raise ValueError("brickwork needs n >= 2")
    if depth < 1:
        raise ValueError("depth must be positive")
    if periodic and n % 2:
        raise ValueError("periodic brickwork needs even n")
    even_pairs = [(q, q + 1) for q in range(0, n - 1, 2)]
    odd_pairs = [(q, q + 1) for q in range(1, n - 1, 2)]
    if periodic:
        odd_pairs.append((n - 1, 0))
    if not odd_pairs:  # n = 2 degenerates to the single edge every layer
        odd_pairs = even_pairs
    layers = [tuple(even_pairs if j % 2 == 0 else odd_pairs) for j in range(depth)]
    return Layout(n, tuple(layers), name=f"brickwork{n}")


_BUILTIN_TOPOLOGIES = {"heavyhex127": "heavyhex127.txt"}


def load_topology_edges(source: str | Path) -> Topology:
    """Load a topology from a named builtin or an edge-list file.

    File format: one edge per line, "u v" decimal indices, '#' comments.
    Edge order is preserved.
    """
    name = str(source)
    if name in _BUILTIN_TOPOLOGIES:
        text = (
            importlib.resources.files("pauliprop.data")
            .joinpath(_BUILTIN_TOPOLOGIES[name])
            .read_text()
        )
        return _parse_topology_text(text, name)
    path = Path(source)
    if not path.exists():
        raise ValueError(f"unknown builtin or missing topology file {name!r}")
    return _parse_topology_text(path.read_text(), path.stem)


def parse_topology_text(text: str, name: str = "") -> Topology:
    return _parse_topology_text(text, name)


def _parse_topology_text(text: str, name: str) -> Topology:
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad integer in {raw!r}") from exc
        if u == v:
            raise ValueError(f"line {lineno}: self-loop edge ({u}, {v})")
        if u < 0 or v < 0:
            raise ValueError(f"line {lineno}: negative qubit index")
        edges.append((u, v))
    if not edges:
        raise ValueError("topology file has no edges")
    n = 1 + max(max(u, v) for u, v in edges)
    return Topology(n, tuple(edges), name=name)


def layout_from_topology(top: Topology, one_gate_per_layer: bool = False) -> Layout:
    """Group the edge list into disjoint layers, preserving edge order."""
    if one_gate_per_layer:
        return Layout(top.n_qubits, tuple((e,) for e in top.edges), name=top.name)
    layers: list[list[tuple[int, ...]]] = []
    used: list[set[int]] = []
    for u, v in top.edges:
        for layer, qs in zip(layers, used):
            if u not in qs and v not in qs:
                layer.append((u, v))
                qs.update((u, v))
                break
        else:
            layers.append([(u, v)])
            used.append({u, v})
    return Layout(top.n_qubits, tuple(tuple(l) for l in layers), name=top.name)


# -- ensembles ------------------------------------------------------------

@dataclass(frozen=True)
class HaarSU4PerEdge:
    """A fresh Haar 4x4 unitary per two-qubit slot (Haar 2x2 on 1-qubit slots)."""


@dataclass(frozen=True)
class RotationPattern:
    """One sub-layer of a repetition.

    generator: per-site letters, e.g. "X" (one rotation per qubit) or "ZZ"
    (one rotation per topology edge); the special value "HAAR1Q" emits a
    Haar-random single-qubit unitary on every qubit.
    angle_dist: only "uniform" (on [0, 2*pi)) is supported.
    """

    generator: str
    angle_dist: str = "uniform"

    def __post_init__(self) -> None:
        g = self.generator.upper()
        object.__setattr__(self, "generator", g)
        if g != "HAAR1Q":
            if not (1 <= len(g) <= 2 and all(c in "XYZ" for c in g)):
                raise ValueError(f"bad rotation generator pattern {g!r}")
        if self.angle_dist != "uniform":
            raise ValueError("only the uniform angle distribution is supported")


@dataclass(frozen=True)
class RotationSet:
    patterns: tuple[RotationPattern, ...]


@dataclass(frozen=True)
class IndependentUniform:
    """Fresh uniform [0, 2*pi) angle per rotation slot."""


@dataclass(frozen=True)
class SharedSingleAngle:
    """One uniform angle drawn per circuit and assigned to every rotation."""


@dataclass(frozen=True)
class FixedAngles:
    values: tuple[float, ...]


@dataclass(frozen=True)
class GateSlot:
    """A position in the circuit template plus what is sampled there."""

    support: tuple[int, ...]
    family: str  # "haar4" | "haar1" | "rotation"
    generator: PauliString | None = None


@dataclass(frozen=True)
class EnsembleSpec:
    """Distribution over circuits: layout/topology, gate family, correlation."""

    layout: Layout
    gate_family: HaarSU4PerEdge | RotationSet = field(default_factory=HaarSU4PerEdge)
    angle_correlation: IndependentUniform | SharedSingleAngle | FixedAngles = field(
        default_factory=IndependentUniform
    )
    repetitions: int = 1
    master_seed: int | None = None

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        self.slot_layers()  # validate patterns fit supports

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def slot_layers(self) -> tuple[tuple[GateSlot, ...], ...]:
        """The per-layer gate-slot template, repetitions expanded."""
        n = self.layout.n_qubits
        if isinstance(self.gate_family, HaarSU4PerEdge):
            one_rep = tuple(
                tuple(
                    GateSlot(s, "haar4" if len(s) == 2 else "haar1")
                    for s in layer
                )
                for layer in self.layout.layers
            )
        else:
            layers: list[tuple[GateSlot, ...]] = []
            for pattern in self.gate_family.patterns:
                g = pattern.generator
                if g == "HAAR1Q":
                    layers.append(tuple(GateSlot((q,), "haar1") for q in range(n)))
                elif len(g) == 1:
                    gen = PauliString.from_text(g)
                    layers.append(
                        tuple(GateSlot((q,), "rotation", gen) for q in range(n))
                    )
                else:
                    gen = PauliString.from_text(g)
                    for layer in self.layout.layers:
                        slots = []
                        for s in layer:
                            if len(s) != 2:
                                raise ValueError(
                                    f"pattern {g!r} needs 2-qubit slots, got {s}"
                                )
                            slots.append(GateSlot(s, "rotation", gen))
                        layers.append(tuple(slots))
            one_rep = tuple(layers)
        return one_rep * self.repetitions

    def rotation_slot_count(self) -> int:
        return sum(
            1
            for layer in self.slot_layers()
            for slot in layer
            if slot.family == "rotation"
        )

    def rng_for(self, circuit_index: int) -> np.random.Generator:
        """Counter-based per-circuit generator: seeded by (master_seed, i)."""
        if self.master_seed is None:
            raise ValueError("ensemble has no master_seed")
        return ensemble_rng(self.master_seed, circuit_index)


def ensemble_rng(master_seed: int, circuit_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, circuit_index)))


def sample_haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar on U(dim) via QR of a complex Ginibre matrix with phase correction."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def sample_haar_su4(rng: np.random.Generator) -> Gate:
    """A Haar-random two-qubit unitary gate kind (support filled in later)."""
    return Gate.unitary(sample_haar_unitary(4, rng), (0, 1))


def sample_circuit(spec: EnsembleSpec, rng: np.random.Generator) -> Circuit:
    """Draw one circuit; a pure function of (spec, generator state)."""
    slot_layers = spec.slot_layers()
    correlation = spec.angle_correlation
    shared_angle = None
    fixed_iter = None
    if isinstance(correlation, SharedSingleAngle):
        shared_angle = rng.uniform(0.0, 2.0 * np.pi)
    elif isinstance(correlation, FixedAngles):
        total = spec.rotation_slot_count()
        if len(correlation.values) != total:
            raise ValueError(
                f"FixedAngles has {len(correlation.values)} values, "
                f"ensemble has {total} rotation slots"
            )
        fixed_iter = iter(correlation.values)

    layers = []
    for slots in slot_layers:
        gates = []
        for slot in slots:
            if slot.family == "haar4":
                gates.append(Gate.unitary(sample_haar_unitary(4, rng), slot.support))
            elif slot.family == "haar1":
                gates.append(Gate.unitary(sample_haar_unitary(2, rng), slot.support))
            else:
                if shared_angle is not None:
                    theta = shared_angle
                elif fixed_iter is not None:
                    theta = next(fixed_iter)
                else:
                    theta = rng.uniform(0.0, 2.0 * np.pi)
                gates.append(Gate.rotation(slot.generator, theta, slot.support))
        layers.append(Layer(tuple(gates)))
    return Circuit(spec.layout.n_qubits, tuple(layers))


# -- debug text round-trip -------------------------------------------------

def circuit_to_text(c: Circuit) -> str:
    """Structured, exactly round-trippable debug listing."""
    lines = [f"circuit n={c.n_qubits}"]
    for layer in c.layers:
        lines.append("layer")
        for g in layer.gates:
            support = ",".join(map(str, g.support))
            if g.kind == KIND_CLIFFORD:
                lines.append(f"  clifford {g.name} q={support}")
            elif g.kind == KIND_ROTATION:
                lines.append(
                    f"  rotation {g.generator.to_text()} q={support} angle={g.angle!r}"
                )
            else:
                flat = " ".join(
                    f"{float(v.real)!r} {float(v.imag)!r}" for v in g.matrix.reshape(-1)
                )
                lines.append(f"  unitary q={support} m={flat}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("circuit n="):
        raise ValueError("missing circuit header")
    n = int(lines[0].split("=", 1)[1])
    layers: list[Layer] = []
    gates: list[Gate] = []

    def flush() -> None:
        if gates:
            layers.append(Layer(tuple(gates)))
            gates.clear()

    for ln in lines[1:]:
        token = ln.split()
        if token[0] == "layer":
            flush()
            continue
        fields = dict(part.split("=", 1) for part in token if "=" in part)
        support = tuple(int(q) for q in fields["q"].split(","))
        if token[0] == "clifford":
            gates.append(Gate.clifford(token[1], support))
        elif token[0] == "rotation":
            gen = PauliString.from_text(token[1])
            gates.append(Gate.rotation(gen, float(fields["angle"]), support))
        elif token[0] == "unitary":
            raw = ln.split("m=", 1)[1].split()
            vals = np.array([float(v) for v in raw])
            dim = 2 ** len(support)
            m = (vals[0::2] + 1j * vals[1::2]).reshape(dim, dim)
            gates.append(Gate.unitary(m, support))
        else:
            raise ValueError(f"bad circuit line {ln!r}")
    flush()
    return Circuit(n, tuple(layers))
