"""Config-driven experiment harness: sweeps, weight histograms, validation.

Configs are JSON; one schema for every experiment shape.  Sweep output is a
CSV (plus a JSON mirror with identical rows) whose header comments carry the
tool version, a hash of the canonical config, and the master seed, so a rerun
with the same seed reproduces every scientific column bit for bit (wall-time
columns are the one exception).
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .circuits import (
    EnsembleSpec,
    HaarSU4PerEdge,
    IndependentUniform,
    Layout,
    RotationPattern,
    RotationSet,
    SharedSingleAngle,
    build_brickwork_1d,
    build_staircase_2d,
    build_staircase_sweep_2d,
    layout_from_topology,
    load_topology_edges,
    sample_circuit,
)
from .error_analysis import (
    build_transfer,
    empirical_mse,
    mc_mse_estimate,
    mc_mse_profile,
    mse_bound,
    trivial_estimator_stats,
)
from .oracle import ORACLE_MAX_QUBITS, ptm_reference, statevector_expectation
from .paulis import PauliSum, read_observable, sum_l2_mass, sum_weight_histogram
from .propagation import (
    BudgetExceededError,
    ProductState,
    TruncationPolicy,
    back_propagate,
    estimate_expectation,
    gate_ptm,
    plus_state,
    zero_state,
)

OUTPUT_DIR_ENV = "PAULIPROP_OUT"

_ESTIMATORS = ("propagate", "mc_mse", "empirical_mse", "trivial", "bound")
_BUILDERS = ("staircase2d", "staircase_sweep2d", "brickwork1d")

SWEEP_COLUMNS = (
    "depth",
    "k",
    "mse_mean",
    "mse_stderr",
    "bound",
    "var_trivial",
    "runtime_ms",
    "peak_terms",
    "status",
)
WEIGHTS_COLUMNS = ("depth", "weight", "term_count", "l2_mass")

# rng stream tags: one namespace per estimator role
_STREAM_MC, _STREAM_TRIVIAL, _STREAM_EMPIRICAL, _STREAM_PROP, _STREAM_WEIGHTS = range(5)


class ConfigError(ValueError):
    """Configuration problem, annotated with the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"config field {fieldname!r}: {message}")
        self.fieldname = fieldname


@dataclass
class ExperimentConfig:
    name: str
    topology: dict
    ensemble: dict
    depths: list[int]
    ks: list[int]
    observable: str
    state: object = "zero"
    estimators: tuple[str, ...] = ("mc_mse", "bound")
    samples: int = 10_000
    trials: int = 100
    seed: int = 0
    out_dir: str = "out"
    coeff_eps: float = 0.0
    max_terms: int = 0
    config_sha: str = field(default="", repr=False)

    # -- construction -------------------------------------------------------

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        known = {
            "name", "topology", "ensemble", "depths", "ks", "observable",
            "state", "estimators", "samples", "trials", "seed", "out_dir",
            "coeff_eps", "max_terms",
        }
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        for key in ("name", "topology", "ensemble", "depths", "ks", "observable"):
            if key not in raw:
                raise ConfigError(key, "required field missing")
        cfg = ExperimentConfig(
            name=raw["name"],
            topology=raw["topology"],
            ensemble=raw["ensemble"],
            depths=list(raw["depths"]),
            ks=list(raw["ks"]),
            observable=raw["observable"],
            state=raw.get("state", "zero"),
            estimators=tuple(raw.get("estimators", ["mc_mse", "bound"])),
            samples=int(raw.get("samples", 10_000)),
            trials=int(raw.get("trials", 100)),
            seed=int(raw.get("seed", 0)),
            out_dir=raw.get("out_dir", "out"),
            coeff_eps=float(raw.get("coeff_eps", 0.0)),
            max_terms=int(raw.get("max_terms", 0)),
        )
        canonical = json.dumps(raw, sort_keys=True).encode()
        cfg.config_sha = hashlib.sha256(canonical).hexdigest()[:12]
        cfg.validate()
        return cfg

    @staticmethod
    def from_file(path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
        return ExperimentConfig.from_dict(raw)

    def validate(self) -> None:
        builder = self.topology.get("builder")
        if builder is None and not (
            "builtin" in self.topology or "edges_file" in self.topology
        ):
            raise ConfigError("topology", "need builder, builtin, or edges_file")
        if builder is not None and builder not in _BUILDERS:
            raise ConfigError("topology.builder", f"unknown builder {builder!r}")
        n = self.n_qubits
        for k in self.ks:
            if not 0 <= k <= n:
                raise ConfigError("ks", f"k={k} outside 0..{n}")
        if any(d < 0 for d in self.depths):
            raise ConfigError("depths", "depths must be nonnegative")
        for est in self.estimators:
            if est not in _ESTIMATORS:
                raise ConfigError("estimators", f"unknown estimator {est!r}")
        if "empirical_mse" in self.estimators and n > ORACLE_MAX_QUBITS:
            raise ConfigError(
                "estimators", f"empirical_mse needs n <= {ORACLE_MAX_QUBITS}, got {n}"
            )
        fam = self.ensemble.get("family")
        if fam not in ("haar_su4", "rotations"):
            raise ConfigError("ensemble.family", f"unknown family {fam!r}")
        if self.samples < 1:
            raise ConfigError("samples", "must be positive")
        if self.trials < 1:
            raise ConfigError("trials", "must be positive")
        self.observable_sum()  # parses or raises
        self.product_state()
        self.spec_for_depth(max(self.depths, default=1) or 1)

    # -- derived pieces ------------------------------------------------------

    def base_layout(self) -> Layout:
        top = self.topology
        builder = top.get("builder")
        if builder == "staircase2d":
            return build_staircase_2d(int(top["rows"]), int(top["cols"]), 1)
        if builder == "staircase_sweep2d":
            return build_staircase_sweep_2d(int(top["rows"]), int(top["cols"]), 1)
        if builder == "brickwork1d":
            return build_brickwork_1d(int(top["n"]), 1, bool(top.get("periodic", False)))
        source = top.get("builtin") or top["edges_file"]
        return layout_from_topology(load_topology_edges(source))

    @property
    def n_qubits(self) -> int:
        return self.base_layout().n_qubits

    def observable_sum(self) -> PauliSum:
        n = self.n_qubits
        if isinstance(self.observable, str):
            return read_observable(self.observable, n)
        out = PauliSum(n)
        for coeff, literal in self.observable:
            out.add_term(read_observable(literal, n).terms.popitem()[0], float(coeff))
        return out

    def product_state(self) -> ProductState:
        n = self.n_qubits
        if self.state == "zero":
            return zero_state(n)
        if self.state == "plus":
            return plus_state(n)
        try:
            return ProductState(np.asarray(self.state, dtype=float))
        except Exception as exc:
            raise ConfigError("state", str(exc)) from exc

    def spec_for_depth(self, depth: int) -> EnsembleSpec:
        top = self.topology
        fam = self.ensemble["family"]
        if fam == "rotations":
            patterns = tuple(
                RotationPattern(*p) if isinstance(p, (list, tuple)) else RotationPattern(p)
                for p in self.ensemble.get("patterns", [])
            )
            if not patterns:
                raise ConfigError("ensemble.patterns", "rotations need patterns")
            correlation = {
                "independent": IndependentUniform(),
                "shared": SharedSingleAngle(),
            }.get(self.ensemble.get("correlation", "independent"))
            if correlation is None:
                raise ConfigError("ensemble.correlation", "independent or shared")
            layout = self.base_layout()
            if depth == 0:
                return EnsembleSpec(Layout(layout.n_qubits, ()), RotationSet(patterns))
            return EnsembleSpec(layout, RotationSet(patterns), correlation, repetitions=depth)
        # haar_su4: depth parameterizes the layout itself
        builder = top.get("builder")
        if depth == 0:
            return EnsembleSpec(Layout(self.n_qubits, ()), HaarSU4PerEdge())
        if builder == "staircase2d":
            layout = build_staircase_2d(int(top["rows"]), int(top["cols"]), depth)
        elif builder == "staircase_sweep2d":
            layout = build_staircase_sweep_2d(int(top["rows"]), int(top["cols"]), depth)
        elif builder == "brickwork1d":
            layout = build_brickwork_1d(
                int(top["n"]), depth, bool(top.get("periodic", False))
            )
        else:
            base = self.base_layout()
            return EnsembleSpec(base, HaarSU4PerEdge(), repetitions=depth)
        return EnsembleSpec(layout, HaarSU4PerEdge())

    def cell_rng(self, stream: int, depth: int, k: int = 0) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence((self.seed, stream, depth, k))
        )


def bundled_config_path(name: str) -> Path:
    """Path of a shipped example config (fig2_desk, suppfig3_desk, suppfig4_desk)."""
    import importlib.resources

    ref = importlib.resources.files("pauliprop.configs").joinpath(f"{name}.json")
    with importlib.resources.as_file(ref) as p:
        return Path(p)


# -- formatting ----------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, columns, rows, cfg: ExperimentConfig) -> None:
    lines = [
        f"# pauliprop {__version__}",
        f"# name={cfg.name} config_sha={cfg.config_sha} seed={cfg.seed}",
        ",".join(columns),
    ]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in columns))
    path.write_text("\n".join(lines) + "\n")


def _write_json_mirror(path: Path, columns, rows, cfg: ExperimentConfig) -> None:
    payload = {
        "tool": "pauliprop",
        "version": __version__,
        "name": cfg.name,
        "config_sha": cfg.config_sha,
        "seed": cfg.seed,
        "columns": list(columns),
        "rows": rows,
    }
    path.write_text(json.dumps(payload, indent=1) + "\n")


def resolve_out_dir(cfg: ExperimentConfig, override: str | None) -> Path:
    out = override or os.environ.get(OUTPUT_DIR_ENV) or cfg.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- sweep -----------------------------------------------------------------------

def _run_sweep_depth(cfg: ExperimentConfig, depth: int) -> list[dict]:
    o = cfg.observable_sum()
    rho = cfg.product_state()
    spec = cfg.spec_for_depth(depth)
    estimators = cfg.estimators
    l2 = sum_l2_mass(o)

    profile = None
    need_mc_var = "trivial" in estimators and cfg.n_qubits > ORACLE_MAX_QUBITS
    if "mc_mse" in estimators or need_mc_var:
        profile = mc_mse_profile(
            spec, o, rho, list(cfg.ks), cfg.samples, cfg.cell_rng(_STREAM_MC, depth)
        )

    var_trivial = None
    if "trivial" in estimators:
        if cfg.n_qubits <= ORACLE_MAX_QUBITS:
            _, var_trivial = trivial_estimator_stats(
                spec, o, rho, cfg.trials, cfg.cell_rng(_STREAM_TRIVIAL, depth)
            )
        else:
            var_trivial = profile.var_f_mean  # MC route above the oracle cap

    rows = []
    for k in cfg.ks:
        row: dict = {col: None for col in SWEEP_COLUMNS}
        row["depth"], row["k"], row["status"] = depth, k, "ok"
        if "bound" in estimators:
            row["bound"] = mse_bound(k, l2)
        if "mc_mse" in estimators:
            est = profile.per_k[k]
            row["mse_mean"], row["mse_stderr"] = est.mean, est.stderr
        elif "empirical_mse" in estimators:
            est = empirical_mse(
                spec, o, rho, k, cfg.trials, cfg.cell_rng(_STREAM_EMPIRICAL, depth, k)
            )
            row["mse_mean"], row["mse_stderr"] = est.mean, est.stderr
        row["var_trivial"] = var_trivial
        if "propagate" in estimators:
            policy = TruncationPolicy(k, cfg.coeff_eps, cfg.max_terms)
            circuit = sample_circuit(spec, cfg.cell_rng(_STREAM_PROP, depth, k))
            try:
                res = back_propagate(o, circuit, policy)
                row["runtime_ms"] = res.total_millis
                row["peak_terms"] = res.peak_terms
            except BudgetExceededError as exc:
                row["status"] = "budget_exceeded"
                row["peak_terms"] = exc.terms
        rows.append(row)
    return rows


def cmd_sweep(
    config_path: str | Path,
    out_dir: str | None = None,
    threads: int = 1,
) -> tuple[Path, Path, int]:
    """Run the (depth, k) sweep; returns (csv path, json path, exit code)."""
    cfg = ExperimentConfig.from_file(config_path)
    out = resolve_out_dir(cfg, out_dir)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_depth = list(pool.map(lambda d: _run_sweep_depth(cfg, d), cfg.depths))
    else:
        per_depth = [_run_sweep_depth(cfg, d) for d in cfg.depths]
    rows = [row for chunk in per_depth for row in chunk]
    csv_path = out / f"{cfg.name}_sweep.csv"
    json_path = out / f"{cfg.name}_sweep.json"
    _write_csv(csv_path, SWEEP_COLUMNS, rows, cfg)
    _write_json_mirror(json_path, SWEEP_COLUMNS, rows, cfg)
    code = 0 if all(r["status"] == "ok" for r in rows) else 1
    return csv_path, json_path, code


# -- weights ---------------------------------------------------------------------

def cmd_weights(
    config_path: str | Path, out_dir: str | None = None
) -> tuple[Path, Path, int]:
    """Weight histogram of the back-propagated observable, one block per depth."""
    cfg = ExperimentConfig.from_file(config_path)
    out = resolve_out_dir(cfg, out_dir)
    o = cfg.observable_sum()
    k = max(cfg.ks)
    rows = []
    for depth in cfg.depths:
        spec = cfg.spec_for_depth(depth)
        circuit = sample_circuit(spec, cfg.cell_rng(_STREAM_WEIGHTS, depth))
        res = back_propagate(o, circuit, TruncationPolicy(k, cfg.coeff_eps, cfg.max_terms))
        for weight, (count, mass) in sum_weight_histogram(res.final).items():
            rows.append(
                {"depth": depth, "weight": weight, "term_count": count, "l2_mass": mass}
            )
    csv_path = out / f"{cfg.name}_weights.csv"
    json_path = out / f"{cfg.name}_weights.json"
    _write_csv(csv_path, WEIGHTS_COLUMNS, rows, cfg)
    _write_json_mirror(json_path, WEIGHTS_COLUMNS, rows, cfg)
    return csv_path, json_path, 0


# -- validate ---------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    max_deviation: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{status}] {self.name}: max |dev| = {self.max_deviation:.3e}{extra}"


def _validation_specs(n: int) -> list[EnsembleSpec]:
    return [
        EnsembleSpec(build_brickwork_1d(n, 3)),
        EnsembleSpec(
            build_brickwork_1d(n, 2),
            RotationSet((RotationPattern("X"), RotationPattern("ZZ"))),
            repetitions=2,
        ),
    ]


def run_validation(n: int, trials: int, seed: int) -> list[CheckResult]:
    """The cross-check suite: exactness, PTM agreement, transfers, estimators."""
    if n > ORACLE_MAX_QUBITS:
        raise ValueError(f"validate needs n <= {ORACLE_MAX_QUBITS}")
    if n < 2:
        raise ValueError("validate needs n >= 2")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    o = PauliSum.from_terms(n, {"Z0": 1.0})
    rho = zero_state(n)
    results = []

    worst = 0.0
    for spec in _validation_specs(n):
        for _ in range(max(1, trials // 2)):
            c = sample_circuit(spec, rng)
            f = estimate_expectation(o, c, TruncationPolicy(n), rho)
            worst = max(worst, abs(f - statevector_expectation(c, o, rho)))
    results.append(CheckResult("exactness at k=n vs statevector", worst <= 1e-9, worst))

    worst_agree = 0.0
    worst_ortho = 0.0
    spec = EnsembleSpec(build_brickwork_1d(n, 2))
    for _ in range(max(1, trials // 4)):
        c = sample_circuit(spec, rng)
        for layer in c.layers:
            for g in layer.gates:
                ptm = gate_ptm(g)
                worst_agree = max(
                    worst_agree,
                    float(np.max(np.abs(ptm.table - ptm_reference(g).table))),
                )
                worst_ortho = max(worst_ortho, ptm.orthogonality_defect())
    results.append(
        CheckResult("closed-form PTM vs dense reference", worst_agree <= 1e-10, worst_agree)
    )
    results.append(CheckResult("PTM orthogonality", worst_ortho <= 1e-10, worst_ortho))

    worst_row = 0.0
    for spec in _validation_specs(n):
        transfer = build_transfer(spec)
        for layer in transfer.layers:
            for slot in layer:
                for code in range(4 ** len(slot.support)):
                    row_sum = sum(slot.row_distribution(code).values())
                    worst_row = max(worst_row, abs(row_sum - 1.0))
    results.append(CheckResult("transfer rows sum to 1", worst_row <= 1e-12, worst_row))

    spec = EnsembleSpec(build_brickwork_1d(n, 3))
    k = 1
    emp = empirical_mse(spec, o, rho, k, max(trials, 100), rng)
    mc = mc_mse_estimate(spec, o, rho, k, 50_000, rng)
    combined = float(np.hypot(emp.stderr, mc.stderr))
    dev = abs(emp.mean - mc.mean)
    results.append(
        CheckResult(
            "MC path sampler vs oracle MSE",
            dev <= 3 * combined,
            dev,
            detail=f"3*sigma = {3 * combined:.3e}",
        )
    )
    return results


def cmd_validate(n: int, trials: int, seed: int) -> int:
    results = run_validation(n, trials, seed)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1
