"""
Experiment configuration, runners and output files.

A config is a JSON object; every key is optional and unknown keys are
rejected. Example::

    {
      "experiment": "compare_schedules",
      "seed": 0,
      "problem": {"n": 100, "p": 10},
      "graph": {"radius": null},
      "solver": {"alpha_scale": 100, "eps": 1.0, "rho": 1.0, "lambda_policy": "zero"},
      "schedules": [{"kind": "always_on"}, {"kind": "geometric_to_one", "c": 40}],
      "output_dir": "out/fig1a"
    }

``alpha`` is either given directly or as ``1 / (alpha_scale * L)``. A
schedule's ``sigma`` is either given directly or tuned as
``1 - c * alpha * mu``. ``problem.seed``/``graph.seed`` default to the
master ``seed``.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .objective import PenaltyModel, QuadraticProblem, generate_quadratics
from .schedule import ActivationSchedule, tuned_sigma
from .solver import LAMBDA_POLICIES, RunTrace, SolverConfig, run
from .splitting import constants_for
from .topology import WeightedGraph, default_radius, generate_rgg, metropolis_weights

EXPERIMENTS = ("single_run", "compare_schedules", "histogram", "alpha_sweep")


class ConfigError(ValueError):
    pass


@dataclass
class ProblemParams:
    n: int = 100
    p: int = 10
    seed: int | None = None


@dataclass
class GraphParams:
    radius: float | None = None
    seed: int | None = None
    max_attempts: int = 1000


@dataclass
class SolverParams:
    alpha: float | None = None
    alpha_scale: float = 100.0
    eps: float = 1.0
    rho: float = 1.0
    theta: float = 0.0
    lambda_policy: str = "zero"
    max_iters: int = 5000
    target_rel_error: float | None = None
    diagnostics_enabled: bool = False
    x0: float = 0.0


@dataclass
class ScheduleParams:
    kind: str = "always_on"
    sigma: float | None = None
    c: float | None = None
    p: float | None = None
    p_max: float | None = None
    p_floor: float | None = None
    sigma_cap: float | None = None

    def build(self, alpha: float, mu: float) -> ActivationSchedule:
        sigma = self.sigma
        if sigma is None and self.c is not None:
            sigma = tuned_sigma(alpha, mu, self.c)
        return ActivationSchedule(self.kind, sigma=sigma, p=self.p, p_max=self.p_max,
                                  p_floor=self.p_floor, sigma_cap=self.sigma_cap)


@dataclass
class ExperimentSpec:
    experiment: str = "single_run"
    seed: int = 0
    problem: ProblemParams = field(default_factory=ProblemParams)
    graph: GraphParams = field(default_factory=GraphParams)
    solver: SolverParams = field(default_factory=SolverParams)
    schedules: list[ScheduleParams] = field(default_factory=lambda: [ScheduleParams()])
    lambda_policies: list[str] | None = None
    paths: int = 1
    target_error: float | None = None
    alpha_scales: list[float] | None = None
    saturation_tol: float = 0.05
    threshold: float | None = None
    limiting_window: float = 0.05
    workers: int = 1
    output_dir: str = "out"
    description: str = ""

    @property
    def problem_seed(self) -> int:
        return self.seed if self.problem.seed is None else self.problem.seed

    @property
    def graph_seed(self) -> int:
        return self.seed if self.graph.seed is None else self.graph.seed

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:10]

    def validate(self) -> "ExperimentSpec":
        s = self.solver
        checks = [
            (self.experiment in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}"),
            (self.problem.n >= 2, "problem.n", "must be >= 2"),
            (self.problem.p >= 1, "problem.p", "must be >= 1"),
            (self.graph.radius is None or 0 < self.graph.radius <= math.sqrt(2), "graph.radius",
             "must lie in (0, sqrt(2)]"),
            (s.alpha is None or s.alpha > 0, "solver.alpha", "must be > 0"),
            (s.alpha_scale > 0, "solver.alpha_scale", "must be > 0"),
            (s.eps > 0, "solver.eps", "must be > 0"),
            (s.rho >= 0, "solver.rho", "must be >= 0"),
            (s.theta >= 0, "solver.theta", "must be >= 0"),
            (s.lambda_policy in LAMBDA_POLICIES, "solver.lambda_policy",
             f"must be one of {LAMBDA_POLICIES}"),
            (s.max_iters >= 0, "solver.max_iters", "must be >= 0"),
            (self.paths >= 1, "paths", "must be >= 1"),
            (len(self.schedules) >= 1, "schedules", "must list at least one schedule"),
            (self.saturation_tol >= 0, "saturation_tol", "must be >= 0"),
            (0 < self.limiting_window <= 1, "limiting_window", "must lie in (0, 1]"),
            (self.workers >= 1, "workers", "must be >= 1"),
        ]
        for ok, name, msg in checks:
            if not ok:
                raise ConfigError(f"{name} {msg}")
        for lp in self.lambda_policies or []:
            if lp not in LAMBDA_POLICIES:
                raise ConfigError(f"lambda_policies entry {lp!r} must be one of {LAMBDA_POLICIES}")
        for i, sp in enumerate(self.schedules):
            try:
                # sigma may depend on alpha*mu; validate structure with a placeholder
                ActivationSchedule(sp.kind, sigma=sp.sigma if sp.sigma is not None else
                                   (0.5 if sp.c is not None else None), p=sp.p, p_max=sp.p_max,
                                   p_floor=sp.p_floor, sigma_cap=sp.sigma_cap)
            except ValueError as exc:
                raise ConfigError(f"schedules[{i}]: {exc}") from exc
        if self.experiment == "alpha_sweep" and not self.alpha_scales:
            raise ConfigError("alpha_scales must list at least one value for alpha_sweep")
        if self.experiment == "histogram" and self.target_error is None:
            raise ConfigError("target_error is required for histogram")
        return self


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        path = f"{where}.{k}" if where else k
        if k in ("problem", "graph", "solver") and cls is ExperimentSpec:
            kw[k] = _build({"problem": ProblemParams, "graph": GraphParams,
                            "solver": SolverParams}[k], v, path)
        elif k == "schedules" and cls is ExperimentSpec:
            if not isinstance(v, list):
                raise ConfigError("schedules must be a list")
            kw[k] = [_build(ScheduleParams, s, f"schedules[{i}]") for i, s in enumerate(v)]
        else:
            kw[k] = v
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def spec_from_dict(data: dict) -> ExperimentSpec:
    try:
        return _build(ExperimentSpec, data, "").validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def bundled_config(name: str) -> Path:
    return Path(str(resources.files("idledqn") / "configs" / f"{name}.json"))


def load_config(path: str | Path) -> ExperimentSpec:
    """Parse and validate a JSON config; bare names resolve to bundled configs."""
    p = Path(path)
    if not p.exists() and not p.suffix and bundled_config(str(path)).exists():
        p = bundled_config(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return spec_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{p}: {exc}") from exc


# ---------------------------------------------------------------- instances

@dataclass
class Instance:
    problem: QuadraticProblem
    graph: WeightedGraph
    model: PenaltyModel

    @property
    def alpha(self) -> float:
        return self.model.alpha


def build_instance(spec: ExperimentSpec, alpha: float | None = None) -> Instance:
    pp, gp = spec.problem, spec.graph
    problem = generate_quadratics(pp.n, pp.p, spec.problem_seed)
    radius = default_radius(pp.n) if gp.radius is None else gp.radius
    graph = metropolis_weights(generate_rgg(pp.n, radius, spec.graph_seed, gp.max_attempts))
    if alpha is None:
        alpha = spec.solver.alpha if spec.solver.alpha is not None else 1.0 / (spec.solver.alpha_scale * problem.L)
    return Instance(problem, graph, PenaltyModel(problem, graph, alpha))


def solver_config(spec: ExperimentSpec, inst: Instance, schedule: ScheduleParams,
                  lambda_policy: str | None = None, path: int = 0, **overrides) -> SolverConfig:
    s = spec.solver
    kw = dict(alpha=inst.alpha, eps=s.eps, rho=s.rho, theta=s.theta,
              lambda_policy=lambda_policy or s.lambda_policy,
              schedule=schedule.build(inst.alpha, inst.problem.mu), max_iters=s.max_iters,
              target_rel_error=s.target_rel_error, seed=spec.seed, path=path,
              diagnostics_enabled=s.diagnostics_enabled)
    kw.update(overrides)
    return SolverConfig(**kw)


def _x0(spec: ExperimentSpec, inst: Instance) -> np.ndarray:
    return np.full((inst.problem.n, inst.problem.p), float(spec.solver.x0))


def constants_report(spec: ExperimentSpec, inst: Instance | None = None) -> str:
    inst = inst or build_instance(spec)
    c = constants_for(inst.model, spec.solver.theta, spec.solver.rho, spec.solver.eps, warn=False)
    return c.report()


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    traces: list[RunTrace]
    summary: dict
    table: list[dict] | None = None
    table_name: str | None = None


def run_single(spec: ExperimentSpec) -> ExperimentResult:
    inst = build_instance(spec)
    cfg = solver_config(spec, inst, spec.schedules[0])
    tr = run(inst.problem, inst.graph, cfg, x0=_x0(spec, inst), model=inst.model)
    summary = {"traces": [_trace_summary(tr, None, spec.limiting_window, spec.saturation_tol)],
               "constants": constants_report(spec, inst)}
    return ExperimentResult(spec, [tr], summary)


def _trace_summary(tr: RunTrace, threshold, window, tol=0.05) -> dict:
    lim = tr.limiting_error(window)
    out = {"label": tr.label, "lambda_policy": tr.metadata["config"]["lambda_policy"],
           "iterations": int(tr.iters[-1]), "final_cost_per_node": float(tr.cost_per_node[-1]),
           "limiting_error": lim, "cost_to_saturation": tr.cost_to((1.0 + tol) * lim)}
    if threshold is not None:
        out["threshold"] = threshold
        out["cost_to_threshold"] = tr.cost_to(threshold)
    return out


def run_compare(spec: ExperimentSpec) -> ExperimentResult:
    """One trace per (schedule, lambda policy), matched seeds and instance.

    The cost threshold of a lambda-policy group is ``spec.threshold`` when
    set, else ``(1 + saturation_tol)`` times the always-on limiting error
    (or the largest limiting error in the group when no always-on trace is
    present).
    """
    inst = build_instance(spec)
    policies = spec.lambda_policies or [spec.solver.lambda_policy]
    traces, rows = [], []
    for lp in policies:
        group = []
        for sp in spec.schedules:
            cfg = solver_config(spec, inst, sp, lambda_policy=lp)
            try:
                tr = run(inst.problem, inst.graph, cfg, x0=_x0(spec, inst), model=inst.model)
            except Exception as exc:  # keep the remaining traces
                rows.append({"label": sp.kind, "lambda_policy": lp, "error": repr(exc)})
                continue
            tr.metadata["label"] = f"{cfg.schedule.label}|{lp}"
            group.append(tr)
        if spec.threshold is not None:
            thr = spec.threshold
        else:
            ref = [t for t in group if t.metadata["config"]["schedule"]["kind"] == "always_on"]
            lims = [t.limiting_error(spec.limiting_window) for t in (ref or group)]
            thr = (1.0 + spec.saturation_tol) * max(lims) if lims else None
        rows.extend(_trace_summary(t, thr, spec.limiting_window, spec.saturation_tol) for t in group)
        traces.extend(group)
    summary = {"traces": rows, "penalty_rel_error": traces[0].metadata["penalty_rel_error"] if traces else None,
               "constants": constants_report(spec, inst)}
    return ExperimentResult(spec, traces, summary)


def _histogram_path(args, inst: Instance | None = None):
    spec, path = args
    inst = inst or build_instance(spec)
    idle = next((s for s in spec.schedules if s.kind != "always_on"), spec.schedules[0])
    cfg = solver_config(spec, inst, idle, path=path, target_rel_error=spec.target_error)
    tr = run(inst.problem, inst.graph, cfg, x0=_x0(spec, inst), model=inst.model)
    return tr.cost_to(spec.target_error)


def run_histogram(spec: ExperimentSpec) -> ExperimentResult:
    """Per-path cost to reach ``target_error`` plus the always-on reference cost."""
    inst = build_instance(spec)
    ref_cfg = solver_config(spec, inst, ScheduleParams("always_on"), target_rel_error=spec.target_error)
    ref = run(inst.problem, inst.graph, ref_cfg, x0=_x0(spec, inst), model=inst.model)
    ref_cost = ref.cost_to(spec.target_error)
    jobs = [(spec, i) for i in range(spec.paths)]
    if spec.workers > 1 and spec.paths > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as ex:
            costs = list(ex.map(_histogram_path, jobs))  # map preserves path order
    else:
        costs = [_histogram_path(j, inst) for j in jobs]
    table = [{"path_index": i, "cost_to_target": c, "reached": not math.isnan(c)}
             for i, c in enumerate(costs)]
    reached = [c for c in costs if not math.isnan(c)]
    summary = {"target_error": spec.target_error, "reference_cost": ref_cost, "paths": spec.paths,
               "reached": len(reached),
               "min_cost": min(reached) if reached else None,
               "max_cost": max(reached) if reached else None,
               "median_cost": float(np.median(reached)) if reached else None,
               "all_below_reference": bool(reached) and len(reached) == len(costs)
               and all(c < ref_cost for c in reached),
               "constants": constants_report(spec, inst)}
    return ExperimentResult(spec, [ref], summary, table, "histogram")


def run_alpha_sweep(spec: ExperimentSpec) -> ExperimentResult:
    """Limiting error and cost to saturation for each ``alpha = 1/(scale L)``."""
    base = build_instance(spec)
    rows, traces = [], []
    for scale in spec.alpha_scales:
        alpha = 1.0 / (scale * base.problem.L)
        inst = Instance(base.problem, base.graph, PenaltyModel(base.problem, base.graph, alpha))
        cfg = solver_config(spec, inst, spec.schedules[0])
        tr = run(inst.problem, inst.graph, cfg, x0=_x0(spec, inst), model=inst.model)
        tr.metadata["label"] = f"{cfg.schedule.label}|alpha_scale={scale:g}"
        lim = tr.limiting_error(spec.limiting_window)
        rows.append({"alpha_scale": scale, "alpha": alpha, "limiting_error": lim,
                     "cost_to_saturation": tr.cost_to((1 + spec.saturation_tol) * lim),
                     "penalty_rel_error": tr.metadata["penalty_rel_error"]})
        traces.append(tr)
    by_alpha = sorted(rows, key=lambda r: r["alpha"])
    monotone = all(a["limiting_error"] <= b["limiting_error"] for a, b in zip(by_alpha, by_alpha[1:]))
    summary = {"rows": rows, "limiting_error_monotone_in_alpha": monotone,
               "constants": constants_report(spec, base)}
    return ExperimentResult(spec, traces, summary, rows, "alpha_sweep")


RUNNERS = {"single_run": run_single, "compare_schedules": run_compare,
           "histogram": run_histogram, "alpha_sweep": run_alpha_sweep}


def run_experiment(spec: ExperimentSpec, kind: str | None = None) -> ExperimentResult:
    return RUNNERS[kind or spec.experiment](spec)


# ---------------------------------------------------------------- outputs

def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9=_-]+", "_", label.replace(".", "p")).strip("_")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def summary_metrics(result: ExperimentResult) -> dict[str, float]:
    """Flat ``{name: value}`` view of the finite numeric summary entries."""
    out = {}
    s = result.summary
    for row in s.get("traces") or []:
        key = row["label"] if "|" in row["label"] else f"{row['label']}|{row['lambda_policy']}"
        for k in ("limiting_error", "cost_to_threshold", "cost_to_saturation", "final_cost_per_node"):
            if k in row:
                out[f"{key}:{k}"] = float(row[k])
    for row in s.get("rows") or []:
        for k in ("limiting_error", "cost_to_saturation", "penalty_rel_error"):
            out[f"alpha_scale={row['alpha_scale']:g}:{k}"] = float(row[k])
    for k in ("reference_cost", "min_cost", "max_cost", "median_cost", "reached"):
        if s.get(k) is not None:
            out[k] = float(s[k])
    # unreached thresholds (NaN) are left out so the files stay strict JSON
    return {k: v for k, v in out.items() if math.isfinite(v)}


def expected_path(name: str) -> Path:
    return Path(str(resources.files("idledqn") / "configs" / "expected" / f"{name}.json"))


# crossing costs move in whole iterations under last-bit float differences
DEFAULT_TOLERANCES = {"limiting_error": 1e-6, "penalty_rel_error": 1e-6, "final_cost_per_node": 1e-6,
                      "cost_to_threshold": 0.02, "cost_to_saturation": 0.02, "reference_cost": 0.02,
                      "min_cost": 0.02, "max_cost": 0.02, "median_cost": 0.02, "reached": 0.0}


def compare_metrics(got: dict, want: dict, tolerances: dict | None = None) -> list[str]:
    """Mismatch messages for expected metrics that are missing or out of tolerance.

    The relative tolerance of ``"<label>:<field>"`` is looked up by ``field``.
    """
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    bad = []
    for k, v in want.items():
        rtol = tol.get(k.rsplit(":", 1)[-1], 1e-6)
        if k not in got:
            bad.append(f"missing {k}")
        elif abs(got[k] - v) > rtol * abs(v):
            bad.append(f"{k}: got {got[k]!r}, expected {v!r} (rtol {rtol:g})")
    return bad


def format_summary(result: ExperimentResult) -> str:
    lines = [f"experiment = {result.spec.experiment}", f"spec_hash = {result.spec.digest()}"]
    if result.spec.description:
        lines.append(f"description = {result.spec.description}")
    s = dict(result.summary)
    consts = s.pop("constants", "")
    for key in ("traces", "rows"):
        for row in s.pop(key, None) or []:
            lines.append("  ".join(f"{k}={_fmt(v)}" for k, v in row.items()))
    for k, v in s.items():
        lines.append(f"{k} = {_fmt(v)}")
    lines.append("")
    lines.append("[constants]")
    lines.append(consts.rstrip("\n"))
    return "\n".join(lines) + "\n"


def write_outputs(result: ExperimentResult, out_dir: str | Path | None = None) -> list[Path]:
    """Write trace CSVs with JSON sidecars, an optional table CSV and a summary.

    File names are ``<experiment>_<spec hash>_<label>``; everything except
    the sidecars' ``generated_at`` field is a deterministic function of the
    spec.
    """
    spec = result.spec
    out = Path(out_dir if out_dir is not None else spec.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    stem = f"{spec.experiment}_{spec.digest()}"
    written = []
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    for i, tr in enumerate(result.traces):
        base = f"{stem}_{i:02d}_{_slug(tr.label)}"
        csv_path, meta_path = out / f"{base}.csv", out / f"{base}.json"
        tr.metadata = dict(tr.metadata, spec=spec.to_dict(), generated_at=stamp)
        try:
            tr.write(csv_path, meta_path)
        except OSError as exc:
            raise OSError(f"writing {csv_path}: {exc}") from exc
        written += [csv_path, meta_path]
    if result.table is not None:
        path = out / f"{stem}_{result.table_name}.csv"
        cols = list(result.table[0].keys()) if result.table else []
        body = [",".join(cols)] + [",".join(_fmt(r[c]) for c in cols) for r in result.table]
        path.write_text("\n".join(body) + "\n")
        written.append(path)
    path = out / f"{stem}_summary.txt"
    path.write_text(format_summary(result))
    written.append(path)
    return written
