"""
Standard DQN and DQN with randomized node idling.

Each iteration runs in two barrier-separated phases. Phase one computes
every node's ``d_i`` from its own and its neighbors' iterates; phase two
combines neighbors' ``d_j`` into ``s_i``. Neighbor sums always run over
ascending neighbor index (see ``objective.neighbor_sum``), which makes a
run bit-reproducible and makes the idling step with every node active
perform exactly the same floating-point operations as the standard step.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, asdict
from functools import cached_property
from pathlib import Path

import numpy as np

from .objective import PenaltyModel, QuadraticProblem, neighbor_sum
from .schedule import ActivationSchedule, make_rng, sample_activations
from .splitting import Splitting, build_splitting, constants_for
from .topology import WeightedGraph

LAMBDA_POLICIES = ("zero", "minus_rho", "minus_one")


@dataclass(frozen=True)
class SolverConfig:
    alpha: float
    eps: float = 1.0
    rho: float = 1.0
    theta: float = 0.0
    lambda_policy: str = "zero"
    schedule: ActivationSchedule = field(default_factory=ActivationSchedule.always_on)
    max_iters: int = 5000
    target_rel_error: float | None = None
    seed: int = 0
    path: int = 0
    diagnostics_enabled: bool = False

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")
        if self.theta < 0:
            raise ValueError("theta must be >= 0")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ValueError(f"lambda_policy must be one of {LAMBDA_POLICIES}")
        if self.lambda_policy == "minus_one" and self.rho < 1:
            raise ValueError("lambda_policy 'minus_one' needs rho >= 1 (||Lambda|| <= rho)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    @property
    def lam(self) -> float:
        """Scalar ``c`` with ``Lambda_i^k = c I``."""
        return {"zero": 0.0, "minus_rho": -self.rho, "minus_one": -1.0}[self.lambda_policy]

    @property
    def rounds_per_activation(self) -> int:
        return 1 if self.lambda_policy == "zero" else 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = self.schedule.to_dict()
        return d


@dataclass
class SolverState:
    k: int
    x: np.ndarray
    rng: np.random.Generator
    per_node_activations: np.ndarray
    last_xi: np.ndarray | None = None
    last_p: float = float("nan")
    last_s: np.ndarray | None = None

    @property
    def cumulative_activations(self) -> int:
        return int(self.per_node_activations.sum())

    @classmethod
    def initial(cls, model: PenaltyModel, config: SolverConfig, x0=None) -> "SolverState":
        x = np.zeros((model.n, model.p)) if x0 is None else np.array(x0, dtype=float).reshape(model.n, model.p)
        return cls(k=0, x=x, rng=make_rng(config.seed, config.path),
                   per_node_activations=np.zeros(model.n, dtype=np.int64))


class _Operators:
    """Per-run cache: inverse A blocks and the padded neighbor table."""

    def __init__(self, model: PenaltyModel, splitting: Splitting):
        self.model = model
        self.splitting = splitting
        self.A_inv = np.linalg.inv(splitting.A_blocks)
        self.idx, self.w = model.graph.neighbor_table

    @cached_property
    def w_diag(self) -> np.ndarray:
        return _row_complement(self.w)


def _row_complement(w: np.ndarray) -> np.ndarray:
    tot = w[:, 0].copy()
    for k in range(1, w.shape[1]):
        tot += w[:, k]
    return 1.0 - tot


_OPS_CACHE: dict[tuple[int, int], _Operators] = {}


def _ops(model: PenaltyModel, splitting: Splitting) -> _Operators:
    key = (id(model), id(splitting))
    op = _OPS_CACHE.get(key)
    if op is None or op.model is not model or op.splitting is not splitting:
        if len(_OPS_CACHE) > 64:
            _OPS_CACHE.clear()
        op = _OPS_CACHE[key] = _Operators(model, splitting)
    return op


def _direction(ops: _Operators, X, grad_scale, w_eff, w_diag, lam, theta, active=None):
    """Two-phase DQN direction on blocks ``X`` (n, p)."""
    r = grad_scale * ops.model.problem.gradients(X) + neighbor_sum(ops.idx, w_eff, X)
    d = np.einsum("ipq,iq->ip", ops.A_inv, r)
    if active is not None:
        d[~active] = 0.0
    # barrier: every d_j is final before any s_i reads it
    if lam == 0.0:
        s = -d
    else:
        terms = w_eff[:, :, None] * d[ops.idx]
        c = terms[:, 0].copy()
        for k in range(1, ops.idx.shape[1]):
            c += terms[:, k]
        if theta > 0:
            c += (theta * (1.0 - w_diag))[:, None] * d
        s = -d + lam * c
    if active is not None:
        s[~active] = 0.0
    return s


def dqn_direction(model: PenaltyModel, splitting: Splitting, config: SolverConfig, X) -> np.ndarray:
    """Standard DQN direction ``-(I - L G) A^{-1} grad Phi(x)`` in blocks."""
    ops = _ops(model, splitting)
    X = np.asarray(X, dtype=float).reshape(model.n, model.p)
    return _direction(ops, X, model.alpha, ops.w, ops.w_diag, config.lam, splitting.theta)


def idling_direction(model: PenaltyModel, splitting: Splitting, config: SolverConfig, X,
                     xi, p_k: float) -> np.ndarray:
    """Idling direction for activation bits ``xi`` and probability ``p_k``."""
    ops = _ops(model, splitting)
    X = np.asarray(X, dtype=float).reshape(model.n, model.p)
    xi = np.asarray(xi, dtype=bool)
    act = xi.astype(float)
    w_eff = ops.w * (act[:, None] * act[ops.idx])
    return _direction(ops, X, model.alpha / p_k, w_eff, _row_complement(w_eff), config.lam,
                      splitting.theta, active=xi)


def dqn_step(state: SolverState, model: PenaltyModel, splitting: Splitting,
             config: SolverConfig) -> SolverState:
    s = dqn_direction(model, splitting, config, state.x)
    state.x = state.x + config.eps * s
    state.per_node_activations += 1
    state.last_xi = np.ones(model.n, dtype=bool)
    state.last_p = 1.0
    state.last_s = s
    state.k += 1
    return state


def idling_dqn_step(state: SolverState, model: PenaltyModel, splitting: Splitting,
                    config: SolverConfig) -> SolverState:
    p_k = config.schedule.probability_at(state.k)
    xi = sample_activations(p_k, model.n, state.rng)
    s = idling_direction(model, splitting, config, state.x, xi, p_k)
    state.x = np.where(xi[:, None], state.x + config.eps * s, state.x)
    state.per_node_activations += xi
    state.last_xi = xi
    state.last_p = p_k
    state.last_s = s
    state.k += 1
    return state


def reference_direction(state: SolverState, model: PenaltyModel, splitting: Splitting,
                        config: SolverConfig) -> np.ndarray:
    """Standard-DQN direction evaluated at the current (idling) iterate."""
    return dqn_direction(model, splitting, config, state.x)


def relative_error(x, x_global) -> float:
    """``(1/n) sum_i ||x_i - x_glob|| / ||x_glob||``."""
    x_global = np.asarray(x_global, dtype=float)
    nrm = np.linalg.norm(x_global)
    if nrm == 0:
        raise ValueError("relative error undefined for a zero minimizer")
    X = np.asarray(x, dtype=float).reshape(-1, x_global.size)
    return float(np.mean(np.linalg.norm(X - x_global, axis=1)) / nrm)


COLUMNS = ("iter", "p_k", "active", "cost_per_node", "rel_error", "phi_gap")


@dataclass(eq=False)
class RunTrace:
    """Per-iteration record of one run.

    Row 0 is the initial point (no iteration yet, ``p_k`` is NaN). Row
    ``k`` describes the state after ``k`` iterations, with ``p_k`` and
    ``active`` referring to the iteration just performed.
    """

    iters: np.ndarray
    p_k: np.ndarray
    active: np.ndarray
    cost_per_node: np.ndarray
    rel_error: np.ndarray
    phi_gap: np.ndarray
    inexactness: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)
    x_final: np.ndarray | None = None
    dist_to_penalty: np.ndarray | None = None

    def __len__(self):
        return len(self.iters)

    @property
    def label(self) -> str:
        return self.metadata.get("label", "run")

    def limiting_error(self, frac: float = 0.05) -> float:
        """Mean relative error over the last ``frac`` of the recorded iterations."""
        m = max(1, int(math.ceil(frac * (len(self) - 1))))
        return float(np.mean(self.rel_error[-m:]))

    def cost_to(self, threshold: float) -> float:
        """Per-node cost when the relative error first drops to ``threshold``; NaN if never."""
        hit = np.flatnonzero(self.rel_error <= threshold)
        return float(self.cost_per_node[hit[0]]) if hit.size else float("nan")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(COLUMNS) + (["inexactness"] if self.inexactness is not None else [])
        w.writerow(cols)
        for r in range(len(self)):
            row = [str(int(self.iters[r])), _fmt(self.p_k[r]), str(int(self.active[r])),
                   _fmt(self.cost_per_node[r]), _fmt(self.rel_error[r]), _fmt(self.phi_gap[r])]
            if self.inexactness is not None:
                row.append(_fmt(self.inexactness[r]))
            w.writerow(row)
        return buf.getvalue()

    def write(self, csv_path: str | Path, meta_path: str | Path | None = None) -> None:
        Path(csv_path).write_text(self.to_csv())
        if meta_path is not None:
            Path(meta_path).write_text(json.dumps(self.metadata, indent=2, default=_json_default))

    @classmethod
    def read_csv(cls, path: str | Path) -> "RunTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        col = lambda k: np.array([float(r[k]) for r in rows])
        inex = col("inexactness") if rows and "inexactness" in rows[0] else None
        return cls(iters=col("iter").astype(int), p_k=col("p_k"), active=col("active").astype(int),
                   cost_per_node=col("cost_per_node"), rel_error=col("rel_error"),
                   phi_gap=col("phi_gap"), inexactness=inex)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def run(problem: QuadraticProblem, graph: WeightedGraph, config: SolverConfig, x0=None,
        model: PenaltyModel | None = None, record_x: bool = False) -> RunTrace:
    """Iterate until ``max_iters`` or ``target_rel_error``.

    ``always_on`` schedules use the standard step; anything else uses the
    idling step. ``record_x`` additionally stores ``||x^k - x*||`` per row.
    """
    if model is None or model.alpha != config.alpha:
        model = PenaltyModel(problem, graph, config.alpha)
    splitting = build_splitting(model, config.theta)
    state = SolverState.initial(model, config, x0)
    standard = config.schedule.kind == "always_on"
    xg, xstar = problem.x_global, model.x_penalty.reshape(model.n, model.p)
    phi_star = model.value(model.x_penalty)

    N = config.max_iters + 1
    iters = np.arange(N)
    p_k = np.full(N, np.nan)
    active = np.zeros(N, dtype=np.int64)
    cost = np.zeros(N)
    rel = np.zeros(N)
    gap = np.zeros(N)
    inex = np.full(N, np.nan) if config.diagnostics_enabled else None
    dist = np.zeros(N) if record_x else None

    def record(r):
        rel[r] = relative_error(state.x, xg)
        gap[r] = model.value(state.x) - phi_star
        cost[r] = state.cumulative_activations / model.n
        if dist is not None:
            dist[r] = np.linalg.norm(state.x - xstar)

    record(0)
    if inex is not None:
        inex[0] = 0.0
    last = 0
    if config.target_rel_error is None or rel[0] > config.target_rel_error:
        for r in range(1, N):
            x_prev = state.x
            if standard:
                dqn_step(state, model, splitting, config)
            else:
                idling_dqn_step(state, model, splitting, config)
            p_k[r] = state.last_p
            active[r] = int(state.last_xi.sum())
            if inex is not None:
                s_hat = dqn_direction(model, splitting, config, x_prev)
                inex[r] = float(np.linalg.norm(state.last_s - s_hat))
            record(r)
            last = r
            if config.target_rel_error is not None and rel[r] <= config.target_rel_error:
                break
    sl = slice(0, last + 1)
    meta = {
        "label": config.schedule.label,
        "config": config.to_dict(),
        "graph": graph.summary(),
        "problem": {"n": problem.n, "p": problem.p, "seed": problem.seed,
                    "mu": problem.mu, "L": problem.L},
        "iterations": last,
        "stopped_early": last < config.max_iters,
        "communication_rounds_per_activation": config.rounds_per_activation,
        "penalty_rel_error": relative_error(model.x_penalty, xg),
        "constants": asdict(constants_for(model, config.theta, config.rho, config.eps, warn=False)),
    }
    return RunTrace(iters=iters[sl], p_k=p_k[sl], active=active[sl], cost_per_node=cost[sl],
                    rel_error=rel[sl], phi_gap=gap[sl],
                    inexactness=None if inex is None else inex[sl], metadata=meta,
                    x_final=state.x.copy(), dist_to_penalty=None if dist is None else dist[sl])
