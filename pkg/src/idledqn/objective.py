"""
Strongly convex quadratic costs and the consensus penalty function.

Node ``i`` holds ``f_i(x) = 0.5 (x - b_i)^T A_i (x - b_i)``. The penalty
function over stacked iterates ``x = (x_1, ..., x_n)`` is

    Phi(x) = alpha * sum_i f_i(x_i) + 0.5 * sum_{i<j, {i,j} in E} w_ij ||x_i - x_j||^2

which equals ``alpha F(x) + 0.5 x^T (I - W kron I) x``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .topology import WeightedGraph


@dataclass(frozen=True)
class QuadraticProblem:
    """Per-node quadratic costs ``(A_i, b_i)``.

    ``A`` has shape (n, p, p), ``b`` shape (n, p). ``mu`` and ``L`` are the
    extreme Hessian eigenvalues over all nodes.
    """

    A: np.ndarray
    b: np.ndarray
    mu: float
    L: float
    seed: int | None = None
    x_global: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "x_global", global_minimizer(self))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_arrays(cls, A, b, seed=None) -> "QuadraticProblem":
        """Build a problem, reading ``mu``/``L`` off the Hessian spectra."""
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        eig = np.linalg.eigvalsh(A)
        return cls(A=A, b=b, mu=float(eig.min()), L=float(eig.max()), seed=seed)

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """Stacked ``grad f_i(x_i)`` for ``x`` of shape (n, p)."""
        return np.einsum("ipq,iq->ip", self.A, x - self.b)

    def values(self, x: np.ndarray) -> np.ndarray:
        r = x - self.b
        return 0.5 * np.einsum("ip,ip->i", r, self.gradients(x))

    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "seed": self.seed,
                "A_list": [a.reshape(-1).tolist() for a in self.A],
                "b_list": self.b.tolist(), "mu": self.mu, "L": self.L}

    def save(self, path: str | Path) -> None:
        # repr() of a Python float round-trips exactly (at most 17 digits).
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "QuadraticProblem":
        d = json.loads(Path(path).read_text())
        n, p = d["n"], d["p"]
        A = np.array(d["A_list"], dtype=float).reshape(n, p, p)
        b = np.array(d["b_list"], dtype=float).reshape(n, p)
        return cls(A=A, b=b, mu=float(d["mu"]), L=float(d["L"]), seed=d.get("seed"))


def generate_quadratics(n: int, p: int, seed: int, low: float = 1.0,
                        high: float = 31.0) -> QuadraticProblem:
    """Random quadratic costs with spectra and centers uniform on ``[low, high]``.

    ``A_i = Q_i D_i Q_i^T`` where ``Q_i`` are the eigenvectors of a symmetrized
    standard Gaussian matrix and ``D_i`` has i.i.d. uniform diagonal.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    rng = np.random.default_rng(seed)
    A = np.empty((n, p, p))
    D = np.empty((n, p))
    b = np.empty((n, p))
    for i in range(n):
        b[i] = rng.uniform(low, high, size=p)
        B_hat = rng.standard_normal((p, p))
        _, Q = np.linalg.eigh(0.5 * (B_hat + B_hat.T))
        D[i] = rng.uniform(low, high, size=p)
        Ai = (Q * D[i]) @ Q.T
        A[i] = 0.5 * (Ai + Ai.T)
    return QuadraticProblem(A=A, b=b, mu=float(D.min()), L=float(D.max()), seed=seed)


def local_cost(problem: QuadraticProblem, i: int, x: np.ndarray):
    """Value, gradient and Hessian of ``f_i`` at ``x``."""
    A, r = problem.A[i], np.asarray(x, dtype=float) - problem.b[i]
    g = A @ r
    return 0.5 * float(r @ g), g, A.copy()


def global_minimizer(problem: QuadraticProblem) -> np.ndarray:
    """Solve ``sum_i A_i (x - b_i) = 0``."""
    H = problem.A.sum(axis=0)
    rhs = np.einsum("ipq,iq->p", problem.A, problem.b)
    try:
        return scipy.linalg.solve(H, rhs, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RuntimeError(f"singular Hessian sum: {exc}") from exc


@dataclass(frozen=True)
class PenaltyModel:
    """Penalty function bound to a problem, a weighted graph and ``alpha``."""

    problem: QuadraticProblem
    graph: WeightedGraph
    alpha: float
    x_penalty: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.graph.W is None:
            raise ValueError("graph has no weight matrix")
        if self.graph.n != self.problem.n:
            raise ValueError("graph and problem disagree on n")
        object.__setattr__(self, "x_penalty", penalty_minimizer(self))

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def p(self) -> int:
        return self.problem.p

    @property
    def mu_phi(self) -> float:
        return self.alpha * self.problem.mu

    @property
    def L_phi(self) -> float:
        return self.alpha * self.problem.L + 2.0 * (1.0 - self.graph.w_min)

    def value(self, x) -> float:
        return penalty_value(self, x)

    def gradient(self, x) -> np.ndarray:
        return penalty_gradient(self, x)

    def gap(self, x) -> float:
        return penalty_value(self, x) - penalty_value(self, self.x_penalty)

    def scale(self) -> float:
        """Magnitude used to scale absolute residual tolerances."""
        return self.n * self.problem.L * float(np.abs(self.problem.b).max())


def _blocks(model: PenaltyModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size != model.n * model.p:
        raise ValueError(f"expected vector of length {model.n * model.p}, got {x.size}")
    return x.reshape(model.n, model.p)


def penalty_value(model: PenaltyModel, x) -> float:
    X = _blocks(model, x)
    W = model.graph.W
    i, j = model.graph.edges[:, 0], model.graph.edges[:, 1]
    coupling = 0.5 * np.sum(W[i, j] * np.sum((X[i] - X[j]) ** 2, axis=1))
    return float(model.alpha * model.problem.values(X).sum() + coupling)


def neighbor_sum(idx: np.ndarray, w: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Blockwise ``sum_{j in O_i} w_ij (x_i - x_j)``, ascending ``j``.

    ``idx``/``w`` come from ``WeightedGraph.neighbor_table`` (possibly with
    ``w`` masked). The reduction runs over a fixed axis so the summation
    order per node never changes.
    """
    terms = w[:, :, None] * (X[:, None, :] - X[idx])
    out = terms[:, 0].copy()
    for k in range(1, idx.shape[1]):
        out += terms[:, k]
    return out


def penalty_gradient(model: PenaltyModel, x) -> np.ndarray:
    X = _blocks(model, x)
    idx, w = model.graph.neighbor_table
    g = model.alpha * model.problem.gradients(X) + neighbor_sum(idx, w, X)
    return g.reshape(-1)


def penalty_hessian(model: PenaltyModel) -> np.ndarray:
    """Dense ``alpha blockdiag(A_i) + (I - W kron I)``; small instances only."""
    n, p = model.n, model.p
    H = np.eye(n * p) - np.kron(model.graph.W, np.eye(p))
    H += model.alpha * scipy.linalg.block_diag(*model.problem.A)
    return H


def penalty_minimizer(model: PenaltyModel) -> np.ndarray:
    """Exact minimizer of the penalty function via one Cholesky solve."""
    H = penalty_hessian(model)
    rhs = model.alpha * model.problem.gradients(np.zeros_like(model.problem.b))
    try:
        return scipy.linalg.solve(H, -rhs.reshape(-1), assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise RuntimeError(f"penalty system not positive definite: {exc}") from exc
