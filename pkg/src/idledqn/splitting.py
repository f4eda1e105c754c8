"""
Hessian splitting ``hess Phi = A - G``, random effective weights, and the
safeguard / rate constants that go with them.

All ``G``-type matrices here are Kronecker lifts ``M kron I_p`` of an n x n
matrix, so they are stored as that n x n matrix and spectral norms are
computed on it directly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np

from .objective import PenaltyModel
from .topology import WeightedGraph


class StepSizeWarning(UserWarning):
    """Raised (as a warning) when eps exceeds the descent-guaranteeing cap."""


@dataclass(frozen=True)
class Splitting:
    """Diagonal blocks of ``A(x)`` and the n x n core of ``G``."""

    A_blocks: np.ndarray
    G: np.ndarray
    theta: float

    @property
    def A_inv(self) -> np.ndarray:
        return np.linalg.inv(self.A_blocks)

    def G_dense(self, p: int) -> np.ndarray:
        return np.kron(self.G, np.eye(p))

    def A_dense(self) -> np.ndarray:
        n, p, _ = self.A_blocks.shape
        out = np.zeros((n * p, n * p))
        for i in range(n):
            out[i * p:(i + 1) * p, i * p:(i + 1) * p] = self.A_blocks[i]
        return out


def assemble_A(model: PenaltyModel, x=None, theta: float = 0.0) -> np.ndarray:
    """Blocks ``alpha hess f_i(x_i) + (1 + theta)(1 - w_ii) I``.

    The diagonal always comes from the deterministic ``W``, also when nodes
    idle. For quadratic costs ``x`` is irrelevant and may be omitted.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0")
    p = model.p
    wd = np.diag(model.graph.W)
    shift = (1.0 + theta) * (1.0 - wd)
    return model.alpha * model.problem.A + shift[:, None, None] * np.eye(p)[None]


def G_matrix(W: np.ndarray, theta: float) -> np.ndarray:
    """n x n core of ``G(Z, theta) = Z_u + theta (I - Z_d)``."""
    G = W - np.diag(np.diag(W))
    G += theta * np.diag(1.0 - np.diag(W))
    return G


def assemble_G(graph: WeightedGraph, theta: float = 0.0) -> np.ndarray:
    if theta < 0:
        raise ValueError("theta must be >= 0")
    return G_matrix(graph.W, theta)


def build_splitting(model: PenaltyModel, theta: float = 0.0, x=None) -> Splitting:
    return Splitting(A_blocks=assemble_A(model, x, theta),
                     G=assemble_G(model.graph, theta), theta=theta)


@dataclass(frozen=True)
class EffectiveWeights:
    """Realized weights ``w_ij xi_i xi_j`` with row sums restored on the diagonal."""

    xi: np.ndarray
    W_k: np.ndarray

    def G(self, theta: float = 0.0) -> np.ndarray:
        return G_matrix(self.W_k, theta)


def effective_weights(graph: WeightedGraph, xi) -> EffectiveWeights:
    xi = np.asarray(xi).astype(bool)
    if xi.shape != (graph.n,):
        raise ValueError(f"xi must have {graph.n} entries")
    mask = xi[:, None] & xi[None, :]
    Wk = np.where(mask, graph.W, 0.0)
    np.fill_diagonal(Wk, 0.0)
    np.fill_diagonal(Wk, 1.0 - Wk.sum(axis=1))
    return EffectiveWeights(xi=xi, W_k=Wk)


@dataclass(frozen=True)
class TheoryConstants:
    alpha: float
    mu: float
    L: float
    theta: float
    rho: float
    w_min: float
    w_max: float
    eps: float
    C_A: float
    C_G: float
    C_H: float
    C_R: float
    beta: float
    L_phi: float
    mu_phi: float
    delta: float
    q: float
    rho_bar: float
    eps_bar: float
    nu_eps: float
    eps_admissible: bool

    def nu(self, eps: float) -> float:
        """Contraction factor ``1 + mu_phi * (eps^2 L_phi (beta^2 + q^2) - eps (delta - q))``."""
        phi = eps ** 2 * self.L_phi * (self.beta ** 2 + self.q ** 2) - eps * (self.delta - self.q)
        return 1.0 + self.mu_phi * phi

    def h(self, eps: float) -> float:
        nu = self.nu(eps)
        if nu >= 1.0:
            raise ValueError(f"nu(eps) = {nu} >= 1; limiting-error bound undefined")
        return (eps ** 2 * self.L_phi + eps / self.q) / (1.0 - nu)

    def report(self) -> str:
        """Flat ``name = value`` text block."""
        return "\n".join(f"{k} = {v!r}" for k, v in asdict(self).items()) + "\n"


def compute_constants(alpha, mu, L, theta, rho, w_min, w_max, eps=1.0,
                      delta_fraction=0.5, q_fraction=0.5, warn=True) -> TheoryConstants:
    """Safeguard and rate constants of the DQN analysis.

    ``delta`` is taken as ``delta_fraction`` of its admissible cap
    ``1 / (alpha L + (1 + theta)(1 - w_min))`` and ``q`` as ``q_fraction``
    of ``delta``. An ``eps`` above ``eps_bar`` is allowed (the full step is
    common in practice) but flagged with ``eps_admissible = False`` and a
    ``StepSizeWarning``.
    """
    if not 0 < mu <= L:
        raise ValueError("need 0 < mu <= L")
    if alpha <= 0 or rho < 0 or theta < 0:
        raise ValueError("need alpha > 0, rho >= 0, theta >= 0")
    if not 0 < w_min <= w_max < 1:
        raise ValueError("need 0 < w_min <= w_max < 1")
    for name, f in (("delta_fraction", delta_fraction), ("q_fraction", q_fraction)):
        if not 0 < f < 1:
            raise ValueError(f"{name} must lie in (0, 1)")

    a_low = alpha * mu + (1 + theta) * (1 - w_max)
    a_high = alpha * L + (1 + theta) * (1 - w_min)
    C_A = 1.0 / a_low
    C_G = (1 + theta) * (1 - w_min)
    C_H = 1.0 + rho * C_G
    beta = (1.0 + rho * (1 + theta) * (1 - w_min)) / a_low
    L_phi = alpha * L + 2.0 * (1 - w_min)
    mu_phi = alpha * mu
    delta = delta_fraction / a_high
    q = q_fraction * delta
    rho_bar = (a_low / ((1 - w_min) * (1 + theta))) * (1.0 / a_high - delta)
    eps_bar = (delta - q) / (2.0 * L_phi * (beta ** 2 + q ** 2))
    phi = eps ** 2 * L_phi * (beta ** 2 + q ** 2) - eps * (delta - q)
    ok = 0 < eps <= eps_bar
    if warn and not ok:
        warnings.warn(f"eps = {eps} exceeds eps_bar = {eps_bar:.3e}; descent not guaranteed",
                      StepSizeWarning, stacklevel=2)
    return TheoryConstants(
        alpha=alpha, mu=mu, L=L, theta=theta, rho=rho, w_min=w_min, w_max=w_max, eps=eps,
        C_A=C_A, C_G=C_G, C_H=C_H, C_R=C_H * C_A, beta=beta, L_phi=L_phi, mu_phi=mu_phi,
        delta=delta, q=q, rho_bar=rho_bar, eps_bar=eps_bar,
        nu_eps=1.0 + mu_phi * phi, eps_admissible=ok)


def constants_for(model: PenaltyModel, theta=0.0, rho=0.0, eps=1.0, **kw) -> TheoryConstants:
    g, pr = model.graph, model.problem
    return compute_constants(model.alpha, pr.mu, pr.L, theta, rho, g.w_min, g.w_max, eps, **kw)


def limiting_error_bound(c: TheoryConstants, p_min: float, C_F: float, C_x: float,
                         eps: float | None = None) -> dict:
    """Mean-square error floor under persisting idling.

    ``E = (1 - p_min) h(eps) l(rho)``. ``C_F`` and ``C_x`` bound
    ``E||grad F(x^k)||^2`` and ``E||x^k||^2``; they have no closed form and
    are normally estimated from a finished run, so the result is a
    diagnostic rather than a certified bound.
    """
    if not 0 < p_min <= 1:
        raise ValueError("p_min must lie in (0, 1]")
    if C_F <= 0 or C_x <= 0:
        raise ValueError("C_F and C_x must be positive")
    eps = c.eps if eps is None else eps
    h = c.h(eps)
    C_g = 2.0 * c.C_A ** 2 * (c.alpha ** 2 * C_F / p_min + 8.0 * C_x)
    C_g2 = 2.0 * c.C_A ** 2 * (c.alpha ** 2 * C_F / 2.0 + C_x)
    l_rho = (4.0 / c.mu_phi) * ((1.0 + c.rho * c.C_G) ** 2 * C_g + c.rho ** 2 * C_g2)
    C_s = 2.0 * (c.C_H ** 2 * C_g + c.rho ** 2 * C_g2)
    return {"E": (1.0 - p_min) * h * l_rho, "h": h, "l": l_rho, "C_g": C_g,
            "C_g2": C_g2, "C_s": C_s, "p_min": p_min, "C_F": C_F, "C_x": C_x}
