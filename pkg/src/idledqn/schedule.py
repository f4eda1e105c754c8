"""
Activation-probability schedules and Bernoulli activation sampling.

Random streams are numpy ``PCG64`` generators seeded through
``SeedSequence(master_seed, spawn_key=(2, path_index))``, which gives
independent, platform-reproducible streams per sample path that never
coincide with the graph generator's streams (spawn key ``(1, attempt)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATION_STREAM = 2

KINDS = ("always_on", "geometric_to_one", "capped_geometric", "constant", "safeguarded")


@dataclass(frozen=True)
class ActivationSchedule:
    """Policy producing ``p_k``.

    kind              p_k
    ----------------  -------------------------------------------
    always_on         1
    geometric_to_one  1 - sigma^(k+1)
    capped_geometric  p_max (1 - sigma^(k+1))
    constant          p
    safeguarded       max(p_floor, 1 - min(sigma, sigma_cap)^(k+1))
    """

    kind: str = "always_on"
    sigma: float | None = None
    p: float | None = None
    p_max: float | None = None
    p_floor: float | None = None
    sigma_cap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        needs = {"geometric_to_one": ("sigma",), "capped_geometric": ("sigma", "p_max"),
                 "constant": ("p",), "safeguarded": ("sigma", "p_floor", "sigma_cap")}
        for name in needs.get(self.kind, ()):
            if getattr(self, name) is None:
                raise ValueError(f"schedule {self.kind} requires {name}")
        for name in ("sigma", "sigma_cap"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        for name in ("p", "p_max", "p_floor"):
            v = getattr(self, name)
            if v is not None and not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @classmethod
    def always_on(cls):
        return cls("always_on")

    @classmethod
    def geometric_to_one(cls, sigma):
        return cls("geometric_to_one", sigma=sigma)

    @classmethod
    def capped_geometric(cls, p_max, sigma):
        return cls("capped_geometric", sigma=sigma, p_max=p_max)

    @classmethod
    def constant(cls, p):
        return cls("constant", p=p)

    @classmethod
    def safeguarded(cls, sigma, p_floor=0.2, sigma_cap=0.9999):
        return cls("safeguarded", sigma=sigma, p_floor=p_floor, sigma_cap=sigma_cap)

    def probability_at(self, k: int) -> float:
        return probability_at(self, k)

    @property
    def p_min(self) -> float:
        """Lower bound on ``p_k`` over all ``k``."""
        return probability_at(self, 0)

    @property
    def label(self) -> str:
        params = [f"{n}={getattr(self, n):g}" for n in ("sigma", "p", "p_max", "p_floor", "sigma_cap")
                  if getattr(self, n) is not None]
        return self.kind + (f"({','.join(params)})" if params else "")

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def probability_at(schedule: ActivationSchedule, k: int) -> float:
    if k < 0:
        raise ValueError("k must be >= 0")
    s = schedule
    if s.kind == "always_on":
        return 1.0
    if s.kind == "geometric_to_one":
        return 1.0 - s.sigma ** (k + 1)
    if s.kind == "capped_geometric":
        return s.p_max * (1.0 - s.sigma ** (k + 1))
    if s.kind == "constant":
        return s.p
    return max(s.p_floor, 1.0 - min(s.sigma, s.sigma_cap) ** (k + 1))


def tuned_sigma(alpha: float, mu: float, c: float = 40.0) -> float:
    """``1 - c alpha mu``; rejects values outside (0, 1)."""
    t = c * alpha * mu
    if not 0 < t < 1:
        raise ValueError(f"c*alpha*mu = {t} must lie in (0, 1)")
    return 1.0 - t


def make_rng(seed: int, path: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(ACTIVATION_STREAM, path))))


def sample_activations(p_k: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. Bernoulli(p_k) bits; always consumes exactly ``n`` uniforms."""
    if not 0 < p_k <= 1:
        raise ValueError(f"p_k must lie in (0, 1], got {p_k}")
    return rng.random(n) < p_k
