"""Parametric distributions for task durations and inter-arrival times.

All sampling is by transformation of a standard normal or uniform draw from
the caller's ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class JohnsonSU:
    gamma: float
    delta: float
    xi: float
    lam: float

    def __post_init__(self):
        if not (self.delta > 0 and self.lam > 0):
            raise ValueError("Johnson SU needs delta > 0 and lam > 0")

    def draw(self, rng: np.random.Generator, size=None):
        z = rng.standard_normal(size)
        return self.xi + self.lam * np.sinh((z - self.gamma) / self.delta)


@dataclass(frozen=True)
class ExponentiatedWeibull:
    alpha: float
    k: float
    lam: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.k > 0 and self.lam > 0):
            raise ValueError("exponentiated Weibull needs alpha, k, lam > 0")

    def draw(self, rng: np.random.Generator, size=None):
        # inverse CDF of F(x) = (1 - exp(-(x/lam)^k))^alpha
        u = rng.random(size)
        return self.lam * (-np.log1p(-(u ** (1.0 / self.alpha)))) ** (1.0 / self.k)


@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("normal needs sigma > 0")

    def draw(self, rng: np.random.Generator, size=None):
        return self.mu + self.sigma * rng.standard_normal(size)


@dataclass(frozen=True)
class Constant:
    """Degenerate distribution, handy for deterministic schedules."""

    value: float

    def draw(self, rng: np.random.Generator, size=None):
        return self.value if size is None else np.full(size, float(self.value))


DistributionSpec = JohnsonSU | ExponentiatedWeibull | Normal | Constant

_KINDS = {
    "johnsonsu": JohnsonSU,
    "exponweib": ExponentiatedWeibull,
    "normal": Normal,
    "constant": Constant,
}


def sample(dist: DistributionSpec, rng: np.random.Generator, size=None):
    return dist.draw(rng, size)


def dist_from_dict(doc: dict) -> DistributionSpec:
    """Build a distribution from ``{"kind": ..., <params>}``."""
    doc = dict(doc)
    kind = str(doc.pop("kind", "")).lower()
    try:
        cls = _KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}") from None
    try:
        return cls(**{k: float(v) for k, v in doc.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for {kind}: {exc}") from None


def dist_to_dict(dist: DistributionSpec) -> dict:
    kind = next(k for k, c in _KINDS.items() if isinstance(dist, c))
    return {"kind": kind, **asdict(dist)}
