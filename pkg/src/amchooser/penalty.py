"""Penalty function, smoothing function and the smoothed chooser obstacle.

Both are closed-form piecewise polynomials:

* ``beta(t) = -K0 * ((eps - t) / eps)**3`` for ``t < eps`` and ``0`` beyond.
  It is nonpositive, nondecreasing and concave, C^2 at the single knot
  ``t = eps``, equals ``-K0`` at ``t = 0`` and diverges to ``-inf`` for any
  fixed ``t < 0`` as ``eps -> 0``.
* ``phi(t)`` is ``0`` below ``-eps``, ``(t + eps)**2 / (4 eps)`` on
  ``|t| < eps`` and ``t`` above ``eps`` (C^1, convex, within ``eps/4``
  of ``t^+``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import MarketParams


def anchor_k0(p: MarketParams, L: float) -> float:
    """``K0 = 2 {(q + r) e^L + 2 r K_c + 5 r}`` with the truncation radius ``L``."""
    return 2.0 * ((p.q + p.r) * math.exp(L) + 2.0 * p.r * p.K_c + 5.0 * p.r)


@dataclass(frozen=True)
class PenaltyFn:
    eps: float
    k0: float

    @classmethod
    def for_market(cls, p: MarketParams, L: float, eps: float) -> "PenaltyFn":
        return cls(eps=eps, k0=anchor_k0(p, L))

    def __call__(self, t):
        return beta(self, t)


@dataclass(frozen=True)
class SmootherFn:
    eps: float

    def __call__(self, t):
        return phi(self, t)


def beta(pf: PenaltyFn, t):
    t = np.asarray(t, dtype=float)
    s = np.maximum(pf.eps - t, 0.0) / pf.eps
    return -pf.k0 * s**3


def beta_prime(pf: PenaltyFn, t):
    t = np.asarray(t, dtype=float)
    s = np.maximum(pf.eps - t, 0.0) / pf.eps
    return 3.0 * pf.k0 * s**2 / pf.eps


def beta_second(pf: PenaltyFn, t):
    t = np.asarray(t, dtype=float)
    s = np.maximum(pf.eps - t, 0.0) / pf.eps
    return -6.0 * pf.k0 * s / pf.eps**2


def phi(sf: SmootherFn, t):
    t = np.asarray(t, dtype=float)
    e = sf.eps
    mid = (t + e) ** 2 / (4.0 * e)
    return np.where(t >= e, t, np.where(t <= -e, 0.0, mid))


def phi_prime(sf: SmootherFn, t):
    t = np.asarray(t, dtype=float)
    e = sf.eps
    return np.clip((t + e) / (2.0 * e), 0.0, 1.0)


def smoothed_obstacle(sf: SmootherFn, C_slice, P_slice) -> np.ndarray:
    """``J_eps = phi(C - P) + P`` node by node."""
    C_slice = np.asarray(C_slice, dtype=float)
    P_slice = np.asarray(P_slice, dtype=float)
    if C_slice.shape != P_slice.shape:
        raise ValueError(f"slice length mismatch: {C_slice.shape} vs {P_slice.shape}")
    return phi(sf, C_slice - P_slice) + P_slice
