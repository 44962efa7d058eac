"""Uniform log-price / forward-time lattice and payoff obstacles."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .params import MarketParams, ValidatedConfig


class PayoffKind(enum.Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True, eq=False)
class SolveGrid:
    """Nodes ``x_0 = -L, ..., x_{M+1} = L`` and levels ``0, dt, ..., n_total*dt``.

    The two end nodes are unknowns of the discrete problem; Neumann data is
    imposed on them through ghost-point elimination.
    """

    x_nodes: np.ndarray
    h: float
    tau_nodes: np.ndarray
    dt: float

    @property
    def L(self) -> float:
        return float(-self.x_nodes[0])

    @property
    def size(self) -> int:
        return self.x_nodes.size

    def locate(self, x: float) -> int:
        """Index ``i`` with ``x_i <= x < x_{i+1}``, clipped to the interior cells."""
        i = int(np.floor((x - self.x_nodes[0]) / self.h))
        return min(max(i, 0), self.size - 2)


def build_grid(cfg: ValidatedConfig) -> SolveGrid:
    c = cfg.numerics
    x = np.linspace(-c.L, c.L, c.M + 2)
    tau = np.arange(cfg.n_total + 1) * cfg.dt
    x.setflags(write=False)
    tau.setflags(write=False)
    return SolveGrid(x_nodes=x, h=2.0 * c.L / (c.M + 1), tau_nodes=tau, dt=cfg.dt)


def payoff(kind: PayoffKind, p: MarketParams, x):
    """``(e^x - K_c)^+`` for calls, ``(K_p - e^x)^+`` for puts."""
    s = np.exp(x)
    if kind is PayoffKind.CALL:
        return np.maximum(s - p.K_c, 0.0)
    return np.maximum(p.K_p - s, 0.0)


def exercise_value(kind: PayoffKind, p: MarketParams, x):
    """The unfloored intrinsic value ``e^x - K_c`` or ``K_p - e^x``."""
    s = np.exp(x)
    return s - p.K_c if kind is PayoffKind.CALL else p.K_p - s
