"""Cox-Ross-Rubinstein lattice pricer used as an independent check.

It prices directly from the optimal-stopping definitions by backward
induction and shares no code with the PDE solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import IncommensurableHorizons, InvalidLattice
from .grid import PayoffKind
from .params import MarketParams


@dataclass(frozen=True)
class Lattice:
    steps_total: int
    dt_lat: float
    up: float
    down: float
    p_star: float
    disc: float

    @classmethod
    def build(cls, p: MarketParams, horizon: float, n_steps: int) -> "Lattice":
        if n_steps < 1:
            raise InvalidLattice("n_steps must be >= 1")
        dt = horizon / n_steps
        u = math.exp(p.sigma * math.sqrt(dt))
        d = 1.0 / u
        ps = (math.exp((p.r - p.q) * dt) - d) / (u - d)
        if not 0.0 < ps < 1.0:
            raise InvalidLattice(f"risk-neutral probability {ps:.6g} outside (0, 1)")
        return cls(n_steps, dt, u, d, ps, math.exp(-p.r * dt))

    def spots(self, s0: float, k: int) -> np.ndarray:
        """Prices at step ``k``: ``s0 * u^j * d^(k-j)`` for ``j = 0..k``."""
        j = np.arange(k + 1)
        return s0 * np.exp((2 * j - k) * math.log(self.up))

    def roll(self, v: np.ndarray) -> np.ndarray:
        """One discounted expectation step back (length shrinks by one)."""
        return self.disc * (self.p_star * v[1:] + (1.0 - self.p_star) * v[:-1])


def _exercise(kind: PayoffKind, p: MarketParams, s):
    return np.maximum(s - p.K_c, 0.0) if kind is PayoffKind.CALL else np.maximum(p.K_p - s, 0.0)


def lattice_american(p: MarketParams, kind: PayoffKind, S0: float, n_steps: int) -> float:
    """American call (to ``T_c``) or put (to ``T_p``) at the root."""
    horizon = p.T_c if kind is PayoffKind.CALL else p.T_p
    lat = Lattice.build(p, horizon, n_steps)
    v = _exercise(kind, p, lat.spots(S0, n_steps))
    for k in range(n_steps - 1, -1, -1):
        v = np.maximum(lat.roll(v), _exercise(kind, p, lat.spots(S0, k)))
    return float(v[0])


def lattice_european(p: MarketParams, kind: PayoffKind, S0: float, n_steps: int) -> float:
    horizon = p.T_c if kind is PayoffKind.CALL else p.T_p
    lat = Lattice.build(p, horizon, n_steps)
    v = _exercise(kind, p, lat.spots(S0, n_steps))
    for _ in range(n_steps):
        v = lat.roll(v)
    return float(v[0])


def commensurable_lattice_steps(p: MarketParams, n_steps: int) -> int:
    """Smallest ``n >= n_steps`` whose step divides ``T``, ``T_c`` and ``T_p``."""
    horizon = max(p.T_c, p.T_p)
    for n in range(n_steps, 1000 * n_steps + 1):
        if all(_is_whole(n * t / horizon) for t in (p.T, p.T_c, p.T_p)):
            return n
    raise IncommensurableHorizons("no lattice step divides all three horizons")


def _is_whole(v: float) -> bool:
    return abs(v - round(v)) <= 1e-9 * max(1.0, abs(v))


@dataclass
class ChooserLayers:
    """Node values at every step ``k <= T/dt`` of the three induction layers."""

    call: list
    put: list
    chooser: list
    spots: list


def lattice_chooser(p: MarketParams, S0: float, n_steps: int, *, return_layers: bool = False):
    """Chooser price on one recombining lattice spanning ``max(T_c, T_p)``.

    The call and put layers are rolled back from their own maturities; from
    step ``T/dt`` down, the chooser layer takes ``max(call, put)`` as its
    exercise value.
    """
    horizon = max(p.T_c, p.T_p)
    lat = Lattice.build(p, horizon, n_steps)
    steps = [n_steps * t / horizon for t in (p.T, p.T_c, p.T_p)]
    if not all(_is_whole(s) for s in steps):
        raise IncommensurableHorizons(
            f"lattice step {lat.dt_lat:.6g} does not divide T, T_c and T_p"
        )
    n_ch, n_c, n_p = (round(s) for s in steps)

    def layer_at(kind, n_mat, k_stop):
        v = _exercise(kind, p, lat.spots(S0, n_mat))
        for k in range(n_mat - 1, k_stop - 1, -1):
            v = np.maximum(lat.roll(v), _exercise(kind, p, lat.spots(S0, k)))
        return v

    c = layer_at(PayoffKind.CALL, n_c, n_ch)
    pu = layer_at(PayoffKind.PUT, n_p, n_ch)
    v = np.maximum(c, pu)
    layers = ChooserLayers([c], [pu], [v], [lat.spots(S0, n_ch)]) if return_layers else None
    for k in range(n_ch - 1, -1, -1):
        s = lat.spots(S0, k)
        c = np.maximum(lat.roll(c), _exercise(PayoffKind.CALL, p, s))
        pu = np.maximum(lat.roll(pu), _exercise(PayoffKind.PUT, p, s))
        v = np.maximum(lat.roll(v), np.maximum(c, pu))
        if layers is not None:
            layers.call.append(c)
            layers.put.append(pu)
            layers.chooser.append(v)
            layers.spots.append(s)
    if layers is not None:
        for seq in (layers.call, layers.put, layers.chooser, layers.spots):
            seq.reverse()
        return float(v[0]), layers
    return float(v[0])


def black_scholes(kind: PayoffKind, p: MarketParams, S, tau):
    """European value with time to maturity ``tau`` (array friendly)."""
    S = np.asarray(S, dtype=float)
    tau = np.asarray(tau, dtype=float)
    K = p.K_c if kind is PayoffKind.CALL else p.K_p
    with np.errstate(divide="ignore", invalid="ignore"):
        vol = p.sigma * np.sqrt(tau)
        d1 = (np.log(S / K) + (p.r - p.q + 0.5 * p.sigma**2) * tau) / vol
        d2 = d1 - vol
        df_q, df_r = np.exp(-p.q * tau), np.exp(-p.r * tau)
        if kind is PayoffKind.CALL:
            val = S * df_q * ndtr(d1) - K * df_r * ndtr(d2)
            intrinsic = np.maximum(S - K, 0.0)
        else:
            val = K * df_r * ndtr(-d2) - S * df_q * ndtr(-d1)
            intrinsic = np.maximum(K - S, 0.0)
    return np.where(tau > 0, val, intrinsic)
