"""Market, contract and numerical configuration.

Every model constant lives here. :func:`validate` is the only way to obtain a
:class:`ValidatedConfig`, which the solvers require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import RejectedParams

BOUNDARY_MODES = ("neumann", "dirichlet")

#: Keys accepted in a ``key = value`` config file, mapped to (section, attribute).
CONFIG_KEYS = {
    "r": ("market", "r"),
    "q": ("market", "q"),
    "sigma": ("market", "sigma"),
    "k_call": ("market", "K_c"),
    "k_put": ("market", "K_p"),
    "t_chooser": ("market", "T"),
    "t_call": ("market", "T_c"),
    "t_put": ("market", "T_p"),
    "grid_l": ("numerics", "L"),
    "grid_m": ("numerics", "M"),
    "grid_n": ("numerics", "N"),
    "theta": ("numerics", "theta"),
    "eps": ("numerics", "eps"),
    "boundary_mode": ("numerics", "boundary_mode"),
}

_INT_FIELDS = {"M", "N"}
_STR_FIELDS = {"boundary_mode"}


@dataclass(frozen=True)
class MarketParams:
    """Constant-coefficient market plus the two embedded contracts.

    Attributes
    ----------
    r, q, sigma:
        Risk-free rate, dividend yield and volatility (per year).
    K_c, K_p:
        Call and put strikes, ``K_p < K_c``.
    T, T_c, T_p:
        Chooser maturity and the maturities of the embedded call and put.
    """

    r: float
    q: float
    sigma: float
    K_c: float
    K_p: float
    T: float
    T_c: float
    T_p: float

    @classmethod
    def standard(cls) -> "MarketParams":
        """The reference parameter set used throughout the tests."""
        return cls(r=0.05, q=0.02, sigma=0.2, K_c=110.0, K_p=90.0, T=0.5, T_c=1.0, T_p=1.0)


@dataclass(frozen=True)
class NumericsConfig:
    """Grid, scheme and solver knobs.

    ``L=None`` selects the default truncation rule and ``fb_tol=None`` the
    default contact tolerance ``10 * psor_tol``.
    """

    L: float | None = None
    M: int = 800
    N: int = 400
    theta: float = 0.5
    eps: float = 1e-3
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    psor_omega: float = 1.2
    psor_tol: float = 1e-10
    psor_max_iter: int = 10_000
    fb_tol: float | None = None
    boundary_mode: str = "neumann"
    rannacher_steps: int = 5


@dataclass(frozen=True)
class ValidatedConfig:
    """A market/numerics pair that passed :func:`validate`.

    ``numerics`` has ``L`` and ``fb_tol`` resolved and ``N`` raised so that
    both maturity gaps are whole numbers of time steps.
    """

    market: MarketParams
    numerics: NumericsConfig
    degenerate_q0: bool = False
    n_call: int = field(init=False)
    n_put: int = field(init=False)

    def __post_init__(self):
        p, c = self.market, self.numerics
        object.__setattr__(self, "n_call", c.N + round(c.N * (p.T_c - p.T) / p.T))
        object.__setattr__(self, "n_put", c.N + round(c.N * (p.T_p - p.T) / p.T))

    @property
    def dt(self) -> float:
        return self.market.T / self.numerics.N

    @property
    def call_offset(self) -> int:
        """Index shift realizing ``zeta = T_c - T + tau`` on the call surface."""
        return self.n_call - self.numerics.N

    @property
    def put_offset(self) -> int:
        return self.n_put - self.numerics.N

    @property
    def n_total(self) -> int:
        return max(self.n_call, self.n_put)

    @property
    def h(self) -> float:
        return 2.0 * self.numerics.L / (self.numerics.M + 1)

    def with_numerics(self, **changes) -> "ValidatedConfig":
        """Re-validate with some numerics fields replaced."""
        return validate(self.market, replace(self.numerics, **changes), degenerate_q0=self.degenerate_q0)

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self.market):
            out[f.name] = getattr(self.market, f.name)
        for f in fields(self.numerics):
            out[f.name] = getattr(self.numerics, f.name)
        out["degenerate_q0"] = self.degenerate_q0
        out["dt"] = self.dt
        out["h"] = self.h
        return out


def default_truncation(p: MarketParams, degenerate_q0: bool = False) -> float:
    """Three log-units beyond the short-maturity limits of both vanilla boundaries."""
    if p.q > 0:
        ratio = p.r / p.q
        call_lim = math.log(max(1.0, ratio) * p.K_c)
        put_lim = math.log(min(1.0, ratio) * p.K_p)
    else:
        call_lim = math.log(p.K_c)
        put_lim = math.log(p.K_p)
    return max(call_lim, abs(put_lim)) + 3.0


def _commensurable_steps(p: MarketParams, n: int) -> int:
    gaps = [(p.T_c - p.T) / p.T, (p.T_p - p.T) / p.T]
    for cand in range(n, 1000 * n + 1):
        if all(abs(cand * g - round(cand * g)) <= 1e-9 * max(1.0, cand * g) for g in gaps):
            return cand
    raise RejectedParams(
        f"no time step up to N={1000 * n} makes T_c - T and T_p - T multiples of T/N"
    )


def _check_market(p: MarketParams, degenerate_q0: bool) -> None:
    vals = [getattr(p, f.name) for f in fields(p)]
    if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in vals):
        raise RejectedParams("all market parameters must be finite numbers")
    if not p.r > 0:
        raise RejectedParams("r > 0 violated")
    if not p.sigma > 0:
        raise RejectedParams("sigma > 0 violated")
    if p.q < 0:
        raise RejectedParams("q >= 0 violated")
    if p.q == 0 and not degenerate_q0:
        raise RejectedParams("q > 0 required (pass degenerate_q0 to accept q = 0)")
    if not p.K_p > 0:
        raise RejectedParams("K_p > 0 violated")
    if not p.K_p < p.K_c:
        raise RejectedParams("K_p < K_c violated")
    if not p.T > 0:
        raise RejectedParams("T > 0 violated")
    if not p.T < min(p.T_c, p.T_p):
        raise RejectedParams("T < min(T_c,T_p) violated")


def _check_numerics(c: NumericsConfig) -> None:
    if c.L is not None and not c.L > 0:
        raise RejectedParams("grid_l > 0 violated")
    if c.M < 3:
        raise RejectedParams("grid_m >= 3 violated")
    if c.N < 1:
        raise RejectedParams("grid_n >= 1 violated")
    if not 0.5 <= c.theta <= 1.0:
        raise RejectedParams("theta in [0.5, 1] violated")
    if not c.eps > 0:
        raise RejectedParams("eps > 0 violated")
    if not c.newton_tol > 0 or c.newton_max_iter < 1:
        raise RejectedParams("newton_tol > 0 and newton_max_iter >= 1 required")
    if not 1.0 < c.psor_omega < 2.0:
        raise RejectedParams("psor_omega in (1, 2) violated")
    if not c.psor_tol > 0 or c.psor_max_iter < 1:
        raise RejectedParams("psor_tol > 0 and psor_max_iter >= 1 required")
    if c.fb_tol is not None and not c.fb_tol > 0:
        raise RejectedParams("fb_tol > 0 violated")
    if c.boundary_mode not in BOUNDARY_MODES:
        raise RejectedParams(f"boundary_mode must be one of {BOUNDARY_MODES}")
    if c.rannacher_steps < 0:
        raise RejectedParams("rannacher_steps >= 0 violated")


def validate(p, c: NumericsConfig | None = None, *, degenerate_q0: bool = False) -> ValidatedConfig:
    """Check every model constraint and resolve derived numerics.

    Accepts either ``(MarketParams, NumericsConfig)`` or an existing
    :class:`ValidatedConfig`, which makes the function idempotent.

    Raises
    ------
    RejectedParams
        Naming the first violated constraint.
    """
    if isinstance(p, ValidatedConfig):
        return validate(p.market, p.numerics, degenerate_q0=p.degenerate_q0)
    if c is None:
        c = NumericsConfig()
    _check_market(p, degenerate_q0)
    _check_numerics(c)
    L = c.L if c.L is not None else default_truncation(p, degenerate_q0)
    n = _commensurable_steps(p, c.N)
    fb_tol = c.fb_tol if c.fb_tol is not None else 10.0 * c.psor_tol
    resolved = replace(c, L=float(L), N=n, fb_tol=float(fb_tol))
    return ValidatedConfig(market=p, numerics=resolved, degenerate_q0=bool(degenerate_q0))


# -- flat key/value config files ------------------------------------------------


def _coerce(attr: str, raw: str):
    if attr in _STR_FIELDS:
        return raw.strip().lower()
    if attr in _INT_FIELDS:
        return int(raw)
    if attr == "L" and raw.strip().lower() in ("auto", "default", ""):
        return None
    return float(raw)


def parse_config_text(text: str) -> tuple[dict, dict]:
    """Parse ``key = value`` lines into (market kwargs, numerics kwargs).

    Blank lines and ``#`` comments are skipped; unknown keys are rejected.
    """
    market, numerics = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RejectedParams(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise RejectedParams(f"line {lineno}: unknown key {key!r}")
        section, attr = CONFIG_KEYS[key]
        try:
            value = _coerce(attr, raw)
        except ValueError:
            raise RejectedParams(f"line {lineno}: bad value for {key}: {raw!r}") from None
        (market if section == "market" else numerics)[attr] = value
    return market, numerics


def load_config(path, overrides: dict | None = None, *, degenerate_q0: bool = False) -> ValidatedConfig:
    """Read a config file, apply numerics overrides, and validate."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config not found: {path}")
    market_kw, num_kw = parse_config_text(path.read_text())
    missing = [k for k, (s, a) in CONFIG_KEYS.items() if s == "market" and a not in market_kw]
    if missing:
        raise RejectedParams(f"missing market keys: {', '.join(missing)}")
    num_kw.update(overrides or {})
    return validate(MarketParams(**market_kw), NumericsConfig(**num_kw), degenerate_q0=degenerate_q0)


def format_config(cfg: ValidatedConfig) -> str:
    """Render the file-level keys of a config, one ``key = value`` per line."""
    lines = []
    for key, (section, attr) in CONFIG_KEYS.items():
        obj = cfg.market if section == "market" else cfg.numerics
        val = getattr(obj, attr)
        lines.append(f"{key} = {val if isinstance(val, (str, int)) else repr(float(val))}")
    return "\n".join(lines) + "\n"
