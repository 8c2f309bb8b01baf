"""Entropy models and the analytic macro oracle.

State convention: a macro-state packs into coordinates ``x = [M, G_1..G_k]``
with money first.  All entropy models are concave on their interior domain
(validated by sampled Hessian checks, not assumed) and expose analytic
gradients/Hessians where closed forms exist; everything else falls back to
the central-difference toolkit in :mod:`thermoecon.diff`.

Units: money and temperature in aurum, entropy dimensionless (temperature
is measured in money units; only temperature ratios are physical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.special import gammaln

from . import diff
from .errors import ConfigError, DimensionError, DomainError, InsufficientDataError

__all__ = [
    "MacroState",
    "ThermoQuantities",
    "EntropyModel",
    "CobbDouglasParams",
    "CobbDouglasModel",
    "PureMoneyModel",
    "CoupledTestModel",
    "PerfectSubstitutesModel",
    "TwoCurrencyModel",
    "TabulatedModel",
    "AffineModel",
    "entropy",
    "thermo_quantities",
    "hessian",
    "partition_log_volume",
    "inflation_rate",
    "model_from_config",
]


@dataclass(frozen=True)
class MacroState:
    """Amounts of money and of each good for one economy.

    Boundary states (zero coordinates) are representable, e.g. as endowments,
    but entropy evaluation requires a strictly interior state.
    """

    money: float
    goods: np.ndarray

    def __post_init__(self):
        goods = np.atleast_1d(np.asarray(self.goods, dtype=float))
        object.__setattr__(self, "goods", goods)
        if self.money < 0:
            raise DomainError(f"money must be >= 0, got {self.money}")
        if np.any(goods < 0):
            raise DomainError(f"goods must be >= 0, got {goods}")

    @property
    def n_goods(self) -> int:
        return int(self.goods.size)

    @property
    def interior(self) -> bool:
        return self.money > 0 and bool(np.all(self.goods > 0))

    def packed(self) -> np.ndarray:
        return np.concatenate(([self.money], self.goods))

    @staticmethod
    def unpack(x: Sequence[float]) -> "MacroState":
        x = np.asarray(x, dtype=float)
        return MacroState(float(x[0]), x[1:].copy())

    def scaled(self, lam: float) -> "MacroState":
        return MacroState(lam * self.money, lam * self.goods)

    def replace(self, money: Optional[float] = None, goods=None) -> "MacroState":
        return MacroState(
            self.money if money is None else money,
            self.goods if goods is None else np.asarray(goods, dtype=float),
        )


@dataclass(frozen=True)
class ThermoQuantities:
    """Derived macro quantities at one state.

    ``free_energy`` is M - T_bath*S; when no bath temperature is supplied the
    state's own temperature is used.  ``money_capacity`` is float('inf') when
    the second money derivative vanishes (flagged, never negative).
    """

    entropy: float
    temperature: float
    coolness: float
    money_capacity: float
    values: np.ndarray     # entropy per good-unit, one per good
    prices: np.ndarray     # aurum per good-unit, one per good
    free_energy: float


class EntropyModel:
    """Base class: a concave entropy function S(state) with optional
    analytic derivatives.  Subclasses set ``n_goods`` and implement
    ``entropy_packed``; ``grad_packed``/``hessian_packed`` return None when
    no closed form exists (finite differences are used instead)."""

    n_goods: int = 1
    kind: str = "abstract"

    def check_state(self, state: MacroState) -> None:
        if state.n_goods != self.n_goods:
            raise DimensionError(
                f"{self.kind} model has {self.n_goods} goods, state has {state.n_goods}"
            )
        if not state.interior:
            raise DomainError(
                "entropy evaluation requires a strictly interior state "
                f"(money={state.money}, goods={state.goods})"
            )

    # -- required surface -------------------------------------------------
    def entropy_packed(self, x: np.ndarray) -> float:
        raise NotImplementedError

    # -- optional analytic derivatives ------------------------------------
    def grad_packed(self, x: np.ndarray) -> Optional[np.ndarray]:
        return None

    def hessian_packed(self, x: np.ndarray) -> Optional[np.ndarray]:
        return None

    # -- convenience ------------------------------------------------------
    def entropy(self, state: MacroState) -> float:
        self.check_state(state)
        return float(self.entropy_packed(state.packed()))

    def grad(self, state: MacroState) -> np.ndarray:
        """(beta, nu_1..nu_k); analytic if available, else central FD."""
        self.check_state(state)
        g = self.grad_packed(state.packed())
        if g is not None:
            return np.asarray(g, dtype=float)
        vals, _ = diff.gradient(self.entropy_packed, state.packed())
        return vals

    def beta(self, state: MacroState) -> float:
        return float(self.grad(state)[0])

    def temperature(self, state: MacroState) -> float:
        b = self.beta(state)
        if b <= 0:
            raise DomainError(f"dS/dM = {b} <= 0: money not desirable at this state")
        return 1.0 / b

    def values(self, state: MacroState) -> np.ndarray:
        return self.grad(state)[1:]

    def prices(self, state: MacroState) -> np.ndarray:
        g = self.grad(state)
        if g[0] <= 0:
            raise DomainError("money not desirable at this state")
        return g[1:] / g[0]


# ---------------------------------------------------------------------------
# Cobb-Douglas micro parameters and macro model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CobbDouglasParams:
    """Agent-level parameters for the exchange economy.

    ``alpha`` is per good; per-agent overrides (``alpha_i`` shaped
    (n_agents, n_goods), ``eta_i`` shaped (n_agents,)) make the population
    heterogeneous, in which case the macro entropy uses the population means.
    """

    n_agents: int
    alpha: np.ndarray
    eta: float
    alpha_i: Optional[np.ndarray] = None
    eta_i: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.atleast_1d(np.asarray(self.alpha, dtype=float)))
        if self.n_agents < 1:
            raise ConfigError("n_agents must be a positive integer")
        if np.any(self.alpha <= 0) or self.eta <= 0:
            raise ConfigError("alpha and eta must be > 0 (rate integrability)")
        if self.alpha_i is not None:
            a = np.asarray(self.alpha_i, dtype=float).reshape(self.n_agents, self.n_goods)
            if np.any(a <= 0):
                raise ConfigError("per-agent alpha overrides must be > 0")
            object.__setattr__(self, "alpha_i", a)
        if self.eta_i is not None:
            e = np.asarray(self.eta_i, dtype=float).reshape(self.n_agents)
            if np.any(e <= 0):
                raise ConfigError("per-agent eta overrides must be > 0")
            object.__setattr__(self, "eta_i", e)

    @property
    def n_goods(self) -> int:
        return int(self.alpha.size)

    @property
    def homogeneous(self) -> bool:
        hom_a = self.alpha_i is None or bool(np.all(self.alpha_i == self.alpha_i[0]))
        hom_e = self.eta_i is None or bool(np.all(self.eta_i == self.eta_i[0]))
        return hom_a and hom_e

    def agent_alpha(self) -> np.ndarray:
        if self.alpha_i is not None:
            return self.alpha_i
        return np.broadcast_to(self.alpha, (self.n_agents, self.n_goods)).copy()

    def agent_eta(self) -> np.ndarray:
        if self.eta_i is not None:
            return self.eta_i
        return np.full(self.n_agents, self.eta)

    def mean_alpha(self) -> np.ndarray:
        return self.agent_alpha().mean(axis=0)

    def mean_eta(self) -> float:
        return float(self.agent_eta().mean())

    def to_model(self) -> "CobbDouglasModel":
        return CobbDouglasModel(self.n_agents, self.mean_alpha(), self.mean_eta())


class CobbDouglasModel(EntropyModel):
    """S = N * (sum_j alpha_j log(G_j/N) + eta log(M/N)).

    Extensive by construction: S(lam*N, lam*G, lam*M) = lam*S(N, G, M)
    exactly.  Heterogeneous populations enter through mean alpha/eta.
    """

    kind = "cobb-douglas"

    def __init__(self, n_agents: float, alpha, eta: float):
        self.n_agents = float(n_agents)
        self.alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        self.eta = float(eta)
        if self.n_agents <= 0 or np.any(self.alpha <= 0) or self.eta <= 0:
            raise ConfigError("cobb-douglas requires N, alpha, eta > 0")
        self.n_goods = int(self.alpha.size)

    def entropy_packed(self, x: np.ndarray) -> float:
        n = self.n_agents
        m = x[0]
        g = x[1:]
        return n * (float(np.dot(self.alpha, np.log(g / n))) + self.eta * math.log(m / n))

    def grad_packed(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_goods + 1)
        out[0] = self.n_agents * self.eta / x[0]
        out[1:] = self.n_agents * self.alpha / x[1:]
        return out

    def hessian_packed(self, x: np.ndarray) -> np.ndarray:
        d = np.empty(self.n_goods + 1)
        d[0] = -self.n_agents * self.eta / x[0] ** 2
        d[1:] = -self.n_agents * self.alpha / x[1:] ** 2
        return np.diag(d)

    def scaled(self, lam: float) -> "CobbDouglasModel":
        return CobbDouglasModel(lam * self.n_agents, self.alpha, self.eta)

    # closed forms used as oracles elsewhere
    def critical_price(self, state: MacroState) -> np.ndarray:
        return self.alpha * state.money / (self.eta * state.goods)

    def money_of_temperature(self, t: float) -> float:
        return self.n_agents * self.eta * t


class PureMoneyModel(EntropyModel):
    """S = K log M + F(G): currency with no intrinsic use.

    F is either a concave coefficient form sum_j a_j log G_j or, for a single
    good, a tabulated function interpolated by a cubic spline (validated to
    be concave at load time).  Temperature M/K is independent of goods and
    the money capacity is the constant K.
    """

    kind = "pure-money"

    def __init__(self, k_money: float, goods_coeffs=None, table=None):
        if k_money <= 0:
            raise ConfigError("pure-money requires K > 0")
        self.k_money = float(k_money)
        self._spline = None
        if table is not None:
            g_grid, f_vals = (np.asarray(a, dtype=float) for a in table)
            if g_grid.ndim != 1 or g_grid.size < 4 or g_grid.size != f_vals.size:
                raise ConfigError("pure-money table needs matching 1-D grids, >= 4 points")
            if np.any(np.diff(g_grid) <= 0):
                raise ConfigError("pure-money table grid must be strictly increasing")
            self._spline = CubicSpline(g_grid, f_vals)
            probe = np.linspace(g_grid[0], g_grid[-1], 257)
            if np.any(self._spline(probe, 2) > 1e-9):
                raise ConfigError("pure-money table is not concave")
            self._hull = (float(g_grid[0]), float(g_grid[-1]))
            self.goods_coeffs = None
            self.n_goods = 1
        elif goods_coeffs is not None:
            self.goods_coeffs = np.atleast_1d(np.asarray(goods_coeffs, dtype=float))
            if np.any(self.goods_coeffs <= 0):
                raise ConfigError("pure-money goods coefficients must be > 0")
            self.n_goods = int(self.goods_coeffs.size)
        else:
            raise ConfigError("pure-money needs goods_coeffs or a table")

    def check_state(self, state: MacroState) -> None:
        super().check_state(state)
        if self._spline is not None:
            lo, hi = self._hull
            if not (lo <= state.goods[0] <= hi):
                raise DomainError(f"goods {state.goods[0]} outside table hull [{lo}, {hi}]")

    def goods_term(self, g: np.ndarray) -> float:
        if self._spline is not None:
            return float(self._spline(g[0]))
        return float(np.dot(self.goods_coeffs, np.log(g)))

    def entropy_packed(self, x: np.ndarray) -> float:
        return self.k_money * math.log(x[0]) + self.goods_term(x[1:])

    def grad_packed(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_goods + 1)
        out[0] = self.k_money / x[0]
        if self._spline is not None:
            out[1] = float(self._spline(x[1], 1))
        else:
            out[1:] = self.goods_coeffs / x[1:]
        return out

    def hessian_packed(self, x: np.ndarray) -> np.ndarray:
        h = np.zeros((self.n_goods + 1, self.n_goods + 1))
        h[0, 0] = -self.k_money / x[0] ** 2
        if self._spline is not None:
            h[1, 1] = float(self._spline(x[1], 2))
        else:
            for j in range(self.n_goods):
                h[1 + j, 1 + j] = -self.goods_coeffs[j] / x[1 + j] ** 2
        return h


class CoupledTestModel(EntropyModel):
    """S = a log M + b log G + c log(M + G): single good, non-separable.

    The money/goods coupling makes every cross derivative nonzero, which is
    what the derivative-relation checks need.
    """

    kind = "coupled-test"
    n_goods = 1

    def __init__(self, a: float, b: float, c: float):
        if min(a, b, c) <= 0:
            raise ConfigError("coupled-test requires a, b, c > 0")
        self.a, self.b, self.c = float(a), float(b), float(c)

    def entropy_packed(self, x: np.ndarray) -> float:
        m, g = x[0], x[1]
        return self.a * math.log(m) + self.b * math.log(g) + self.c * math.log(m + g)

    def grad_packed(self, x: np.ndarray) -> np.ndarray:
        m, g = x[0], x[1]
        s = self.c / (m + g)
        return np.array([self.a / m + s, self.b / g + s])

    def hessian_packed(self, x: np.ndarray) -> np.ndarray:
        m, g = x[0], x[1]
        s2 = -self.c / (m + g) ** 2
        return np.array([
            [-self.a / m ** 2 + s2, s2],
            [s2, -self.b / g ** 2 + s2],
        ])


class PerfectSubstitutesModel(EntropyModel):
    """Two goods entering only through their sum:
    S = N * (alpha log((G1+G2)/N) + eta log(M/N))."""

    kind = "perfect-substitutes"
    n_goods = 2

    def __init__(self, n_agents: float, alpha: float, eta: float):
        if n_agents <= 0 or alpha <= 0 or eta <= 0:
            raise ConfigError("perfect-substitutes requires N, alpha, eta > 0")
        self.n_agents = float(n_agents)
        self.alpha = float(alpha)
        self.eta = float(eta)

    def entropy_packed(self, x: np.ndarray) -> float:
        n = self.n_agents
        return n * (self.alpha * math.log((x[1] + x[2]) / n) + self.eta * math.log(x[0] / n))

    def grad_packed(self, x: np.ndarray) -> np.ndarray:
        n = self.n_agents
        vg = n * self.alpha / (x[1] + x[2])
        return np.array([n * self.eta / x[0], vg, vg])

    def hessian_packed(self, x: np.ndarray) -> np.ndarray:
        n = self.n_agents
        hg = -n * self.alpha / (x[1] + x[2]) ** 2
        h = np.full((3, 3), 0.0)
        h[0, 0] = -n * self.eta / x[0] ** 2
        h[1:, 1:] = hg
        return h


class TwoCurrencyModel(EntropyModel):
    """Two forms of pure money plus goods:
    S = k1 log M1 + k2 log M2 + sum_j a_j log G_j.

    M1 is the money coordinate; the second currency is goods coordinate 0.
    For fixed currency amounts the price ratio of any good between the two
    currencies is the constant M1*k2 / (M2*k1).
    """

    kind = "two-pure-currency"

    def __init__(self, k1: float, k2: float, goods_coeffs):
        if k1 <= 0 or k2 <= 0:
            raise ConfigError("two-pure-currency requires k1, k2 > 0")
        self.k1, self.k2 = float(k1), float(k2)
        self.goods_coeffs = np.atleast_1d(np.asarray(goods_coeffs, dtype=float))
        if np.any(self.goods_coeffs <= 0):
            raise ConfigError("goods coefficients must be > 0")
        self.n_goods = int(self.goods_coeffs.size) + 1

    def entropy_packed(self, x: np.ndarray) -> float:
        return (self.k1 * math.log(x[0]) + self.k2 * math.log(x[1])
                + float(np.dot(self.goods_coeffs, np.log(x[2:]))))

    def grad_packed(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.n_goods + 1)
        out[0] = self.k1 / x[0]
        out[1] = self.k2 / x[1]
        out[2:] = self.goods_coeffs / x[2:]
        return out

    def hessian_packed(self, x: np.ndarray) -> np.ndarray:
        d = np.empty(self.n_goods + 1)
        d[0] = -self.k1 / x[0] ** 2
        d[1] = -self.k2 / x[1] ** 2
        d[2:] = -self.goods_coeffs / x[2:] ** 2
        return np.diag(d)

    def price_ratio(self, state: MacroState) -> float:
        """Ratio (price in currency 1) / (price in currency 2) of any good."""
        return state.money * self.k2 / (state.goods[0] * self.k1)


class TabulatedModel(EntropyModel):
    """Entropy sampled on a rectilinear (money x goods) grid, single good,
    interpolated with a bicubic spline.  Load-time validation samples the
    interpolant for money desirability and concavity."""

    kind = "tabulated"
    n_goods = 1

    def __init__(self, money_grid, goods_grid, values, validate: bool = True):
        m = np.asarray(money_grid, dtype=float)
        g = np.asarray(goods_grid, dtype=float)
        v = np.asarray(values, dtype=float)
        if m.ndim != 1 or g.ndim != 1 or v.shape != (m.size, g.size):
            raise ConfigError("tabulated model needs values shaped (len(money), len(goods))")
        if m.size < 4 or g.size < 4:
            raise ConfigError("tabulated model needs at least a 4x4 grid")
        self._spline = RectBivariateSpline(m, g, v, kx=3, ky=3)
        self._hull = (float(m[0]), float(m[-1]), float(g[0]), float(g[-1]))
        if validate:
            self._validate(m, g)

    def _validate(self, m, g):
        mm = np.linspace(m[1], m[-2], 17)
        gg = np.linspace(g[1], g[-2], 17)
        for mi in mm:
            for gi in gg:
                x = np.array([mi, gi])
                grad = self.grad_packed(x)
                if grad[0] <= 0:
                    raise ConfigError("tabulated entropy violates money desirability")
                h = self.hessian_packed(x)
                if np.max(np.linalg.eigvalsh(0.5 * (h + h.T))) > 1e-6:
                    raise ConfigError("tabulated entropy is not concave on its grid")

    def check_state(self, state: MacroState) -> None:
        super().check_state(state)
        mlo, mhi, glo, ghi = self._hull
        if not (mlo <= state.money <= mhi and glo <= state.goods[0] <= ghi):
            raise DomainError("state outside tabulated hull")

    def entropy_packed(self, x: np.ndarray) -> float:
        return float(self._spline(x[0], x[1])[0, 0])

    def grad_packed(self, x: np.ndarray) -> np.ndarray:
        return np.array([
            float(self._spline(x[0], x[1], dx=1)[0, 0]),
            float(self._spline(x[0], x[1], dy=1)[0, 0]),
        ])

    def hessian_packed(self, x: np.ndarray) -> np.ndarray:
        smm = float(self._spline(x[0], x[1], dx=2)[0, 0])
        sgg = float(self._spline(x[0], x[1], dy=2)[0, 0])
        smg = float(self._spline(x[0], x[1], dx=1, dy=1)[0, 0])
        return np.array([[smm, smg], [smg, sgg]])


class AffineModel(EntropyModel):
    """a*S + b wrapper (a > 0): the gauge freedom of the entropy scale."""

    kind = "affine"

    def __init__(self, inner: EntropyModel, a: float, b: float):
        if a <= 0:
            raise ConfigError("affine rescaling requires a > 0 (orientation preserving)")
        self.inner = inner
        self.a, self.b = float(a), float(b)
        self.n_goods = inner.n_goods

    def entropy_packed(self, x: np.ndarray) -> float:
        return self.a * self.inner.entropy_packed(x) + self.b

    def grad_packed(self, x: np.ndarray):
        g = self.inner.grad_packed(x)
        return None if g is None else self.a * g

    def hessian_packed(self, x: np.ndarray):
        h = self.inner.hessian_packed(x)
        return None if h is None else self.a * h


# ---------------------------------------------------------------------------
# Derived-quantity operations
# ---------------------------------------------------------------------------


def entropy(model: EntropyModel, state: MacroState) -> float:
    return model.entropy(state)


def hessian(model: EntropyModel, state: MacroState):
    """Second derivative of S over (M, G_1..G_k).

    Returns (H, error_bounds, asymmetry_residual); analytic Hessians carry a
    zero error bound, finite-difference ones the Richardson estimate.
    """
    model.check_state(state)
    x = state.packed()
    h = model.hessian_packed(x)
    if h is not None:
        h = np.asarray(h, dtype=float)
        residual = float(np.max(np.abs(h - h.T)))
        return 0.5 * (h + h.T), np.zeros_like(h), residual
    return diff.hessian(model.entropy_packed, x)


def thermo_quantities(model: EntropyModel, state: MacroState,
                      t_bath: Optional[float] = None) -> ThermoQuantities:
    """Entropy plus T, beta, C, values, prices and free energy at a state."""
    model.check_state(state)
    x = state.packed()
    s = float(model.entropy_packed(x))
    g = model.grad_packed(x)
    if g is None:
        g, _ = diff.gradient(model.entropy_packed, x)
    beta = float(g[0])
    if beta <= 0:
        raise DomainError(f"dS/dM = {beta} <= 0: money not desirable at this state")
    t = 1.0 / beta
    values = np.asarray(g[1:], dtype=float)
    prices = values / beta
    h = model.hessian_packed(x)
    if h is not None:
        s_mm = float(h[0][0] if isinstance(h, np.ndarray) else h[0][0])
    else:
        s_mm, _ = diff.second_partial(model.entropy_packed, x, 0, 0)
    if s_mm >= 0:
        capacity = math.inf
    else:
        capacity = -beta * beta / s_mm
    bath = t if t_bath is None else float(t_bath)
    return ThermoQuantities(
        entropy=s,
        temperature=t,
        coolness=beta,
        money_capacity=capacity,
        values=values,
        prices=prices,
        free_energy=state.money - bath * s,
    )


def partition_log_volume(n_agents: int, alpha: float, eta: float, state: MacroState) -> float:
    """log of the stationary-distribution normalisation for the single-good
    exchange economy, via log-Gamma functions (overflow safe):

    log Z = (N*alpha - 1) log G + N log Gamma(alpha) - log Gamma(N*alpha)
          + (N*eta   - 1) log M + N log Gamma(eta)   - log Gamma(N*eta)
    """
    if state.n_goods != 1:
        raise DimensionError("partition log-volume is defined for a single good")
    if not state.interior:
        raise DomainError("interior state required")
    if n_agents < 1 or alpha <= 0 or eta <= 0:
        raise ConfigError("need n_agents >= 1 and alpha, eta > 0")
    n = float(n_agents)
    g = float(state.goods[0])
    m = state.money
    out = (n * alpha - 1.0) * math.log(g) + n * gammaln(alpha) - gammaln(n * alpha)
    out += (n * eta - 1.0) * math.log(m) + n * gammaln(eta) - gammaln(n * eta)
    return float(out)


def log_volume_stirling_constant(alpha: float, eta: float) -> float:
    """Per-agent constant in log Z ~ N (log (G/N)^alpha (M/N)^eta + const):
    const = lnGamma(alpha) - alpha ln alpha + alpha + (same in eta)."""
    return float(gammaln(alpha) - alpha * math.log(alpha) + alpha
                 + gammaln(eta) - eta * math.log(eta) + eta)


def inflation_rate(t_series: Sequence[float], dt: float = 1.0) -> float:
    """(1/T) dT/dt estimated by log-linear regression over the series."""
    t = np.asarray(t_series, dtype=float)
    if t.size < 2:
        raise InsufficientDataError("inflation rate needs at least 2 samples")
    if np.any(t <= 0):
        raise DomainError("temperature series must be strictly positive")
    x = np.arange(t.size) * dt
    slope = np.polyfit(x, np.log(t), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# Config loading
# ---------------------------------------------------------------------------

_MODEL_KEYS = {
    "cobb-douglas": {"kind", "n_agents", "alpha", "eta", "alpha_i", "eta_i"},
    "pure-money": {"kind", "k", "goods_coeffs", "table_path"},
    "coupled-test": {"kind", "a", "b", "c"},
    "perfect-substitutes": {"kind", "n_agents", "alpha", "eta"},
    "two-pure-currency": {"kind", "k1", "k2", "goods_coeffs"},
    "tabulated": {"kind", "table_path"},
}


def model_from_config(cfg: dict) -> EntropyModel:
    """Build an entropy model from a structured-text config mapping.

    Documented keys: kind, n_agents, alpha (list), eta, coupling constants
    (a, b, c / k / k1, k2), goods_coeffs, table_path.  Unknown keys are
    rejected.
    """
    if "kind" not in cfg:
        raise ConfigError("model config needs a 'kind' key")
    kind = cfg["kind"]
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {sorted(_MODEL_KEYS)}")
    unknown = set(cfg) - _MODEL_KEYS[kind]
    if unknown:
        raise ConfigError(f"unknown keys for {kind} model: {sorted(unknown)}")
    try:
        if kind == "cobb-douglas":
            return CobbDouglasParams(
                n_agents=int(cfg["n_agents"]),
                alpha=np.atleast_1d(cfg["alpha"]),
                eta=float(cfg["eta"]),
                alpha_i=cfg.get("alpha_i"),
                eta_i=cfg.get("eta_i"),
            ).to_model()
        if kind == "pure-money":
            if "table_path" in cfg:
                data = np.loadtxt(cfg["table_path"], delimiter=",", skiprows=1)
                return PureMoneyModel(float(cfg["k"]), table=(data[:, 0], data[:, 1]))
            return PureMoneyModel(float(cfg["k"]), goods_coeffs=cfg["goods_coeffs"])
        if kind == "coupled-test":
            return CoupledTestModel(float(cfg["a"]), float(cfg["b"]), float(cfg["c"]))
        if kind == "perfect-substitutes":
            return PerfectSubstitutesModel(int(cfg["n_agents"]), float(cfg["alpha"]), float(cfg["eta"]))
        if kind == "two-pure-currency":
            return TwoCurrencyModel(float(cfg["k1"]), float(cfg["k2"]), cfg["goods_coeffs"])
        data = np.loadtxt(cfg["table_path"], delimiter=",")
        return TabulatedModel(data[1:, 0], data[0, 1:], data[1:, 1:])
    except KeyError as exc:
        raise ConfigError(f"missing key {exc} for {kind} model") from None
