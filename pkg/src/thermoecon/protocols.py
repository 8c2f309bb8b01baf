"""Composite multi-economy processes, in two execution modes.

Analytic mode drives oracle entropies with bracketed root-finding (no
stochastic error; used for the tight checks).  Stochastic mode drives the
micro-simulator and reports statistical tolerances.  The same script type
feeds both.

Sign conventions: a financial join moves money from the hotter economy to
the cooler; goods flows are counted per good, positive from A to B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ConfigError, InfeasibleError, NoRootError, SolverError
from .micro import ContactSystem, ExchangeEngine, SimConfig, summarize
from .models import (CobbDouglasModel, CobbDouglasParams, EntropyModel,
                     MacroState, thermo_quantities)

__all__ = [
    "Economy",
    "JoinResult",
    "join_to_equilibrium",
    "ship_thermometer",
    "find_market_price",
    "arbitrage",
    "reversible_money_transfer",
    "CarnotConfig",
    "CarnotResult",
    "carnot_cycle",
    "ProtocolStep",
    "ProtocolScript",
    "run_script",
    "money_at_temperature",
    "money_on_entropy",
]

_BRENT_KW = dict(xtol=1e-14, rtol=8.9e-16, maxiter=200)
INTERIOR_MARGIN = 1e-9


@dataclass
class Economy:
    """A named economy: entropy model + macro state, plus the micro engine
    when running stochastically."""

    name: str
    model: EntropyModel
    state: MacroState
    engine: Optional[ExchangeEngine] = None

    def entropy(self) -> float:
        return self.model.entropy(self.state)

    def temperature(self) -> float:
        return self.model.temperature(self.state)

    def prices(self) -> np.ndarray:
        return self.model.prices(self.state)

    def sync_from_engine(self):
        if self.engine is not None:
            self.state = self.engine.macro()

    @staticmethod
    def stochastic(name: str, params: CobbDouglasParams, money: float, goods,
                   seed: int, init: str = "stationary") -> "Economy":
        eng = ExchangeEngine(params, money, goods, config=SimConfig(seed=seed), init=init)
        return Economy(name, params.to_model(), eng.macro(), engine=eng)


# ---------------------------------------------------------------------------
# Root-finding primitives on the oracle
# ---------------------------------------------------------------------------


def _bracket_and_solve(f: Callable[[float], float], lo: float, hi: float,
                       what: str) -> float:
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if f_lo * f_hi > 0:
        raise NoRootError(f"no sign change bracketing {what} in [{lo}, {hi}]")
    return float(brentq(f, lo, hi, **_BRENT_KW))


def money_at_temperature(model: EntropyModel, goods, t_target: float,
                         m_guess: float) -> float:
    """Money making T(goods, M) = t_target; T is increasing in M (C > 0)."""
    goods = np.atleast_1d(np.asarray(goods, dtype=float))

    def f(m: float) -> float:
        return model.temperature(MacroState(m, goods)) - t_target

    lo = hi = max(m_guess, INTERIOR_MARGIN)
    for _ in range(200):
        if f(lo) <= 0:
            break
        lo *= 0.5
    else:
        raise NoRootError("temperature target below the model's range (A15 defect)")
    for _ in range(200):
        if f(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NoRootError("temperature target above the model's range (A15 defect)")
    return _bracket_and_solve(f, lo, hi, f"T={t_target}")


def money_on_entropy(model: EntropyModel, goods, s_level: float,
                     m_guess: float) -> float:
    """Money making S(goods, M) = s_level at fixed goods; S increases in M."""
    goods = np.atleast_1d(np.asarray(goods, dtype=float))

    def f(m: float) -> float:
        return model.entropy(MacroState(m, goods)) - s_level

    lo = hi = max(m_guess, INTERIOR_MARGIN)
    for _ in range(400):
        if f(lo) <= 0:
            break
        lo *= 0.5
    else:
        raise NoRootError("entropy level below range at these goods")
    for _ in range(400):
        if f(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NoRootError("entropy level above range at these goods")
    return _bracket_and_solve(f, lo, hi, f"S={s_level}")


# ---------------------------------------------------------------------------
# Financial joins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JoinResult:
    states: Tuple[MacroState, ...]
    common_temperature: float
    money_flow_ab: float          # two-economy case: money moved A -> B
    entropy_change: float


def join_to_equilibrium(economies: Sequence[Economy], mode: str = "analytic",
                        wait_events: int = 200_000, w_money: float = 0.4,
                        snapshots: int = 2000) -> JoinResult:
    """Bring economies into financial equilibrium (equal temperatures,
    total money conserved, goods untouched).

    Analytic mode solves sum_e M_e(T) = M_total by bracketed root-finding.
    Stochastic mode (two economies) runs the money contact channel and
    time-averages the split.
    """
    if len(economies) < 2:
        raise ConfigError("join needs at least two economies")
    s_before = sum(e.entropy() for e in economies)
    m_total = sum(e.state.money for e in economies)
    if mode == "stochastic":
        if len(economies) != 2:
            raise ConfigError("stochastic join is implemented pairwise")
        a, b = economies
        if a.engine is None or b.engine is None:
            raise ConfigError("stochastic join needs engines on both economies")
        m_a_before = a.state.money
        cs = ContactSystem(a.engine, b.engine, w_money=w_money)
        cs.run(wait_events)
        thin = max(1, wait_events // (4 * snapshots))
        ma, _ = cs.record(snapshots, thin_events=thin)
        acc = summarize(ma)
        for e in (a, b):
            e.sync_from_engine()
        new_a = a.state.replace(money=float(acc.mean))
        new_b = b.state.replace(money=m_total - float(acc.mean))
        t_common = 0.5 * (a.model.temperature(new_a) + b.model.temperature(new_b))
        s_after = a.model.entropy(new_a) + b.model.entropy(new_b)
        return JoinResult((new_a, new_b), t_common, m_a_before - float(acc.mean),
                          s_after - s_before)
    if mode != "analytic":
        raise ConfigError(f"unknown mode {mode!r}")

    temps = [e.temperature() for e in economies]
    t_lo, t_hi = min(temps), max(temps)
    m_before = [e.state.money for e in economies]
    if t_hi - t_lo == 0.0:
        return JoinResult(tuple(e.state for e in economies), t_lo, 0.0, 0.0)

    def excess(t: float) -> float:
        return sum(
            money_at_temperature(e.model, e.state.goods, t, e.state.money)
            for e in economies) - m_total

    t_star = _bracket_and_solve(excess, t_lo, t_hi, "common temperature")
    new_money = [money_at_temperature(e.model, e.state.goods, t_star, e.state.money)
                 for e in economies]
    # distribute the rounding residue so total money is conserved exactly
    resid = m_total - sum(new_money)
    new_money[0] += resid
    new_states = tuple(e.state.replace(money=m) for e, m in zip(economies, new_money))
    s_after = sum(e.model.entropy(st) for e, st in zip(economies, new_states))
    for e, st in zip(economies, new_states):
        e.state = st
        if e.engine is not None:
            e.engine.set_totals(money=st.money)
    return JoinResult(new_states, t_star, m_before[0] - new_money[0], s_after - s_before)


# ---------------------------------------------------------------------------
# Ship thermometer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThermometerReading:
    temperature: float
    se: float
    mainland_perturbation: float   # relative change of the mainland T
    perturbation_warning: bool
    readout: str


def ship_thermometer(mainland: Economy, ship: Economy, readout: str = "money",
                     mode: str = "analytic", contact_events: int = 400_000,
                     snapshots: int = 4000, max_size_ratio: float = 0.05) -> ThermometerReading:
    """Measure the mainland temperature by financial contact with a small
    shipboard economy (readout from its money or its market price)."""
    if readout not in ("money", "price"):
        raise ConfigError("readout must be 'money' or 'price'")
    n_ship = getattr(ship.model, "n_agents", None)
    n_main = getattr(mainland.model, "n_agents", None)
    if n_ship and n_main and n_ship > max_size_ratio * n_main:
        raise ConfigError(
            f"ship has {n_ship} agents; limit is {max_size_ratio:.0%} of mainland ({n_main})")
    t_before = mainland.temperature()
    if mode == "analytic":
        res = join_to_equilibrium([mainland, ship], mode="analytic")
        t_hat = res.common_temperature
        pert = abs(t_hat - t_before) / t_before
        return ThermometerReading(t_hat, 0.0, pert, pert > 0.01, readout)
    if mainland.engine is None or ship.engine is None:
        raise ConfigError("stochastic thermometer needs engines")
    cs = ContactSystem(ship.engine, mainland.engine, w_money=0.3)
    cs.run(contact_events // 2)
    thin = max(1, contact_events // (2 * snapshots))
    m_ship, g_ship = cs.record(snapshots, thin_events=thin)
    ship.sync_from_engine()
    mainland.sync_from_engine()
    model = ship.model
    if readout == "money":
        t_series = m_ship / (model.n_agents * model.eta)
    else:
        # price readout: market price of the measured ship state, times G/(alpha*N)
        mu_series = model.alpha[0] * m_ship / (model.eta * g_ship[:, 0])
        t_series = mu_series * g_ship[:, 0] / (model.alpha[0] * model.n_agents)
    acc = summarize(t_series)
    t_after = mainland.temperature()
    pert = abs(t_after - t_before) / t_before
    return ThermometerReading(float(acc.mean), float(acc.se), pert, pert > 0.01, readout)


# ---------------------------------------------------------------------------
# Empirical market price
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriceEstimate:
    price: float
    ci_half_width: float
    n_iterations: int
    mode: str


def find_market_price(economy: Economy, good: int = 0, rel_tol: float = 5e-3,
                      mode: str = "stochastic", bracket: Optional[Tuple[float, float]] = None,
                      drift_samples: int = 20_000, mix_sweeps: float = 2e-3,
                      seed_salt: int = 0) -> PriceEstimate:
    """Posted-price search for the no-flow price of a good.

    Stochastic mode bisects the sign of the mean prospective one-encounter
    goods drift (sampled from the stationary ensemble, never applied, so the
    macro totals stay put).  The two initial prices must produce opposite
    drifts at 2 sigma.  Analytic mode bisects the oracle drift sign and
    converges to the critical price.
    """
    if mode == "analytic":
        mu_c = float(economy.prices()[good])
        lo, hi = (bracket if bracket is not None else (0.25 * mu_c, 4.0 * mu_c))

        def sign_at(mu: float) -> float:
            return 1.0 if economy.prices()[good] > mu else -1.0

        if sign_at(lo) == sign_at(hi):
            raise NoRootError("drift has the same sign at both initial prices")
        it = 0
        while (hi - lo) > rel_tol * 0.25 * (hi + lo) and it < 200:
            mid = 0.5 * (lo + hi)
            if sign_at(mid) > 0:
                lo = mid
            else:
                hi = mid
            it += 1
        return PriceEstimate(0.5 * (lo + hi), 0.5 * (hi - lo), it, mode)

    if economy.engine is None:
        raise ConfigError("stochastic price search needs an engine")
    eng = economy.engine
    if bracket is None:
        rough = float(economy.prices()[good])
        bracket = (rough / 3.0, rough * 3.0)
    lo, hi = bracket

    def drift(mu: float):
        d = eng.price_drift_samples(mu, good=good, n_samples=drift_samples,
                                    mix_sweeps=mix_sweeps)
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))

    d_lo, se_lo = drift(lo)
    d_hi, se_hi = drift(hi)
    if not (d_lo - 2 * se_lo > 0 and d_hi + 2 * se_hi < 0):
        raise NoRootError(
            f"goods flow does not bracket zero at 2 sigma: "
            f"drift({lo:.4g})={d_lo:.3g}+-{se_lo:.2g}, drift({hi:.4g})={d_hi:.3g}+-{se_hi:.2g}")
    it = 0
    while (hi - lo) > rel_tol * 0.5 * (hi + lo) and it < 60:
        mid = 0.5 * (lo + hi)
        d_mid, _ = drift(mid)
        if d_mid > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    return PriceEstimate(0.5 * (lo + hi), 0.5 * (hi - lo), it, mode)


# ---------------------------------------------------------------------------
# Arbitrage and reversible extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArbitrageResult:
    profit: float
    state_a: MacroState
    state_b: MacroState
    trace: np.ndarray            # columns: G_A, M_A, M_B, mu_A, mu_B
    goods_moved_ab: float


def arbitrage(a: Economy, b: Economy, good: int = 0, price_tol: float = 1e-11,
              trace_points: int = 65, apply: bool = True) -> ArbitrageResult:
    """Reversible infinitesimal trades between two economies until the
    prices of `good` agree.

    Each economy stays on its own isentrope (money recovered from
    S(G, M) = S0 by bracketed root-finding, so reversibility is exact by
    construction); the endpoint minimizes M_A + M_B subject to fixed S_A,
    S_B and total goods.  Profit accrues to the trader.
    """
    s_a0, s_b0 = a.entropy(), b.entropy()
    mu_a0, mu_b0 = a.prices()[good], b.prices()[good]
    g_tot = a.state.goods[good] + b.state.goods[good]

    def states_at(g_a_good: float) -> Tuple[MacroState, MacroState]:
        goods_a = a.state.goods.copy()
        goods_a[good] = g_a_good
        goods_b = b.state.goods.copy()
        goods_b[good] = g_tot - g_a_good
        m_a = money_on_entropy(a.model, goods_a, s_a0, a.state.money)
        m_b = money_on_entropy(b.model, goods_b, s_b0, b.state.money)
        return MacroState(m_a, goods_a), MacroState(m_b, goods_b)

    def gap(g_a_good: float) -> float:
        st_a, st_b = states_at(g_a_good)
        return float(a.model.prices(st_a)[good] - b.model.prices(st_b)[good])

    g_a0 = float(a.state.goods[good])
    if abs(mu_a0 - mu_b0) <= price_tol * max(mu_a0, mu_b0):
        g_star = g_a0
    else:
        # goods flow out of the cheaper economy; expand toward the crossing
        direction = -1.0 if mu_a0 < mu_b0 else +1.0
        step = 0.05 * min(g_a0, g_tot - g_a0)
        lo = hi = g_a0
        probe = g_a0
        for _ in range(300):
            probe = probe + direction * step
            if probe <= INTERIOR_MARGIN or probe >= g_tot - INTERIOR_MARGIN:
                probe = min(max(probe, INTERIOR_MARGIN * 2), g_tot - INTERIOR_MARGIN * 2)
            if gap(probe) * (mu_a0 - mu_b0) <= 0:
                lo, hi = sorted((g_a0, probe))
                break
            step *= 1.6
        else:
            raise SolverError("arbitrage endpoint not bracketed (reported, not assumed)")
        g_star = _bracket_and_solve(gap, lo, hi, "price equality")

    st_a, st_b = states_at(g_star)
    profit = (a.state.money + b.state.money) - (st_a.money + st_b.money)
    trace = (np.empty((0, 5)) if trace_points < 2
             else _arbitrage_trace(states_at, a, b, good, g_a0, g_star, trace_points))
    if apply:
        a.state, b.state = st_a, st_b
    return ArbitrageResult(float(profit), st_a, st_b, trace,
                           float(g_a0 - g_star))


def _arbitrage_trace(states_at, a: Economy, b: Economy, good: int,
                     g_a0: float, g_star: float, n0: int,
                     max_nodes: int = 20_000) -> np.ndarray:
    """Path samples, locally refined until no step moves either price by
    more than 1%."""

    def row(g_val: float):
        sa, sb = states_at(g_val)
        return (g_val, sa.money, sb.money,
                float(a.model.prices(sa)[good]), float(b.model.prices(sb)[good]))

    pts = [row(g) for g in np.linspace(g_a0, g_star, n0)]
    for _ in range(40):
        refined = []
        too_coarse = False
        for left, right in zip(pts[:-1], pts[1:]):
            refined.append(left)
            if (abs(right[3] - left[3]) > 0.01 * abs(left[3])
                    or abs(right[4] - left[4]) > 0.01 * abs(left[4])):
                refined.append(row(0.5 * (left[0] + right[0])))
                too_coarse = True
        refined.append(pts[-1])
        pts = refined
        if not too_coarse:
            return np.asarray(pts)
        if len(pts) > max_nodes:
            raise InfeasibleError(
                "trace step changes a price by more than 1% after refinement")
    raise InfeasibleError(
        "trace step changes a price by more than 1% after refinement")


@dataclass(frozen=True)
class TransferResult:
    profit: float
    common_temperature: float
    state_a: MacroState
    state_b: MacroState


def reversible_money_transfer(a: Economy, b: Economy, apply: bool = True) -> TransferResult:
    """Trader-mediated reversible money extraction (the continuum limit of
    Carnot cycles): entropy moves between the economies at fixed goods,
    total entropy conserved, until temperatures agree; the trader keeps the
    money difference."""
    s_tot = a.entropy() + b.entropy()
    t_a, t_b = a.temperature(), b.temperature()
    if t_a == t_b:
        return TransferResult(0.0, t_a, a.state, b.state)
    t_lo, t_hi = sorted((t_a, t_b))

    def s_gap(t: float) -> float:
        m_a = money_at_temperature(a.model, a.state.goods, t, a.state.money)
        m_b = money_at_temperature(b.model, b.state.goods, t, b.state.money)
        return (a.model.entropy(a.state.replace(money=m_a))
                + b.model.entropy(b.state.replace(money=m_b)) - s_tot)

    t_star = _bracket_and_solve(s_gap, t_lo, t_hi, "equal-temperature entropy level")
    m_a = money_at_temperature(a.model, a.state.goods, t_star, a.state.money)
    m_b = money_at_temperature(b.model, b.state.goods, t_star, b.state.money)
    profit = a.state.money + b.state.money - m_a - m_b
    st_a = a.state.replace(money=m_a)
    st_b = b.state.replace(money=m_b)
    if apply:
        a.state, b.state = st_a, st_b
    return TransferResult(float(profit), t_star, st_a, st_b)


# ---------------------------------------------------------------------------
# Carnot cycle
# ---------------------------------------------------------------------------


@dataclass
class CarnotConfig:
    """Boat shuttling between hot and cold reservoirs.

    g_low/g_high bound the goods span of the hot isotherm; the cold-isotherm
    span follows from the isentropes through those corners.  Stochastic mode
    needs Cobb-Douglas parameter sets for the boat and both mainlands.
    """

    boat: EntropyModel
    t_hot: float
    t_cold: float
    g_low: float
    g_high: float
    n_steps: int = 200
    mode: str = "analytic"
    direction: str = "engine"
    # stochastic-mode settings
    boat_params: Optional[CobbDouglasParams] = None
    hot_params: Optional[CobbDouglasParams] = None
    cold_params: Optional[CobbDouglasParams] = None
    mainland_goods: float = 30.0
    cycles: int = 1
    seed: int = 0
    encounters_per_step: int = 120
    contact_events_per_step: int = 300

    def __post_init__(self):
        if self.direction not in ("engine", "pump"):
            raise ConfigError("direction must be 'engine' or 'pump'")
        if self.direction == "engine" and not self.t_hot > self.t_cold:
            raise ConfigError("engine mode requires T_hot > T_cold")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if not (0 < self.g_low < self.g_high):
            raise ConfigError("need 0 < g_low < g_high")


@dataclass
class CarnotResult:
    direction: str
    money_from_hot: float
    money_to_cold: float
    trader_profit: float
    efficiency: float            # engine: profit / money_from_hot
    cop: float                   # pump: money into hot / trader money spent
    ideal_efficiency: float
    loop_area_mu_dg: float
    loop_area_t_ds: float
    trace: np.ndarray            # columns: leg, G, M, T, S, mu
    closure_residual: float
    n_steps: int
    efficiency_se: float = 0.0


def _isotherm_entropy(model: EntropyModel, t: float, g: float, m_guess: float):
    m = money_at_temperature(model, [g], t, m_guess)
    return model.entropy(MacroState(m, [g])), m


def _corner_goods(model: EntropyModel, t: float, s_level: float, g_guess: float) -> float:
    """Goods coordinate of the (isotherm t) x (isentrope s_level) corner."""

    def f(g: float) -> float:
        s, _ = _isotherm_entropy(model, t, g, g_guess)
        return s - s_level

    lo = hi = max(g_guess, INTERIOR_MARGIN)
    for _ in range(300):
        if f(lo) <= 0:
            break
        lo *= 0.5
    else:
        raise NoRootError("isentrope does not meet the isotherm (low side)")
    for _ in range(300):
        if f(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NoRootError("isentrope does not meet the isotherm (high side)")
    return _bracket_and_solve(f, lo, hi, "cycle corner")


def _isentrope_rk4(model: EntropyModel, g0: float, m0: float, g1: float,
                   s_level: float, max_halvings: int = 10) -> float:
    """One quasi-static step along dM = -mu dG, substep-refined until the
    oracle entropy drift of the step is below 1e-10."""

    def mu(g: float, m: float) -> float:
        return float(model.prices(MacroState(m, [g]))[0])

    n_sub = 1
    for _ in range(max_halvings):
        m = m0
        h = (g1 - g0) / n_sub
        for k in range(n_sub):
            g = g0 + k * h
            k1 = -mu(g, m)
            k2 = -mu(g + 0.5 * h, m + 0.5 * h * k1)
            k3 = -mu(g + 0.5 * h, m + 0.5 * h * k2)
            k4 = -mu(g + h, m + h * k3)
            m += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        if abs(model.entropy(MacroState(m, [g1])) - s_level) < 1e-10:
            return m
        n_sub *= 2
    return m


def _leg_loop_areas(model: EntropyModel, corners, legs) -> Tuple[float, float]:
    """Continuum loop integrals: oint mu dG and oint T dS, per leg, using
    adaptive quadrature on isotherms (isentropes contribute -delta M and 0)."""
    area_mu = 0.0
    area_tds = 0.0
    for kind, (g_a, m_a, s_a, t_a), (g_b, m_b, s_b, t_b) in legs:
        if kind == "isotherm":
            val, _ = quad(lambda g: float(model.prices(
                MacroState(money_at_temperature(model, [g], t_a, m_a), [g]))[0]),
                g_a, g_b, limit=200, epsabs=1e-12, epsrel=1e-12)
            area_mu += val
            area_tds += t_a * (s_b - s_a)
        else:
            area_mu += -(m_b - m_a)
    return area_mu, area_tds


def _carnot_analytic(cfg: CarnotConfig) -> CarnotResult:
    model = cfg.boat
    if model.n_goods != 1:
        raise ConfigError("analytic Carnot uses a single-good boat")
    engine = cfg.direction == "engine"
    t_h, t_c = cfg.t_hot, cfg.t_cold
    s_lo, m_1 = _isotherm_entropy(model, t_h, cfg.g_low, 1.0)
    s_hi, m_2 = _isotherm_entropy(model, t_h, cfg.g_high, m_1)
    g_3 = _corner_goods(model, t_c, s_hi, cfg.g_high)
    g_4 = _corner_goods(model, t_c, s_lo, max(g_3 * cfg.g_low / cfg.g_high, INTERIOR_MARGIN))
    m_3 = money_at_temperature(model, [g_3], t_c, m_2)
    m_4 = money_at_temperature(model, [g_4], t_c, m_3)

    q_hot = 0.0        # money drawn from the hot mainland (engine sign)
    q_cold = 0.0       # money pushed into the cold mainland (engine sign)
    trader = 0.0
    trace: List[Tuple[float, float, float, float, float, float]] = []

    def snap(leg: int, g: float, m: float):
        st = MacroState(m, [g])
        trace.append((leg, g, m, model.temperature(st), model.entropy(st),
                      float(model.prices(st)[0])))

    def isothermal_leg(leg_id: int, t: float, g_from: float, g_to: float,
                       m_from: float) -> Tuple[float, float]:
        nonlocal trader
        flow = 0.0
        m = m_from
        grid = np.linspace(g_from, g_to, cfg.n_steps + 1)
        snap(leg_id, g_from, m)
        for k in range(cfg.n_steps):
            g_k, g_n = grid[k], grid[k + 1]
            mu_k = float(model.prices(MacroState(m, [g_k]))[0])
            d_g = g_n - g_k
            m_trade = m - mu_k * d_g            # boat pays/earns at the posted price
            trader += mu_k * d_g
            m_next = money_at_temperature(model, [g_n], t, max(m_trade, INTERIOR_MARGIN))
            flow += m_next - m_trade            # mainland restores the isotherm
            m = m_next
            snap(leg_id, g_n, m)
        return flow, m

    def isentropic_leg(leg_id: int, s_level: float, g_from: float, g_to: float,
                       m_from: float) -> float:
        nonlocal trader
        m = m_from
        grid = np.linspace(g_from, g_to, cfg.n_steps + 1)
        snap(leg_id, g_from, m)
        for k in range(cfg.n_steps):
            m_next = _isentrope_rk4(model, grid[k], m, grid[k + 1], s_level)
            trader += m - m_next                # all boat money change is trade
            m = m_next
            snap(leg_id, grid[k + 1], m)
        return m

    if engine:
        flow_h, m_after = isothermal_leg(0, t_h, cfg.g_low, cfg.g_high, m_1)
        q_hot = flow_h
        m_after = isentropic_leg(1, s_hi, cfg.g_high, g_3, m_after)
        flow_c, m_after = isothermal_leg(2, t_c, g_3, g_4, m_after)
        q_cold = -flow_c
        m_after = isentropic_leg(3, s_lo, g_4, cfg.g_low, m_after)
        closure = m_after - m_1
    else:
        # pump: traverse the loop the other way, driving money into the hot side
        flow_h, m_after = isothermal_leg(0, t_h, cfg.g_high, cfg.g_low, m_2)
        q_hot = -flow_h            # money pushed into hot
        m_after = isentropic_leg(1, s_lo, cfg.g_low, g_4, m_after)
        flow_c, m_after = isothermal_leg(2, t_c, g_4, g_3, m_after)
        q_cold = flow_c            # money drawn from cold
        m_after = isentropic_leg(3, s_hi, g_3, cfg.g_high, m_after)
        closure = m_after - m_2

    corners = [(cfg.g_low, m_1, s_lo, t_h), (cfg.g_high, m_2, s_hi, t_h),
               (g_3, m_3, s_hi, t_c), (g_4, m_4, s_lo, t_c)]
    legs = [("isotherm", corners[0], corners[1]),
            ("isentrope", corners[1], corners[2]),
            ("isotherm", corners[2], corners[3]),
            ("isentrope", corners[3], corners[0])]
    area_mu, area_tds = _leg_loop_areas(model, corners, legs)

    ideal = 1.0 - t_c / t_h
    profit = trader
    if engine:
        eff = profit / q_hot if q_hot > 0 else 0.0
        cop = math.nan
    else:
        spent = -profit            # trader puts money in
        eff = math.nan
        cop = q_hot / spent if spent > 0 else math.inf
    return CarnotResult(cfg.direction, q_hot, q_cold, profit, eff, cop, ideal,
                        area_mu, area_tds, np.asarray(trace), float(closure),
                        cfg.n_steps)


def _carnot_stochastic(cfg: CarnotConfig) -> CarnotResult:
    """Micro-simulated engine cycle on a Cobb-Douglas boat.

    Legs are driven by posted prices derived from the *designed* leg nodes
    (never from the fluctuating realized state, which would let the trader
    be ratcheted by the boat's fluctuations).  The posted price for a step
    from node g_k to g_{k+1} accounts for the boat's money moving along the
    budget line during the step: mu = alpha*m_k / ((alpha+eta) g_{k+1} -
    alpha g_k), which puts the kernel's stall point exactly on the target
    node.  Isothermal legs schedule money from the joint boat+mainland pool
    temperature (a high-mass, low-noise observable), so mainland cooling is
    tracked rather than fought; money moves through genuine contact events
    and Q_hot/Q_cold are the measured contact fluxes.
    """
    if cfg.direction != "engine":
        raise ConfigError("stochastic mode implements the engine direction")
    for name in ("boat_params", "hot_params", "cold_params"):
        if getattr(cfg, name) is None:
            raise ConfigError(f"stochastic Carnot needs {name}")
    bp = cfg.boat_params
    boat_model = bp.to_model()
    alpha, eta = float(boat_model.alpha[0]), boat_model.eta
    n_b = bp.n_agents
    q_b = n_b * eta
    m_1 = q_b * cfg.t_hot
    m_3 = q_b * cfg.t_cold
    stretch = (cfg.t_hot / cfg.t_cold) ** (eta / alpha)
    g_3 = cfg.g_high * stretch
    g_4 = cfg.g_low * stretch
    encounters = max(cfg.encounters_per_step, 6 * n_b)

    seeds = np.random.SeedSequence(cfg.seed).generate_state(3 * cfg.cycles)
    q_hots, q_colds, profits = [], [], []
    for cyc in range(cfg.cycles):
        boat = ExchangeEngine(bp, m_1, [cfg.g_low],
                              config=SimConfig(seed=int(seeds[3 * cyc])),
                              init="stationary")
        mains = {}
        for tag, params, t0 in (("hot", cfg.hot_params, cfg.t_hot),
                                ("cold", cfg.cold_params, cfg.t_cold)):
            mains[tag] = ExchangeEngine(
                params, params.n_agents * params.eta * t0, [cfg.mainland_goods],
                config=SimConfig(seed=int(seeds[3 * cyc + (1 if tag == "hot" else 2)])),
                init="stationary")
        trader = 0.0

        def leg(kind: str, tag: str, g_from: float, g_to: float, m_from: float):
            nonlocal trader
            flow = 0.0
            nodes = np.linspace(g_from, g_to, cfg.n_steps + 1)
            if kind == "iso":
                mainland = mains[tag]
                q_m = mainland.params.n_agents * mainland.params.eta
                cs = ContactSystem(boat, mainland, w_money=0.5)
            else:
                m_design = m_from * (g_from / nodes) ** (alpha / eta)
            for k in range(cfg.n_steps):
                if kind == "iso":
                    t_pool = ((boat.state.m.sum() + mainland.state.m.sum())
                              / (q_b + q_m))
                    m_k = q_b * t_pool
                else:
                    m_k = m_design[k]
                mu_post = alpha * m_k / ((alpha + eta) * nodes[k + 1] - alpha * nodes[k])
                d_m, _, _ = boat.trade_at_price(mu_post, encounters=encounters,
                                                mix_sweeps=0.25)
                trader += d_m
                if kind == "iso":
                    d_money_ab, _ = cs.run(cfg.contact_events_per_step)
                    flow -= d_money_ab       # money INTO the boat from mainland
            return flow

        q_hots.append(leg("iso", "hot", cfg.g_low, cfg.g_high, m_1))
        leg("isen", "", cfg.g_high, g_3, m_1)
        q_colds.append(-leg("iso", "cold", g_3, g_4, m_3))
        leg("isen", "", g_4, cfg.g_low, m_3)
        profits.append(trader)

    q_h = float(np.sum(q_hots))
    q_c = float(np.sum(q_colds))
    profit = float(np.sum(profits))
    eff = profit / q_h if q_h > 0 else math.nan
    if cfg.cycles > 1:
        per = np.asarray(profits) / np.asarray(q_hots)
        eff_se = float(np.nanstd(per, ddof=1) / math.sqrt(len(per)))
    else:
        eff_se = 0.0
    ideal = 1.0 - cfg.t_cold / cfg.t_hot
    return CarnotResult(cfg.direction, q_h, q_c, profit, eff, math.nan, ideal,
                        math.nan, math.nan, np.empty((0, 6)), math.nan,
                        cfg.n_steps, efficiency_se=eff_se)


def carnot_cycle(cfg: CarnotConfig) -> CarnotResult:
    if cfg.mode == "analytic":
        return _carnot_analytic(cfg)
    if cfg.mode == "stochastic":
        return _carnot_stochastic(cfg)
    raise ConfigError(f"unknown mode {cfg.mode!r}")


# ---------------------------------------------------------------------------
# Protocol scripts with second-law audit
# ---------------------------------------------------------------------------

_STEP_OPS = {"connect-financial", "disconnect", "trader-post-price",
             "trader-gift", "carnot-leg", "wait-to-equilibrium", "snapshot"}


@dataclass(frozen=True)
class ProtocolStep:
    op: str
    params: dict = field(default_factory=dict)


@dataclass
class ProtocolScript:
    steps: List[ProtocolStep]

    def validate(self, economy_names: Sequence[str]):
        names = set(economy_names)
        open_links = set()
        for k, step in enumerate(self.steps):
            if step.op not in _STEP_OPS:
                raise ConfigError(f"step {k}: unknown op {step.op!r}")
            p = step.params
            if step.op in ("connect-financial", "disconnect"):
                pair = frozenset((p["a"], p["b"]))
                if not pair <= names:
                    raise ConfigError(f"step {k}: unknown economy in {sorted(pair)}")
                if step.op == "connect-financial":
                    open_links.add(pair)
                else:
                    if pair not in open_links:
                        raise ConfigError(f"step {k}: disconnect without a matching connect")
                    open_links.discard(pair)
            elif step.op in ("trader-post-price", "trader-gift"):
                if p["economy"] not in names:
                    raise ConfigError(f"step {k}: unknown economy {p['economy']!r}")
        # links left open simply run to script end (allowed)


@dataclass
class Snapshot:
    index: int
    total_entropy: float
    per_economy: Dict[str, float]
    states: Dict[str, MacroState]
    sigma: float = 0.0


@dataclass
class ScriptResult:
    snapshots: List[Snapshot]
    violations: List[str]
    min_step_change: float

    @property
    def passed(self) -> bool:
        return not self.violations


def _components(names, links):
    comp = {n: n for n in names}

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    for a, b in links:
        comp[find(a)] = find(b)
    out: Dict[str, List[str]] = {}
    for n in names:
        out.setdefault(find(n), []).append(n)
    return [v for v in out.values() if len(v) > 1]


def _post_price_analytic(econ: Economy, good: int, price: float, amount: float):
    """Trade at a posted price toward the no-flow point, capped by `amount`
    goods; the economy's own entropy cannot decrease along this path."""
    mu_c = float(econ.prices()[good])
    if price <= 0:
        raise ConfigError("posted price must be > 0")
    sell = price > mu_c
    direction = -1.0 if sell else +1.0     # change of the economy's goods

    def new_state(y: float) -> MacroState:
        goods = econ.state.goods.copy()
        goods[good] += direction * y
        return MacroState(econ.state.money - direction * y * price, goods)

    y_cap = amount
    if sell:
        y_cap = min(y_cap, econ.state.goods[good] - INTERIOR_MARGIN)
    else:
        y_cap = min(y_cap, (econ.state.money - INTERIOR_MARGIN) / price)
    if y_cap <= 0:
        return 0.0

    def gap(y: float) -> float:
        return float(econ.model.prices(new_state(y))[good]) - price

    g0 = gap(0.0)
    if g0 == 0.0:
        return 0.0
    if gap(y_cap) * g0 > 0:
        y_star = y_cap                      # amount-limited trade
    else:
        y_star = _bracket_and_solve(gap, 0.0, y_cap, "posted-price stall point")
    econ.state = new_state(y_star)
    return direction * y_star


def run_script(economies: Sequence[Economy], script: ProtocolScript,
               mode: str = "analytic", audit_tol: float = 1e-9,
               wait_events: int = 20_000, sigma_samples: int = 16) -> ScriptResult:
    """Execute a protocol script and audit the second law at snapshots.

    Analytic mode flags any total-entropy decrease beyond `audit_tol`;
    stochastic mode allows 3 sigma of the snapshot entropy estimator.
    """
    if mode not in ("analytic", "stochastic"):
        raise ConfigError(f"unknown mode {mode!r}")
    by_name = {e.name: e for e in economies}
    script.validate(list(by_name))
    links: set = set()
    snaps: List[Snapshot] = []
    violations: List[str] = []
    min_change = math.inf
    trade_churn: Dict[str, float] = {}   # economy -> last posted price

    def total_entropy() -> Tuple[float, Dict[str, float], float]:
        if mode == "stochastic":
            # Snapshot entropy = oracle S at the window-MEAN measured totals
            # (evaluating S at fluctuating per-sample totals and averaging
            # would pay Jensen's concavity penalty, ~1/2 per open degree of
            # freedom, and read as a spurious second-law violation).  The
            # estimator sigma is the per-sample spread, which covers every
            # channel that has ever opened: contacts regenerate money-split
            # fluctuations, and economies that have traded keep churning at
            # the price their last trade POSTED, so every snapshot records
            # the ensemble mean of the same channel set and no single draw
            # is ever committed into a comparison (re-posting at the
            # realized state's critical price would re-center on the
            # one-shot draw and bring the Jensen penalty back).
            churn_price = dict(trade_churn)
            s_samples = []
            coord_sums = {e.name: np.zeros(1 + e.state.n_goods) for e in economies}
            for _ in range(sigma_samples):
                for pair in sorted(links, key=sorted):
                    a, b = (by_name[n] for n in sorted(pair))
                    ContactSystem(a.engine, b.engine, w_money=0.4).run(
                        max(300, wait_events // sigma_samples))
                for name, mu_fixed in churn_price.items():
                    eng = by_name[name].engine
                    # spacing ~2x the stall relaxation time (N encounters)
                    eng.trade_at_price(mu_fixed, encounters=2 * eng.n_agents,
                                       mix_sweeps=0.2)
                for e in economies:
                    if e.engine is not None:
                        e.engine.run(0.5)
                        e.sync_from_engine()
                    coord_sums[e.name] += e.state.packed()
                s_samples.append(sum(e.entropy() for e in economies))
            per = {}
            for e in economies:
                mean_state = MacroState.unpack(coord_sums[e.name] / sigma_samples)
                per[e.name] = e.model.entropy(mean_state)
            arr = np.asarray(s_samples)
            return sum(per.values()), per, float(arr.std(ddof=1))
        per = {e.name: e.entropy() for e in economies}
        return sum(per.values()), per, 0.0

    def equilibrate():
        if mode == "analytic":
            for group in _components(list(by_name), links):
                join_to_equilibrium([by_name[n] for n in group], mode="analytic")
        else:
            for pair in sorted(links, key=sorted):
                a, b = (by_name[n] for n in sorted(pair))
                ContactSystem(a.engine, b.engine, w_money=0.4).run(wait_events)
                a.sync_from_engine()
                b.sync_from_engine()

    for idx, step in enumerate(script.steps):
        p = step.params
        if step.op == "connect-financial":
            links.add(frozenset((p["a"], p["b"])))
        elif step.op == "disconnect":
            links.discard(frozenset((p["a"], p["b"])))
        elif step.op == "wait-to-equilibrium":
            equilibrate()
        elif step.op == "trader-post-price":
            econ = by_name[p["economy"]]
            good = int(p.get("good", 0))
            if "price" in p:
                mu_post = float(p["price"])
            else:
                # relative offset resolved against the current critical price
                mu_post = float(econ.model.prices(econ.state)[good]) \
                    * (1.0 + float(p["price_offset"]))
            if mode == "analytic":
                _post_price_analytic(econ, good, mu_post,
                                     float(p.get("amount", math.inf)))
            else:
                econ.engine.trade_at_price(mu_post, good=good,
                                           encounters=int(p.get("encounters", 200)))
                econ.sync_from_engine()
                trade_churn[econ.name] = mu_post
        elif step.op == "trader-gift":
            econ = by_name[p["economy"]]
            if mode == "analytic":
                econ.state = econ.state.replace(money=econ.state.money + float(p["amount"]))
            else:
                econ.engine.trader_gift(float(p["amount"]),
                                        encounters=int(p.get("encounters", 200)))
                econ.sync_from_engine()
        elif step.op == "carnot-leg":
            _run_carnot_leg(by_name, p, mode)
        elif step.op == "snapshot":
            s_tot, per, sigma = total_entropy()
            if snaps:
                prev = snaps[-1]
                change = s_tot - prev.total_entropy
                min_change = min(min_change, change)
                # the audited quantity is a difference of two estimates
                allowance = (audit_tol if mode == "analytic"
                             else max(3.0 * math.hypot(sigma, prev.sigma),
                                      audit_tol))
                if change < -allowance:
                    violations.append(
                        f"step {idx}: total entropy fell by {-change:.3e} "
                        f"(allowance {allowance:.3e})")
            snaps.append(Snapshot(idx, s_tot, per,
                                  {e.name: e.state for e in economies}, sigma))
    return ScriptResult(snaps, violations, min_change if snaps else 0.0)


def _run_carnot_leg(by_name: Dict[str, Economy], p: dict, mode: str):
    """One quasi-static leg on a named boat economy: isothermal against a
    named mainland, or isentropic against the trader only."""
    boat = by_name[p["boat"]]
    g_to = float(p["g_target"])
    n = int(p.get("n_steps", 50))
    kind = p["kind"]
    if mode != "analytic":
        raise ConfigError("carnot-leg script steps run in analytic mode; "
                          "use carnot_cycle() for the stochastic engine")
    g_from = float(boat.state.goods[0])
    if kind == "isentropic":
        s_level = boat.entropy()
        m = boat.state.money
        for g_tgt in np.linspace(g_from, g_to, n + 1)[1:]:
            m = _isentrope_rk4(boat.model, g_from, m, g_tgt, s_level)
            g_from = g_tgt
        boat.state = MacroState(m, [g_to])
    elif kind == "isothermal":
        mainland = by_name[p["mainland"]]
        t_level = boat.temperature()
        m = boat.state.money
        for g_tgt in np.linspace(g_from, g_to, n + 1)[1:]:
            mu_k = float(boat.model.prices(MacroState(m, [g_from]))[0])
            m_trade = m - mu_k * (g_tgt - g_from)
            m = money_at_temperature(boat.model, [g_tgt], t_level,
                                     max(m_trade, INTERIOR_MARGIN))
            mainland.state = mainland.state.replace(
                money=mainland.state.money - (m - m_trade))
            g_from = g_tgt
        boat.state = MacroState(m, [g_to])
    else:
        raise ConfigError(f"unknown carnot leg kind {kind!r}")
