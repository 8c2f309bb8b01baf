"""Numerical optimization over entropy functions: Edgeworth/Pareto
analysis, trade classification, maximum-entropy allocation, gains of trade,
exergy, reversible tariffs and the feasible-direction cone.

Optimizers use projected gradient ascent in the allocation simplex (keeps
iterates interior) followed by a Newton polish on the first-order
conditions; every reported optimum carries a KKT residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import root

from .errors import ConfigError, DimensionError, NoRootError, SolverError
from .models import CobbDouglasModel, EntropyModel, MacroState
from .protocols import INTERIOR_MARGIN, money_at_temperature, money_on_entropy

__all__ = [
    "Allocation",
    "TariffSpec",
    "GainsResult",
    "TradeClass",
    "pareto_set",
    "classify_trade",
    "max_entropy_allocation",
    "gains_of_trade",
    "cobb_douglas_gains_closed_form",
    "exergy",
    "tariff_equilibrium",
    "feasible_cone",
    "FeasibleCone",
]


@dataclass(frozen=True)
class Allocation:
    """Per-economy macro states with their conserved totals pinned."""

    states: Tuple[MacroState, ...]
    total_money: float
    total_goods: np.ndarray

    @staticmethod
    def of(states: Sequence[MacroState]) -> "Allocation":
        money = float(sum(s.money for s in states))
        goods = np.sum([s.goods for s in states], axis=0)
        return Allocation(tuple(states), money, goods)

    def check_totals(self, other: "Allocation", tol: float = 1e-12):
        scale_m = max(1.0, abs(self.total_money))
        if abs(self.total_money - other.total_money) > tol * scale_m:
            raise DimensionError("allocations do not share total money")
        if self.total_goods.size != other.total_goods.size:
            raise DimensionError("allocations do not share the goods dimension")
        scale_g = np.maximum(1.0, np.abs(self.total_goods))
        if np.any(np.abs(self.total_goods - other.total_goods) > tol * scale_g):
            raise DimensionError("allocations do not share total goods")

    def entropies(self, models: Sequence[EntropyModel]) -> np.ndarray:
        return np.array([m.entropy(s) for m, s in zip(models, self.states)])


@dataclass(frozen=True)
class TariffSpec:
    """Reversible per-good tariffs: charged on arrival, rebated on exit, so
    revenue depends only on the nett goods moved."""

    tau_a: np.ndarray
    tau_b: np.ndarray

    @staticmethod
    def of(tau_a, tau_b) -> "TariffSpec":
        return TariffSpec(np.atleast_1d(np.asarray(tau_a, dtype=float)),
                          np.atleast_1d(np.asarray(tau_b, dtype=float)))


class TradeClass(Enum):
    MB = "mutually-beneficial"
    POTENTIALLY_MB = "potentially-mb"
    ENTROPY_INCREASING = "entropy-increasing"
    FORBIDDEN = "forbidden"


# ---------------------------------------------------------------------------
# Pareto set
# ---------------------------------------------------------------------------


def pareto_set(model_a: EntropyModel, model_b: EntropyModel,
               total_money: float, total_goods, n_samples: int = 101,
               margin: float = 1e-3):
    """Sampled curve of equal-price allocations for a single shared good.

    Returns an array with columns (G1, M1); isentrope tangency (antiparallel
    gradients on the conservation manifold) holds at every sample.
    """
    g_tot = float(np.atleast_1d(total_goods)[0])
    if model_a.n_goods != 1 or model_b.n_goods != 1:
        raise DimensionError("pareto_set is implemented for one shared good")
    out = np.empty((n_samples, 2))
    grid = np.linspace(margin * g_tot, (1 - margin) * g_tot, n_samples)
    for k, g1 in enumerate(grid):
        out[k, 0] = g1
        out[k, 1] = _equal_price_money_split(model_a, model_b, g1, g_tot - g1,
                                             total_money)
    return out


def _equal_price_money_split(model_a, model_b, g_a: float, g_b: float,
                             m_tot: float) -> float:
    """M_A making mu_A = mu_B at the given goods split (prices are monotone
    in own money, opposite directions, so the root is bracketed)."""

    def gap(m_a: float) -> float:
        mu_a = model_a.prices(MacroState(m_a, [g_a]))[0]
        mu_b = model_b.prices(MacroState(m_tot - m_a, [g_b]))[0]
        return float(mu_a - mu_b)

    lo = INTERIOR_MARGIN * m_tot
    hi = (1 - INTERIOR_MARGIN) * m_tot
    f_lo, f_hi = gap(lo), gap(hi)
    if f_lo > 0 or f_hi < 0:
        raise SolverError(f"no equal-price split at goods split ({g_a}, {g_b})")
    from scipy.optimize import brentq
    return float(brentq(gap, lo, hi, xtol=1e-14, rtol=8.9e-16))


# ---------------------------------------------------------------------------
# Maximum-entropy allocation
# ---------------------------------------------------------------------------


@dataclass
class OptimumDiagnostics:
    kkt_residual: float
    iterations: int
    polished: bool
    converged: bool


def _grad_matrix(models, states) -> np.ndarray:
    """Rows: economies; columns: (beta, nu_1..nu_k)."""
    return np.vstack([m.grad(s) for m, s in zip(models, states)])


def kkt_residual(models, states) -> float:
    """Max spread of marginal values across economies (equal beta and nu at
    an interior optimum of total entropy under conservation)."""
    g = _grad_matrix(models, states)
    return float(np.max(g.max(axis=0) - g.min(axis=0)))


def max_entropy_allocation(models: Sequence[EntropyModel], total_money: float,
                           total_goods, max_iter: int = 4000,
                           tol: float = 1e-10) -> Tuple[Allocation, OptimumDiagnostics]:
    """Maximize total entropy subject to total goods and money.

    Projected gradient ascent in log coordinates, then a Newton polish on
    the equal-marginals first-order conditions.  Boundary-pinned optima are
    flagged through the diagnostics (converged=False).
    """
    total_goods = np.atleast_1d(np.asarray(total_goods, dtype=float))
    n_e = len(models)
    n_r = 1 + total_goods.size
    totals = np.concatenate(([total_money], total_goods))
    # allocation fractions, economies x resources
    frac = np.full((n_e, n_r), 1.0 / n_e)

    def states_of(fr):
        return [MacroState(fr[e, 0] * totals[0], fr[e, 1:] * totals[1:])
                for e in range(n_e)]

    def total_s(fr) -> float:
        return sum(m.entropy(s) for m, s in zip(models, states_of(fr)))

    s_cur = total_s(frac)
    step = 0.1
    it = 0
    for it in range(max_iter):
        grad = _grad_matrix(models, states_of(frac)) * totals  # dS/dfrac
        grad -= grad.mean(axis=0, keepdims=True)               # project onto simplex
        norm = np.max(np.abs(grad))
        if norm < tol:
            break
        # log-coordinate ascent keeps fractions positive
        cand = frac * np.exp(step * grad / max(norm, 1e-300))
        cand /= cand.sum(axis=0, keepdims=True)
        s_new = total_s(cand)
        if s_new > s_cur:
            frac, s_cur = cand, s_new
            step = min(step * 1.3, 2.0)
        else:
            step *= 0.5
            if step < 1e-14:
                break

    states = states_of(frac)
    polished = False
    if n_e >= 2:
        # Newton polish: unknowns are economies 1..n-1 allocations (log)
        x0 = np.log(frac[1:, :].ravel())

        def residuals(x):
            fr = np.empty_like(frac)
            fr[1:, :] = np.exp(x).reshape(n_e - 1, n_r)
            fr[0, :] = 1.0 - fr[1:, :].sum(axis=0)
            if np.any(fr[0, :] <= 0):
                return np.full_like(x, 1e6)
            g = _grad_matrix(models, states_of(fr))
            return (g[1:, :] - g[0, :]).ravel()

        sol = root(residuals, x0, method="hybr", tol=1e-13)
        if np.max(np.abs(residuals(sol.x))) < 1e-9:
            fr = np.empty_like(frac)
            fr[1:, :] = np.exp(sol.x).reshape(n_e - 1, n_r)
            fr[0, :] = 1.0 - fr[1:, :].sum(axis=0)
            if np.all(fr > 0) and total_s(fr) >= s_cur - 1e-9:
                frac = fr
                states = states_of(frac)
                polished = True

    res = kkt_residual(models, states)
    boundary = bool(np.any(frac * totals < 10 * INTERIOR_MARGIN))
    diag = OptimumDiagnostics(kkt_residual=res, iterations=it, polished=polished,
                              converged=res < 1e-8 and not boundary)
    return Allocation.of(states), diag


# ---------------------------------------------------------------------------
# Gains of trade
# ---------------------------------------------------------------------------


@dataclass
class GainsResult:
    """Reversible-extraction endpoint: equal temperatures and prices, total
    entropy conserved, trader profit = initial minus final total money."""

    final_temperature: float
    final_total_money: float
    trader_profit: float
    final_states: Tuple[MacroState, ...]
    kkt_residual: float
    method: str


def cobb_douglas_gains_closed_form(models: Sequence[CobbDouglasModel],
                                   initial: Allocation) -> GainsResult:
    """Closed-form endpoint for Cobb-Douglas economies.

    Goods pool in proportion p_e,i = alpha_e,i N_e / sum_f alpha_f,i N_f;
    money sits at M_e = q_e T with q_e = eta_e N_e and the common T fixed by
    total-entropy conservation."""
    alphas = np.vstack([m.alpha * m.n_agents for m in models])   # (E, n_goods)
    q = np.array([m.eta * m.n_agents for m in models])
    p = alphas / alphas.sum(axis=0, keepdims=True)
    g_tot = initial.total_goods
    log_t = 0.0
    for e, (m, st) in enumerate(zip(models, initial.states)):
        log_t += float(np.dot(alphas[e], np.log(st.goods / (p[e] * g_tot))))
        log_t += q[e] * math.log(st.money / q[e])
    log_t /= q.sum()
    t_star = math.exp(log_t)
    states = tuple(MacroState(q[e] * t_star, p[e] * g_tot) for e in range(len(models)))
    m_f = float(q.sum() * t_star)
    return GainsResult(t_star, m_f, initial.total_money - m_f, states,
                       kkt_residual(models, states), "closed-form")


def gains_of_trade(models: Sequence[EntropyModel], initial: Allocation,
                   method: str = "optimizer") -> GainsResult:
    """Minimize total money over the surface of conserved total entropy and
    goods; first-order conditions (equal T, equal prices) are verified and
    reported as the KKT residual."""
    if method == "closed-form":
        return cobb_douglas_gains_closed_form(models, initial)
    s0 = float(sum(initial.entropies(models)))
    g_tot = initial.total_goods
    n_e = len(models)
    if n_e != 2:
        # order-independent pairwise merging for n > 2
        return _gains_pairwise(models, initial)
    a, b = models
    if g_tot.size == 1:
        t_star, st_a, st_b = _gains_two_nested(a, b, initial, s0)
    else:
        t_star, st_a, st_b = _gains_two_hybr(a, b, initial, s0)
    m_f = st_a.money + st_b.money
    profit = initial.total_money - m_f
    if profit < -1e-9:
        raise SolverError("negative trader profit: endpoint is not the minimum")
    return GainsResult(t_star, float(m_f), float(profit), (st_a, st_b),
                       kkt_residual(models, (st_a, st_b)), "optimizer")


def _gains_two_nested(a, b, initial: Allocation, s0: float):
    """Single-good pair: nested bracketed roots.

    Inner: at given common T the equal-price goods split is unique (price
    falls along an economy's own isotherm as its goods grow).  Outer: total
    entropy on the equal-(T, mu) manifold increases with T (dS = sum C/T dT
    with goods terms cancelling), so S = S0 brackets in T.
    """
    from scipy.optimize import brentq
    g_tot = float(initial.total_goods[0])

    def split_at(t: float):
        def gap(g_a: float) -> float:
            m_a = money_at_temperature(a, [g_a], t, initial.states[0].money)
            m_b = money_at_temperature(b, [g_tot - g_a], t, initial.states[1].money)
            return (float(a.prices(MacroState(m_a, [g_a]))[0])
                    - float(b.prices(MacroState(m_b, [g_tot - g_a]))[0]))

        lo = INTERIOR_MARGIN * g_tot
        hi = (1 - INTERIOR_MARGIN) * g_tot
        g_a = brentq(gap, lo, hi, xtol=1e-14, rtol=8.9e-16)
        m_a = money_at_temperature(a, [g_a], t, initial.states[0].money)
        m_b = money_at_temperature(b, [g_tot - g_a], t, initial.states[1].money)
        return MacroState(m_a, [g_a]), MacroState(m_b, [g_tot - g_a])

    def s_gap(t: float) -> float:
        st_a, st_b = split_at(t)
        return a.entropy(st_a) + b.entropy(st_b) - s0

    t_lo = t_hi = 0.5 * (a.temperature(initial.states[0])
                         + b.temperature(initial.states[1]))
    for _ in range(200):
        if s_gap(t_lo) <= 0:
            break
        t_lo *= 0.5
    else:
        raise SolverError("gains endpoint not bracketed from below")
    for _ in range(200):
        if s_gap(t_hi) >= 0:
            break
        t_hi *= 2.0
    else:
        raise SolverError("gains endpoint not bracketed from above")
    t_star = float(brentq(s_gap, t_lo, t_hi, xtol=1e-15, rtol=8.9e-16))
    st_a, st_b = split_at(t_star)
    return t_star, st_a, st_b


def _gains_two_hybr(a, b, initial: Allocation, s0: float):
    g_tot = initial.total_goods
    guess_t = 0.5 * (a.temperature(initial.states[0])
                     + b.temperature(initial.states[1]))
    x0 = np.concatenate(([math.log(guess_t)],
                         np.log(initial.states[0].goods / g_tot)))

    def unpack(x):
        t = math.exp(x[0])
        fr = np.clip(np.exp(x[1:]), 1e-12, 1 - 1e-12)
        goods_a = fr * g_tot
        goods_b = g_tot - goods_a
        m_a = money_at_temperature(a, goods_a, t, initial.states[0].money)
        m_b = money_at_temperature(b, goods_b, t, initial.states[1].money)
        return t, MacroState(m_a, goods_a), MacroState(m_b, goods_b)

    def residuals(x):
        try:
            t, st_a, st_b = unpack(x)
            mu_gap = a.prices(st_a) - b.prices(st_b)
            s_gap = a.entropy(st_a) + b.entropy(st_b) - s0
            return np.concatenate((mu_gap, [s_gap / max(1.0, abs(s0))]))
        except Exception:
            return np.full(x.size, 1e6)

    sol = root(residuals, x0, method="hybr", tol=1e-13)
    if np.max(np.abs(residuals(sol.x))) > 1e-9:
        raise SolverError(f"gains-of-trade solver did not converge: {sol.message}")
    return unpack(sol.x)


def _gains_pairwise(models, initial: Allocation) -> GainsResult:
    econs = list(zip(models, initial.states))
    profit = 0.0
    while len(econs) > 1:
        (m_a, s_a), (m_b, s_b) = econs[0], econs[1]
        sub = gains_of_trade([m_a, m_b], Allocation.of([s_a, s_b]))
        profit += sub.trader_profit
        merged_model, merged_state = _merge_pair(m_a, m_b, sub.final_states)
        econs = [(merged_model, merged_state)] + econs[2:]
    final = econs[0][1]
    t = econs[0][0].temperature(final)
    return GainsResult(t, final.money, profit, (final,), 0.0, "pairwise")


def _merge_pair(model_a, model_b, states):
    if not (isinstance(model_a, CobbDouglasModel) and isinstance(model_b, CobbDouglasModel)):
        raise SolverError("pairwise merging needs Cobb-Douglas economies")
    n = model_a.n_agents + model_b.n_agents
    alpha = (model_a.alpha * model_a.n_agents + model_b.alpha * model_b.n_agents) / n
    eta = (model_a.eta * model_a.n_agents + model_b.eta * model_b.n_agents) / n
    merged = CobbDouglasModel(n, alpha, eta)
    state = MacroState(states[0].money + states[1].money,
                       states[0].goods + states[1].goods)
    return merged, state


# ---------------------------------------------------------------------------
# Trade classification
# ---------------------------------------------------------------------------


def classify_trade(models: Sequence[EntropyModel], initial: Allocation,
                   final: Allocation, tol: float = 1e-10,
                   search_points: int = 801) -> TradeClass:
    """MB / potentially-MB / entropy-increasing / forbidden classification.

    Potentially-MB search walks the total isentrope through the final state
    looking for a point where no economy is below its initial entropy; for
    more than two economies or goods it falls back to random sampling and
    reports entropy-increasing when nothing is found.
    """
    initial.check_totals(final)
    s_i = initial.entropies(models)
    s_f = final.entropies(models)
    d_total = float(s_f.sum() - s_i.sum())
    if d_total < -tol:
        return TradeClass.FORBIDDEN
    if np.all(s_f - s_i >= -tol):
        return TradeClass.MB
    if _isentrope_meets_mb(models, initial, float(s_f.sum()), s_i, tol, search_points):
        return TradeClass.POTENTIALLY_MB
    return TradeClass.ENTROPY_INCREASING


def _isentrope_meets_mb(models, initial, s_level, s_i, tol, n_points) -> bool:
    if len(models) == 2 and initial.total_goods.size == 1:
        return _isentrope_meets_mb_2x1(models, initial, s_level, s_i, tol, n_points)
    rng = np.random.default_rng(20240901)
    m_tot, g_tot = initial.total_money, initial.total_goods
    for _ in range(n_points):
        fr_g = rng.dirichlet(np.ones(len(models)), size=g_tot.size).T
        try:
            split = _entropy_level_money_split(models, fr_g * g_tot, m_tot, s_level)
        except (NoRootError, SolverError):
            continue
        if split is None:
            continue
        for states in split:
            s = np.array([m.entropy(st) for m, st in zip(models, states)])
            if np.all(s - s_i >= -tol):
                return True
    return False


def _entropy_level_money_split(models, goods_alloc, m_tot, s_level):
    """Both money splits (if any) putting total entropy at s_level for a
    fixed two-economy goods allocation."""
    if len(models) != 2:
        return None
    a, b = models
    g_a, g_b = goods_alloc[0], goods_alloc[1]

    def s_tot(m_a: float) -> float:
        return (a.entropy(MacroState(m_a, g_a))
                + b.entropy(MacroState(m_tot - m_a, g_b)))

    def beta_gap(m_a: float) -> float:
        return (float(a.grad(MacroState(m_a, g_a))[0])
                - float(b.grad(MacroState(m_tot - m_a, g_b))[0]))

    lo = INTERIOR_MARGIN * m_tot
    hi = (1 - INTERIOR_MARGIN) * m_tot
    from scipy.optimize import brentq
    if beta_gap(lo) < 0 or beta_gap(hi) > 0:
        return None
    m_peak = brentq(beta_gap, lo, hi, xtol=1e-14)
    if s_tot(m_peak) < s_level:
        return None
    out = []
    for a_br, b_br in ((lo, m_peak), (m_peak, hi)):
        f_a, f_b = s_tot(a_br) - s_level, s_tot(b_br) - s_level
        if f_a == 0.0:
            m_a = a_br
        elif f_b == 0.0:
            m_a = b_br
        elif f_a * f_b < 0:
            m_a = brentq(lambda m: s_tot(m) - s_level, a_br, b_br, xtol=1e-14)
        else:
            continue
        out.append((MacroState(m_a, g_a), MacroState(m_tot - m_a, g_b)))
    return out or None


def _isentrope_meets_mb_2x1(models, initial, s_level, s_i, tol, n_points) -> bool:
    m_tot = initial.total_money
    g_tot = float(initial.total_goods[0])
    best = -math.inf
    for g1 in np.linspace(1e-4 * g_tot, (1 - 1e-4) * g_tot, n_points):
        split = _entropy_level_money_split(
            models, np.array([[g1], [g_tot - g1]]), m_tot, s_level)
        if not split:
            continue
        for states in split:
            s = np.array([m.entropy(st) for m, st in zip(models, states)])
            best = max(best, float(np.min(s - s_i)))
            if np.all(s - s_i >= -tol):
                return True
    return False


# ---------------------------------------------------------------------------
# Exergy
# ---------------------------------------------------------------------------


def exergy(model_b: EntropyModel, state_b: MacroState, t_reservoir: float,
           mu_reservoir) -> float:
    """Money extractable from economy B against a large reservoir pinned at
    (T_A, mu_A): W = (M - M^e) - T_A (S - S^e) + mu_A . (G - G^e), with ^e
    the state of B at the reservoir's temperature and prices."""
    mu_reservoir = np.atleast_1d(np.asarray(mu_reservoir, dtype=float))
    if mu_reservoir.size != model_b.n_goods:
        raise DimensionError("reservoir prices must cover every good")
    st_e = _state_at_conditions(model_b, state_b, t_reservoir, mu_reservoir)
    s_b = model_b.entropy(state_b)
    s_e = model_b.entropy(st_e)
    w = (state_b.money - st_e.money) - t_reservoir * (s_b - s_e)
    w += float(np.dot(mu_reservoir, state_b.goods - st_e.goods))
    return float(w)


def _state_at_conditions(model: EntropyModel, guess: MacroState,
                         t_target: float, mu_target: np.ndarray) -> MacroState:
    """The state with temperature t_target and prices mu_target.

    Single-good models use nested bracketed roots: money from the isotherm
    (T increasing in M) and goods from the price along the isotherm
    (decreasing, by the fixed-T response inequality).  Multi-good models
    fall back to a damped Newton solve.
    """
    if model.n_goods == 1:
        from scipy.optimize import brentq

        def mu_at(g: float) -> float:
            m = money_at_temperature(model, [g], t_target, guess.money)
            return float(model.prices(MacroState(m, [g]))[0]) - float(mu_target[0])

        lo = hi = max(float(guess.goods[0]), INTERIOR_MARGIN)
        for _ in range(300):
            if mu_at(lo) >= 0:
                break
            lo *= 0.5
        else:
            raise NoRootError("economy B cannot attain the reservoir's (T, mu)")
        for _ in range(300):
            if mu_at(hi) <= 0:
                break
            hi *= 2.0
        else:
            raise NoRootError("economy B cannot attain the reservoir's (T, mu)")
        g_star = brentq(mu_at, lo, hi, xtol=1e-14, rtol=8.9e-16)
        m_star = money_at_temperature(model, [g_star], t_target, guess.money)
        return MacroState(m_star, [g_star])

    x0 = np.log(guess.packed())

    def residuals(x):
        st = MacroState.unpack(np.exp(x))
        try:
            g = model.grad(st)
        except Exception:
            return np.full(x.size, 1e6)
        if g[0] <= 0:
            return np.full(x.size, 1e6)
        return np.concatenate(([1.0 / g[0] - t_target], g[1:] / g[0] - mu_target))

    sol = root(residuals, x0, method="hybr", tol=1e-13)
    if np.max(np.abs(residuals(sol.x))) > 1e-8:
        raise NoRootError("economy B cannot attain the reservoir's (T, mu)")
    return MacroState.unpack(np.exp(sol.x))


# ---------------------------------------------------------------------------
# Reversible tariffs
# ---------------------------------------------------------------------------


def tariff_equilibrium(models: Sequence[EntropyModel], initial: Allocation,
                       tariffs: TariffSpec):
    """Equilibrium with tariff-inclusive price equality:
    mu_A,i + tau_A,i = mu_B,i + tau_B,i and equal temperatures, with money
    and goods conserved.  Returns (Allocation, (R_A, R_B))."""
    if len(models) != 2:
        raise ConfigError("tariff equilibrium is defined for two economies")
    a, b = models
    g_tot = initial.total_goods
    m_tot = initial.total_money
    t0 = 0.5 * (a.temperature(initial.states[0]) + b.temperature(initial.states[1]))
    x0 = np.concatenate(([math.log(t0)], np.log(initial.states[0].goods / g_tot)))

    def unpack(x):
        t = math.exp(x[0])
        fr = np.clip(np.exp(x[1:]), 1e-12, 1 - 1e-12)
        goods_a = fr * g_tot
        goods_b = g_tot - goods_a
        m_a = money_at_temperature(a, goods_a, t, initial.states[0].money)
        m_b = money_at_temperature(b, goods_b, t, initial.states[1].money)
        return t, MacroState(m_a, goods_a), MacroState(m_b, goods_b)

    def residuals(x):
        try:
            t, st_a, st_b = unpack(x)
        except Exception:
            return np.full(x.size, 1e6)
        mu_gap = (a.prices(st_a) + tariffs.tau_a) - (b.prices(st_b) + tariffs.tau_b)
        m_gap = (st_a.money + st_b.money - m_tot) / max(1.0, m_tot)
        return np.concatenate(([m_gap], mu_gap))

    sol = root(residuals, x0, method="hybr", tol=1e-13)
    if not sol.success and np.max(np.abs(residuals(sol.x))) > 1e-9:
        raise SolverError(f"tariff equilibrium did not converge: {sol.message}")
    _, st_a, st_b = unpack(sol.x)
    moved_ab = initial.states[0].goods - st_a.goods     # goods moved A -> B
    r_a = -float(np.dot(moved_ab, tariffs.tau_a))
    r_b = +float(np.dot(moved_ab, tariffs.tau_b))
    return Allocation.of([st_a, st_b]), (r_a, r_b)


# ---------------------------------------------------------------------------
# Feasible-direction cone
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeasibleCone:
    """First-order trade directions (dG1, dM1) for a single-good pair."""

    isentrope_slope: float
    mb_price_band: Tuple[float, float]
    mb_goods_sign: float           # sign of dG1 for MB trades
    investment_sign: float         # sign of dM1 for pure money flow
    quadrant: str
    generators: np.ndarray         # rows: boundary directions of the cone
    degenerate: bool


def feasible_cone(model_a: EntropyModel, state_a: MacroState,
                  model_b: EntropyModel, state_b: MacroState) -> FeasibleCone:
    if model_a.n_goods != 1 or model_b.n_goods != 1:
        raise DimensionError("feasible cone is defined for one shared good")
    g_a = model_a.grad(state_a)
    g_b = model_b.grad(state_b)
    beta_1, nu_1 = float(g_a[0]), float(g_a[1])
    beta_2, nu_2 = float(g_b[0]), float(g_b[1])
    mu_1, mu_2 = nu_1 / beta_1, nu_2 / beta_2
    t_1, t_2 = 1.0 / beta_1, 1.0 / beta_2
    degenerate = math.isclose(beta_1, beta_2, rel_tol=1e-12) and \
        math.isclose(nu_1, nu_2, rel_tol=1e-12)
    slope = math.nan if degenerate else (nu_1 - nu_2) / (beta_2 - beta_1) \
        if beta_2 != beta_1 else math.inf
    quadrant = f"T2{'>' if t_2 > t_1 else '<='}T1,mu2{'>' if mu_2 > mu_1 else '<='}mu1"
    gens = []
    if not degenerate:
        d_g = math.copysign(1.0, mu_1 - mu_2) if mu_1 != mu_2 else 0.0
        if d_g != 0.0:
            for p in (mu_1, mu_2):
                gens.append((d_g, -p * d_g))   # dM1 = -p dG1 along the trade
        d_m = math.copysign(1.0, t_2 - t_1) if t_2 != t_1 else 0.0
        if d_m != 0.0:
            gens.append((0.0, d_m))
    generators = np.asarray(gens) if gens else np.empty((0, 2))
    return FeasibleCone(slope, (min(mu_1, mu_2), max(mu_1, mu_2)),
                        math.copysign(1.0, mu_1 - mu_2) if mu_1 != mu_2 else 0.0,
                        math.copysign(1.0, t_2 - t_1) if t_2 != t_1 else 0.0,
                        quadrant, generators, degenerate)
