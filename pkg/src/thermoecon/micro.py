"""Stochastic micro-dynamics: agents, encounter graphs, Gibbs exchange.

The continuous-time pairwise rate density is realized as a random-scan
Gibbs sampler: a pair is chosen with probability proportional to its
encounter rate and the pair's pooled money and goods are re-split from the
conditional (Beta) laws, which leaves the product-Dirichlet density
invariant by detailed balance.  One "sweep" is N pair events.

A joined pair of economies relaxes to the product law over all agents;
the aggregate money split N_A*eta_A : N_B*eta_B (equal temperatures) is an
empirical consequence measured in the tests, not an assumption of the
kernel, whose per-contact split is Beta(eta_A, eta_B).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, InsufficientDataError
from .models import CobbDouglasModel, CobbDouglasParams, MacroState

__all__ = [
    "EncounterGraph",
    "SimConfig",
    "MicroState",
    "StatsAccumulator",
    "summarize",
    "ExchangeEngine",
    "ContactSystem",
]

_EMPTY_I = np.empty(0, dtype=np.int64)
_EMPTY_F = np.empty(0, dtype=np.float64)


class EncounterGraph:
    """Symmetric non-negative encounter rates; the positive-rate graph must
    be connected (required for a unique stationary law)."""

    def __init__(self, n_agents: int, edges: Optional[Sequence] = None):
        self.n_agents = int(n_agents)
        if self.n_agents < 2:
            raise ConfigError("need at least 2 agents")
        if edges is None:
            # complete graph with unit rates, handled implicitly by kernels
            self.edge_i = _EMPTY_I
            self.edge_j = _EMPTY_I
            self.edge_cum = _EMPTY_F
            return
        e_i, e_j, w = [], [], []
        for (i, j, k_ij) in edges:
            if k_ij < 0:
                raise ConfigError("encounter rates must be >= 0")
            if i == j:
                raise ConfigError("self-encounters are not allowed")
            if k_ij > 0:
                e_i.append(int(i))
                e_j.append(int(j))
                w.append(float(k_ij))
        if not e_i:
            raise ConfigError("graph has no positive encounter rates")
        self.edge_i = np.asarray(e_i, dtype=np.int64)
        self.edge_j = np.asarray(e_j, dtype=np.int64)
        self.edge_cum = np.cumsum(np.asarray(w, dtype=np.float64))
        self._check_connected()

    def _check_connected(self):
        adj = [[] for _ in range(self.n_agents)]
        for i, j in zip(self.edge_i, self.edge_j):
            adj[i].append(j)
            adj[j].append(i)
        seen = np.zeros(self.n_agents, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        if not seen.all():
            raise ConfigError("positive-rate encounter graph is not connected")

    @property
    def complete(self) -> bool:
        return self.edge_cum.size == 0


@dataclass
class SimConfig:
    """Reproducible simulation settings: identical (seed, config, backend)
    gives a bit-identical trajectory."""

    seed: int = 0
    sweeps: int = 1000
    thin_sweeps: int = 1
    burn_in: Optional[int] = None      # sweeps; None = adaptive drift test
    burn_in_window: int = 50           # sweeps per drift-test window
    burn_in_max_windows: int = 60
    burn_in_threshold: float = 0.2     # in units of the window std
    renorm_every_events: int = 1_000_000
    scheme: str = "random-scan-gibbs"


@dataclass
class MicroState:
    """Per-agent holdings; all entries strictly positive."""

    m: np.ndarray              # (N,)
    g: np.ndarray              # (N, n_goods)
    step: int = 0

    @staticmethod
    def equal_split(params: CobbDouglasParams, money: float, goods) -> "MicroState":
        goods = np.atleast_1d(np.asarray(goods, dtype=float))
        n = params.n_agents
        m = np.full(n, money / n)
        g = np.tile(goods / n, (n, 1))
        return MicroState(m, g)

    @staticmethod
    def stationary_sample(params: CobbDouglasParams, money: float, goods,
                          rng: np.random.Generator) -> "MicroState":
        """Exact draw from the stationary product-Dirichlet law."""
        goods = np.atleast_1d(np.asarray(goods, dtype=float))
        m = rng.dirichlet(params.agent_eta()) * money
        g = np.empty((params.n_agents, goods.size))
        a = params.agent_alpha()
        for q in range(goods.size):
            g[:, q] = rng.dirichlet(a[:, q]) * goods[q]
        return MicroState(m, g)

    @property
    def n_agents(self) -> int:
        return int(self.m.size)

    def macro(self) -> MacroState:
        return MacroState(float(self.m.sum()), self.g.sum(axis=0))


@dataclass(frozen=True)
class StatsAccumulator:
    """Moments with autocorrelation-aware errors; the standard error uses
    the effective sample size, never the raw count."""

    n: int
    mean: float
    variance: float
    tau_int: float
    ess: float
    se: float

    @staticmethod
    def from_series(x: Sequence[float]) -> "StatsAccumulator":
        return summarize(x)


def _tau_int(x: np.ndarray) -> float:
    """Integrated autocorrelation time, Geyer initial-positive-pairs."""
    n = x.size
    if n < 8:
        return 1.0
    xc = x - x.mean()
    var = float(np.dot(xc, xc)) / n
    if var == 0:
        return 0.5
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    f = np.fft.rfft(xc, nfft)
    acf = np.fft.irfft(f * np.conjugate(f))[: n // 2]
    acf /= acf[0]
    tau = 0.5
    k = 1
    while k + 1 < acf.size:
        pair = acf[k] + acf[k + 1]
        if pair < 0:
            break
        tau += pair
        k += 2
    return float(max(tau, 0.5))


def summarize(x: Sequence[float]) -> StatsAccumulator:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least 2 samples")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    tau = _tau_int(x)
    ess = x.size / (2.0 * tau)
    se = math.sqrt(var * 2.0 * tau / x.size) if var > 0 else 0.0
    if ess < 100:
        warnings.warn(f"effective sample size {ess:.0f} < 100", stacklevel=2)
    return StatsAccumulator(n=int(x.size), mean=mean, variance=var,
                            tau_int=tau, ess=ess, se=se)


class ExchangeEngine:
    """Owns one MicroState exclusively and drives it through the kernels.

    Parallelism happens across engines with distinct seeds, never inside
    one engine.
    """

    def __init__(self, params: CobbDouglasParams, money: float, goods,
                 config: Optional[SimConfig] = None,
                 graph: Optional[EncounterGraph] = None,
                 init: str = "equal"):
        self.params = params
        self.config = config or SimConfig()
        self.graph = graph or EncounterGraph(params.n_agents)
        if self.graph.n_agents != params.n_agents:
            raise ConfigError("graph size does not match agent count")
        self._seed_seq = np.random.SeedSequence(self.config.seed)
        self._seed_rng = np.random.Generator(np.random.PCG64(self._seed_seq))
        if init == "equal":
            self.state = MicroState.equal_split(params, money, goods)
        elif init == "stationary":
            self.state = MicroState.stationary_sample(
                params, money, goods, self._seed_rng)
        else:
            raise ConfigError(f"unknown init {init!r}")
        self._alpha = np.ascontiguousarray(params.agent_alpha())
        self._eta = np.ascontiguousarray(params.agent_eta())
        self._m_total = float(money)
        self._g_total = np.atleast_1d(np.asarray(goods, dtype=float)).copy()
        self._events_since_renorm = 0
        self.rejections = 0
        self.max_rel_drift = 0.0
        self.burn_in_sweeps_used: Optional[int] = None

    # -- plumbing ----------------------------------------------------------
    @property
    def n_agents(self) -> int:
        return self.params.n_agents

    def next_seed(self) -> int:
        return int(self._seed_rng.integers(0, kernels.MAX_SEED))

    def macro(self) -> MacroState:
        return self.state.macro()

    def model(self) -> CobbDouglasModel:
        return self.params.to_model()

    def set_totals(self, money: Optional[float] = None, goods=None):
        """Rescale holdings to new exact totals (used by analytic<->stochastic
        hand-offs); shares are preserved."""
        if money is not None:
            self.state.m *= money / self.state.m.sum()
            self._m_total = float(money)
        if goods is not None:
            goods = np.atleast_1d(np.asarray(goods, dtype=float))
            self.state.g *= goods / self.state.g.sum(axis=0)
            self._g_total = goods.copy()

    def renormalize(self):
        """Pin totals back to their exact conserved values; log the drift."""
        m_sum = self.state.m.sum()
        g_sum = self.state.g.sum(axis=0)
        drift = abs(m_sum - self._m_total) / self._m_total
        for q in range(self._g_total.size):
            drift = max(drift, abs(g_sum[q] - self._g_total[q]) / self._g_total[q])
        self.max_rel_drift = max(self.max_rel_drift, float(drift))
        self.state.m *= self._m_total / m_sum
        self.state.g *= self._g_total / g_sum
        self._events_since_renorm = 0

    def _after(self, n_events: int):
        self.state.step += n_events
        self._events_since_renorm += n_events
        if self._events_since_renorm >= self.config.renorm_every_events:
            self.renormalize()

    # -- dynamics ----------------------------------------------------------
    def run(self, sweeps: float):
        n_events = int(round(sweeps * self.n_agents))
        if n_events <= 0:
            return
        self.rejections += kernels.k_evolve(
            self.state.m, self.state.g, self._alpha, self._eta,
            self.graph.edge_i, self.graph.edge_j, self.graph.edge_cum,
            n_events, self.next_seed())
        self._after(n_events)

    def record(self, snapshots: int, thin_sweeps: Optional[float] = None,
               record_goods: bool = False):
        """Evolve and snapshot holdings; returns (rec_m, rec_g or None)."""
        thin = thin_sweeps if thin_sweeps is not None else self.config.thin_sweeps
        thin_events = max(1, int(round(thin * self.n_agents)))
        rec_m = np.empty((snapshots, self.n_agents))
        rec_g = (np.empty((snapshots, self.n_agents, self._g_total.size))
                 if record_goods else np.empty((0, 0, 0)))
        self.rejections += kernels.k_evolve_record(
            self.state.m, self.state.g, self._alpha, self._eta,
            self.graph.edge_i, self.graph.edge_j, self.graph.edge_cum,
            thin_events, rec_m, rec_g, self.next_seed())
        self._after(snapshots * thin_events)
        return rec_m, (rec_g if record_goods else None)

    def burn_in(self) -> int:
        """Adaptive burn-in: windowed drift test on the oracle entropy of a
        fixed half-population subsystem (the full-economy totals are
        conserved, so only a subsystem's entropy relaxes).  A configured
        integer burn-in overrides the test."""
        cfg = self.config
        if cfg.burn_in is not None:
            self.run(cfg.burn_in)
            self.burn_in_sweeps_used = cfg.burn_in
            return cfg.burn_in
        half = max(2, self.n_agents // 2)
        sub_params = CobbDouglasParams(
            n_agents=half,
            alpha=self._alpha[:half].mean(axis=0),
            eta=float(self._eta[:half].mean()),
        )
        sub_model = sub_params.to_model()

        def s_half() -> float:
            m_sub = float(self.state.m[:half].sum())
            g_sub = self.state.g[:half].sum(axis=0)
            return sub_model.entropy(MacroState(m_sub, g_sub))

        samples_per_window = 20
        thin = max(cfg.burn_in_window / samples_per_window, 1.0 / self.n_agents)
        prev_mean = None
        sweeps_done = 0
        for _ in range(cfg.burn_in_max_windows):
            vals = np.empty(samples_per_window)
            for k in range(samples_per_window):
                self.run(thin)
                vals[k] = s_half()
            sweeps_done += thin * samples_per_window
            mean, sd = float(vals.mean()), float(vals.std(ddof=1))
            if prev_mean is not None and abs(mean - prev_mean) <= cfg.burn_in_threshold * max(sd, 1e-300):
                self.burn_in_sweeps_used = int(round(sweeps_done))
                return self.burn_in_sweeps_used
            prev_mean = mean
        warnings.warn("burn-in drift test did not settle; continuing anyway")
        self.burn_in_sweeps_used = int(round(sweeps_done))
        return self.burn_in_sweeps_used

    # -- trader interactions -------------------------------------------
    def price_drift_samples(self, mu: float, good: int = 0, n_samples: int = 2000,
                            mix_sweeps: float = 0.2) -> np.ndarray:
        """Prospective one-encounter goods drifts at posted price mu, sampled
        from the (mixed) stationary ensemble without moving the state."""
        if mu <= 0:
            raise ConfigError("posted price must be > 0")
        out = np.empty(n_samples)
        n_mix = max(1, int(round(mix_sweeps * self.n_agents)))
        self.rejections += kernels.k_price_drift(
            self.state.m, self.state.g, self._alpha, self._eta,
            good, mu, n_samples, n_mix, self.next_seed(), out)
        self._after(n_samples * n_mix)
        return out

    def trade_at_price(self, mu: float, good: int = 0, encounters: int = 100,
                       mix_sweeps: float = 0.1, interior_eps: float = 1e-9):
        """Applied trader encounters; returns (trader_d_money, trader_d_goods,
        skips).  Conserves money + mu*goods along each budget line exactly."""
        n_mix = max(1, int(round(mix_sweeps * self.n_agents)))
        d_m, d_g, rej, skips = kernels.k_trader_apply(
            self.state.m, self.state.g, self._alpha, self._eta,
            good, mu, encounters, n_mix, interior_eps, self.next_seed())
        self.rejections += rej
        self._m_total = float(self.state.m.sum())
        self._g_total = self.state.g.sum(axis=0).copy()
        self._after(encounters * n_mix)
        return d_m, d_g, skips

    def trader_gift(self, budget: float, encounters: int = 100,
                    mix_sweeps: float = 0.1, cap: Optional[float] = None):
        """Gift channel with total cap M0 + budget (M0 read at call time;
        pass `cap` to pin the ceiling across calls).  Returns money absorbed.
        The stationary total sits at cap*N*eta/(N*eta+1), so a budget below
        the temperature M/(N*eta) drains money to the trader on average."""
        if budget < 0:
            raise ConfigError("gift budget must be >= 0")
        if cap is None:
            cap = self._m_total + budget
        before = float(self.state.m.sum())
        n_mix = max(1, int(round(mix_sweeps * self.n_agents)))
        self.rejections += kernels.k_trader_gift(
            self.state.m, self.state.g, self._alpha, self._eta,
            cap, encounters, n_mix, self.next_seed())
        after = float(self.state.m.sum())
        self._m_total = after
        self._after(encounters * n_mix)
        return after - before


class ContactSystem:
    """Two economies coupled through money/goods/trade contact channels.

    Weights set the event mix; internal-exchange weights default to the
    pair counts so both populations keep mixing during contact.
    """

    def __init__(self, engine_a: ExchangeEngine, engine_b: ExchangeEngine,
                 w_money: float = 0.0, w_goods: float = 0.0,
                 w_trade: float = 0.0, trade_price: float = 1.0,
                 w_internal: Optional[tuple] = None):
        if engine_a.state.g.shape[1] != engine_b.state.g.shape[1]:
            raise ConfigError("economies must share the goods dimension")
        if w_trade > 0:
            exps = [engine_a._alpha.min(), engine_b._alpha.min(),
                    engine_a._eta.min(), engine_b._eta.min()]
            if min(exps) < 1.0:
                raise ConfigError("budget-line trade channel needs exponents >= 1")
        self.a = engine_a
        self.b = engine_b
        if w_internal is None:
            na, nb = engine_a.n_agents, engine_b.n_agents
            tot = na + nb
            w_internal = (na / tot, nb / tot)
        self.w_int_a, self.w_int_b = (float(w) for w in w_internal)
        self.w_money = float(w_money)
        self.w_goods = float(w_goods)
        self.w_trade = float(w_trade)
        self.trade_price = float(trade_price)
        self.money_flux_ab = 0.0
        self.goods_flux_ab = 0.0

    def _call(self, n_events: int, thin: int, rec_ma, rec_ga):
        rej, dm, dg = kernels.k_contact_evolve(
            self.a.state.m, self.a.state.g, self.a._alpha, self.a._eta,
            self.b.state.m, self.b.state.g, self.b._alpha, self.b._eta,
            self.w_int_a, self.w_int_b, self.w_money, self.w_goods,
            self.w_trade, self.trade_price,
            n_events, thin, rec_ma, rec_ga, self.a.next_seed())
        self.a.rejections += rej
        self.money_flux_ab += dm
        self.goods_flux_ab += dg
        for eng in (self.a, self.b):
            eng._m_total = float(eng.state.m.sum())
            eng._g_total = eng.state.g.sum(axis=0).copy()
            eng.state.step += n_events
        return dm, dg

    def run(self, n_events: int):
        """Evolve the joined system; returns (money, goods[0]) flux A->B."""
        return self._call(n_events, n_events + 1, np.empty(0), np.empty((0, 0)))

    def record(self, snapshots: int, thin_events: int):
        """Evolve and record economy-A totals; returns (M_A, G_A) series."""
        rec_ma = np.empty(snapshots)
        rec_ga = np.empty((snapshots, self.a._g_total.size))
        self._call(snapshots * thin_events, thin_events, rec_ma, rec_ga)
        return rec_ma, rec_ga
