"""Edgeworth/Pareto analysis, trade classification, entropy maximization,
gains of trade, exergy, tariffs and the feasible-direction cone."""

import math

import numpy as np
import pytest

from thermoecon import diff
from thermoecon.errors import DimensionError
from thermoecon.models import CobbDouglasModel, MacroState
from thermoecon.protocols import Economy, arbitrage, reversible_money_transfer
from thermoecon.tradeopt import (Allocation, FeasibleCone, TariffSpec,
                                 TradeClass, classify_trade,
                                 cobb_douglas_gains_closed_form, exergy,
                                 feasible_cone, gains_of_trade, kkt_residual,
                                 max_entropy_allocation, pareto_set,
                                 tariff_equilibrium)

CD = CobbDouglasModel

FIG5_A = CD(10, [1.0], 2.5)
FIG5_B = CD(20, [1.0], 1.5)


class TestAllocation:
    def test_totals_recorded(self):
        alloc = Allocation.of([MacroState(1.0, [3.0]), MacroState(2.0, [4.0])])
        assert alloc.total_money == 3.0
        assert alloc.total_goods[0] == 7.0

    def test_mismatch_rejected(self):
        a = Allocation.of([MacroState(1.0, [3.0]), MacroState(2.0, [4.0])])
        b = Allocation.of([MacroState(1.0, [3.0]), MacroState(2.5, [4.0])])
        with pytest.raises(DimensionError):
            a.check_totals(b)


class TestParetoSet:
    def test_identical_economies_contain_symmetric_split(self):
        model = CD(10, [1.0], 2.0)
        curve = pareto_set(model, model, 2.0, 12.0, n_samples=101)
        mid = curve[np.argmin(np.abs(curve[:, 0] - 6.0))]
        assert mid[1] == pytest.approx(1.0, rel=1e-9)

    def test_fig5_equal_price_condition(self):
        curve = pareto_set(FIG5_A, FIG5_B, 1.0, 30.0, n_samples=41)
        for g1, m1 in curve:
            mu_a = FIG5_A.prices(MacroState(m1, [g1]))[0]
            mu_b = FIG5_B.prices(MacroState(1.0 - m1, [30.0 - g1]))[0]
            assert mu_a == pytest.approx(mu_b, rel=1e-10)
            # closed form: M1 = M a2 e1 G1 / (a1 e2 (G-G1) + a2 e1 G1)
            expect = 1.0 * (1.0 * 2.5 * g1) / (1.0 * 1.5 * (30 - g1) + 1.0 * 2.5 * g1)
            assert m1 == pytest.approx(expect, rel=1e-10)

    def test_gradient_antiparallel_on_manifold(self):
        """At tangency the (nu, beta) gradients of the two economies are
        parallel: nu_A beta_B - nu_B beta_A = 0 (finite-difference check)."""
        curve = pareto_set(FIG5_A, FIG5_B, 1.0, 30.0, n_samples=9)
        for g1, m1 in curve:
            g_a = FIG5_A.grad(MacroState(m1, [g1]))
            g_b = FIG5_B.grad(MacroState(1.0 - m1, [30.0 - g1]))
            cross = g_a[1] * g_b[0] - g_b[1] * g_a[0]
            assert abs(cross) < 1e-9 * abs(g_a[1] * g_b[0])


class TestClassifyTrade:
    def endowment(self):
        return Allocation.of([MacroState(0.9, [3.0]), MacroState(0.1, [27.0])])

    def test_identity_is_mb(self):
        init = self.endowment()
        assert classify_trade([FIG5_A, FIG5_B], init, init) is TradeClass.MB

    def test_trade_at_price_between_is_mb(self):
        init = self.endowment()
        mu_a = FIG5_A.prices(init.states[0])[0]
        mu_b = FIG5_B.prices(init.states[1])[0]
        p = 0.5 * (mu_a + mu_b)
        sgn = 1.0 if mu_a < mu_b else -1.0     # goods flow toward the pricier side
        dg = 0.05
        final = Allocation.of([
            MacroState(0.9 + sgn * p * dg, [3.0 - sgn * dg]),
            MacroState(0.1 - sgn * p * dg, [27.0 + sgn * dg])])
        assert classify_trade([FIG5_A, FIG5_B], init, final) is TradeClass.MB

    def test_max_entropy_point_not_potentially_mb(self):
        """From a money-rich/goods-poor endowment the global maximum cannot
        be reached by compensating reversible trades."""
        init = self.endowment()
        maxent, _ = max_entropy_allocation([FIG5_A, FIG5_B], 1.0, [30.0])
        cls = classify_trade([FIG5_A, FIG5_B], init, maxent)
        assert cls is TradeClass.ENTROPY_INCREASING
        # economy 1 is strictly below its endowment entropy at the optimum
        assert FIG5_A.entropy(maxent.states[0]) < FIG5_A.entropy(init.states[0])

    def test_potentially_mb_case(self):
        """A final state below one economy's starting entropy but on the
        same total isentrope as a point strictly inside the MB region."""
        init = self.endowment()
        mu_a = float(FIG5_A.prices(init.states[0])[0])
        mu_b = float(FIG5_B.prices(init.states[1])[0])
        p = 0.5 * (mu_a + mu_b)
        sgn = 1.0 if mu_a < mu_b else -1.0
        dg = 0.25
        inside_mb = Allocation.of([
            MacroState(0.9 + sgn * p * dg, [3.0 - sgn * dg]),
            MacroState(0.1 - sgn * p * dg, [27.0 + sgn * dg])])
        assert classify_trade([FIG5_A, FIG5_B], init, inside_mb) is TradeClass.MB
        # slide along the total isentrope through inside_mb: transfer money
        # and adjust it to hold total entropy fixed while A drops below start
        from scipy.optimize import brentq
        s_level = float(inside_mb.entropies([FIG5_A, FIG5_B]).sum())
        g1 = float(inside_mb.states[0].goods[0])

        def total_s(m1):
            return (FIG5_A.entropy(MacroState(m1, [g1]))
                    + FIG5_B.entropy(MacroState(1.0 - m1, [27.0 + sgn * dg])))

        m1_mb = inside_mb.states[0].money
        m1_low = brentq(lambda m: total_s(m) - s_level, 1e-6, m1_mb * 0.999,
                        xtol=1e-14)
        final = Allocation.of([MacroState(m1_low, [g1]),
                               MacroState(1.0 - m1_low, [27.0 + sgn * dg])])
        assert FIG5_A.entropy(final.states[0]) < FIG5_A.entropy(init.states[0])
        assert classify_trade([FIG5_A, FIG5_B], init, final) is TradeClass.POTENTIALLY_MB

    def test_forbidden_detected(self):
        # any strict reallocation away from the entropy maximum is forbidden
        maxent, _ = max_entropy_allocation([FIG5_A, FIG5_B], 1.0, [30.0])
        worse = Allocation.of([
            maxent.states[0].replace(money=maxent.states[0].money - 0.05),
            maxent.states[1].replace(money=maxent.states[1].money + 0.05)])
        s_i = maxent.entropies([FIG5_A, FIG5_B]).sum()
        s_f = worse.entropies([FIG5_A, FIG5_B]).sum()
        assert s_f < s_i
        assert classify_trade([FIG5_A, FIG5_B], maxent, worse) is TradeClass.FORBIDDEN

    def test_totals_must_match(self):
        init = self.endowment()
        other = Allocation.of([MacroState(0.9, [3.0]), MacroState(0.3, [27.0])])
        with pytest.raises(DimensionError):
            classify_trade([FIG5_A, FIG5_B], init, other)


class TestMaxEntropy:
    def test_identical_economies_split_equally(self):
        model = CD(12, [1.0], 2.0)
        alloc, diag = max_entropy_allocation([model, model], 4.0, [18.0])
        assert alloc.states[0].money == pytest.approx(2.0, rel=1e-9)
        assert alloc.states[0].goods[0] == pytest.approx(9.0, rel=1e-9)
        assert diag.kkt_residual < 1e-8

    def test_fig3_money_split(self):
        alloc, diag = max_entropy_allocation([FIG5_A, FIG5_B], 1.0, [30.0])
        assert alloc.states[0].money == pytest.approx(5 / 11, abs=1e-8)
        assert alloc.states[0].goods[0] == pytest.approx(10.0, abs=1e-7)
        assert diag.kkt_residual < 1e-8

    def test_random_pairs_match_closed_form(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n1, n2 = rng.integers(4, 30, 2)
            a1, a2 = rng.uniform(0.5, 2.5, 2)
            e1, e2 = rng.uniform(0.7, 3.0, 2)
            m_tot = float(rng.uniform(1.0, 10.0))
            g_tot = float(rng.uniform(5.0, 40.0))
            m1 = CD(int(n1), [a1], e1)
            m2 = CD(int(n2), [a2], e2)
            alloc, diag = max_entropy_allocation([m1, m2], m_tot, [g_tot])
            g1_cf = a1 * n1 / (a1 * n1 + a2 * n2) * g_tot
            m1_cf = e1 * n1 / (e1 * n1 + e2 * n2) * m_tot
            assert alloc.states[0].goods[0] == pytest.approx(g1_cf, rel=1e-8, abs=1e-8)
            assert alloc.states[0].money == pytest.approx(m1_cf, rel=1e-8, abs=1e-8)

    def test_three_economies(self):
        models = [CD(8, [1.0], 1.0), CD(12, [1.5], 2.0), CD(20, [0.8], 1.5)]
        alloc, diag = max_entropy_allocation(models, 6.0, [24.0])
        assert diag.kkt_residual < 1e-8
        assert kkt_residual(models, alloc.states) < 1e-8


class TestGains:
    def test_already_equal_zero_profit(self):
        model = CD(10, [1.0], 1.0)
        init = Allocation.of([MacroState(2.0, [10.0]), MacroState(2.0, [10.0])])
        res = gains_of_trade([model, model], init)
        assert res.trader_profit == pytest.approx(0.0, abs=1e-9)

    def test_desk_case_closed_form(self):
        ma, mb = CD(10, [1.0], 1.0), CD(10, [1.0], 1.0)
        init = Allocation.of([MacroState(1.0, [15.0]), MacroState(4.0, [15.0])])
        res = cobb_douglas_gains_closed_form([ma, mb], init)
        assert res.final_temperature == pytest.approx(0.2, abs=1e-14)
        assert res.final_total_money == pytest.approx(4.0, abs=1e-13)
        assert res.trader_profit == pytest.approx(1.0, abs=1e-13)

    def test_optimizer_matches_closed_form(self):
        ma, mb = CD(9, [1.4], 2.2), CD(17, [0.8], 1.1)
        init = Allocation.of([MacroState(0.8, [12.0]), MacroState(5.0, [7.0])])
        cf = cobb_douglas_gains_closed_form([ma, mb], init)
        opt = gains_of_trade([ma, mb], init)
        assert opt.trader_profit == pytest.approx(cf.trader_profit, abs=1e-9)
        assert opt.final_temperature == pytest.approx(cf.final_temperature, rel=1e-9)
        assert opt.kkt_residual < 1e-8

    def test_order_independence_three_economies(self):
        models = [CD(8, [1.0], 1.0), CD(12, [1.5], 2.0), CD(20, [0.8], 1.5)]
        states = [MacroState(1.0, [10.0]), MacroState(3.0, [8.0]),
                  MacroState(0.7, [20.0])]
        profits = []
        for order in ((0, 1, 2), (2, 0, 1), (1, 2, 0)):
            ms = [models[i] for i in order]
            ss = [states[i] for i in order]
            profits.append(gains_of_trade(ms, Allocation.of(ss)).trader_profit)
        assert max(profits) - min(profits) < 1e-8

    def test_profit_never_negative(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            models = [CD(int(rng.integers(4, 25)), [float(rng.uniform(0.6, 2.0))],
                         float(rng.uniform(0.8, 2.5))) for _ in range(2)]
            init = Allocation.of([
                MacroState(float(rng.uniform(0.5, 6.0)), [float(rng.uniform(4.0, 30.0))])
                for _ in range(2)])
            res = gains_of_trade(models, init)
            assert res.trader_profit >= -1e-9


class TestExergy:
    def test_zero_at_reservoir_conditions(self):
        model = CD(5, [1.0], 2.0)
        t_res, mu_res = 0.3, 0.5
        state = MacroState(5 * 2.0 * t_res, [1.0 * 5 * t_res / mu_res])
        assert exergy(model, state, t_res, [mu_res]) == pytest.approx(0.0, abs=1e-9)

    def test_nonnegative_over_grid(self):
        """Reservoir conditions minimize M - T_A S + mu_A G over B's states
        (grid minimization oracle)."""
        model = CD(5, [1.0], 2.0)
        t_res, mu_res = 0.3, 0.5
        best = math.inf
        sampled = []
        for m in np.linspace(0.5, 8.0, 17):
            for g in np.linspace(0.5, 10.0, 17):
                st = MacroState(float(m), [float(g)])
                val = st.money - t_res * model.entropy(st) + mu_res * st.goods[0]
                best = min(best, val)
                sampled.append((st, val))
        st_e = MacroState(5 * 2.0 * t_res, [1.0 * 5 * t_res / mu_res])
        ref = st_e.money - t_res * model.entropy(st_e) + mu_res * st_e.goods[0]
        assert best >= ref - 1e-9
        for st, val in sampled[:: 7]:
            assert exergy(model, st, t_res, [mu_res]) == pytest.approx(val - ref, rel=1e-9, abs=1e-9)
            assert exergy(model, st, t_res, [mu_res]) >= -1e-12

    def test_matches_gains_in_large_reservoir_limit(self):
        ratio = 1000
        res_model = CD(5 * ratio, [1.0], 2.0)
        small = CD(5, [1.0], 2.0)
        res_state = MacroState(3.0 * ratio, [7.5 * ratio])
        small_state = MacroState(0.6, [14.0])
        t_res = res_model.temperature(res_state)
        mu_res = float(res_model.prices(res_state)[0])
        w = exergy(small, small_state, t_res, [mu_res])
        gains = gains_of_trade([res_model, small],
                               Allocation.of([res_state, small_state]))
        assert gains.trader_profit == pytest.approx(w, rel=0.01)


class TestTariffs:
    def init(self):
        return Allocation.of([MacroState(0.7, [10.0]), MacroState(0.3, [20.0])])

    def test_zero_tariff_reduces_to_max_entropy(self):
        alloc, (ra, rb) = tariff_equilibrium([FIG5_A, FIG5_B], self.init(),
                                             TariffSpec.of([0.0], [0.0]))
        maxent, _ = max_entropy_allocation([FIG5_A, FIG5_B], 1.0, [30.0])
        assert alloc.states[0].money == pytest.approx(maxent.states[0].money, abs=1e-8)
        assert alloc.states[0].goods[0] == pytest.approx(maxent.states[0].goods[0], abs=1e-7)
        assert ra == pytest.approx(0.0, abs=1e-12)

    def test_tariff_inclusive_prices_equal_and_revenues(self):
        tariffs = TariffSpec.of([0.004], [0.002])
        init = self.init()
        alloc, (ra, rb) = tariff_equilibrium([FIG5_A, FIG5_B], init, tariffs)
        st_a, st_b = alloc.states
        lhs = FIG5_A.prices(st_a)[0] + 0.004
        rhs = FIG5_B.prices(st_b)[0] + 0.002
        assert lhs == pytest.approx(rhs, rel=1e-9)
        moved = init.states[0].goods[0] - st_a.goods[0]
        assert ra == pytest.approx(-moved * 0.004, rel=1e-9)
        assert rb == pytest.approx(moved * 0.002, rel=1e-9)

    def test_offsetting_tariff_stalls_trade(self):
        """A tariff差 exactly offsetting the initial price gap keeps the
        equilibrium at the initial allocation: dG ~ 0, revenues ~ 0.
        (An equal tariff on both sides cancels for reversible tariffs.)"""
        init = self.init()
        # first bring money to financial equilibrium at the initial goods
        from thermoecon.protocols import join_to_equilibrium
        a = Economy("a", FIG5_A, init.states[0])
        b = Economy("b", FIG5_B, init.states[1])
        join_to_equilibrium([a, b])
        init_eq = Allocation.of([a.state, b.state])
        gap = float(FIG5_B.prices(b.state)[0] - FIG5_A.prices(a.state)[0])
        tariffs = TariffSpec.of([gap], [0.0])
        alloc, (ra, rb) = tariff_equilibrium([FIG5_A, FIG5_B], init_eq, tariffs)
        moved = init_eq.states[0].goods[0] - alloc.states[0].goods[0]
        assert abs(moved) < 1e-7
        assert abs(ra) < 1e-7 and abs(rb) < 1e-7

    def test_continuity_near_zero(self):
        init = self.init()
        base, _ = tariff_equilibrium([FIG5_A, FIG5_B], init, TariffSpec.of([0.0], [0.0]))
        eps = 1e-5
        bumped, _ = tariff_equilibrium([FIG5_A, FIG5_B], init, TariffSpec.of([eps], [0.0]))
        d_g = abs(bumped.states[0].goods[0] - base.states[0].goods[0])
        assert d_g < 1e3 * eps           # bounded sensitivity


class TestFeasibleCone:
    def states(self):
        return MacroState(0.9, [3.0]), MacroState(0.1, [27.0])

    def test_equilibrium_degenerate(self):
        model = CD(10, [1.0], 2.0)
        st = MacroState(1.0, [5.0])
        cone = feasible_cone(model, st, model, st)
        assert cone.degenerate
        assert cone.generators.size == 0

    def test_isentrope_slope_formula(self):
        st_a, st_b = self.states()
        cone = feasible_cone(FIG5_A, st_a, FIG5_B, st_b)
        g_a = FIG5_A.grad(st_a)
        g_b = FIG5_B.grad(st_b)
        expect = (g_a[1] - g_b[1]) / (g_b[0] - g_a[0])
        assert cone.isentrope_slope == pytest.approx(expect, rel=1e-12)

    def test_quadrant_labels_by_signs(self):
        st_a, st_b = self.states()
        cone = feasible_cone(FIG5_A, st_a, FIG5_B, st_b)
        t1 = FIG5_A.temperature(st_a)
        t2 = FIG5_B.temperature(st_b)
        mu1 = float(FIG5_A.prices(st_a)[0])
        mu2 = float(FIG5_B.prices(st_b)[0])
        expect = f"T2{'>' if t2 > t1 else '<='}T1,mu2{'>' if mu2 > mu1 else '<='}mu1"
        assert cone.quadrant == expect

    def test_generators_do_not_decrease_total_entropy(self):
        """Every direction in the cone keeps dS_total >= 0 (first-order
        oracle evaluation at step 1e-6, 360-direction sweep of the hull)."""
        st_a, st_b = self.states()
        cone = feasible_cone(FIG5_A, st_a, FIG5_B, st_b)
        m_tot = st_a.money + st_b.money
        g_tot = st_a.goods[0] + st_b.goods[0]

        def total_s(dg1, dm1, eps=1e-6):
            a = MacroState(st_a.money + eps * dm1, [st_a.goods[0] + eps * dg1])
            b = MacroState(m_tot - a.money, [g_tot - a.goods[0]])
            return FIG5_A.entropy(a) + FIG5_B.entropy(b)

        s0 = total_s(0.0, 0.0)
        gens = cone.generators
        for w in np.linspace(0, 1, 13):
            for i in range(len(gens)):
                for j in range(len(gens)):
                    d = w * gens[i] + (1 - w) * gens[j]
                    n = np.hypot(*d)
                    if n == 0:
                        continue
                    d = d / n
                    assert total_s(d[0], d[1]) >= s0 - 1e-13

    def test_mb_band_and_investment_signs(self):
        st_a, st_b = self.states()
        cone = feasible_cone(FIG5_A, st_a, FIG5_B, st_b)
        mu1 = float(FIG5_A.prices(st_a)[0])
        mu2 = float(FIG5_B.prices(st_b)[0])
        assert cone.mb_price_band == (min(mu1, mu2), max(mu1, mu2))
        assert cone.mb_goods_sign == math.copysign(1.0, mu1 - mu2)
        t1, t2 = FIG5_A.temperature(st_a), FIG5_B.temperature(st_b)
        assert cone.investment_sign == math.copysign(1.0, t2 - t1)

    def test_multi_good_rejected(self):
        model2 = CD(5, [1.0, 1.0], 1.0)
        with pytest.raises(DimensionError):
            feasible_cone(model2, MacroState(1.0, [1.0, 1.0]),
                          model2, MacroState(1.0, [1.0, 1.0]))
