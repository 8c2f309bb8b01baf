"""Entropy models, derived quantities and the finite-difference toolkit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermoecon import diff
from thermoecon.errors import ConfigError, DimensionError, DomainError, InsufficientDataError
from thermoecon.models import (AffineModel, CobbDouglasModel, CobbDouglasParams,
                               CoupledTestModel, MacroState,
                               PerfectSubstitutesModel, PureMoneyModel,
                               TabulatedModel, TwoCurrencyModel, hessian,
                               inflation_rate, log_volume_stirling_constant,
                               model_from_config, partition_log_volume,
                               thermo_quantities)

CD = CobbDouglasModel


class TestMacroState:
    def test_negative_money_rejected(self):
        with pytest.raises(DomainError):
            MacroState(-1.0, [2.0])

    def test_negative_goods_rejected(self):
        with pytest.raises(DomainError):
            MacroState(1.0, [-2.0])

    def test_boundary_storable_but_not_evaluable(self):
        st_b = MacroState(0.0, [2.0])    # endowments may sit on the boundary
        assert not st_b.interior
        with pytest.raises(DomainError):
            CD(5, [1.0], 1.0).entropy(st_b)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            CD(5, [1.0], 1.0).entropy(MacroState(1.0, [1.0, 2.0]))


class TestCobbDouglasEntropy:
    def test_log_one_is_zero(self):
        assert CD(10, [1.0], 1.0).entropy(MacroState(10.0, [10.0])) == 0.0

    def test_derived_value(self):
        s = CD(10, [1.0], 2.5).entropy(MacroState(5.0, [20.0]))
        assert s == pytest.approx(10 * (math.log(2) + 2.5 * math.log(0.5)), abs=1e-12)

    def test_extensivity_exact(self):
        model = CD(10, [1.3], 2.1)
        state = MacroState(3.0, [7.0])
        for lam in (2.0, 0.5, 3.0):
            assert model.scaled(lam).entropy(state.scaled(lam)) == lam * model.entropy(state)

    def test_per_good_alpha_additive(self):
        model = CD(4, [1.0, 2.0], 1.5)
        state = MacroState(2.0, [3.0, 5.0])
        expect = 4 * (math.log(3 / 4) + 2 * math.log(5 / 4) + 1.5 * math.log(0.5))
        assert model.entropy(state) == pytest.approx(expect, rel=1e-14)

    def test_heterogeneous_agents_use_means(self):
        params = CobbDouglasParams(4, [1.0], 2.0,
                                   alpha_i=[[0.5], [1.5], [1.0], [1.0]],
                                   eta_i=[1.0, 3.0, 2.0, 2.0])
        model = params.to_model()
        assert model.alpha[0] == pytest.approx(1.0)
        assert model.eta == pytest.approx(2.0)
        assert not params.homogeneous
        assert CobbDouglasParams(4, [1.0], 2.0).homogeneous

    def test_invalid_params(self):
        with pytest.raises(ConfigError):
            CobbDouglasParams(3, [0.0], 1.0)
        with pytest.raises(ConfigError):
            CobbDouglasParams(3, [1.0], -1.0)


class TestThermoQuantities:
    def test_fig3_temperatures_equal(self):
        t1 = CD(10, [1.0], 2.5).temperature(MacroState(5 / 11, [10.0]))
        t2 = CD(20, [1.0], 1.5).temperature(MacroState(6 / 11, [20.0]))
        assert t1 == pytest.approx(1 / 55, abs=1e-16)
        assert t2 == pytest.approx(1 / 55, abs=1e-16)

    def test_symmetric_unit_price(self):
        tq = thermo_quantities(CD(7, [1.0], 1.0), MacroState(3.0, [3.0]))
        assert tq.prices[0] == pytest.approx(1.0, abs=1e-15)

    def test_price_and_capacity(self):
        tq = thermo_quantities(CD(10, [1.0], 2.5), MacroState(1.0, [30.0]))
        assert tq.prices[0] == pytest.approx(1 / 75, abs=1e-16)
        assert tq.money_capacity == pytest.approx(25.0, rel=1e-12)

    def test_identities(self):
        tq = thermo_quantities(CD(9, [1.4], 2.2), MacroState(2.0, [11.0]))
        assert tq.coolness * tq.temperature == pytest.approx(1.0, abs=1e-16)
        assert tq.prices[0] * tq.coolness == pytest.approx(tq.values[0], rel=1e-14)

    def test_free_energy(self):
        model = CD(9, [1.4], 2.2)
        state = MacroState(2.0, [11.0])
        tq = thermo_quantities(model, state)
        assert tq.free_energy == pytest.approx(state.money - tq.temperature * tq.entropy)
        tq_bath = thermo_quantities(model, state, t_bath=0.5)
        assert tq_bath.free_energy == pytest.approx(state.money - 0.5 * tq.entropy)

    def test_general_model_fd_fallback(self):
        class Opaque(CoupledTestModel):
            def grad_packed(self, x):
                return None

            def hessian_packed(self, x):
                return None

        ref = thermo_quantities(CoupledTestModel(1.2, 0.8, 0.6), MacroState(2.0, [3.0]))
        fd = thermo_quantities(Opaque(1.2, 0.8, 0.6), MacroState(2.0, [3.0]))
        assert fd.temperature == pytest.approx(ref.temperature, rel=1e-8)
        assert fd.money_capacity == pytest.approx(ref.money_capacity, rel=1e-5)
        assert fd.prices[0] == pytest.approx(ref.prices[0], rel=1e-8)


class TestInflation:
    def test_constant_series(self):
        assert inflation_rate([0.4] * 8) == pytest.approx(0.0, abs=1e-14)

    def test_exponential_series(self):
        t = 0.3 * np.exp(0.02 * np.arange(60))
        assert inflation_rate(t) == pytest.approx(0.02, abs=1e-12)

    def test_injection_matches_capacity_formula(self):
        # money at rate 0.01 into CD(N=10, eta=2.5, M0=1): I = Mdot/(C T0) = 0.01
        t = (1.0 + 0.01 * np.arange(6)) / 25.0
        assert inflation_rate(t) == pytest.approx(0.01 / (25.0 * 0.04), abs=1e-3)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            inflation_rate([0.3])

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            inflation_rate([0.3, -0.1])


class TestPartitionLogVolume:
    def test_single_agent_unit_exponents(self):
        assert partition_log_volume(1, 1.0, 1.0, MacroState(3.0, [7.0])) == 0.0

    def test_two_agents_unit_everything(self):
        assert partition_log_volume(2, 1.0, 1.0, MacroState(1.0, [1.0])) == pytest.approx(0.0, abs=1e-14)

    def test_stirling_limit(self):
        # (log Z - N*const)/N -> per-agent entropy within O(log N / N)
        alpha, eta = 1.3, 2.1
        const = log_volume_stirling_constant(alpha, eta)
        for n in (500, 2000, 8000):
            lz = partition_log_volume(n, alpha, eta, MacroState(2.0 * n, [3.0 * n]))
            per_agent = (lz - n * const) / n
            target = alpha * math.log(3.0) + eta * math.log(2.0)
            assert abs(per_agent - target) < 3 * math.log(n) / n

    def test_multi_good_rejected(self):
        with pytest.raises(DimensionError):
            partition_log_volume(3, 1.0, 1.0, MacroState(1.0, [1.0, 1.0]))


class TestHessian:
    def test_cobb_douglas_separable(self):
        h, err, res = hessian(CD(10, [1.0, 2.0], 2.5), MacroState(5.0, [20.0, 8.0]))
        off = h - np.diag(np.diag(h))
        assert np.all(off == 0.0)
        assert res == 0.0

    def test_coupled_mixed_derivative(self):
        h, _, _ = hessian(CoupledTestModel(1, 1, 1), MacroState(1.0, [1.0]))
        assert h[0, 1] == pytest.approx(-0.25, abs=1e-14)

    def test_concavity_eigenvalues(self):
        rng = np.random.default_rng(3)
        for model in (CD(10, [1.0, 2.0], 2.5), CoupledTestModel(1.2, 0.7, 0.9),
                      PerfectSubstitutesModel(8, 1.1, 2.0)):
            for _ in range(20):
                money = float(rng.uniform(0.2, 10))
                goods = rng.uniform(0.5, 30, model.n_goods)
                h, _, _ = hessian(model, MacroState(money, goods))
                assert np.linalg.eigvalsh(h).max() <= 1e-8

    def test_fd_matches_analytic(self):
        model = CoupledTestModel(1.2, 0.7, 0.9)
        state = MacroState(2.0, [3.0])
        h_exact, _, _ = hessian(model, state)
        h_fd, err, _ = diff.hessian(model.entropy_packed, state.packed())
        assert np.all(np.abs(h_fd - h_exact) <= np.maximum(err, 1e-9))


class TestPureMoney:
    def test_beta_independent_of_goods(self):
        model = PureMoneyModel(25.0, goods_coeffs=[10.0, 3.0])
        b1 = model.grad(MacroState(2.0, [5.0, 4.0]))[0]
        b2 = model.grad(MacroState(2.0, [9.0, 1.0]))[0]
        assert b1 == b2

    def test_capacity_constant(self):
        model = PureMoneyModel(25.0, goods_coeffs=[10.0])
        for m in (0.5, 2.0, 8.0):
            tq = thermo_quantities(model, MacroState(m, [5.0]))
            assert tq.money_capacity == pytest.approx(25.0, rel=1e-12)

    def test_price_proportional_to_money(self):
        model = PureMoneyModel(25.0, goods_coeffs=[10.0])
        mu1 = model.prices(MacroState(1.0, [5.0]))[0]
        mu2 = model.prices(MacroState(3.0, [5.0]))[0]
        assert mu2 == pytest.approx(3 * mu1, rel=1e-12)

    def test_tabulated_goods_term(self):
        g = np.linspace(1.0, 10.0, 21)
        model = PureMoneyModel(4.0, table=(g, 3.0 * np.log(g)))
        st_mid = MacroState(2.0, [5.0])
        assert model.entropy(st_mid) == pytest.approx(4 * math.log(2) + 3 * math.log(5), abs=1e-6)
        with pytest.raises(DomainError):
            model.entropy(MacroState(2.0, [50.0]))

    def test_nonconcave_table_rejected(self):
        g = np.linspace(1.0, 10.0, 21)
        with pytest.raises(ConfigError):
            PureMoneyModel(4.0, table=(g, g ** 2))


class TestTwoCurrency:
    def test_price_ratio_constant(self):
        model = TwoCurrencyModel(3.0, 5.0, [2.0])
        st1 = MacroState(4.0, [2.0, 10.0])
        assert model.price_ratio(st1) == pytest.approx(4 * 5 / (2 * 3), rel=1e-14)
        # changing only goods leaves the ratio alone
        st2 = MacroState(4.0, [2.0, 25.0])
        assert model.price_ratio(st2) == model.price_ratio(st1)


class TestTabulatedModel:
    def _grids(self):
        m = np.linspace(0.5, 4.0, 12)
        g = np.linspace(2.0, 16.0, 12)
        ref = CD(6, [1.2], 1.8)
        vals = np.array([[ref.entropy(MacroState(mi, [gi])) for gi in g] for mi in m])
        return m, g, vals, ref

    def test_matches_reference_inside_hull(self):
        m, g, vals, ref = self._grids()
        model = TabulatedModel(m, g, vals)
        state = MacroState(2.2, [9.3])
        # bicubic interpolation error on a 12x12 grid of a log surface
        assert model.entropy(state) == pytest.approx(ref.entropy(state), abs=5e-4)
        assert model.prices(state)[0] == pytest.approx(ref.prices(state)[0], rel=2e-3)

    def test_hull_enforced(self):
        m, g, vals, _ = self._grids()
        model = TabulatedModel(m, g, vals)
        with pytest.raises(DomainError):
            model.entropy(MacroState(9.0, [9.0]))

    def test_validation_rejects_convex_table(self):
        m = np.linspace(0.5, 4.0, 8)
        g = np.linspace(2.0, 16.0, 8)
        bad = np.add.outer(m ** 2, g ** 2)
        with pytest.raises(ConfigError):
            TabulatedModel(m, g, bad)


class TestDiffToolkit:
    def test_first_derivative_with_bound(self):
        val, err = diff.derivative(math.sin, 0.7)
        assert abs(val - math.cos(0.7)) <= max(err, 1e-12)

    def test_second_partial_bound(self):
        f = lambda x: math.sin(x[0]) * math.cos(x[1])
        val, err = diff.second_partial(f, [0.4, 0.9], 0, 1)
        exact = -math.cos(0.4) * math.sin(0.9)
        assert abs(val - exact) <= max(err, 1e-10)

    def test_step_guard_near_boundary(self):
        with pytest.raises(DomainError):
            diff.derivative(math.log, 1e-30, rel_h=0.9)


class TestModelConfig:
    def test_cobb_douglas_roundtrip(self):
        model = model_from_config({"kind": "cobb-douglas", "n_agents": 10,
                                   "alpha": [1.0], "eta": 2.5})
        assert isinstance(model, CobbDouglasModel)
        assert model.eta == 2.5

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            model_from_config({"kind": "mystery"})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            model_from_config({"kind": "coupled-test", "a": 1, "b": 1, "c": 1,
                               "frobnicate": True})

    def test_missing_key(self):
        with pytest.raises(ConfigError):
            model_from_config({"kind": "cobb-douglas", "n_agents": 5})


# -- property-based invariants ------------------------------------------------

interior = st.floats(min_value=0.05, max_value=50.0,
                     allow_nan=False, allow_infinity=False)


class TestInvariantProperties:
    @given(money=interior, goods=interior, lam=st.floats(0.1, 8.0))
    @settings(max_examples=100, deadline=None)
    def test_extensivity_property(self, money, goods, lam):
        model = CD(10, [1.3], 2.1)
        state = MacroState(money, [goods])
        assert model.scaled(lam).entropy(state.scaled(lam)) == \
            pytest.approx(lam * model.entropy(state), rel=1e-13, abs=1e-12)

    @given(money=interior, goods=interior)
    @settings(max_examples=60, deadline=None)
    def test_beta_t_and_price_identities(self, money, goods):
        for model in (CD(8, [1.1], 1.9), CoupledTestModel(1.0, 1.2, 0.8),
                      PureMoneyModel(6.0, goods_coeffs=[2.0])):
            tq = thermo_quantities(model, MacroState(money, [goods]))
            assert tq.coolness * tq.temperature == pytest.approx(1.0, abs=1e-15)
            assert tq.prices[0] * tq.coolness == pytest.approx(tq.values[0], rel=1e-12)

    @given(money=interior, goods=interior)
    @settings(max_examples=60, deadline=None)
    def test_pure_money_beta_goods_independence(self, money, goods):
        # d(beta)/dG = 0 for cobb-douglas and pure-money structure
        for model in (CD(8, [1.1], 1.9), PureMoneyModel(6.0, goods_coeffs=[2.0])):
            x = MacroState(money, [goods]).packed()
            beta_of = lambda xx: float(model.grad_packed(xx)[0])
            val, err = diff.partial(beta_of, x, 1)
            assert abs(val) <= max(10 * err, 1e-9)

    @given(money=interior, goods=interior, a=st.floats(0.1, 10.0),
           b=st.floats(-5.0, 5.0), dm=st.floats(-0.5, 0.5), dg=st.floats(-0.5, 0.5))
    @settings(max_examples=80, deadline=None)
    def test_affine_gauge_preserves_transition_signs(self, money, goods, a, b, dm, dg):
        """Goods-conserving transfers keep the sign of the total entropy
        change under any orientation-preserving affine rescaling."""
        m1 = CD(10, [1.0], 2.5)
        m2 = CD(20, [1.0], 1.5)
        s_a = MacroState(money, [goods])
        s_b = MacroState(money * 1.4, [goods * 0.8])
        new_a = MacroState(money + dm * money * 0.5, [goods + dg * goods * 0.5])
        new_b = MacroState(s_b.money - dm * money * 0.5, [s_b.goods[0] - dg * goods * 0.5])
        if not (new_a.interior and new_b.interior):
            return
        d_plain = (m1.entropy(new_a) + m2.entropy(new_b)
                   - m1.entropy(s_a) - m2.entropy(s_b))
        g1, g2 = AffineModel(m1, a, b), AffineModel(m2, a, b)
        d_gauge = (g1.entropy(new_a) + g2.entropy(new_b)
                   - g1.entropy(s_a) - g2.entropy(s_b))
        if abs(d_plain) > 1e-9:
            assert math.copysign(1, d_plain) == math.copysign(1, d_gauge)

    def test_affine_requires_positive_scale(self):
        with pytest.raises(ConfigError):
            AffineModel(CD(5, [1.0], 1.0), -2.0, 0.0)
