from dataclasses import replace

import numpy as np
import pytest

from oracles import cds_mc, irs_dividend_mc
from ratingxva.errors import EvalAfterMaturity, NoRoot, ValidationError
from ratingxva.instruments import (
    CdsPricer,
    CdsSpec,
    IrsPricer,
    IrsSpec,
    cds_clean_price,
    irs_clean_price,
    par_cds_spread,
)
from ratingxva.rates import VasicekParams, annuity, make_grid, par_swap_rate, simulate_rate_path
from ratingxva.rating_model import GeneratorMatrix

BASE_RATES = VasicekParams()


@pytest.fixture(scope="module")
def irs():
    return IrsPricer(IrsSpec(), BASE_RATES)


class TestIrs:
    def test_par_at_inception(self, irs):
        S, Sd = irs.price(np.array([0.0]), BASE_RATES.r0, irs.fixings(np.full((1, 40), BASE_RATES.r0)))
        assert abs(S[0]) < 1e-10 and Sd[0] == S[0]
        assert irs.fixed_rate == pytest.approx(par_swap_rate(BASE_RATES, 10.0, 4))

    def test_linear_in_fixed_rate(self):
        bp = 1e-4
        p = IrsPricer(IrsSpec(fixed_rate=par_swap_rate(BASE_RATES, 10.0, 4) + bp), BASE_RATES)
        S, _ = p.price(np.array([0.0]), BASE_RATES.r0, p.fixings(np.full((1, 40), BASE_RATES.r0)))
        assert S[0] == pytest.approx(-annuity(BASE_RATES, 10.0, 4) * bp, abs=1e-10)

    def test_receiver_is_negative_payer(self):
        pay = IrsPricer(IrsSpec(fixed_rate=0.04), BASE_RATES)
        rec = IrsPricer(IrsSpec(fixed_rate=0.04, payer=False), BASE_RATES)
        t, r = np.array([3.1]), np.array([0.06])
        fx = pay.fixings(np.full((1, 40), 0.055))
        assert rec.price(t, r, fx)[0][0] == pytest.approx(-pay.price(t, r, fx)[0][0])

    def test_dividend_atom_on_payment_dates(self, irs):
        fx = irs.fixings(np.linspace(0.03, 0.07, 40)[None, :])
        for k in (0, 7, 39):
            t = irs.dates[k]
            S, Sd = irs.price(np.array([t]), 0.05, fx)
            assert Sd[0] - S[0] == pytest.approx((fx[0, k] - irs.fixed_rate) * irs.delta[k], abs=1e-15)
        S, Sd = irs.price(np.array([1.1]), 0.05, fx)
        assert Sd[0] == S[0]

    def test_zero_at_maturity(self, irs):
        S, _ = irs.price(np.array([10.0]), 0.05, np.zeros((1, 40)))
        assert S[0] == 0.0
        with pytest.raises(EvalAfterMaturity):
            irs.price(np.array([10.5]), 0.05, np.zeros((1, 40)))

    def test_single_path_wrapper(self):
        grid = make_grid(10.0, np.arange(0, 10.25, 0.25))
        path = simulate_rate_path(BASE_RATES, grid, seed=3)
        S, Sd = irs_clean_price(IrsSpec(), BASE_RATES, path, 4.0)
        assert np.isfinite(S) and Sd != S

    @pytest.mark.parametrize("t", [0.0, 2.5, 5.0, 7.5])
    def test_dividend_mc_oracle(self, irs, t):
        r_t = BASE_RATES.mean(t)
        fixing = 0.05
        n = 40_000
        v = irs_dividend_mc(BASE_RATES, irs.fixed_rate, irs.dates, irs.resets, t, r_t, fixing, n, seed=17)
        fx = np.full((1, 40), fixing)
        S, _ = irs.price(np.array([t]), r_t, fx)
        se = v.std(ddof=1) / np.sqrt(n)
        assert abs(v.mean() - S[0]) < 3 * se

    def test_nested_mc_frozen_states(self, irs):
        """Fifty frozen states at t=5: affine price inside the inner-MC band."""
        rs = np.random.default_rng(1).normal(BASE_RATES.mean(5.0), np.sqrt(BASE_RATES.variance(5.0)), 50)
        fails = 0
        for i, r5 in enumerate(rs):
            fx = irs.fixings(np.full((1, 40), r5))
            S, _ = irs.price(np.array([5.0]), r5, fx)
            # state at t=5: the running period's fixing is set from r5 itself
            v = irs_dividend_mc(BASE_RATES, irs.fixed_rate, irs.dates, irs.resets, 5.0, r5, fx[0, 20], 2000, seed=100 + i)
            se = v.std(ddof=1) / np.sqrt(v.size)
            fails += abs(v.mean() - S[0]) >= 3 * se
        assert fails == 0

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            IrsSpec(tenor=10.1, freq=4)
        with pytest.raises(ValidationError):
            IrsSpec(fixed_rate=-0.01)


@pytest.fixture(scope="module")
def g3(request):
    from ratingxva.presets import P3
    from ratingxva.rating_model import TransitionMatrix, generator_from_annual_matrix

    return generator_from_annual_matrix(TransitionMatrix(P3))


class TestCds:
    def test_par_spread_prices_to_zero(self, g3):
        k = par_cds_spread(CdsSpec(), g3, BASE_RATES, 1)
        pr = CdsPricer(CdsSpec(spread=k), g3, BASE_RATES)
        S, _ = pr.price(0.0, 1, BASE_RATES.r0)
        assert abs(S[0]) < 1e-8
        assert k > 0

    def test_full_recovery(self, g3):
        pr = CdsPricer(CdsSpec(spread=0.01, reference_recovery=1.0), g3, BASE_RATES)
        S, _ = pr.price(0.0, np.array([1, 2, 3]), BASE_RATES.r0)
        assert np.all(S < 0)
        _, ann = pr.legs(0.0, np.array([1, 2, 3]), BASE_RATES.r0)
        np.testing.assert_allclose(S, -0.01 * ann)
        assert par_cds_spread(CdsSpec(reference_recovery=1.0), g3, BASE_RATES, 1) == 0.0

    def test_protection_increases_with_worse_rating(self, g3):
        pr = CdsPricer(CdsSpec(spread=0.0), g3, BASE_RATES)
        S, _ = pr.price(0.0, np.array([1, 2, 3, 4]), BASE_RATES.r0)
        assert 0 < S[0] < S[1] < S[2]
        assert S[3] == 0.0

    def test_zero_hazard(self):
        g = GeneratorMatrix(np.zeros((3, 3)))
        assert par_cds_spread(CdsSpec(), g, BASE_RATES, 1) == 0.0

    def test_no_root_when_dead(self, g3):
        with pytest.raises(NoRoot):
            par_cds_spread(CdsSpec(), g3, BASE_RATES, 4)

    @pytest.mark.parametrize("lam", [0.01, 0.2])
    def test_credit_triangle(self, lam):
        g = GeneratorMatrix([[-lam, lam], [0.0, 0.0]])
        flat = VasicekParams(r0=0.03, theta=0.5, alpha_mr=0.03, sigma=0.0)
        assert par_cds_spread(CdsSpec(), g, flat, 1) == pytest.approx(0.6 * lam, abs=1e-6)

    def test_atom_at_reference_default(self, g3):
        pr = CdsPricer(CdsSpec(spread=0.001), g3, BASE_RATES)
        S, Sd = pr.price(np.array([1.0, 1.0]), np.array([4, 4]), 0.05, reference_default_now=np.array([True, False]))
        np.testing.assert_allclose(Sd - S, [0.6, 0.0])

    def test_after_maturity(self, g3):
        with pytest.raises(EvalAfterMaturity):
            CdsPricer(CdsSpec(spread=0.0), g3, BASE_RATES).price(6.0, 1, 0.05)

    def test_single_path_wrapper(self, g3):
        path = simulate_rate_path(BASE_RATES, make_grid(5.0), seed=2)
        S, Sd = cds_clean_price(CdsSpec(spread=0.001), g3, BASE_RATES, 2, path, 1.0)
        assert S == Sd
        with pytest.raises(ValidationError):
            cds_clean_price(CdsSpec(), g3, BASE_RATES, 2, path, 1.0)

    def test_brute_force_mc(self, g3):
        spec = CdsSpec(spread=0.002)
        pr = CdsPricer(spec, g3, BASE_RATES)
        n = 20_000
        v = cds_mc(BASE_RATES, g3, 3, spec.spread, spec.tenor, spec.reference_recovery, n, seed=4)
        S, _ = pr.price(0.0, 3, BASE_RATES.r0)
        assert abs(v.mean() - S[0]) < 3 * v.std(ddof=1) / np.sqrt(n)
