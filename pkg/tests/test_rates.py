import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from ratingxva.errors import ValidationError
from ratingxva.rates import (
    VasicekParams,
    bond_price,
    libor_fixing,
    make_grid,
    par_swap_rate,
    payment_dates,
    simulate_rate_path,
    simulate_rate_paths,
)

BASE_RATES = VasicekParams(r0=0.05, theta=0.1, alpha_mr=0.05, sigma=0.01)


def _mc(values):
    return values.mean(), values.std(ddof=1) / np.sqrt(values.size)


class TestParams:
    def test_conventions(self):
        assert BASE_RATES.kappa == 0.1 and BASE_RATES.long_run_mean == pytest.approx(0.05)
        lit = VasicekParams(0.05, 0.1, 0.05, 0.01, convention="literal")
        assert lit.kappa == 0.05 and lit.long_run_mean == pytest.approx(2.0)

    @pytest.mark.parametrize("kw", [{"sigma": -0.1}, {"theta": 0.0}, {"convention": "other"}])
    def test_rejects(self, kw):
        with pytest.raises(ValidationError):
            VasicekParams(**kw)


class TestGrid:
    def test_contains_events_and_step(self):
        g = make_grid(10.0, payment_dates(10.0, 4), [3.3])
        assert g[0] == 0.0 and g[-1] == 10.0
        assert np.diff(g).max() <= 1 / 48 + 1e-12
        assert 3.3 in g and 0.25 in g

    def test_payment_dates(self):
        np.testing.assert_allclose(payment_dates(1.0, 4), [0.25, 0.5, 0.75, 1.0])
        with pytest.raises(ValidationError):
            payment_dates(1.1, 4)


class TestSimulation:
    @pytest.mark.parametrize("convention", ["speed_level", "literal"])
    def test_zero_vol_follows_ode(self, convention):
        p = VasicekParams(0.05, 0.1, 0.05, 0.0, convention=convention)
        g = make_grid(5.0)
        path = simulate_rate_path(p, g, seed=1)
        np.testing.assert_allclose(path.r, p.mean(g), rtol=1e-12, atol=1e-15)
        assert path.bank[0] == 1.0
        assert np.all(np.diff(path.bank) > 0)

    def test_ou_moments(self):
        n = 100_000
        g = make_grid(1.0)
        r1 = simulate_rate_paths(BASE_RATES, g, 2024, np.arange(n)).r[:, -1]
        m, se = _mc(r1)
        assert abs(m - BASE_RATES.mean(1.0)) < 3 * se
        assert r1.var(ddof=1) == pytest.approx(BASE_RATES.variance(1.0), rel=0.05)

    def test_deterministic(self):
        g = make_grid(2.0)
        a = simulate_rate_paths(BASE_RATES, g, 5, np.arange(10))
        b = simulate_rate_paths(BASE_RATES, g, 5, np.arange(10))
        assert np.array_equal(a.r, b.r)
        one = simulate_rate_path(BASE_RATES, g, 5, path_index=3)
        assert np.array_equal(one.r, a.r[3])


class TestBonds:
    def test_unit_at_maturity(self):
        assert bond_price(BASE_RATES, 0.07, 3.0, 3.0) == pytest.approx(1.0, abs=1e-15)

    def test_zero_vol_matches_quadrature(self):
        p = VasicekParams(0.03, 0.02, 0.06, 0.0)
        T = 7.0
        integral, _ = scipy.integrate.quad(lambda s: float(p.mean(s)), 0.0, T)
        assert bond_price(p, p.r0, 0.0, T) == pytest.approx(np.exp(-integral), abs=1e-6)

    @pytest.mark.parametrize("T", [1.0, 5.0, 10.0])
    def test_bank_account_oracle(self, T):
        n = 100_000
        paths = simulate_rate_paths(BASE_RATES, make_grid(T), 77, np.arange(n))
        m, se = _mc(np.exp(-paths.log_bank[:, -1]))
        assert abs(m - bond_price(BASE_RATES, BASE_RATES.r0, 0.0, T)) < 3 * se

    def test_discounted_bond_martingale(self):
        n, t, T = 10_000, 3.0, 8.0
        paths = simulate_rate_paths(BASE_RATES, make_grid(t), 13, np.arange(n))
        x = np.exp(-paths.log_bank[:, -1]) * bond_price(BASE_RATES, paths.r[:, -1], t, T)
        drift = x - bond_price(BASE_RATES, BASE_RATES.r0, 0.0, T)
        m, se = _mc(drift)
        assert abs(m) < 3 * se


class TestSwapRate:
    def test_reference_value(self):
        assert par_swap_rate(BASE_RATES, 10.0, 4) == pytest.approx(0.0496, abs=2e-4)

    @pytest.mark.parametrize("c,freq", [(0.03, 4), (0.05, 2), (0.0, 12)])
    def test_flat_curve(self, c, freq):
        p = VasicekParams(r0=c, theta=0.2, alpha_mr=c, sigma=0.0)
        assert par_swap_rate(p, 5.0, freq) == pytest.approx(freq * np.expm1(c / freq), abs=1e-10)

    def test_single_period(self):
        p1 = bond_price(BASE_RATES, BASE_RATES.r0, 0.0, 0.25)
        assert par_swap_rate(BASE_RATES, 0.25, 4) == pytest.approx((1 / p1 - 1) / 0.25, abs=1e-14)

    def test_libor_zero_rates(self):
        p = VasicekParams(r0=0.0, theta=0.1, alpha_mr=0.0, sigma=0.0)
        assert libor_fixing(p, 0.0, 1.0, 1.25) == pytest.approx(0.0, abs=1e-15)
        with pytest.raises(ValidationError):
            libor_fixing(BASE_RATES, 0.05, 1.0, 1.0)


@given(st.floats(-0.02, 0.1), st.floats(0.0, 5.0), st.floats(0.01, 5.0))
@settings(max_examples=50, deadline=None)
def test_bond_price_bounds(r, t, tau):
    """Positive and decreasing in the short rate."""
    p = bond_price(BASE_RATES, r, t, t + tau)
    assert p > 0
    assert bond_price(BASE_RATES, r + 0.01, t, t + tau) < p
