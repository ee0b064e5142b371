"""Counterparty-risk-free prices ``S_t`` and ``S^Delta_t`` of an IRS and a CDS.

Prices are from the investor's side: for the IRS the investor pays fixed and
receives LIBOR (set ``payer=False`` for the reverse); for the CDS the investor
buys protection. ``S^Delta_t = S_t + Delta D_t`` adds any cash flow falling
exactly at ``t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvalAfterMaturity, NoRoot, NumericError, ValidationError
from .rates import RatePaths, ShortRatePath, VasicekParams, bond_price, par_swap_rate, payment_dates
from .rating_model import GeneratorMatrix

QUAD_NODES = 64


@dataclass(frozen=True)
class IrsSpec:
    notional: float = 1.0
    tenor: float = 10.0
    freq: int = 4
    fixed_rate: float | None = None  # None means the par rate
    payer: bool = True

    def __post_init__(self):
        payment_dates(self.tenor, self.freq)
        if self.fixed_rate is not None and self.fixed_rate < 0:
            raise ValidationError("fixed rate must be >= 0")
        if self.notional <= 0:
            raise ValidationError("notional must be positive")


@dataclass(frozen=True)
class CdsSpec:
    notional: float = 1.0
    tenor: float = 5.0
    spread: float | None = None  # None means the par spread for the initial reference rating
    reference_recovery: float = 0.4

    def __post_init__(self):
        if self.tenor <= 0:
            raise ValidationError("CDS tenor must be positive")
        if self.spread is not None and self.spread < 0:
            raise ValidationError("CDS spread must be >= 0")
        if not 0.0 <= self.reference_recovery <= 1.0:
            raise ValidationError("reference recovery must lie in [0, 1]")


class IrsPricer:
    """Affine closed-form IRS prices along simulated rate paths."""

    def __init__(self, spec: IrsSpec, params: VasicekParams):
        self.spec = spec
        self.params = params
        self.dates = payment_dates(spec.tenor, spec.freq)
        self.resets = np.concatenate([[0.0], self.dates[:-1]])
        self.delta = self.dates - self.resets
        self.fixed_rate = par_swap_rate(params, spec.tenor, spec.freq) if spec.fixed_rate is None else spec.fixed_rate
        self.sign = 1.0 if spec.payer else -1.0

    @property
    def maturity(self) -> float:
        return float(self.dates[-1])

    def fixings(self, r_reset: np.ndarray) -> np.ndarray:
        """LIBOR for every period from the short rate at each reset date, shape ``(n, periods)``."""
        r_reset = np.atleast_2d(r_reset)
        return libor_fixing_vec(self.params, r_reset, self.resets, self.dates)

    def price(self, t, r_t, fixings: np.ndarray):
        """``(S_t, S^Delta_t)`` for per-path times, short rates and period fixings.

        ``fixings[p, j]`` is the LIBOR for period ``j``; only periods already
        reset at ``t`` are read.
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r_t = np.broadcast_to(np.asarray(r_t, dtype=float), t.shape)
        if np.any(t > self.maturity + 1e-12):
            raise EvalAfterMaturity(f"IRS evaluated after maturity {self.maturity}")
        fixings = np.atleast_2d(fixings)
        n, m = t.shape[0], len(self.dates)
        rows = np.arange(n)
        paid = np.searchsorted(self.dates, t, side="right")  # payment dates <= t
        live = paid < m
        cur = np.minimum(paid, m - 1)
        P = bond_price(self.params, r_t[:, None], t[:, None], np.maximum(self.dates[None, :], t[:, None]))
        P = np.where(np.arange(m)[None, :] >= paid[:, None], P, 0.0)
        p_cur = P[rows, cur]
        floating = self.delta[cur] * fixings[rows, cur] * p_cur + p_cur - P[:, -1]
        fixed = self.fixed_rate * (P * self.delta[None, :]).sum(axis=1)
        S = np.where(live, self.sign * self.spec.notional * (floating - fixed), 0.0)
        last = np.maximum(paid - 1, 0)
        on_pay = (paid > 0) & (self.dates[last] == t)
        flow = self.sign * self.spec.notional * (fixings[rows, last] - self.fixed_rate) * self.delta[last]
        return S, S + np.where(on_pay, flow, 0.0)

    def reset_rates(self, rates: RatePaths) -> np.ndarray:
        cols = [rates.column(T) for T in self.resets]
        return rates.r[:, cols]

    def price_on_paths(self, rates: RatePaths, t):
        """Prices at per-path times ``t`` (``t`` may also be a scalar)."""
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(rates),))
        return self.price(t, rates.rate_at(t), self.fixings(self.reset_rates(rates)))


def libor_fixing_vec(p: VasicekParams, r_reset, resets, dates):
    return (1.0 / bond_price(p, r_reset, resets, dates) - 1.0) / (dates - resets)


def irs_clean_price(spec: IrsSpec, params: VasicekParams, rate_path: ShortRatePath, t: float):
    """``(S_t, S^Delta_t)`` on one rate path; the path grid must contain the reset dates."""
    pricer = IrsPricer(spec, params)
    rates = RatePaths(rate_path.grid, rate_path.r[None, :], np.log(rate_path.bank)[None, :])
    S, Sd = pricer.price_on_paths(rates, t)
    return float(S[0]), float(Sd[0])


class CdsPricer:
    """Quadrature CDS prices conditional on the reference rating and short rate.

    Default-time law of the reference entity from the spectral decomposition of
    its generator; discounting by the Vasicek bond curve at the current rate.
    The decomposition is computed once and only read afterwards, so one pricer
    may be shared across threads.
    """

    def __init__(self, spec: CdsSpec, g3: GeneratorMatrix, params: VasicekParams, nodes: int = QUAD_NODES):
        self.spec = spec
        self.params = params
        self.K = g3.n
        w, V = np.linalg.eig(g3.a)
        Vinv = np.linalg.inv(V)
        self._rates = w
        self._coef = V * Vinv[:, -1][None, :]  # [x, m]
        probe = np.array([0.5, spec.tenor])
        err = max(
            float(np.abs(self._default_prob(np.arange(self.K), s) - g3.transition(s)[:, -1]).max()) for s in probe
        )
        if not err < 1e-9:
            raise NumericError(f"reference generator is too ill-conditioned for spectral pricing (error {err:.2e})")
        self._xi, self._wq = np.polynomial.legendre.leggauss(nodes)
        self.spread = spec.spread

    def _default_prob(self, x, s):
        e = np.exp(np.multiply.outer(np.asarray(s, dtype=float), self._rates))
        return np.real(np.einsum("...m,...m->...", self._coef[np.asarray(x)], e))

    def _default_density(self, x, s):
        e = np.exp(np.multiply.outer(np.asarray(s, dtype=float), self._rates)) * self._rates
        return np.real(np.einsum("...m,...m->...", self._coef[np.asarray(x)], e))

    def legs(self, t, rating, r_t):
        """Protection leg and risky annuity (per unit spread) for arrays of states."""
        t, rating, r_t = np.broadcast_arrays(
            np.atleast_1d(np.asarray(t, dtype=float)), np.asarray(rating, dtype=np.int64), np.asarray(r_t, dtype=float)
        )
        if np.any(t > self.spec.tenor + 1e-12):
            raise EvalAfterMaturity(f"CDS evaluated after maturity {self.spec.tenor}")
        h = np.maximum(self.spec.tenor - t, 0.0)
        s = 0.5 * h[:, None] * (self._xi[None, :] + 1.0)
        w = 0.5 * h[:, None] * self._wq[None, :]
        disc = bond_price(self.params, r_t[:, None], 0.0, s)
        x = np.minimum(rating, self.K) - 1
        dens = self._default_density(x[:, None], s)
        surv = 1.0 - self._default_prob(x[:, None], s)
        alive = rating < self.K
        prot = np.where(alive, (1.0 - self.spec.reference_recovery) * (w * disc * dens).sum(axis=1), 0.0)
        ann = np.where(alive, (w * disc * surv).sum(axis=1), 0.0)
        return self.spec.notional * prot, self.spec.notional * ann

    def price(self, t, rating, r_t, spread: float | None = None, reference_default_now=None):
        """``(S_t, S^Delta_t)``; zero once the reference entity has defaulted."""
        kappa = self.spread if spread is None else spread
        if kappa is None:
            raise ValidationError("CDS spread not set; resolve the par spread first")
        prot, ann = self.legs(t, rating, r_t)
        S = prot - kappa * ann
        if reference_default_now is None:
            return S, S.copy()
        atom = (1.0 - self.spec.reference_recovery) * self.spec.notional
        return S, S + np.where(reference_default_now, atom, 0.0)

    def par_spread(self, rating: int, r0: float) -> float:
        prot, ann = self.legs(0.0, rating, r0)
        if not (np.isfinite(prot[0]) and np.isfinite(ann[0])) or ann[0] <= 0:
            raise NoRoot("no par spread: premium leg is degenerate")
        return float(prot[0] / ann[0])


def cds_clean_price(spec: CdsSpec, g3: GeneratorMatrix, params: VasicekParams, ref_rating: int, rate_path: ShortRatePath, t: float):
    """``(S_t, S^Delta_t)`` given the reference rating at ``t`` on one rate path."""
    pricer = CdsPricer(spec, g3, params)
    if pricer.spread is None:
        raise ValidationError("CdsSpec.spread must be set for pricing")
    S, Sd = pricer.price(t, ref_rating, rate_path.rate_at(t))
    return float(S[0]), float(Sd[0])


def par_cds_spread(spec: CdsSpec, g3: GeneratorMatrix, params: VasicekParams, ref_rating: int, rate0: float | None = None) -> float:
    """Spread making the CDS worth zero at inception.

    Both legs are linear in the spread, so the root is the ratio of the
    protection leg to the risky annuity.
    """
    r0 = params.r0 if rate0 is None else rate0
    return CdsPricer(spec, g3, params).par_spread(ref_rating, r0)


__all__ = [
    "CdsPricer",
    "CdsSpec",
    "IrsPricer",
    "IrsSpec",
    "cds_clean_price",
    "irs_clean_price",
    "par_cds_spread",
]
