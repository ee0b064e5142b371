"""Vasicek short rate: exact simulation, bank account, bonds, LIBOR and par swap rates.

Internally the dynamics are ``dr = (b - kappa * r) dt + sigma dW``. Two
readings of the configured ``theta`` and ``alpha_mr`` are supported, see
:class:`VasicekParams`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _core
from ._core.rng import RATE_STREAM, path_seeds
from .errors import ValidationError

log = logging.getLogger(__name__)

MAX_STEP = 1.0 / 48.0
_TIME_DECIMALS = 12

CONVENTIONS = ("speed_level", "literal")


@dataclass(frozen=True)
class VasicekParams:
    """Short-rate parameters.

    Parameters
    ----------
    r0 : float
        Initial short rate.
    theta, alpha_mr : float
        With ``convention="literal"`` the drift is ``theta - alpha_mr * r``
        (speed ``alpha_mr``, long-run mean ``theta / alpha_mr``). With
        ``convention="speed_level"`` the drift is ``theta * (alpha_mr - r)``
        (speed ``theta``, long-run mean ``alpha_mr``).
    sigma : float
        Volatility.
    """

    r0: float = 0.05
    theta: float = 0.1
    alpha_mr: float = 0.05
    sigma: float = 0.01
    convention: str = "speed_level"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValidationError(f"unknown Vasicek convention {self.convention!r}; use one of {CONVENTIONS}")
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        if not all(np.isfinite([self.r0, self.theta, self.alpha_mr, self.sigma])):
            raise ValidationError("Vasicek parameters must be finite")
        if self.kappa <= 0:
            raise ValidationError("mean-reversion speed must be > 0")

    @property
    def kappa(self) -> float:
        """Mean-reversion speed."""
        return self.alpha_mr if self.convention == "literal" else self.theta

    @property
    def drift_const(self) -> float:
        """Constant ``b`` in ``dr = (b - kappa r) dt``."""
        return self.theta if self.convention == "literal" else self.theta * self.alpha_mr

    @property
    def long_run_mean(self) -> float:
        return self.drift_const / self.kappa

    def mean(self, t):
        m = self.long_run_mean
        return m + (self.r0 - m) * np.exp(-self.kappa * np.asarray(t, dtype=float))

    def variance(self, t):
        k = self.kappa
        return self.sigma**2 * (1.0 - np.exp(-2.0 * k * np.asarray(t, dtype=float))) / (2.0 * k)


@dataclass(frozen=True)
class ShortRatePath:
    """One rate trajectory on ``grid``; ``bank[k] = exp(int_0^grid[k] r ds)``."""

    grid: np.ndarray
    r: np.ndarray
    bank: np.ndarray

    def rate_at(self, t):
        return np.interp(t, self.grid, self.r)

    def bank_at(self, t):
        """Bank account, log-linear between grid points."""
        return np.exp(np.interp(t, self.grid, np.log(self.bank)))

    def discount(self, t):
        return 1.0 / self.bank_at(t)


@dataclass(frozen=True)
class RatePaths:
    """Many rate paths on a shared grid (rows are paths)."""

    grid: np.ndarray
    r: np.ndarray
    log_bank: np.ndarray

    def __len__(self):
        return self.r.shape[0]

    def path(self, i: int) -> ShortRatePath:
        return ShortRatePath(self.grid, self.r[i].copy(), np.exp(self.log_bank[i]))

    def _locate(self, t):
        g = self.grid
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(g, t, side="right") - 1, 0, len(g) - 2)
        w = (t - g[k]) / (g[k + 1] - g[k])
        return k, w

    def interp(self, values: np.ndarray, t) -> np.ndarray:
        """Per-path linear interpolation of a (paths, grid) array at per-path times."""
        k, w = self._locate(t)
        rows = np.arange(values.shape[0])
        return values[rows, k] * (1.0 - w) + values[rows, k + 1] * w

    def rate_at(self, t) -> np.ndarray:
        return self.interp(self.r, t)

    def discount_at(self, t) -> np.ndarray:
        return np.exp(-self.interp(self.log_bank, t))

    def column(self, t: float) -> int:
        """Index of a grid node; ``t`` must be on the grid."""
        k = int(np.searchsorted(self.grid, t))
        if k >= len(self.grid) or self.grid[k] != t:
            raise ValidationError(f"time {t} is not a grid node")
        return k


def make_grid(horizon: float, *event_times, max_step: float = MAX_STEP) -> np.ndarray:
    """Union of ``event_times`` in ``[0, horizon]`` and a uniform grid with step <= ``max_step``."""
    if horizon <= 0:
        raise ValidationError("horizon must be positive")
    n = int(np.ceil(horizon / max_step - 1e-9))
    pts = [np.linspace(0.0, horizon, n + 1)]
    for ev in event_times:
        ev = np.atleast_1d(np.asarray(ev, dtype=float))
        pts.append(ev[(ev >= 0) & (ev <= horizon)])
    g = np.unique(np.round(np.concatenate(pts), _TIME_DECIMALS))
    return g


def payment_dates(tenor: float, freq: int) -> np.ndarray:
    n = int(round(tenor * freq))
    if n <= 0 or abs(n - tenor * freq) > 1e-9:
        raise ValidationError(f"tenor * freq must be a positive integer, got {tenor} * {freq}")
    return np.round(np.arange(1, n + 1) / freq, _TIME_DECIMALS)


def step_coefficients(p: VasicekParams, grid: np.ndarray):
    """Exact OU transition over each grid step: ``r' = a r + c + s Z``."""
    dt = np.diff(np.asarray(grid, dtype=float))
    if np.any(dt <= 0):
        raise ValidationError("grid must be strictly increasing")
    k, b = p.kappa, p.drift_const
    a = np.exp(-k * dt)
    c = b * (1.0 - a) / k
    s = p.sigma * np.sqrt(-np.expm1(-2.0 * k * dt) / (2.0 * k))
    return a, c, s


def _bank_from_rates(grid: np.ndarray, r: np.ndarray) -> np.ndarray:
    dt = np.diff(grid)
    inc = 0.5 * (r[:, 1:] + r[:, :-1]) * dt
    out = np.zeros_like(r)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def simulate_rate_paths(p: VasicekParams, grid, base_seed: int, path_index) -> RatePaths:
    """Paths ``path_index`` of the rate stream for ``base_seed``."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        raise ValidationError("rate grid must start at 0")
    a, c, s = step_coefficients(p, grid)
    seeds = path_seeds(base_seed, np.atleast_1d(path_index), RATE_STREAM)
    r = _core.ou_paths(seeds, a, c, s, float(p.r0))
    return RatePaths(grid, r, _bank_from_rates(grid, r))


def simulate_rate_path(p: VasicekParams, grid, seed: int, path_index: int = 0) -> ShortRatePath:
    return simulate_rate_paths(p, grid, seed, [path_index]).path(0)


def _affine(p: VasicekParams, tau):
    k, m, s2 = p.kappa, p.long_run_mean, p.sigma**2
    tau = np.asarray(tau, dtype=float)
    B = -np.expm1(-k * tau) / k
    lnA = (m - s2 / (2.0 * k * k)) * (B - tau) - s2 * B * B / (4.0 * k)
    return lnA, B


def bond_price(p: VasicekParams, r_t, t, T):
    """Zero-coupon bond ``P(t, T) = A exp(-B r_t)``; broadcasts over inputs."""
    tau = np.asarray(T, dtype=float) - np.asarray(t, dtype=float)
    if np.any(tau < -1e-12):
        raise ValidationError("bond maturity before valuation time")
    lnA, B = _affine(p, np.maximum(tau, 0.0))
    return np.exp(lnA - B * np.asarray(r_t, dtype=float))


def libor_fixing(p: VasicekParams, r_t, T_prev: float, T_next: float):
    """Simple rate fixed at ``T_prev`` for the period to ``T_next``."""
    if not T_prev < T_next:
        raise ValidationError("LIBOR period must have positive length")
    delta = T_next - T_prev
    return (1.0 / bond_price(p, r_t, T_prev, T_next) - 1.0) / delta


def annuity(p: VasicekParams, tenor: float, freq: int, r0: float | None = None) -> float:
    dates = payment_dates(tenor, freq)
    delta = np.diff(np.concatenate([[0.0], dates]))
    r0 = p.r0 if r0 is None else r0
    return float(np.sum(delta * bond_price(p, r0, 0.0, dates)))


def par_swap_rate(p: VasicekParams, tenor: float, freq: int) -> float:
    """Fixed rate giving a zero-value swap at inception."""
    dates = payment_dates(tenor, freq)
    pT = bond_price(p, p.r0, 0.0, dates[-1])
    return float((1.0 - pT) / annuity(p, tenor, freq))


def log_convention(p: VasicekParams) -> None:
    log.info(
        "Vasicek convention %s: speed %.6g, long-run mean %.6g",
        p.convention,
        p.kappa,
        p.long_run_mean,
    )
