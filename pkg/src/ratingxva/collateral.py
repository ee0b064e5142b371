"""Ratings-linked margin account.

At each call date ``t_i`` before the close-out time the account ``C`` moves by

* ``first = S + B (b1 - b2) - G1 - C`` when ``first > mta`` and
* ``second = S + B (b2 - b1) - G2 - C`` when ``second < -mta``,

both tested against the balance before the call. The thresholds are
``G_i = rho_i(X_i) * S`` (``threshold_mode="symmetric"``) or the signed pair
``G1 = rho_1 S^+``, ``G2 = -rho_2 S^-`` (``threshold_mode="signed"``). Between
calls the balance is constant and it is frozen from the close-out time on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ctmc_sim import Closeout
from .errors import ValidationError

SCHEMES = ("none", "linear", "exponential", "custom")
THRESHOLD_MODES = ("symmetric", "signed")


@dataclass(frozen=True)
class CollateralSpec:
    """Collateral agreement terms.

    ``scheme="none"`` means no agreement: there are no margin calls and the
    account stays at zero. ``table`` holds ``rho(1..K)`` for ``scheme="custom"``.
    """

    scheme: str = "none"
    mta: float = 0.0
    ia_cpty: float = 0.0
    ia_inv: float = 0.0
    margin_period: float = 0.0
    call_dates: tuple = ()
    table: tuple = ()
    threshold_mode: str = "symmetric"
    K: int = 4

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValidationError(f"unknown collateral scheme {self.scheme!r}; use one of {SCHEMES}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise ValidationError(f"unknown threshold mode {self.threshold_mode!r}")
        if self.mta < 0 or self.margin_period < 0:
            raise ValidationError("minimum transfer amount and margin period must be >= 0")
        if self.ia_cpty < 0 or self.ia_inv > 0:
            raise ValidationError("independent amounts: counterparty's must be >= 0, investor's <= 0")
        dates = np.asarray(self.call_dates, dtype=float)
        if dates.size and (np.any(np.diff(dates) <= 0) or dates[0] <= 0):
            raise ValidationError("call dates must be strictly increasing and positive")
        object.__setattr__(self, "call_dates", tuple(float(d) for d in dates))
        if self.scheme == "custom":
            tab = np.asarray(self.table, dtype=float)
            if tab.shape != (self.K,) or np.any(tab < 0) or np.any(tab > 1):
                raise ValidationError(f"custom collateral table needs {self.K} rates in [0, 1]")
            object.__setattr__(self, "table", tuple(tab.tolist()))

    @property
    def active(self) -> bool:
        return self.scheme != "none"

    def rates(self) -> np.ndarray:
        """``rho`` for categories ``1..K`` (index 0 is category 1)."""
        return np.array([collateral_rate(self.scheme, x, self.K, self.table) for x in range(1, self.K + 1)])


def collateral_rate(scheme: str, category: int, K: int = 4, table=()) -> float:
    """Threshold rate ``rho`` for a rating category.

    ``none`` gives a zero threshold (full collateralization if a margin call
    were made).
    """
    x = int(category)
    if not 1 <= x <= K:
        raise ValidationError(f"category {category} outside 1..{K}")
    if scheme == "linear":
        return (K - x) / (K - 1)
    if scheme == "exponential":
        return float(np.exp(1.0 - x)) if x < K else 0.0
    if scheme == "custom":
        return float(table[x - 1])
    if scheme == "none":
        return 0.0
    raise ValidationError(f"unknown collateral scheme {scheme!r}")


def thresholds(S, rho1, rho2, mode: str):
    S = np.asarray(S, dtype=float)
    if mode == "symmetric":
        return rho1 * S, rho2 * S
    return rho1 * np.maximum(S, 0.0), -rho2 * np.maximum(-S, 0.0)


def margin_update(prev_C, S, bank, rho1, rho2, spec: CollateralSpec):
    """New balance after one margin call; broadcasts over paths."""
    prev_C = np.asarray(prev_C, dtype=float)
    S = np.asarray(S, dtype=float)
    g1, g2 = thresholds(S, rho1, rho2, spec.threshold_mode)
    ia = np.asarray(bank, dtype=float) * (spec.ia_cpty - spec.ia_inv)
    first = S + ia - g1 - prev_C
    second = S - ia - g2 - prev_C
    move = np.where(first > spec.mta, first, 0.0) + np.where(second < -spec.mta, second, 0.0)
    return prev_C + move


@dataclass
class CollateralLedger:
    """Balances after each call date, one row per path.

    ``balances[p, i]`` is the account on ``(t_i, t_{i+1}]``. Reading at a
    close-out time only uses calls strictly before it, which freezes the
    account at close-out.
    """

    call_dates: np.ndarray
    balances: np.ndarray
    margin_period: float = 0.0
    _zero: bool = field(default=False, repr=False)

    def at(self, t) -> np.ndarray:
        """Balance at per-path times ``t`` (``inf`` allowed)."""
        t = np.asarray(t, dtype=float)
        n = self.balances.shape[0]
        if self._zero or not len(self.call_dates):
            return np.zeros(n)
        k = np.searchsorted(self.call_dates, t, side="left")  # calls strictly before t
        padded = np.concatenate([np.zeros((n, 1)), self.balances], axis=1)
        return padded[np.arange(n), k]


def build_ledger(spec: CollateralSpec, S_calls, bank_calls, rating1_calls, rating2_calls) -> CollateralLedger:
    """Run the margin account over all call dates.

    Inputs are ``(paths, calls)`` arrays of clean price, bank account and the
    two parties' ratings at each call date.
    """
    dates = np.asarray(spec.call_dates, dtype=float)
    S_calls = np.atleast_2d(np.asarray(S_calls, dtype=float))
    n, m = S_calls.shape
    if not spec.active or m == 0:
        return CollateralLedger(dates, np.zeros((n, m)), spec.margin_period, _zero=True)
    rho = spec.rates()
    r1 = rho[np.asarray(rating1_calls) - 1]
    r2 = rho[np.asarray(rating2_calls) - 1]
    bank_calls = np.broadcast_to(np.asarray(bank_calls, dtype=float), (n, m))
    out = np.empty((n, m))
    c = np.zeros(n)
    for i in range(m):
        c = margin_update(c, S_calls[:, i], bank_calls[:, i], r1[:, i], r2[:, i], spec)
        out[:, i] = c
    return CollateralLedger(dates, out, spec.margin_period)


def closeout_collateral(C, classification, Rh1: float, Rh2: float):
    """Collateral after rehypothecation losses at close-out.

    Returns ``(C_tilde, C_tilde_1, C_tilde_2)``: the combined value and the
    counterparty- and investor-leg values used in the rehypothecated CVA.
    """
    C = np.asarray(C, dtype=float)
    cls = np.asarray(classification)
    pos = C > 0
    cpty = C * np.where(pos, Rh1, 1.0)
    inv = C * np.where(pos, 1.0, Rh2)
    both = C * np.where(pos, Rh1, Rh2)
    is1 = cls == Closeout.CPTY_DEFAULT
    is2 = cls == Closeout.INV_DEFAULT
    is12 = cls == Closeout.BOTH_DEFAULT
    tilde = np.where(is1, cpty, np.where(is2, inv, np.where(is12, both, C)))
    tilde1 = np.where(is1, cpty, np.where(is12, both, 0.0))
    tilde2 = np.where(is2, inv, np.where(is12, both, 0.0))
    return tilde, tilde1, tilde2
