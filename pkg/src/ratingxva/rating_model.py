"""Rating scale, annual transition matrices and their generators."""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    EmbeddingFailure,
    LogDivergence,
    NegativeEntry,
    NonAbsorbingDefault,
    RowSumError,
    ValidationError,
)

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9
EMBEDDING_TOL = 1e-3
GENERATOR_ROW_TOL = 1e-10


@dataclass(frozen=True)
class RatingScale:
    """Categories ``1..K``; 1 is the best rating and ``K`` is default.

    Categories may be referred to by number or by letter (``A`` = 1, ...).
    With ``K = 4`` the letters are A, B, C, D.
    """

    K: int

    def __post_init__(self):
        if int(self.K) < 2:
            raise ValidationError(f"rating scale needs K >= 2, got {self.K}")
        if self.K > len(string.ascii_uppercase):
            raise ValidationError("rating scale larger than 26 categories is not supported")

    @property
    def default(self) -> int:
        return self.K

    @property
    def labels(self) -> list[str]:
        return list(string.ascii_uppercase[: self.K])

    def label(self, category: int) -> str:
        return self.labels[self.check(category) - 1]

    def check(self, category: int) -> int:
        c = int(category)
        if not 1 <= c <= self.K:
            raise ValidationError(f"category {category!r} outside 1..{self.K}")
        return c

    def parse(self, category) -> int:
        """Accept ``3``, ``"3"`` or ``"C"`` and return the category number."""
        if isinstance(category, str):
            s = category.strip().upper()
            if s.isdigit():
                return self.check(int(s))
            if s in self.labels:
                return self.labels.index(s) + 1
            raise ValidationError(f"unknown rating category {category!r}")
        if isinstance(category, (bool, float)) and not float(category).is_integer():
            raise ValidationError(f"unknown rating category {category!r}")
        return self.check(int(category))


@dataclass(frozen=True)
class TransitionMatrix:
    p: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.array(self.p, dtype=float))

    @property
    def K(self) -> int:
        return self.p.shape[0]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Intensity matrix (1/year). ``reproduction_error`` is set when the
    generator was recovered from a transition matrix."""

    a: np.ndarray
    reproduction_error: float | None = field(default=None, compare=False)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"generator must be square, got shape {a.shape}")
        object.__setattr__(self, "a", a)
        check_generator(a)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def transition(self, t: float) -> np.ndarray:
        return scipy.linalg.expm(self.a * t)


def check_generator(a: np.ndarray, tol: float = GENERATOR_ROW_TOL) -> None:
    off = a[~np.eye(a.shape[0], dtype=bool)]
    if off.size and off.min() < -1e-12:
        raise NegativeEntry(f"negative off-diagonal intensity {off.min():.3e}")
    rs = np.abs(a.sum(axis=1)).max()
    if rs > tol * max(1.0, np.abs(a).max()):
        raise RowSumError(f"generator row sum deviates from 0 by {rs:.3e}")


def validate_transition_matrix(m: TransitionMatrix, scale: RatingScale | None = None) -> TransitionMatrix:
    p = m.p
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {p.shape}")
    if scale is not None and p.shape[0] != scale.K:
        raise ValidationError(f"matrix is {p.shape[0]}x{p.shape[0]} but the scale has K={scale.K}")
    if not np.all(np.isfinite(p)):
        raise ValidationError("transition matrix has non-finite entries")
    if p.min() < 0:
        i, j = np.unravel_index(np.argmin(p), p.shape)
        raise NegativeEntry(f"negative probability {p[i, j]} at row {i + 1}, column {j + 1}")
    if p.max() > 1:
        raise ValidationError("probability above 1")
    dev = np.abs(p.sum(axis=1) - 1.0)
    if dev.max() > ROW_SUM_TOL:
        i = int(np.argmax(dev))
        raise RowSumError(f"row {i + 1} sums to {p[i].sum():.12g}")
    if p[-1, -1] != 1.0 or np.any(p[-1, :-1] != 0):
        raise NonAbsorbingDefault("default row must be the unit vector on the last category")
    if m.horizon <= 0:
        raise ValidationError("horizon must be positive")
    return m


def regularize_generator(log_p: np.ndarray) -> np.ndarray:
    """Diagonal adjustment: clamp negative off-diagonals, reset the diagonal."""
    g = np.array(log_p, dtype=float)
    off = ~np.eye(g.shape[0], dtype=bool)
    g[off & (g < 0)] = 0.0
    np.fill_diagonal(g, 0.0)
    np.fill_diagonal(g, -g.sum(axis=1))
    return g


def generator_from_annual_matrix(m: TransitionMatrix) -> GeneratorMatrix:
    """Principal matrix logarithm followed by diagonal adjustment.

    Raises
    ------
    LogDivergence
        The logarithm could not be computed to working accuracy.
    EmbeddingFailure
        No real principal logarithm, or ``expm(G * horizon)`` misses ``m`` by
        more than ``EMBEDDING_TOL`` in some entry.
    """
    validate_transition_matrix(m)
    p = m.p
    with np.errstate(all="ignore"):
        try:
            lg, errest = scipy.linalg.logm(p, disp=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise LogDivergence(str(exc)) from exc
    if not np.all(np.isfinite(lg)) or not np.isfinite(errest) or errest > 1e-6:
        raise LogDivergence(f"matrix logarithm did not converge (error estimate {errest})")
    if np.iscomplexobj(lg):
        if np.abs(lg.imag).max() > 1e-10:
            raise EmbeddingFailure("matrix has no real principal logarithm")
        lg = lg.real
    g = regularize_generator(lg / m.horizon)
    # absorbing default stays exactly absorbing
    g[-1, :] = 0.0
    err = float(np.abs(scipy.linalg.expm(g * m.horizon) - p).max())
    if err > EMBEDDING_TOL:
        raise EmbeddingFailure(f"regularized generator reproduces the matrix only to {err:.3e}")
    log.info("generator embedding: max reproduction error %.3e", err)
    return GeneratorMatrix(g, reproduction_error=err)
