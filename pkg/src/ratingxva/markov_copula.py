"""Joint rating generators built from marginal generators (Markov copula).

Product states are indexed row-major: the pair ``(i, h)`` of categories maps
to ``(i - 1) * K + (h - 1)`` and the triple ``(i, h, l)`` to
``((i - 1) * K + (h - 1)) * K + (l - 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeIntensity, ValidationError
from .rating_model import GeneratorMatrix, RatingScale

MAX_TILT = 50.0


@dataclass(frozen=True)
class CopulaSpec:
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"copula alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class MeasureChangeSpec:
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha1) and np.isfinite(self.alpha2)):
            raise ValidationError("measure-change exponents must be finite")
        if abs(self.alpha1) > MAX_TILT or abs(self.alpha2) > MAX_TILT:
            raise ValidationError(f"measure-change exponents limited to |a| <= {MAX_TILT}")


@dataclass(frozen=True)
class JointGenerator:
    scale: RatingScale
    n_components: int
    generator: GeneratorMatrix

    @property
    def a(self) -> np.ndarray:
        return self.generator.a

    @property
    def n_states(self) -> int:
        return self.scale.K ** self.n_components

    def encode(self, *categories: int) -> int:
        if len(categories) != self.n_components:
            raise ValidationError(f"expected {self.n_components} categories, got {len(categories)}")
        return encode_state(categories, self.scale.K)

    def decode(self, state: int) -> tuple[int, ...]:
        return decode_state(state, self.scale.K, self.n_components)

    def marginal(self, t: float, component: int) -> np.ndarray:
        """Transition matrix of one component at horizon ``t`` read off the joint chain."""
        return marginalize(self.generator.transition(t), self.scale.K, self.n_components, component)


def encode_state(categories, K: int) -> int:
    s = 0
    for c in categories:
        s = s * K + (int(c) - 1)
    return s


def decode_state(state: int, K: int, n: int) -> tuple[int, ...]:
    out = []
    for _ in range(n):
        out.append(state % K + 1)
        state //= K
    return tuple(reversed(out))


def component_values(states: np.ndarray, K: int, n: int, component: int) -> np.ndarray:
    """Category (1-based) of ``component`` for an array of product states."""
    return (np.asarray(states) // K ** (n - 1 - component)) % K + 1


def marginalize(joint_p: np.ndarray, K: int, n: int, component: int) -> np.ndarray:
    """Collapse a joint transition matrix to the law of one component.

    Rows are taken with the other components fixed at category 1; for a
    Markov copula every choice gives the same rows, which is what the
    consistency checks verify by calling :func:`marginal_rows`.
    """
    return marginal_rows(joint_p, K, n, component)[(0,) * (n - 1)]


def marginal_rows(joint_p: np.ndarray, K: int, n: int, component: int) -> dict:
    """Map each configuration of the other components to the K x K marginal."""
    shape = (K,) * n
    p = joint_p.reshape(shape + shape)
    others = [c for c in range(n) if c != component]
    # sum over target coordinates of the other components
    p = p.sum(axis=tuple(n + c for c in others))
    out = {}
    for idx in np.ndindex(*(K,) * len(others)):
        sl = [slice(None)] * n
        for c, v in zip(others, idx):
            sl[c] = v
        out[idx] = p[tuple(sl)]
    return out


def _check_marginals(g1: GeneratorMatrix, g2: GeneratorMatrix) -> int:
    if g1.n != g2.n:
        raise ValidationError("marginal generators must share the rating scale")
    return g1.n


def build_joint_generator(g1: GeneratorMatrix, g2: GeneratorMatrix, spec: CopulaSpec) -> JointGenerator:
    """Bivariate generator with common jumps to the same category.

    Off-diagonal entries: a simultaneous move ``(i, h) -> (j, j)`` with
    ``i != j``, ``h != j`` has intensity ``alpha * min(a1[i, j], a2[h, j])``;
    other simultaneous moves are impossible; single moves get whatever
    intensity is left so that each component keeps its marginal law.
    """
    K = _check_marginals(g1, g2)
    a1, a2, alpha = g1.a, g2.a, float(spec.alpha)
    A = np.zeros((K, K, K, K))  # [i, h, j, k]
    for i in range(K):
        for h in range(K):
            for j in range(K):
                if j == i:
                    continue
                common = alpha * min(a1[i, j], a2[h, j]) if j != h else 0.0
                if common > 0.0:
                    A[i, h, j, j] = common
                A[i, h, j, h] = a1[i, j] - common
            for k in range(K):
                if k == h:
                    continue
                common = alpha * min(a1[i, k], a2[h, k]) if k != i else 0.0
                A[i, h, i, k] = a2[h, k] - common
    A = A.reshape(K * K, K * K)
    if A.min() < -1e-12:
        raise NegativeIntensity(f"single-move intensity {A.min():.3e} < 0: copula system has no positive solution")
    A[A < 0] = 0.0
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -A.sum(axis=1))
    return JointGenerator(RatingScale(K), 2, GeneratorMatrix(A))


def kron_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, np.eye(b.shape[0])) + np.kron(np.eye(a.shape[0]), b)


def build_joint_generator_3(
    g1: GeneratorMatrix, g2: GeneratorMatrix, g3: GeneratorMatrix, spec: CopulaSpec
) -> JointGenerator:
    """Counterparty and investor coupled as in :func:`build_joint_generator`;
    the reference entity migrates independently of both."""
    K = _check_marginals(g1, g2)
    if g3.n != K:
        raise ValidationError("marginal generators must share the rating scale")
    pair = build_joint_generator(g1, g2, spec)
    A = kron_sum(pair.a, g3.a)
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -A.sum(axis=1))
    return JointGenerator(RatingScale(K), 3, GeneratorMatrix(A))


def state_weights(K: int, n: int, spec: MeasureChangeSpec) -> np.ndarray:
    """``h`` over product states, ``exp(alpha1 * i + alpha2 * j)``; a third
    component contributes a unit factor."""
    cats = np.arange(1, K + 1, dtype=float)
    w = np.exp(spec.alpha1 * cats)[:, None] * np.exp(spec.alpha2 * cats)[None, :]
    w = w.reshape(-1)
    if n == 3:
        w = np.repeat(w, K)
    elif n != 2:
        raise ValidationError("measure change defined for 2 or 3 components")
    return w


def change_measure(g: JointGenerator, spec: MeasureChangeSpec) -> JointGenerator:
    """Exponential change of measure ``a_uv * h_v / h_u`` off the diagonal."""
    h = state_weights(g.scale.K, g.n_components, spec)
    A = g.a * (h[None, :] / h[:, None])
    np.fill_diagonal(A, 0.0)
    np.fill_diagonal(A, -A.sum(axis=1))
    return JointGenerator(g.scale, g.n_components, GeneratorMatrix(A))
