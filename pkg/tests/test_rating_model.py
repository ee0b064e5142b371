import logging

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from ratingxva.errors import EmbeddingFailure, NegativeEntry, NonAbsorbingDefault, RowSumError, ValidationError
from ratingxva.presets import P1, P2, P3
from ratingxva.rating_model import (
    GeneratorMatrix,
    RatingScale,
    TransitionMatrix,
    generator_from_annual_matrix,
    regularize_generator,
    validate_transition_matrix,
)


class TestRatingScale:
    def test_labels_and_parse(self):
        s = RatingScale(4)
        assert s.labels == ["A", "B", "C", "D"]
        assert s.default == 4
        assert s.parse("c") == 3
        assert s.parse("2") == 2
        assert s.parse(4) == 4

    @pytest.mark.parametrize("bad", ["E", 0, 5, 1.5])
    def test_parse_rejects(self, bad):
        with pytest.raises(ValidationError):
            RatingScale(4).parse(bad)

    def test_needs_two_categories(self):
        with pytest.raises(ValidationError):
            RatingScale(1)


class TestValidate:
    @pytest.mark.parametrize("p", [P1, P2, P3, np.eye(4)])
    def test_accepts(self, p):
        m = validate_transition_matrix(TransitionMatrix(p), RatingScale(4))
        assert m.K == 4

    def test_row_sum(self):
        p = P1.copy()
        p[0, 0] = 0.91
        with pytest.raises(RowSumError):
            validate_transition_matrix(TransitionMatrix(p))

    def test_negative(self):
        p = P1.copy()
        p[0, 1], p[0, 0] = -0.01, 0.99
        with pytest.raises(NegativeEntry):
            validate_transition_matrix(TransitionMatrix(p))

    def test_default_absorbing(self):
        p = P1.copy()
        p[3] = [0.1, 0.0, 0.0, 0.9]
        with pytest.raises(NonAbsorbingDefault):
            validate_transition_matrix(TransitionMatrix(p))

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            validate_transition_matrix(TransitionMatrix(np.eye(3)), RatingScale(4))


class TestGenerator:
    def test_identity_gives_zero(self):
        g = generator_from_annual_matrix(TransitionMatrix(np.eye(4)))
        assert np.array_equal(g.a, np.zeros((4, 4)))

    def test_two_state_closed_form(self):
        g = generator_from_annual_matrix(TransitionMatrix([[0.9, 0.1], [0.0, 1.0]]))
        lam = np.log(0.9)
        np.testing.assert_allclose(g.a, [[lam, -lam], [0.0, 0.0]], atol=1e-14)
        assert np.exp(g.a[0, 0]) == pytest.approx(0.9, abs=1e-14)

    @pytest.mark.parametrize("p", [P1, P2, P3])
    def test_preset_matrices_embed(self, p, caplog):
        with caplog.at_level(logging.INFO, logger="ratingxva.rating_model"):
            g = generator_from_annual_matrix(TransitionMatrix(p))
        err = np.abs(scipy.linalg.expm(g.a) - p).max()
        assert err <= 1e-3
        assert g.reproduction_error == pytest.approx(err)
        assert "reproduction error" in caplog.text
        off = g.a[~np.eye(4, dtype=bool)]
        assert off.min() >= 0
        assert np.abs(g.a.sum(axis=1)).max() <= 1e-10
        assert np.all(g.a[-1] == 0)

    @pytest.mark.parametrize("x", [1.0, 0.7])
    def test_no_real_logarithm(self, x):
        # negative eigenvalue 1 - 2x: no real generator exists
        p = np.array([[1 - x, x, 0.0], [x, 1 - x, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(EmbeddingFailure):
            generator_from_annual_matrix(TransitionMatrix(p))

    def test_regularize(self):
        g = regularize_generator(np.array([[-0.1, 0.12, -0.02], [0.05, -0.05, 0.0], [0.0, 0.0, 0.0]]))
        np.testing.assert_allclose(g, [[-0.12, 0.12, 0.0], [0.05, -0.05, 0.0], [0, 0, 0]])

    def test_generator_matrix_rejects_bad_rows(self):
        with pytest.raises(ValidationError):
            GeneratorMatrix([[-1.0, 0.5], [0.0, 0.0]])


@st.composite
def generators(draw, K=4):
    a = np.zeros((K, K))
    for i in range(K - 1):
        for j in range(K):
            if j != i:
                a[i, j] = draw(st.floats(0.0, 0.3))
    np.fill_diagonal(a, -a.sum(axis=1))
    return a


@given(generators())
@settings(max_examples=40, deadline=None)
def test_roundtrip_through_annual_matrix(a):
    """A genuine generator is recovered from its own one-year matrix."""
    p = scipy.linalg.expm(a)
    p[-1] = [0, 0, 0, 1]
    p /= p.sum(axis=1, keepdims=True)
    g = generator_from_annual_matrix(TransitionMatrix(p))
    assert np.abs(scipy.linalg.expm(g.a) - p).max() <= 1e-6
    assert np.abs(g.a.sum(axis=1)).max() <= 1e-10
