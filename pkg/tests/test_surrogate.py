import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from budgetrank.errors import DuplicateObservationError
from budgetrank.surrogate import (
    Observation,
    SurrogateModel,
    estimate_utility,
    estimation_error,
    init_weights,
    weight_dump_lines,
)


def _obs(doc_id, x, y, batch=0):
    return Observation(doc_id, np.asarray(x, dtype=float), y, batch)


class TestInitWeights:
    def test_seeded_and_reproducible(self):
        a = init_weights(5, 42)
        b = init_weights(5, 42)
        c = init_weights(5, 43)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_matches_generator_oracle(self):
        expected = np.random.default_rng(7).standard_normal(4)
        assert np.array_equal(init_weights(4, 7), expected)

    def test_invalid_dim(self):
        with pytest.raises(ValueError):
            init_weights(0, 1)


class TestPointwiseFunctions:
    def test_utility_is_dot_product(self):
        w = np.array([1.0, -2.0, 0.5])
        x = np.array([3.0, 1.0, 4.0])
        assert estimate_utility(w, x) == pytest.approx(3.0 - 2.0 + 2.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            estimate_utility(np.ones(2), np.ones(3))

    def test_error_hand_value(self):
        w = np.array([0.5, 0.5])
        x = np.array([1.0, 1.0])
        # estimate 1.0, teacher 0.4 -> 0.5 * 0.36
        assert estimation_error(w, x, 0.4) == pytest.approx(0.18)

    def test_error_zero_at_perfect_fit(self):
        w = np.array([2.0, -1.0])
        x = np.array([1.0, 3.0])
        assert estimation_error(w, x, float(w @ x)) == 0.0

    @given(
        hnp.arrays(np.float64, 3, elements=st.floats(-5, 5)),
        hnp.arrays(np.float64, 3, elements=st.floats(-5, 5)),
        st.floats(-5, 5),
    )
    def test_error_nonnegative(self, w, x, y):
        assert estimation_error(w, x, y) >= 0.0


class TestSurrogateModel:
    def test_create_uses_seeded_init(self):
        model = SurrogateModel.create(dim=4, seed=11)
        assert np.array_equal(model.w, init_weights(4, 11))

    def test_exact_recovery_without_regularization(self):
        rng = np.random.default_rng(0)
        w_true = rng.standard_normal(4)
        x = rng.standard_normal((12, 4))
        y = x @ w_true
        model = SurrogateModel.create(dim=4, seed=1, ridge=0.0)
        model.update([_obs(f"d{i}", x[i], float(y[i])) for i in range(12)])
        assert model.w == pytest.approx(w_true, abs=1e-9)
        assert not model.used_pseudoinverse

    def test_ridge_solution_matches_closed_form(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((10, 3))
        y = rng.standard_normal(10)
        ridge = 0.5
        model = SurrogateModel.create(dim=3, seed=0, ridge=ridge)
        model.update([_obs(f"d{i}", x[i], float(y[i])) for i in range(10)])
        expected = np.linalg.solve(x.T @ x + ridge * np.eye(3), x.T @ y)
        assert model.w == pytest.approx(expected, abs=1e-12)

    def test_ridge_solution_minimizes_objective(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((8, 3))
        y = rng.standard_normal(8)
        model = SurrogateModel.create(dim=3, seed=0, ridge=0.1)
        model.update([_obs(f"d{i}", x[i], float(y[i])) for i in range(8)])
        best = model.training_loss()
        for _ in range(20):
            perturbed = model.w + rng.normal(0, 0.01, size=3)
            assert model.training_loss(perturbed) >= best

    def test_cumulative_fit_spans_all_batches(self):
        rng = np.random.default_rng(9)
        w_true = rng.standard_normal(3)
        x = rng.standard_normal((9, 3))
        y = x @ w_true
        model = SurrogateModel.create(dim=3, seed=2, ridge=0.0)
        model.update([_obs(f"a{i}", x[i], float(y[i]), 0) for i in range(4)])
        model.update([_obs(f"b{i}", x[4 + i], float(y[4 + i]), 1) for i in range(5)])
        assert model.w == pytest.approx(w_true, abs=1e-9)
        assert len(model.observations) == 9

    def test_batch_only_mode_ignores_history(self):
        x1 = np.eye(2)
        x2 = np.eye(2)
        model = SurrogateModel.create(dim=2, seed=0, ridge=0.0, batch_only=True)
        model.update([_obs("a0", x1[0], 1.0, 0), _obs("a1", x1[1], 1.0, 0)])
        model.update([_obs("b0", x2[0], 5.0, 1), _obs("b1", x2[1], 5.0, 1)])
        # Fit to the newest batch only: identity design -> w == y.
        assert model.w == pytest.approx([5.0, 5.0])

    def test_rank_deficient_uses_minimum_norm(self):
        # One observation, two dims: infinitely many exact fits.
        model = SurrogateModel.create(dim=2, seed=0, ridge=0.0)
        model.update([_obs("d0", [1.0, 1.0], 2.0)])
        assert model.used_pseudoinverse
        assert model.w == pytest.approx([1.0, 1.0])  # minimum-norm solution

    def test_duplicate_document_rejected(self):
        model = SurrogateModel.create(dim=2, seed=0)
        model.update([_obs("d0", [1.0, 0.0], 1.0)])
        with pytest.raises(DuplicateObservationError, match="d0"):
            model.update([_obs("d0", [0.0, 1.0], 0.5)])

    def test_duplicate_rejection_leaves_state_intact(self):
        model = SurrogateModel.create(dim=2, seed=0)
        model.update([_obs("d0", [1.0, 0.0], 1.0)])
        w_before = model.w.copy()
        with pytest.raises(DuplicateObservationError):
            model.update([_obs("new", [0.0, 1.0], 0.5), _obs("d0", [1.0, 1.0], 0.2)])
        assert np.array_equal(model.w, w_before)
        assert len(model.observations) == 1

    def test_dimension_mismatch_rejected(self):
        model = SurrogateModel.create(dim=3, seed=0)
        with pytest.raises(ValueError):
            model.update([_obs("d0", [1.0, 2.0], 1.0)])

    def test_empty_update_is_noop(self):
        model = SurrogateModel.create(dim=2, seed=0)
        w_before = model.w.copy()
        model.update([])
        assert np.array_equal(model.w, w_before)

    def test_utilities_matrix_product(self):
        model = SurrogateModel.create(dim=3, seed=4)
        rows = np.random.default_rng(1).standard_normal((5, 3))
        assert model.utilities(rows) == pytest.approx(rows @ model.w)
        with pytest.raises(ValueError):
            model.utilities(np.ones((2, 4)))


class TestWeightDump:
    def test_lines_format(self):
        lines = weight_dump_lines("q1", np.array([0.25, -1.5]), ["Q", "RM3"])
        assert lines == ["q1\tQ\t0.25", "q1\tRM3\t-1.5"]

    def test_label_count_mismatch(self):
        with pytest.raises(ValueError):
            weight_dump_lines("q1", np.ones(3), ["a", "b"])
