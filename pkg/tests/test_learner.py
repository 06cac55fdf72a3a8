import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedauction.agents import NoiseModel, sample_simplex, utility_from_uniform
from feedauction.core import DimensionMismatchError, derive_stream
from feedauction.learner import SingularDesignError, ValueModel, estimate_mean_from_reports

from helpers import dense_ridge_solve


def test_orthogonal_two_point_fit_is_exact():
    model = ValueModel(2, ridge=0.0)
    model.ingest(np.array([1.0, 0.0]), True)
    model.ingest(np.array([0.0, 1.0]), False)
    assert model.fit() == pytest.approx([1.0, 0.0], abs=1e-12)


def test_empty_model_with_ridge_gives_zero_coefficients():
    model = ValueModel(3)
    assert model.fit() == pytest.approx([0.0, 0.0, 0.0], abs=0.0)


def test_predictions_fall_back_to_prior_until_enough_samples():
    model = ValueModel(2, prior_estimate=0.37)
    context = np.array([0.5, 0.5])
    assert model.predict(context) == 0.37
    model.ingest(context, True)
    assert model.predict(context) == 0.37  # one sample, min_samples defaults to dim
    model.ingest(np.array([1.0, 0.0]), False)
    assert model.predict(context) != 0.37


def test_predictions_clamped_to_unit_interval():
    model = ValueModel(1, ridge=0.0, min_samples=1)
    model.ingest(np.array([1.0]), 3.0)
    assert model.predict(np.array([1.0])) == 1.0
    model2 = ValueModel(1, ridge=0.0, min_samples=1)
    model2.ingest(np.array([1.0]), -2.0)
    assert model2.predict(np.array([1.0])) == 0.0


def test_singular_unregularized_design_raises():
    model = ValueModel(2, ridge=0.0)
    model.ingest(np.array([1.0, 0.0]), True)  # rank 1
    with pytest.raises(SingularDesignError):
        model.fit()


def test_dimension_mismatch_rejected():
    model = ValueModel(3)
    with pytest.raises(DimensionMismatchError):
        model.ingest(np.array([1.0, 2.0]), True)
    with pytest.raises(DimensionMismatchError):
        model.predict(np.array([1.0, 2.0]))
    with pytest.raises(DimensionMismatchError):
        model.ingest_batch(np.ones((4, 2)), np.ones(4))
    with pytest.raises(DimensionMismatchError):
        model.ingest_batch(np.ones((4, 3)), np.ones(5))


def test_batch_ingestion_matches_incremental():
    rng = np.random.Generator(np.random.PCG64(5))
    contexts = rng.random((40, 4))
    targets = rng.random(40)
    one = ValueModel(4)
    for w, y in zip(contexts, targets):
        one.ingest(w, y)
    other = ValueModel(4)
    other.ingest_batch(contexts, targets)
    assert one.sample_count == other.sample_count == 40
    assert np.allclose(one.gram, other.gram, atol=1e-12)
    assert np.allclose(one.fit(), other.fit(), atol=1e-12)


def test_coefficients_match_dense_oracle_on_random_instances():
    rng = np.random.Generator(np.random.PCG64(11))
    for _ in range(10):
        design = rng.random((12, 3))
        targets = (rng.random(12) < 0.5).astype(float)
        model = ValueModel(3)
        model.ingest_batch(design, targets)
        expected = dense_ridge_solve(design, targets, model.ridge)
        assert model.fit() == pytest.approx(expected, abs=1e-8)


def test_scaling_contexts_scales_coefficients_inversely():
    rng = np.random.Generator(np.random.PCG64(3))
    design = rng.random((6, 4)) + 0.1
    targets = rng.random(6)
    base = ValueModel(4, ridge=0.0)
    base.ingest_batch(design, targets)
    scaled = ValueModel(4, ridge=0.0)
    scaled.ingest_batch(design * 10.0, targets)
    assert scaled.fit() == pytest.approx(base.fit() / 10.0, rel=1e-9)


def test_held_out_error_improves_as_samples_double():
    # Mean held-out squared error over 20 seeds should not increase when the
    # training set doubles.
    sizes = [100, 200, 400, 800]
    noise = NoiseModel("truncated_uniform", 0.2)
    errors = np.zeros(len(sizes))
    for seed in range(20):
        theta = derive_stream(seed, "theta").random(4)
        contexts = sample_simplex(derive_stream(seed, "w"), (sizes[-1],), 4)
        means = contexts @ theta
        utilities = utility_from_uniform(
            means, derive_stream(seed, "u").random(sizes[-1]), noise
        )
        prices = derive_stream(seed, "c").random(sizes[-1])
        answers = (utilities >= prices).astype(float)
        held_out = sample_simplex(derive_stream(seed, "held"), (400,), 4)
        true_held = held_out @ theta
        for k, size in enumerate(sizes):
            model = ValueModel(4)
            model.ingest_batch(contexts[:size], answers[:size])
            predictions = np.clip(held_out @ model.fit(), 0.0, 1.0)
            errors[k] += np.mean((predictions - true_held) ** 2)
    errors /= 20
    assert np.all(np.diff(errors) <= 1e-12), errors


def test_report_and_utility_regressions_agree_closely():
    # With uniform comparison prices the yes/no answers have the same
    # conditional mean as the utilities, so the two fits converge together.
    noise = NoiseModel("truncated_uniform", 0.2)
    theta = derive_stream(0, "theta").random(5)
    contexts = sample_simplex(derive_stream(0, "w"), (20_000,), 5)
    means = contexts @ theta
    utilities = utility_from_uniform(means, derive_stream(0, "u").random(20_000), noise)
    prices = derive_stream(0, "c").random(20_000)
    answers = (utilities >= prices).astype(float)
    from_reports = ValueModel(5)
    from_reports.ingest_batch(contexts, answers)
    from_values = ValueModel(5)
    from_values.ingest_batch(contexts, utilities)
    grid = sample_simplex(derive_stream(99, "grid"), (1000,), 5)
    gap = np.abs(
        np.clip(grid @ from_reports.fit(), 0, 1) - np.clip(grid @ from_values.fit(), 0, 1)
    ).max()
    assert gap < 0.05


def test_snapshot_and_serialization_round_trip():
    model = ValueModel(2, ridge=1e-4, prior_estimate=0.3, min_samples=5)
    rng = np.random.Generator(np.random.PCG64(8))
    model.ingest_batch(rng.random((9, 2)), rng.random(9))
    coef, count = model.snapshot()
    assert count == 9
    rebuilt = ValueModel.from_dict(model.to_dict())
    assert rebuilt.sample_count == 9
    assert rebuilt.min_samples == 5
    assert np.allclose(rebuilt.coefficients, coef, atol=0.0)
    context = np.array([0.4, 0.6])
    assert rebuilt.predict(context) == model.predict(context)


class TestEstimateMeanFromReports:
    def test_exact_fraction(self):
        samples = [(0.1, True), (0.9, False), (0.5, True), (0.3, True)]
        assert estimate_mean_from_reports(samples) == 0.75

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            estimate_mean_from_reports([])

    def test_price_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            estimate_mean_from_reports([(1.2, True)])

    def test_recovers_mean_of_constant_utility(self):
        stream = derive_stream(21, "prices")
        prices = stream.random(50_000)
        samples = [(c, 0.4 >= c) for c in prices]
        assert estimate_mean_from_reports(samples) == pytest.approx(0.4, abs=0.01)


@given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=50))
@settings(max_examples=50, deadline=None)
def test_estimate_stays_in_unit_interval(prices):
    samples = [(c, c < 0.5) for c in prices]
    assert 0.0 <= estimate_mean_from_reports(samples) <= 1.0
