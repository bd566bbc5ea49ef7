import io
import math

import numpy as np
import pytest

from oscombine import boundary_sim as bs
from oscombine.core import Average, OrderStat, WeightedAverage
from oscombine.errors import InputError
from oscombine.order_stats import UNIFORM

LIN = bs.LocalLinear(2.0)


def test_single_classifier_variance():
    samples = bs.simulate_offsets(LIN, bs.NoiseSpec(0.1), Average(), 100_000, seed=1)
    m = bs.empirical_moments(samples)
    assert m.sample_variance == pytest.approx(0.005, rel=0.05)
    assert abs(m.m1) < 4 * m.m1_se


def test_average_four_ratio():
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 4), Average(), 100_000, seed=2)
    assert rep.empirical["variance_ratio"] == pytest.approx(0.25, rel=0.10)


def test_max_three():
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 3), OrderStat("max"), 100_000, seed=3)
    assert abs(rep.empirical["variance_ratio"] - 0.560) < 0.02


@pytest.mark.parametrize("b, m1, m2", [([1.0, -1.0], 0.0, 1.0), ([0.1, 0.3], 0.2, 0.05)])
def test_empirical_moments_examples(b, m1, m2):
    m = bs.empirical_moments(bs.OffsetSamples(np.array(b), 0, len(b)))
    assert m.m1 == pytest.approx(m1)
    assert m.m2 == pytest.approx(m2)


def test_empirical_moments_needs_two():
    with pytest.raises(InputError):
        bs.empirical_moments(bs.OffsetSamples(np.array([0.1]), 0, 1))


def test_local_linear_added_error_identity():
    samples = bs.simulate_offsets(LIN, bs.NoiseSpec(0.1, 3), OrderStat(2), 5_000, seed=4)
    m = bs.empirical_moments(samples)
    assert bs.empirical_added_error(samples, LIN) == pytest.approx(0.5 * LIN.s * m.m2, rel=1e-12)


def test_zero_noise_gives_zero_offset():
    for model in (LIN, bs.logistic_pair(4.0)):
        samples = bs.simulate_offsets(model, bs.NoiseSpec(0.0, 3), Average(), 100, seed=5)
        assert np.all(samples.b_values == 0.0)
        assert bs.empirical_added_error(samples, model) == 0.0


def test_bias_pass_through():
    noise = bs.NoiseSpec(0.1, 1, biases_i=(0.2,), biases_j=(0.0,))
    samples = bs.simulate_offsets(LIN, noise, Average(), 100_000, seed=6)
    m = bs.empirical_moments(samples)
    assert abs(m.m1 - 0.1) < 4 * m.m1_se


def test_full_correlation_collapses_to_single():
    rng = np.random.default_rng(7)
    errs = bs.draw_errors(rng, 1000, bs.NoiseSpec(0.1, 5, delta=1.0))
    np.testing.assert_allclose(errs, np.repeat(errs[:, :1, :], 5, axis=1), atol=1e-15)
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 5, delta=1.0), OrderStat("median"), 20_000, seed=7)
    assert rep.empirical["variance_ratio"] == pytest.approx(1.0, rel=0.05)


def test_seed_determinism_across_workers():
    noise = bs.NoiseSpec(0.1, 5, delta=0.3)
    a = bs.simulate_offsets(LIN, noise, Average(), 200_000, seed=8, workers=1)
    b = bs.simulate_offsets(LIN, noise, Average(), 200_000, seed=8, workers=3)
    np.testing.assert_array_equal(a.b_values, b.b_values)
    c = bs.simulate_offsets(LIN, noise, Average(), 200_000, seed=9)
    assert not np.array_equal(a.b_values, c.b_values)


@pytest.mark.parametrize("n, delta", [(4, 0.5), (5, -0.2), (3, 0.0)])
def test_equicorrelation(n, delta):
    rng = np.random.default_rng(10)
    errs = bs.draw_errors(rng, 200_000, bs.NoiseSpec(1.0, n, delta=delta))
    x = errs[:, :, 0]
    c = np.corrcoef(x, rowvar=False)
    off = c[~np.eye(n, dtype=bool)]
    # standard error of a correlation estimate is about (1 - r^2) / sqrt(count)
    se = (1 - delta**2) / math.sqrt(x.shape[0])
    assert np.all(np.abs(off - delta) < 4 * se + 1e-3)
    np.testing.assert_allclose(x.var(axis=0), 1.0, rtol=0.02)
    # classes stay independent
    cross = np.corrcoef(errs[:, 0, 0], errs[:, 0, 1])[0, 1]
    assert abs(cross) < 4 / math.sqrt(x.shape[0])


def test_uniform_noise_standardised():
    rng = np.random.default_rng(11)
    errs = bs.draw_errors(rng, 100_000, bs.NoiseSpec(0.5, 2, dist=UNIFORM))
    assert errs.mean() == pytest.approx(0.0, abs=0.01)
    assert errs.std() == pytest.approx(0.5, rel=0.01)
    assert np.abs(errs).max() <= 0.5 * math.sqrt(3) + 1e-12


def test_rejections_counted_and_warned():
    model = bs.logistic_pair(4.0, window=0.01)
    samples = bs.simulate_offsets(model, bs.NoiseSpec(0.1, 1), Average(), 2_000, seed=12)
    assert samples.rejected > 0
    assert samples.trials + samples.rejected == 2_000
    assert samples.warnings and "rejected" in samples.warnings[0]
    assert np.all(np.abs(samples.b_values) <= 0.01)


def test_default_window_rejects_nothing():
    samples = bs.simulate_offsets(bs.logistic_pair(4.0), bs.NoiseSpec(0.05, 3), Average(), 5_000, seed=13)
    assert samples.rejected == 0 and not samples.warnings


def test_explicit_matches_linear_for_small_noise():
    model = bs.logistic_pair(4.0)
    noise = bs.NoiseSpec(0.01, 1)
    samples = bs.simulate_offsets(model, noise, Average(), 20_000, seed=14)
    m = bs.empirical_moments(samples)
    exact = bs.empirical_added_error(samples, model)
    assert exact == pytest.approx(0.5 * model.s * m.m2, rel=0.05)


def test_explicit_requires_crossing():
    with pytest.raises(InputError):
        bs.TwoClassExplicit(lambda x: 0.6 + 0 * x, lambda x: 0.4 + 0 * x)
    with pytest.raises(InputError):
        bs.TwoClassExplicit(lambda x: 0.5 + x, lambda x: 0.5 - x)


def test_slope_estimated_by_difference():
    model = bs.TwoClassExplicit(lambda x: 0.5 - 0.3 * np.asarray(x), lambda x: 0.5 + 0.3 * np.asarray(x))
    assert model.s == pytest.approx(0.6, rel=1e-8)


def test_csv_export():
    samples = bs.OffsetSamples(np.array([0.25, -0.5]), 0, 2)
    buf = io.StringIO()
    samples.to_csv(buf)
    assert buf.getvalue() == "b\n0.25\n-0.5\n"


def test_validation():
    with pytest.raises(InputError):
        bs.simulate_offsets(LIN, bs.NoiseSpec(0.1, 3), Average(), 0)
    with pytest.raises(InputError):
        bs.simulate_offsets(LIN, bs.NoiseSpec(0.1, 3), OrderStat(5), 10)
    with pytest.raises(InputError):
        bs.NoiseSpec(0.1, 3, biases_i=(0.1,))
    with pytest.raises(InputError):
        bs.LocalLinear(0.0)


def test_compare_average_five():
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 5), Average(), 100_000, seed=15)
    assert 0.95 <= rep.ratio <= 1.05
    assert rep.predicted.reduction_factor == pytest.approx(0.2)


def test_compare_correlated_average():
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 7, delta=0.4), Average(), 100_000, seed=16)
    assert abs(rep.empirical["reduction_factor"] - 3.4 / 7) < 0.03


def test_compare_median_five():
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 5), OrderStat("median"), 100_000, seed=17)
    assert abs(rep.empirical["reduction_factor"] - 0.287) < 0.02
    assert rep.predicted.reduction_factor == pytest.approx(0.2868, abs=5e-4)


def test_prediction_unavailable_cases():
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 5, delta=0.2), OrderStat("max"), 1_000, seed=18)
    assert rep.predicted is None and rep.ratio is None
    assert any("unavailable" in w for w in rep.warnings)
    rep = bs.compare_to_theory(LIN, bs.NoiseSpec(0.1, 2), WeightedAverage((0.3, 0.7)), 1_000, seed=18)
    assert rep.predicted is None
    assert rep.to_dict()["predicted"] is None
