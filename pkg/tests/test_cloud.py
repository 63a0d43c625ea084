import numpy as np
import pytest

from sbflow.cloud import (
    MixtureSpec,
    ParticleCloud,
    bimodal_spec,
    cloud_from_csv,
    moments,
    sample_exact_heat,
    sample_mixture,
)
from sbflow.metrics import noise_floor, w2_empirical_1d


def test_cloud_is_immutable_and_uniform():
    c = ParticleCloud([[0.0], [1.0], [3.0]])
    assert (c.n, c.dim) == (3, 1)
    assert c.weights.sum() == 1.0
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0


@pytest.mark.parametrize("bad", [np.empty((0, 1)), [[np.nan]], [[np.inf, 0.0]]])
def test_cloud_rejects_bad_points(bad):
    with pytest.raises(ValueError):
        ParticleCloud(bad)


def test_csv_round_trip(tmp_path):
    c = sample_mixture(MixtureSpec.of([(1.0, (0.0, 1.0), 2.0)]), 17, seed=3)
    text = c.to_csv(tmp_path / "c.csv")
    assert text.splitlines()[:2] == ["dim,n", "2,17"]
    assert cloud_from_csv(tmp_path / "c.csv") == c
    assert cloud_from_csv(text) == c


@pytest.mark.parametrize(
    "items",
    [
        [(0.5, 0.0, 1.0), (0.4, 1.0, 1.0)],
        [(1.0, 0.0, 0.0)],
        [(1.5, 0.0, 1.0), (-0.5, 0.0, 1.0)],
        [(0.5, 0.0, 1.0), (0.5, (0.0, 0.0), 1.0)],
    ],
)
def test_mixture_validation(items):
    with pytest.raises(ValueError):
        MixtureSpec.of(items)


def test_single_standard_normal_variance():
    _, var = moments(sample_mixture(MixtureSpec.of([(1.0, 0.0, 1.0)]), 100_000, seed=7))
    assert abs(var - 1.0) <= 0.05


def test_bimodal_moments_within_three_sigma():
    n = 100_000
    pts = sample_mixture(bimodal_spec(), n, seed=1).points[:, 0]
    # Var of the mixture is 5; fourth central moment of 0.5N(-2,1)+0.5N(2,1) is 3 + 6*4 + 16 = 43.
    assert abs(pts.mean()) <= 3 * np.sqrt(5.0 / n)
    assert abs(pts.var() - 5.0) <= 3 * np.sqrt((43.0 - 25.0) / n)


def test_sampling_is_deterministic():
    a = sample_mixture(bimodal_spec(), 1000, seed=5)
    b = sample_mixture(bimodal_spec(), 1000, seed=5)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, sample_mixture(bimodal_spec(), 1000, seed=6).points)


def test_exact_heat_inflates_variance():
    _, var = moments(sample_exact_heat(MixtureSpec.of([(1.0, 0.0, 1.0)]), 3.0, 100_000, seed=2))
    assert var == pytest.approx(4.0, rel=0.03)
    _, var = moments(sample_exact_heat(bimodal_spec(), 5.0, 100_000, seed=2))
    assert var == pytest.approx(10.0, rel=0.03)
    assert bimodal_spec().inflate(5.0).total_variance() == pytest.approx(10.0)


def test_exact_heat_at_zero_matches_mixture_sampler():
    assert sample_exact_heat(bimodal_spec(), 0.0, 50, 9) == sample_mixture(bimodal_spec(), 50, 9)


def test_exact_heat_rejects_negative_time():
    with pytest.raises(ValueError):
        sample_exact_heat(bimodal_spec(), -0.1, 10, 0)


def test_heat_semigroup_in_distribution():
    spec, s, t, n = bimodal_spec(), 1.5, 2.0, 10_000
    a = sample_exact_heat(spec, s + t, n, seed=11)
    b = sample_exact_heat(spec.inflate(s), t, n, seed=12)
    assert w2_empirical_1d(a, b) <= 3 * noise_floor(spec, s + t, n, trials=5, seed=13)


@pytest.mark.parametrize(
    "pts, mean, var",
    [([[0.0]], 0.0, 0.0), ([[-1.0], [1.0]], 0.0, 1.0), ([[0.0], [2.0]], 1.0, 1.0)],
)
def test_moments_examples(pts, mean, var):
    m, v = moments(ParticleCloud(pts))
    assert m[0] == mean and v == var


def test_score_matches_log_density_derivative():
    spec = bimodal_spec().inflate(0.7)
    x = np.linspace(-6, 6, 41)
    h = 1e-5
    fd = (np.log(spec.density(x + h)) - np.log(spec.density(x - h))) / (2 * h)
    np.testing.assert_allclose(spec.score(x), fd, atol=1e-7)
