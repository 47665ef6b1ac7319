import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tokenwealth.analysis import (
    GammaPrediction,
    WealthSample,
    effective_dimension,
    equilibrium_detect,
    fit_exponential,
    fit_gamma,
    fit_pareto_tail,
    gini,
    histogram,
    temperature,
    top_share,
)
from tokenwealth.errors import LambdaOutOfRange, NotConverged, SampleTooSmall, TailTooSmall, ZeroVariance
from tokenwealth.kinetic import KineticModel, run_kinetic


def pareto(rng, alpha, size, x_min=1.0):
    return x_min * (rng.pareto(alpha, size) + 1.0)


def test_effective_dimension_examples():
    assert effective_dimension(0.5) == 4.0
    assert effective_dimension(0.8) == pytest.approx(13.0)
    assert effective_dimension(1e-12) == pytest.approx(1.0)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(LambdaOutOfRange):
            effective_dimension(bad)


def test_temperature_examples():
    assert temperature(0.5, 10.0) == 2.5
    assert temperature(0.25, 10.0) == 5.0
    assert temperature(0.6, 10.0) < temperature(0.4, 10.0)
    with pytest.raises(LambdaOutOfRange):
        temperature(1.2, 10.0)


@given(st.floats(1e-6, 1 - 1e-6), st.floats(1e-3, 1e6))
def test_equipartition_identity(lam, mean):
    assert temperature(lam, mean) * effective_dimension(lam) == pytest.approx(mean, rel=1e-12)


@given(st.floats(0.01, 0.98), st.floats(0.001, 0.01))
def test_temperature_decreasing(lam, d):
    assert temperature(min(lam + d, 0.999), 10.0) < temperature(lam, 10.0)


def test_gamma_prediction_moments():
    p = GammaPrediction.for_lambda(0.5, 10.0)
    assert p.D_half == 4.0 and p.T_lambda == 2.5
    assert p.skewness == pytest.approx(2 * math.sqrt(2) / math.sqrt(8)) and p.excess_kurtosis == 1.5
    # skewness of Gamma(k) is 2/sqrt(k); excess kurtosis 6/k
    assert p.skewness == pytest.approx(2 / math.sqrt(p.D_half)) and p.excess_kurtosis == pytest.approx(6 / p.D_half)
    assert GammaPrediction.for_lambda(0.99, 1.0).skewness < GammaPrediction.for_lambda(0.5, 1.0).skewness


def test_fit_exponential_synthetic():
    x = np.random.default_rng(0).exponential(10.0, 100_000)
    mean, ks = fit_exponential(x)
    assert 9.9 <= mean <= 10.1 and ks < 0.01


def test_fit_exponential_degenerate_and_small():
    fit = fit_exponential(np.full(200, 5.0))
    assert fit.ks_statistic > 0.6
    with pytest.raises(SampleTooSmall):
        fit_exponential(np.ones(99))


def test_fit_exponential_on_no_saving_snapshot():
    r = run_kinetic(1000, 1e4, "no_saving", 1_000_000, seed=8)
    assert abs(fit_exponential(WealthSample(r.final)).mean - 10.0) <= 0.2


def test_fit_gamma_synthetic():
    rng = np.random.default_rng(1)
    shape, scale = fit_gamma(rng.gamma(4.0, 2.5, 100_000))
    assert 3.8 <= shape <= 4.2 and scale == pytest.approx(2.5, rel=0.05)
    shape, _ = fit_gamma(rng.exponential(3.0, 100_000))
    assert shape == pytest.approx(1.0, abs=0.03)
    with pytest.raises(ZeroVariance):
        fit_gamma(np.full(100, 2.0))
    with pytest.raises(SampleTooSmall):
        fit_gamma(np.ones(10))


def test_exponential_and_gamma_fits_agree_on_shape_one():
    x = np.random.default_rng(2).gamma(1.0, 4.0, 50_000)
    mean, _ = fit_exponential(x)
    shape, scale = fit_gamma(x)
    assert shape == pytest.approx(1.0, abs=0.05)
    assert shape * scale == pytest.approx(mean, rel=1e-12)


def test_hill_estimator_synthetic():
    rng = np.random.default_rng(3)
    fit = fit_pareto_tail(pareto(rng, 1.0, 100_000), 1.0)
    assert 0.95 <= fit.alpha <= 1.05 and fit.n_tail == 100_000 and fit.power_law
    fit = fit_pareto_tail(pareto(rng, 1.161, 100_000), 1.0)
    assert 1.10 <= fit.alpha <= 1.22


def test_hill_flags_exponential_data():
    x = np.random.default_rng(4).exponential(10.0, 100_000)
    low = fit_pareto_tail(x)
    high = fit_pareto_tail(x, float(np.quantile(x, 0.95)))
    assert not low.power_law
    assert high.alpha > 1.3 * low.alpha


def test_hill_tail_too_small():
    with pytest.raises(TailTooSmall):
        fit_pareto_tail(np.arange(1, 200, dtype=float), 180.0)
    with pytest.raises(TailTooSmall):
        fit_pareto_tail(np.ones(100), 0.0)


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_hill_scale_invariance(c, seed):
    x = pareto(np.random.default_rng(seed), 1.5, 500)
    assert fit_pareto_tail(x * c, 2.0 * c).alpha == pytest.approx(fit_pareto_tail(x, 2.0).alpha, rel=1e-9)


def test_top_share_examples():
    assert top_share(np.full(100, 3.0), 0.2) == pytest.approx(0.2)
    one = np.zeros(100)
    one[7] = 5.0
    assert top_share(one, 0.2) == 1.0
    x = np.random.default_rng(5).exponential(size=1000)
    assert top_share(x, 1.0) == 1.0


def test_top_share_pareto_principle():
    alpha = math.log(5) / math.log(4)
    # closed form for a Pareto law: the top q holds q ** (1 - 1/alpha)
    assert 0.2 ** (1 - 1 / alpha) == pytest.approx(0.8, rel=1e-12)
    rng = np.random.default_rng(6)
    shares = [top_share(pareto(rng, alpha, 1_000_000), 0.2) for _ in range(11)]
    assert abs(np.median(shares) - 0.80) <= 0.03


@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=50).filter(lambda v: sum(v) > 0),
       st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_top_share_monotone_in_q(values, q1, q2):
    lo, hi = sorted((q1, q2))
    assert top_share(values, lo) <= top_share(values, hi) + 1e-12


def test_gini_examples():
    assert gini(np.full(10, 4.0)) == 0.0
    for n in (10, 1000, 100_000):
        one = np.zeros(n)
        one[0] = 1.0
        assert gini(one) == pytest.approx((n - 1) / n)
    assert gini(np.random.default_rng(7).exponential(size=200_000)) == pytest.approx(0.5, abs=0.01)


@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=30))
def test_gini_matches_pairwise_definition(values):
    x = np.array(values)
    if x.sum() == 0:
        return
    brute = np.abs(x[:, None] - x[None, :]).sum() / (2 * x.size ** 2 * x.mean())
    assert gini(x) == pytest.approx(brute, abs=1e-12)
    assert 0 <= gini(x) <= 1


def test_histogram_density_integrates_to_one():
    edges, counts, density = histogram(np.random.default_rng(8).exponential(size=5000), bins=30)
    assert counts.sum() == 5000
    assert np.sum(density * np.diff(edges)) == pytest.approx(1.0)


def test_equilibrium_constant_snapshots():
    assert equilibrium_detect(np.ones((10, 5)), 3, 0.01) == 0
    with pytest.raises(ValueError):
        equilibrium_detect(np.ones((5, 5)), 3, 0.01)


def test_equilibrium_no_saving_converges():
    r = run_kinetic(1000, 1e4, "no_saving", 1_000_000, 10_000, seed=0)
    idx = equilibrium_detect(r.snapshots, 10, 0.02)
    assert r.snapshot_steps[idx] < 1_000_000


def test_equilibrium_min_investment_keeps_moving():
    # same horizon and detector settings as the no-saving case above
    r = run_kinetic(1000, 1e4, KineticModel("min_investment"), 1_000_000, 10_000, seed=0)
    with pytest.raises(NotConverged):
        equilibrium_detect(r.snapshots, 10, 0.02)
