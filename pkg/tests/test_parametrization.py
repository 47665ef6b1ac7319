import numpy as np
import pytest
from hypothesis import given, strategies as st

from tokenwealth.errors import (
    InfeasibleSample,
    NegativeRotationRate,
    ProcessExhausted,
    UnboundedExpectation,
    ValidationError,
    ZeroWealthEndpoint,
)
from tokenwealth.parametrization import (
    BernoulliDemand,
    BinomialDemand,
    ConstantSource,
    DistributionSource,
    Mode,
    PathSource,
    ProcessSource,
    RateSchedule,
    ReactiveRule,
    RotationSpec,
    ScipyDistribution,
    beta_static_deterministic,
    beta_static_probabilistic,
    check_rate_invariants,
    gamma_static,
    materialize_rates,
)
from tokenwealth.processes import GeometricBrownianProcess, LinearPath, TablePath
from tokenwealth.taxonomy import build_taxonomy


def pair_taxonomy(granularity="Continuous"):
    return build_taxonomy(
        [{"id": "a", "kind": "ControlMechanism"}, {"id": "b"}],
        [{"id": "x", "endpoints": ["a", "b"], "granularity": granularity}],
        [{"from": "a", "to": "b"}],
    )


def test_beta_static_deterministic_examples():
    B = beta_static_deterministic({(0, 1): 2.0}, [20.0, 30.0], 100.0, 1.0)
    assert B[0, 1] == pytest.approx(1 / 3) and B[1, 0] == -B[0, 1]
    assert np.all(beta_static_deterministic({(0, 1): 0.0}, [20.0, 30.0], 100.0, 1.0) == 0)
    with pytest.raises(ZeroWealthEndpoint):
        beta_static_deterministic({(0, 1): 1.0}, [0.0, 30.0], 100.0, 1.0)


def test_beta_static_probabilistic_examples():
    tax = pair_taxonomy()
    price = {"x": ConstantSource(10.0)}
    B = beta_static_probabilistic(tax, {"x": DistributionSource(BernoulliDemand(0.5))}, price, [20.0, 30.0], 100.0, 1.0)
    assert B[0, 1] == pytest.approx(5 / 6)
    B = beta_static_probabilistic(tax, {"x": DistributionSource(BinomialDemand(10, 0.3))}, {"x": ConstantSource(2.0)},
                                  [20.0, 30.0], 100.0, 1.0)
    assert B[0, 1] * 600 / 100 == pytest.approx(6.0)
    B = beta_static_probabilistic(tax, {"x": DistributionSource(BernoulliDemand(0.0))}, price, [20.0, 30.0], 100.0, 1.0)
    assert np.all(B == 0)


def test_unbounded_expectation():
    with pytest.raises(UnboundedExpectation):
        ScipyDistribution("cauchy").mean()


def test_static_schedule_is_constant_in_time():
    tax = pair_taxonomy()
    sched = RateSchedule(tax, Mode.STATIC_DETERMINISTIC, {"x": ConstantSource(1.0)}, {"x": ConstantSource(2.0)},
                         RotationSpec((((0, 1), ConstantSource(0.1)),)))
    run = sched.start([50.0, 50.0], 100.0)
    B0, G0 = materialize_rates(run, 0, [50.0, 50.0], 100.0)
    B7, G7 = materialize_rates(run, 7, [10.0, 90.0], 100.0)
    assert np.array_equal(B0, B7) and np.array_equal(G0, G7)
    assert B0[0, 1] == pytest.approx(100 * 2 / 2500)


def test_dynamic_deterministic_path_demand():
    tax = pair_taxonomy()
    sched = RateSchedule(tax, Mode.DYNAMIC_DETERMINISTIC, {"x": PathSource(LinearPath(0.0, 1.0))},
                         {"x": ConstantSource(1.0)})
    B, _ = sched.start([50.0, 50.0], 100.0).rates(2, [50.0, 50.0], 100.0)
    assert B[0, 1] == pytest.approx(0.08)


def test_payee_sets_flow_direction():
    tax = build_taxonomy([{"id": "a", "kind": "ControlMechanism"}, {"id": "b"}],
                         [{"id": "x", "endpoints": ["a", "b"], "payee": "b"}])
    sched = RateSchedule(tax, Mode.STATIC_DETERMINISTIC, {"x": ConstantSource(1.0)}, {"x": ConstantSource(1.0)})
    B, _ = sched.start([50.0, 50.0], 100.0).rates(0, [50.0, 50.0], 100.0)
    assert B[0, 1] < 0 < B[1, 0]


def test_degenerate_bernoulli_integer_demand():
    tax = pair_taxonomy("Integer")
    sched = RateSchedule(tax, Mode.DYNAMIC_PROBABILISTIC, {"x": DistributionSource(BernoulliDemand(1.0, 1))},
                         {"x": ConstantSource(1.0)})
    run = sched.start([50.0, 50.0], 100.0, seed=4)
    flows = [run.flows(k)["x"] for k in range(10_000)]
    assert set(flows) == {1} and np.mean(flows) == 1.0


def test_granularity_rejects_continuous_models():
    tax = pair_taxonomy("Integer")
    with pytest.raises(ValidationError):
        RateSchedule(tax, Mode.DYNAMIC_PROBABILISTIC, {"x": DistributionSource(ScipyDistribution("expon"))},
                     {"x": ConstantSource(1.0)})
    with pytest.raises(ValidationError):
        RateSchedule(tax, Mode.STATIC_DETERMINISTIC, {"x": ConstantSource(1.5)}, {"x": ConstantSource(1.0)})


def test_mode_source_compatibility():
    tax = pair_taxonomy()
    with pytest.raises(ValidationError):
        RateSchedule(tax, Mode.STATIC_DETERMINISTIC, {"x": DistributionSource(BernoulliDemand(0.5))},
                     {"x": ConstantSource(1.0)})
    with pytest.raises(ValidationError):
        RateSchedule(tax, Mode.DYNAMIC_DETERMINISTIC, {"x": ProcessSource(GeometricBrownianProcess(1, 0, 0.1))},
                     {"x": ConstantSource(1.0)})
    with pytest.raises(ValidationError):
        RateSchedule(tax, Mode.STATIC_DETERMINISTIC, {"x": ConstantSource(1.0)}, {})


def test_process_exhausted_at_runtime():
    tax = pair_taxonomy()
    sched = RateSchedule(tax, Mode.DYNAMIC_DETERMINISTIC, {"x": PathSource(TablePath([1.0, 2.0]))},
                         {"x": ConstantSource(1.0)})
    run = sched.start([50.0, 50.0], 100.0)
    run.rates(1, [50.0, 50.0], 100.0)
    with pytest.raises(ProcessExhausted):
        run.rates(2, [50.0, 50.0], 100.0)


def test_negative_sample_is_infeasible():
    tax = pair_taxonomy()
    sched = RateSchedule(tax, Mode.DYNAMIC_DETERMINISTIC, {"x": PathSource(LinearPath(1.0, -1.0))},
                         {"x": ConstantSource(1.0)})
    with pytest.raises(InfeasibleSample):
        sched.start([50.0, 50.0], 100.0).rates(3, [50.0, 50.0], 100.0)


def test_gamma_static_examples():
    G = gamma_static([[0.0, 0.1], [0.0, 0.0]])
    assert np.array_equal(G, [[-0.1, 0.0], [0.1, 0.0]])
    assert np.all(gamma_static(np.zeros((3, 3))) == 0)
    with pytest.raises(NegativeRotationRate):
        gamma_static([[0.0, -0.5], [0.0, 0.0]])


@given(st.integers(2, 6).flatmap(lambda n: st.lists(st.floats(0, 5), min_size=n * n, max_size=n * n)))
def test_gamma_columns_sum_to_zero(flat):
    n = int(round(len(flat) ** 0.5))
    G = gamma_static(np.array(flat).reshape(n, n))
    assert np.all(np.abs(G.sum(axis=0)) <= 1e-12)
    assert np.all(G[~np.eye(n, dtype=bool)] >= 0)


@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(1, 99), st.integers(0, 50), st.integers(0, 2**32))
def test_dynamic_probabilistic_rates_keep_invariants(p_mean, rot, fa, k, seed):
    tax = pair_taxonomy()
    sched = RateSchedule(
        tax, Mode.DYNAMIC_PROBABILISTIC,
        {"x": DistributionSource(ScipyDistribution("gamma", {"a": p_mean}))},
        {"x": ProcessSource(GeometricBrownianProcess(1.0, 0.0, 0.3))},
        RotationSpec((((0, 1), ProcessSource(GeometricBrownianProcess(rot / 100, 0.0, 0.2))),)),
    )
    F = [fa, 100.0 - fa]
    B, G = sched.start(F, 100.0, seed=seed).rates(k, F, 100.0)
    assert check_rate_invariants(B, G)
    B2, G2 = sched.start(F, 100.0, seed=seed).rates(k, F, 100.0)
    assert np.array_equal(B, B2) and np.array_equal(G, G2)


def test_reactive_rule_scales_by_state():
    tax = pair_taxonomy()
    rule = ReactiveRule("demand:x", "share:b", slope=2.0, intercept=0.0)
    sched = RateSchedule(tax, Mode.DYNAMIC_DETERMINISTIC, {"x": ConstantSource(1.0)}, {"x": ConstantSource(1.0)},
                         dynamic_kind="reactive", rules=(rule,))
    run = sched.start([50.0, 50.0], 100.0)
    assert run.flows(0, np.array([50.0, 50.0]), 100.0)["x"] == pytest.approx(1.0)
    assert run.flows(0, np.array([75.0, 25.0]), 100.0)["x"] == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        RateSchedule(tax, Mode.DYNAMIC_DETERMINISTIC, {"x": ConstantSource(1.0)}, {"x": ConstantSource(1.0)},
                     rules=(rule,))
    table = ReactiveRule("rotation:a->b", "circulating_fraction", form="table", xs=(0.0, 1.0), ys=(1.0, 3.0))
    assert table.multiplier(0.5) == 2.0 and table.multiplier(2.0) == 3.0
