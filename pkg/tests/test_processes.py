import math

import numpy as np
import pytest

from tokenwealth.errors import ProcessExhausted
from tokenwealth.processes import (
    ExponentialPath,
    GeometricBrownianProcess,
    LinearPath,
    PoissonProcess,
    SinusoidPath,
    TablePath,
    path_from_spec,
)
from tokenwealth.seeding import label_key, run_seed, substream


def test_closed_form_paths_use_model_time():
    assert LinearPath(1.0, 2.0).value(3, dt=0.5) == 4.0
    assert ExponentialPath(2.0, 0.1).value(10, dt=1.0) == pytest.approx(2.0 * math.e)
    assert SinusoidPath(1.0, 0.5, 4.0).value(1) == pytest.approx(1.5)


def test_table_path_exhaustion():
    p = TablePath([1, 2, 3])
    assert p.value(2) == 3.0 and p.length() == 3
    with pytest.raises(ProcessExhausted):
        p.value(3)


def test_path_from_spec_table_dict():
    p = path_from_spec({"form": "table", "values": {"0": 5, "1": 6}})
    assert p.values == (5.0, 6.0)
    with pytest.raises(ValueError):
        path_from_spec({"form": "table", "values": {"0": 5, "2": 6}})


def test_process_runs_are_order_independent():
    proc = GeometricBrownianProcess(1.0, 0.01, 0.2)
    a = proc.start(substream(1, "x"))
    b = proc.start(substream(1, "x"))
    late = a.value(20)
    assert [b.value(k) for k in range(21)][-1] == late
    assert a.value(0) == 1.0


def test_gbm_mean_matches_expected():
    proc = GeometricBrownianProcess(1.0, 0.05, 0.2)
    rng = substream(3, "gbm")
    finals = np.array([proc.start(rng).value(10, 0.1) for _ in range(4000)])
    se = finals.std(ddof=1) / np.sqrt(finals.size)
    assert abs(finals.mean() - proc.expected(10, 0.1)) < 3 * se


def test_poisson_integer_valued():
    run = PoissonProcess(3.0).start(substream(0, "p"))
    xs = run.path(500)
    assert xs.dtype.kind in "iu" and abs(xs.mean() - 3.0) < 0.3


def test_seeding_is_stable():
    assert run_seed(10, 3) == 9
    assert label_key("supply") == label_key("supply") != label_key("demand:x")
    assert substream(5, "a").random() == substream(5, "a").random()
    assert substream(5, "a").random() != substream(5, "b").random()
