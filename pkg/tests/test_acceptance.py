from fractions import Fraction
from typing import List

import numpy as np
import pytest

from median_adversary.core.errors import EmptySafeSet
from median_adversary.models.metric import DenseMetric
from median_adversary.services import experiment_service, metric_service
from median_adversary.services.adversary import (
    DeltaParam,
    FinalizedInstance,
    instance_report,
    new_adversary,
)
from median_adversary.services.algorithms import AlgorithmId, MetricOracle, OracleHandle, available_algorithms, run
from median_adversary.services.recovery import build_query_graph, recovery_chain
from tests.helpers import random_metric

GRID = [
    (n, delta, name)
    for n in (50, 100, 300)
    for delta in ("1/20", "1/15")
    for name in available_algorithms()
]

# Every other grid cell leaves no light point in S
FINALIZING = {
    (50, "1/15", "greedy_probe"),
    (100, "1/20", "greedy_probe"),
    (100, "1/15", "greedy_probe"),
    (300, "1/20", "greedy_probe"),
    (300, "1/15", "greedy_probe"),
    (100, "1/20", "pivot_h"),
    (100, "1/15", "pivot_h"),
    (300, "1/20", "pivot_h"),
    (300, "1/15", "pivot_h"),
    (300, "1/15", "pivot"),
}


def finalized(n: int, delta: str, name: str) -> FinalizedInstance:
    state = new_adversary(n, DeltaParam.parse(delta))
    trace = run(AlgorithmId.parse(name), OracleHandle(state))
    state.pad_output_queries(trace.output)
    return state.finalize(trace.output)


@pytest.mark.parametrize("n, delta, name", GRID)
def test_grid_cell(n, delta, name):
    state = new_adversary(n, DeltaParam.parse(delta))
    trace = run(AlgorithmId.parse(name), OracleHandle(state))
    state.pad_output_queries(trace.output)
    has_light_point = any(state.log.degree[s] <= state.limit for s in state.s_points)
    assert has_light_point == ((n, delta, name) in FINALIZING)

    if not has_light_point:
        with pytest.raises(EmptySafeSet):
            experiment_service.run(n, DeltaParam.parse(delta), AlgorithmId.parse(name), omit_timing=True)
        return

    outcome = experiment_service.run(n, DeltaParam.parse(delta), AlgorithmId.parse(name), omit_timing=True)
    report = outcome.report
    assert report.cost_p >= report.lower_bound_p
    assert report.cost_phat <= report.upper_bound_phat
    assert report.measured_ratio >= report.ratio_floor
    assert report.ratio_floor == Fraction(report.lower_bound_p, report.cost_phat)
    assert outcome.record.cost_opt <= report.cost_phat
    assert [v.mode for v in outcome.validations] == ["structured", "full"]
    assert all(v.ok for v in outcome.validations)

    m = outcome.instance.metric
    record = recovery_chain(m, build_query_graph(m, outcome.instance.log.iter_seq()))
    assert record.connected
    assert record.domination_ok
    assert record.chain_completion_ok
    assert record.chain_average_ok
    assert record.chain_norm_ok


def test_exhaustive_finds_exact_median(rng):
    alg = AlgorithmId.parse("exhaustive")
    for _ in range(100):
        metric = random_metric(rng, int(rng.integers(3, 26)))
        trace = run(alg, OracleHandle(MetricOracle(metric)))
        assert trace.output == metric_service.exact_median(metric)[0]
        assert trace.distinct_queries == metric.n * (metric.n - 1) // 2


def test_validators_agree_on_corrupted_instances(rng):
    bases: List[np.ndarray] = [
        finalized(*cell).metric.materialize().astype(np.int64)
        for cell in [(100, "1/20", "pivot_h"), (100, "1/20", "greedy_probe"), (50, "1/15", "greedy_probe")]
    ]
    mirrored_failures = 0
    for i in range(200):
        d = bases[i % len(bases)].copy()
        n = d.shape[0]
        x, y = (int(v) for v in rng.choice(n, size=2, replace=False))
        d[x, y] = int(rng.choice([v for v in (1, 2, 3, 4) if v != d[x, y]]))
        mirrored = i % 2 == 0
        if mirrored:
            d[y, x] = d[x, y]
        metric = DenseMetric(d)

        full = metric_service.validate_metric(metric, "full")
        structured = metric_service.validate_metric(metric, "structured")
        assert structured.ok == full.ok
        assert structured.triangle_ok == full.triangle_ok
        assert structured.symmetric_ok == full.symmetric_ok == mirrored
        mirrored_failures += mirrored and not full.ok

    assert mirrored_failures > 0


@pytest.mark.slow
def test_pivot_at_thousand_points():
    outcome = experiment_service.run(1000, DeltaParam.parse("1/20"), AlgorithmId.parse("pivot"), omit_timing=True)
    assert outcome.record.q_total == outcome.instance.q_total
    assert outcome.report.measured_ratio >= outcome.report.ratio_floor

    m = outcome.instance.metric
    record = recovery_chain(m, build_query_graph(m, outcome.instance.log.iter_seq()))
    assert record.connected
    assert record.chain_norm_ok


@pytest.mark.slow
def test_greedy_at_thousand_points():
    outcome = experiment_service.run(
        1000, DeltaParam.parse("1/20"), AlgorithmId.parse("greedy_probe"), omit_timing=True
    )
    assert outcome.report.measured_ratio >= outcome.report.ratio_floor


@pytest.mark.slow
def test_pivot_full_pipeline_at_ten_thousand_points():
    outcome = experiment_service.run(
        10_000, DeltaParam.parse("1/100"), AlgorithmId.parse("pivot"), omit_timing=True
    )
    assert [v.mode for v in outcome.validations] == ["structured"]
    assert all(v.ok for v in outcome.validations)
    assert outcome.record.ratio_floor == Fraction(39192, 10395)
    assert outcome.record.cost_opt is None


@pytest.mark.slow
def test_pivot_floor_rises_with_n():
    delta = DeltaParam.parse("1/100")
    alg = AlgorithmId.parse("pivot")
    floors = []
    for n in (10_000, 20_000, 40_000):
        state = new_adversary(n, delta)
        trace = run(alg, OracleHandle(state))
        state.pad_output_queries(trace.output)
        floors.append(instance_report(state.finalize(trace.output)).ratio_floor)
    assert floors == [Fraction(39192, 10395), Fraction(78392, 20677), Fraction(156792, 41193)]
    assert floors[0] < floors[1] < floors[2] < 4
