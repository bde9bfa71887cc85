import json
import math

import pytest

from median_adversary.core.errors import (
    BudgetExceeded,
    InvalidInput,
    NonDeterministicAlgorithm,
    SelfPair,
    UnknownAlgorithm,
)
from median_adversary.models.metric import DenseMetric, PairKey
from median_adversary.services.algorithms import (
    AlgorithmId,
    MetricOracle,
    OracleHandle,
    available_algorithms,
    ceil_root,
    register,
    run,
)
from median_adversary.services.metric_service import metric_service
from tests.helpers import random_metric


def run_on(metric, name, budget=None):
    return run(AlgorithmId.parse(name), OracleHandle(MetricOracle(metric), budget=budget))


class TestOracleHandle:
    def test_repeats_are_served_from_the_log(self):
        oracle = OracleHandle(MetricOracle(DenseMetric.uniform(4, 2)))
        assert oracle.query(0, 1) == 2
        assert oracle.query(1, 0) == 2
        assert oracle.distinct_queries == 1
        assert oracle.redundant_queries == 1

    def test_self_pair(self):
        oracle = OracleHandle(MetricOracle(DenseMetric.uniform(3, 2)))
        with pytest.raises(SelfPair):
            oracle.query(2, 2)

    def test_out_of_range(self):
        oracle = OracleHandle(MetricOracle(DenseMetric.uniform(3, 2)))
        with pytest.raises(InvalidInput):
            oracle.query(0, 3)

    def test_zero_budget(self):
        with pytest.raises(BudgetExceeded):
            run_on(DenseMetric.uniform(5, 2), "pivot", budget=0)

    def test_budget_counts_distinct_queries_only(self):
        oracle = OracleHandle(MetricOracle(DenseMetric.uniform(3, 2)), budget=1)
        oracle.query(0, 1)
        oracle.query(1, 0)
        with pytest.raises(BudgetExceeded):
            oracle.query(0, 2)


class TestAlgorithmId:
    def test_parse_with_parameter(self):
        alg = AlgorithmId.parse("pivot_h:4")
        assert (alg.name, alg.param) == ("pivot_h", 4)
        assert str(alg) == "pivot_h:4"

    def test_default_parameter(self):
        alg = AlgorithmId.parse("pivot_h")
        assert alg.param == 3
        assert str(alg) == "pivot_h"

    def test_unknown(self):
        with pytest.raises(UnknownAlgorithm):
            AlgorithmId.parse("random_sample")

    def test_bad_parameter(self):
        with pytest.raises(UnknownAlgorithm):
            AlgorithmId.parse("pivot_h:x")

    def test_randomized_rejected_at_registration(self):
        with pytest.raises(NonDeterministicAlgorithm):

            @register("coin_flip", deterministic=False)
            def coin_flip(oracle, param=None):
                return 0

        assert "coin_flip" not in available_algorithms()

    def test_registry(self):
        assert available_algorithms() == ["exhaustive", "greedy_probe", "pivot", "pivot_h"]


@pytest.mark.parametrize(
    "n, h, expected",
    [(1, 2, 1), (4, 2, 2), (100, 2, 10), (101, 2, 11), (1000, 3, 10), (1001, 3, 11), (100, 3, 5)],
)
def test_ceil_root(n, h, expected):
    assert ceil_root(n, h) == expected


class TestExhaustive:
    def test_small_metric(self):
        metric = DenseMetric.from_rows([[0, 1, 1], [1, 0, 2], [1, 2, 0]])
        assert run_on(metric, "exhaustive").output == 0

    def test_two_points_tie(self):
        assert run_on(DenseMetric.uniform(2, 3), "exhaustive").output == 0

    def test_uniform(self):
        trace = run_on(DenseMetric.uniform(3, 2), "exhaustive")
        assert trace.output == 0
        assert trace.distinct_queries == 3

    def test_matches_exact_median(self, rng):
        metric = random_metric(rng, 20)
        assert run_on(metric, "exhaustive").output == metric_service.exact_median(metric)[0]

    def test_replay_is_identical(self, rng):
        metric = random_metric(rng, 30)
        first, second = run_on(metric, "exhaustive"), run_on(metric, "exhaustive")
        assert first.first_mismatch(second) is None


class TestPivot:
    def test_uniform_four_points(self):
        trace = run_on(DenseMetric.uniform(4, 2), "pivot")
        assert trace.output == 0
        # pivots {0, 2}; the pair (0, 2) is asked twice
        assert trace.distinct_queries == 5
        assert trace.redundant_queries == 1

    def test_query_count(self, rng):
        n = 50
        trace = run_on(random_metric(rng, n), "pivot")
        assert trace.distinct_queries <= math.ceil(math.sqrt(n)) * n

    def test_nonadaptive(self, rng):
        a = run_on(random_metric(rng, 30), "pivot")
        b = run_on(random_metric(rng, 30), "pivot")
        assert [key for key, _ in a.entries()] == [key for key, _ in b.entries()]

    def test_pivot_h_uses_fewer_pivots(self, rng):
        metric = random_metric(rng, 64)
        # 4 pivots for h=3, 8 for h=2
        assert run_on(metric, "pivot_h:3").distinct_queries == 4 * 63 - 6
        assert run_on(metric, "pivot").distinct_queries == 8 * 63 - 28

    def test_pivot_h_rejects_small_h(self):
        with pytest.raises(InvalidInput):
            run_on(DenseMetric.uniform(4, 2), "pivot_h:1")


class TestGreedyProbe:
    def test_uniform_four_points(self):
        assert run_on(DenseMetric.uniform(4, 2), "greedy_probe").output == 0

    def test_query_count(self, rng):
        n = 120
        trace = run_on(random_metric(rng, n), "greedy_probe")
        assert trace.distinct_queries <= 4 * n * math.sqrt(n)

    def test_deterministic(self, rng):
        metric = random_metric(rng, 40)
        assert run_on(metric, "greedy_probe").first_mismatch(run_on(metric, "greedy_probe")) is None


def test_trace_jsonl():
    trace = run_on(DenseMetric.from_rows([[0, 1], [1, 0]]), "exhaustive")
    assert [json.loads(line) for line in trace.to_jsonl()] == [{"x": 0, "y": 1, "d": 1}]
    assert list(trace.entries()) == [(PairKey(0, 1), 1)]


def test_run_needs_two_points():
    with pytest.raises(InvalidInput):
        run_on(DenseMetric.from_rows([[0]]), "exhaustive")
