import csv
import io
import json
from fractions import Fraction

import pytest

from median_adversary.config import Settings
from median_adversary.core.errors import BadDelta, UnknownAlgorithm
from median_adversary.models.schemas import RunRecord, SweepPlan
from median_adversary.services.sweep import RECORD_COLUMNS, plan_cells, run_sweep, write_records


def plan(**kwargs) -> SweepPlan:
    defaults = dict(n_values=[100], deltas=["1/20"], algorithms=["pivot_h"], omit_timing=True)
    defaults.update(kwargs)
    return SweepPlan(**defaults)


class TestPlanCells:
    def test_grid_order(self):
        cells = plan_cells(plan(n_values=[300, 100], deltas=["1/20", "1/15"], algorithms=["pivot", "pivot_h:3"]))
        assert cells[:4] == [
            (300, "1/20", "pivot"),
            (300, "1/20", "pivot_h"),
            (300, "1/15", "pivot"),
            (300, "1/15", "pivot_h"),
        ]
        assert len(cells) == 8

    def test_bad_delta_rejected_up_front(self):
        with pytest.raises(BadDelta):
            plan_cells(plan(deltas=["1/20", "1/5"]))

    def test_unknown_algorithm_rejected_up_front(self):
        with pytest.raises(UnknownAlgorithm):
            plan_cells(plan(algorithms=["nope"]))


class TestRunSweep:
    async def test_records_in_grid_order(self):
        records = await run_sweep(plan(algorithms=["pivot_h", "exhaustive", "greedy_probe"]))
        assert [r.algorithm for r in records] == ["pivot_h", "exhaustive", "greedy_probe"]
        pivot_h, exhaustive, greedy = records
        assert pivot_h.error is None
        assert pivot_h.ratio_floor == Fraction(352, 115)
        assert pivot_h.cost_opt == 115
        assert pivot_h.wall_time_ms is None
        assert exhaustive.error == "EmptySafeSet"
        assert exhaustive.q_total is None
        assert greedy.error is None
        assert greedy.measured_ratio >= greedy.ratio_floor

    async def test_empty_algorithm_list(self):
        assert await run_sweep(plan(algorithms=[])) == []

    async def test_bad_delta_before_any_run(self):
        with pytest.raises(BadDelta):
            await run_sweep(plan(deltas=["1/5"]))

    async def test_parallel_matches_serial(self):
        grid = plan(n_values=[60, 100], algorithms=["pivot_h", "greedy_probe"])
        serial = await run_sweep(grid, workers=1)
        parallel = await run_sweep(grid, workers=2)
        assert [r.model_dump() for r in parallel] == [r.model_dump() for r in serial]


class TestWriteRecords:
    def records(self):
        return [
            RunRecord(n=100, delta="1/20", algorithm="exhaustive", error="EmptySafeSet"),
            RunRecord(n=100, delta="1/20", algorithm="pivot_h", q_total=485, ratio_floor="352/115"),
        ]

    def test_csv_columns_follow_record_fields(self):
        buffer = io.StringIO()
        write_records(self.records(), buffer, "csv")
        rows = list(csv.reader(io.StringIO(buffer.getvalue())))
        assert rows[0] == RECORD_COLUMNS
        assert RECORD_COLUMNS[-1] == "error"
        assert rows[1][RECORD_COLUMNS.index("error")] == "EmptySafeSet"
        assert rows[2][RECORD_COLUMNS.index("ratio_floor")] == "352/115"
        assert rows[2][RECORD_COLUMNS.index("cost_opt")] == ""

    def test_header_only_when_empty(self):
        buffer = io.StringIO()
        write_records([], buffer, "csv")
        assert buffer.getvalue() == ",".join(RECORD_COLUMNS) + "\n"

    def test_jsonl(self):
        buffer = io.StringIO()
        write_records(self.records(), buffer, "jsonl")
        lines = [json.loads(line) for line in buffer.getvalue().splitlines()]
        assert lines[1]["ratio_floor"] == "352/115"
        assert lines[0]["q_total"] is None


class TestWorkers:
    def test_environment_wins(self):
        assert Settings(workers=3).resolve_workers(1) == 3

    def test_flag_then_default(self):
        assert Settings(workers=None).resolve_workers(4) == 4
        assert Settings(workers=None, default_workers=1).resolve_workers(None) == 1
