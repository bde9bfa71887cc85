import asyncio
import csv
import functools
import logging
from concurrent.futures import Executor, ProcessPoolExecutor
from typing import Iterable, List, Optional, TextIO, Tuple

import aiojobs

from median_adversary.models.schemas import RunRecord, SweepPlan
from median_adversary.services.adversary import DeltaParam
from median_adversary.services.algorithms import AlgorithmId
from median_adversary.services.experiment_service import experiment_service

logger = logging.getLogger(__name__)

RECORD_COLUMNS = list(RunRecord.model_fields)

Cell = Tuple[int, str, str]


def plan_cells(plan: SweepPlan) -> List[Cell]:
    """Grid cells ordered by n, then delta, then algorithm; parameters are checked before any run"""
    deltas = [str(DeltaParam.parse(text)) for text in plan.deltas]
    algorithms = [str(AlgorithmId.parse(text)) for text in plan.algorithms]
    return [(n, delta, alg) for n in plan.n_values for delta in deltas for alg in algorithms]


def run_cell(n: int, delta: str, alg: str, budget: Optional[int], pad_heavy: bool, omit_timing: bool) -> RunRecord:
    return experiment_service.run_record(
        n, delta, alg, budget=budget, pad_heavy=pad_heavy, omit_timing=omit_timing
    )


async def run_sweep(plan: SweepPlan, workers: int = 1) -> List[RunRecord]:
    """Execute every cell, at most `workers` at a time, and return records in grid order"""
    cells = plan_cells(plan)
    logger.info(f"Sweep of {len(cells)} cells with {workers} worker(s)")
    if not cells:
        return []

    loop = asyncio.get_running_loop()
    executor: Optional[Executor] = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None

    async def execute(cell: Cell) -> RunRecord:
        n, delta, alg = cell
        call = functools.partial(run_cell, n, delta, alg, plan.budget, plan.pad_heavy, plan.omit_timing)
        record = await loop.run_in_executor(executor, call)
        logger.info(f"Cell n={n} delta={delta} alg={alg} done{' with ' + record.error if record.error else ''}")
        return record

    try:
        async with aiojobs.Scheduler(limit=workers) as scheduler:
            jobs = [await scheduler.spawn(execute(cell)) for cell in cells]
            return [await job.wait() for job in jobs]
    finally:
        if executor is not None:
            executor.shutdown(wait=True)


def write_records(records: Iterable[RunRecord], stream: TextIO, fmt: str = "csv") -> None:
    """CSV columns follow the RunRecord field order; JSONL holds one record per line"""
    if fmt == "jsonl":
        for record in records:
            stream.write(record.model_dump_json())
            stream.write("\n")
        return
    writer = csv.DictWriter(stream, fieldnames=RECORD_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for record in records:
        row = record.model_dump(mode="json")
        writer.writerow({key: "" if value is None else value for key, value in row.items()})
