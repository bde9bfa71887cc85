import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from median_adversary.config import settings
from median_adversary.core import metric_io
from median_adversary.core.errors import InvalidInput, InvariantViolation, MedianAdversaryError
from median_adversary.models.metric import MetricView, QuerySet
from median_adversary.models.schemas import InstanceReport, RecoveryRecord, RunRecord, ValidationReport
from median_adversary.services.adversary import (
    DeltaParam,
    FinalizedInstance,
    audit_bookkeeping,
    audit_distances,
    instance_report,
    new_adversary,
    replay_consistency,
)
from median_adversary.services.algorithms import AlgorithmId, OracleHandle, RunTrace, run as run_algorithm
from median_adversary.services.metric_service import ValidationMode, metric_service, wants_full_validation
from median_adversary.services.recovery import all_pairs, build_query_graph, recovery_chain

logger = logging.getLogger(__name__)

QuerySource = Union[Literal["all", "logged"], Path]


@dataclass
class RunOutcome:
    record: RunRecord
    instance: FinalizedInstance
    trace: RunTrace
    report: InstanceReport
    validations: List[ValidationReport] = field(default_factory=list)


class ExperimentService:
    """Single runs, validation and recovery experiments"""

    def run(
        self,
        n: int,
        delta: DeltaParam,
        alg: AlgorithmId,
        budget: Optional[int] = None,
        pad_heavy: Optional[bool] = None,
        full_validate: bool = False,
        omit_timing: bool = False,
        replay: bool = True,
    ) -> RunOutcome:
        """Run alg against a fresh adversary, finalize, audit and validate"""
        pad_heavy = settings.heavy_padding if pad_heavy is None else pad_heavy
        logger.info(f"Running {alg} against the adversary: n={n}, delta={delta}")
        start = time.perf_counter()

        state = new_adversary(n, delta)
        oracle = OracleHandle(state, budget=budget)
        trace = run_algorithm(alg, oracle)
        state.pad_output_queries(trace.output)
        if pad_heavy:
            state.pad_heavy_points()
        instance = state.finalize(trace.output)

        report = instance_report(instance)
        audit_bookkeeping(instance)
        audit_distances(instance)

        validations = [metric_service.validate_metric(instance.metric, "structured")]
        if wants_full_validation(n, force_full=full_validate):
            validations.append(metric_service.validate_metric(instance.metric, "full"))
        for validation in validations:
            if not validation.ok:
                raise InvariantViolation(
                    f"Finalized metric failed {validation.mode} validation",
                    validation=validation.model_dump(),
                )

        if replay:
            replay_consistency(instance, alg)

        cost_opt = None
        if n <= settings.cost_opt_max_n:
            _, cost_opt = metric_service.exact_median(instance.metric)
            if cost_opt > report.cost_phat:
                raise InvariantViolation(f"cost_opt={cost_opt} exceeds cost(p_hat)={report.cost_phat}")

        elapsed = int((time.perf_counter() - start) * 1000)
        record = RunRecord(
            n=n,
            delta=str(delta),
            algorithm=str(alg),
            q_total=instance.q_total,
            redundant_queries=trace.redundant_queries,
            b_size=report.b_size,
            alpha_phat=report.alpha_phat,
            cost_p=report.cost_p,
            cost_phat=report.cost_phat,
            cost_opt=cost_opt,
            measured_ratio=report.measured_ratio,
            ratio_floor=report.ratio_floor,
            wall_time_ms=None if omit_timing else elapsed,
        )
        logger.info(
            f"{alg} n={n} delta={delta}: ratio {report.measured_ratio} >= floor {report.ratio_floor}"
        )
        return RunOutcome(record=record, instance=instance, trace=trace, report=report, validations=validations)

    def run_record(
        self,
        n: int,
        delta: str,
        alg: str,
        budget: Optional[int] = None,
        pad_heavy: bool = False,
        omit_timing: bool = False,
    ) -> RunRecord:
        """One sweep cell; failures land in the error column"""
        try:
            outcome = self.run(
                n,
                DeltaParam.parse(delta),
                AlgorithmId.parse(alg),
                budget=budget,
                pad_heavy=pad_heavy,
                omit_timing=omit_timing,
            )
            return outcome.record
        except MedianAdversaryError as e:
            logger.warning(f"Cell n={n} delta={delta} alg={alg} failed: {type(e).__name__}: {e.message}")
            return RunRecord(n=n, delta=delta, algorithm=alg, error=type(e).__name__)

    def validate(
        self,
        path: Path,
        mode: ValidationMode = "full",
        median: bool = False,
    ) -> Dict[str, Any]:
        metric = metric_io.read_dense_metric(path)
        report = metric_service.validate_metric(metric, mode)
        result = report.model_dump()
        result["ok"] = report.ok
        if median:
            x, cost = metric_service.exact_median(metric)
            closeness = metric_service.closeness(metric, x)
            result.update(median=x, median_cost=cost, closeness=f"{closeness.numerator}/{closeness.denominator}")
        return result

    def load_metric(self, instance: Optional[Path] = None, metric: Optional[Path] = None) -> MetricView:
        if (instance is None) == (metric is None):
            raise InvalidInput("Give exactly one of an instance file or a metric file")
        if instance is not None:
            return metric_io.instance_metric(metric_io.read_instance(instance))
        return metric_io.read_dense_metric(metric)

    def query_graph(self, m: MetricView, source: QuerySource, instance: Optional[Path] = None) -> QuerySet:
        if source == "all":
            return build_query_graph(m, all_pairs(m.n))
        if source == "logged":
            if instance is None:
                raise InvalidInput("Logged queries need an instance file")
            export = metric_io.read_instance(instance)
            return build_query_graph(m, ((lo, hi) for lo, hi, _ in export.frozen))
        graph = metric_io.read_query_set(Path(source))
        if graph.n != m.n:
            raise InvalidInput(f"Query set is on {graph.n} points, metric on {m.n}")
        return graph

    def recover(self, m: MetricView, graph: QuerySet) -> RecoveryRecord:
        logger.info(f"Recovering a metric on {m.n} points from {len(graph)} observed pairs")
        record = recovery_chain(m, graph)
        checks = (record.domination_ok, record.chain_completion_ok, record.chain_average_ok, record.chain_norm_ok)
        if record.connected and not all(checks):
            raise InvariantViolation("Recovery inequality chain failed", record=record.model_dump(mode="json"))
        return record


# Singleton instance
experiment_service = ExperimentService()
