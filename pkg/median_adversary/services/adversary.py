import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from median_adversary.config import settings
from median_adversary.core.errors import (
    BadDelta,
    BadSetSize,
    BoundViolation,
    CaseExclusivityError,
    EmptySafeSet,
    InvalidInput,
    InvariantViolation,
    PhaseError,
    RepeatedQuery,
    ReplayMismatch,
    SelfPair,
)
from median_adversary.models.metric import MetricView, QueryLog, canonical_pair, check_point
from median_adversary.models.schemas import InstanceExport, InstanceReport
from median_adversary.services.algorithms import AlgorithmId, MetricOracle, OracleHandle, RunTrace, run

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeltaParam:
    """Exact rational delta = num/den with 0 < delta < 1/10"""

    num: int
    den: int

    def __post_init__(self) -> None:
        if self.num <= 0 or self.den <= 0 or 10 * self.num >= self.den:
            raise BadDelta(f"delta must lie in (0, 1/10), got {self.num}/{self.den}", delta=f"{self.num}/{self.den}")

    @classmethod
    def parse(cls, text: str) -> "DeltaParam":
        """Accept only "num/den"; decimals are rejected"""
        num, sep, den = text.strip().partition("/")
        if not sep or not num.strip().isdigit() or not den.strip().isdigit():
            raise BadDelta(f"delta must be written as num/den, got {text!r}", delta=text)
        return cls(int(num), int(den))

    @property
    def value(self) -> Fraction:
        return Fraction(self.num, self.den)

    def heavy_limit(self, n: int) -> int:
        """Largest degree that is not heavy: alpha > delta*n iff alpha > this"""
        return self.num * n // self.den

    def is_heavy(self, alpha: int, n: int) -> bool:
        return alpha * self.den > self.num * n

    def safe_set_size(self, n: int) -> int:
        """ceil(delta * n)"""
        return -(-self.num * n // self.den)

    def __str__(self) -> str:
        return f"{self.num}/{self.den}"


class Phase(str, Enum):
    ANSWERING = "answering"
    FINALIZED = "finalized"


class AdversaryState:
    """Online answering state of the lower-bound construction.

    Every fresh pair is frozen to 2, 3 or 4 from the degrees of its endpoints
    before the pair is recorded. The log doubles as the frozen map.
    """

    def __init__(self, n: int, delta: DeltaParam, s_points: Optional[Iterable[int]] = None):
        if n < 2:
            raise InvalidInput(f"The adversary needs n >= 2, got {n}", n=n)
        self.n = n
        self.delta = delta
        size = delta.safe_set_size(n)
        if s_points is None:
            s = list(range(size))
        else:
            s = sorted(set(s_points))
            for x in s:
                check_point(x, n)
            if len(s) != size:
                raise BadSetSize(f"S must have ceil(delta*n) = {size} points, got {len(s)}", expected=size, got=len(s))
        self.s_points: List[int] = s
        self._in_s: List[bool] = [False] * n
        for x in s:
            self._in_s[x] = True
        self.limit = delta.heavy_limit(n)
        self.log = QueryLog(n)
        self.padding_queries = 0
        self.phase = Phase.ANSWERING

    def in_s(self, x: int) -> bool:
        return self._in_s[x]

    def answer_query(self, x: int, y: int) -> int:
        """Validated entry point: answer and freeze a fresh pair"""
        key = canonical_pair(x, y)
        check_point(key.lo, self.n)
        check_point(key.hi, self.n)
        code = self.log.encode(key)
        if self.log.known_answer(code) is not None:
            raise RepeatedQuery(key.lo, key.hi)
        return self.resolve(key.lo, key.hi, code)

    def resolve(self, lo: int, hi: int, code: int) -> int:
        if self.phase is not Phase.ANSWERING:
            raise PhaseError("The adversary is finalized and accepts no more queries")
        degree = self.log.degree
        limit = self.limit
        a_lo, a_hi = degree[lo], degree[hi]
        s_lo, s_hi = self._in_s[lo], self._in_s[hi]
        cases = (
            (s_lo and s_hi, 3),
            (s_lo and not s_hi and a_lo <= limit, 3),
            (s_lo and not s_hi and a_lo > limit, 4),
            (not s_lo and s_hi and a_hi <= limit, 3),
            (not s_lo and s_hi and a_hi > limit, 4),
            (not s_lo and not s_hi and max(a_lo, a_hi) <= limit, 2),
            (not s_lo and not s_hi and max(a_lo, a_hi) > limit, 4),
        )
        fired = [d for hit, d in cases if hit]
        if len(fired) != 1:
            raise CaseExclusivityError(
                f"{len(fired)} answering cases fired for ({lo},{hi})",
                lo=lo,
                hi=hi,
                alpha_lo=a_lo,
                alpha_hi=a_hi,
            )
        d = fired[0]
        self.log.append(code, lo, hi, d)
        return d

    def _pad_point(self, p: int) -> int:
        count = 0
        n = self.n
        for y in range(n):
            if y == p:
                continue
            lo, hi = (p, y) if p < y else (y, p)
            code = lo * n + hi
            if self.log.known_answer(code) is None:
                self.resolve(lo, hi, code)
                count += 1
        self.padding_queries += count
        return count

    def pad_output_queries(self, p: int) -> int:
        """Freeze every remaining pair at the output, ascending partner order"""
        if self.phase is not Phase.ANSWERING:
            raise PhaseError("Cannot pad a finalized adversary")
        check_point(p, self.n)
        count = self._pad_point(p)
        logger.debug(f"Padded output {p} with {count} queries")
        return count

    def pad_heavy_points(self) -> int:
        """Pad every heavy point to degree n-1 until no heavy point has unfrozen pairs"""
        if self.phase is not Phase.ANSWERING:
            raise PhaseError("Cannot pad a finalized adversary")
        total = 0
        changed = True
        while changed:
            changed = False
            degree = self.log.degree
            for x in range(self.n):
                if degree[x] > self.limit and degree[x] < self.n - 1:
                    total += self._pad_point(x)
                    changed = True
        logger.debug(f"Heavy-point padding added {total} queries")
        return total

    def finalize(self, p: int) -> "FinalizedInstance":
        if self.phase is not Phase.ANSWERING:
            raise PhaseError("The adversary is already finalized")
        check_point(p, self.n)
        degree = np.asarray(self.log.degree, dtype=np.int64)
        if degree[p] != self.n - 1:
            raise PhaseError(f"Output {p} has degree {int(degree[p])}; pad it before finalizing", p=p)

        heavy = degree > self.limit
        p_hat = min(self.s_points, key=lambda x: (int(degree[x]), x))
        alpha_phat = int(degree[p_hat])
        if alpha_phat > self.limit:
            raise EmptySafeSet(
                f"Every point of S is heavy (min degree {alpha_phat} > delta*n); n={self.n} is too small for this query density",
                n=self.n,
                delta=str(self.delta),
                alpha_phat=alpha_phat,
                heavy_limit=self.limit,
                q_total=len(self.log),
            )

        self.phase = Phase.FINALIZED
        in_s = np.asarray(self._in_s, dtype=bool)
        metric = FinalizedMetric(self.n, self.log, in_s | heavy, p_hat)
        q_total = len(self.log)
        logger.info(
            f"Finalized n={self.n} delta={self.delta}: q_total={q_total}, |B|={int(heavy.sum())}, p_hat={p_hat}"
        )
        return FinalizedInstance(
            n=self.n,
            delta=self.delta,
            s_points=list(self.s_points),
            b_points=np.flatnonzero(heavy).tolist(),
            p_hat=p_hat,
            p=p,
            log=self.log,
            q_total=q_total,
            padding_queries=self.padding_queries,
            alpha_phat=alpha_phat,
            metric=metric,
        )


def new_adversary(n: int, delta: DeltaParam, s_points: Optional[Iterable[int]] = None) -> AdversaryState:
    return AdversaryState(n, delta, s_points)


class FinalizedMetric(MetricView):
    """Implicit metric: frozen answers plus the completion rule.

    Unfrozen off-diagonal pairs take 1 between p_hat and a point outside
    S+B, 3 inside S+B, 4 from the rest of S+B to the outside and 2 otherwise.
    """

    def __init__(self, n: int, log: QueryLog, in_sb: np.ndarray, p_hat: int):
        self.n = n
        self.log = log
        self.in_sb = in_sb
        self.in_sb.setflags(write=False)
        self.p_hat = p_hat
        self._is_phat = np.zeros(n, dtype=bool)
        self._is_phat[p_hat] = True
        self._incidence: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    def lookup(self, x: int, y: int) -> int:
        if x == y:
            return 0
        lo, hi = (x, y) if x < y else (y, x)
        frozen = self.log.known_answer(lo * self.n + hi)
        if frozen is not None:
            return frozen
        sb_x, sb_y = bool(self.in_sb[x]), bool(self.in_sb[y])
        ph_x, ph_y = x == self.p_hat, y == self.p_hat
        cases = (
            ((ph_x and not sb_y) or (ph_y and not sb_x), 1),
            (sb_x and sb_y, 3),
            ((sb_x and not ph_x and not sb_y) or (sb_y and not ph_y and not sb_x), 4),
            (not sb_x and not sb_y, 2),
        )
        fired = [d for hit, d in cases if hit]
        if len(fired) != 1:
            raise CaseExclusivityError(f"{len(fired)} completion cases fired for ({x},{y})", x=x, y=y)
        return fired[0]

    def _incident(self, x: int) -> Tuple[np.ndarray, np.ndarray]:
        """Partners and frozen values of every logged pair at x"""
        if self._incidence is None:
            codes = self.log.codes()
            answers = self.log.answers()
            lo, hi = np.divmod(codes, self.n)
            ends = np.concatenate((lo, hi))
            partners = np.concatenate((hi, lo))
            values = np.concatenate((answers, answers))
            order = np.argsort(ends, kind="stable")
            offsets = np.searchsorted(ends[order], np.arange(self.n + 1))
            self._incidence = (partners[order], values[order], offsets)
        partners, values, offsets = self._incidence
        start, stop = offsets[x], offsets[x + 1]
        return partners[start:stop], values[start:stop]

    def _vector(self, x: int, first: bool) -> np.ndarray:
        n = self.n
        if first:
            sb_a, ph_a = np.full(n, self.in_sb[x]), np.full(n, x == self.p_hat)
            sb_b, ph_b = self.in_sb, self._is_phat
        else:
            sb_a, ph_a = self.in_sb, self._is_phat
            sb_b, ph_b = np.full(n, self.in_sb[x]), np.full(n, x == self.p_hat)
        c1 = (ph_a & ~sb_b) | (ph_b & ~sb_a)
        c2 = sb_a & sb_b
        c3 = (sb_a & ~ph_a & ~sb_b) | (sb_b & ~ph_b & ~sb_a)
        c4 = ~sb_a & ~sb_b
        fired = c1.astype(np.int8) + c2 + c3 + c4
        off = np.ones(n, dtype=bool)
        off[x] = False
        if np.any(fired[off] != 1):
            y = int(np.flatnonzero(off & (fired != 1))[0])
            raise CaseExclusivityError(f"{int(fired[y])} completion cases fired for ({x},{y})", x=x, y=y)
        out = np.select([c1, c2, c3], [1, 3, 4], default=2).astype(np.int64)
        out[x] = 0
        partners, values = self._incident(x)
        out[partners] = values
        return out

    def row(self, x: int) -> np.ndarray:
        return self._vector(x, first=True)

    def column(self, x: int) -> np.ndarray:
        return self._vector(x, first=False)

    def materialize(self, max_n: Optional[int] = None) -> np.ndarray:
        limit = settings.dense_max_n if max_n is None else max_n
        if self.n > limit:
            return super().materialize(max_n=limit)
        matrix = np.empty((self.n, self.n), dtype=np.uint8)
        for x in range(self.n):
            matrix[x] = self.row(x)
        return matrix


@dataclass
class FinalizedInstance:
    n: int
    delta: DeltaParam
    s_points: List[int]
    b_points: List[int]
    p_hat: int
    p: int
    log: QueryLog
    q_total: int
    padding_queries: int
    alpha_phat: int
    metric: FinalizedMetric = field(repr=False)

    @property
    def q_algorithm(self) -> int:
        """Distinct queries issued by the algorithm itself"""
        return self.q_total - self.padding_queries

    def to_export(self) -> InstanceExport:
        return InstanceExport(
            n=self.n,
            delta=str(self.delta),
            S=self.s_points,
            B=self.b_points,
            p_hat=self.p_hat,
            p=self.p,
            q_total=self.q_total,
            frozen=[(key.lo, key.hi, answer) for key, answer in self.log.iter_entries()],
        )

    def state_dump(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "delta": str(self.delta),
            "S": self.s_points,
            "B": self.b_points,
            "p_hat": self.p_hat,
            "p": self.p,
            "q_total": self.q_total,
            "padding_queries": self.padding_queries,
            "alpha_phat": self.alpha_phat,
        }


def instance_report(inst: FinalizedInstance) -> InstanceReport:
    """Costs of p and p_hat against the proven bounds"""
    n = inst.n
    cost_p = int(inst.metric.row(inst.p).sum())
    cost_phat = int(inst.metric.row(inst.p_hat).sum())
    lower = 4 * (n - 2 * inst.delta.safe_set_size(n) - 2)
    around = set(inst.s_points) | set(inst.b_points) | inst.log.neighbors(inst.p_hat)
    upper = n + 3 * len(around)
    measured = Fraction(cost_p, cost_phat)
    floor = Fraction(lower, cost_phat)

    state = {**inst.state_dump(), "cost_p": cost_p, "cost_phat": cost_phat, "lower_bound_p": lower, "upper_bound_phat": upper}
    if cost_p < lower:
        raise BoundViolation(f"cost(p)={cost_p} is below the lower bound {lower}", state)
    if cost_phat > upper:
        raise BoundViolation(f"cost(p_hat)={cost_phat} exceeds the upper bound {upper}", state)
    if measured < floor:
        raise BoundViolation(f"measured ratio {measured} is below the floor {floor}", state)

    return InstanceReport(
        n=n,
        delta=str(inst.delta),
        p=inst.p,
        p_hat=inst.p_hat,
        cost_p=cost_p,
        cost_phat=cost_phat,
        lower_bound_p=lower,
        upper_bound_phat=upper,
        ratio_floor=floor,
        measured_ratio=measured,
        b_size=len(inst.b_points),
        q_total=inst.q_total,
        alpha_phat=inst.alpha_phat,
    )


def audit_bookkeeping(inst: FinalizedInstance) -> None:
    """Degree and heavy-set accounting of a finalized instance"""
    degree = inst.log.degree
    n, delta = inst.n, inst.delta
    state = inst.state_dump()
    if sum(degree) != 2 * inst.q_total:
        raise InvariantViolation(f"Degree sum {sum(degree)} != 2*q_total", **state)
    if len(inst.b_points) * delta.num * n > 2 * inst.q_total * delta.den:
        raise InvariantViolation(f"|B|={len(inst.b_points)} exceeds 2*q_total/(delta*n)", **state)
    if inst.p_hat not in inst.s_points:
        raise InvariantViolation(f"p_hat={inst.p_hat} is not in S", **state)
    if delta.is_heavy(degree[inst.p_hat], n):
        raise InvariantViolation(f"p_hat={inst.p_hat} is heavy", **state)
    if degree[inst.p] != n - 1:
        raise InvariantViolation(f"Output {inst.p} has degree {degree[inst.p]} != n-1", **state)


def audit_distances(inst: FinalizedInstance) -> None:
    """Row-streamed check of the finalized distance structure"""
    metric = inst.metric
    n = inst.n
    in_sb = metric.in_sb
    for x in range(n):
        r = metric.row(x)
        off = np.ones(n, dtype=bool)
        off[x] = False

        bad = np.flatnonzero(off & ((r < 1) | (r > 4)))
        if bad.size:
            y = int(bad[0])
            raise InvariantViolation(f"d({x},{y})={int(r[y])} outside {{1,2,3,4}}", x=x, y=y)

        if x == inst.p_hat:
            bad = np.flatnonzero(off & (r != 1) & (r != 3))
            if bad.size:
                y = int(bad[0])
                raise InvariantViolation(f"d(p_hat,{y})={int(r[y])} not in {{1,3}}", x=x, y=y)

        if not in_sb[x]:
            bad = np.flatnonzero(off & ~in_sb & (r != 2))
            if bad.size:
                y = int(bad[0])
                raise InvariantViolation(f"d({x},{y})={int(r[y])} != 2 outside S+B", x=x, y=y)

        for y in np.flatnonzero(off & (r == 1)).tolist():
            other = y if x == inst.p_hat else x if y == inst.p_hat else None
            if other is None or in_sb[other]:
                raise InvariantViolation(f"d({x},{y})=1 is not a p_hat edge to a light point", x=x, y=y)


def replay_consistency(inst: FinalizedInstance, alg: AlgorithmId) -> bool:
    """Re-run alg against the finalized metric and compare with the online run"""
    replay = run(alg, OracleHandle(MetricOracle(inst.metric)))
    recorded = RunTrace(inst.log, 0, inst.q_algorithm, inst.p, redundant_queries=0)
    mismatch = replay.first_mismatch(recorded)
    if mismatch is not None:
        raise ReplayMismatch(f"Replay of {alg} diverged from the recorded run: {mismatch}", algorithm=str(alg))
    logger.debug(f"Replay of {alg} matched {replay.length} queries")
    return True
