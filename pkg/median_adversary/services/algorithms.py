import json
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Protocol, Tuple

from median_adversary.core.errors import (
    BudgetExceeded,
    InvalidInput,
    NonDeterministicAlgorithm,
    SelfPair,
    UnknownAlgorithm,
)
from median_adversary.models.metric import MetricView, PairKey, QueryLog, check_point

logger = logging.getLogger(__name__)


class DistanceSource(Protocol):
    """Anything that can answer a fresh canonical pair and log it"""

    n: int
    log: QueryLog

    def resolve(self, lo: int, hi: int, code: int) -> int:
        ...


class MetricOracle:
    """Passive source backed by an explicit metric"""

    def __init__(self, metric: MetricView):
        self.n = metric.n
        self.metric = metric
        self.log = QueryLog(metric.n)

    def resolve(self, lo: int, hi: int, code: int) -> int:
        d = self.metric.lookup(lo, hi)
        self.log.append(code, lo, hi, d)
        return d


class OracleHandle:
    """Query-counting front end shared by every algorithm.

    Repeats are served from the source's log and counted as redundant; the
    budget applies to distinct queries and is checked before the source
    produces an answer.
    """

    def __init__(self, source: DistanceSource, budget: Optional[int] = None):
        self.source = source
        self.n = source.n
        self.budget = budget if budget is not None else self.n * (self.n - 1) // 2
        self.distinct_queries = 0
        self.redundant_queries = 0
        self._log = source.log
        self._start = len(source.log)

    def query(self, x: int, y: int) -> int:
        if x == y:
            raise SelfPair(x)
        lo, hi = (x, y) if x < y else (y, x)
        if lo < 0 or hi >= self.n:
            raise InvalidInput(f"Query ({x},{y}) outside [0, {self.n})", x=x, y=y)
        code = lo * self.n + hi
        cached = self._log.known_answer(code)
        if cached is not None:
            self.redundant_queries += 1
            return cached
        if self.distinct_queries >= self.budget:
            raise BudgetExceeded(self.budget)
        d = self.source.resolve(lo, hi, code)
        self.distinct_queries += 1
        return d

    def trace(self, output: int) -> "RunTrace":
        return RunTrace(
            log=self._log,
            start=self._start,
            length=self.distinct_queries,
            output=output,
            redundant_queries=self.redundant_queries,
        )


class RunTrace:
    """The distinct (pair, answer) sequence of one run plus its output"""

    def __init__(self, log: QueryLog, start: int, length: int, output: int, redundant_queries: int):
        self._log = log
        self._start = start
        self.length = length
        self.output = output
        self.redundant_queries = redundant_queries

    @property
    def distinct_queries(self) -> int:
        return self.length

    def entries(self) -> Iterator[Tuple[PairKey, int]]:
        for i, (key, answer) in enumerate(self._log.iter_entries(stop=self._start + self.length)):
            if i >= self._start:
                yield key, answer

    def to_jsonl(self) -> Iterator[str]:
        for key, answer in self.entries():
            yield json.dumps({"x": key.lo, "y": key.hi, "d": answer})

    def first_mismatch(self, other: "RunTrace") -> Optional[str]:
        """Human-readable description of the first divergence, or None"""
        if self.output != other.output:
            return f"output {self.output} != {other.output}"
        if self.length != other.length:
            return f"trace length {self.length} != {other.length}"
        for i, (mine, theirs) in enumerate(zip(self.entries(), other.entries())):
            if mine != theirs:
                return f"entry {i}: {mine} != {theirs}"
        return None


# Algorithm registry

AlgorithmFunc = Callable[[OracleHandle, Optional[int]], int]


@dataclass(frozen=True)
class AlgorithmId:
    name: str
    param: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> "AlgorithmId":
        name, _, param = text.strip().partition(":")
        if name not in _REGISTRY:
            raise UnknownAlgorithm(f"Unknown algorithm {name!r}; known: {sorted(_REGISTRY)}")
        if not param:
            return cls(name, _REGISTRY[name].default_param)
        try:
            return cls(name, int(param))
        except ValueError:
            raise UnknownAlgorithm(f"Algorithm parameter must be an integer, got {param!r}")

    def __str__(self) -> str:
        if self.param is None or self.param == _REGISTRY[self.name].default_param:
            return self.name
        return f"{self.name}:{self.param}"


@dataclass(frozen=True)
class RegisteredAlgorithm:
    name: str
    func: AlgorithmFunc
    default_param: Optional[int]


_REGISTRY: Dict[str, RegisteredAlgorithm] = {}


def register(
    name: str,
    deterministic: bool = True,
    default_param: Optional[int] = None,
) -> Callable[[AlgorithmFunc], AlgorithmFunc]:
    """Add an algorithm to the registry; only deterministic ones are accepted"""

    def decorator(func: AlgorithmFunc) -> AlgorithmFunc:
        if not deterministic:
            raise NonDeterministicAlgorithm(
                f"Algorithm {name!r} is randomized; the adversary needs deterministic algorithms"
            )
        _REGISTRY[name] = RegisteredAlgorithm(name, func, default_param)
        return func

    return decorator


def available_algorithms() -> List[str]:
    return sorted(_REGISTRY)


def run(alg: AlgorithmId, oracle: OracleHandle) -> RunTrace:
    """Run a registered algorithm to completion against an oracle"""
    if oracle.n < 2:
        raise InvalidInput(f"Algorithms need n >= 2, got {oracle.n}")
    registered = _REGISTRY.get(alg.name)
    if registered is None:
        raise UnknownAlgorithm(f"Unknown algorithm {alg.name!r}")
    output = registered.func(oracle, alg.param)
    check_point(output, oracle.n)
    logger.debug(f"{alg} made {oracle.distinct_queries} distinct queries, output {output}")
    return oracle.trace(output)


def ceil_root(n: int, h: int) -> int:
    """Smallest k >= 1 with k**h >= n"""
    k = max(1, round(n ** (1.0 / h)))
    while k**h < n:
        k += 1
    while k > 1 and (k - 1) ** h >= n:
        k -= 1
    return k


def evenly_spaced(n: int, k: int) -> List[int]:
    step = n // k
    return [j * step for j in range(k)]


@register("exhaustive")
def exhaustive(oracle: OracleHandle, param: Optional[int] = None) -> int:
    """Exact baseline: every pair once, argmin of the cost"""
    n = oracle.n
    costs = [0] * n
    for x in range(n):
        for y in range(x + 1, n):
            d = oracle.query(x, y)
            costs[x] += d
            costs[y] += d
    return min(range(n), key=lambda i: (costs[i], i))


@register("pivot_h", default_param=3)
def pivot_h(oracle: OracleHandle, h: Optional[int] = 3) -> int:
    """Nonadaptive pivot scheme with ceil(n^(1/h)) evenly spaced pivots.

    Every pivot is measured against every point; the pivot with the smallest
    distance sum wins. The query sequence never depends on the answers.
    """
    if h is None or h < 2:
        raise InvalidInput(f"pivot_h needs h >= 2, got {h}")
    n = oracle.n
    pivots = evenly_spaced(n, ceil_root(n, h))
    sums: Dict[int, int] = {}
    for u in pivots:
        sums[u] = sum(oracle.query(u, v) for v in range(n) if v != u)
    return min(pivots, key=lambda u: (sums[u], u))


@register("pivot")
def pivot(oracle: OracleHandle, param: Optional[int] = None) -> int:
    """pivot_h with h = 2: ceil(sqrt(n)) pivots, at most ceil(sqrt(n)) * n queries"""
    return pivot_h(oracle, 2)


@register("greedy_probe")
def greedy_probe(oracle: OracleHandle, param: Optional[int] = None) -> int:
    """Adaptive successive halving over an expanding sample.

    Candidates start as ceil(sqrt(n)) evenly spaced points. Each round the
    surviving candidates measure the next slice of an interleaved sample
    order, then the better half by partial sum survives. The sample doubles
    until it covers every point, so the last candidate standing has its
    exact cost.
    """
    n = oracle.n
    k = ceil_root(n, 2)
    candidates = evenly_spaced(n, k)
    order = sorted(range(n), key=lambda i: (i % k, i))
    sums = {c: 0 for c in candidates}
    seen = 0
    size = k
    while True:
        size = min(n, size)
        batch = order[seen:size]
        for c in candidates:
            sums[c] += sum(oracle.query(c, v) for v in batch if v != c)
        seen = size
        if size == n:
            break
        ranked = sorted(candidates, key=lambda c: (sums[c], c))
        candidates = ranked[: max(1, (len(ranked) + 1) // 2)]
        size *= 2
    return min(candidates, key=lambda c: (sums[c], c))
