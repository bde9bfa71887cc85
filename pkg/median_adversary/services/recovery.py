import heapq
import logging
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from median_adversary.config import settings
from median_adversary.core.errors import Disconnected, InvalidInput
from median_adversary.models.metric import MetricView, QuerySet, canonical_pair
from median_adversary.models.schemas import RecoveryRecord

logger = logging.getLogger(__name__)


class Unreachable(Enum):
    """Distance between points in different components of the query graph"""

    INFINITY = "inf"

    def __repr__(self) -> str:
        return "UNREACHABLE"


UNREACHABLE = Unreachable.INFINITY
Extended = Union[int, Unreachable]


def build_query_graph(m: MetricView, pairs: Iterable[Tuple[int, int]]) -> QuerySet:
    """Copy the lengths of the given pairs from m"""
    graph = QuerySet(m.n)
    for x, y in pairs:
        key = canonical_pair(x, y)
        if key not in graph.edges:
            graph.add(key.lo, key.hi, m.lookup(key.lo, key.hi))
    return graph


def all_pairs(n: int) -> Iterable[Tuple[int, int]]:
    return ((x, y) for x in range(n) for y in range(x + 1, n))


class CompletedMetric:
    """Shortest-path distances of a query graph; unreachable pairs are flagged"""

    def __init__(self, distances: np.ndarray, reachable: np.ndarray):
        self.n = distances.shape[0]
        self.distances = distances
        self.reachable = reachable

    @property
    def connected(self) -> bool:
        return bool(self.reachable.all())

    def dq(self, x: int, y: int) -> Extended:
        if not self.reachable[x, y]:
            return UNREACHABLE
        return int(self.distances[x, y])

    def require_connected(self) -> np.ndarray:
        if not self.connected:
            x, y = (int(v) for v in np.argwhere(~self.reachable)[0])
            raise Disconnected(f"Query graph is disconnected: no path between {x} and {y}", x=x, y=y)
        return self.distances


def _dijkstra(adj: List[List[Tuple[int, int]]], source: int) -> Dict[int, int]:
    dist = {source: 0}
    heap = [(0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, length in adj[u]:
            nd = d + length
            if nd < dist.get(v, nd + 1):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path_completion(graph: QuerySet) -> CompletedMetric:
    """All-pairs shortest paths, one Dijkstra run per source"""
    n = graph.n
    adj = graph.adjacency()
    distances = np.zeros((n, n), dtype=np.int64)
    reachable = np.zeros((n, n), dtype=bool)
    for source in range(n):
        dist = _dijkstra(adj, source)
        targets = np.fromiter(dist.keys(), dtype=np.int64, count=len(dist))
        distances[source, targets] = np.fromiter(dist.values(), dtype=np.int64, count=len(dist))
        reachable[source, targets] = True
    logger.debug(f"Completed {len(graph)} edges on {n} points")
    return CompletedMetric(distances, reachable)


def l1_relative_error(completed: CompletedMetric, m: MetricView) -> Fraction:
    """||d_Q - d||_1 / ||d||_1 over ordered pairs"""
    dq = completed.require_connected()
    d = np.asarray(m.materialize(max_n=settings.dense_max_n), dtype=np.int64)
    total = int(d.sum())
    if total == 0:
        raise InvalidInput("The reference metric has zero norm")
    return Fraction(int(np.abs(dq - d).sum()), total)


def median_from_completion(completed: CompletedMetric) -> int:
    """argmin of the completed distance sums, smallest index on ties"""
    dq = completed.require_connected()
    return int(np.argmin(dq.sum(axis=1)))


def recovery_chain(m: MetricView, graph: QuerySet, completed: Optional[CompletedMetric] = None) -> RecoveryRecord:
    """Error, completion median and the pointwise inequalities behind them"""
    n = m.n
    completed = completed if completed is not None else shortest_path_completion(graph)
    try:
        completed.require_connected()
    except Disconnected as e:
        logger.warning(e.message)
        return RecoveryRecord(n=n, q_size=len(graph), connected=False, error=e.message)

    d = np.asarray(m.materialize(max_n=settings.dense_max_n), dtype=np.int64)
    dq = completed.distances
    z_tilde = median_from_completion(completed)
    costs = d.sum(axis=1)
    z_star = int(np.argmin(costs))
    cost_d_ztilde = int(costs[z_tilde])
    cost_dq_ztilde = int(dq[z_tilde].sum())
    dq_norm = int(dq.sum())
    d_norm = int(costs.sum())
    cost_d_zstar = int(costs[z_star])

    return RecoveryRecord(
        n=n,
        q_size=len(graph),
        connected=True,
        l1_relative_error=l1_relative_error(completed, m),
        z_tilde=z_tilde,
        cost_d_ztilde=cost_d_ztilde,
        cost_dq_ztilde=cost_dq_ztilde,
        dq_norm=dq_norm,
        d_norm=d_norm,
        z_star=z_star,
        cost_d_zstar=cost_d_zstar,
        domination_ok=bool((dq >= d).all()),
        chain_completion_ok=cost_d_ztilde <= cost_dq_ztilde,
        chain_average_ok=n * cost_dq_ztilde <= dq_norm,
        chain_norm_ok=d_norm <= 2 * n * cost_d_zstar,
    )
