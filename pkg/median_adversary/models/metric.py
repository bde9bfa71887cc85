from abc import ABC, abstractmethod
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np

from median_adversary.core.errors import InvalidInput, MetricTooLarge, RepeatedQuery, SelfPair


class PairKey(NamedTuple):
    """Canonical unordered pair, lo < hi"""

    lo: int
    hi: int


def canonical_pair(x: int, y: int) -> PairKey:
    """Map (x, y) and (y, x) to the same key"""
    if x == y:
        raise SelfPair(x)
    return PairKey(x, y) if x < y else PairKey(y, x)


def check_point(x: int, n: int) -> None:
    if not 0 <= x < n:
        raise InvalidInput(f"Point {x} outside [0, {n})", point=x, n=n)


class QueryLog:
    """Ordered log of distinct unordered pairs with per-point degree counters.

    Entries are stored as integer codes ``lo * n + hi`` in an insertion-ordered
    dict, which doubles as the O(1) repeat index and as the record of the
    answer given for each pair.
    """

    def __init__(self, n: int):
        self.n = n
        self.degree: List[int] = [0] * n
        self._answers: Dict[int, Optional[int]] = {}

    def __len__(self) -> int:
        return len(self._answers)

    def __contains__(self, key: PairKey) -> bool:
        return self.encode(key) in self._answers

    def encode(self, key: PairKey) -> int:
        return key.lo * self.n + key.hi

    def decode(self, code: int) -> PairKey:
        return PairKey(*divmod(code, self.n))

    def record_query(self, key: PairKey, answer: Optional[int] = None) -> None:
        """Append a fresh pair; both endpoint degrees move up by exactly one"""
        check_point(key.lo, self.n)
        check_point(key.hi, self.n)
        if key.lo >= key.hi:
            raise InvalidInput(f"Pair {tuple(key)} is not canonical")
        code = self.encode(key)
        if code in self._answers:
            raise RepeatedQuery(key.lo, key.hi)
        self.append(code, key.lo, key.hi, answer)

    def append(self, code: int, lo: int, hi: int, answer: Optional[int]) -> None:
        """Unchecked append; the caller guarantees a canonical, in-range, fresh pair"""
        self._answers[code] = answer
        self.degree[lo] += 1
        self.degree[hi] += 1

    def degree_of(self, x: int) -> int:
        """alpha_i(x) with i the current log length"""
        return self.degree[x]

    def answer(self, key: PairKey) -> Optional[int]:
        return self._answers.get(self.encode(key))

    def iter_seq(self, stop: Optional[int] = None) -> Iterator[PairKey]:
        for i, code in enumerate(self._answers):
            if stop is not None and i >= stop:
                return
            yield self.decode(code)

    def iter_entries(self, stop: Optional[int] = None) -> Iterator[tuple[PairKey, Optional[int]]]:
        for i, (code, answer) in enumerate(self._answers.items()):
            if stop is not None and i >= stop:
                return
            yield self.decode(code), answer

    @property
    def seq(self) -> List[PairKey]:
        return list(self.iter_seq())

    def codes(self) -> np.ndarray:
        return np.fromiter(self._answers.keys(), dtype=np.int64, count=len(self._answers))

    def answers(self) -> np.ndarray:
        return np.fromiter(self._answers.values(), dtype=np.int64, count=len(self._answers))

    def known_answer(self, code: int) -> Optional[int]:
        return self._answers.get(code)

    def neighbors(self, x: int) -> Set[int]:
        """N_i(x): the points sharing a logged pair with x"""
        codes = self.codes()
        lo, hi = np.divmod(codes, self.n)
        found = np.concatenate((hi[lo == x], lo[hi == x]))
        return set(found.tolist())


class MetricView(ABC):
    """A total symmetric distance function on n points"""

    n: int

    @abstractmethod
    def lookup(self, x: int, y: int) -> int:
        ...

    def row(self, x: int) -> np.ndarray:
        """d(x, .) with x as the first argument"""
        return np.fromiter((self.lookup(x, y) for y in range(self.n)), dtype=np.int64, count=self.n)

    def column(self, x: int) -> np.ndarray:
        """d(., x) with x as the second argument"""
        return np.fromiter((self.lookup(y, x) for y in range(self.n)), dtype=np.int64, count=self.n)

    def materialize(self, max_n: Optional[int] = None) -> np.ndarray:
        if max_n is not None and self.n > max_n:
            raise MetricTooLarge(
                f"Dense materialization refused for n={self.n} (limit {max_n})",
                n=self.n,
                limit=max_n,
            )
        return np.stack([self.row(x) for x in range(self.n)]) if self.n else np.zeros((0, 0), dtype=np.int64)


def dense_dtype(max_value: int) -> type:
    """One byte per entry whenever the values fit"""
    return np.uint8 if max_value <= np.iinfo(np.uint8).max else np.int64


class DenseMetric(MetricView):
    """Row-major n x n matrix; not assumed to be a valid metric"""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidInput(f"Distance matrix must be square, got shape {matrix.shape}")
        if matrix.size and matrix.min() < 0:
            raise InvalidInput("Distances must be non-negative integers")
        if not np.issubdtype(matrix.dtype, np.integer):
            raise InvalidInput(f"Distances must be integers, got dtype {matrix.dtype}")
        self.n = matrix.shape[0]
        self.matrix = matrix.astype(dense_dtype(int(matrix.max()) if matrix.size else 0), copy=False)
        self.matrix.setflags(write=False)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "DenseMetric":
        return cls(np.array(rows, dtype=np.int64))

    @classmethod
    def uniform(cls, n: int, value: int) -> "DenseMetric":
        matrix = np.full((n, n), value, dtype=np.int64)
        np.fill_diagonal(matrix, 0)
        return cls(matrix)

    def lookup(self, x: int, y: int) -> int:
        return int(self.matrix[x, y])

    def row(self, x: int) -> np.ndarray:
        return self.matrix[x].astype(np.int64)

    def column(self, x: int) -> np.ndarray:
        return self.matrix[:, x].astype(np.int64)

    def materialize(self, max_n: Optional[int] = None) -> np.ndarray:
        return self.matrix


class QuerySet:
    """Observed pairs with their positive lengths"""

    def __init__(self, n: int, edges: Optional[Dict[PairKey, int]] = None):
        self.n = n
        self.edges: Dict[PairKey, int] = {}
        for (x, y), length in (edges or {}).items():
            self.add(x, y, length)

    def add(self, x: int, y: int, length: int) -> None:
        key = canonical_pair(x, y)
        check_point(key.lo, self.n)
        check_point(key.hi, self.n)
        if key in self.edges:
            raise InvalidInput(f"Duplicate pair {tuple(key)} in query set", lo=key.lo, hi=key.hi)
        if length <= 0:
            raise InvalidInput(f"Edge {tuple(key)} needs a positive length, got {length}", lo=key.lo, hi=key.hi)
        self.edges[key] = length

    def __len__(self) -> int:
        return len(self.edges)

    def adjacency(self) -> List[List[Tuple[int, int]]]:
        adj: List[List[Tuple[int, int]]] = [[] for _ in range(self.n)]
        for (lo, hi), length in self.edges.items():
            adj[lo].append((hi, length))
            adj[hi].append((lo, length))
        return adj
