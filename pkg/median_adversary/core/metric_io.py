"""Text and JSON formats for metrics, query sets and finalized instances.

Dense metric files hold n on the first line followed by n rows of n
whitespace-separated integers. Query-set files hold "n m" followed by m
lines "lo hi length". Blank lines and lines starting with '#' are skipped;
line numbers in errors refer to the physical file.
"""

from pathlib import Path
from typing import Iterator, List, TextIO, Tuple

import numpy as np

from median_adversary.core.errors import MedianAdversaryError, MetricParseError
from median_adversary.models.metric import DenseMetric, MetricView, QuerySet
from median_adversary.models.schemas import InstanceExport


def _content_lines(stream: TextIO) -> Iterator[Tuple[int, str]]:
    for number, line in enumerate(stream, start=1):
        text = line.strip()
        if text and not text.startswith("#"):
            yield number, text


def _ints(text: str, line: int) -> List[int]:
    try:
        return [int(tok) for tok in text.split()]
    except ValueError:
        raise MetricParseError(f"expected integers, got {text!r}", line=line)


def parse_dense_metric(stream: TextIO) -> DenseMetric:
    lines = _content_lines(stream)
    try:
        line, header = next(lines)
    except StopIteration:
        raise MetricParseError("empty metric file", line=1)
    values = _ints(header, line)
    if len(values) != 1 or values[0] < 1:
        raise MetricParseError(f"header must be a single positive n, got {header!r}", line=line)
    n = values[0]

    rows: List[List[int]] = []
    for line, text in lines:
        if len(rows) == n:
            raise MetricParseError(f"unexpected extra row after {n} rows", line=line)
        row = _ints(text, line)
        if len(row) != n:
            raise MetricParseError(f"row has {len(row)} entries, expected {n}", line=line)
        if any(v < 0 for v in row):
            raise MetricParseError("distances must be non-negative", line=line)
        rows.append(row)
    if len(rows) != n:
        raise MetricParseError(f"expected {n} rows, found {len(rows)}")
    return DenseMetric.from_rows(rows)


def read_dense_metric(path: Path) -> DenseMetric:
    with open(path, encoding="utf-8") as f:
        return parse_dense_metric(f)


def write_dense_metric(metric: MetricView, stream: TextIO, max_n: int) -> None:
    matrix = metric.materialize(max_n=max_n)
    stream.write(f"{metric.n}\n")
    for row in matrix:
        stream.write(" ".join(str(int(v)) for v in row))
        stream.write("\n")


def parse_query_set(stream: TextIO) -> QuerySet:
    lines = _content_lines(stream)
    try:
        line, header = next(lines)
    except StopIteration:
        raise MetricParseError("empty query-set file", line=1)
    values = _ints(header, line)
    if len(values) != 2 or values[0] < 1 or values[1] < 0:
        raise MetricParseError(f"header must be 'n m', got {header!r}", line=line)
    n, m = values

    graph = QuerySet(n)
    for line, text in lines:
        if len(graph) == m:
            raise MetricParseError(f"unexpected extra edge after {m} edges", line=line)
        edge = _ints(text, line)
        if len(edge) != 3:
            raise MetricParseError(f"edge must be 'lo hi length', got {text!r}", line=line)
        try:
            graph.add(*edge)
        except MedianAdversaryError as e:
            raise MetricParseError(e.message, line=line)
    if len(graph) != m:
        raise MetricParseError(f"expected {m} edges, found {len(graph)}")
    return graph


def read_query_set(path: Path) -> QuerySet:
    with open(path, encoding="utf-8") as f:
        return parse_query_set(f)


def write_query_set(graph: QuerySet, stream: TextIO) -> None:
    stream.write(f"{graph.n} {len(graph)}\n")
    for (lo, hi), length in graph.edges.items():
        stream.write(f"{lo} {hi} {length}\n")


def write_instance(export: InstanceExport, path: Path) -> None:
    path.write_text(export.model_dump_json(), encoding="utf-8")


def read_instance(path: Path) -> InstanceExport:
    try:
        return InstanceExport.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise MetricParseError(f"invalid instance file {path}: {e}")


def instance_metric(export: InstanceExport) -> DenseMetric:
    """Rebuild the dense metric of an exported instance from its frozen pairs and sets"""
    n = export.n
    in_sb = np.zeros(n, dtype=bool)
    in_sb[export.S] = True
    in_sb[export.B] = True
    matrix = np.full((n, n), 2, dtype=np.int64)
    matrix[np.ix_(in_sb, in_sb)] = 3
    matrix[np.ix_(in_sb, ~in_sb)] = 4
    matrix[np.ix_(~in_sb, in_sb)] = 4
    matrix[export.p_hat, ~in_sb] = 1
    matrix[~in_sb, export.p_hat] = 1
    for lo, hi, d in export.frozen:
        matrix[lo, hi] = matrix[hi, lo] = d
    np.fill_diagonal(matrix, 0)
    return DenseMetric(matrix)
