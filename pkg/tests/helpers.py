import json
from typing import Dict, List

import numpy as np

from median_adversary.models.metric import DenseMetric, QuerySet
from median_adversary.services.recovery import shortest_path_completion


def random_metric(rng: np.random.Generator, n: int, max_weight: int = 10) -> DenseMetric:
    """Shortest-path closure of a random complete weighted graph"""
    graph = QuerySet(n)
    for x in range(n):
        for y in range(x + 1, n):
            graph.add(x, y, int(rng.integers(1, max_weight + 1)))
    return DenseMetric(shortest_path_completion(graph).distances)


def json_lines(output: str) -> List[Dict]:
    """JSON objects printed on their own lines, ignoring log and table output"""
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]
