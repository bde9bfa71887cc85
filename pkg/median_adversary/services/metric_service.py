import logging
from fractions import Fraction
from typing import Literal, Optional, Tuple

import numpy as np

from median_adversary.config import settings
from median_adversary.core.errors import DegenerateOptimum, RangeError
from median_adversary.models.metric import MetricView
from median_adversary.models.schemas import ValidationReport, Violation

logger = logging.getLogger(__name__)

ValidationMode = Literal["full", "structured"]


class MetricService:
    """Costs, exact medians and metric validation"""

    def point_cost(self, metric: MetricView, x: int) -> int:
        """Un-normalized distance sum of x"""
        return int(metric.row(x).sum())

    def exact_median(self, metric: MetricView) -> Tuple[int, int]:
        """Brute-force argmin of the cost, smallest index on ties"""
        matrix = metric.materialize(max_n=settings.dense_max_n)
        costs = matrix.sum(axis=1, dtype=np.int64)
        best = int(np.argmin(costs))
        return best, int(costs[best])

    def approx_ratio(self, cost_out: int, cost_opt: int) -> Fraction:
        if cost_opt == 0:
            raise DegenerateOptimum("Optimal cost is zero; the ratio is undefined")
        return Fraction(cost_out, cost_opt)

    def closeness(self, metric: MetricView, x: int) -> Fraction:
        """Closeness centrality: inverse average distance to the other points"""
        cost = self.point_cost(metric, x)
        if cost == 0:
            raise DegenerateOptimum(f"Point {x} has zero distance sum")
        return Fraction(metric.n - 1, cost)

    def validate_metric(self, metric: MetricView, mode: ValidationMode = "full") -> ValidationReport:
        if mode == "full":
            report = self._validate_full(metric)
        else:
            report = self._validate_structured(metric)
        if not report.ok:
            logger.warning(f"Metric validation ({mode}) failed: {report.failures[0].model_dump()}")
        return report

    def _validate_full(self, metric: MetricView) -> ValidationReport:
        d = np.asarray(metric.materialize(max_n=settings.dense_max_n), dtype=np.int64)
        n = d.shape[0]
        report = ValidationReport(mode="full", n=n)

        asym = np.argwhere(d != d.T)
        if asym.size:
            x, y = (int(v) for v in asym[0])
            report.symmetric_ok = False
            report.failures.append(
                Violation(check="symmetry", x=x, y=y, d_xy=int(d[x, y]), d_yx=int(d[y, x]))
            )

        nonzero_diag = np.nonzero(np.diag(d))[0]
        if nonzero_diag.size:
            x = int(nonzero_diag[0])
            report.diagonal_ok = False
            report.failures.append(Violation(check="diagonal", x=x, y=x, d_xy=int(d[x, x])))

        zero_off = np.argwhere((d == 0) & ~np.eye(n, dtype=bool))
        if zero_off.size:
            x, y = (int(v) for v in zero_off[0])
            report.positivity_ok = False
            report.failures.append(Violation(check="positivity", x=x, y=y, d_xy=0))

        # distinct triples only: d(x,y) + d(x,z) >= d(y,z)
        for x in range(n):
            bad = (d[x][:, None] + d[x][None, :]) < d
            bad[x, :] = False
            bad[:, x] = False
            np.fill_diagonal(bad, False)
            if bad.any():
                y, z = (int(v) for v in np.argwhere(bad)[0])
                self._record_triangle(report, x, y, z, int(d[x, y]), int(d[x, z]), int(d[y, z]))
                break

        return report

    def _validate_structured(self, metric: MetricView) -> ValidationReport:
        """Row-streamed check for metrics valued in {1,2,3,4}.

        With such values a violation d(x,y) + d(x,z) < d(y,z) needs legs summing
        to at most 3: either both legs are 1 and d(y,z) is 3 or 4, or the legs
        are {1, 2} and d(y,z) = 4. Legs are read from row x and the far side
        from the matrix entry, the same orientation as the full check.
        Only rows and columns of endpoints of distance-1 pairs are inspected
        beyond the per-row range, symmetry and diagonal checks.
        """
        n = metric.n
        report = ValidationReport(mode="structured", n=n)

        for x in range(n):
            r = metric.row(x)
            c = metric.column(x)
            off = np.ones(n, dtype=bool)
            off[x] = False

            out_of_range = np.nonzero(off & ((r < 1) | (r > 4)))[0]
            if out_of_range.size:
                y = int(out_of_range[0])
                raise RangeError(
                    f"d({x},{y})={int(r[y])} outside {{1,2,3,4}}",
                    x=x,
                    y=y,
                    d_xy=int(r[y]),
                )

            if r[x] != 0 and report.diagonal_ok:
                report.diagonal_ok = False
                report.failures.append(Violation(check="diagonal", x=x, y=x, d_xy=int(r[x])))

            mismatch = np.nonzero(r != c)[0]
            if mismatch.size and report.symmetric_ok:
                y = int(mismatch[0])
                report.symmetric_ok = False
                report.failures.append(
                    Violation(check="symmetry", x=x, y=y, d_xy=int(r[y]), d_yx=int(c[y]))
                )

            if not report.triangle_ok:
                continue

            # legs always come from row x, the far side from the matrix entry
            ones = np.nonzero(off & (r == 1))[0]
            twos = np.nonzero(r == 2)[0]
            for y in ones.tolist():
                ry = metric.row(y)
                far = ones[(ones != y) & (ry[ones] >= 3)]
                if far.size:
                    z = int(far[0])
                    self._record_triangle(report, x, y, z, 1, 1, int(ry[z]))
                    break
                split = twos[ry[twos] == 4]
                if split.size:
                    self._record_triangle(report, x, y, int(split[0]), 1, 2, 4)
                    break
                split = twos[metric.column(y)[twos] == 4]
                if split.size:
                    self._record_triangle(report, x, int(split[0]), y, 2, 1, 4)
                    break

        return report

    @staticmethod
    def _record_triangle(
        report: ValidationReport, x: int, y: int, z: int, d_xy: int, d_xz: int, d_yz: int
    ) -> None:
        violation = Violation(check="triangle", x=x, y=y, z=z, d_xy=d_xy, d_xz=d_xz, d_yz=d_yz)
        report.triangle_ok = False
        report.first_violation = violation
        report.failures.append(violation)


def wants_full_validation(n: int, force_full: bool = False, limit: Optional[int] = None) -> bool:
    """Whether the full O(n^3) validator should run for this size"""
    return force_full or n <= (settings.full_validate_max_n if limit is None else limit)


# Singleton instance
metric_service = MetricService()
