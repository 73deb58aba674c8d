"""Run-time statistics and report tables.

Report columns per configuration:

AVG
    mean run-time pooled over all jobs of all containers.
SKW
    ``|mean - median|`` per container; reported as min/max across containers.
SD_MX
    standard deviation of the container with the largest skew (ties go to
    the larger deviation).

Integer inputs are handled with exact integer/rational arithmetic and
rounded once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from contsched.errors import EmptyInput

DELIMITED_HEADER = "label,avg_us,skw_min_us,skw_max_us,sd_mx_us,misses,starred"


@dataclass(frozen=True)
class SummaryStats:
    count: int
    min: float
    max: float
    mean: float
    median: float
    sd: float


def _all_int(xs) -> bool:
    return all(isinstance(x, (int, np.integer)) and not isinstance(x, bool) for x in xs)


def _exact_moments(xs: Sequence) -> tuple[Fraction, Fraction]:
    """Exact mean and n-1 variance (variance 0 for a single sample)."""
    n = len(xs)
    if _all_int(xs):
        xs = [int(x) for x in xs]
        s = sum(xs)
        q = sum(x * x for x in xs)
        var = Fraction(n * q - s * s, n * (n - 1)) if n > 1 else Fraction(0)
        return Fraction(s, n), var
    fx = [Fraction(float(x)) for x in xs]
    mean = sum(fx, Fraction(0)) / n
    var = sum(((x - mean) ** 2 for x in fx), Fraction(0)) / (n - 1) if n > 1 else Fraction(0)
    return mean, var


def _exact_median(ordered: Sequence) -> Fraction:
    n = len(ordered)
    mid = n // 2
    if n % 2:
        return Fraction(ordered[mid])
    return (Fraction(ordered[mid - 1]) + Fraction(ordered[mid])) / 2


def _sqrt_fraction(q: Fraction) -> float:
    return math.sqrt(float(q))


def summarize(samples: Iterable) -> SummaryStats:
    """Exact order statistics plus mean and n-1 standard deviation."""
    xs = sorted(samples)
    if not xs:
        raise EmptyInput("summarize needs at least one sample")
    mean, var = _exact_moments(xs)
    return SummaryStats(
        count=len(xs),
        min=xs[0],
        max=xs[-1],
        mean=float(mean),
        median=float(_exact_median(xs)),
        sd=_sqrt_fraction(var),
    )


@dataclass(frozen=True)
class GroupReport:
    label: str
    avg: float
    skw_min: float
    skw_max: float
    sd_mx: float
    misses: Mapping[str, int] = field(default_factory=dict)
    incomplete_log: bool = False
    system: str | None = None
    # containers that contributed at least one record
    reporting: int = 0

    @property
    def total_misses(self) -> int:
        return sum(self.misses.values())


def group_report(runtimes: Mapping[str, Sequence], label: str = "", system: str | None = None,
                 misses: Mapping[str, int] | None = None,
                 expected: Iterable[str] | None = None) -> GroupReport:
    """Aggregate per-container run-times into one report row.

    ``expected`` lists containers that should have produced records; any of
    them missing (or no records at all) sets ``incomplete_log``.
    """
    expected = list(expected) if expected is not None else list(runtimes)
    present = {tid: xs for tid, xs in runtimes.items() if len(xs)}
    incomplete = not present or any(tid not in present for tid in expected)
    misses = dict(misses or {})
    if not present:
        nan = math.nan
        return GroupReport(label, nan, nan, nan, nan, misses, True, system, 0)

    pooled_n = 0
    pooled_sum = Fraction(0)
    best = None  # (skew, var)
    skews = []
    for tid in sorted(present):
        xs = sorted(present[tid])
        mean, var = _exact_moments(xs)
        skew = abs(mean - _exact_median(xs))
        skews.append(skew)
        if best is None or (skew, var) > best:
            best = (skew, var)
        pooled_n += len(xs)
        pooled_sum += mean * len(xs)
    avg = float(pooled_sum / pooled_n)
    return GroupReport(
        label=label,
        avg=avg,
        skw_min=float(min(skews)),
        skw_max=float(max(skews)),
        sd_mx=_sqrt_fraction(best[1]),
        misses=misses,
        incomplete_log=incomplete,
        system=system,
        reporting=len(present),
    )


def report_from_trace(trace, label: str = "", system: str | None = None,
                      expected: Iterable[str] | None = None) -> GroupReport:
    """Report row over dispatch-to-completion run-times of a trace."""
    runtimes = {tid: [r.run_time for r in recs] for tid, recs in trace.records.items()}
    misses = {tid: sum(r.missed for r in recs) for tid, recs in trace.records.items()}
    return group_report(runtimes, label, system, misses, expected)


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    overshoots: int
    ratio: float


def threshold_check(latencies, cycle: int) -> ThresholdResult:
    """Count firing latencies strictly above a tenth of the cycle time."""
    if cycle <= 0:
        raise ValueError("cycle must be positive")
    threshold = cycle / 10
    arr = np.asarray(latencies)
    n = int(arr.size)
    over = int(np.count_nonzero(arr > threshold)) if n else 0
    return ThresholdResult(threshold, over, over / n if n else 0.0)


def _fmt_avg(r: GroupReport) -> str:
    return "-" if math.isnan(r.avg) else f"{r.avg:.0f}"


def _fmt_skw(r: GroupReport) -> str:
    if math.isnan(r.skw_min):
        s = "-"
    elif r.reporting == 1:
        s = f"{r.skw_max:.0f}"
    else:
        s = f"{r.skw_min:.0f}/{r.skw_max:.0f}"
    return s + ("*" if r.incomplete_log else "")


def _fmt_sd(r: GroupReport) -> str:
    return "-" if math.isnan(r.sd_mx) else f"{r.sd_mx:.2f}"


def render_table(reports: Sequence[GroupReport], systems: Sequence[str], fmt: str = "text") -> str:
    """Render report rows.

    ``text`` gives one line per configuration label with AVG, SKW and SD_MX
    for every system, ``&``-separated. ``delimited`` gives one CSV line per
    report.
    """
    if fmt == "delimited":
        lines = [DELIMITED_HEADER]
        for r in reports:
            label = f"{r.system}:{r.label}" if r.system else r.label
            lines.append(",".join([
                label,
                "" if math.isnan(r.avg) else repr(r.avg),
                "" if math.isnan(r.skw_min) else repr(r.skw_min),
                "" if math.isnan(r.skw_max) else repr(r.skw_max),
                "" if math.isnan(r.sd_mx) else repr(r.sd_mx),
                str(r.total_misses),
                "1" if r.incomplete_log else "0",
            ]))
        return "\n".join(lines) + "\n"
    if fmt != "text":
        raise ValueError(f"unknown table format {fmt!r}")

    systems = list(systems)
    header = ["Configuration"] + [f"{s} {col}" if s else col
                                  for s in systems for col in ("AVG", "SKW", "SD_MX")]
    rows = [header]
    labels: list[str] = []
    cells: dict[tuple[str, str | None], GroupReport] = {}
    for r in reports:
        if r.label not in labels:
            labels.append(r.label)
        cells[(r.label, r.system)] = r
    for label in labels:
        row = [label]
        for s in systems:
            r = cells.get((label, s))
            if r is None and len(systems) == 1:
                r = cells.get((label, None))
            row += ["", "", ""] if r is None else [_fmt_avg(r), _fmt_skw(r), _fmt_sd(r)]
        rows.append(row)
    return "\n".join(" & ".join(row) for row in rows) + "\n"
