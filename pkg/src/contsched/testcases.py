"""Built-in container workloads and the plan/simulate/report pipeline for them.

=====  ==========================================  =====
case   workload per unit                           units
=====  ==========================================  =====
1      900 us every 10 ms                           4-10
2      2.5 ms every 5 ms                            1-2
3      2.5/5 ms, then 3/9 ms, then 0.9/10 ms        1-3
4      10 ms every 100 ms                           4-10
=====  ==========================================  =====
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from contsched.admission import ResourceSlice, SliceAssignment, partition
from contsched.config import CASE_DEFAULT_SCALE, CASE_SCALES, DEFAULT_DURATION, case_tasks
from contsched.errors import Infeasible, UnknownCase, UnknownProfile
from contsched.model import TaskSet, utilization
from contsched.noise import PRESETS, SystemProfile, get_profile
from contsched.sim import SimConfig, Trace, simulate
from contsched.stats import GroupReport, report_from_trace

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CaseRun:
    report: GroupReport
    trace: Trace
    tasks: TaskSet
    assignment: SliceAssignment
    # False when admission rejected the set and it was simulated anyway
    admitted: bool


def case_taskset(case: int, scale: int | None = None) -> TaskSet:
    if case not in CASE_SCALES:
        raise UnknownCase(f"unknown test case {case!r}; choose 1-4")
    scale = CASE_DEFAULT_SCALE[case] if scale is None else scale
    if scale not in CASE_SCALES[case]:
        r = CASE_SCALES[case]
        raise UnknownCase(f"case {case} supports {r.start}-{r.stop - 1} units, got {scale}")
    return TaskSet(case_tasks(case, scale))


def run_testcase(case: int, system: str | SystemProfile, scale: int | None = None,
                 duration: int = DEFAULT_DURATION, seed: int = 0, quantum: int = 0) -> CaseRun:
    """Plan, simulate and summarize one configuration on one slice of a full CPU."""
    tasks = case_taskset(case, scale)
    if isinstance(system, SystemProfile):
        profile = system
    elif system in PRESETS:
        profile = get_profile(system)
    else:
        raise UnknownProfile(system)
    try:
        assignment = partition(tasks, [ResourceSlice("0", 1.0)])
        admitted = True
    except Infeasible as exc:
        log.warning("case %s: admission rejected %s (U=%.4f); simulating as overload",
                    case, ", ".join(exc.unplaced), utilization(tasks))
        assignment = SliceAssignment.single(tasks)
        admitted = False
    trace = simulate(SimConfig(assignment, profile, duration, seed, quantum=quantum), tasks)
    n = len(tasks)
    label = f"{n} unit" if n == 1 else f"{n} units"
    report = report_from_trace(trace, label, profile.name, expected=tasks.ids)
    return CaseRun(report, trace, tasks, assignment, admitted)


def run_batch(case: int, systems, scales=None, duration: int = DEFAULT_DURATION,
              seed: int = 0) -> list[GroupReport]:
    """Report rows for every (scale, system) pair, shaped like one results table."""
    scales = CASE_SCALES[case] if scales is None else scales
    return [run_testcase(case, s, k, duration, seed).report for k in scales for s in systems]
