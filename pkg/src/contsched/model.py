"""Timing vocabulary for periodic container tasks.

All durations and instants are integer microseconds. A job's total
computation time decomposes as::

    total = firing_latency + env_noise + task_noise + runtime

and a job is late when it finishes after ``release + deadline``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from contsched.errors import ConstraintViolation, HyperperiodOverflow

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class TaskSpec:
    """Periodic timing contract of one container.

    ``runtime`` is the programmed busy-loop time; ``wcet`` is the budget
    used by admission. Construction does not validate, use :func:`validate`.
    """

    id: str
    period: int
    deadline: int
    wcet: int
    runtime: int

    @classmethod
    def implicit(cls, id: str, period: int, wcet: int, runtime: int | None = None) -> TaskSpec:
        """Task whose deadline equals its period (and runtime its wcet if omitted)."""
        return cls(id, period, period, wcet, wcet if runtime is None else runtime)

    @property
    def utilization(self) -> Fraction:
        return Fraction(self.wcet, self.period)

    @property
    def density(self) -> Fraction:
        return Fraction(self.wcet, self.deadline)


def validate(task: TaskSpec) -> TaskSpec:
    """Return ``task`` unchanged if its timing chain holds, else raise.

    >>> validate(TaskSpec("c0", 10000, 10000, 900, 900)).wcet
    900
    """
    for name in ("period", "deadline", "wcet", "runtime"):
        value = getattr(task, name)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConstraintViolation(f"{task.id}: {name} must be an integer number of microseconds")
        if value <= 0:
            raise ConstraintViolation(f"{task.id}: {name} must be positive (got {value})")
    if task.runtime > task.wcet:
        raise ConstraintViolation(f"{task.id}: runtime > wcet ({task.runtime} > {task.wcet})")
    if task.wcet > task.deadline:
        raise ConstraintViolation(f"{task.id}: wcet > deadline ({task.wcet} > {task.deadline})")
    if task.deadline > task.period:
        raise ConstraintViolation(f"{task.id}: deadline > period ({task.deadline} > {task.period})")
    return task


@dataclass(frozen=True)
class JobRecord:
    task_id: str
    job_index: int
    release: int
    start: int
    finish: int
    firing_latency: int
    env_noise: int
    task_noise: int
    runtime: int
    total: int
    deadline_abs: int
    missed: bool
    # raw wake-up latency drawn for this job; may be hidden by queueing
    firing_sample: int = 0

    @property
    def run_time(self) -> int:
        """Dispatch-to-completion time, the quantity the report tables average."""
        return self.total - self.firing_latency

    def identity_holds(self) -> bool:
        return self.total == self.firing_latency + self.env_noise + self.task_noise + self.runtime


class TaskSet:
    """Ordered, validated collection of tasks with unique ids."""

    __slots__ = ("tasks", "_by_id")

    def __init__(self, tasks: Iterable[TaskSpec]):
        tasks = tuple(validate(t) for t in tasks)
        if not tasks:
            raise ConstraintViolation("a task set needs at least one task")
        by_id = {}
        for t in tasks:
            if t.id in by_id:
                raise ConstraintViolation(f"duplicate task id {t.id!r}")
            by_id[t.id] = t
        self.tasks = tasks
        self._by_id = by_id

    def __iter__(self) -> Iterator[TaskSpec]:
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def __getitem__(self, task_id: str) -> TaskSpec:
        return self._by_id[task_id]

    def __contains__(self, task_id) -> bool:
        return task_id in self._by_id

    def __eq__(self, other):
        return isinstance(other, TaskSet) and self.tasks == other.tasks

    def __hash__(self):
        return hash(self.tasks)

    def __repr__(self):
        return f"TaskSet({list(self.tasks)!r})"

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tasks)

    def subset(self, ids: Iterable[str]) -> TaskSet:
        return TaskSet(self._by_id[i] for i in ids)


def exact_utilization(tasks: Iterable[TaskSpec]) -> Fraction:
    return sum((t.utilization for t in tasks), Fraction(0))


def utilization(tasks: TaskSet) -> float:
    """Sum of wcet/period over the set.

    Computed as an exact fraction and rounded once, so the result does not
    depend on task order.
    """
    return float(exact_utilization(tasks))


def hyperperiod(tasks: TaskSet, limit: int = INT64_MAX) -> int:
    """Least common multiple of all periods.

    Raises :class:`HyperperiodOverflow` when the LCM exceeds ``limit``;
    callers running a brute-force horizon pass their own cap.
    """
    h = 1
    for t in tasks:
        h = math.lcm(h, t.period)
        if h > limit:
            raise HyperperiodOverflow(f"hyperperiod exceeds {limit} us")
    return h
