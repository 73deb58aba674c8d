"""Discrete-event simulation of preemptive EDF on partitioned CPU slices.

Each slice runs independently. A job released at ``r`` becomes dispatchable
at ``r + f`` where ``f`` is its sampled firing latency (rounded up to the
dispatch quantum when one is configured). Its service demand is the task's
programmed run-time plus a sampled run-time inflation. Late jobs run to
completion and are flagged.
"""

from __future__ import annotations

import heapq
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from contsched.admission import SliceAssignment
from contsched.errors import ConfigError
from contsched.model import JobRecord, TaskSet, TaskSpec
from contsched.noise import SystemProfile

_SEED_MASK = 2**64 - 1


@dataclass(frozen=True)
class SimConfig:
    assignment: SliceAssignment
    profile: SystemProfile
    duration: int
    seed: int = 0
    release_offset: Mapping[str, int] = field(default_factory=dict)
    # 0 = ideal; otherwise wake-ups are only noticed on multiples of this
    quantum: int = 0

    def __post_init__(self):
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.quantum < 0:
            raise ConfigError("quantum must be >= 0")
        if any(v < 0 for v in self.release_offset.values()):
            raise ConfigError("release offsets must be >= 0")


@dataclass(frozen=True)
class Trace:
    records: Mapping[str, tuple[JobRecord, ...]]
    total_time: int
    # True for traces ingested from logs: noise fields are not known
    external: bool = False

    @property
    def misses(self) -> dict[str, int]:
        return count_misses(self)[0]

    def all_records(self) -> list[JobRecord]:
        out = [r for recs in self.records.values() for r in recs]
        out.sort(key=lambda r: (r.release, r.task_id, r.job_index))
        return out


def edf_key(job) -> tuple:
    """Priority key: earliest absolute deadline, then release, then task id."""
    return (job.deadline_abs, job.release, job.task_id)


def pick_next(ready: Iterable):
    """Return the ready job EDF dispatches next.

    Jobs need ``deadline_abs``, ``release`` and ``task_id`` attributes.
    """
    ready = list(ready)
    if not ready:
        raise ValueError("pick_next needs at least one ready job")
    return min(ready, key=edf_key)


def count_misses(trace: Trace) -> tuple[dict[str, int], int]:
    per_task = {tid: sum(1 for r in recs if r.missed) for tid, recs in trace.records.items()}
    return per_task, sum(per_task.values())


def slice_rng(seed: int, slice_id: str) -> np.random.Generator:
    """Independent stream per (seed, slice id)."""
    ss = np.random.SeedSequence([seed & _SEED_MASK, zlib.crc32(slice_id.encode("utf-8"))])
    return np.random.default_rng(ss)


def _ceil_to(t: int, q: int) -> int:
    return -(-t // q) * q


def simulate_slice(tasks: Sequence[TaskSpec], profile: SystemProfile, duration: int,
                   rng: np.random.Generator, offsets: Mapping[str, int] | None = None,
                   quantum: int = 0, stop_on_miss: bool = False) -> dict[str, list[JobRecord]]:
    """Run preemptive EDF for the tasks of one slice.

    Jobs released before ``duration`` are simulated to completion.
    ``stop_on_miss`` ends the run at the first completed late job, which is
    all a feasibility oracle needs.
    """
    offsets = offsets or {}
    tasks = sorted(tasks, key=lambda t: t.id)
    noise = profile.noise

    # job tuple: (visible, deadline_abs, release, task_id, index, demand, firing, env)
    jobs = []
    for t in tasks:
        off = offsets.get(t.id, 0)
        n = 0 if off >= duration else -(-(duration - off) // t.period)
        if n == 0:
            continue
        firing, env = noise.draw(rng, n)
        env = np.maximum(env, 1 - t.runtime)
        for k, (f, e) in enumerate(zip(firing.tolist(), env.tolist())):
            r = off + k * t.period
            vis = r + f
            if quantum:
                vis = _ceil_to(vis, quantum)
            jobs.append((vis, r + t.deadline, r, t.id, k, t.runtime + e, f, e))
    jobs.sort()

    by_id = {t.id: t for t in tasks}
    out: dict[str, list[JobRecord]] = {t.id: [] for t in tasks}
    ready: list[list] = []  # [deadline, release, task_id, index, remaining, start, job]
    running = None
    now = 0
    i, n_jobs = 0, len(jobs)

    while True:
        while i < n_jobs and jobs[i][0] <= now:
            j = jobs[i]
            heapq.heappush(ready, [j[1], j[2], j[3], j[4], j[5], None, j])
            i += 1
        # only a strictly earlier deadline preempts; ties keep the running job
        if running is not None and ready and ready[0][0] < running[0]:
            heapq.heappush(ready, running)
            running = None
        if running is None and ready:
            running = heapq.heappop(ready)
            if running[5] is None:
                running[5] = now
        nxt = jobs[i][0] if i < n_jobs else None
        if running is None:
            if nxt is None:
                break
            now = nxt
            continue
        end = now + running[4]
        if nxt is not None and nxt < end:
            running[4] -= nxt - now
            now = nxt
            continue
        now = end
        deadline, release, tid, k, _, start, j = running
        running = None
        demand, firing, env = j[5], j[6], j[7]
        runtime = by_id[tid].runtime
        missed = end > deadline
        out[tid].append(JobRecord(
            task_id=tid, job_index=k, release=release, start=start, finish=end,
            firing_latency=start - release, env_noise=env,
            task_noise=(end - start) - demand, runtime=runtime,
            total=end - release, deadline_abs=deadline, missed=missed,
            firing_sample=firing,
        ))
        if missed and stop_on_miss:
            break

    for recs in out.values():
        recs.sort(key=lambda r: r.job_index)
    return out


def simulate(config: SimConfig, tasks: TaskSet, stop_on_miss: bool = False) -> Trace:
    """Simulate every slice of ``config.assignment`` and merge the records."""
    assigned = [tid for ids in config.assignment.slices.values() for tid in ids]
    unknown = [tid for tid in assigned if tid not in tasks]
    if unknown:
        raise ConfigError("assignment references unknown tasks: " + ", ".join(unknown))
    if len(set(assigned)) != len(assigned):
        raise ConfigError("a task is assigned to more than one slice")
    unknown = [tid for tid in config.release_offset if tid not in tasks]
    if unknown:
        raise ConfigError("offsets reference unknown tasks: " + ", ".join(unknown))

    records: dict[str, tuple[JobRecord, ...]] = {}
    total = config.duration
    for slice_id in sorted(config.assignment.slices):
        members = [tasks[tid] for tid in config.assignment.slices[slice_id]]
        if not members:
            continue
        per_task = simulate_slice(
            members, config.profile, config.duration, slice_rng(config.seed, slice_id),
            config.release_offset, config.quantum, stop_on_miss,
        )
        for tid, recs in per_task.items():
            records[tid] = tuple(recs)
            if recs:
                total = max(total, max(r.finish for r in recs))
    ordered = {tid: records[tid] for tid in tasks.ids if tid in records}
    return Trace(ordered, total)
