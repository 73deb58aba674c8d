"""Per-job log format shared by the simulator and external runs.

One CSV record per job with a mandatory header::

    container,job,release_us,start_us,end_us,deadline_us,miss

``deadline_us`` is absolute. Ingested records carry no noise decomposition:
``env_noise`` and ``task_noise`` are 0 and ``runtime`` is ``end - start``.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, TextIO

from contsched.errors import FormatError, InconsistentRecord
from contsched.model import JobRecord
from contsched.sim import Trace

HEADER = "container,job,release_us,start_us,end_us,deadline_us,miss"
_FIELDS = HEADER.split(",")


def export_trace(trace: Trace, out: TextIO | None = None) -> str:
    """Write the trace as a job log (records ordered by release); returns the text."""
    buf = io.StringIO()
    buf.write(HEADER + "\n")
    for r in trace.all_records():
        buf.write(f"{r.task_id},{r.job_index},{r.release},{r.start},{r.finish},"
                  f"{r.deadline_abs},{int(r.missed)}\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def parse_log(text: str, path: str = "<log>") -> list[JobRecord]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise FormatError(f"missing or wrong header, expected {HEADER!r}", path, 1)
    records = []
    last_index: dict[str, int] = {}
    for lineno, row in enumerate(csv.reader(lines[1:]), start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(_FIELDS):
            raise FormatError(f"expected {len(_FIELDS)} fields, got {len(row)}", path, lineno)
        container = row[0].strip()
        if not container:
            raise FormatError("empty container id", path, lineno)
        try:
            job, release, start, end, deadline, miss = (int(c) for c in row[1:])
        except ValueError:
            raise FormatError("non-integer field", path, lineno) from None
        if miss not in (0, 1):
            raise FormatError(f"miss must be 0 or 1, got {miss}", path, lineno)
        if job < 0:
            raise FormatError("job index must be >= 0", path, lineno)
        if container in last_index and job <= last_index[container]:
            raise FormatError(f"job index {job} of {container} is not increasing", path, lineno)
        last_index[container] = job
        if end < start:
            raise InconsistentRecord(f"end {end} < start {start}", path, lineno)
        if start < release:
            raise InconsistentRecord(f"start {start} < release {release}", path, lineno)
        if bool(miss) != (end > deadline):
            raise InconsistentRecord(f"miss flag {miss} contradicts end {end} vs deadline {deadline}",
                                     path, lineno)
        records.append(JobRecord(
            task_id=container, job_index=job, release=release, start=start, finish=end,
            firing_latency=start - release, env_noise=0, task_noise=0, runtime=end - start,
            total=end - release, deadline_abs=deadline, missed=bool(miss),
        ))
    return records


def ingest_logs(files: Iterable) -> Trace:
    """Merge job logs (paths or open text files) into one external trace."""
    by_task: dict[str, list[JobRecord]] = {}
    for f in files:
        if isinstance(f, (str, Path)):
            text, name = Path(f).read_text(), str(f)
        else:
            text, name = f.read(), getattr(f, "name", "<stream>")
        for r in parse_log(text, name):
            recs = by_task.setdefault(r.task_id, [])
            if recs and r.job_index <= recs[-1].job_index:
                raise FormatError(f"job {r.job_index} of {r.task_id} repeats across files", name)
            recs.append(r)
    total = max((r.finish for recs in by_task.values() for r in recs), default=0)
    return Trace({tid: tuple(recs) for tid, recs in by_task.items()}, total, external=True)
