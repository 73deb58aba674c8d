"""Command-line front end.

Exit status: 0 on success; 1 when a plan is infeasible, the risk policy
rejects it, or (with ``--strict``) a run shows deadline misses; 2 on
configuration or log format errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from contsched.admission import (RuntimeDistribution, SliceAssignment, admit_with_risk,
                                 edf_feasible, fit_runtime_distribution, partition)
from contsched.config import (BUILTIN_CONFIGS, DEFAULT_DURATION, ExperimentConfig, load_config,
                              resolve_profile)
from contsched.errors import ContschedError, Infeasible
from contsched.joblog import export_trace, ingest_logs
from contsched.model import TaskSet
from contsched.sim import SimConfig, count_misses, simulate
from contsched.stats import render_table, report_from_trace
from contsched.testcases import run_batch, run_testcase

EXIT_OK, EXIT_REJECT, EXIT_CONFIG = 0, 1, 2
RISK_SAMPLES = 1000

log = logging.getLogger("contsched")


def _read_config(arg: str) -> ExperimentConfig:
    path = Path(arg)
    if path.is_file():
        return load_config(path.read_text())
    if arg in BUILTIN_CONFIGS:
        return load_config(arg)
    raise FileNotFoundError(f"no config file or built-in case named {arg!r}")


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    if getattr(args, "profile", None) is not None:
        changes["profile"] = args.profile
    return replace(cfg, **changes) if changes else cfg


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _runtime_samples(cfg: ExperimentConfig, tasks: TaskSet, logs) -> dict[str, list[int]]:
    if logs:
        trace = ingest_logs(logs)
        return {tid: [r.run_time for r in recs] for tid, recs in trace.records.items()}
    noise = cfg.system_profile().noise
    rng = np.random.default_rng(cfg.seed)
    samples = {}
    for t in tasks:
        env = np.maximum(noise.env_runtime.draw(rng, RISK_SAMPLES), 1 - t.runtime)
        samples[t.id] = (t.runtime + env).tolist()
    return samples


def cmd_plan(args) -> int:
    cfg = _apply_overrides(_read_config(args.config), args)
    tasks = cfg.taskset
    try:
        assignment = partition(tasks, cfg.slices)
    except Infeasible as exc:
        print(f"infeasible: {exc}")
        return EXIT_REJECT
    slices = {s.id: s for s in cfg.slices}
    for sid, ids in assignment.slices.items():
        if ids:
            v = edf_feasible([tasks[i] for i in ids], slices[sid])
            print(f"slice {sid}: {', '.join(ids)} -> {v.outcome} ({v.reason})")
        else:
            print(f"slice {sid}: empty")
    if cfg.risk is None:
        return EXIT_OK
    samples = _runtime_samples(cfg, tasks, args.logs)
    dists: dict[str, RuntimeDistribution] = {
        tid: fit_runtime_distribution(xs) for tid, xs in samples.items() if len(xs) >= 2
    }
    verdict = admit_with_risk(tasks, dists, cfg.system_profile().noise, cfg.risk, seed=cfg.seed)
    for tid, p in verdict.per_task.items():
        print(f"  {tid}: miss probability {p:.3g} (normal fit mean={dists[tid].mean:.1f}, sd={dists[tid].sd:.2f})")
    status = "accept" if verdict.accepted else "reject"
    print(f"risk: combined {verdict.combined:.3g} vs limit "
          f"{cfg.risk.max_miss_probability:g} -> {status}")
    return EXIT_OK if verdict.accepted else EXIT_REJECT


def _finish_run(trace, report, args) -> int:
    if args.out:
        Path(args.out).write_text(export_trace(trace))
    sys.stdout.write(render_table([report], [report.system], args.format))
    _, total = count_misses(trace)
    if args.format == "text":
        print(f"deadline misses: {total}")
    return EXIT_REJECT if (args.strict and total) else EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _apply_overrides(_read_config(args.config), args)
    tasks = cfg.taskset
    try:
        assignment = partition(tasks, cfg.slices)
    except Infeasible as exc:
        if not args.force:
            print(f"infeasible: {exc} (use --force to simulate the overload)")
            return EXIT_REJECT
        log.warning("admission rejected %s; simulating all tasks on slice %s",
                    ", ".join(exc.unplaced), cfg.slices[0].id)
        assignment = SliceAssignment.single(tasks, cfg.slices[0].id)
    profile = cfg.system_profile()
    trace = simulate(SimConfig(assignment, profile, cfg.duration, cfg.seed,
                               cfg.offsets, cfg.quantum), tasks)
    report = report_from_trace(trace, args.label or f"{len(tasks)} units", profile.name,
                               expected=tasks.ids)
    return _finish_run(trace, report, args)


def cmd_testcase(args) -> int:
    run = run_testcase(args.case, resolve_profile(args.profile or "C5"), args.scale,
                       args.duration or DEFAULT_DURATION, args.seed or 0)
    return _finish_run(run.trace, run.report, args)


def cmd_analyze(args) -> int:
    trace = ingest_logs(args.logs)
    report = report_from_trace(trace, args.label, None)
    _emit(render_table([report], [None], args.format), None)
    _, total = count_misses(trace)
    if args.format == "text":
        print(f"deadline misses: {total}")
    return EXIT_REJECT if (args.strict and total) else EXIT_OK


def cmd_report(args) -> int:
    systems = args.systems.split(",")
    profiles = [resolve_profile(s) for s in systems]
    scales = None
    if args.scales:
        lo, _, hi = args.scales.partition("-")
        scales = range(int(lo), int(hi or lo) + 1)
    reports = run_batch(args.case, profiles, scales, args.duration or DEFAULT_DURATION,
                        args.seed or 0)
    _emit(render_table(reports, systems, args.format), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contsched",
                                description="EDF planning and simulation for real-time containers")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True, fmt=True):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--duration", type=int, help="simulated time in us")
        if fmt:
            sp.add_argument("--format", choices=("text", "delimited"), default="text")
        if out:
            sp.add_argument("--out", help="write the job log (or table) here")

    sp = sub.add_parser("plan", help="admission and partitioning only")
    sp.add_argument("--config", required=True, help="config file or built-in name (case1..case4)")
    sp.add_argument("--profile")
    sp.add_argument("--logs", nargs="*", help="job logs to fit run-time distributions from")
    common(sp, out=False, fmt=False)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("simulate", help="plan and simulate a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--profile")
    sp.add_argument("--label")
    sp.add_argument("--strict", action="store_true", help="exit 1 on any deadline miss")
    sp.add_argument("--force", action="store_true", help="simulate even if admission fails")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("testcase", help="run a built-in workload")
    sp.add_argument("--case", type=int, required=True)
    sp.add_argument("--profile", help="BM, T3, T3U or C5 (default C5)")
    sp.add_argument("--scale", type=int, help="number of container units")
    sp.add_argument("--strict", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_testcase)

    sp = sub.add_parser("analyze", help="statistics over job logs")
    sp.add_argument("logs", nargs="+")
    sp.add_argument("--label", default="logs")
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--format", choices=("text", "delimited"), default="text")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("report", help="table over all configurations of a test case")
    sp.add_argument("--case", type=int, required=True)
    sp.add_argument("--systems", default="BM,T3,C5")
    sp.add_argument("--scales", help="unit range, e.g. 4-10")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ContschedError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
