"""End-to-end acceptance checks, one test per numbered criterion.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contsched.admission import (ResourceSlice, RuntimeDistribution, SliceAssignment,
                                 edf_feasible, miss_probability, partition)
from contsched.errors import Infeasible
from contsched.joblog import export_trace
from contsched.model import TaskSet, TaskSpec, hyperperiod
from contsched.noise import (Constant, NoiseModel, PRESETS, TruncatedNormal, get_profile,
                             silent_profile)
from contsched.sim import SimConfig, count_misses, simulate
from contsched.stats import group_report, summarize, threshold_check
from contsched.testcases import case_taskset, run_testcase

from oracles import (demand_bound_feasible, exact_mean, exact_var_two_pass, group_oracle,
                     int_var_two_pass, median_by_counting, ulp_close)

pytestmark = pytest.mark.slow

MINUTE = 60_000_000
PROFILES = ("BM", "T3", "C5")


@pytest.mark.criterion(1)
def test_feasible_load_has_no_misses(record_property):
    worst = 0.0
    for name in PROFILES:
        t0 = time.perf_counter()
        run = run_testcase(1, name, 10, MINUTE, seed=1)
        worst = max(worst, time.perf_counter() - t0)
        jobs = {tid: len(r) for tid, r in run.trace.records.items()}
        assert set(jobs.values()) == {6000}, jobs
        assert run.report.total_misses == 0, (name, run.report.misses)
    record_property("detail", f"0 misses on {'/'.join(PROFILES)}, slowest run {worst:.2f}s")
    assert worst < 10


ENVELOPES = {"C5": (914, 3, 5.5, 2), "T3": (904, 3, 15, 5), "BM": (933, 10, 12, 8)}


@pytest.mark.criterion(2)
def test_runtime_statistics_envelope(record_property):
    seen = []
    for name, (avg, avg_tol, sd, sd_tol) in ENVELOPES.items():
        r = run_testcase(1, name, 10, MINUTE, seed=1).report
        seen.append(f"{name} {r.avg:.1f}/{r.sd_mx:.2f}")
        record_property("detail", seen[-1])
        assert abs(r.avg - avg) <= avg_tol, (name, r.avg)
        assert abs(r.sd_mx - sd) <= sd_tol, (name, r.sd_mx)


@pytest.mark.criterion(3)
def test_overload_misses_every_minute(record_property):
    tasks = case_taskset(2, 2)
    for name in PRESETS:
        tr = simulate(SimConfig(SliceAssignment.single(tasks), get_profile(name), 15 * MINUTE, 1), tasks)
        misses = [r for r in tr.all_records() if r.missed]
        per_minute = np.bincount([r.release // MINUTE for r in misses], minlength=15)[:15]
        record_property("detail", f"{name} {len(misses)} in 15 min, min/minute {per_minute.min()}")
        assert per_minute.min() >= 1 and len(misses) >= 20


@pytest.mark.criterion(4)
def test_mixed_set_misses_are_noise_induced(record_property):
    tasks = case_taskset(3, 3)
    assert hyperperiod(tasks) == 90_000
    for duration in (90_000, MINUTE):
        tr = simulate(SimConfig(SliceAssignment.single(tasks), silent_profile(), duration), tasks)
        assert count_misses(tr)[1] == 0
    record_property("detail", "noise-free: 0 misses over 90 ms and 60 s")
    counts = {}
    for name in PRESETS:
        counts[name] = run_testcase(3, name, 3, MINUTE, seed=1).report.total_misses
    record_property("detail", "with noise: " + ", ".join(f"{k} {v}" for k, v in counts.items()))
    assert all(v > 0 for v in counts.values()), counts


def _random_implicit_sets(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        k = int(rng.integers(2, 7))
        ms = [int(p) for p in rng.integers(2, 21, k)]
        if math.lcm(*ms) * 1000 > 10**7:
            continue
        shares = rng.dirichlet(np.ones(k)) * rng.uniform(0.5, 1.15)
        tasks = [TaskSpec.implicit(f"t{i}", p * 1000, int(min(p * 1000, max(1, round(s * p * 1000)))))
                 for i, (p, s) in enumerate(zip(ms, shares))]
        out.append(TaskSet(tasks))
    # boundary cases: U exactly 1 and one microsecond above
    out.append(TaskSet([TaskSpec.implicit("a", 4000, 2000), TaskSpec.implicit("b", 6000, 3000)]))
    out.append(TaskSet([TaskSpec.implicit("a", 4000, 2000), TaskSpec.implicit("b", 6000, 3001)]))
    out.append(TaskSet([TaskSpec.implicit("a", 3000, 1000), TaskSpec.implicit("b", 9000, 3000),
                        TaskSpec.implicit("c", 18000, 6000)]))
    return out


@pytest.mark.criterion(5)
def test_admission_matches_brute_force(record_property):
    sets = _random_implicit_sets(1000, seed=2024)
    disagreements, accepted = [], 0
    for ts in sets:
        verdict = edf_feasible(ts, ResourceSlice("0", 1.0)).accepted
        h = hyperperiod(ts)
        tr = simulate(SimConfig(SliceAssignment.single(ts), silent_profile(), h), ts, stop_on_miss=True)
        clean = count_misses(tr)[1] == 0
        dbf = demand_bound_feasible([(t.period, t.deadline, t.wcet) for t in ts], h)
        accepted += verdict
        if not verdict == clean == dbf:
            disagreements.append(ts.ids)
    record_property("detail", f"{len(sets)} sets, {accepted} feasible, {len(disagreements)} disagreements")
    assert not disagreements


def _mc_oracle(task, mean, sd, firing_draw, seed, n=1_000_000):
    rng = np.random.default_rng(seed)
    total = rng.normal(mean, sd, n) + firing_draw(rng, n)
    return np.count_nonzero(total > task.deadline) / n


CALIBRATION = [
    # (mean, sd, firing model, oracle firing sampler)
    (9_900, 50, NoiseModel(), lambda rng, n: 0),
    (9_800, 80, NoiseModel(Constant(60)), lambda rng, n: 60),
    (9_700, 120, NoiseModel(TruncatedNormal(100, 10, high=1_000)), lambda rng, n: rng.normal(100, 10, n)),
    (9_950, 30, get_profile("C5").noise, get_profile("C5").noise.draw_firing),
    (9_880, 40, get_profile("BM").noise, get_profile("BM").noise.draw_firing),
    (9_990, 15, get_profile("T3").noise, get_profile("T3").noise.draw_firing),
]


@pytest.mark.criterion(6)
def test_miss_probability_calibration(record_property):
    task = TaskSpec.implicit("a", 10_000, 10_000)
    z2 = miss_probability(task, RuntimeDistribution.normal(9_900, 50), NoiseModel())
    assert abs(z2 - 0.02275) <= 0.0005
    worst = 0.0
    for i, (mean, sd, firing, draw) in enumerate(CALIBRATION):
        p = miss_probability(task, RuntimeDistribution.normal(mean, sd), firing, seed=i)
        worst = max(worst, abs(p - _mc_oracle(task, mean, sd, draw, seed=1000 + i)))
    record_property("detail", f"z=2 gives {z2:.5f}, max |analytic - MC| {worst:.4f}")
    assert worst <= 0.005


@pytest.mark.criterion(7)
def test_threshold_rule(record_property):
    assert threshold_check([], 100_000).threshold == 10_000
    assert threshold_check([], 1_000).threshold == 100
    rng = np.random.default_rng(96)
    stream = TruncatedNormal(10, 3, high=100).draw(rng, 10_000_000)
    where = rng.choice(stream.size, 96, replace=False)
    stream[where] = rng.integers(101, 49_001, 96)
    r = threshold_check(stream, 1_000)
    record_property("detail", f"{r.overshoots} overshoots, ratio {r.ratio:.2e}")
    assert r.overshoots == 96 and r.ratio == pytest.approx(9.6e-6, rel=1e-12)


@st.composite
def fuzzed_configs(draw):
    n = draw(st.integers(1, 6))
    tasks = []
    for i in range(n):
        p = draw(st.integers(500, 20_000))
        d = draw(st.integers(max(1, p // 2), p))
        w = draw(st.integers(1, d))
        tasks.append(TaskSpec(f"t{i}", p, d, w, draw(st.integers(1, w))))
    ts = TaskSet(tasks)
    caps = draw(st.lists(st.sampled_from([0.5, 0.75, 1.0]), min_size=1, max_size=3))
    slices = [ResourceSlice(f"s{j}", c) for j, c in enumerate(caps)]
    try:
        assignment = partition(ts, slices)
    except Infeasible:
        assignment = SliceAssignment.single(ts, "s0")
    name = draw(st.sampled_from(sorted(PRESETS)))
    profile = get_profile(name, spikes=draw(st.booleans()))
    offsets = {t.id: draw(st.integers(0, t.period)) for t in tasks if draw(st.booleans())}
    cfg = SimConfig(assignment, profile, draw(st.integers(1, 200_000)), draw(st.integers(0, 2**64 - 1)),
                    offsets, draw(st.sampled_from([0, 0, 100, 1000])))
    return cfg, ts


@pytest.mark.criterion(8)
@settings(max_examples=150, deadline=None)
@given(fuzzed_configs())
def test_determinism_and_time_identity(case):
    cfg, ts = case
    a, b = simulate(cfg, ts), simulate(cfg, ts)
    assert export_trace(a).encode() == export_trace(b).encode()
    for r in a.all_records():
        assert r.total == r.firing_latency + r.env_noise + r.task_noise + r.runtime


@pytest.mark.criterion(8)
def test_cli_runs_are_byte_identical(tmp_path, record_property):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        subprocess.run([sys.executable, "-m", "contsched.cli", "simulate", "--config", "case3",
                        "--profile", "T3", "--seed", "17", "--duration", "2000000", "--out", str(out)],
                       check=True, capture_output=True)
        outs.append(out.read_bytes())
    record_property("detail", f"two CLI runs identical ({len(outs[0])} bytes)")
    assert outs[0] == outs[1]


@pytest.mark.criterion(9)
def test_statistics_against_brute_force(record_property):
    rng = np.random.default_rng(9)
    n, mismatches = 100_000, 0
    for i in range(n):
        k = int(rng.integers(1, 5))
        if i % 10 == 0:
            data = {f"c{j}": (rng.integers(0, 2_000, int(rng.integers(1, 12))) / 4).tolist() for j in range(k)}
        else:
            data = {f"c{j}": rng.integers(800, 1_100, int(rng.integers(1, 12))).tolist() for j in range(k)}
        r = group_report(data)
        avg, lo, hi, sd = group_oracle(data)
        if (r.avg, r.skw_min, r.skw_max) != (avg, lo, hi) or not ulp_close(r.sd_mx, sd):
            mismatches += 1
        xs = data["c0"]
        s = summarize(xs)
        ref_var = int_var_two_pass(xs) if i % 10 else exact_var_two_pass(xs)
        if s.mean != float(exact_mean(xs)) or s.median != float(median_by_counting(xs)):
            mismatches += 1
        if not ulp_close(s.sd, math.sqrt(float(ref_var))):
            mismatches += 1
    record_property("detail", f"{n} datasets, {mismatches} mismatches")
    assert mismatches == 0
