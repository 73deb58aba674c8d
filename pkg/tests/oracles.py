"""Independent reference implementations used by the tests.

These deliberately avoid the package's algorithms: EDF is simulated one
time unit at a time, statistics are computed by exact rational two-pass
formulas, and the median by counting rather than sorting.
"""

from fractions import Fraction
import math


def edf_unit_step(tasks, horizon):
    """Unit-time EDF with zero noise.

    ``tasks`` is a list of (id, period, deadline, runtime). Returns
    {id: [(release, start, finish), ...]} for jobs released before
    ``horizon``; simulation continues until all of them complete.
    Preemption only on strictly earlier deadline, ties by release then id.
    """
    jobs = []  # [deadline_abs, release, id, remaining, start]
    for tid, period, deadline, runtime in tasks:
        r = 0
        while r < horizon:
            jobs.append([r + deadline, r, tid, runtime, None, None])
            r += period
    out = {tid: [] for tid, *_ in tasks}
    t = 0
    running = None
    pending = sorted(jobs, key=lambda j: j[1])
    active = []
    while pending or active or running:
        while pending and pending[0][1] <= t:
            active.append(pending.pop(0))
        if running is not None:
            better = [j for j in active if j[0] < running[0]]
            if better:
                active.append(running)
                running = None
        if running is None and active:
            running = min(active, key=lambda j: (j[0], j[1], j[2]))
            active.remove(running)
            if running[4] is None:
                running[4] = t
        t += 1
        if running is not None:
            running[3] -= 1
            if running[3] == 0:
                out[running[2]].append((running[1], running[4], t))
                running = None
    for v in out.values():
        v.sort()
    return out


def demand_bound_feasible(tasks, horizon):
    """Processor-demand test for synchronous periodic tasks on one CPU.

    Feasible iff for every absolute deadline L <= horizon the total work
    with deadlines <= L fits in L. ``tasks`` is (period, deadline, wcet).
    """
    points = sorted({k * p + d for p, d, _ in tasks for k in range(horizon // p + 1) if k * p + d <= horizon})
    for L in points:
        demand = sum(((L - d) // p + 1) * w for p, d, w in tasks if L >= d)
        if demand > L:
            return False
    return True


def exact_mean(xs):
    return Fraction(sum(Fraction(x) for x in xs), len(xs))


def exact_var_two_pass(xs):
    n = len(xs)
    if n < 2:
        return Fraction(0)
    m = exact_mean(xs)
    return sum((Fraction(x) - m) ** 2 for x in xs) / (n - 1)


def int_var_two_pass(xs):
    """Two-pass n-1 variance for integers, exact via scaling by n."""
    n = len(xs)
    if n < 2:
        return Fraction(0)
    s = sum(xs)
    return Fraction(sum((n * x - s) ** 2 for x in xs), n * n * (n - 1))


def kth_smallest(xs, k):
    """1-indexed order statistic by counting: v with #(< v) < k <= #(<= v)."""
    for v in xs:
        below = sum(1 for y in xs if y < v)
        upto = sum(1 for y in xs if y <= v)
        if below < k <= upto:
            return v
    raise ValueError(k)


def median_by_counting(xs):
    n = len(xs)
    if n % 2:
        return Fraction(kth_smallest(xs, (n + 1) // 2))
    return (Fraction(kth_smallest(xs, n // 2)) + Fraction(kth_smallest(xs, n // 2 + 1))) / 2


def group_oracle(runtimes):
    """(avg, skw_min, skw_max, sd_mx) by direct definition, exact until the end."""
    present = {k: list(v) for k, v in runtimes.items() if v}
    pooled = [x for v in present.values() for x in v]
    avg = exact_mean(pooled)
    rows = []
    for k, v in present.items():
        skew = abs(exact_mean(v) - median_by_counting(v))
        rows.append((skew, exact_var_two_pass(v)))
    skews = [s for s, _ in rows]
    top = max(s for s in skews)
    var = max(var for s, var in rows if s == top)
    return float(avg), float(min(skews)), float(top), math.sqrt(float(var))


def ulp_close(a, b, ulps=1):
    if a == b:
        return True
    return abs(a - b) <= ulps * math.ulp(max(abs(a), abs(b)))
