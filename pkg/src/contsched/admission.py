"""Off-line EDF admission, slice partitioning and risk-bounded admission."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from contsched.errors import Infeasible, InsufficientSamples, MissingDistribution
from contsched.model import TaskSet, TaskSpec, exact_utilization
from contsched.noise import Constant, NoiseModel, TruncatedNormal

ACCEPT = "accept"
REJECT = "reject"
INCONCLUSIVE = "inconclusive-reject"

# truncation mass below which a truncated normal is treated as a plain normal
_NEGLIGIBLE_TAIL = 1e-9


def _exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class ResourceSlice:
    id: str
    capacity: float = 1.0

    def __post_init__(self):
        if not 0 < self.capacity <= 1:
            raise ValueError(f"slice {self.id!r}: capacity must lie in (0, 1], got {self.capacity}")


@dataclass(frozen=True)
class Verdict:
    outcome: str
    utilization: float
    density: float
    capacity: float
    reason: str

    @property
    def accepted(self) -> bool:
        return self.outcome == ACCEPT

    def __bool__(self):
        return self.accepted


def edf_feasible(tasks: Iterable[TaskSpec], slice: ResourceSlice) -> Verdict:
    """Uniprocessor EDF admission on a slice of ``slice.capacity`` CPU.

    Implicit deadlines use the exact test U <= capacity. Constrained
    deadlines use the sufficient density test; when that fails although
    U <= capacity the verdict is ``inconclusive-reject``.
    """
    tasks = list(tasks)
    cap = _exact(slice.capacity)
    u = exact_utilization(tasks)
    if all(t.deadline == t.period for t in tasks):
        ok = u <= cap
        why = f"U={float(u):.6g} {'<=' if ok else '>'} capacity {slice.capacity:g}"
        return Verdict(ACCEPT if ok else REJECT, float(u), float(u), slice.capacity, why)
    dens = sum((t.density for t in tasks), Fraction(0))
    if dens <= cap:
        outcome, why = ACCEPT, f"density {float(dens):.6g} <= capacity {slice.capacity:g}"
    elif u <= cap:
        outcome = INCONCLUSIVE
        why = f"density {float(dens):.6g} > capacity, U={float(u):.6g} fits; density test is only sufficient"
    else:
        outcome, why = REJECT, f"U={float(u):.6g} > capacity {slice.capacity:g}"
    return Verdict(outcome, float(u), float(dens), slice.capacity, why)


@dataclass(frozen=True)
class SliceAssignment:
    slices: Mapping[str, tuple[str, ...]]
    utilization: Mapping[str, float]

    def slice_of(self, task_id: str) -> str:
        for sid, ids in self.slices.items():
            if task_id in ids:
                return sid
        raise KeyError(task_id)

    @classmethod
    def single(cls, tasks: TaskSet, slice_id: str = "0") -> SliceAssignment:
        """Everything on one slice, bypassing admission (overload scenarios)."""
        return cls({slice_id: tasks.ids}, {slice_id: float(exact_utilization(tasks))})


def partition(tasks: TaskSet, slices: Sequence[ResourceSlice]) -> SliceAssignment:
    """First-fit decreasing by utilization, ties broken by task id.

    Raises :class:`Infeasible` listing every task that fits nowhere.
    """
    if not slices:
        raise ValueError("partition needs at least one slice")
    order = sorted(tasks, key=lambda t: (-t.utilization, t.id))
    placed: dict[str, list[TaskSpec]] = {s.id: [] for s in slices}
    unplaced = []
    for t in order:
        for s in slices:
            if edf_feasible(placed[s.id] + [t], s).accepted:
                placed[s.id].append(t)
                break
        else:
            unplaced.append(t.id)
    if unplaced:
        raise Infeasible(unplaced)
    return SliceAssignment(
        {sid: tuple(t.id for t in ts) for sid, ts in placed.items()},
        {sid: float(exact_utilization(ts)) for sid, ts in placed.items()},
    )


@dataclass(frozen=True)
class RuntimeDistribution:
    """Fitted run-time model. ``kind`` picks which view is used for predictions;
    the sorted samples (if any) and the normal parameters are both kept."""

    kind: str
    mean: float
    sd: float
    samples: tuple[int, ...] = ()
    sample_count: int = 0

    def __post_init__(self):
        if self.kind not in ("normal", "empirical"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.sd < 0:
            raise ValueError("sd must be >= 0")
        if self.kind == "empirical" and not self.samples:
            raise ValueError("empirical distribution needs samples")

    @classmethod
    def normal(cls, mean: float, sd: float) -> RuntimeDistribution:
        return cls("normal", float(mean), float(sd))

    @classmethod
    def empirical(cls, samples: Iterable[int]) -> RuntimeDistribution:
        s = tuple(sorted(samples))
        n = len(s)
        mean = sum(s) / n if n else 0.0
        sd = float(np.std(s, ddof=1)) if n > 1 else 0.0
        return cls("empirical", mean, sd, s, n)

    @classmethod
    def constant(cls, value: int) -> RuntimeDistribution:
        return cls.empirical([value])

    def as_empirical(self) -> RuntimeDistribution:
        return RuntimeDistribution("empirical", self.mean, self.sd, self.samples, self.sample_count)

    def as_normal(self) -> RuntimeDistribution:
        return RuntimeDistribution("normal", self.mean, self.sd, self.samples, self.sample_count)

    @property
    def is_deterministic(self) -> bool:
        if self.kind == "normal":
            return self.sd == 0
        return self.samples[0] == self.samples[-1]

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.normal(self.mean, self.sd, size=n)
        arr = np.asarray(self.samples, dtype=np.float64)
        return arr[rng.integers(0, len(arr), size=n)]


def fit_runtime_distribution(samples: Sequence[int]) -> RuntimeDistribution:
    """Fit a normal (mean, n-1 sd) and keep the sorted samples as well."""
    samples = list(samples)
    if len(samples) < 2:
        raise InsufficientSamples(f"need at least 2 run-time samples, got {len(samples)}")
    n = len(samples)
    total = sum(samples)
    mean = total / n
    if all(isinstance(x, int) for x in samples):
        var = Fraction(n * sum(x * x for x in samples) - total * total, n * (n - 1))
    else:
        m = math.fsum(samples) / n
        var = math.fsum((x - m) ** 2 for x in samples) / (n - 1)
    return RuntimeDistribution("normal", mean, math.sqrt(var), tuple(sorted(samples)), n)


@dataclass(frozen=True)
class RiskPolicy:
    max_miss_probability: float

    def __post_init__(self):
        if not 0 <= self.max_miss_probability <= 1:
            raise ValueError("max_miss_probability must lie in [0, 1]")


def _normal_tail(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def _firing_as_normal(firing: NoiseModel):
    """(mean, sd) when firing latency is effectively normal or constant, else None."""
    if firing.spike is not None and firing.spike.probability > 0:
        return None
    f = firing.firing
    if isinstance(f, Constant):
        return float(f.value), 0.0
    if isinstance(f, TruncatedNormal) and f.tail_mass() < _NEGLIGIBLE_TAIL:
        return float(f.mean), float(f.sd)
    return None


def miss_probability(task: TaskSpec, dist: RuntimeDistribution, firing: NoiseModel,
                     seed: int = 0, draws: int = 100_000) -> float:
    """P(firing + run-time > relative deadline).

    Normal run-time with normal (or constant) firing is evaluated in closed
    form as a sum of independent normals; anything else by seeded Monte
    Carlo with ``draws`` samples.
    """
    d = task.deadline
    fn = _firing_as_normal(firing)
    if dist.kind == "normal" and fn is not None:
        mu = dist.mean + fn[0]
        sd = math.hypot(dist.sd, fn[1])
        if sd == 0:
            return 1.0 if mu > d else 0.0
        return _normal_tail((d - mu) / sd)
    if dist.is_deterministic and fn is not None and fn[1] == 0:
        return 1.0 if dist.mean + fn[0] > d else 0.0
    rng = np.random.default_rng(seed)
    c = dist.draw(rng, draws)
    f = firing.draw_firing(rng, draws)
    return float(np.count_nonzero(c + f > d)) / draws


@dataclass(frozen=True)
class RiskVerdict:
    accepted: bool
    per_task: Mapping[str, float]
    combined: float
    policy: RiskPolicy


def combine_miss_probabilities(ps: Iterable[float]) -> float:
    """1 - prod(1 - p), assuming independent misses; exact at p=0 and p=1."""
    log_ok = 0.0
    for p in ps:
        if p >= 1:
            return 1.0
        log_ok += math.log1p(-p)
    return -math.expm1(log_ok)


def admit_with_risk(tasks: TaskSet, dists: Mapping[str, RuntimeDistribution],
                    firing: NoiseModel, policy: RiskPolicy, seed: int = 0,
                    draws: int = 100_000) -> RiskVerdict:
    """Accept when the per-job probability that any task misses stays within policy."""
    per_task = {}
    for i, t in enumerate(tasks):
        if t.id not in dists:
            raise MissingDistribution(t.id)
        per_task[t.id] = miss_probability(t, dists[t.id], firing, seed=seed + i, draws=draws)
    combined = combine_miss_probabilities(per_task.values())
    return RiskVerdict(combined <= policy.max_miss_probability, per_task, combined, policy)
