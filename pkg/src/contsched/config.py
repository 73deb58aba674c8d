"""Experiment configuration: INI-style text, built-in cases, profile lookup.

Format::

    [experiment]
    duration = 60000000      ; us
    seed = 0
    profile = C5             ; preset name, "custom", or a file in $CONTSCHED_PROFILE_DIR
    quantum = 0              ; optional dispatch granularity, us
    max_miss_probability = 0.01   ; optional risk policy

    [slice:0]
    capacity = 1.0

    [task:c0]
    period = 10000
    deadline = 10000         ; optional, defaults to period
    wcet = 900
    runtime = 900            ; optional, defaults to wcet
    offset = 0               ; optional release offset

    [profile]                ; only with profile = custom
    firing_mean = 10
    firing_sd = 3
    firing_max = 114
    runtime_mean_offset = 4
    runtime_sd = 14.81
    runtime_max = 126
    runtime_min = -126       ; optional
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from contsched.admission import ResourceSlice, RiskPolicy
from contsched.errors import (ConstraintViolation, InvalidStats, ParseError,
                              UnknownProfile, ValidationError)
from contsched.model import TaskSet, TaskSpec
from contsched.noise import PRESETS, SystemProfile, calibrate_profile, get_profile

PROFILE_DIR_ENV = "CONTSCHED_PROFILE_DIR"
DEFAULT_DURATION = 60_000_000

_PROFILE_KEYS = ("firing_mean", "firing_sd", "firing_max",
                 "runtime_mean_offset", "runtime_sd", "runtime_max")


@dataclass(frozen=True)
class ExperimentConfig:
    tasks: tuple[TaskSpec, ...]
    slices: tuple[ResourceSlice, ...] = (ResourceSlice("0", 1.0),)
    profile: str = "C5"
    duration: int = DEFAULT_DURATION
    seed: int = 0
    risk: RiskPolicy | None = None
    quantum: int = 0
    offsets: Mapping[str, int] = field(default_factory=dict)
    # parameters for profile == "custom"
    custom_noise: Mapping[str, float] | None = None

    @property
    def taskset(self) -> TaskSet:
        return TaskSet(self.tasks)

    def system_profile(self) -> SystemProfile:
        return resolve_profile(self.profile, self.custom_noise)


def _profile_from_params(name: str, params: Mapping[str, float]) -> SystemProfile:
    missing = [k for k in _PROFILE_KEYS if k not in params]
    if missing:
        raise ValidationError(f"custom profile lacks {', '.join(missing)}")
    runtime = {"mean_offset": params["runtime_mean_offset"], "sd": params["runtime_sd"],
               "max": params["runtime_max"]}
    if "runtime_min" in params:
        runtime["min"] = params["runtime_min"]
    try:
        return calibrate_profile(
            name, {"mean": params["firing_mean"], "sd": params["firing_sd"], "max": params["firing_max"]},
            runtime)
    except InvalidStats as exc:
        raise ValidationError(str(exc)) from exc


def resolve_profile(name: str, custom: Mapping[str, float] | None = None) -> SystemProfile:
    """Preset, inline custom parameters, or ``<name>.ini`` in the profile directory."""
    if name in PRESETS:
        return get_profile(name)
    if name == "custom":
        if custom is None:
            raise ValidationError("profile = custom needs a [profile] section")
        return _profile_from_params("custom", custom)
    directory = os.environ.get(PROFILE_DIR_ENV)
    if directory:
        path = Path(directory) / f"{name}.ini"
        if path.is_file():
            parser = _parser()
            try:
                parser.read_string(path.read_text(), source=str(path))
            except configparser.Error as exc:
                raise ParseError(str(exc), line=_error_line(exc)) from exc
            if not parser.has_section("profile"):
                raise ParseError(f"{path} has no [profile] section")
            return _profile_from_params(name, _float_fields(parser["profile"], "profile"))
    raise UnknownProfile(name)


def _error_line(exc: configparser.Error) -> int | None:
    # ParsingError keeps (lineno, text) pairs; the other errors carry lineno
    errors = getattr(exc, "errors", None)
    if errors:
        return errors[0][0]
    return getattr(exc, "lineno", None)


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)


def _int(section, key: str, default=None) -> int:
    raw = section.get(key)
    if raw is None:
        if default is None:
            raise ParseError("missing required field", field=f"{section.name}.{key}")
        return default
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"expected an integer, got {raw!r}", field=f"{section.name}.{key}") from None


def _float(section, key: str) -> float:
    raw = section[key]
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"expected a number, got {raw!r}", field=f"{section.name}.{key}") from None


def _float_fields(section, name) -> dict[str, float]:
    return {k: _float(section, k) for k in section}


def load_config(source: str) -> ExperimentConfig:
    """Parse config text; a bare built-in name such as ``case1`` is also accepted."""
    name = source.strip()
    if name in BUILTIN_CONFIGS:
        return BUILTIN_CONFIGS[name]()

    parser = _parser()
    try:
        parser.read_string(source)
    except configparser.Error as exc:
        raise ParseError(exc.message, line=_error_line(exc)) from exc

    known = {"experiment", "profile"}
    for sec in parser.sections():
        if sec not in known and not sec.startswith(("task:", "slice:")):
            raise ParseError(f"unknown section [{sec}]", field=sec)

    exp = parser["experiment"] if parser.has_section("experiment") else parser[parser.default_section]
    duration = _int(exp, "duration", DEFAULT_DURATION)
    seed = _int(exp, "seed", 0)
    quantum = _int(exp, "quantum", 0)
    profile = exp.get("profile", "C5").strip()
    risk = None
    if "max_miss_probability" in exp:
        try:
            risk = RiskPolicy(_float(exp, "max_miss_probability"))
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc

    tasks, offsets = [], {}
    for sec in parser.sections():
        if not sec.startswith("task:"):
            continue
        s = parser[sec]
        tid = sec[len("task:"):].strip()
        period = _int(s, "period")
        wcet = _int(s, "wcet")
        task = TaskSpec(tid, period, _int(s, "deadline", period), wcet, _int(s, "runtime", wcet))
        off = _int(s, "offset", 0)
        if off:
            offsets[tid] = off
        tasks.append(task)
    if not tasks:
        raise ParseError("config defines no [task:...] sections")

    slices = []
    for sec in parser.sections():
        if sec.startswith("slice:"):
            s = parser[sec]
            try:
                slices.append(ResourceSlice(sec[len("slice:"):].strip(), _float(s, "capacity")))
            except ValueError as exc:
                if isinstance(exc, ParseError):
                    raise
                raise ValidationError(str(exc)) from exc
    if not slices:
        slices = [ResourceSlice("0", 1.0)]

    custom = None
    if parser.has_section("profile"):
        custom = _float_fields(parser["profile"], "profile")

    try:
        TaskSet(tasks)
    except ConstraintViolation as exc:
        raise ValidationError(str(exc)) from exc
    if duration <= 0:
        raise ValidationError("duration must be positive")
    if quantum < 0:
        raise ValidationError("quantum must be >= 0")
    cfg = ExperimentConfig(tuple(tasks), tuple(slices), profile, duration, seed, risk,
                           quantum, offsets, custom)
    cfg.system_profile()
    return cfg


def render_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`load_config` for text configs."""
    out = ["[experiment]", f"duration = {cfg.duration}", f"seed = {cfg.seed}",
           f"profile = {cfg.profile}"]
    if cfg.quantum:
        out.append(f"quantum = {cfg.quantum}")
    if cfg.risk is not None:
        out.append(f"max_miss_probability = {cfg.risk.max_miss_probability!r}")
    for s in cfg.slices:
        out += ["", f"[slice:{s.id}]", f"capacity = {s.capacity!r}"]
    for t in cfg.tasks:
        out += ["", f"[task:{t.id}]", f"period = {t.period}", f"deadline = {t.deadline}",
                f"wcet = {t.wcet}", f"runtime = {t.runtime}"]
        if cfg.offsets.get(t.id):
            out.append(f"offset = {cfg.offsets[t.id]}")
    if cfg.custom_noise is not None:
        out += ["", "[profile]"] + [f"{k} = {v!r}" for k, v in cfg.custom_noise.items()]
    return "\n".join(out) + "\n"


# Test case workloads in unit order; a configuration with ``scale`` units
# uses the first ``scale`` entries.
def case_tasks(case: int, scale: int) -> tuple[TaskSpec, ...]:
    if case == 1:
        return tuple(TaskSpec.implicit(f"c{i}", 10_000, 900) for i in range(scale))
    if case == 2:
        return tuple(TaskSpec.implicit(f"c{i}", 5_000, 2_500) for i in range(scale))
    if case == 3:
        mixed = (TaskSpec.implicit("c0", 5_000, 2_500),
                 TaskSpec.implicit("c1", 9_000, 3_000),
                 TaskSpec.implicit("c2", 10_000, 900))
        return mixed[:scale]
    if case == 4:
        return tuple(TaskSpec.implicit(f"c{i}", 100_000, 10_000) for i in range(scale))
    raise ValueError(case)


CASE_SCALES = {1: range(4, 11), 2: range(1, 3), 3: range(1, 4), 4: range(4, 11)}
CASE_DEFAULT_SCALE = {1: 10, 2: 2, 3: 3, 4: 10}


def _builtin(case: int):
    def make() -> ExperimentConfig:
        return ExperimentConfig(case_tasks(case, CASE_DEFAULT_SCALE[case]))
    return make


BUILTIN_CONFIGS = {f"case{c}": _builtin(c) for c in (1, 2, 3, 4)}
