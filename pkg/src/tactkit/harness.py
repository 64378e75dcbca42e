"""Target harness: external-command target and a seeded synthetic target.

Both targets expose the same four operations: ``apply_level``,
``validate_configuration``, ``run_trial`` and ``recover``.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import os
import signal
import subprocess
import time
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from tactkit.experiment import Combination, ExperimentDescription, Factor, format_level

log = logging.getLogger(__name__)

ADAPT = "adapt"
VALIDATE = "validate"
RUN = "run"
TIMEOUT = "timeout"
PROTOCOL = "protocol"
STAGES = (ADAPT, VALIDATE, RUN, TIMEOUT, PROTOCOL)

KILL_GRACE = 1.0


@dataclass(frozen=True)
class TrialResult:
    metrics: Optional[Tuple[Tuple[str, float], ...]] = None
    wall_time: float = 0.0
    stage: Optional[str] = None
    detail: str = ""

    @classmethod
    def success(cls, metrics: Sequence[Tuple[str, float]], wall_time: float = 0.0) -> "TrialResult":
        return cls(tuple((k, float(v)) for k, v in metrics), float(wall_time))

    @classmethod
    def failure(cls, stage: str, detail: str, wall_time: float = 0.0) -> "TrialResult":
        if stage not in STAGES:
            raise ValueError(f"unknown failure stage {stage!r}")
        return cls(None, float(wall_time), stage, detail)

    @property
    def ok(self) -> bool:
        return self.metrics is not None

    @property
    def values(self) -> Dict[str, float]:
        return dict(self.metrics or ())


class TargetFailure(Exception):
    """Raised by adapt and validate operations; carries the failure result."""

    def __init__(self, result: TrialResult):
        super().__init__(f"{result.stage}: {result.detail}")
        self.result = result


class Recovery(enum.Enum):
    RETRY = "retry"
    ABANDON = "abandon"


def decide_recovery(consecutive_attempts: int, max_recovers: int) -> Recovery:
    return Recovery.ABANDON if consecutive_attempts >= max_recovers else Recovery.RETRY


def parse_metric_output(text: str, metrics: Sequence[str]) -> TrialResult:
    """Parse ``name<TAB>value`` lines into a success in declared metric order."""
    seen: Dict[str, float] = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.rstrip("\r").split("\t")
        if len(parts) != 2:
            return TrialResult.failure(PROTOCOL, f"line {n}: expected name<TAB>value")
        name, raw = parts[0].strip(), parts[1].strip()
        try:
            value = float(raw)
        except ValueError:
            return TrialResult.failure(PROTOCOL, f"line {n}: unparseable value {raw!r} for {name}")
        if not math.isfinite(value):
            return TrialResult.failure(PROTOCOL, f"line {n}: non-finite value for {name}")
        if name in seen:
            return TrialResult.failure(PROTOCOL, f"duplicate metric {name}")
        seen[name] = value
    missing = [m for m in metrics if m not in seen]
    if missing:
        return TrialResult.failure(PROTOCOL, "missing metric " + ", ".join(missing))
    extra = sorted(set(seen) - set(metrics))
    if extra:
        return TrialResult.failure(PROTOCOL, "unexpected metric " + ", ".join(extra))
    return TrialResult.success([(m, seen[m]) for m in metrics])


def substitute(template: Sequence[str], factor: str, level) -> list:
    text = format_level(level)
    return [a.replace("{level}", text).replace("{factor}", factor) for a in template]


@dataclass
class Completed:
    returncode: Optional[int]
    stdout: str
    stderr: str
    timed_out: bool = False


def run_command(argv: Sequence[str], timeout: Optional[float] = None, cwd=None, env=None) -> Completed:
    """Run ``argv`` in its own session; on timeout kill the whole process group."""
    proc = subprocess.Popen(list(argv), stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                            stdin=subprocess.DEVNULL, cwd=cwd, env=env, text=True,
                            start_new_session=True)
    try:
        out, err = proc.communicate(timeout=timeout)
        return Completed(proc.returncode, out, err)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        try:
            out, err = proc.communicate(timeout=KILL_GRACE)
        except subprocess.TimeoutExpired:
            # a descendant escaped the group and holds the pipes open
            proc.kill()
            out, err = "", ""
        return Completed(None, out or "", err or "", timed_out=True)


class CommandTarget:
    """Target driven through the description's command templates."""

    def __init__(self, description: ExperimentDescription, cwd=None, env=None,
                 adapt_timeout: Optional[float] = None):
        self.description = description
        self.cwd = cwd
        self.env = env
        self.adapt_timeout = adapt_timeout or description.trial_timeout

    def _spawn(self, argv, timeout, stage):
        try:
            return run_command(argv, timeout, self.cwd, self.env)
        except OSError as e:
            raise TargetFailure(TrialResult.failure(stage, f"cannot start {argv[0]}: {e}")) from None

    def apply_level(self, factor: Factor, level) -> None:
        if not factor.adaptation_command:
            return
        argv = substitute(factor.adaptation_command, factor.name, level)
        done = self._spawn(argv, self.adapt_timeout, ADAPT)
        if done.timed_out:
            raise TargetFailure(TrialResult.failure(ADAPT, f"{factor.name}: timed out"))
        if done.returncode != 0:
            raise TargetFailure(TrialResult.failure(ADAPT, f"{factor.name}: exit {done.returncode}"))

    def validate_configuration(self, configuration: Mapping) -> bool:
        """Validation command receives one ``NAME=VALUE`` argument per control factor."""
        cmd = self.description.validate_command
        if not cmd:
            return True
        argv = list(cmd) + [f"{k}={format_level(v)}" for k, v in sorted(configuration.items())]
        done = self._spawn(argv, self.adapt_timeout, VALIDATE)
        if done.returncode == 0:
            return True
        if done.returncode == 1:
            return False
        why = "timed out" if done.timed_out else f"exit {done.returncode}"
        raise TargetFailure(TrialResult.failure(VALIDATE, why))

    def run_trial(self, deadline: float) -> TrialResult:
        start = time.monotonic()
        try:
            done = run_command(self.description.run_command, deadline, self.cwd, self.env)
        except OSError as e:
            return TrialResult.failure(RUN, f"cannot start run command: {e}")
        elapsed = time.monotonic() - start
        if done.timed_out:
            return TrialResult.failure(TIMEOUT, f"exceeded {deadline:g} s", elapsed)
        if done.returncode != 0:
            return TrialResult.failure(RUN, f"exit {done.returncode}", elapsed)
        parsed = parse_metric_output(done.stdout, self.description.metrics)
        if not parsed.ok:
            return parsed
        return TrialResult.success(parsed.metrics, elapsed)

    def recover(self, current: Optional[Combination], consecutive_attempts: int,
                max_recovers: int) -> Tuple[Recovery, str]:
        try:
            done = run_command(self.description.recover_command, self.adapt_timeout, self.cwd, self.env)
        except OSError as e:
            return Recovery.ABANDON, f"recovery failed to start: {e}"
        if done.returncode != 0:
            why = "timed out" if done.timed_out else f"exit {done.returncode}"
            return Recovery.ABANDON, f"recovery {why}"
        return decide_recovery(consecutive_attempts, max_recovers), ""


# ---------------------------------------------------------------- synthetic target

@dataclass(frozen=True)
class Step:
    factor: str
    threshold: float
    offset: float


@dataclass(frozen=True)
class Bump:
    """Gaussian bump ``height * exp(-|x - centre|^2 / (2 width^2))``."""
    centre: Tuple[Tuple[str, float], ...]
    height: float
    width: float


@dataclass(frozen=True)
class MetricSurface:
    intercept: float = 0.0
    linear: Tuple[Tuple[str, float], ...] = ()
    quadratic: Tuple[Tuple[str, float], ...] = ()
    interaction: Tuple[Tuple[str, str, float], ...] = ()
    steps: Tuple[Step, ...] = ()
    bumps: Tuple[Bump, ...] = ()
    noise_sigma: float = 0.0

    def value(self, x: Mapping[str, float]) -> float:
        y = self.intercept
        y += sum(b * x[f] for f, b in self.linear)
        y += sum(b * x[f] ** 2 for f, b in self.quadratic)
        y += sum(b * x[f] * x[g] for f, g, b in self.interaction)
        y += sum(s.offset for s in self.steps if x[s.factor] > s.threshold)
        for bump in self.bumps:
            d2 = sum((x[f] - c) ** 2 for f, c in bump.centre)
            y += bump.height * math.exp(-d2 / (2 * bump.width ** 2))
        return y


@dataclass(frozen=True)
class SyntheticTargetSpec:
    metrics: Tuple[Tuple[str, MetricSurface], ...]
    fail_probability: float = 0.0
    seed: int = 0
    invalid: Tuple[Tuple[str, float], ...] = field(default=())

    def __post_init__(self):
        if not 0.0 <= self.fail_probability <= 1.0:
            raise ValueError("fail_probability must lie in [0, 1]")
        for name, m in self.metrics:
            if m.noise_sigma < 0:
                raise ValueError(f"{name}: noise_sigma must be non-negative")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticTargetSpec":
        metrics = []
        for name, m in d["metrics"].items():
            metrics.append((name, MetricSurface(
                intercept=float(m.get("intercept", 0.0)),
                linear=tuple((f, float(v)) for f, v in m.get("linear", {}).items()),
                quadratic=tuple((f, float(v)) for f, v in m.get("quadratic", {}).items()),
                interaction=tuple((f, g, float(v)) for f, g, v in m.get("interaction", [])),
                steps=tuple(Step(s["factor"], float(s["threshold"]), float(s["offset"]))
                            for s in m.get("steps", [])),
                bumps=tuple(Bump(tuple((f, float(c)) for f, c in b["centre"].items()),
                                 float(b["height"]), float(b["width"])) for b in m.get("bumps", [])),
                noise_sigma=float(m.get("noise_sigma", 0.0)),
            )))
        return cls(tuple(metrics), float(d.get("fail_probability", 0.0)), int(d.get("seed", 0)),
                   tuple((f, float(v)) for f, v in d.get("invalid", {}).items()))

    @classmethod
    def load(cls, path) -> "SyntheticTargetSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def metric_names(self) -> Tuple[str, ...]:
        return tuple(n for n, _ in self.metrics)


def _draw_stream(seed: int, draw_index: int, count: int) -> np.ndarray:
    # counter-based: the draw index sits in its own counter word, so streams
    # for different indices never overlap
    bits = np.random.Philox(key=seed & 0xFFFFFFFFFFFFFFFF, counter=[0, draw_index, 0, 0])
    return np.random.Generator(bits).random(count)


def _gaussian(u1: float, u2: float) -> float:
    # Box-Muller; 1 - u1 lies in (0, 1]
    return math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)


def synthetic_evaluate(spec: SyntheticTargetSpec, combination: Combination, draw_index: int) -> TrialResult:
    # text levels cannot enter a polynomial; surfaces simply never name them
    x = {k: float(v) for k, v in combination.levels().items() if not isinstance(v, str)}
    u = _draw_stream(spec.seed, draw_index, 1 + 2 * len(spec.metrics))
    if u[0] < spec.fail_probability:
        return TrialResult.failure(RUN, "injected")
    values = []
    for i, (name, surface) in enumerate(spec.metrics):
        y = surface.value(x)
        if surface.noise_sigma > 0:
            y += surface.noise_sigma * _gaussian(u[1 + 2 * i], u[2 + 2 * i])
        values.append((name, y))
    return TrialResult.success(values, 0.0)


class SyntheticTarget:
    """In-process target evaluating a :class:`SyntheticTargetSpec`.

    Each ``run_trial`` consumes the next draw index. ``adaptations`` logs every
    applied ``(factor, level)`` so tests can check the diff-only rule.
    Configurations listed under ``invalid`` (factor above threshold) fail
    validation.
    """

    def __init__(self, spec: SyntheticTargetSpec, draw_index: int = 0, recover_fails: bool = False):
        self.spec = spec
        self.draw_index = draw_index
        self.levels: Dict[str, object] = {}
        self.adaptations = []
        self.recoveries = 0
        self.recover_fails = recover_fails

    def apply_level(self, factor: Factor, level) -> None:
        self.adaptations.append((factor.name, level))
        self.levels[factor.name] = level

    def validate_configuration(self, configuration: Mapping) -> bool:
        return not any(float(configuration.get(f, -math.inf)) > t for f, t in self.spec.invalid)

    def run_trial(self, deadline: float) -> TrialResult:
        comb = Combination.of(self.levels)
        result = synthetic_evaluate(self.spec, comb, self.draw_index)
        self.draw_index += 1
        return result

    def skip_draws(self, count: int) -> None:
        """Advance past draws already consumed by an earlier session."""
        self.draw_index += count

    def recover(self, current, consecutive_attempts: int, max_recovers: int):
        self.recoveries += 1
        if self.recover_fails:
            return Recovery.ABANDON, "recovery exit 1"
        return decide_recovery(consecutive_attempts, max_recovers), ""
