"""Experiment vocabulary: factors, level domains, combinations and the XML description.

The description document follows the ACT layout (``<ACT>`` root with
``factors``, ``fitnessMetrics``, ``functions``, ``resources`` and
``miscellaneous`` sections). Wrapper functions are external commands here, so
each ``*Command`` element holds a list of ``<arg>`` children.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Tuple, Union

from tactkit.errors import DescriptionError

LevelValue = Union[int, float, str]

LEVEL_TYPES = ("int", "float", "string")
CONTROL = "control"
NOISE = "noise"

GRANULE_TOLERANCE = 1e-9

_UNITS = {
    "secs": 1.0, "sec": 1.0, "seconds": 1.0, "s": 1.0,
    "mins": 60.0, "min": 60.0, "minutes": 60.0,
    "hours": 3600.0, "hour": 3600.0, "hrs": 3600.0,
}


def level_tag(value) -> str:
    if isinstance(value, bool):
        raise TypeError("boolean is not a level value")
    if isinstance(value, int):
        return "int"
    if isinstance(value, float):
        return "float"
    if isinstance(value, str):
        return "string"
    raise TypeError(f"unsupported level value {value!r}")


def format_level(value: LevelValue) -> str:
    """Textual form used for command substitution and file output."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_level(text: str, kind: str, path: str = "") -> LevelValue:
    text = text.strip() if kind != "string" else text
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError("non-finite")
            return value
    except ValueError:
        raise DescriptionError(path, f"cannot read {text!r} as {kind}") from None
    if kind == "string":
        return text
    raise DescriptionError(path, f"unknown level type {kind!r}")


@dataclass(frozen=True)
class Enumeration:
    kind: str
    levels: Tuple[LevelValue, ...]

    def __post_init__(self):
        if self.kind not in LEVEL_TYPES:
            raise DescriptionError("", f"unknown level type {self.kind!r}")
        if not self.levels:
            raise DescriptionError("", "enumeration is empty")
        if len(set(self.levels)) != len(self.levels):
            raise DescriptionError("", "enumeration has duplicate levels")
        for v in self.levels:
            _check_tag(v, self.kind)


@dataclass(frozen=True)
class Range:
    kind: str
    lower: Union[int, float]
    upper: Union[int, float]
    legal_granularity: Union[int, float]
    sample_granularity: Union[int, float, None] = None

    def __post_init__(self):
        if self.kind not in ("int", "float"):
            raise DescriptionError("", "a range needs a numeric level type")
        for v in (self.lower, self.upper):
            _check_tag(v, self.kind)
        if self.legal_granularity <= 0:
            raise DescriptionError("", "legal granularity must be positive")
        if self.lower > self.upper:
            raise DescriptionError("", f"range lower {self.lower} > upper {self.upper}")
        if not _is_multiple(self.upper - self.lower, self.legal_granularity):
            raise DescriptionError(
                "", f"range {self.lower}..{self.upper} is not a whole number of "
                f"{self.legal_granularity} granules")
        if self.sample_granularity is None:
            object.__setattr__(self, "sample_granularity", self.legal_granularity)
        if self.sample_granularity <= 0:
            raise DescriptionError("", "sample granularity must be positive")
        if not _is_multiple(self.sample_granularity, self.legal_granularity):
            raise DescriptionError("", "sample granularity must be a multiple of legal granularity")


LevelDomain = Union[Enumeration, Range]


def _check_tag(value, kind):
    try:
        tag = level_tag(value)
    except TypeError as exc:
        raise DescriptionError("", str(exc)) from None
    if tag != kind:
        raise DescriptionError("", f"level {value!r} is not of type {kind}")
    if tag == "float" and not math.isfinite(value):
        raise DescriptionError("", "real levels must be finite")


def _is_multiple(x, g) -> bool:
    k = round(x / g)
    return abs(x - k * g) <= GRANULE_TOLERANCE * g


@dataclass(frozen=True)
class Factor:
    name: str
    domain: LevelDomain
    role: str = CONTROL
    time_to_adapt: float = 0.0
    adaptation_command: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.role not in (CONTROL, NOISE):
            raise DescriptionError(self.name, f"unknown factor role {self.role!r}")

    @property
    def numeric(self) -> bool:
        return self.domain.kind in ("int", "float")


def enumerate_levels(factor: Factor) -> list:
    """Levels a search should sample: the enumeration verbatim, or the range
    stepped by sample granularity with the upper bound always included."""
    d = factor.domain
    if isinstance(d, Enumeration):
        return list(d.levels)
    step = d.sample_granularity
    levels = []
    i = 0
    while True:
        v = d.lower + i * step
        if v > d.upper - GRANULE_TOLERANCE * d.legal_granularity:
            break
        levels.append(v)
        i += 1
    levels.append(d.upper)
    return levels


def level_in_domain(factor: Factor, value: LevelValue) -> bool:
    d = factor.domain
    tag = level_tag(value)
    if isinstance(d, Enumeration):
        if tag != d.kind and not (d.kind == "float" and tag == "int"):
            raise TypeError(f"{factor.name}: level {value!r} does not match type {d.kind}")
        return value in d.levels
    if tag == "string" or (d.kind == "int" and tag == "float" and not float(value).is_integer()):
        if tag == "string":
            raise TypeError(f"{factor.name}: level {value!r} does not match type {d.kind}")
        return False
    tol = GRANULE_TOLERANCE * d.legal_granularity
    if value < d.lower - tol or value > d.upper + tol:
        return False
    return _is_multiple(value - d.lower, d.legal_granularity)


def snap_to_domain(factor: Factor, value: float) -> list:
    """Legal levels bracketing ``value`` (one or two, ascending)."""
    d = factor.domain
    if isinstance(d, Enumeration):
        levels = sorted(d.levels)
        below = [v for v in levels if v <= value]
        above = [v for v in levels if v >= value]
        out = []
        if below:
            out.append(below[-1])
        if above and (not out or above[0] != out[0]):
            out.append(above[0])
        return out
    g = d.legal_granularity
    value = min(max(value, d.lower), d.upper)
    k = (value - d.lower) / g
    lo = math.floor(k + GRANULE_TOLERANCE)
    hi = math.ceil(k - GRANULE_TOLERANCE)
    out = []
    for j in sorted({lo, hi}):
        v = d.lower + j * g
        if d.kind == "int":
            v = int(round(v))
        if d.lower <= v <= d.upper:
            out.append(v)
    return out


def round_to_granule(factor: Factor, value: float) -> LevelValue:
    """Nearest legal granule, halves rounded away from zero (relative to the
    domain's lower bound)."""
    d = factor.domain
    if isinstance(d, Enumeration):
        raise TypeError(f"{factor.name}: enumerated factors cannot be rounded")
    g = d.legal_granularity
    k = (value - d.lower) / g
    j = math.floor(abs(k) + 0.5 + GRANULE_TOLERANCE)
    j = j if k >= 0 else -j
    v = d.lower + j * g
    if d.kind == "int":
        return int(round(v))
    return float(v)


@dataclass(frozen=True)
class Combination:
    """One level per control factor (configuration) and per noise factor
    (condition). Stored as name-sorted tuples so equal combinations hash
    equally regardless of construction order."""

    configuration: Tuple[Tuple[str, LevelValue], ...]
    condition: Tuple[Tuple[str, LevelValue], ...] = ()

    @classmethod
    def of(cls, configuration: Mapping, condition: Optional[Mapping] = None) -> "Combination":
        return cls(tuple(sorted(configuration.items())),
                   tuple(sorted((condition or {}).items())))

    @classmethod
    def from_levels(cls, description: "ExperimentDescription", levels: Mapping) -> "Combination":
        config = {f.name: levels[f.name] for f in description.control_factors}
        cond = {f.name: levels[f.name] for f in description.noise_factors}
        return cls.of(config, cond)

    @property
    def config(self) -> dict:
        return dict(self.configuration)

    @property
    def conditions(self) -> dict:
        return dict(self.condition)

    def levels(self) -> dict:
        out = dict(self.configuration)
        out.update(self.condition)
        return out

    def __getitem__(self, name):
        for k, v in self.configuration + self.condition:
            if k == name:
                return v
        raise KeyError(name)


@dataclass(frozen=True)
class AggregationSpec:
    """``weights`` of length one with weight 1 is a single-metric response."""

    mode: str
    weights: Tuple[Tuple[str, float], ...]
    normaliser: Optional[float] = None

    @classmethod
    def single(cls, metric: str, normaliser: Optional[float] = None) -> "AggregationSpec":
        return cls("single", ((metric, 1.0),), normaliser)

    @classmethod
    def weighted(cls, weights: Mapping, normaliser: Optional[float] = None) -> "AggregationSpec":
        return cls("weighted", tuple((k, float(w)) for k, w in weights.items()), normaliser)

    def __post_init__(self):
        if self.mode not in ("single", "weighted"):
            raise DescriptionError("aggregation", f"unknown mode {self.mode!r}")
        if self.mode == "single" and len(self.weights) != 1:
            raise DescriptionError("aggregation", "single mode takes exactly one metric")
        if not self.weights:
            raise DescriptionError("aggregation", "no metrics to aggregate")
        for name, w in self.weights:
            if not math.isfinite(w):
                raise DescriptionError("aggregation", f"weight for {name} is not finite")
        if self.normaliser is not None and not (self.normaliser > 0 and math.isfinite(self.normaliser)):
            raise DescriptionError("aggregation", "normaliser must be positive")


@dataclass(frozen=True)
class ExperimentDescription:
    factors: Tuple[Factor, ...]
    metrics: Tuple[str, ...]
    run_command: Tuple[str, ...]
    recover_command: Tuple[str, ...]
    time_budget: float
    trial_timeout: float
    validate_command: Optional[Tuple[str, ...]] = None
    hosts: Tuple[str, ...] = ()
    max_recovers: int = 1
    strategy: str = "grid"
    strategy_settings: Tuple[Tuple[str, str], ...] = ()
    aggregation: Optional[AggregationSpec] = None
    seed: int = 0

    def __post_init__(self):
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise DescriptionError("factors", "factor names are not unique")
        if not any(f.role == CONTROL for f in self.factors):
            raise DescriptionError("factors", "at least one target factor is required")
        if not self.metrics:
            raise DescriptionError("fitnessMetrics", "at least one metric is required")
        if len(set(self.metrics)) != len(self.metrics):
            raise DescriptionError("fitnessMetrics", "metric names are not unique")
        if not self.trial_timeout > 0:
            raise DescriptionError("miscellaneous/timeout", "trial timeout must be positive")
        if self.time_budget < self.trial_timeout:
            raise DescriptionError("resources/timeLimit", "time budget is shorter than the trial timeout")
        if self.max_recovers < 0:
            raise DescriptionError("miscellaneous/maxRecovers", "must be non-negative")
        if self.aggregation is None:
            object.__setattr__(self, "aggregation", AggregationSpec.single(self.metrics[0]))
        for name, _ in self.aggregation.weights:
            if name not in self.metrics:
                raise DescriptionError("miscellaneous/aggregation", f"unknown metric {name!r}")
        for f in self.factors:
            if f.adaptation_command:
                n = sum(arg.count("{level}") for arg in f.adaptation_command)
                if n != 1:
                    raise DescriptionError(f"factors/{f.name}/adaptationCommand",
                                           "must contain exactly one {level} token")
        if any("{level}" in arg for arg in self.run_command):
            raise DescriptionError("functions/runCommand", "run command cannot contain {level}")

    @property
    def control_factors(self) -> Tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.role == CONTROL)

    @property
    def noise_factors(self) -> Tuple[Factor, ...]:
        return tuple(f for f in self.factors if f.role == NOISE)

    def factor(self, name: str) -> Factor:
        for f in self.factors:
            if f.name == name:
                return f
        raise KeyError(name)

    @property
    def settings(self) -> dict:
        return dict(self.strategy_settings)


# --------------------------------------------------------------------- parsing

class _Reader:
    """Walks an element tree, reporting problems with slash-separated paths."""

    def __init__(self, elem, path):
        self.elem = elem
        self.path = path

    def children(self, allowed: Iterable[str]):
        allowed = set(allowed)
        for child in self.elem:
            if child.tag not in allowed:
                raise DescriptionError(f"{self.path}/{child.tag}", "unknown field")
        return list(self.elem)

    def child(self, tag, required=True) -> Optional["_Reader"]:
        found = self.elem.findall(tag)
        if len(found) > 1:
            raise DescriptionError(f"{self.path}/{tag}", "appears more than once")
        if not found:
            if required:
                raise DescriptionError(f"{self.path}/{tag}", "missing")
            return None
        return _Reader(found[0], f"{self.path}/{tag}")

    def text(self) -> str:
        return (self.elem.text or "").strip()

    def number(self, kind=float):
        t = self.text()
        try:
            value = kind(t)
        except ValueError:
            raise DescriptionError(self.path, f"expected a number, got {t!r}") from None
        if isinstance(value, float) and not math.isfinite(value):
            raise DescriptionError(self.path, "must be finite")
        return value

    def seconds(self) -> float:
        units = self.elem.get("UNITS", "secs")
        if units not in _UNITS:
            raise DescriptionError(self.path, f"unknown units {units!r}")
        return self.number(float) * _UNITS[units]

    def attrs(self, allowed):
        for k in self.elem.attrib:
            if k not in allowed:
                raise DescriptionError(f"{self.path}@{k}", "unknown attribute")


def _read_command(r: _Reader) -> Tuple[str, ...]:
    args = []
    for child in r.children({"arg"}):
        args.append(child.text or "")
    if not args:
        raise DescriptionError(r.path, "command has no arguments")
    return tuple(args)


def _read_domain(r: _Reader) -> LevelDomain:
    r.children({"enumeration", "range"})
    if len(r.elem) != 1:
        raise DescriptionError(r.path, "expected exactly one enumeration or range")
    inner = _Reader(r.elem[0], f"{r.path}/{r.elem[0].tag}")
    inner.attrs({"TYPE"})
    kind = inner.elem.get("TYPE")
    if kind not in LEVEL_TYPES:
        raise DescriptionError(f"{inner.path}@TYPE", f"expected one of {LEVEL_TYPES}")
    try:
        if inner.elem.tag == "enumeration":
            levels = []
            for i, child in enumerate(inner.children({"level"})):
                levels.append(parse_level(child.text or "", kind, f"{inner.path}/level[{i}]"))
            return Enumeration(kind, tuple(levels))
        inner.children({"start", "end", "legalGranular", "sampleGranular"})
        num = int if kind == "int" else float
        lower = parse_level(inner.child("start").text(), kind, f"{inner.path}/start")
        upper = parse_level(inner.child("end").text(), kind, f"{inner.path}/end")
        legal = inner.child("legalGranular", required=False)
        legal = legal.number(num) if legal is not None else num(1)
        sample = inner.child("sampleGranular", required=False)
        sample = sample.number(num) if sample is not None else None
        return Range(kind, lower, upper, legal, sample)
    except DescriptionError as exc:
        if exc.path:
            raise
        raise DescriptionError(inner.path, exc.message) from None


def _read_factor(r: _Reader, role: str) -> Factor:
    r.children({"name", "levels", "timeToAdapt", "adaptationCommand"})
    name = r.child("name").text()
    if not name:
        raise DescriptionError(f"{r.path}/name", "empty factor name")
    path = f"{r.path}[{name}]"
    r.path = path
    domain = _read_domain(r.child("levels"))
    tta = r.child("timeToAdapt", required=False)
    cmd = r.child("adaptationCommand", required=False)
    return Factor(
        name=name,
        role=role,
        domain=domain,
        time_to_adapt=tta.seconds() if tta is not None else 0.0,
        adaptation_command=_read_command(cmd) if cmd is not None else (),
    )


def parse_experiment_description(document: Union[str, bytes]) -> ExperimentDescription:
    """Parse an ACT experiment description document."""
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise DescriptionError("", f"malformed document: {exc}") from None
    if root.tag != "ACT":
        raise DescriptionError(root.tag, "root element must be ACT")
    top = _Reader(root, "ACT")
    top.children({"factors", "fitnessMetrics", "functions", "resources", "miscellaneous"})

    fr = top.child("factors")
    fr.children({"targFactors", "conditionsFactors"})
    factors = []
    for group, item, role in (("targFactors", "targFactor", CONTROL),
                              ("conditionsFactors", "conditionsFactor", NOISE)):
        g = fr.child(group, required=(role == CONTROL))
        if g is None:
            continue
        for i, child in enumerate(g.children({item})):
            factors.append(_read_factor(_Reader(child, f"{g.path}/{item}[{i}]"), role))

    mr = top.child("fitnessMetrics")
    metrics = tuple((c.text or "").strip() for c in mr.children({"fitnessMetric"}))

    fn = top.child("functions")
    fn.children({"runCommand", "recoveryCommand", "validationCommand"})
    run = _read_command(fn.child("runCommand"))
    recover = _read_command(fn.child("recoveryCommand"))
    vr = fn.child("validationCommand", required=False)
    validate = _read_command(vr) if vr is not None else None

    rr = top.child("resources")
    rr.children({"timeLimit", "hosts"})
    time_budget = rr.child("timeLimit").seconds()
    hr = rr.child("hosts", required=False)
    hosts = tuple((c.text or "").strip() for c in hr.children({"host"})) if hr is not None else ()

    misc = top.child("miscellaneous")
    misc.children({"timeout", "maxRecovers", "searchStrategy", "aggregation", "seed"})
    timeout = misc.child("timeout").seconds()
    mx = misc.child("maxRecovers", required=False)
    max_recovers = mx.number(int) if mx is not None else 1

    strategy, settings = "grid", ()
    sr = misc.child("searchStrategy", required=False)
    if sr is not None:
        sr.attrs({"NAME"})
        strategy = sr.elem.get("NAME", "grid")
        pairs = []
        for i, c in enumerate(sr.children({"setting"})):
            key = c.get("NAME")
            if not key:
                raise DescriptionError(f"{sr.path}/setting[{i}]", "setting needs a NAME")
            pairs.append((key, (c.text or "").strip()))
        settings = tuple(pairs)

    aggregation = None
    ar = misc.child("aggregation", required=False)
    if ar is not None:
        ar.attrs({"MODE", "NORMALISER"})
        mode = ar.elem.get("MODE", "single")
        norm = ar.elem.get("NORMALISER")
        try:
            norm = float(norm) if norm is not None else None
        except ValueError:
            raise DescriptionError(f"{ar.path}@NORMALISER", "expected a number") from None
        weights = []
        for c in ar.children({"metric"}):
            w = c.get("WEIGHT", "1")
            try:
                weights.append(((c.text or "").strip(), float(w)))
            except ValueError:
                raise DescriptionError(f"{ar.path}/metric@WEIGHT", "expected a number") from None
        try:
            aggregation = AggregationSpec(mode, tuple(weights), norm)
        except DescriptionError as exc:
            raise DescriptionError(ar.path, exc.message) from None

    sd = misc.child("seed", required=False)
    seed = sd.number(int) if sd is not None else 0

    try:
        return ExperimentDescription(
            factors=tuple(factors), metrics=metrics, run_command=run,
            recover_command=recover, validate_command=validate,
            time_budget=time_budget, hosts=hosts, trial_timeout=timeout,
            max_recovers=max_recovers, strategy=strategy,
            strategy_settings=settings, aggregation=aggregation, seed=seed,
        )
    except DescriptionError as exc:
        raise DescriptionError(exc.path if exc.path.startswith("ACT") else f"ACT/{exc.path}",
                               exc.message) from None


# ----------------------------------------------------------------- serialising

def _num(x) -> str:
    if isinstance(x, float) and x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x) if isinstance(x, float) else str(x)


def _sub(parent, tag, text=None, **attrs):
    e = ET.SubElement(parent, tag, {k: v for k, v in attrs.items() if v is not None})
    if text is not None:
        e.text = text
    return e


def _write_command(parent, tag, command):
    e = _sub(parent, tag)
    for arg in command:
        _sub(e, "arg", arg)


def serialize_experiment_description(desc: ExperimentDescription) -> str:
    root = ET.Element("ACT")
    factors = _sub(root, "factors")
    groups = {CONTROL: _sub(factors, "targFactors")}
    if desc.noise_factors:
        groups[NOISE] = _sub(factors, "conditionsFactors")
    for f in desc.factors:
        tag = "targFactor" if f.role == CONTROL else "conditionsFactor"
        fe = _sub(groups[f.role], tag)
        _sub(fe, "name", f.name)
        levels = _sub(fe, "levels")
        d = f.domain
        if isinstance(d, Enumeration):
            en = _sub(levels, "enumeration", TYPE=d.kind)
            for v in d.levels:
                _sub(en, "level", format_level(v))
        else:
            rg = _sub(levels, "range", TYPE=d.kind)
            _sub(rg, "start", format_level(d.lower))
            _sub(rg, "end", format_level(d.upper))
            _sub(rg, "legalGranular", format_level(d.legal_granularity))
            _sub(rg, "sampleGranular", format_level(d.sample_granularity))
        _sub(fe, "timeToAdapt", _num(f.time_to_adapt), UNITS="secs")
        if f.adaptation_command:
            _write_command(fe, "adaptationCommand", f.adaptation_command)
    metrics = _sub(root, "fitnessMetrics")
    for m in desc.metrics:
        _sub(metrics, "fitnessMetric", m)
    fn = _sub(root, "functions")
    _write_command(fn, "runCommand", desc.run_command)
    _write_command(fn, "recoveryCommand", desc.recover_command)
    if desc.validate_command is not None:
        _write_command(fn, "validationCommand", desc.validate_command)
    res = _sub(root, "resources")
    _sub(res, "timeLimit", _num(desc.time_budget), UNITS="secs")
    if desc.hosts:
        hosts = _sub(res, "hosts")
        for h in desc.hosts:
            _sub(hosts, "host", h)
    misc = _sub(root, "miscellaneous")
    _sub(misc, "timeout", _num(desc.trial_timeout), UNITS="secs")
    _sub(misc, "maxRecovers", str(desc.max_recovers))
    st = _sub(misc, "searchStrategy", NAME=desc.strategy)
    for k, v in desc.strategy_settings:
        _sub(st, "setting", v, NAME=k)
    agg = desc.aggregation
    ae = _sub(misc, "aggregation", MODE=agg.mode,
              NORMALISER=None if agg.normaliser is None else repr(float(agg.normaliser)))
    for name, w in agg.weights:
        _sub(ae, "metric", name, WEIGHT=repr(w))
    _sub(misc, "seed", str(desc.seed))
    ET.indent(root, space="  ")
    return '<?xml version="1.0"?>\n' + ET.tostring(root, encoding="unicode") + "\n"


def load_experiment_description(path) -> ExperimentDescription:
    with open(path, "rb") as fh:
        return parse_experiment_description(fh.read())
