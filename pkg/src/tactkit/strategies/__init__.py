"""Search strategies and construction from an experiment description."""

from typing import Optional

from tactkit.errors import StrategyError
from tactkit.experiment import ExperimentDescription, enumerate_levels, parse_level
from tactkit.strategies.base import LevelGrid, Strategy, make_combination
from tactkit.strategies.basic import GridStrategy, RandomStrategy
from tactkit.strategies.local import AnnealingStrategy, AnnealSchedule, HillClimbStrategy, acceptance_probability
from tactkit.strategies.meta import MetaStrategy
from tactkit.strategies.taguchi import TaguchiStrategy

STRATEGIES = ("grid", "random", "hillclimb", "annealing", "taguchi", "meta")


def _flag(text) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _prefixed(settings, prefix):
    return {k[len(prefix):]: v for k, v in settings.items() if k.startswith(prefix)}


def _int(settings, key, default):
    try:
        return int(settings[key]) if key in settings else default
    except ValueError:
        raise StrategyError(f"setting {key!r} must be an integer") from None


def _float(settings, key, default):
    try:
        return float(settings[key]) if key in settings else default
    except ValueError:
        raise StrategyError(f"setting {key!r} must be a number") from None


def _start(desc, settings, given: Optional[dict]):
    """Start levels: handed over, then ``start.<factor>`` settings, then each
    factor's middle sample level."""
    start = {}
    explicit = _prefixed(settings, "start.")
    for f in desc.factors:
        if given and f.name in given:
            start[f.name] = given[f.name]
        elif f.name in explicit:
            start[f.name] = parse_level(explicit[f.name], f.domain.kind, f"start.{f.name}")
        else:
            lv = enumerate_levels(f)
            start[f.name] = lv[len(lv) // 2]
    return start


def build_strategy(desc: ExperimentDescription, name: Optional[str] = None,
                   start: Optional[dict] = None, budget: Optional[int] = None) -> Strategy:
    """Construct the strategy named in the description from its settings.

    Shared settings: ``budget``, ``replications``. Local search: ``start.<f>``,
    ``t0``, ``cooling``, ``span``. Taguchi: ``interactions`` (``A*B,C*D``),
    ``scale.<f>``, ``levels.<f>`` (comma list in coded order), ``step.<f>``,
    ``significance``, ``alpha_star``, ``n_center``, ``oa_levels``,
    ``stop_after_phase1``. Meta: ``stages`` (comma list of strategy names).
    """
    s = desc.settings
    name = name or desc.strategy
    if budget is None and "budget" in s:
        budget = _int(s, "budget", None)
    seed = desc.seed
    if name == "grid":
        return GridStrategy(desc.factors, _int(s, "replications", 1), seed, budget)
    if name == "random":
        return RandomStrategy(desc.factors, budget if budget is not None else 100, seed)
    if name == "hillclimb":
        return HillClimbStrategy(desc.factors, _start(desc, s, start), budget, seed)
    if name == "annealing":
        t0 = _float(s, "t0", None)
        schedule = AnnealSchedule(t0, _float(s, "cooling", 0.95), _int(s, "span", 3))
        return AnnealingStrategy(desc.factors, _start(desc, s, start), schedule,
                                 budget if budget is not None else 200, seed)
    if name == "taguchi":
        inter = []
        for pair in filter(None, (p.strip() for p in s.get("interactions", "").split(","))):
            if "*" not in pair:
                raise StrategyError(f"interaction {pair!r} must look like A*B")
            inter.append(tuple(x.strip() for x in pair.split("*", 1)))
        levels = {}
        for f, text in _prefixed(s, "levels.").items():
            factor = desc.factor(f)
            levels[f] = [parse_level(v.strip(), factor.domain.kind, f"levels.{f}") for v in text.split(",")]
        return TaguchiStrategy(
            desc.factors, _int(s, "replications", 4), inter,
            {f: float(v) for f, v in _prefixed(s, "scale.").items()}, levels,
            _float(s, "significance", 0.05),
            {f: float(v) for f, v in _prefixed(s, "step.").items()},
            _float(s, "alpha_star", None), _int(s, "n_center", 6),
            _flag(s.get("stop_after_phase1", "")), _int(s, "oa_levels", None), seed, budget)
    if name == "meta":
        stages = [x.strip() for x in s.get("stages", "").split(",") if x.strip()]
        if not stages or "meta" in stages:
            raise StrategyError("meta strategy needs a 'stages' list of other strategies")
        factories = [lambda st, b, n=n: build_strategy(desc, n, st, b) for n in stages]
        return MetaStrategy(desc.factors, factories, budget, seed)
    raise StrategyError(f"unknown search strategy {name!r}; choose from {', '.join(STRATEGIES)}")


__all__ = [
    "AnnealSchedule", "AnnealingStrategy", "GridStrategy", "HillClimbStrategy", "LevelGrid",
    "MetaStrategy", "RandomStrategy", "Strategy", "TaguchiStrategy", "acceptance_probability",
    "build_strategy", "make_combination",
]
