"""Effects tables, one-way ANOVA, rank correlation and control-by-noise tables.

``data`` arguments are sequences of ``(levels, response)`` pairs where
``levels`` maps factor name to level.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

from tactkit.errors import StatsError
from tactkit.stats.distributions import f_upper_p

Observation = Tuple[Mapping, float]


def _mean(xs):
    return math.fsum(xs) / len(xs)


def _sort_key(v):
    return (isinstance(v, str), v)


def main_effects(data: Sequence[Observation], factor: str) -> dict:
    """Mean response at each level of ``factor``, levels ascending."""
    groups = defaultdict(list)
    for levels, y in data:
        groups[levels[factor]].append(y)
    return {lv: _mean(groups[lv]) for lv in sorted(groups, key=_sort_key)}


def interaction_table(data: Sequence[Observation], f: str, g: str) -> dict:
    """Cell means keyed by ``(level_f, level_g)``."""
    groups = defaultdict(list)
    for levels, y in data:
        groups[(levels[f], levels[g])].append(y)
    keys = sorted(groups, key=lambda k: (_sort_key(k[0]), _sort_key(k[1])))
    return {k: _mean(groups[k]) for k in keys}


@dataclass(frozen=True)
class AnovaResult:
    f: float
    p: float
    df_between: int
    df_within: int
    degenerate: bool = False


def one_way_anova(*groups: Sequence[float]) -> AnovaResult:
    if len(groups) < 2:
        raise StatsError("ANOVA needs at least two groups")
    if any(len(g) < 2 for g in groups):
        raise StatsError("each ANOVA group needs at least two observations")
    means = [_mean(g) for g in groups]
    n = sum(len(g) for g in groups)
    grand = math.fsum(math.fsum(g) for g in groups) / n
    ss_between = math.fsum(len(g) * (m - grand) ** 2 for g, m in zip(groups, means))
    ss_within = math.fsum((y - m) ** 2 for g, m in zip(groups, means) for y in g)
    df_b, df_w = len(groups) - 1, n - len(groups)
    if ss_within == 0.0:
        if ss_between == 0.0:
            return AnovaResult(0.0, 1.0, df_b, df_w)
        return AnovaResult(math.inf, 0.0, df_b, df_w, degenerate=True)
    f = (ss_between / df_b) / (ss_within / df_w)
    return AnovaResult(f, f_upper_p(f, df_b, df_w), df_b, df_w)


@dataclass(frozen=True)
class RankValidationResult:
    tau: float
    concordant_fraction: float
    concordant: int
    discordant: int


def kendall_tau(ranking_a, ranking_b) -> RankValidationResult:
    """Kendall's tau between two scorings of the same items.

    Accepts aligned sequences or mappings keyed by item. Ties are rejected.
    """
    if isinstance(ranking_a, Mapping):
        if set(ranking_a) != set(ranking_b):
            raise StatsError("rankings cover different items")
        keys = list(ranking_a)
        a = [ranking_a[k] for k in keys]
        b = [ranking_b[k] for k in keys]
    else:
        a, b = list(ranking_a), list(ranking_b)
        if len(a) != len(b):
            raise StatsError("rankings have different lengths")
    n = len(a)
    if n < 2:
        raise StatsError("need at least two items")
    if len(set(a)) != n or len(set(b)) != n:
        raise StatsError("tied ranks are not supported")
    conc = disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = (a[i] - a[j]) * (b[i] - b[j])
            if s > 0:
                conc += 1
            else:
                disc += 1
    pairs = n * (n - 1) // 2
    return RankValidationResult((conc - disc) / pairs, conc / pairs, conc, disc)


@dataclass(frozen=True)
class ControlNoiseTable:
    control: str
    noise: str
    noise_levels: tuple
    means: dict       # control level -> {noise level: mean}
    flatness: dict    # control level -> max - min across noise levels
    ordering: tuple   # control levels, most noise-insensitive first


def control_by_noise(data: Sequence[Observation], control: str, noise: str) -> ControlNoiseTable:
    cells = interaction_table(data, control, noise)
    noise_levels = tuple(sorted({k[1] for k in cells}, key=_sort_key))
    means = defaultdict(dict)
    for (c, n), m in cells.items():
        means[c][n] = m
    flatness = {c: max(row.values()) - min(row.values()) for c, row in means.items()}
    # ties in flatness go to the higher mean response
    ordering = tuple(sorted(means, key=lambda c: (flatness[c], -_mean(list(means[c].values())),
                                                   _sort_key(c))))
    return ControlNoiseTable(control, noise, noise_levels, dict(means), flatness, ordering)
