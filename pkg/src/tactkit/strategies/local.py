"""Local search: first-improvement hill climbing and simulated annealing.

Both maximize the response and walk over the sample-level grid of every
factor. A failed trial counts as the worst possible response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from tactkit.errors import StrategyError
from tactkit.strategies.base import LevelGrid, Strategy, make_combination


def _score(response):
    return -math.inf if response is None else response


def neighbours(grid: LevelGrid, current: tuple, rng) -> list:
    """The ±1-step neighbours of ``current`` in a random order drawn from ``rng``."""
    out = []
    for k in range(len(grid.factors)):
        for d in (-1, 1):
            i = current[k] + d
            if 0 <= i < len(grid.levels[k]):
                out.append(current[:k] + (i,) + current[k + 1:])
    order = rng.permutation(len(out))
    return [out[i] for i in order]


class HillClimbStrategy(Strategy):
    """Tests the ±1-step neighbours of the current point in a seeded order
    and moves to the first strictly better one. Stops when no neighbour
    improves. Responses are cached, so no point is tested twice."""

    name = "hillclimb"

    def __init__(self, factors, start: Mapping, budget: Optional[int] = None, seed: int = 0):
        super().__init__(factors, budget, seed)
        self.grid = LevelGrid(self.factors)
        self.rng = np.random.default_rng(seed)
        self.current = self.grid.index_of(start)
        self.current_value = None
        self.cache = {}
        self.accepted = []
        self._queue = None
        self._waiting = None

    def _neighbours(self):
        return neighbours(self.grid, self.current, self.rng)

    def _propose(self):
        if self._waiting is not None:
            raise StrategyError("hill climb proposed before the previous result")
        if self.current not in self.cache:
            self._waiting = self.current
            return self.grid.to_levels(self.current)
        while True:
            if self._queue is None:
                self._queue = self._neighbours()
            while self._queue:
                cand = self._queue.pop(0)
                if cand in self.cache:
                    continue
                self._waiting = cand
                return self.grid.to_levels(cand)
            return None

    def _observe(self, combination, response):
        idx, self._waiting = self._waiting, None
        self.cache[idx] = _score(response)
        if idx == self.current:
            self.current_value = self.cache[idx]
            self.accepted.append(idx)
        elif self.cache[idx] > self.current_value:
            self.current, self.current_value = idx, self.cache[idx]
            self.accepted.append(idx)
            self._queue = None

    def recommended(self):
        if self.current_value is None:
            return None
        return make_combination(self.factors, self.grid.to_levels(self.current))


@dataclass(frozen=True)
class AnnealSchedule:
    t0: Optional[float] = None      # None: estimate from the spread of the first probes
    cooling: float = 0.95
    span: int = 3
    probes: int = 5

    def __post_init__(self):
        if self.t0 is not None and not self.t0 > 0:
            raise StrategyError("initial temperature must be positive")
        if not 0 < self.cooling < 1:
            raise StrategyError("cooling factor must lie in (0, 1)")
        if self.span < 1:
            raise StrategyError("proposal span must be at least 1")
        if self.probes < 2:
            raise StrategyError("need at least two probes to estimate the temperature")


def acceptance_probability(delta: float, temperature: float) -> float:
    """Metropolis rule for a response drop ``delta``."""
    if delta <= 0:
        return 1.0
    if temperature <= 0:
        return 0.0
    return math.exp(-delta / temperature)


class AnnealingStrategy(Strategy):
    """Simulated annealing with geometric cooling.

    Without an explicit ``t0`` the start is tested followed by ``probes``
    uniform random points; the temperature starts at the spread of those
    responses and the walk continues from the best of them.
    ``proposer(current_index, rng)`` may replace the default move, which
    shifts every factor by a uniform ±(1..span) sample steps.
    """

    name = "annealing"

    def __init__(self, factors, start: Mapping, schedule: AnnealSchedule = AnnealSchedule(),
                 budget: Optional[int] = None, seed: int = 0,
                 proposer: Optional[Callable] = None):
        super().__init__(factors, budget, seed)
        self.grid = LevelGrid(self.factors)
        self.schedule = schedule
        self.rng = np.random.default_rng(seed)
        self.proposer = proposer
        self.current = self.grid.index_of(start)
        self.current_value = None
        self.temperature = schedule.t0
        self.best = None
        self.best_value = -math.inf
        self.accepted = []
        self._probe_values = []
        self._probing = schedule.t0 is None
        self._waiting = None

    def _random_point(self):
        return tuple(int(self.rng.integers(len(lv))) for lv in self.grid.levels)

    def _move(self):
        if self.proposer is not None:
            return tuple(self.proposer(self.current, self.rng))
        out = []
        for k, i in enumerate(self.current):
            step = int(self.rng.integers(1, self.schedule.span + 1)) * (1 if self.rng.random() < 0.5 else -1)
            out.append(self.grid.clamp(k, i + step))
        return tuple(out)

    def _propose(self):
        if self.current_value is None:
            cand = self.current
        elif self._probing:
            cand = self._random_point()
        else:
            cand = self._move()
        self._waiting = cand
        return self.grid.to_levels(cand)

    def _observe(self, combination, response):
        idx, self._waiting = self._waiting, None
        y = _score(response)
        if y > self.best_value or self.best is None:
            self.best, self.best_value = idx, y
        if self.current_value is None:
            self.current_value = y
            self.accepted.append(idx)
            if self._probing:
                self._probe_values.append(y)
            return
        if self._probing:
            self._probe_values.append(y)
            if len(self._probe_values) > self.schedule.probes:
                finite = [v for v in self._probe_values if math.isfinite(v)]
                spread = max(finite) - min(finite) if len(finite) >= 2 else 0.0
                self.temperature = spread if spread > 0 else 1.0
                self._probing = False
                # the walk begins at the best point seen while probing
                if self.best_value > self.current_value:
                    self.current, self.current_value = self.best, self.best_value
                    self.accepted.append(self.best)
            return
        delta = self.current_value - y
        if self.rng.random() < acceptance_probability(delta, self.temperature) and math.isfinite(y):
            self.current, self.current_value = idx, y
            self.accepted.append(idx)
        self.temperature *= self.schedule.cooling

    def recommended(self):
        if self.best is None or not math.isfinite(self.best_value):
            return None
        return make_combination(self.factors, self.grid.to_levels(self.best))
