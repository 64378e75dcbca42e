"""Grid (randomized full factorial) and uniform random sampling."""

from __future__ import annotations

import numpy as np

from tactkit.designs import full_factorial, randomized_run_order
from tactkit.errors import StrategyError
from tactkit.strategies.base import LevelGrid, Strategy


class GridStrategy(Strategy):
    name = "grid"

    def __init__(self, factors, replications: int = 1, seed: int = 0, budget=None, cap: int = 10 ** 6):
        super().__init__(factors, budget, seed)
        if replications < 1:
            raise StrategyError("replications must be at least 1")
        self.design = full_factorial(self.factors, cap)
        self.plan = randomized_run_order(self.design, replications, seed)
        self._next = 0

    def _propose(self):
        if self._next >= len(self.plan):
            return None
        trial = self.plan[self._next]
        self._next += 1
        return trial.levels


class RandomStrategy(Strategy):
    name = "random"

    def __init__(self, factors, budget: int, seed: int = 0):
        super().__init__(factors, budget, seed)
        self.grid = LevelGrid(self.factors)
        self.rng = np.random.default_rng(seed)

    def _propose(self):
        idx = [int(self.rng.integers(len(lv))) for lv in self.grid.levels]
        return self.grid.to_levels(idx)
