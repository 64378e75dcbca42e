"""Runs strategies in sequence, handing each the previous best combination."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

from tactkit.errors import StrategyError
from tactkit.strategies.base import Strategy

# builds a stage from (start levels or None, remaining budget or None)
StageFactory = Callable[[Optional[dict], Optional[int]], Strategy]


class MetaStrategy(Strategy):
    name = "meta"

    def __init__(self, factors, stages: Sequence[StageFactory], budget: Optional[int] = None, seed: int = 0):
        super().__init__(factors, budget, seed)
        if not stages:
            raise StrategyError("meta strategy needs at least one stage")
        self.factories = list(stages)
        self.stage_index = 0
        self.current = self.factories[0](None, budget)
        self.finished_stages = []

    def _remaining(self):
        return None if self.budget is None else self.budget - len(self.history)

    def _propose(self):
        while self.current.is_finished():
            self.finished_stages.append(self.current)
            self.stage_index += 1
            if self.stage_index >= len(self.factories):
                return None
            best = self.current.recommended()
            start = best.levels() if best is not None else None
            self.current = self.factories[self.stage_index](start, self._remaining())
        comb = self.current.next_combination()
        return None if comb is None else comb.levels()

    def _observe(self, combination, response):
        self.current.record_result(combination, response)

    def recommended(self):
        for s in [self.current] + self.finished_stages[::-1]:
            best = s.recommended()
            if best is not None:
                return best
        return None
