"""Search-strategy contract shared by every strategy."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import List, Mapping, Optional, Sequence, Tuple

from tactkit.errors import StrategyError
from tactkit.experiment import NOISE, Combination, Factor, enumerate_levels, level_in_domain


def make_combination(factors: Sequence[Factor], levels: Mapping) -> Combination:
    config = {f.name: levels[f.name] for f in factors if f.role != NOISE}
    cond = {f.name: levels[f.name] for f in factors if f.role == NOISE}
    return Combination.of(config, cond)


class Strategy:
    """Base class. Subclasses implement ``_propose`` (return the next levels
    mapping or None when done) and may override ``_observe``.

    ``budget`` caps the number of issued combinations, errors included.
    """

    name = "strategy"

    def __init__(self, factors: Sequence[Factor], budget: Optional[int] = None, seed: int = 0):
        if budget is not None and budget < 0:
            raise StrategyError("budget must be non-negative")
        self.factors = tuple(factors)
        self.budget = budget
        self.seed = seed
        self.history: List[Tuple[Combination, Optional[float]]] = []
        self._pending: Optional[Combination] = None
        self._exhausted = False
        self._lookahead = None

    # -- contract ---------------------------------------------------------
    def next_combination(self) -> Optional[Combination]:
        if self._pending is not None:
            raise StrategyError("record_result must be called before the next combination")
        if self.is_finished():
            return None
        levels = self._take()
        if levels is None:
            return None
        self._pending = make_combination(self.factors, levels)
        return self._pending

    def record_result(self, combination: Combination, response: Optional[float]) -> None:
        if self._pending is None or combination != self._pending:
            raise StrategyError("result recorded for a combination that was not issued")
        self._pending = None
        self.history.append((combination, response))
        self._observe(combination, response)

    def is_finished(self) -> bool:
        if self._pending is not None:
            return False
        if self.budget is not None and len(self.history) >= self.budget:
            return True
        if self._exhausted:
            return True
        if self._lookahead is None:
            self._lookahead = self._propose()
            if self._lookahead is None:
                self._exhausted = True
        return self._exhausted

    def recommended(self) -> Optional[Combination]:
        """Combination with the best mean response so far."""
        sums = defaultdict(list)
        for c, y in self.history:
            if y is not None:
                sums[c].append(y)
        if not sums:
            return None
        return max(sums, key=lambda c: math.fsum(sums[c]) / len(sums[c]))

    # -- hooks ------------------------------------------------------------
    def _take(self):
        if self._lookahead is not None:
            levels, self._lookahead = self._lookahead, None
            return levels
        levels = self._propose()
        if levels is None:
            self._exhausted = True
        return levels

    def _propose(self):
        raise NotImplementedError

    def _observe(self, combination: Combination, response: Optional[float]) -> None:
        pass


class LevelGrid:
    """Index space over each factor's sample levels."""

    def __init__(self, factors: Sequence[Factor]):
        self.factors = tuple(factors)
        self.levels = [enumerate_levels(f) for f in factors]

    def to_levels(self, idx) -> dict:
        return {f.name: self.levels[k][i] for k, (f, i) in enumerate(zip(self.factors, idx))}

    def index_of(self, levels: Mapping) -> tuple:
        out = []
        for k, f in enumerate(self.factors):
            v = levels[f.name]
            if not level_in_domain(f, v):
                raise StrategyError(f"start level {v!r} for {f.name} is outside its domain")
            lv = self.levels[k]
            if v in lv:
                out.append(lv.index(v))
            elif isinstance(v, str):
                raise StrategyError(f"start level {v!r} for {f.name} is not a sample level")
            else:
                out.append(min(range(len(lv)), key=lambda i: (abs(lv[i] - v), i)))
        return tuple(out)

    def clamp(self, k, i) -> int:
        return min(max(i, 0), len(self.levels[k]) - 1)
