"""Main experiment loop: ask the strategy, validate, adapt what changed, run
with recovery, aggregate the response and record every outcome."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional, Tuple

from tactkit.errors import StrategyError
from tactkit.experiment import AggregationSpec, Combination, ExperimentDescription
from tactkit.harness import PROTOCOL, VALIDATE, Recovery, TargetFailure, TrialResult
from tactkit.store import ResultsStore, TrialRecord

log = logging.getLogger(__name__)

INVALID_CONFIGURATION = "Invalid configuration"


@dataclass(frozen=True)
class RunSummary:
    trials: int
    failures: int
    elapsed: float
    stopped_by: str          # "finished", "budget" or "limit"


def aggregate_response(result: TrialResult, agg: AggregationSpec) -> Tuple[Optional[float], TrialResult]:
    """Scalar response for a successful trial. A missing metric or a
    non-finite response turns the result into a protocol failure."""
    if not result.ok:
        return None, result
    values = result.values
    missing = [m for m, _ in agg.weights if m not in values]
    if missing:
        return None, TrialResult.failure(PROTOCOL, "missing metric " + ", ".join(missing), result.wall_time)
    y = math.fsum(w * values[m] for m, w in agg.weights)
    if agg.normaliser is not None:
        y /= agg.normaliser
    if not math.isfinite(y):
        return None, TrialResult.failure(PROTOCOL, "non-finite response", result.wall_time)
    return y, result


class Coordinator:
    def __init__(self, description: ExperimentDescription, strategy, target, store: ResultsStore,
                 clock: Callable[[], float] = time.time):
        self.description = description
        self.strategy = strategy
        self.target = target
        self.store = store
        self.clock = clock
        # last level successfully applied per factor; absent means unknown
        self.applied: Dict[str, object] = {}

    def change_combination(self, nxt: Combination) -> None:
        """Apply condition factors first, then configuration factors, each
        only when its level differs from the one last applied."""
        desc = self.description
        for group in (desc.noise_factors, desc.control_factors):
            for f in group:
                level = nxt[f.name]
                if f.name in self.applied and self.applied[f.name] == level:
                    continue
                self.applied.pop(f.name, None)
                self.target.apply_level(f, level)
                self.applied[f.name] = level

    def execute_with_recovery(self, comb: Combination) -> Tuple[TrialResult, int, str]:
        """Run until success or until recovery says abandon. Returns the
        result, the number of runs and a note."""
        recovers = 0
        runs = 0
        while True:
            result = self.target.run_trial(self.description.trial_timeout)
            runs += 1
            if result.ok:
                note = f"succeeded after {runs - 1} failed run(s)" if runs > 1 else ""
                return result, runs, note
            decision, why = self.target.recover(comb, recovers, self.description.max_recovers)
            if decision is Recovery.ABANDON:
                if why:
                    result = replace(result, detail=f"{result.detail}; {why}")
                return result, runs, f"abandoned after {runs} failed run(s)"
            recovers += 1

    def _trial(self, comb: Combination) -> Tuple[TrialResult, int, str]:
        try:
            valid = self.target.validate_configuration(comb.config)
        except TargetFailure as e:
            return e.result, 0, ""
        if not valid:
            return TrialResult.failure(VALIDATE, INVALID_CONFIGURATION), 0, ""
        try:
            self.change_combination(comb)
        except TargetFailure as e:
            decision, why = self.target.recover(comb, 0, self.description.max_recovers)
            result = e.result if not why else replace(e.result, detail=f"{e.result.detail}; {why}")
            return result, 0, ""
        return self.execute_with_recovery(comb)

    def run(self, max_trials: Optional[int] = None) -> RunSummary:
        desc = self.description
        start = self.store.started
        failures = sum(1 for r in self.store.records if not r.result.ok)
        issued = 0
        stopped = "finished"
        while not self.strategy.is_finished():
            if self.clock() - start >= desc.time_budget:
                stopped = "budget"
                break
            if max_trials is not None and issued >= max_trials:
                stopped = "limit"
                break
            comb = self.strategy.next_combination()
            if comb is None:
                break
            result, runs, note = self._trial(comb)
            response, result = aggregate_response(result, desc.aggregation)
            if not result.ok:
                failures += 1
            rec = TrialRecord(len(self.store.records), comb, result, response, self.clock(), runs, note)
            self.store.record(rec)
            self.strategy.record_result(comb, response)
            issued += 1
        return RunSummary(len(self.store.records), failures, self.clock() - start, stopped)


def run_experiment(description, strategy, target, store, clock=time.time, max_trials=None) -> RunSummary:
    return Coordinator(description, strategy, target, store, clock).run(max_trials)


def replay_into(strategy, records) -> None:
    """Feed stored records back into a fresh strategy built with the same
    settings and seed, checking it proposes the same combinations."""
    for rec in records:
        comb = strategy.next_combination()
        if comb != rec.combination:
            raise StrategyError(f"stored trial {rec.sequence_number} does not match the strategy's replay")
        strategy.record_result(comb, rec.response)


def resume_experiment(directory, strategy_factory, target, clock=time.time, max_trials=None):
    """Reload a store, replay it into a new strategy and continue the run.
    Returns ``(store, strategy, summary)``."""
    store, _ = ResultsStore.resume_from(directory)
    strategy = strategy_factory(store.description)
    replay_into(strategy, store.records)
    if hasattr(target, "skip_draws"):
        target.skip_draws(sum(r.attempts for r in store.records))
    summary = Coordinator(store.description, strategy, target, store, clock).run(max_trials)
    return store, strategy, summary
