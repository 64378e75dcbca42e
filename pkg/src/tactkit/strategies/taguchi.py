"""Two-phase Taguchi search.

Phase 1 runs a replicated orthogonal-array design over three (or two) levels
per control factor, fits a quadratic model of the per-row SNR, eliminates
insignificant terms and predicts the best combination in the tested region.
Phase 2 runs a central composite design around that prediction, fits a
coded-unit quadratic and predicts the final optimum.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from tactkit.designs import (
    CentralCompositeSpec,
    DesignMatrix,
    VariedFactor,
    allocate_factors,
    build_design_matrix,
    catalog_lookup,
    central_composite,
    randomized_run_order,
)
from tactkit.errors import DesignError, StatsError, StrategyError
from tactkit.experiment import NOISE, Enumeration, Factor, Range, enumerate_levels, level_in_domain, round_to_granule
from tactkit.stats.regression import (
    LINEAR,
    Coding,
    OptimumResult,
    RegressionModel,
    Term,
    backward_eliminate,
    fit_regression,
    predict_optimum,
    quadratic_terms,
)
from tactkit.stats.snr import snr_larger_better
from tactkit.strategies.base import Strategy, make_combination

log = logging.getLogger(__name__)


@dataclass
class PhaseReport:
    """Everything a phase produced, kept for reporting."""
    design: DesignMatrix
    array: str = ""
    allocation: Dict[str, int] = field(default_factory=dict)
    responses: Dict[int, List[float]] = field(default_factory=dict)
    snr: Dict[int, float] = field(default_factory=dict)
    full_model: Optional[RegressionModel] = None
    model: Optional[RegressionModel] = None
    optimum: Optional[OptimumResult] = None
    eliminated: List[Term] = field(default_factory=list)
    pinned: Dict[str, object] = field(default_factory=dict)


def default_levels(factor: Factor, count: int) -> list:
    """Lower, middle and upper sample levels (or lower and upper for two)."""
    levels = enumerate_levels(factor)
    if count == 2 or len(levels) < 3:
        return [levels[0], levels[-1]]
    if isinstance(factor.domain, Enumeration):
        return [levels[0], levels[len(levels) // 2], levels[-1]]
    mid = (levels[0] + levels[-1]) / 2
    inner = min(levels[1:-1], key=lambda v: (abs(v - mid), v))
    return [levels[0], inner, levels[-1]]


class TaguchiStrategy(Strategy):
    name = "taguchi"

    def __init__(self, factors: Sequence[Factor], replications: int = 4,
                 interactions: Sequence[Tuple[str, str]] = (), scaling: Optional[Mapping] = None,
                 levels: Optional[Mapping[str, Sequence]] = None, significance: float = 0.05,
                 steps: Optional[Mapping[str, float]] = None, alpha_star: Optional[float] = None,
                 n_center: int = 6, stop_after_phase1: bool = False, oa_levels: Optional[int] = None,
                 seed: int = 0, budget: Optional[int] = None):
        super().__init__(factors, budget, seed)
        if replications < 2:
            raise StrategyError("SNR analysis needs at least two replications")
        self.replications = replications
        self.interactions = [tuple(p) for p in interactions]
        self.scaling = dict(scaling or {})
        self.significance = significance
        self.steps = dict(steps or {})
        self.alpha_star = alpha_star
        self.n_center = n_center
        self.stop_after_phase1 = stop_after_phase1

        self.control = [f for f in self.factors if f.role != NOISE]
        if not self.control:
            raise StrategyError("Taguchi search needs at least one control factor")
        for f in self.control:
            if isinstance(f.domain, Enumeration) and f.domain.kind == "string":
                raise StrategyError(f"{f.name}: text levels cannot be modelled")
        self.domains = {f.name: f for f in self.control}
        levels = dict(levels or {})
        count = oa_levels or (3 if all(len(levels.get(f.name, enumerate_levels(f))) >= 3
                                       for f in self.control) else 2)
        self.level_maps = {}
        for f in self.control:
            lv = list(levels[f.name]) if f.name in levels else default_levels(f, count)
            if len(lv) != count:
                raise StrategyError(f"{f.name}: needs exactly {count} phase-1 levels")
            for v in lv:
                if not level_in_domain(f, v):
                    raise StrategyError(f"{f.name}: phase-1 level {v!r} outside the domain")
            self.level_maps[f.name] = {i + 1: v for i, v in enumerate(lv)}
        self.pinned_noise = {f.name: (list(levels[f.name]) if f.name in levels else enumerate_levels(f))[0]
                             for f in self.factors if f.role == NOISE}

        self.phase1 = self._phase1_design(count)
        self.phase2: Optional[PhaseReport] = None
        self.final: Optional[OptimumResult] = None
        self.phase = 1
        self._plan = randomized_run_order(self.phase1.design, replications, seed)
        self._cursor = 0
        self._waiting = None

    # -- phase 1 -----------------------------------------------------------
    def _phase1_design(self, count) -> PhaseReport:
        names = [f.name for f in self.control]
        width = 1 if count == 2 else 2
        needed = len(names) + width * len(self.interactions)
        # leave at least one residual degree of freedom for the t-tests
        min_rows = len(self._phase1_terms(count))
        while True:
            oa = catalog_lookup(count, needed, bool(self.interactions), min_rows)
            try:
                alloc = allocate_factors(oa, names, self.interactions)
                break
            except DesignError:
                min_rows = oa.rows
        design = build_design_matrix(oa, alloc, self.level_maps)
        return PhaseReport(design, oa.name, dict(alloc.factors))

    def _phase1_terms(self, count):
        names = [f.name for f in self.control]
        terms = [Term.intercept()] + [Term.linear(n) for n in names]
        if count == 3:
            terms += [Term.quadratic(n) for n in names]
        terms += [Term.interaction(f, g) for f, g in self.interactions]
        return terms

    # -- contract hooks ----------------------------------------------------
    def _propose(self):
        if self._cursor >= len(self._plan):
            return None
        trial = self._plan[self._cursor]
        self._cursor += 1
        self._waiting = trial.row
        levels = dict(trial.levels)
        report = self.phase1 if self.phase == 1 else self.phase2
        for k, v in {**self.pinned_noise, **report.pinned}.items():
            levels.setdefault(k, v)
        return levels

    def _observe(self, combination, response):
        report = self.phase1 if self.phase == 1 else self.phase2
        row, self._waiting = self._waiting, None
        if response is not None:
            report.responses.setdefault(row, []).append(response)
        if self._cursor < len(self._plan):
            return
        if self.phase == 1:
            self._analyse_phase1()
            if self.stop_after_phase1 or not self._start_phase2():
                self.final = self.phase1.optimum
                self._plan = []
        else:
            self._analyse_phase2()
            self._plan = []

    def recommended(self):
        best = self.final or self.phase1.optimum
        if best is None:
            return None
        levels = dict(best.levels)
        levels.update(self.pinned_noise)
        if self.phase2 is not None:
            for k, v in self.phase2.pinned.items():
                levels.setdefault(k, v)
        return make_combination(self.factors, levels)

    # -- analysis ----------------------------------------------------------
    def _row_data(self, report: PhaseReport):
        data = []
        for row in range(len(report.design.rows)):
            ys = report.responses.get(row)
            if not ys:
                continue
            try:
                report.snr[row] = snr_larger_better(ys)
            except StatsError as e:
                raise StrategyError(f"row {row + 1}: {e}; normalise responses to be positive") from None
            levels = report.design.row_levels(row)
            data.append(({k: levels[k] for k in levels if k in self.domains}, report.snr[row]))
        return data

    def _fit(self, data, terms, scaling, report):
        """Full fit plus elimination, dropping higher-order terms when the
        design cannot support them all."""
        terms = list(terms)
        while True:
            try:
                report.full_model = fit_regression(data, terms, scaling)
                break
            except StatsError as e:
                droppable = [t for t in terms if t.kind not in ("intercept", LINEAR)]
                if not droppable:
                    raise StrategyError(f"phase analysis failed: {e}") from None
                log.warning("dropping %s: %s", droppable[-1].name, e)
                terms.remove(droppable[-1])
        report.model = backward_eliminate(data, terms, self.significance, scaling,
                                          trace=report.eliminated)

    def _analyse_phase1(self):
        rep = self.phase1
        data = self._row_data(rep)
        count = len(next(iter(self.level_maps.values())))
        self._fit(data, self._phase1_terms(count), self.scaling, rep)
        region = {n: (min(m.values()), max(m.values())) for n, m in self.level_maps.items()}
        rep.optimum = predict_optimum(rep.model, self.domains, region)

    def _phase2_step(self, f: Factor, centre, span, alpha):
        d = f.domain
        sg = d.sample_granularity
        step = self.steps.get(f.name)
        if step is None:
            step = max(sg, round(span / 6 / sg) * sg)

        def fits(s):
            lo = round_to_granule(f, centre - alpha * s)
            hi = round_to_granule(f, centre + alpha * s)
            return level_in_domain(f, lo) and level_in_domain(f, hi)

        if f.name in self.steps:
            return step if fits(step) else None
        while step > sg and not fits(step):
            step -= sg
        return step if fits(step) else None

    def _start_phase2(self) -> bool:
        rep1 = self.phase1
        centre = rep1.optimum.levels
        candidates = [f for f in self.control
                      if f.name in rep1.model.factors and isinstance(f.domain, Range)]
        varied = {}
        k = len(candidates)
        while True:
            alpha = self.alpha_star or (2 ** k) ** 0.25
            varied = {}
            for f in candidates:
                lv = list(self.level_maps[f.name].values())
                step = self._phase2_step(f, centre[f.name], max(lv) - min(lv), alpha)
                if step is not None:
                    varied[f.name] = (f, step)
            if self.alpha_star or len(varied) == k:
                break
            k = len(varied)
            if k == 0:
                break
        if not varied:
            return False
        pinned = {f.name: centre[f.name] for f in self.control if f.name not in varied}
        spec = CentralCompositeSpec(
            tuple(VariedFactor(f, centre[n], s) for n, (f, s) in varied.items()),
            self.alpha_star, tuple(pinned.items()), self.n_center)
        design = central_composite(spec)
        self.phase2 = PhaseReport(design, "CCD", pinned=pinned)
        self._codings = {n: Coding(s, centre[n]) for n, (f, s) in varied.items()}
        self.phase = 2
        self._plan = randomized_run_order(design, self.replications, self.seed + 1)
        self._cursor = 0
        return True

    def _analyse_phase2(self):
        rep = self.phase2
        names = list(self._codings)
        data = [({n: lv[n] for n in names}, y) for lv, y in self._row_data(rep)]
        self._fit(data, quadratic_terms(names), self._codings, rep)
        region = {}
        for n in names:
            col = [r[rep.design.factors.index(n)] for r in rep.design.rows]
            region[n] = (min(col), max(col))
        used = {n: region[n] for n in rep.model.factors}
        opt = predict_optimum(rep.model, self.domains, used) if used else None
        levels = dict(rep.pinned)
        for n in names:
            levels[n] = opt.levels[n] if opt and n in opt.levels else self._codings[n].offset
        predicted = opt.predicted if opt else rep.model.coefficients[0]
        rep.optimum = OptimumResult(levels, predicted, opt.continuous if opt else {})
        self.final = rep.optimum
