"""Analysis of a results store: SNR table, effects, regression, optimum,
control-by-noise tables and a run log, written as text plus tab-separated
plot series (x, series, y)."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from tactkit.errors import StatsError, TactError
from tactkit.experiment import NOISE, format_level
from tactkit.stats import (
    ControlNoiseTable,
    OptimumResult,
    RegressionModel,
    Term,
    backward_eliminate,
    control_by_noise,
    fit_regression,
    interaction_table,
    main_effects,
    predict_optimum,
    snr_larger_better,
)
from tactkit.stats.regression import LINEAR


@dataclass(frozen=True)
class AnalysisSettings:
    interactions: Tuple[Tuple[str, str], ...] = ()
    scaling: Tuple[Tuple[str, float], ...] = ()
    significance: float = 0.05
    first: int = 0                  # first sequence number analysed
    last: Optional[int] = None      # last sequence number analysed (inclusive)


@dataclass
class SnrRow:
    levels: Dict[str, object]
    responses: List[float]
    mean: float
    snr: Optional[float]


@dataclass
class ReportBundle:
    factors: Tuple[str, ...]
    rows: List[SnrRow]
    basis: str                                  # "snr" or "mean"
    flags: List[str] = field(default_factory=list)
    main_effects: Dict[str, dict] = field(default_factory=dict)
    interactions: Dict[Tuple[str, str], dict] = field(default_factory=dict)
    full_model: Optional[RegressionModel] = None
    model: Optional[RegressionModel] = None
    eliminated: List[Term] = field(default_factory=list)
    optimum: Optional[OptimumResult] = None
    control_noise: List[ControlNoiseTable] = field(default_factory=list)
    trials: int = 0
    failures: Dict[str, int] = field(default_factory=dict)


def _num(x) -> str:
    return repr(float(x))


def _short(x) -> str:
    return "NA" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6g}"


def _model_terms(names, level_counts, interactions):
    terms = [Term.intercept()] + [Term.linear(n) for n in names]
    terms += [Term.quadratic(n) for n in names if level_counts[n] >= 3]
    terms += [Term.interaction(f, g) for f, g in interactions]
    return terms


def generate_report(store, settings: AnalysisSettings = AnalysisSettings()) -> ReportBundle:
    desc = store.description
    records = [r for r in store.records
               if r.sequence_number >= settings.first
               and (settings.last is None or r.sequence_number <= settings.last)]
    if not records:
        raise TactError("the store holds no trials in the requested range")
    control = [f for f in desc.factors if f.role != NOISE]
    noise = [f for f in desc.factors if f.role == NOISE]

    by_config: Dict[tuple, List[float]] = {}
    for r in records:
        ys = by_config.setdefault(r.combination.configuration, [])
        if r.response is not None:
            ys.append(r.response)

    flags = []
    rows = []
    snr_ok = True
    def row_order(key):
        levels = dict(key)
        return tuple((isinstance(levels[f.name], str), levels[f.name]) for f in control)

    for key in sorted(by_config, key=row_order):
        ys = by_config[key]
        snr = None
        if len(ys) >= 2 and all(y > 0 for y in ys):
            snr = snr_larger_better(ys)
        else:
            snr_ok = False
        mean = math.fsum(ys) / len(ys) if ys else math.nan
        rows.append(SnrRow(dict(key), list(ys), mean, snr))
    if not snr_ok:
        flags.append("SNR unavailable for some combinations (fewer than two positive responses); "
                     "effects use mean responses")
    basis = "snr" if snr_ok else "mean"
    data = [(row.levels, row.snr if snr_ok else row.mean) for row in rows if not math.isnan(row.mean)]

    failures = Counter(r.result.stage for r in records if not r.result.ok)
    bundle = ReportBundle(tuple(f.name for f in desc.factors), rows, basis, flags,
                          trials=len(records), failures=dict(sorted(failures.items())))

    varied = [f for f in control if len({row.levels[f.name] for row in rows}) > 1]
    varied_names = {f.name for f in varied}
    for f, g in settings.interactions:
        for n in (f, g):
            if n not in varied_names:
                raise StatsError(f"interaction {f}*{g}: {n} is not a varied factor in this store")

    if len(data) > 1:
        for f in varied:
            bundle.main_effects[f.name] = main_effects(data, f.name)
        for f, g in settings.interactions:
            bundle.interactions[(f, g)] = interaction_table(data, f, g)
        _regression(bundle, data, varied, settings)

    raw = [(r.combination.levels(), r.response) for r in records if r.response is not None]
    for n in noise:
        if len({lv[n.name] for lv, _ in raw}) < 2:
            continue
        for c in varied:
            bundle.control_noise.append(control_by_noise(raw, c.name, n.name))
    return bundle


def _regression(bundle, data, varied, settings):
    numeric = [f for f in varied if f.numeric]
    if not numeric:
        return
    names = [f.name for f in numeric]
    counts = {n: len({lv[n] for lv, _ in data}) for n in names}
    inter = [(f, g) for f, g in settings.interactions if f in names and g in names]
    terms = _model_terms(names, counts, inter)
    scaling = dict(settings.scaling)
    while True:
        try:
            bundle.full_model = fit_regression(data, terms, scaling)
            break
        except StatsError as e:
            droppable = [t for t in terms if t.kind not in ("intercept", LINEAR)]
            if not droppable:
                bundle.flags.append(f"no regression: {e}")
                return
            bundle.flags.append(f"term {droppable[-1].name} dropped: {e}")
            terms.remove(droppable[-1])
    bundle.model = backward_eliminate(data, terms, settings.significance, scaling, trace=bundle.eliminated)
    region = {n: (min(lv[n] for lv, _ in data), max(lv[n] for lv, _ in data)) for n in names}
    bundle.optimum = predict_optimum(bundle.model, {f.name: f for f in numeric}, region)


# ------------------------------------------------------------------ output

def _table(header, rows) -> List[str]:
    return ["\t".join(header)] + ["\t".join(r) for r in rows]


def render_text(bundle: ReportBundle) -> str:
    out = [f"Trials analysed: {bundle.trials}"]
    total_fail = sum(bundle.failures.values())
    out.append(f"Failures: {total_fail}" + "".join(f"\n  {k}\t{v}" for k, v in bundle.failures.items()))
    for flag in bundle.flags:
        out.append(f"NOTE: {flag}")

    control = [n for n in bundle.factors if bundle.rows and n in bundle.rows[0].levels]
    out.append("")
    out.append("Responses per combination")
    out += _table(control + ["n", "mean", "SNR", "replicates"],
                  [[format_level(r.levels[n]) for n in control]
                   + [str(len(r.responses)), _short(r.mean), _short(r.snr),
                      ",".join(_short(y) for y in r.responses)] for r in bundle.rows])

    if bundle.main_effects:
        out.append("")
        out.append(f"Main effects ({bundle.basis})")
        for f, eff in bundle.main_effects.items():
            cells = "\t".join(f"{format_level(k)}={_short(v)}" for k, v in eff.items())
            spread = max(eff.values()) - min(eff.values())
            out.append(f"{f}\t{cells}\trange={_short(spread)}")
    for (f, g), cells in bundle.interactions.items():
        out.append("")
        out.append(f"Interaction {f}*{g} ({bundle.basis})")
        out += _table([f, g, "mean"], [[format_level(a), format_level(b), _short(v)]
                                       for (a, b), v in cells.items()])

    for label, model in (("Full model", bundle.full_model), ("Reduced model", bundle.model)):
        if model is None:
            continue
        out.append("")
        out.append(f"{label} (R^2 {_short(model.r_squared)}, residual df {model.df_resid})")
        out += _table(["term", "coef", "se", "t", "p"],
                      [[t] + [_short(v) for v in rest] for t, *rest in model.summary_rows()])
    if bundle.eliminated:
        out.append("Eliminated in order: " + ", ".join(t.name for t in bundle.eliminated))
    if bundle.optimum is not None:
        out.append("")
        out.append(f"Predicted optimum ({bundle.basis} {_short(bundle.optimum.predicted)})")
        for k in sorted(bundle.optimum.levels):
            out.append(f"{k}\t{format_level(bundle.optimum.levels[k])}")

    for t in bundle.control_noise:
        out.append("")
        out.append(f"Control {t.control} by noise {t.noise} (least sensitive first)")
        out += _table([t.control] + [format_level(n) for n in t.noise_levels] + ["spread"],
                      [[format_level(c)] + [_short(t.means[c].get(n)) for n in t.noise_levels]
                       + [_short(t.flatness[c])] for c in t.ordering])
    return "\n".join(out) + "\n"


def series_files(bundle: ReportBundle) -> Dict[str, str]:
    """Plot data: one tab-separated file per figure with columns x, series, y."""
    files = {}
    header = "x\tseries\ty"
    if bundle.main_effects:
        lines = [header]
        for f, eff in bundle.main_effects.items():
            lines += [f"{format_level(k)}\t{f}\t{_num(v)}" for k, v in eff.items()]
        files["main_effects.tsv"] = "\n".join(lines) + "\n"
    for (f, g), cells in bundle.interactions.items():
        lines = [header] + [f"{format_level(a)}\t{g}={format_level(b)}\t{_num(v)}"
                            for (a, b), v in sorted(cells.items(), key=lambda kv: (str(kv[0][1]), kv[0]))]
        files[f"interaction_{f}_{g}.tsv"] = "\n".join(lines) + "\n"
    for t in bundle.control_noise:
        lines = [header]
        for c in t.ordering:
            lines += [f"{format_level(n)}\t{t.control}={format_level(c)}\t{_num(t.means[c][n])}"
                      for n in t.noise_levels if n in t.means[c]]
        files[f"control_noise_{t.control}_{t.noise}.tsv"] = "\n".join(lines) + "\n"
    control = [n for n in bundle.factors if bundle.rows and n in bundle.rows[0].levels]
    snr = ["\t".join(control + ["n", "mean", "snr"])]
    for r in bundle.rows:
        snr.append("\t".join([format_level(r.levels[n]) for n in control]
                             + [str(len(r.responses)), "NA" if math.isnan(r.mean) else _num(r.mean),
                                "NA" if r.snr is None else _num(r.snr)]))
    files["snr.tsv"] = "\n".join(snr) + "\n"
    if bundle.full_model is not None:
        lines = ["model\tterm\tcoef\tse\tt\tp"]
        for label, model in (("full", bundle.full_model), ("reduced", bundle.model)):
            lines += [f"{label}\t{t}\t" + "\t".join(_num(v) for v in rest) for t, *rest in model.summary_rows()]
        files["regression.tsv"] = "\n".join(lines) + "\n"
    return files


def write_report(bundle: ReportBundle, directory) -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    contents = {"report.txt": render_text(bundle), **series_files(bundle)}
    for name, text in sorted(contents.items()):
        path = directory / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
