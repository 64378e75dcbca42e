import math

import pytest

from support import (
    DIRECTORY_FACTORS,
    PHASE1_INTERACTIONS,
    PHASE1_SCALING,
    description,
    phase1_data,
    recorded_store,
)
from tactkit.errors import StatsError, TactError
from tactkit.experiment import NOISE, Combination, Enumeration, Factor, Range
from tactkit.harness import RUN, TrialResult
from tactkit.report import AnalysisSettings, generate_report, render_text, series_files, write_report
from tactkit.stats import snr_larger_better
from tactkit.store import ResultsStore, TrialRecord

SETTINGS = AnalysisSettings(tuple(PHASE1_INTERACTIONS), tuple(PHASE1_SCALING.items()))


@pytest.fixture(scope="module")
def recorded(tmp_path_factory):
    return recorded_store(tmp_path_factory.mktemp("recorded"))


@pytest.fixture(scope="module")
def bundle(recorded):
    return generate_report(recorded, SETTINGS)


def test_snr_column_matches_recomputation(bundle):
    assert bundle.basis == "snr" and not bundle.flags
    assert len(bundle.rows) == 27
    for row in bundle.rows:
        assert row.snr == pytest.approx(snr_larger_better(row.responses), abs=1e-12)


def test_main_effects_are_group_means_of_snr(bundle):
    for f in ("TNE", "MaxLDAP", "LDAPnum", "DispNum"):
        for level, mean in bundle.main_effects[f].items():
            group = [r.snr for r in bundle.rows if r.levels[f] == level]
            assert len(group) == 9
            assert mean == pytest.approx(math.fsum(group) / 9, abs=1e-12)


def test_regression_matches_direct_analysis(bundle):
    expected = {lv_key(lv): y for lv, y in phase1_data()}
    assert {lv_key(r.levels): r.snr for r in bundle.rows} == pytest.approx(expected)
    assert [t.name for t in bundle.eliminated] == ["TNE*MaxLDAP", "MaxLDAP^2", "LDAPnum^2", "LDAPnum"]
    opt = bundle.optimum.levels
    assert (opt["MaxLDAP"], opt["LDAPnum"], opt["DispNum"]) == (100, 1, 5)
    assert abs(opt["TNE"] - 32930) <= 300


def lv_key(levels):
    return tuple(sorted(levels.items()))


def test_text_report_sections(bundle):
    text = render_text(bundle)
    for heading in ("Trials analysed: 108", "Main effects (snr)", "Interaction TNE*MaxLDAP",
                    "Full model", "Reduced model", "Eliminated in order", "Predicted optimum"):
        assert heading in text


def test_series_files_are_three_column(bundle):
    files = series_files(bundle)
    assert {"main_effects.tsv", "snr.tsv", "regression.tsv", "interaction_TNE_MaxLDAP.tsv"} <= set(files)
    for name, text in files.items():
        if name in ("snr.tsv", "regression.tsv"):
            continue
        lines = text.splitlines()
        assert lines[0] == "x\tseries\ty"
        assert all(len(line.split("\t")) == 3 for line in lines[1:])


def test_write_report_is_deterministic(bundle, recorded, tmp_path):
    first = {p.name: p.read_bytes() for p in write_report(bundle, tmp_path / "a")}
    again = generate_report(recorded, SETTINGS)
    second = {p.name: p.read_bytes() for p in write_report(again, tmp_path / "b")}
    assert first == second


def test_trial_window(recorded):
    b = generate_report(recorded, AnalysisSettings(first=0, last=3))
    window = {r.combination.configuration for r in recorded.records[:4]}
    assert b.trials == 4 and len(b.rows) == len(window)
    with pytest.raises(TactError):
        generate_report(recorded, AnalysisSettings(first=500))


def test_interaction_on_unvaried_factor_is_named(recorded):
    with pytest.raises(StatsError, match="Bogus"):
        generate_report(recorded, AnalysisSettings(interactions=(("TNE", "Bogus"),)))


CACHE = Factor("CacheSize", Range("int", 0, 1000, 100))
LOAD = Factor("Load", Enumeration("int", (1, 2)), role=NOISE)


def small_store(tmp_path, entries):
    store = ResultsStore.create(tmp_path, description([CACHE, LOAD]))
    for i, (cache, load, y) in enumerate(entries):
        result = TrialResult.success([("y", y)]) if y is not None else TrialResult.failure(RUN, "exit 1")
        store.record(TrialRecord(i, Combination.of({"CacheSize": cache}, {"Load": load}), result, y, 0.0))
    return store


def test_single_combination_has_no_effects(tmp_path):
    b = generate_report(small_store(tmp_path, [(100, 1, 2.0), (100, 1, 2.5)]))
    assert len(b.rows) == 1 and b.main_effects == {} and b.model is None
    assert "Main effects" not in render_text(b)


def test_single_replicate_falls_back_to_means(tmp_path):
    b = generate_report(small_store(tmp_path, [(100, 1, 2.0), (200, 1, 3.0), (300, 1, 3.5)]))
    assert b.basis == "mean" and b.flags
    assert b.main_effects["CacheSize"] == {100: 2.0, 200: 3.0, 300: 3.5}


def test_failures_counted_by_stage(tmp_path):
    b = generate_report(small_store(tmp_path, [(100, 1, 2.0), (100, 1, None), (200, 1, 3.0)]))
    assert b.failures == {RUN: 1} and b.trials == 3
    assert "Failures: 1" in render_text(b)


def test_control_by_noise_uses_raw_responses(tmp_path):
    entries = [(100, 1, 2.0), (100, 2, 4.0), (200, 1, 3.0), (200, 2, 3.2)]
    b = generate_report(small_store(tmp_path, entries))
    (table,) = b.control_noise
    assert table.control == "CacheSize" and table.noise == "Load"
    assert table.ordering[0] == 200
    assert "control_noise_CacheSize_Load.tsv" in series_files(b)


def test_directory_factors_declared_order(bundle):
    assert bundle.factors == tuple(f.name for f in DIRECTORY_FACTORS)
