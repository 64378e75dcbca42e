import math
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from tactkit.errors import DescriptionError
from tactkit.experiment import (
    CONTROL,
    NOISE,
    AggregationSpec,
    Combination,
    Enumeration,
    Factor,
    Range,
    enumerate_levels,
    level_in_domain,
    parse_experiment_description,
    round_to_granule,
    serialize_experiment_description,
    snap_to_domain,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def mail_doc():
    return (FIXTURES / "mailserver.xml").read_text()


@pytest.fixture
def mail(mail_doc):
    return parse_experiment_description(mail_doc)


def test_parse_mailserver_factors(mail):
    cache, full, pop = mail.factors
    assert cache.name == "CacheSize" and cache.role == CONTROL
    assert cache.domain == Enumeration("int", (50, 100, 500, 1000))
    assert cache.time_to_adapt == 20
    assert full.domain == Range("int", 70, 100, 5, 10)
    assert pop.name == "POP3_user_instances" and pop.role == NOISE
    assert pop.domain == Range("int", 5, 600, 1, 5)
    assert pop.adaptation_command[-1] == "{level}"


def test_parse_mailserver_misc(mail):
    assert mail.metrics == ("Rcpt", "Fetch", "Apps", "ASize", "FSize", "Fail", "FInt", "WIs")
    assert mail.trial_timeout == 45 * 60
    assert mail.time_budget == 100 * 3600
    assert mail.max_recovers == 1
    assert mail.strategy == "grid"
    assert mail.hosts == ("machine30", "machine32", "machine33", "machine34")
    assert mail.aggregation == AggregationSpec.single("Rcpt")
    assert mail.validate_command == ("./mailserver-ctl", "validate")


def test_defaults_applied(mail_doc):
    doc = (mail_doc.replace("<sampleGranular>10</sampleGranular>", "")
           .replace("<maxRecovers>1</maxRecovers>", ""))
    doc = doc[:doc.index("<validationCommand>")] + doc[doc.index("</functions>"):]
    desc = parse_experiment_description(doc)
    assert desc.factor("FullThreshold").domain.sample_granularity == 5
    assert desc.validate_command is None
    assert desc.max_recovers == 1


def test_inverted_range_is_rejected(mail_doc):
    doc = mail_doc.replace("<start>70</start>", "<start>100</start>").replace(
        "<end>100</end>", "<end>70</end>", 1)
    with pytest.raises(DescriptionError) as err:
        parse_experiment_description(doc)
    assert "FullThreshold" in err.value.path
    assert "100 > upper 70" in err.value.message


@pytest.mark.parametrize("mutate, fragment", [
    (lambda d: d.replace("<maxRecovers>", "<maxRecoverz>").replace("</maxRecovers>", "</maxRecoverz>"),
     "maxRecoverz"),
    (lambda d: d.replace("<level>500</level>", "<level>five hundred</level>"), "CacheSize"),
    (lambda d: d.replace("<timeout UNITS=\"mins\">45</timeout>", "<timeout>0</timeout>"), "timeout"),
    (lambda d: d.replace("</ACT>", ""), ""),
])
def test_errors_carry_field_paths(mail_doc, mutate, fragment):
    with pytest.raises(DescriptionError) as err:
        parse_experiment_description(mutate(mail_doc))
    assert fragment in str(err.value)


def test_round_trip(mail):
    again = parse_experiment_description(serialize_experiment_description(mail))
    assert again == mail
    assert serialize_experiment_description(again) == serialize_experiment_description(mail)


def test_enumerate_levels_examples(mail):
    assert enumerate_levels(mail.factor("FullThreshold")) == [70, 80, 90, 100]
    assert enumerate_levels(Factor("x", Range("int", 0, 10, 1, 10))) == [0, 10]
    assert enumerate_levels(Factor("x", Range("int", 0, 7, 1, 3))) == [0, 3, 6, 7]
    assert enumerate_levels(mail.factor("CacheSize")) == [50, 100, 500, 1000]


def test_level_in_domain_examples(mail):
    full = mail.factor("FullThreshold")
    assert level_in_domain(full, 75)
    assert not level_in_domain(full, 72)
    assert not level_in_domain(full, 105)
    assert level_in_domain(mail.factor("CacheSize"), 500)
    assert not level_in_domain(mail.factor("CacheSize"), 501)
    with pytest.raises(TypeError):
        level_in_domain(full, "LRU")


def test_text_levels_compare_exactly():
    f = Factor("policy", Enumeration("string", ("LRU", "FIFO")))
    assert level_in_domain(f, "LRU")
    assert not level_in_domain(f, "lru")


def test_float_granule_tolerance():
    f = Factor("r", Range("float", 0.0, 1.0, 0.1))
    assert level_in_domain(f, 0.30000000000000004)
    assert not level_in_domain(f, 0.35)


def test_invalid_domains():
    with pytest.raises(DescriptionError):
        Range("int", 0, 7, 2)
    with pytest.raises(DescriptionError):
        Range("int", 0, 10, 2, 3)
    with pytest.raises(DescriptionError):
        Enumeration("int", (1, 1))
    with pytest.raises(DescriptionError):
        Enumeration("float", (math.nan,))
    with pytest.raises(DescriptionError):
        Range("string", "a", "b", 1)


def test_rounding_half_away_from_zero():
    maxldap = Factor("MaxLDAP", Range("int", 1, 3000, 1))
    assert round_to_granule(maxldap, 24.31) == 24
    assert round_to_granule(maxldap, 175.69) == 176
    assert round_to_granule(Factor("x", Range("int", 0, 10, 1)), 2.5) == 3
    assert snap_to_domain(maxldap, 24.31) == [24, 25]
    assert snap_to_domain(maxldap, 24.0) == [24]


def test_combination_is_order_independent():
    a = Combination.of({"x": 1, "y": 2}, {"n": 3})
    b = Combination.of({"y": 2, "x": 1}, {"n": 3})
    assert a == b and hash(a) == hash(b)
    assert a.levels() == {"x": 1, "y": 2, "n": 3}
    assert a["n"] == 3


@st.composite
def int_ranges(draw):
    legal = draw(st.integers(1, 7))
    lower = draw(st.integers(-50, 50))
    width = draw(st.integers(0, 40)) * legal
    sample = legal * draw(st.integers(1, 6))
    return Factor("f", Range("int", lower, lower + width, legal, sample))


@st.composite
def float_ranges(draw):
    legal = draw(st.sampled_from([0.1, 0.25, 0.5, 1.5, 2.0]))
    lower = draw(st.integers(-20, 20)) * legal
    width = draw(st.integers(1, 40)) * legal
    sample = legal * draw(st.integers(1, 5))
    return Factor("f", Range("float", float(lower), float(lower + width), legal, sample))


@given(st.one_of(int_ranges(), float_ranges()))
def test_enumerate_levels_properties(factor):
    levels = enumerate_levels(factor)
    d = factor.domain
    assert levels[0] == d.lower and levels[-1] == d.upper
    assert all(a < b for a, b in zip(levels, levels[1:]))
    assert all(level_in_domain(factor, v) for v in levels)
    if d.lower < d.upper:
        assert len(levels) >= 2


@given(st.one_of(int_ranges(), float_ranges()), st.integers(0, 5), st.integers(0, 1000))
def test_description_round_trip_property(factor, max_recovers, seed):
    from tactkit.experiment import ExperimentDescription
    desc = ExperimentDescription(
        factors=(factor, Factor("mode", Enumeration("string", ("a b", "<x>")), role=NOISE)),
        metrics=("m1", "m2"), run_command=("run",), recover_command=("recover",),
        time_budget=100.0, trial_timeout=1.5, max_recovers=max_recovers, seed=seed,
        strategy="random", strategy_settings=(("budget", "5"),),
        aggregation=AggregationSpec.weighted({"m1": 0.5, "m2": 2.0}, normaliser=3.0),
    )
    text = serialize_experiment_description(desc)
    assert parse_experiment_description(text) == desc
