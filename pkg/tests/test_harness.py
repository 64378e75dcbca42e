import os
import sys
import time

import pytest
from hypothesis import given, settings, strategies as st

from tactkit.experiment import Combination, Enumeration, ExperimentDescription, Factor, Range
from tactkit.harness import (
    ADAPT,
    KILL_GRACE,
    PROTOCOL,
    RUN,
    TIMEOUT,
    VALIDATE,
    CommandTarget,
    Recovery,
    SyntheticTarget,
    SyntheticTargetSpec,
    TargetFailure,
    TrialResult,
    decide_recovery,
    parse_metric_output,
    substitute,
    synthetic_evaluate,
)

PY = sys.executable


def script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text(body)
    return [PY, str(path)]


def describe(run, recover=None, validate=None, factors=None, metrics=("Fetch", "Rcpt"), timeout=5.0):
    factors = factors or (Factor("CacheSize", Range("int", 0, 1000, 1)),)
    return ExperimentDescription(tuple(factors), tuple(metrics), tuple(run),
                                 tuple(recover or [PY, "-c", "pass"]), 1e6, timeout,
                                 validate_command=tuple(validate) if validate else None)


# -- protocol parsing --------------------------------------------------------

def test_parse_two_metrics():
    r = parse_metric_output("Fetch\t123.4\nRcpt\t88.0\n", ["Fetch", "Rcpt"])
    assert r.ok and r.metrics == (("Fetch", 123.4), ("Rcpt", 88.0))


def test_parse_is_order_insensitive_but_keeps_declared_order():
    r = parse_metric_output("Rcpt\t1\nFetch\t2\n", ["Fetch", "Rcpt"])
    assert r.metrics == (("Fetch", 2.0), ("Rcpt", 1.0))


@pytest.mark.parametrize("text,needle", [
    ("Fetch\t1\n", "Rcpt"),
    ("Fetch\t1\nFetch\t2\nRcpt\t3\n", "duplicate"),
    ("Fetch\tabc\nRcpt\t1\n", "unparseable"),
    ("Fetch\t1\nRcpt\t2\nOther\t3\n", "unexpected"),
    ("Fetch 1\nRcpt\t2\n", "expected"),
    ("Fetch\tnan\nRcpt\t2\n", "non-finite"),
])
def test_parse_rejects(text, needle):
    r = parse_metric_output(text, ["Fetch", "Rcpt"])
    assert not r.ok and r.stage == PROTOCOL and needle in r.detail


def test_substitute_text_level_verbatim():
    assert substitute(["set", "{factor}", "{level}"], "Policy", "LRU") == ["set", "Policy", "LRU"]
    assert substitute(["x={level}"], "CacheSize", 500) == ["x=500"]


def test_failure_stage_is_checked():
    with pytest.raises(ValueError):
        TrialResult.failure("bogus", "")


@pytest.mark.parametrize("attempts,maximum,expected", [
    (1, 1, Recovery.ABANDON),
    (0, 1, Recovery.RETRY),
    (2, 5, Recovery.RETRY),
    (0, 0, Recovery.ABANDON),
])
def test_decide_recovery(attempts, maximum, expected):
    assert decide_recovery(attempts, maximum) is expected


# -- command target ----------------------------------------------------------

def test_apply_level_substitutes_literal(tmp_path):
    log = tmp_path / "log"
    cmd = script(tmp_path, "adapt.py", f"import sys\nopen({str(log)!r}, 'a').write(' '.join(sys.argv[1:]))\n")
    f = Factor("CacheSize", Range("int", 0, 1000, 1), adaptation_command=tuple(cmd + ["{level}"]))
    target = CommandTarget(describe(["true"], factors=[f]))
    target.apply_level(f, 500)
    assert log.read_text() == "500"


def test_apply_level_failure_exit(tmp_path):
    cmd = script(tmp_path, "adapt.py", "import sys\nsys.exit(3)\n")
    f = Factor("CacheSize", Range("int", 0, 1000, 1), adaptation_command=tuple(cmd + ["{level}"]))
    target = CommandTarget(describe(["true"], factors=[f]))
    with pytest.raises(TargetFailure) as info:
        target.apply_level(f, 1)
    assert info.value.result.stage == ADAPT and "exit 3" in info.value.result.detail


def test_apply_level_spawn_failure(tmp_path):
    f = Factor("CacheSize", Range("int", 0, 1000, 1),
               adaptation_command=(str(tmp_path / "missing"), "{level}"))
    with pytest.raises(TargetFailure) as info:
        CommandTarget(describe(["true"], factors=[f])).apply_level(f, 1)
    assert info.value.result.stage == ADAPT


def test_run_trial_success(tmp_path):
    run = script(tmp_path, "run.py", "print('Fetch\\t123.4'); print('Rcpt\\t88.0')\n")
    r = CommandTarget(describe(run)).run_trial(5.0)
    assert r.ok and r.values == {"Fetch": 123.4, "Rcpt": 88.0} and r.wall_time > 0


def test_run_trial_missing_metric(tmp_path):
    run = script(tmp_path, "run.py", "print('Fetch\\t1')\n")
    r = CommandTarget(describe(run)).run_trial(5.0)
    assert r.stage == PROTOCOL and "Rcpt" in r.detail


def test_run_trial_nonzero_exit(tmp_path):
    run = script(tmp_path, "run.py", "import sys\nsys.exit(2)\n")
    r = CommandTarget(describe(run)).run_trial(5.0)
    assert r.stage == RUN and "exit 2" in r.detail


def test_timeout_kills_process_tree(tmp_path):
    marker = tmp_path / "child.pid"
    run = script(tmp_path, "run.py", (
        "import subprocess, sys, time\n"
        f"p = subprocess.Popen([sys.executable, '-c', 'import time; time.sleep(30)'])\n"
        f"open({str(marker)!r}, 'w').write(str(p.pid))\n"
        "time.sleep(30)\n"))
    start = time.monotonic()
    r = CommandTarget(describe(run)).run_trial(1.0)
    elapsed = time.monotonic() - start
    assert r.stage == TIMEOUT
    assert elapsed < 1.0 + 2.0
    pid = int(marker.read_text())
    deadline = time.monotonic() + KILL_GRACE
    alive = True
    while time.monotonic() < deadline:
        try:
            os.kill(pid, 0)
            with open(f"/proc/{pid}/stat") as fh:
                if fh.read().split()[2] == "Z":
                    alive = False
                    break
        except (ProcessLookupError, FileNotFoundError):
            alive = False
            break
        time.sleep(0.05)
    assert not alive


@pytest.mark.parametrize("code,expected", [(0, True), (1, False)])
def test_validate_exit_codes(tmp_path, code, expected):
    cmd = script(tmp_path, "v.py", f"import sys\nsys.exit({code})\n")
    assert CommandTarget(describe(["true"], validate=cmd)).validate_configuration({"CacheSize": 3}) is expected


def test_validate_receives_name_value_and_other_exit_fails(tmp_path):
    cmd = script(tmp_path, "v.py", "import sys\nsys.exit(0 if sys.argv[1:] == ['CacheSize=3'] else 7)\n")
    target = CommandTarget(describe(["true"], validate=cmd))
    assert target.validate_configuration({"CacheSize": 3})
    with pytest.raises(TargetFailure) as info:
        target.validate_configuration({"CacheSize": 4})
    assert info.value.result.stage == VALIDATE


def test_no_validate_command_is_true():
    assert CommandTarget(describe(["true"])).validate_configuration({"CacheSize": 1})


def test_recover_exit_codes(tmp_path):
    ok = CommandTarget(describe(["true"], recover=["true"]))
    assert ok.recover(None, 0, 1) == (Recovery.RETRY, "")
    assert ok.recover(None, 1, 1)[0] is Recovery.ABANDON
    bad = CommandTarget(describe(["true"], recover=["false"]))
    decision, why = bad.recover(None, 0, 5)
    assert decision is Recovery.ABANDON and "recovery" in why


# -- synthetic target --------------------------------------------------------

def spec_of(metric, **kw):
    return SyntheticTargetSpec.from_dict({"metrics": {"y": metric}, **kw})


def test_synthetic_linear_exact():
    r = synthetic_evaluate(spec_of({"linear": {"x1": 1}}), Combination.of({"x1": 7}), 0)
    assert r.values == {"y": 7.0}


def test_synthetic_step():
    spec = spec_of({"intercept": 10, "steps": [{"factor": "x1", "threshold": 50, "offset": -5}]})
    assert synthetic_evaluate(spec, Combination.of({"x1": 49}), 0).values["y"] == 10
    assert synthetic_evaluate(spec, Combination.of({"x1": 51}), 0).values["y"] == 5


def test_synthetic_bump_peak():
    spec = spec_of({"bumps": [{"centre": {"x": 10}, "height": 6, "width": 5}]})
    assert synthetic_evaluate(spec, Combination.of({"x": 10}), 3).values["y"] == 6


@given(seed=st.integers(0, 2**63), index=st.integers(0, 10**6), x=st.integers(-100, 100))
@settings(max_examples=50, deadline=None)
def test_synthetic_deterministic(seed, index, x):
    spec = spec_of({"linear": {"x": 0.5}, "noise_sigma": 3}, seed=seed, fail_probability=0.2)
    c = Combination.of({"x": x})
    assert synthetic_evaluate(spec, c, index) == synthetic_evaluate(spec, c, index)


def test_synthetic_noise_free_is_pure():
    spec = spec_of({"quadratic": {"x": -1}})
    vals = {synthetic_evaluate(spec, Combination.of({"x": 3}), i).values["y"] for i in range(20)}
    assert vals == {-9.0}


def test_synthetic_noise_moments():
    spec = spec_of({"intercept": 0, "noise_sigma": 2}, seed=11)
    ys = [synthetic_evaluate(spec, Combination.of({"x": 0}), i).values["y"] for i in range(4000)]
    mean = sum(ys) / len(ys)
    sd = (sum((y - mean) ** 2 for y in ys) / (len(ys) - 1)) ** 0.5
    assert abs(mean) < 0.15 and abs(sd - 2) < 0.1


def test_injected_failures_reproducible():
    spec = spec_of({"intercept": 1}, seed=5, fail_probability=0.3)
    c = Combination.of({"x": 0})
    fails = [i for i in range(500) if not synthetic_evaluate(spec, c, i).ok]
    again = [i for i in range(500) if not synthetic_evaluate(spec, c, i).ok]
    assert fails == again
    assert 100 < len(fails) < 200
    r = synthetic_evaluate(spec, c, fails[0])
    assert r.stage == RUN and r.detail == "injected"


def test_synthetic_target_draw_counter_and_invalid():
    spec = spec_of({"linear": {"x": 1}, "noise_sigma": 1}, invalid={"x": 5})
    t = SyntheticTarget(spec)
    t.apply_level(Factor("x", Range("int", 0, 9, 1)), 2)
    first = t.run_trial(1.0)
    assert t.draw_index == 1
    other = SyntheticTarget(spec)
    other.skip_draws(1)
    other.apply_level(Factor("x", Range("int", 0, 9, 1)), 2)
    assert first == synthetic_evaluate(spec, Combination.of({"x": 2}), 0)
    assert other.run_trial(1.0) == synthetic_evaluate(spec, Combination.of({"x": 2}), 1)
    assert t.validate_configuration({"x": 5}) and not t.validate_configuration({"x": 6})


def test_enumerated_numeric_levels_evaluate():
    f = Factor("Policy", Enumeration("int", (1, 2)))
    t = SyntheticTarget(spec_of({"linear": {"Policy": 2}}))
    t.apply_level(f, 2)
    assert t.run_trial(1.0).values == {"y": 4.0}
