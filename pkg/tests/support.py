"""Shared fixtures: the recorded directory-server experiments and synthetic
surfaces with known optima."""

import csv
import itertools
import math
from collections import defaultdict
from pathlib import Path

from tactkit.experiment import ExperimentDescription, Factor, Range
from tactkit.harness import SyntheticTargetSpec
from tactkit.stats import quadratic_terms, snr_larger_better

FIXTURES = Path(__file__).parent / "fixtures"

# coded level -> uncoded setting for the first-phase array
PHASE1_LEVELS = {
    "TNE": {1: 10000, 2: 30000, 3: 50000},
    "MaxLDAP": {1: 100, 2: 1001, 3: 2000},
    "LDAPnum": {1: 1, 2: 2, 3: 4},
    "DispNum": {1: 5, 2: 2, 3: 8},
}
PHASE1_SCALING = {"TNE": 10000, "MaxLDAP": 1000}
PHASE1_INTERACTIONS = [("TNE", "MaxLDAP"), ("MaxLDAP", "LDAPnum"), ("MaxLDAP", "DispNum")]
PHASE1_TERMS = quadratic_terms(list(PHASE1_LEVELS), PHASE1_INTERACTIONS)
PHASE2_STEPS = {"TNE": 5000, "MaxLDAP": 45, "DispNum": 1}

DIRECTORY_FACTORS = (
    Factor("TNE", Range("int", 10000, 70000, 10)),
    Factor("MaxLDAP", Range("int", 1, 3000, 1)),
    Factor("LDAPnum", Range("int", 1, 4, 1)),
    Factor("DispNum", Range("int", 1, 16, 1)),
)


def read_tsv(name):
    with open(FIXTURES / name) as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def reps(row):
    return [float(row[f"rep{i}"]) for i in range(1, 5)]


def phase1_data():
    out = []
    for row in read_tsv("phase1_l27.tsv"):
        levels = {f: m[int(row[f + "_coded"])] for f, m in PHASE1_LEVELS.items()}
        out.append((levels, snr_larger_better(reps(row))))
    return out


def phase2_data():
    out = []
    for row in read_tsv("phase2_ccd.tsv"):
        levels = {f: float(row[f + "_coded"]) for f in ("TNE", "MaxLDAP", "DispNum")}
        out.append((levels, snr_larger_better(reps(row))))
    return out


def recorded_replicates():
    """Queues of recorded responses keyed by (TNE, MaxLDAP, LDAPnum, DispNum)."""
    queue = defaultdict(list)
    for row in read_tsv("phase1_l27.tsv"):
        key = tuple(PHASE1_LEVELS[f][int(row[f + "_coded"])] for f in PHASE1_LEVELS)
        queue[key] += reps(row)
    for row in read_tsv("phase2_ccd.tsv"):
        queue[(int(row["TNE"]), int(row["MaxLDAP"]), 1, int(row["DispNum"]))] += reps(row)
    return queue


class ReplayTarget:
    """Stub target answering each trial with the next recorded replicate for
    the combination that was last applied."""

    def __init__(self, metric="y"):
        self.metric = metric
        self.queue = recorded_replicates()
        self.levels = {}

    def apply_level(self, factor, level):
        self.levels[factor.name] = level

    def validate_configuration(self, configuration):
        return True

    def run_trial(self, deadline):
        from tactkit.harness import TrialResult
        key = tuple(self.levels[f] for f in PHASE1_LEVELS)
        return TrialResult.success([(self.metric, self.queue[key].pop(0))])

    def recover(self, current, attempts, max_recovers):
        raise AssertionError("recorded trials never fail")


def cube_example():
    """Eight-run two-level example with responses on the corners of a cube."""
    cube = {(0, 0, 0): 60, (0, 0, 1): 54, (0, 1, 0): 52, (0, 1, 1): 45,
            (1, 0, 0): 68, (1, 0, 1): 72, (1, 1, 0): 80, (1, 1, 1): 83}
    return [({"A": a, "B": b, "C": c}, y) for (a, b, c), y in cube.items()]


# ------------------------------------------------------------ synthetic surfaces

QUAD_FACTORS = (
    Factor("A", Range("int", 0, 100, 1, 5)),
    Factor("B", Range("int", 0, 100, 1, 5)),
    Factor("C", Range("int", 0, 50, 1, 5)),
)
QUAD_CENTRE = {"A": 62, "B": 34, "C": 23}
QUAD_CURVATURE = {"A": 0.010, "B": 0.020, "C": 0.030}
QUAD_INTERACTION = 0.008
QUAD_PEAK = 250.0


def quad_truth(x):
    y = QUAD_PEAK - sum(q * (x[f] - QUAD_CENTRE[f]) ** 2 for f, q in QUAD_CURVATURE.items())
    return y + QUAD_INTERACTION * (x["A"] - QUAD_CENTRE["A"]) * (x["B"] - QUAD_CENTRE["B"])


def quad_argmax_and_range():
    """Exhaustive argmax over the legal grid, and max minus min."""
    best, hi, lo = None, -math.inf, math.inf
    for a, b, c in itertools.product(range(0, 101), range(0, 101), range(0, 51)):
        y = quad_truth({"A": a, "B": b, "C": c})
        if y > hi:
            best, hi = {"A": a, "B": b, "C": c}, y
        lo = min(lo, y)
    return best, hi - lo


def quad_spec(noise_sigma, seed):
    """The quadratic surface expanded into the target's polynomial terms."""
    ca, cb = QUAD_CENTRE["A"], QUAD_CENTRE["B"]
    d = QUAD_INTERACTION
    linear = {f: 2 * q * QUAD_CENTRE[f] for f, q in QUAD_CURVATURE.items()}
    linear["A"] -= d * cb
    linear["B"] -= d * ca
    intercept = QUAD_PEAK - sum(q * QUAD_CENTRE[f] ** 2 for f, q in QUAD_CURVATURE.items()) + d * ca * cb
    return SyntheticTargetSpec.from_dict({
        "metrics": {"y": {"intercept": intercept, "linear": linear,
                          "quadratic": {f: -q for f, q in QUAD_CURVATURE.items()},
                          "interaction": [["A", "B", d]], "noise_sigma": noise_sigma}},
        "seed": seed,
    })


TWO_PEAK_FACTOR = Factor("x", Range("int", 0, 40, 1))
TWO_PEAK_WIDTH = 6.0


def two_peak_spec(lesser=6.0, greater=10.0):
    return SyntheticTargetSpec.from_dict({"metrics": {"y": {"bumps": [
        {"centre": {"x": 10}, "height": lesser, "width": TWO_PEAK_WIDTH},
        {"centre": {"x": 30}, "height": greater, "width": TWO_PEAK_WIDTH},
    ]}}})


def description(factors, metrics=("y",), strategy="grid", settings=(), seed=0, **kw):
    kw.setdefault("time_budget", 1e9)
    kw.setdefault("trial_timeout", 10.0)
    return ExperimentDescription(tuple(factors), tuple(metrics), ("run",), ("recover",),
                                 strategy=strategy, strategy_settings=tuple(settings), seed=seed, **kw)


def drive(strategy, response):
    """Run a strategy to completion against ``response(levels)``."""
    while not strategy.is_finished():
        c = strategy.next_combination()
        strategy.record_result(c, response(c.levels()))
    return strategy


DIRECTORY_SETTINGS = (
    ("interactions", "TNE*MaxLDAP, MaxLDAP*LDAPnum, MaxLDAP*DispNum"),
    ("scale.TNE", "10000"), ("scale.MaxLDAP", "1000"),
    ("levels.TNE", "10000,30000,50000"), ("levels.MaxLDAP", "100,1001,2000"),
    ("levels.LDAPnum", "1,2,4"), ("levels.DispNum", "5,2,8"),
    ("step.TNE", "5000"), ("step.MaxLDAP", "45"), ("step.DispNum", "1"),
    ("alpha_star", "1.682"), ("stop_after_phase1", "true"),
)


def recorded_store(directory):
    """Replay the recorded first-phase trials through the coordinator into a
    store at ``directory``."""
    from tactkit.coordinator import run_experiment
    from tactkit.store import ResultsStore
    from tactkit.strategies import build_strategy

    desc = description(DIRECTORY_FACTORS, strategy="taguchi", settings=DIRECTORY_SETTINGS, seed=3)
    store = ResultsStore.create(directory, desc)
    run_experiment(desc, build_strategy(desc), ReplayTarget(), store, clock=lambda: 0.0)
    return store
