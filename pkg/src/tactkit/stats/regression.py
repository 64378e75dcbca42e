"""Quadratic response-surface regression: OLS fit, backward elimination,
prediction and optimum search over a bounded region."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from tactkit.errors import StatsError
from tactkit.experiment import Factor, level_in_domain, snap_to_domain
from tactkit.stats.distributions import t_two_sided_p

INTERCEPT = "intercept"
LINEAR = "linear"
QUADRATIC = "quadratic"
INTERACTION = "interaction"


@dataclass(frozen=True, order=True)
class Term:
    kind: str
    factors: Tuple[str, ...] = ()

    def __post_init__(self):
        arity = {INTERCEPT: 0, LINEAR: 1, QUADRATIC: 1, INTERACTION: 2}
        if self.kind not in arity:
            raise StatsError(f"unknown term kind {self.kind!r}")
        if len(self.factors) != arity[self.kind]:
            raise StatsError(f"{self.kind} term needs {arity[self.kind]} factor(s)")
        if self.kind == INTERACTION and self.factors[0] == self.factors[1]:
            raise StatsError("interaction of a factor with itself; use a quadratic term")

    @classmethod
    def intercept(cls):
        return cls(INTERCEPT)

    @classmethod
    def linear(cls, f):
        return cls(LINEAR, (f,))

    @classmethod
    def quadratic(cls, f):
        return cls(QUADRATIC, (f,))

    @classmethod
    def interaction(cls, f, g):
        return cls(INTERACTION, (f, g))

    @property
    def name(self) -> str:
        if self.kind == INTERCEPT:
            return "(intercept)"
        if self.kind == LINEAR:
            return self.factors[0]
        if self.kind == QUADRATIC:
            return f"{self.factors[0]}^2"
        return f"{self.factors[0]}*{self.factors[1]}"

    def value(self, x: Mapping[str, float]) -> float:
        if self.kind == INTERCEPT:
            return 1.0
        if self.kind == LINEAR:
            return x[self.factors[0]]
        if self.kind == QUADRATIC:
            return x[self.factors[0]] ** 2
        return x[self.factors[0]] * x[self.factors[1]]

    def __str__(self):
        return self.name


def parse_term(text: str) -> Term:
    """Inverse of ``Term.name``."""
    text = text.strip()
    if text in ("(intercept)", "1"):
        return Term.intercept()
    if text.endswith("^2"):
        return Term.quadratic(text[:-2])
    if "*" in text:
        f, g = text.split("*", 1)
        return Term.interaction(f, g)
    return Term.linear(text)


def quadratic_terms(factors: Sequence[str], interactions=None) -> list:
    """Intercept, linear and quadratic terms for every factor, plus the given
    interaction pairs (all pairs when ``interactions`` is None)."""
    terms = [Term.intercept()]
    terms += [Term.linear(f) for f in factors]
    terms += [Term.quadratic(f) for f in factors]
    pairs = itertools.combinations(factors, 2) if interactions is None else interactions
    terms += [Term.interaction(f, g) for f, g in pairs]
    return terms


@dataclass(frozen=True)
class Coding:
    """Maps an uncoded level to the regression variable ``(level - offset) / scale``."""
    scale: float = 1.0
    offset: float = 0.0

    def encode(self, level) -> float:
        return (float(level) - self.offset) / self.scale

    def decode(self, x: float) -> float:
        return x * self.scale + self.offset


def _as_coding(v) -> Coding:
    if isinstance(v, Coding):
        return v
    if isinstance(v, tuple):
        return Coding(*v)
    return Coding(float(v))


def _codings(scaling) -> Dict[str, Coding]:
    if not scaling:
        return {}
    out = {}
    for name, v in dict(scaling).items():
        c = _as_coding(v)
        if not c.scale > 0:
            raise StatsError(f"scaling for {name} must be positive")
        out[name] = c
    return out


@dataclass(frozen=True)
class RegressionModel:
    terms: Tuple[Term, ...]
    coefficients: Tuple[float, ...]
    std_errors: Tuple[float, ...] = ()
    t_values: Tuple[float, ...] = ()
    p_values: Tuple[float, ...] = ()
    scaling: Dict[str, Coding] = field(default_factory=dict)
    df_resid: int = 0
    r_squared: float = math.nan

    @classmethod
    def from_coefficients(cls, coefficients: Mapping, scaling=None) -> "RegressionModel":
        """Model with known coefficients and no fit statistics. Keys may be
        ``Term`` objects or term names such as ``"TNE^2"``."""
        terms, betas = [], []
        for k, v in coefficients.items():
            terms.append(k if isinstance(k, Term) else parse_term(k))
            betas.append(float(v))
        if len(set(terms)) != len(terms):
            raise StatsError("duplicate terms")
        return cls(tuple(terms), tuple(betas), scaling=_codings(scaling))

    @property
    def factors(self) -> Tuple[str, ...]:
        seen = []
        for t in self.terms:
            for f in t.factors:
                if f not in seen:
                    seen.append(f)
        return tuple(seen)

    def coefficient(self, term) -> float:
        term = term if isinstance(term, Term) else parse_term(term)
        try:
            return self.coefficients[self.terms.index(term)]
        except ValueError:
            return 0.0

    def p_value(self, term) -> float:
        term = term if isinstance(term, Term) else parse_term(term)
        return self.p_values[self.terms.index(term)]

    def encode(self, levels: Mapping) -> dict:
        out = {}
        for f in self.factors:
            if f not in levels:
                raise StatsError(f"missing level for factor {f}")
            out[f] = self.scaling.get(f, Coding()).encode(levels[f])
        return out

    def predict_coded(self, x: Mapping[str, float]) -> float:
        return math.fsum(b * t.value(x) for t, b in zip(self.terms, self.coefficients))

    def summary_rows(self) -> list:
        """Rows of (term, coefficient, se, t, p) for tabular export."""
        rows = []
        for i, t in enumerate(self.terms):
            se = self.std_errors[i] if self.std_errors else math.nan
            tv = self.t_values[i] if self.t_values else math.nan
            p = self.p_values[i] if self.p_values else math.nan
            rows.append((t.name, self.coefficients[i], se, tv, p))
        return rows


def _design_matrix(xs, terms):
    return np.array([[t.value(x) for t in terms] for x in xs], dtype=float)


def fit_regression(data: Sequence[Tuple[Mapping, float]], terms: Sequence[Term],
                   scaling=None) -> RegressionModel:
    """Ordinary least squares through a QR decomposition of the design matrix.

    ``scaling`` maps factor name to a divisor, an ``(scale, offset)`` pair or a
    ``Coding``. Unlisted factors are used as given.
    """
    terms = tuple(terms)
    if len(set(terms)) != len(terms):
        raise StatsError("duplicate terms")
    codings = _codings(scaling)
    n, p = len(data), len(terms)
    if n < p + 1:
        raise StatsError(f"{n} observations cannot support {p} terms (need {p + 1})")
    xs = []
    for levels, _ in data:
        x = {}
        for t in terms:
            for f in t.factors:
                if f not in levels:
                    raise StatsError(f"observation lacks factor {f}")
                x[f] = codings.get(f, Coding()).encode(levels[f])
        xs.append(x)
    X = _design_matrix(xs, terms)
    y = np.array([float(r) for _, r in data])

    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    norms = np.linalg.norm(X, axis=0)
    dependent = [terms[i].name for i in range(p) if diag[i] <= 1e-10 * max(norms[i], 1e-300)]
    if dependent:
        raise StatsError("design is rank deficient; dependent terms: " + ", ".join(dependent))
    beta = np.linalg.solve(r, q.T @ y)

    resid = y - X @ beta
    df = n - p
    sse = float(resid @ resid)
    sigma2 = sse / df
    r_inv = np.linalg.solve(r, np.eye(p))
    se = np.sqrt(np.sum(r_inv ** 2, axis=1) * sigma2)
    with np.errstate(divide="ignore", invalid="ignore"):
        tvals = np.where(se > 0, beta / se, np.where(beta == 0, 0.0, np.inf))
    pvals = [t_two_sided_p(float(abs(t)), df) for t in tvals]
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return RegressionModel(terms, tuple(float(b) for b in beta), tuple(float(s) for s in se),
                           tuple(float(t) for t in tvals), tuple(float(v) for v in pvals),
                           codings, df, r2)


def _eligible(model: RegressionModel, i: int, protect_marginal: bool) -> bool:
    t = model.terms[i]
    if t.kind == INTERCEPT:
        return False
    if t.kind == LINEAR and protect_marginal:
        return Term.quadratic(t.factors[0]) not in model.terms
    return True


def backward_eliminate(data, full_terms, significance: float = 0.05, scaling=None,
                       protect_marginal: bool = True, trace: Optional[list] = None) -> RegressionModel:
    """Drop the least significant term until every remaining term has
    ``p <= significance``.

    Quadratic and interaction terms are removed before any linear term. With
    ``protect_marginal`` a linear term is kept while its own quadratic term is
    still in the model. Interaction terms never protect their parents.
    Removed terms are appended to ``trace`` when given.
    """
    terms = list(full_terms)
    for _ in range(len(terms) + 1):
        model = fit_regression(data, terms, scaling)
        cands = [i for i in range(len(terms))
                 if _eligible(model, i, protect_marginal) and model.p_values[i] > significance]
        if not cands:
            return model
        higher = [i for i in cands if terms[i].kind != LINEAR]
        pool = higher or cands
        worst = max(pool, key=lambda i: model.p_values[i])
        if trace is not None:
            trace.append(terms[worst])
        del terms[worst]
    raise AssertionError("elimination did not terminate")


def predict(model: RegressionModel, levels: Mapping) -> float:
    return model.predict_coded(model.encode(levels))


@dataclass(frozen=True)
class OptimumResult:
    levels: Dict[str, object]
    predicted: float
    continuous: Dict[str, float] = field(default_factory=dict)


def _quadratic_form(model, names):
    k = len(names)
    idx = {f: i for i, f in enumerate(names)}
    c, b, H = 0.0, np.zeros(k), np.zeros((k, k))
    for t, beta in zip(model.terms, model.coefficients):
        if t.kind == INTERCEPT:
            c += beta
        elif t.kind == LINEAR:
            b[idx[t.factors[0]]] += beta
        elif t.kind == QUADRATIC:
            i = idx[t.factors[0]]
            H[i, i] += 2 * beta
        else:
            i, j = idx[t.factors[0]], idx[t.factors[1]]
            H[i, j] += beta
            H[j, i] += beta
    return c, b, H


def _stationary_candidates(b, H, lo, hi):
    """Box-constrained stationary points of ``b.x + x'Hx/2``: every split of
    coordinates into free / at lower bound / at upper bound."""
    k = len(b)
    out = []
    for case in itertools.product((0, 1, 2), repeat=k):
        x = np.where(np.array(case) == 1, lo, hi).astype(float)
        free = [i for i in range(k) if case[i] == 0]
        if free:
            fixed = [i for i in range(k) if case[i] != 0]
            Hff = H[np.ix_(free, free)]
            rhs = -(b[free] + H[np.ix_(free, fixed)] @ x[fixed])
            try:
                sol = np.linalg.solve(Hff, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.all(np.isfinite(sol)):
                continue
            x[free] = sol
            if np.any(x < lo - 1e-9) or np.any(x > hi + 1e-9):
                continue
        out.append(x)
    return out


def predict_optimum(model: RegressionModel, domains: Mapping[str, Factor],
                    region: Mapping[str, Tuple[float, float]]) -> OptimumResult:
    """Maximise the model's prediction over the box ``region`` of uncoded levels.

    Continuous candidates are snapped to the legal levels bracketing them and
    every snap neighbour is evaluated; ties go to the smaller levels. Factors in
    ``region`` that the model does not use are placed at their lower bound.
    """
    names = list(model.factors)
    for f in names:
        if f not in region:
            raise StatsError(f"no region bounds for model factor {f}")
        if f not in domains:
            raise StatsError(f"no domain for model factor {f}")
    codings = [model.scaling.get(f, Coding()) for f in names]
    lo = np.array([codings[i].encode(region[f][0]) for i, f in enumerate(names)])
    hi = np.array([codings[i].encode(region[f][1]) for i, f in enumerate(names)])
    if np.any(lo > hi):
        raise StatsError("region lower bound exceeds upper bound")
    _, b, H = _quadratic_form(model, names)

    best_key, best = None, None
    best_cont = {}
    seen = set()
    for x in _stationary_candidates(b, H, lo, hi):
        options = []
        for i, f in enumerate(names):
            u = codings[i].decode(x[i])
            r_lo, r_hi = region[f]
            opts = [v for v in snap_to_domain(domains[f], u) if r_lo - 1e-9 <= v <= r_hi + 1e-9]
            if not opts:
                opts = [v for v in snap_to_domain(domains[f], min(max(u, r_lo), r_hi))]
            options.append(opts)
        for combo in itertools.product(*options):
            if combo in seen:
                continue
            seen.add(combo)
            y = predict(model, dict(zip(names, combo)))
            # higher prediction wins; on ties the lexicographically smaller levels
            key = (round(y, 12), tuple(-float(v) for v in combo))
            if best_key is None or key > best_key:
                best_key, best = key, (combo, y)
                best_cont = {f: codings[i].decode(x[i]) for i, f in enumerate(names)}
    combo, y = best
    levels = dict(zip(names, combo))
    for f, (r_lo, _) in region.items():
        if f not in levels:
            levels[f] = r_lo
    for f, v in levels.items():
        if f in domains and not level_in_domain(domains[f], v):
            raise StatsError(f"optimum level {v!r} for {f} is outside its domain")
    return OptimumResult(levels, y, best_cont)
