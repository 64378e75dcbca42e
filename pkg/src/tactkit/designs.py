"""Run plans: orthogonal arrays with clear-interaction allocation, full
factorials, central composite designs and randomized replication blocks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from tactkit import oa_tables
from tactkit.errors import DesignError
from tactkit.experiment import Factor, enumerate_levels, format_level, level_in_domain, round_to_granule

# arrays without a generator structure: most interactions are spread thinly
# over several columns, so allocation with interactions is refused on them
NO_INTERACTION_TABLE = frozenset({"L12", "L18"})


def _parse(text):
    return tuple(tuple(int(v) for v in line.split()) for line in text.strip().splitlines())


def _relabel_equal(a, b) -> bool:
    """True when columns ``a`` and ``b`` are equal up to a bijection of levels."""
    fwd, back = {}, {}
    for x, y in zip(a, b):
        if fwd.setdefault(x, y) != y or back.setdefault(y, x) != x:
            return False
    return True


@dataclass(frozen=True)
class OrthogonalArray:
    name: str
    levels: int
    matrix: Tuple[Tuple[int, ...], ...]
    interaction_table: Optional[Dict[FrozenSet[int], FrozenSet[int]]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.interaction_table is None:
            table = self._scan_interactions() if self.name in NO_INTERACTION_TABLE \
                else self._derive_interactions()
            object.__setattr__(self, "interaction_table", table)

    @property
    def rows(self) -> int:
        return len(self.matrix)

    @property
    def columns(self) -> int:
        return len(self.matrix[0])

    @property
    def has_interaction_table(self) -> bool:
        return self.name not in NO_INTERACTION_TABLE

    def column(self, c: int) -> Tuple[int, ...]:
        """Coded levels of 1-based column ``c``."""
        return tuple(r[c - 1] for r in self.matrix)

    def _derive_interactions(self):
        cols = [np.array(self.column(c)) - 1 for c in range(1, self.columns + 1)]
        table = {}
        for i, j in itertools.combinations(range(self.columns), 2):
            if self.levels == 2:
                targets = [cols[i] ^ cols[j]]
            else:
                targets = [(cols[i] + cols[j]) % 3, (cols[i] + 2 * cols[j]) % 3]
            found = set()
            for t in targets:
                for c in range(self.columns):
                    if c not in (i, j) and _relabel_equal(t, cols[c]):
                        found.add(c + 1)
            table[frozenset((i + 1, j + 1))] = frozenset(found)
        return table

    def _scan_interactions(self):
        # a column carries i x j when it is a function of the (i, j) level pair
        table = {}
        for i, j in itertools.combinations(range(1, self.columns + 1), 2):
            pairs = list(zip(self.column(i), self.column(j)))
            found = set()
            for c in range(1, self.columns + 1):
                if c in (i, j):
                    continue
                seen = {}
                if all(seen.setdefault(p, z) == z for p, z in zip(pairs, self.column(c))):
                    found.add(c)
            table[frozenset((i, j))] = frozenset(found)
        return table


CATALOG: Tuple[OrthogonalArray, ...] = tuple(
    OrthogonalArray(name, levels, _parse(getattr(oa_tables, name)))
    for name, levels in [("L4", 2), ("L8", 2), ("L9", 3), ("L12", 2),
                         ("L16", 2), ("L18", 3), ("L27", 3)]
)


def get_array(name: str) -> OrthogonalArray:
    for oa in CATALOG:
        if oa.name == name:
            return oa
    raise DesignError(f"unknown orthogonal array {name!r}")


def catalog_lookup(levels_per_factor: int, needed_columns: int, need_interactions: bool = False,
                   min_rows: int = 0) -> OrthogonalArray:
    """Smallest catalog array with the given level count and enough columns."""
    if levels_per_factor not in (2, 3):
        raise DesignError(f"only 2- and 3-level arrays are catalogued, not {levels_per_factor}")
    if needed_columns < 1:
        raise DesignError("need at least one column")
    for oa in CATALOG:
        if (oa.levels == levels_per_factor and oa.columns >= needed_columns and oa.rows > min_rows
                and (oa.has_interaction_table or not need_interactions)):
            return oa
    raise DesignError(f"no catalog array has {needed_columns} columns at {levels_per_factor} levels")


def interaction_columns(oa: OrthogonalArray, i: int, j: int) -> FrozenSet[int]:
    """Columns carrying the interaction of columns ``i`` and ``j`` (1-based)."""
    if i == j:
        raise DesignError("interaction needs two distinct columns")
    return oa.interaction_table[frozenset((i, j))]


@dataclass(frozen=True)
class Allocation:
    factors: Dict[str, int]
    interactions: Dict[Tuple[str, str], FrozenSet[int]] = field(default_factory=dict)

    def problems(self, oa: OrthogonalArray) -> List[str]:
        """Invariant violations of this allocation on ``oa`` (empty when valid)."""
        out = []
        cols = list(self.factors.values())
        if len(set(cols)) != len(cols):
            out.append("factors share a column")
        if any(not 1 <= c <= oa.columns for c in cols):
            out.append("column outside the array")
            return out
        occupied = set(cols)
        claimed = set()
        for (f, g), carrying in self.interactions.items():
            expected = interaction_columns(oa, self.factors[f], self.factors[g])
            if not expected:
                out.append(f"{f}x{g} has no carrying column in {oa.name}")
                continue
            if frozenset(carrying) != expected:
                out.append(f"{f}x{g} is carried by {sorted(expected)}, not {sorted(carrying)}")
            if expected & occupied:
                out.append(f"{f}x{g} is aliased with a factor")
            if expected & claimed:
                out.append(f"{f}x{g} is aliased with another interaction")
            claimed |= expected
        return out

    @classmethod
    def manual(cls, oa: OrthogonalArray, factors: Mapping[str, int],
               interactions: Sequence[Tuple[str, str]] = ()) -> "Allocation":
        """Accept a hand-made allocation after checking it is clear."""
        alloc = cls(dict(factors), {(f, g): interaction_columns(oa, factors[f], factors[g])
                                    for f, g in interactions})
        bad = alloc.problems(oa)
        if bad:
            raise DesignError("invalid allocation: " + "; ".join(bad))
        return alloc


def allocate_factors(oa: OrthogonalArray, factors: Sequence[str],
                     interactions: Sequence[Tuple[str, str]] = ()) -> Allocation:
    """Backtracking search, factors in the given order and columns ascending;
    the first assignment leaving every interaction of interest clear wins."""
    factors = list(factors)
    interactions = [tuple(p) for p in interactions]
    for f, g in interactions:
        if f not in factors or g not in factors:
            raise DesignError(f"interaction {f}x{g} names an unknown factor")
    if interactions and not oa.has_interaction_table:
        raise DesignError(f"{oa.name} has no interaction table; no valid allocation")
    width = 1 if oa.levels == 2 else 2
    if len(factors) + width * len(interactions) > oa.columns:
        raise DesignError(f"no valid allocation: {oa.name} has only {oa.columns} columns")

    assign: Dict[str, int] = {}

    def consistent():
        occupied = set(assign.values())
        claimed = set()
        for f, g in interactions:
            if f in assign and g in assign:
                cols = interaction_columns(oa, assign[f], assign[g])
                if not cols or cols & claimed:
                    return False
                claimed |= cols
        return not (claimed & occupied)

    def search(k):
        if k == len(factors):
            return True
        used = set(assign.values())
        for c in range(1, oa.columns + 1):
            if c in used:
                continue
            assign[factors[k]] = c
            if consistent() and search(k + 1):
                return True
            del assign[factors[k]]
        return False

    if not search(0):
        raise DesignError(f"no valid allocation on {oa.name}")
    return Allocation(dict(assign), {p: interaction_columns(oa, assign[p[0]], assign[p[1]])
                                     for p in interactions})


@dataclass(frozen=True)
class DesignMatrix:
    factors: Tuple[str, ...]
    rows: Tuple[Tuple, ...]
    coded: Tuple[Tuple, ...] = ()
    kind: str = "custom"
    replications: int = 1

    def __len__(self):
        return len(self.rows)

    def row_levels(self, i: int) -> dict:
        return dict(zip(self.factors, self.rows[i]))

    def all_levels(self) -> List[dict]:
        return [self.row_levels(i) for i in range(len(self.rows))]

    def with_fixed(self, fixed: Mapping) -> "DesignMatrix":
        """Append pinned factors to every row."""
        names = tuple(fixed)
        extra = tuple(fixed[n] for n in names)
        return DesignMatrix(self.factors + names, tuple(r + extra for r in self.rows),
                            self.coded, self.kind, self.replications)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.factors)]
        lines += ["\t".join(format_level(v) for v in r) for r in self.rows]
        return "\n".join(lines) + "\n"


def build_design_matrix(oa: OrthogonalArray, allocation: Allocation,
                        level_maps: Mapping[str, Mapping]) -> DesignMatrix:
    """Substitute uncoded levels into the allocated columns. A level map may be
    a dict keyed by coded level or a sequence where index 0 is coded level 1."""
    names = tuple(allocation.factors)
    maps = {}
    for f in names:
        m = level_maps[f]
        maps[f] = dict(m) if isinstance(m, Mapping) else {i + 1: v for i, v in enumerate(m)}
    rows, coded = [], []
    for r in oa.matrix:
        code = tuple(r[allocation.factors[f] - 1] for f in names)
        try:
            rows.append(tuple(maps[f][c] for f, c in zip(names, code)))
        except KeyError as e:
            raise DesignError(f"coded level {e.args[0]} missing from a level map") from None
        coded.append(code)
    return DesignMatrix(names, tuple(rows), tuple(coded), oa.name)


def full_factorial(factors: Sequence[Factor], cap: int = 10 ** 6) -> DesignMatrix:
    """Every combination, last factor varying fastest."""
    level_lists = [enumerate_levels(f) for f in factors]
    size = math.prod(len(v) for v in level_lists)
    if size > cap:
        raise DesignError(f"full factorial has {size} rows, above the cap of {cap}")
    rows = tuple(itertools.product(*level_lists))
    coded = tuple(itertools.product(*[range(1, len(v) + 1) for v in level_lists]))
    return DesignMatrix(tuple(f.name for f in factors), rows, coded, "full-factorial")


@dataclass(frozen=True)
class VariedFactor:
    factor: Factor
    centre: float
    step: float


@dataclass(frozen=True)
class CentralCompositeSpec:
    varied: Tuple[VariedFactor, ...]
    alpha_star: Optional[float] = None
    fixed: Tuple[Tuple[str, object], ...] = ()
    n_center: int = 6
    corners: str = "full"

    @property
    def alpha(self) -> float:
        if self.alpha_star is not None:
            return self.alpha_star
        k = len(self.varied) - (1 if self.corners == "fractional" else 0)
        return (2 ** k) ** 0.25


def _corner_signs(k, fractional):
    # first factor varies fastest
    signs = [tuple(-1 if (i >> b) & 1 == 0 else 1 for b in range(k)) for i in range(2 ** k)]
    if fractional:
        signs = [s for s in signs if math.prod(s) == 1]
    return signs


def central_composite(spec: CentralCompositeSpec) -> DesignMatrix:
    """Centre rows, then star rows (-a, +a per axis in factor order), then
    corners. Off-centre levels are rounded to the nearest legal granule."""
    k = len(spec.varied)
    if k < 1:
        raise DesignError("central composite design needs a varied factor")
    if spec.n_center < 1:
        raise DesignError("n_center must be at least 1")
    if spec.corners not in ("full", "fractional"):
        raise DesignError(f"unknown corner kind {spec.corners!r}")
    if spec.corners == "fractional" and k < 3:
        raise DesignError("fractional corners need at least three varied factors")
    a = spec.alpha
    if not a > 0:
        raise DesignError("alpha_star must be positive")
    for v in spec.varied:
        if not v.step > 0:
            raise DesignError(f"{v.factor.name}: step must be positive")
        if not level_in_domain(v.factor, v.centre):
            raise DesignError(f"{v.factor.name}: centre {v.centre!r} is not a legal level")

    def level(i, z):
        v = spec.varied[i]
        if z == 0:
            return v.centre
        x = round_to_granule(v.factor, v.centre + z * v.step)
        if not level_in_domain(v.factor, x):
            raise DesignError(f"{v.factor.name}: point {x!r} leaves the factor range")
        return x

    coded = [(0.0,) * k] * spec.n_center
    for i in range(k):
        for z in (-a, a):
            coded.append(tuple(z if j == i else 0.0 for j in range(k)))
    coded += [tuple(float(s) for s in signs) for signs in _corner_signs(k, spec.corners == "fractional")]
    rows = [tuple(level(i, z) for i, z in enumerate(c)) for c in coded]
    design = DesignMatrix(tuple(v.factor.name for v in spec.varied), tuple(rows), tuple(coded),
                          "central-composite")
    return design.with_fixed(dict(spec.fixed)) if spec.fixed else design


@dataclass(frozen=True)
class PlannedTrial:
    block: int
    row: int
    levels: Dict[str, object]


def randomized_run_order(design: DesignMatrix, r: int, seed: int) -> List[PlannedTrial]:
    """``r`` blocks, each an independent seeded permutation of the design rows."""
    if r < 1:
        raise DesignError("replications must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for b in range(r):
        for i in rng.permutation(len(design.rows)):
            out.append(PlannedTrial(b, int(i), design.row_levels(int(i))))
    return out
