"""Finite groupoids as validated index tables, with the standard constructions.

Arrows are dense integers ``0..n-1``; units are a sorted subset of the arrows.
Composition is stored as a total ``(n, n)`` table holding ``-1`` on
non-composable pairs, so composability is a table lookup rather than an error
path.  Everything is immutable after validation.

Topological qualifiers (open sets, r-discreteness, Haar systems) are vacuous
for finite discrete groupoids and are deliberately not modelled.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import (
    BadInverse,
    BadUnit,
    ComposabilityMismatch,
    MorphismInvalid,
    NonAssociative,
    NotAGroup,
    NotClosed,
)

NO_COMPOSE = -1


class FiniteGroupoid:
    """Validated finite groupoid.  Construct via :func:`validate_groupoid`."""

    def __init__(self, units, range_map, source_map, inverse_map, compose_table,
                 _validated: bool = False):
        if not _validated:
            raise TypeError("use validate_groupoid() or one of the constructors")
        self.range = np.asarray(range_map, dtype=np.int64)
        self.source = np.asarray(source_map, dtype=np.int64)
        self.inverse = np.asarray(inverse_map, dtype=np.int64)
        self.compose_table = np.asarray(compose_table, dtype=np.int64)
        self.units: tuple[int, ...] = tuple(sorted(int(u) for u in units))
        self.n_arrows: int = int(self.range.shape[0])
        self._unit_set = frozenset(self.units)
        self._by_source = {x: np.flatnonzero(self.source == x) for x in self.units}
        self._by_range = {x: np.flatnonzero(self.range == x) for x in self.units}
        pairs = np.argwhere(self.compose_table != NO_COMPOSE)
        self.composable_pairs: np.ndarray = pairs  # (P, 2) int array
        for arr in (self.range, self.source, self.inverse, self.compose_table,
                    self.composable_pairs):
            arr.setflags(write=False)

    # -- basic queries ---------------------------------------------------

    def is_unit(self, gamma: int) -> bool:
        return gamma in self._unit_set

    def composable(self, alpha: int, beta: int) -> bool:
        return self.compose_table[alpha, beta] != NO_COMPOSE

    def compose(self, alpha: int, beta: int) -> int:
        prod = int(self.compose_table[alpha, beta])
        if prod == NO_COMPOSE:
            raise ComposabilityMismatch(alpha, beta, "not composable")
        return prod

    def inv(self, gamma: int) -> int:
        return int(self.inverse[gamma])

    def arrows_by_source(self, x: int) -> np.ndarray:
        return self._by_source[x]

    def arrows_by_range(self, x: int) -> np.ndarray:
        return self._by_range[x]

    def composable_triples(self):
        """Yield every triple (a, b, c) with both products defined."""
        for a, b in self.composable_pairs:
            for c in self._by_range[int(self.source[b])]:
                yield int(a), int(b), int(c)

    def same_tables(self, other: "FiniteGroupoid") -> bool:
        return (self.n_arrows == other.n_arrows
                and self.units == other.units
                and np.array_equal(self.range, other.range)
                and np.array_equal(self.source, other.source)
                and np.array_equal(self.inverse, other.inverse)
                and np.array_equal(self.compose_table, other.compose_table))

    def orbits(self) -> list[set[int]]:
        """Partition of the unit space into orbits under the arrows."""
        parent = {x: x for x in self.units}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for g in range(self.n_arrows):
            a, b = find(int(self.range[g])), find(int(self.source[g]))
            if a != b:
                parent[a] = b
        groups: dict[int, set[int]] = {}
        for x in self.units:
            groups.setdefault(find(x), set()).add(x)
        return list(groups.values())

    def is_transitive(self) -> bool:
        return len(self.orbits()) == 1

    def is_principal(self) -> bool:
        """No non-unit arrow loops at a unit."""
        for g in range(self.n_arrows):
            if not self.is_unit(g) and self.range[g] == self.source[g]:
                return False
        return True

    def __repr__(self) -> str:
        return f"FiniteGroupoid({self.n_arrows} arrows, {len(self.units)} units)"


def _compose_as_table(n: int, compose) -> np.ndarray:
    table = np.full((n, n), NO_COMPOSE, dtype=np.int64)
    if isinstance(compose, np.ndarray) and compose.shape == (n, n):
        return compose.astype(np.int64)
    if isinstance(compose, dict):
        items = [(a, b, c) for (a, b), c in compose.items()]
    else:
        items = [tuple(t) for t in compose]
    for a, b, c in items:
        table[int(a), int(b)] = int(c)
    return table


def validate_groupoid(units, range_map, source_map, inverse_map, compose) -> FiniteGroupoid:
    """Check every groupoid axiom on the raw tables; raise on the first violation.

    ``compose`` may be a dict ``{(a, b): c}``, a list of triples ``[a, b, c]``,
    or a full ``(n, n)`` table with ``-1`` marking non-composable pairs.
    Violations raise :class:`BadUnit`, :class:`BadInverse`,
    :class:`ComposabilityMismatch` or :class:`NonAssociative` with witnesses.
    """
    rng = np.asarray(range_map, dtype=np.int64)
    src = np.asarray(source_map, dtype=np.int64)
    inv = np.asarray(inverse_map, dtype=np.int64)
    n = rng.shape[0]
    if n == 0:
        raise ValueError("a groupoid needs at least one arrow")
    if src.shape != (n,) or inv.shape != (n,):
        raise ValueError("range, source and inverse tables differ in length")
    units = sorted(int(u) for u in units)
    if not units:
        raise ValueError("a groupoid needs at least one unit")
    unit_set = set(units)
    for name, arr in (("range", rng), ("source", src), ("inverse", inv)):
        if arr.min() < 0 or arr.max() >= n:
            raise ValueError(f"{name} table has out-of-range entries")
    if any(u < 0 or u >= n for u in unit_set):
        raise ValueError("unit indices out of range")

    table = _compose_as_table(n, compose)
    if table.shape != (n, n):
        raise ValueError("compose table has the wrong shape")
    defined = table != NO_COMPOSE
    if table[defined].size and (table[defined].min() < 0 or table[defined].max() >= n):
        raise ValueError("compose table has out-of-range entries")

    # units are fixed by range and source, and every endpoint is a unit
    for x in units:
        if rng[x] != x or src[x] != x:
            raise BadUnit(x, "range or source does not fix the unit")
    for g in range(n):
        if int(rng[g]) not in unit_set:
            raise BadUnit(int(rng[g]), f"range of arrow {g} is not a unit")
        if int(src[g]) not in unit_set:
            raise BadUnit(int(src[g]), f"source of arrow {g} is not a unit")

    # composition defined exactly on matching source/range, with consistent endpoints
    should = src[:, None] == rng[None, :]
    bad = np.argwhere(defined != should)
    if bad.size:
        a, b = (int(v) for v in bad[0])
        state = "defined off the composable pairs" if defined[a, b] else \
            "undefined on a composable pair"
        raise ComposabilityMismatch(a, b, state)
    pairs = np.argwhere(defined)
    for a, b in pairs:
        c = table[a, b]
        if rng[c] != rng[a] or src[c] != src[b]:
            raise ComposabilityMismatch(int(a), int(b),
                                        "product has inconsistent range or source")

    # unit arrows act as identities
    for g in range(n):
        if table[rng[g], g] != g:
            raise BadUnit(int(rng[g]), f"does not act as left identity on arrow {g}")
        if table[g, src[g]] != g:
            raise BadUnit(int(src[g]), f"does not act as right identity on arrow {g}")

    # inverses
    for g in range(n):
        gi = int(inv[g])
        if inv[gi] != g or rng[gi] != src[g] or src[gi] != rng[g]:
            raise BadInverse(g, "inverse table is not an involution exchanging endpoints")
        if table[g, gi] != rng[g] or table[gi, g] != src[g]:
            raise BadInverse(g, "composition with the inverse misses the unit")

    # associativity, exhaustively over composable triples
    by_range = {x: np.flatnonzero(rng == x) for x in units}
    for a, b in pairs:
        cs = by_range[int(src[b])]
        if cs.size == 0:
            continue
        left = table[table[a, b], cs]
        right = table[a, table[b, cs]]
        mism = np.flatnonzero(left != right)
        if mism.size:
            raise NonAssociative(int(a), int(b), int(cs[mism[0]]))

    return FiniteGroupoid(units, rng, src, inv, table, _validated=True)


# -- standard constructions ---------------------------------------------------

def trivial_groupoid(n_points: int) -> FiniteGroupoid:
    """Groupoid that is all units: n points, no other arrows."""
    if n_points < 1:
        raise ValueError("need at least one point")
    idx = np.arange(n_points)
    compose = {(i, i): i for i in range(n_points)}
    return validate_groupoid(idx, idx, idx, idx, compose)


def delta() -> FiniteGroupoid:
    """The transitive equivalence relation on two points.

    Arrow indices: 0 and 1 are the units, 2 is the arrow from 0 to 1, and 3 its
    inverse.
    """
    rng = [0, 1, 1, 0]
    src = [0, 1, 0, 1]
    inv = [0, 1, 3, 2]
    compose = {(0, 0): 0, (1, 1): 1, (2, 0): 2, (1, 2): 2, (3, 1): 3,
               (0, 3): 3, (2, 3): 1, (3, 2): 0}
    return validate_groupoid([0, 1], rng, src, inv, compose)


DELTA_UNIT_0, DELTA_UNIT_1, DELTA_ARROW, DELTA_ARROW_INV = 0, 1, 2, 3


def from_group(table) -> FiniteGroupoid:
    """Groupoid with one unit from a finite group multiplication table."""
    t = np.asarray(table, dtype=np.int64)
    n = t.shape[0]
    if t.shape != (n, n) or n == 0:
        raise NotAGroup("table is not a nonempty square matrix")
    if t.min() < 0 or t.max() >= n:
        raise NotAGroup("table entries out of range")
    idx = np.arange(n)
    identity = None
    for e in range(n):
        if np.array_equal(t[e], idx) and np.array_equal(t[:, e], idx):
            identity = e
            break
    if identity is None:
        raise NotAGroup("no two-sided identity")
    inv = np.full(n, -1, dtype=np.int64)
    for a in range(n):
        hits = np.flatnonzero((t[a] == identity) & (t[:, a] == identity))
        if hits.size == 0:
            raise NotAGroup(f"element {a} has no inverse")
        inv[a] = hits[0]
    left, right = t[t], t[:, t]  # left[a,b,c] = t[t[a,b],c]; right[a,b,c] = t[a,t[b,c]]
    if not np.array_equal(left, right):
        a, b, c = (int(v) for v in np.argwhere(left != right)[0])
        raise NotAGroup(f"not associative at ({a}, {b}, {c})")
    e = identity
    rng = np.full(n, e, dtype=np.int64)
    return validate_groupoid([e], rng, rng, inv, t.copy())


def cyclic_group_table(n: int) -> np.ndarray:
    """Multiplication table of Z/n (element i is the residue i)."""
    if n < 1:
        raise ValueError("order must be positive")
    i = np.arange(n)
    return (i[:, None] + i[None, :]) % n


def klein_four_table() -> np.ndarray:
    """Multiplication table of Z/2 x Z/2 with elements encoded as 2*a + b."""
    t = np.zeros((4, 4), dtype=np.int64)
    for x in range(4):
        for y in range(4):
            t[x, y] = (((x >> 1) ^ (y >> 1)) << 1) | ((x & 1) ^ (y & 1))
    return t


def pair_groupoid(n_points: int) -> FiniteGroupoid:
    """Transitive equivalence relation on n points; arrow x*n + y runs y -> x."""
    if n_points < 1:
        raise ValueError("need at least one point")
    n = n_points
    xs, ys = np.divmod(np.arange(n * n), n)
    rng = xs * n + xs
    src = ys * n + ys
    inv = ys * n + xs
    compose = {}
    for x in range(n):
        for y in range(n):
            for z in range(n):
                compose[(x * n + y, y * n + z)] = x * n + z
    return validate_groupoid([x * n + x for x in range(n)], rng, src, inv, compose)


@dataclass(frozen=True)
class GroupoidMorphism:
    """Structure-preserving arrow map; construct via :func:`morphism`."""

    domain: FiniteGroupoid
    codomain: FiniteGroupoid
    map: np.ndarray

    def __call__(self, gamma: int) -> int:
        return int(self.map[gamma])

    def preimage(self, arrows) -> list[int]:
        wanted = set(int(a) for a in arrows)
        return [g for g in range(self.domain.n_arrows) if int(self.map[g]) in wanted]


def morphism(domain: FiniteGroupoid, codomain: FiniteGroupoid, arrow_map) -> GroupoidMorphism:
    """Validate that the map commutes with all structure; raise MorphismInvalid."""
    m = np.asarray(arrow_map, dtype=np.int64)
    if m.shape != (domain.n_arrows,):
        raise MorphismInvalid("arrow map has the wrong length")
    if m.min() < 0 or m.max() >= codomain.n_arrows:
        raise MorphismInvalid("arrow map has out-of-range values")
    for x in domain.units:
        if not codomain.is_unit(int(m[x])):
            raise MorphismInvalid(f"unit {x} is not sent to a unit", arrow=x)
    for g in range(domain.n_arrows):
        if int(m[domain.range[g]]) != int(codomain.range[m[g]]) or \
           int(m[domain.source[g]]) != int(codomain.source[m[g]]):
            raise MorphismInvalid(f"range/source squares do not commute at arrow {g}",
                                  arrow=g)
        if int(m[domain.inverse[g]]) != int(codomain.inverse[m[g]]):
            raise MorphismInvalid(f"inverse squares do not commute at arrow {g}", arrow=g)
    for a, b in domain.composable_pairs:
        if int(m[domain.compose_table[a, b]]) != \
           int(codomain.compose_table[m[a], m[b]]):
            raise MorphismInvalid(
                f"map is not multiplicative on the pair ({int(a)}, {int(b)})", arrow=int(a))
    m = m.copy()
    m.setflags(write=False)
    return GroupoidMorphism(domain, codomain, m)


def identity_morphism(g: FiniteGroupoid) -> GroupoidMorphism:
    return morphism(g, g, np.arange(g.n_arrows))


def product_with_delta(g: FiniteGroupoid) -> tuple[FiniteGroupoid, GroupoidMorphism]:
    """Product groupoid with the two-point transitive relation, plus the
    projection morphism onto the second factor.

    Arrow ``(gamma, d)`` is encoded as ``gamma * 4 + d`` with ``d`` a
    :func:`delta` arrow index.
    """
    d = delta()
    n = g.n_arrows * 4

    def enc(a: int, b: int) -> int:
        return a * 4 + b

    rng = np.empty(n, dtype=np.int64)
    src = np.empty(n, dtype=np.int64)
    inv = np.empty(n, dtype=np.int64)
    units = []
    compose = {}
    for a in range(g.n_arrows):
        for b in range(4):
            k = enc(a, b)
            rng[k] = enc(int(g.range[a]), int(d.range[b]))
            src[k] = enc(int(g.source[a]), int(d.source[b]))
            inv[k] = enc(int(g.inverse[a]), int(d.inverse[b]))
            if g.is_unit(a) and d.is_unit(b):
                units.append(k)
    for a1, a2 in g.composable_pairs:
        for b1, b2 in d.composable_pairs:
            compose[(enc(int(a1), int(b1)), enc(int(a2), int(b2)))] = \
                enc(int(g.compose_table[a1, a2]), int(d.compose_table[b1, b2]))
    prod = validate_groupoid(units, rng, src, inv, compose)
    proj = morphism(prod, d, np.tile(np.arange(4), g.n_arrows))
    return prod, proj


def subgroupoid(g: FiniteGroupoid, members) -> tuple[FiniteGroupoid, GroupoidMorphism]:
    """Subgroupoid on the given arrows, with its inclusion morphism.

    The subset must contain the endpoint units of its members and be closed
    under inverse and composition; otherwise :class:`NotClosed` is raised with
    a witness.
    """
    subset = sorted(set(int(a) for a in members))
    if not subset:
        raise NotClosed((), "empty arrow subset")
    in_sub = set(subset)
    for a in subset:
        if a < 0 or a >= g.n_arrows:
            raise ValueError(f"arrow {a} is not in the parent groupoid")
        if int(g.inverse[a]) not in in_sub:
            raise NotClosed((a, int(g.inverse[a])), "inverse missing from subset")
        for x in (int(g.range[a]), int(g.source[a])):
            if x not in in_sub:
                raise NotClosed((a, x), "endpoint unit missing from subset")
    for a in subset:
        for b in subset:
            c = int(g.compose_table[a, b])
            if c != NO_COMPOSE and c not in in_sub:
                raise NotClosed((a, b), "composition leaves the subset")

    new_of_old = {old: new for new, old in enumerate(subset)}
    rng = [new_of_old[int(g.range[a])] for a in subset]
    src = [new_of_old[int(g.source[a])] for a in subset]
    inv = [new_of_old[int(g.inverse[a])] for a in subset]
    units = [new_of_old[x] for x in g.units if x in in_sub]
    compose = {}
    for a in subset:
        for b in subset:
            c = int(g.compose_table[a, b])
            if c != NO_COMPOSE:
                compose[(new_of_old[a], new_of_old[b])] = new_of_old[c]
    sub = validate_groupoid(units, rng, src, inv, compose)
    incl = morphism(sub, g, np.asarray(subset, dtype=np.int64))
    return sub, incl


@dataclass(frozen=True)
class ArrowSubset:
    """A subset of the arrows of a groupoid."""

    parent: FiniteGroupoid
    members: tuple[int, ...]

    def __post_init__(self):
        for a in self.members:
            if a < 0 or a >= self.parent.n_arrows:
                raise ValueError(f"arrow {a} is not in the parent groupoid")


def is_gamma_set(subset: ArrowSubset) -> bool:
    """True when range and source are both injective on the subset."""
    g = subset.parent
    rs = [int(g.range[a]) for a in subset.members]
    ss = [int(g.source[a]) for a in subset.members]
    return len(set(rs)) == len(rs) and len(set(ss)) == len(ss)


def is_full_morphism(phi: GroupoidMorphism) -> bool:
    """Every domain unit admits an arrow with that source mapping off the units.

    The codomain must be the two-point transitive groupoid :func:`delta`.
    """
    if not phi.codomain.same_tables(delta()):
        raise MorphismInvalid("fullness is defined for morphisms onto the "
                              "two-point transitive groupoid")
    off_units = (DELTA_ARROW, DELTA_ARROW_INV)
    for x in phi.domain.units:
        arrows = phi.domain.arrows_by_source(x)
        if not any(int(phi.map[a]) in off_units for a in arrows):
            return False
    return True


def find_isomorphism(g: FiniteGroupoid, h: FiniteGroupoid) -> np.ndarray | None:
    """Search for a groupoid isomorphism g -> h; return the arrow map or None.

    Brute force over unit bijections with backtracking on arrows; intended for
    the small groupoids used in tests.
    """
    if g.n_arrows != h.n_arrows or len(g.units) != len(h.units):
        return None
    non_units = [a for a in range(g.n_arrows) if not g.is_unit(a)]
    for unit_perm in permutations(h.units):
        m = np.full(g.n_arrows, -1, dtype=np.int64)
        for x, y in zip(g.units, unit_perm):
            m[x] = y

        def extend(k: int) -> bool:
            if k == len(non_units):
                return True
            a = non_units[k]
            if m[a] != -1:
                return extend(k + 1)
            want_r, want_s = int(m[g.range[a]]), int(m[g.source[a]])
            used = set(int(v) for v in m if v != -1)
            for b in range(h.n_arrows):
                if b in used or h.is_unit(b):
                    continue
                if int(h.range[b]) != want_r or int(h.source[b]) != want_s:
                    continue
                ai = int(g.inverse[a])
                if m[ai] != -1 and int(m[ai]) != int(h.inverse[b]):
                    continue
                m[a] = b
                if m[ai] == -1:
                    m[ai] = int(h.inverse[b])
                    placed_inv = True
                else:
                    placed_inv = False
                ok = _respects_compose(g, h, m) and extend(k + 1)
                if ok:
                    return True
                m[a] = -1
                if placed_inv:
                    m[ai] = -1
            return False

        if extend(0):
            try:
                morphism(g, h, m)
            except MorphismInvalid:
                continue
            return m
    return None


def _respects_compose(g: FiniteGroupoid, h: FiniteGroupoid, partial: np.ndarray) -> bool:
    for a, b in g.composable_pairs:
        c = g.compose_table[a, b]
        if partial[a] == -1 or partial[b] == -1 or partial[c] == -1:
            continue
        if int(h.compose_table[partial[a], partial[b]]) != int(partial[c]):
            return False
    return True
