"""Explicit finite relations over algebra coordinates.

Relations hold element-id tuples and a per-coordinate algebra reference.
Membership speaks element ids throughout; positions never leak out of the
algebra layer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .algebra import (
    Algebra,
    Congruence,
    group_context,
    is_closed,
    quotient_algebra,
    wnu_closure,
)
from .errors import ArgumentError, InvariantError

# Cap on invariant-superset enumerations; desk-scale lattices are tiny.
DEFAULT_ENUM_CAP = 20_000


@dataclass(frozen=True)
class Relation:
    arity: int
    coords: tuple  # one Algebra per coordinate
    tuples: frozenset

    def __post_init__(self):
        if not isinstance(self.coords, tuple):
            object.__setattr__(self, "coords", tuple(self.coords))
        if not isinstance(self.tuples, frozenset):
            object.__setattr__(self, "tuples", frozenset(map(tuple, self.tuples)))
        if len(self.coords) != self.arity:
            raise ArgumentError("coordinate count must equal the arity")
        for t in self.tuples:
            if len(t) != self.arity:
                raise ArgumentError("tuple arity mismatch")
            for c, v in enumerate(t):
                if v not in self.coords[c].elements:
                    raise ArgumentError("tuple entry outside coordinate carrier")

    def sort_key(self):
        k = self.__dict__.get("_sort_key")
        if k is None:
            k = (self.arity, tuple(alg.elements for alg in self.coords),
                 tuple(sorted(self.tuples)))
            object.__setattr__(self, "_sort_key", k)
        return k

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.arity, self.coords, self.tuples))
            object.__setattr__(self, "_hash", h)
        return h

    def __eq__(self, other):
        if not isinstance(other, Relation):
            return NotImplemented
        return (self.arity == other.arity and self.coords == other.coords
                and self.tuples == other.tuples)

    @property
    def is_empty(self):
        return not self.tuples

    def space_size(self):
        out = 1
        for alg in self.coords:
            out *= alg.size
        return out

    @property
    def is_full(self):
        return len(self.tuples) == self.space_size()


def full_relation(coords) -> Relation:
    coords = tuple(coords)
    tuples = frozenset(itertools.product(*(alg.elements for alg in coords)))
    return Relation(len(coords), coords, tuples)


def is_invariant(rel: Relation) -> bool:
    return is_closed(rel.coords, rel.tuples)


def close_relation(coords, seed) -> Relation:
    coords = tuple(coords)
    return Relation(len(coords), coords, wnu_closure(coords, seed))


def project(rel: Relation, indices) -> Relation:
    """Projection onto the listed coordinates, in the listed order."""

    indices = list(indices)
    if not indices:
        raise ArgumentError("projection needs at least one coordinate")
    if len(set(indices)) != len(indices):
        raise ArgumentError("projection indices must be distinct")
    if any(i < 0 or i >= rel.arity for i in indices):
        raise ArgumentError("projection index out of range")
    coords = tuple(rel.coords[i] for i in indices)
    tuples = frozenset(tuple(t[i] for i in indices) for t in rel.tuples)
    return Relation(len(indices), coords, tuples)


def factorize(rel: Relation, congs) -> Relation:
    """Blockwise image of the relation under per-coordinate congruences.

    A block tuple belongs to the result iff its product meets the relation.
    Returns a relation over the quotient algebras; entries are block indices.
    """

    congs = list(congs)
    if len(congs) != rel.arity:
        raise ArgumentError("one congruence per coordinate required")
    quotients = []
    kernels = []
    for alg, cong in zip(rel.coords, congs):
        if set(cong.carrier) != set(alg.elements):
            raise InvariantError("congruence carrier mismatch")
        q, kmap = quotient_algebra(alg, cong)
        quotients.append(q)
        kernels.append(kmap)
    tuples = frozenset(
        tuple(kernels[c][t[c]] for c in range(rel.arity)) for t in rel.tuples
    )
    return Relation(rel.arity, tuple(quotients), tuples)


def is_subdirect(rel: Relation) -> bool:
    for c, alg in enumerate(rel.coords):
        if {t[c] for t in rel.tuples} != set(alg.elements):
            return False
    return True


def restrict_relation(rel: Relation, coords, domains) -> Relation:
    """Relation induced on restricted coordinate algebras; tuples filtered."""

    domains = [frozenset(d) for d in domains]
    tuples = frozenset(
        t for t in rel.tuples
        if all(t[c] in domains[c] for c in range(rel.arity))
    )
    return Relation(rel.arity, tuple(coords), tuples)


def _coordinate_dummy(rel: Relation, index) -> bool:
    """A coordinate is dummy iff the relation is (projection onto the rest)
    crossed with the full coordinate."""

    rest = [i for i in range(rel.arity) if i != index]
    if not rest:
        return rel.is_full
    proj = {tuple(t[i] for i in rest) for t in rel.tuples}
    want = len(proj) * rel.coords[index].size
    return len(rel.tuples) == want


def dummy_coordinates(rel: Relation):
    return tuple(i for i in range(rel.arity) if _coordinate_dummy(rel, i))


def _coset_supersets(rel: Relation, ctx):
    """Invariant supersets when every coordinate is an abelian sum: the
    cosets of subgroups above the base subgroup, enumerated bottom-up."""

    groups, maps = ctx
    r = rel.arity
    pos = [tuple(maps[c][t[c]] for c in range(r)) for t in sorted(rel.tuples)]
    t0 = pos[0]

    def padd(a, b):
        return tuple(groups[c].add[a[c]][b[c]] for c in range(r))

    def psub(a, b):
        return tuple(groups[c].sub(a[c], b[c]) for c in range(r))

    ident = tuple(g.identity for g in groups)
    base = {ident}
    frontier = [psub(t, t0) for t in pos[1:]]
    for g in frontier:
        if g not in base:
            base.add(g)
    pend = [g for g in base if g != ident]
    while pend:
        nxt = []
        for g in pend:
            for h in list(base):
                s = padd(g, h)
                if s not in base:
                    base.add(s)
                    nxt.append(s)
        pend = nxt
    space = list(itertools.product(*(range(alg.size) for alg in rel.coords)))
    found = {frozenset(base): base}
    frontier = [base]
    while frontier:
        nxt = []
        for sub in frontier:
            # extending by any d' in the coset d+sub yields the same subgroup
            coset_seen = set(sub)
            for d in space:
                if d in coset_seen:
                    continue
                coset_seen.update(padd(d, h) for h in sub)
                grown = set(sub)
                mult = d
                shifts = []
                while mult not in sub:
                    shifts.append(mult)
                    mult = padd(mult, d)
                for s in shifts:
                    grown.update(padd(s, h) for h in sub)
                key = frozenset(grown)
                if key not in found:
                    found[key] = grown
                    nxt.append(grown)
        frontier = nxt
    out = []
    for sub in found.values():
        if len(sub) == len(pos):
            continue
        tuples = frozenset(
            tuple(rel.coords[c].elements[v[c]] for c in range(r))
            for v in (padd(t0, h) for h in sub)
        )
        out.append(tuples)
    return out


@lru_cache(maxsize=65536)
def invariant_supersets(rel: Relation, cap=DEFAULT_ENUM_CAP):
    """All invariant relations strictly containing ``rel`` on its coordinates.

    Group-sum coordinates enumerate the subgroup lattice directly; otherwise
    an upward BFS closes (current ∪ {t}) for every absent tuple t and
    deduplicates.  Returns (tuple of Relations in canonical order, complete
    flag).
    """

    coords = rel.coords
    complete = True
    ctx = group_context(coords) if rel.tuples else None
    if ctx is not None:
        found = set(_coset_supersets(rel, ctx))
    else:
        space = list(itertools.product(*(alg.elements for alg in coords)))
        seen = {rel.tuples}
        frontier = [rel.tuples]
        found = set()
        while frontier:
            nxt = []
            for base in frontier:
                for t in space:
                    if t in base:
                        continue
                    closed = wnu_closure(coords, set(base) | {t})
                    if closed in seen:
                        continue
                    seen.add(closed)
                    found.add(closed)
                    nxt.append(closed)
                    if len(seen) > cap:
                        complete = False
                        nxt = []
                        frontier = []
                        break
                if not complete:
                    break
            frontier = nxt
    rels = sorted(
        (Relation(rel.arity, coords, ts) for ts in found),
        key=lambda r: (len(r.tuples), tuple(sorted(r.tuples))),
    )
    return tuple(rels), complete


@lru_cache(maxsize=65536)
def weaker_relations(rel: Relation, cap=DEFAULT_ENUM_CAP):
    """All strictly weaker dummy-free constraints on sub-scopes.

    Yields (coordinate index subset, Relation) pairs: every invariant
    relation without dummy coordinates that strictly contains the matching
    projection of ``rel`` and does not imply ``rel`` back.  Returns
    (tuple of pairs, complete flag).
    """

    out = []
    complete = True
    n = rel.arity
    subsets = []
    for size in range(1, n + 1):
        subsets.extend(itertools.combinations(range(n), size))
    for sub in subsets:
        proj = project(rel, sub)
        sups, comp = invariant_supersets(proj, cap)
        if not comp:
            complete = False
        # the projection itself is a candidate: strictness lives at the
        # constraint level, where dropping coordinates already weakens
        for cand in (proj,) + sups:
            if dummy_coordinates(cand):
                continue
            if _cylinder_implies(cand, sub, rel):
                continue
            out.append((sub, cand))
    return tuple(out), complete


def _cylinder_implies(cand: Relation, sub, rel: Relation) -> bool:
    """Whether the constraint (sub, cand) implies ``rel`` on the full scope,
    i.e. the cylinder of cand over the full coordinates sits inside rel."""

    for t in itertools.product(*(alg.elements for alg in rel.coords)):
        if tuple(t[i] for i in sub) in cand.tuples and t not in rel.tuples:
            return False
    return True
