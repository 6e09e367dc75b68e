"""Two-level (sum-of-products) minimization of synthesized DNF covers.

Cubes are tuples over {0, 1, DASH} positions, one per vocabulary clause.
Exact Quine-McCluskey with a Petrick-style cover search runs up to 16
literals; larger inputs fall back to a deterministic greedy expand/reduce.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations, product

from . import formula as F

DASH = 2

EXACT_LIMIT = 16
EXACT_HARD_LIMIT = 24
EXACT_CARE_LIMIT = 1 << 13  # care minterms exact QM will enumerate


@dataclass(frozen=True)
class CubeCover:
    n: int
    cubes: tuple  # tuple of cubes; cube = tuple over {0,1,DASH}, length n

    def __post_init__(self):
        for c in self.cubes:
            if len(c) != self.n:
                raise ValueError(f"cube length {len(c)} != {self.n}")
            if any(x not in (0, 1, DASH) for x in c):
                raise ValueError(f"bad cube entry in {c}")
        if len(set(self.cubes)) != len(self.cubes):
            raise ValueError("duplicate cubes")

    def __len__(self):
        return len(self.cubes)


def cover(n, cubes) -> CubeCover:
    return CubeCover(n, tuple(tuple(c) for c in cubes))


def cube_covers(c, m) -> bool:
    """Does cube c cover minterm (or finer cube) m?"""
    return all(ci == DASH or ci == mi for ci, mi in zip(c, m))


def cubes_overlap(a, b) -> bool:
    return all(x == DASH or y == DASH or x == y for x, y in zip(a, b))


def expand_cube(c):
    slots = [(0, 1) if x == DASH else (x,) for x in c]
    return [tuple(t) for t in product(*slots)]


def eval_cover(c: CubeCover, m) -> bool:
    return any(cube_covers(q, m) for q in c.cubes)


def _minterms(c: CubeCover):
    out = set()
    for q in c.cubes:
        out.update(expand_cube(q))
    return out


# ---------------------------------------------------------------------------
# exact Quine-McCluskey

def prime_implicants(n, care_minterms):
    """All prime implicants of the function that is 1 on care_minterms."""
    if not care_minterms:
        return []
    level = {m: False for m in care_minterms}  # cube -> merged?
    primes = set()
    while level:
        nxt = {}
        items = sorted(level)
        by_ones = {}
        for c in items:
            by_ones.setdefault(sum(1 for x in c if x == 1), []).append(c)
        for k in sorted(by_ones):
            for a in by_ones[k]:
                for b in by_ones.get(k + 1, ()):
                    merged = _merge(a, b)
                    if merged is not None:
                        level[a] = True
                        level[b] = True
                        nxt.setdefault(merged, False)
        for c, was_merged in level.items():
            if not was_merged:
                primes.add(c)
        level = nxt
    return sorted(primes)


def _merge(a, b):
    diff = -1
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            if x == DASH or y == DASH or diff >= 0:
                return None
            diff = i
    if diff < 0:
        return None
    return a[:diff] + (DASH,) + a[diff + 1:]


def _select_cover(primes, on_minterms):
    """Choose a minimal prime subset covering all on-minterms.

    Essential primes first, then exhaustive search on the residue when it is
    small, else greedy.  Ties break toward the lexicographically least cube
    list, so output is deterministic.
    """
    on = sorted(on_minterms)
    coverage = {m: frozenset(i for i, p in enumerate(primes) if cube_covers(p, m))
                for m in on}
    chosen = set()
    remaining = set(on)
    changed = True
    while changed:
        changed = False
        for m in sorted(remaining):
            opts = coverage[m] - set()
            live = [i for i in opts if i in chosen]
            if live:
                remaining.discard(m)
                changed = True
                continue
            if len(opts) == 1:
                chosen.add(next(iter(opts)))
                changed = True
        if changed:
            remaining = {m for m in remaining
                         if not (coverage[m] & chosen)}

    if remaining:
        cands = sorted({i for m in remaining for i in coverage[m]})
        best = None
        if len(cands) <= 20:
            for r in range(1, len(cands) + 1):
                hits = []
                for combo in combinations(cands, r):
                    s = set(combo)
                    if all(coverage[m] & s for m in remaining):
                        hits.append(tuple(sorted(combo)))
                if hits:
                    best = set(min(hits, key=lambda idxs: sorted(primes[i] for i in idxs)))
                    break
        if best is None:
            # greedy fallback for big residues
            best = set()
            rem = set(remaining)
            while rem:
                scored = sorted(
                    cands,
                    key=lambda i: (-len([m for m in rem if i in coverage[m]]),
                                   primes[i]))
                pick = scored[0]
                best.add(pick)
                rem = {m for m in rem if pick not in coverage[m]}
        chosen |= best

    picked = sorted(primes[i] for i in chosen)
    # drop redundant picks (can appear after essentials + search overlap)
    result = list(picked)
    for c in list(picked):
        rest = [q for q in result if q != c]
        if rest and all(any(cube_covers(q, m) for q in rest)
                        for m in on if cube_covers(c, m)):
            result = rest
    return result


def _minimize_exact(on: CubeCover, dc: CubeCover) -> CubeCover:
    on_m = _minterms(on)
    dc_m = _minterms(dc) - on_m
    primes = prime_implicants(on.n, sorted(on_m | dc_m))
    primes = [p for p in primes if any(cube_covers(p, m) for m in on_m)]
    picked = _select_cover(primes, on_m)
    return CubeCover(on.n, tuple(sorted(picked)))


# ---------------------------------------------------------------------------
# greedy expansion (large n)

def _cube_minus_cover(c, cubes):
    """Is cube c fully covered by the union of `cubes`?  Recursive splitting."""
    live = [q for q in cubes if cubes_overlap(c, q)]
    for q in live:
        if cube_covers(q, c):
            return True
    if not live:
        return False
    # split c on the first position where some overlapping cube is fixed
    for i, x in enumerate(c):
        if x != DASH:
            continue
        if any(q[i] != DASH for q in live):
            lo = c[:i] + (0,) + c[i + 1:]
            hi = c[:i] + (1,) + c[i + 1:]
            return (_cube_minus_cover(lo, live)
                    and _cube_minus_cover(hi, live))
    return False


def _minimize_greedy(on: CubeCover, dc: CubeCover) -> CubeCover:
    allowed = list(on.cubes) + list(dc.cubes)
    expanded = []
    for c in sorted(on.cubes):
        cur = c
        for i in range(on.n):
            if cur[i] == DASH:
                continue
            trial = cur[:i] + (DASH,) + cur[i + 1:]
            if _cube_minus_cover(trial, allowed):
                cur = trial
        if cur not in expanded:
            expanded.append(cur)
    # drop cubes made redundant by the others
    result = list(expanded)
    for c in list(expanded):
        rest = [q for q in result if q != c]
        if rest and _cube_minus_cover(c, rest):
            result = rest
    return CubeCover(on.n, tuple(sorted(result)))


# ---------------------------------------------------------------------------
# entry points

def minimize(on: CubeCover, dontcare: CubeCover | None = None,
             exact: bool | None = None) -> CubeCover:
    """Minimize the on-set cover modulo the dontcare-set.

    The result agrees with the input on every point outside the dontcare set
    and has at most as many cubes.  `exact=None` picks exact QM up to
    EXACT_LIMIT literals and greedy beyond; requesting exact above
    EXACT_HARD_LIMIT falls back to greedy with a warning.
    """
    dc = dontcare if dontcare is not None else CubeCover(on.n, ())
    if dc.n != on.n:
        raise ValueError("on-set and dontcare-set width mismatch")
    for c in on.cubes:
        for q in dc.cubes:
            if cubes_overlap(c, q):
                raise ValueError("on-set and dontcare-set overlap")
    if not on.cubes:
        return CubeCover(on.n, ())
    care = sum(1 << c.count(DASH) for c in on.cubes + dc.cubes)
    if exact is None:
        exact = on.n <= EXACT_LIMIT and care <= EXACT_CARE_LIMIT
    if exact and on.n > EXACT_HARD_LIMIT:
        warnings.warn(f"{on.n} literals: refusing exact minimization, "
                      f"falling back to greedy")
        exact = False
    if exact and care > (1 << 18):
        warnings.warn(f"{care} care minterms: exact minimization infeasible, "
                      f"falling back to greedy")
        exact = False
    if exact:
        out = _minimize_exact(on, dc)
    else:
        out = _minimize_greedy(on, dc)
    if len(out) > len(on):
        return on
    return out


def dnf_of_result(result) -> tuple:
    """Cube covers (on, dontcare) for a synthesis result.

    On-set: the accepted valuations.  Dontcare-set: valuations whose class is
    empty (unsatisfiable), which the synthesis loop recorded as eliminated
    cubes; empty classes may take either polarity.
    """
    n = len(result.vocabulary)
    on = cover(n, [tuple(1 if b else 0 for b in v.bits) for v in result.accepted])
    dc_cubes = []
    seen = set(on.cubes)
    for c in result.unsat_cubes:
        c = tuple(c)
        if c not in seen:
            seen.add(c)
            dc_cubes.append(c)
    return on, cover(n, dc_cubes)


def cover_to_formula(c: CubeCover, clauses) -> F.Formula:
    """Sum-of-products formula over the given clause list."""
    clauses = list(clauses)
    if len(clauses) != c.n:
        raise ValueError("clause count does not match cover width")
    disjuncts = []
    for q in c.cubes:
        lits = []
        for pos, x in enumerate(q):
            if x == DASH:
                continue
            lits.append(clauses[pos] if x == 1 else F.Not(clauses[pos]))
        disjuncts.append(F.conj(lits))
    return F.disj(disjuncts)


def to_pla(on: CubeCover, dc: CubeCover | None = None) -> str:
    """PLA-style text dump (.i/.o/.p headers) for debugging."""
    sym = {0: "0", 1: "1", DASH: "-"}
    lines = [f".i {on.n}", ".o 1"]
    rows = [("".join(sym[x] for x in c), "1") for c in on.cubes]
    if dc is not None:
        rows += [("".join(sym[x] for x in c), "-") for c in dc.cubes]
    lines.append(f".p {len(rows)}")
    lines += [f"{bits} {out}" for bits, out in rows]
    lines.append(".e")
    return "\n".join(lines) + "\n"
