"""Equivalence theories, their bounded expansions, valuation projection, and
the threshold computation that justifies working at a finite array size.

An equivalence theory is a set of scalar formulas over the scalar variables
and array lengths, plus indexed formula-set families whose range predicates
are monotone in the lengths.  Expanding at a bound b instantiates lengths in
the scalars and enumerates the finitely many index tuples of each family.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import formula as F
from . import solver as S
from .formula import (INT, Behavior, Cmp, IntLit, Length, Quant, Valuation,
                      Var, VariableDecl)


class EquivalenceError(Exception):
    pass


@dataclass(frozen=True)
class IndexedFamily:
    body: F.Formula          # over scalars, arrays, and the dummies
    dummies: tuple           # tuple[VariableDecl] with phase dummy
    range_pred: F.Formula    # over lengths and the dummies; conjunction of
                             # linear comparisons

    def __post_init__(self):
        for d in self.dummies:
            if d.phase != F.PHASE_DUMMY or d.sort != INT:
                raise EquivalenceError(f"family dummy {d.name} must be a dummy Int")


@dataclass(frozen=True)
class EquivalenceTheory:
    scalars: tuple           # tuple[F.Formula]
    families: tuple          # tuple[IndexedFamily]
    decls: tuple             # tuple[VariableDecl]: the behavior variables

    @property
    def arrays(self):
        return tuple(d.name for d in self.decls if d.sort == F.ARRAY_INT)


@dataclass(frozen=True)
class BoundedTheory:
    source: EquivalenceTheory
    bound: int
    scalars: tuple           # instantiated scalar formulas, source order
    indexed: tuple           # flattened family instances, family-major then
                             # lexicographic index order

    @property
    def formulas(self):
        return self.scalars + self.indexed


@dataclass(frozen=True)
class ThresholdResult:
    theta: int
    checked_up_to: int
    verdicts: dict  # theta' -> "Valid" | "Invalid" | "Unknown"


class ThresholdExhausted(EquivalenceError):
    def __init__(self, verdicts):
        super().__init__(f"no valid threshold found; verdicts: {verdicts}")
        self.verdicts = verdicts


# ---------------------------------------------------------------------------
# bounded expansion

def _subst_lengths(f: F.Formula, value: F.Term) -> F.Formula:
    """Replace every |a| term (any array) by the given term."""
    def go_t(t):
        if isinstance(t, Length):
            return value
        if isinstance(t, F.Add):
            return F.Add(go_t(t.lhs), go_t(t.rhs))
        if isinstance(t, F.Sub):
            return F.Sub(go_t(t.lhs), go_t(t.rhs))
        if isinstance(t, F.Mul):
            return F.Mul(t.coeff, go_t(t.term))
        if isinstance(t, F.Select):
            return F.Select(t.array, go_t(t.index))
        return t

    def go(g):
        if isinstance(g, Cmp):
            return Cmp(g.op, go_t(g.lhs), go_t(g.rhs))
        if isinstance(g, F.Not):
            return F.Not(go(g.arg))
        if isinstance(g, F.And):
            return F.And(tuple(go(x) for x in g.args))
        if isinstance(g, F.Or):
            return F.Or(tuple(go(x) for x in g.args))
        if isinstance(g, F.Implies):
            return F.Implies(go(g.lhs), go(g.rhs))
        if isinstance(g, F.Iff):
            return F.Iff(go(g.lhs), go(g.rhs))
        if isinstance(g, Quant):
            return Quant(g.kind, g.vars, go(g.body))
        return g

    return go(f)


def _range_conjuncts(r: F.Formula):
    if isinstance(r, F.And):
        out = []
        for g in r.args:
            out.extend(_range_conjuncts(g))
        return out
    return [r]


def _dummy_box(fam: IndexedFamily, b: int):
    """Ground lower/upper bounds per dummy, extracted syntactically from the
    range conjuncts.  Rejects ranges that leave a dummy unbounded."""
    lo = {d.name: None for d in fam.dummies}
    hi = {d.name: None for d in fam.dummies}

    def ground(t):
        t = F.fold_ground(_subst_term_lengths(t, b))
        return t.value if isinstance(t, IntLit) else None

    for atom in _range_conjuncts(fam.range_pred):
        if not isinstance(atom, Cmp) or atom.op not in ("<=", "<"):
            continue
        strict = atom.op == "<"
        if isinstance(atom.rhs, Var) and atom.rhs.name in lo:
            v = ground(atom.lhs)
            if v is not None:
                bnd = v + 1 if strict else v
                cur = lo[atom.rhs.name]
                lo[atom.rhs.name] = bnd if cur is None else max(cur, bnd)
        if isinstance(atom.lhs, Var) and atom.lhs.name in hi:
            v = ground(atom.rhs)
            if v is not None:
                bnd = v - 1 if strict else v
                cur = hi[atom.lhs.name]
                hi[atom.lhs.name] = bnd if cur is None else min(cur, bnd)
    for name in lo:
        if lo[name] is None or hi[name] is None:
            raise EquivalenceError(
                f"range does not bound dummy {name!r}: "
                f"{F.pretty(fam.range_pred)}")
    return [(d.name, lo[d.name], hi[d.name]) for d in fam.dummies]


def _subst_term_lengths(t: F.Term, b: int) -> F.Term:
    if isinstance(t, Length):
        return IntLit(b)
    if isinstance(t, F.Add):
        return F.Add(_subst_term_lengths(t.lhs, b), _subst_term_lengths(t.rhs, b))
    if isinstance(t, F.Sub):
        return F.Sub(_subst_term_lengths(t.lhs, b), _subst_term_lengths(t.rhs, b))
    if isinstance(t, F.Mul):
        return F.Mul(t.coeff, _subst_term_lengths(t.term, b))
    return t


def family_instances(fam: IndexedFamily, b: int):
    """Instance formulas f(z̄, a, v̄) for all v̄ with r(b, v̄), in lexicographic
    v̄ order."""
    box = _dummy_box(fam, b)
    names = [n for n, _, _ in box]
    ranges = [range(lo, hi + 1) for _, lo, hi in box]
    range_at_b = _subst_lengths(fam.range_pred, IntLit(b))
    out = []
    for tup in itertools.product(*ranges):
        env = Behavior(dict(zip(names, tup)))
        if F.eval_formula(range_at_b, env, max(b, 1)):
            inst = F.subst(fam.body, {n: IntLit(v) for n, v in zip(names, tup)})
            out.append(F.fold_formula(inst))
    return out


def expand_bounded(e: EquivalenceTheory, b: int) -> BoundedTheory:
    """The finite theory at bound b: scalars with lengths instantiated to b,
    plus every family instance whose index tuple satisfies the range."""
    if b < 1:
        raise EquivalenceError("bound must be positive")
    scalars = tuple(F.fold_formula(_subst_lengths(g, IntLit(b)))
                    for g in e.scalars)
    if len(set(scalars)) != len(scalars):
        raise EquivalenceError("scalar formulas collide after instantiation")
    seen = set(scalars)
    indexed = []
    for fam in e.families:
        for inst in family_instances(fam, b):
            if inst not in seen:
                seen.add(inst)
                indexed.append(inst)
    return BoundedTheory(e, b, scalars, tuple(indexed))


# ---------------------------------------------------------------------------
# monotonicity of range predicates

def verify_monotone(e: EquivalenceTheory, cfg: S.SolverConfig | None = None):
    """One validity query per family: growing the bound can only grow the
    satisfying index set.  Returns the list of offending families (empty when
    all are monotone)."""
    bad = []
    for k, fam in enumerate(e.families):
        b1, b2 = Var("_b1"), Var("_b2")
        r1 = _subst_lengths(fam.range_pred, b1)
        r2 = _subst_lengths(fam.range_pred, b2)
        claim = F.Implies(F.conj([Cmp("<=", b1, b2), r1]), r2)
        decls = [VariableDecl("_b1", INT), VariableDecl("_b2", INT)]
        decls += [VariableDecl(d.name, INT) for d in fam.dummies]
        verdict = S.check_validity(claim, decls, cfg)
        if not isinstance(verdict, S.Valid):
            bad.append((k, fam, verdict))
    return bad


# ---------------------------------------------------------------------------
# projection

def project_valuation(bt_b: BoundedTheory, v: Valuation, theta: int):
    """V_b restricted to the bounded theory at theta: scalars map by family
    position (same formula, lengths reinstantiated), indexed instances map by
    structural identity."""
    if theta > bt_b.bound:
        raise EquivalenceError("theta must be <= the source bound")
    if theta == bt_b.bound:
        return bt_b, v
    bt_t = expand_bounded(bt_b.source, theta)
    bits = []
    by_formula = dict(zip(bt_b.formulas, v.bits))
    for j, g in enumerate(bt_t.scalars):
        bits.append(v.bits[j])  # scalar order is the source order on both sides
    for inst in bt_t.indexed:
        if inst not in by_formula:
            raise EquivalenceError(
                f"instance missing at larger bound: {F.pretty(inst)}")
        bits.append(by_formula[inst])
    return bt_t, Valuation(bt_t.formulas, bits)


# ---------------------------------------------------------------------------
# threshold formula Th(theta)

def _ground_cells(formulas):
    """Collect ground array reads (array, index literal) across formulas."""
    cells = []

    def go_t(t):
        if isinstance(t, F.Select):
            idx = F.fold_ground(t.index)
            if not isinstance(idx, IntLit):
                raise EquivalenceError(
                    f"non-ground array read in bounded instance: {F.pretty(Cmp('=', t, t))}")
            key = (t.array, idx.value)
            if key not in cells:
                cells.append(key)
        elif isinstance(t, (F.Add, F.Sub)):
            go_t(t.lhs)
            go_t(t.rhs)
        elif isinstance(t, F.Mul):
            go_t(t.term)

    def go(g):
        if isinstance(g, Cmp):
            go_t(g.lhs)
            go_t(g.rhs)
        elif isinstance(g, F.Not):
            go(g.arg)
        elif isinstance(g, (F.And, F.Or)):
            for x in g.args:
                go(x)
        elif isinstance(g, (F.Implies, F.Iff)):
            go(g.lhs)
            go(g.rhs)
        elif isinstance(g, Quant):
            go(g.body)

    for f in formulas:
        go(f)
    return cells


def _cellify(f: F.Formula, cellmap) -> F.Formula:
    """Replace ground reads by their cell variables (arrays are existentially
    quantified per side of Th, so cells are plain integers)."""
    def go_t(t):
        if isinstance(t, F.Select):
            idx = F.fold_ground(t.index)
            return Var(cellmap[(t.array, idx.value)])
        if isinstance(t, F.Add):
            return F.Add(go_t(t.lhs), go_t(t.rhs))
        if isinstance(t, F.Sub):
            return F.Sub(go_t(t.lhs), go_t(t.rhs))
        if isinstance(t, F.Mul):
            return F.Mul(t.coeff, go_t(t.term))
        return t

    def go(g):
        if isinstance(g, Cmp):
            return Cmp(g.op, go_t(g.lhs), go_t(g.rhs))
        if isinstance(g, F.Not):
            return F.Not(go(g.arg))
        if isinstance(g, F.And):
            return F.And(tuple(go(x) for x in g.args))
        if isinstance(g, F.Or):
            return F.Or(tuple(go(x) for x in g.args))
        if isinstance(g, (F.Implies,)):
            return F.Implies(go(g.lhs), go(g.rhs))
        if isinstance(g, (F.Iff,)):
            return F.Iff(go(g.lhs), go(g.rhs))
        return g

    return go(f)


def _scalar_vars(e: EquivalenceTheory):
    return [d for d in e.decls
            if d.sort != F.ARRAY_INT and d.phase != F.PHASE_DUMMY]


def build_threshold_formula(e: EquivalenceTheory, theta: int,
                            symbolic_bound: bool = True,
                            at_bound: int | None = None) -> F.Formula:
    """The threshold check at theta, closed over all valuations with boolean
    selector variables.

    For every bound b and every truth assignment (selectors) to the scalar
    family and to the indexed instances at theta: if some behavior at b
    realizes the scalar assignment (lengths read as b) together with the
    theta-instance assignment, then some behavior at theta realizes the same
    assignment with lengths read as theta.  Arrays only occur through reads
    at fixed indices below theta, so reads become fresh integer variables and
    the whole formula stays in linear arithmetic.

    With symbolic_bound=False the universal bound variable is fixed to
    `at_bound`, giving the manually-composed per-bound variant used for
    cross-validation.
    """
    if theta < 1:
        raise EquivalenceError("theta must be positive")
    for g in e.scalars:
        if _ground_cells([g]) or any(
                isinstance(x, F.Select) for x in _walk_terms(g)):
            raise EquivalenceError("scalar formulas must not read arrays")
    bt_theta = expand_bounded(e, theta)
    cells = _ground_cells(bt_theta.indexed)
    cellmap = {(a, i): f"_cell_{a}_{i}" for a, i in cells}

    sel_scal = [F.BoolVar(f"_s{j}") for j in range(len(e.scalars))]
    sel_inst = [F.BoolVar(f"_t{k}") for k in range(len(bt_theta.indexed))]

    zvars = _scalar_vars(e)
    inner_decls = tuple([VariableDecl(d.name, d.sort) for d in zvars]
                        + [VariableDecl(n, INT) for n in cellmap.values()])

    def side(length_term: F.Term) -> F.Formula:
        parts = []
        for j, g in enumerate(e.scalars):
            inst = _cellify(_subst_lengths(g, length_term), cellmap)
            parts.append(F.Iff(sel_scal[j], inst))
        for k, inst in enumerate(bt_theta.indexed):
            parts.append(F.Iff(sel_inst[k], _cellify(inst, cellmap)))
        return Quant("exists", inner_decls, F.conj(parts))

    bvar = Var("_b")
    lhs_len = bvar if symbolic_bound else IntLit(at_bound)
    lhs = side(lhs_len)
    rhs = side(IntLit(theta))

    sel_decls = tuple(VariableDecl(s.name, F.BOOL) for s in sel_scal + sel_inst)
    if symbolic_bound:
        outer = (VariableDecl("_b", INT),) + sel_decls
        body = F.Implies(F.conj([Cmp("<", IntLit(0), bvar), lhs]), rhs)
    else:
        if at_bound is None:
            raise EquivalenceError("at_bound required when bound is fixed")
        outer = sel_decls
        body = F.Implies(lhs, rhs)
    return Quant("forall", outer, body)


def _walk_terms(f: F.Formula):
    if isinstance(f, Cmp):
        stack = [f.lhs, f.rhs]
        while stack:
            t = stack.pop()
            yield t
            if isinstance(t, (F.Add, F.Sub)):
                stack += [t.lhs, t.rhs]
            elif isinstance(t, F.Mul):
                stack.append(t.term)
            elif isinstance(t, F.Select):
                stack.append(t.index)
    elif isinstance(f, F.Not):
        yield from _walk_terms(f.arg)
    elif isinstance(f, (F.And, F.Or)):
        for g in f.args:
            yield from _walk_terms(g)
    elif isinstance(f, (F.Implies, F.Iff)):
        yield from _walk_terms(f.lhs)
        yield from _walk_terms(f.rhs)
    elif isinstance(f, Quant):
        yield from _walk_terms(f.body)


def compute_threshold(e: EquivalenceTheory, theta_max: int,
                      cfg: S.SolverConfig | None = None) -> ThresholdResult:
    """Least theta <= theta_max whose threshold formula is valid, trying 1,
    2, ... in order.  Unknown solver verdicts count as not-valid for that
    theta; exhaustion raises with all verdicts recorded."""
    if theta_max < 1:
        raise EquivalenceError("theta_max must be positive")
    verdicts = {}
    for theta in range(1, theta_max + 1):
        th = build_threshold_formula(e, theta)
        verdict = S.check_validity(th, [], cfg)
        if isinstance(verdict, S.Valid):
            verdicts[theta] = "Valid"
            return ThresholdResult(theta, theta, verdicts)
        if isinstance(verdict, S.Invalid):
            verdicts[theta] = "Invalid"
        else:
            verdicts[theta] = "Unknown"
    raise ThresholdExhausted(verdicts)
