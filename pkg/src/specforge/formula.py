"""Sorted first-order formula ASTs, behaviors, valuations, and their semantics.

Everything here is an immutable value: terms and formulas are frozen
dataclasses, behaviors wrap a read-only mapping, valuations pair a fixed
formula tuple with a truth vector.  All of the rest of the system moves these
values around; nothing mutates them after construction.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Union


# ---------------------------------------------------------------------------
# sorts and variable declarations

@dataclass(frozen=True)
class Sort:
    kind: str  # "Bool" | "Int" | "ArrayOfInt"

    def __str__(self):
        return self.kind


BOOL = Sort("Bool")
INT = Sort("Int")
ARRAY_INT = Sort("ArrayOfInt")

PHASE_INPUT = "input"
PHASE_OUTPUT = "output"
PHASE_DUMMY = "dummy"


@dataclass(frozen=True)
class VariableDecl:
    name: str
    sort: Sort
    phase: str = PHASE_INPUT

    def __post_init__(self):
        if self.phase not in (PHASE_INPUT, PHASE_OUTPUT, PHASE_DUMMY):
            raise ValueError(f"bad phase {self.phase!r} for {self.name}")


class FormulaError(Exception):
    """Structural error in a term or formula (unbound variable, bad sort)."""


# ---------------------------------------------------------------------------
# terms

@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Add:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class Sub:
    lhs: "Term"
    rhs: "Term"


@dataclass(frozen=True)
class Mul:
    coeff: int  # multiplication is restricted to literal * term
    term: "Term"


@dataclass(frozen=True)
class Select:
    array: str
    index: "Term"


@dataclass(frozen=True)
class Length:
    array: str


Term = Union[IntLit, Var, Add, Sub, Mul, Select, Length]


# ---------------------------------------------------------------------------
# formulas

@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class BoolVar:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Iff:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Cmp:
    op: str  # "<=" | "<" | "="
    lhs: Term
    rhs: Term

    def __post_init__(self):
        if self.op not in ("<=", "<", "="):
            raise ValueError(f"bad comparison op {self.op!r}")


@dataclass(frozen=True)
class Quant:
    kind: str  # "exists" | "forall"
    vars: tuple  # tuple[VariableDecl, ...]
    body: "Formula"

    def __post_init__(self):
        if self.kind not in ("exists", "forall"):
            raise ValueError(f"bad quantifier {self.kind!r}")


Formula = Union[BoolLit, BoolVar, Not, And, Or, Implies, Iff, Cmp, Quant]

TRUE = BoolLit(True)
FALSE = BoolLit(False)


def conj(args: Iterable) -> Formula:
    args = tuple(args)
    if not args:
        return TRUE
    if len(args) == 1:
        return args[0]
    return And(args)


def disj(args: Iterable) -> Formula:
    args = tuple(args)
    if not args:
        return FALSE
    if len(args) == 1:
        return args[0]
    return Or(args)


# ---------------------------------------------------------------------------
# behaviors

Value = Union[int, bool, tuple]


class Behavior:
    """Concrete values for a set of variables: ints, bools, and int arrays.

    Arrays are stored as tuples with an explicit (finite) length; there is no
    static length in the sort, only in the value.
    """

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, Value]):
        norm = {}
        for name, v in values.items():
            if isinstance(v, list):
                v = tuple(v)
            if isinstance(v, tuple):
                v = tuple(int(x) for x in v)
            elif isinstance(v, bool):
                pass
            elif isinstance(v, int):
                v = int(v)
            else:
                raise FormulaError(f"unsupported value for {name}: {v!r}")
            norm[name] = v
        object.__setattr__(self, "_values", norm)

    @property
    def values(self) -> dict:
        return dict(self._values)

    def __getitem__(self, name: str) -> Value:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def get(self, name, default=None):
        return self._values.get(name, default)

    def names(self):
        return self._values.keys()

    def restrict(self, names: Iterable[str]) -> "Behavior":
        keep = set(names)
        return Behavior({k: v for k, v in self._values.items() if k in keep})

    def merged(self, extra: Mapping[str, Value]) -> "Behavior":
        d = dict(self._values)
        d.update(extra)
        return Behavior(d)

    def __eq__(self, other):
        return isinstance(other, Behavior) and self._values == other._values

    def __hash__(self):
        return hash(tuple(sorted(self._values.items())))

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in sorted(self._values.items()))
        return f"Behavior({inner})"

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in self._values.items()}

    @staticmethod
    def from_json(d: Mapping) -> "Behavior":
        return Behavior({k: (tuple(v) if isinstance(v, list) else v)
                         for k, v in d.items()})


# ---------------------------------------------------------------------------
# evaluation (finite, total semantics)

OUT_OF_RANGE_DEFAULT = 0  # out-of-range array reads evaluate to this


def eval_term(t: Term, b: Behavior, bound: int) -> int:
    if isinstance(t, IntLit):
        return t.value
    if isinstance(t, Var):
        if t.name not in b:
            raise FormulaError(f"unbound variable {t.name!r}")
        v = b[t.name]
        if isinstance(v, (bool, tuple)):
            raise FormulaError(f"variable {t.name!r} is not an Int")
        return v
    if isinstance(t, Add):
        return eval_term(t.lhs, b, bound) + eval_term(t.rhs, b, bound)
    if isinstance(t, Sub):
        return eval_term(t.lhs, b, bound) - eval_term(t.rhs, b, bound)
    if isinstance(t, Mul):
        return t.coeff * eval_term(t.term, b, bound)
    if isinstance(t, Select):
        if t.array not in b:
            raise FormulaError(f"unbound array {t.array!r}")
        arr = b[t.array]
        if not isinstance(arr, tuple):
            raise FormulaError(f"variable {t.array!r} is not an array")
        i = eval_term(t.index, b, bound)
        if 0 <= i < len(arr):
            return arr[i]
        return OUT_OF_RANGE_DEFAULT
    if isinstance(t, Length):
        if t.array not in b:
            raise FormulaError(f"unbound array {t.array!r}")
        arr = b[t.array]
        if not isinstance(arr, tuple):
            raise FormulaError(f"variable {t.array!r} is not an array")
        return len(arr)
    raise FormulaError(f"not a term: {t!r}")


def eval_formula(f: Formula, b: Behavior, bound: int) -> bool:
    """Tarskian truth value of f under b.

    Quantified variables range over [0, bound); this finite semantics is for
    oracles and brute-force checks only, the solver handles the unbounded one.
    """
    if isinstance(f, BoolLit):
        return f.value
    if isinstance(f, BoolVar):
        if f.name not in b:
            raise FormulaError(f"unbound variable {f.name!r}")
        v = b[f.name]
        if not isinstance(v, bool):
            raise FormulaError(f"variable {f.name!r} is not a Bool")
        return v
    if isinstance(f, Not):
        return not eval_formula(f.arg, b, bound)
    if isinstance(f, And):
        return all(eval_formula(g, b, bound) for g in f.args)
    if isinstance(f, Or):
        return any(eval_formula(g, b, bound) for g in f.args)
    if isinstance(f, Implies):
        return (not eval_formula(f.lhs, b, bound)) or eval_formula(f.rhs, b, bound)
    if isinstance(f, Iff):
        return eval_formula(f.lhs, b, bound) == eval_formula(f.rhs, b, bound)
    if isinstance(f, Cmp):
        x = eval_term(f.lhs, b, bound)
        y = eval_term(f.rhs, b, bound)
        return {"<=": x <= y, "<": x < y, "=": x == y}[f.op]
    if isinstance(f, Quant):
        if bound < 1:
            raise FormulaError("bound must be positive")
        for decl in f.vars:
            if decl.sort != INT:
                raise FormulaError(f"finite eval only quantifies Int, got {decl.sort}")
        domains = [range(bound)] * len(f.vars)
        hits = (eval_formula(f.body,
                             b.merged({d.name: v for d, v in zip(f.vars, vs)}),
                             bound)
                for vs in itertools.product(*domains))
        return any(hits) if f.kind == "exists" else all(hits)
    raise FormulaError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# structural queries

def term_vars(t: Term) -> set:
    if isinstance(t, IntLit):
        return set()
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, (Add, Sub)):
        return term_vars(t.lhs) | term_vars(t.rhs)
    if isinstance(t, Mul):
        return term_vars(t.term)
    if isinstance(t, Select):
        return {t.array} | term_vars(t.index)
    if isinstance(t, Length):
        return {t.array}
    raise FormulaError(f"not a term: {t!r}")


def free_vars(f: Formula) -> set:
    if isinstance(f, BoolLit):
        return set()
    if isinstance(f, BoolVar):
        return {f.name}
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or)):
        out = set()
        for g in f.args:
            out |= free_vars(g)
        return out
    if isinstance(f, (Implies, Iff)):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, Cmp):
        return term_vars(f.lhs) | term_vars(f.rhs)
    if isinstance(f, Quant):
        return free_vars(f.body) - {d.name for d in f.vars}
    raise FormulaError(f"not a formula: {f!r}")


@lru_cache(maxsize=None)
def quantifier_free(f: Formula) -> bool:
    if isinstance(f, Quant):
        return False
    if isinstance(f, Not):
        return quantifier_free(f.arg)
    if isinstance(f, (And, Or)):
        return all(quantifier_free(g) for g in f.args)
    if isinstance(f, (Implies, Iff)):
        return quantifier_free(f.lhs) and quantifier_free(f.rhs)
    return True


def _is_length_offset(t: Term) -> bool:
    # |a|-c / |a|+c index bounds read as a unit ("a.size - 1"); their +- does
    # not count as an operator, which keeps range atoms at cost 1.
    return (isinstance(t, (Add, Sub))
            and isinstance(t.lhs, Length)
            and isinstance(t.rhs, IntLit))


def term_op_count(t: Term) -> int:
    if isinstance(t, (IntLit, Var, Length)):
        return 0
    if isinstance(t, (Add, Sub)):
        own = 0 if _is_length_offset(t) else 1
        return own + term_op_count(t.lhs) + term_op_count(t.rhs)
    if isinstance(t, Mul):
        return 1 + term_op_count(t.term)
    if isinstance(t, Select):
        return term_op_count(t.index)
    raise FormulaError(f"not a term: {t!r}")


def op_count(f: Formula) -> int:
    """Operator occurrences: boolean, relational, and arithmetic nodes count
    one each; leaves, array reads, lengths, and length-offset bounds count
    zero."""
    if isinstance(f, (BoolLit, BoolVar)):
        return 0
    if isinstance(f, Not):
        return 1 + op_count(f.arg)
    if isinstance(f, (And, Or)):
        return max(0, len(f.args) - 1) + sum(op_count(g) for g in f.args)
    if isinstance(f, (Implies, Iff)):
        return 1 + op_count(f.lhs) + op_count(f.rhs)
    if isinstance(f, Cmp):
        return 1 + term_op_count(f.lhs) + term_op_count(f.rhs)
    if isinstance(f, Quant):
        return op_count(f.body)
    raise FormulaError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# substitution

def subst_term(t: Term, sub: Mapping[str, Term]) -> Term:
    if isinstance(t, IntLit):
        return t
    if isinstance(t, Var):
        return sub.get(t.name, t)
    if isinstance(t, Add):
        return Add(subst_term(t.lhs, sub), subst_term(t.rhs, sub))
    if isinstance(t, Sub):
        return Sub(subst_term(t.lhs, sub), subst_term(t.rhs, sub))
    if isinstance(t, Mul):
        return Mul(t.coeff, subst_term(t.term, sub))
    if isinstance(t, Select):
        arr = sub.get(t.array)
        name = t.array
        if arr is not None:
            if not isinstance(arr, Var):
                raise FormulaError("array variables can only map to variables")
            name = arr.name
        return Select(name, subst_term(t.index, sub))
    if isinstance(t, Length):
        repl = sub.get(t.array)
        if repl is None:
            return t
        if isinstance(repl, Var):
            return Length(repl.name)
        # lengths may be instantiated to concrete bounds or other int terms
        return repl
    raise FormulaError(f"not a term: {t!r}")


def subst(f: Formula, sub: Mapping[str, Term], fresh_hint: str = "q") -> Formula:
    """Capture-avoiding substitution of variables by terms."""
    if isinstance(f, BoolLit):
        return f
    if isinstance(f, BoolVar):
        repl = sub.get(f.name)
        if repl is None:
            return f
        if isinstance(repl, Var):
            return BoolVar(repl.name)
        raise FormulaError("bool variables can only map to variables")
    if isinstance(f, Not):
        return Not(subst(f.arg, sub, fresh_hint))
    if isinstance(f, And):
        return And(tuple(subst(g, sub, fresh_hint) for g in f.args))
    if isinstance(f, Or):
        return Or(tuple(subst(g, sub, fresh_hint) for g in f.args))
    if isinstance(f, Implies):
        return Implies(subst(f.lhs, sub, fresh_hint), subst(f.rhs, sub, fresh_hint))
    if isinstance(f, Iff):
        return Iff(subst(f.lhs, sub, fresh_hint), subst(f.rhs, sub, fresh_hint))
    if isinstance(f, Cmp):
        return Cmp(f.op, subst_term(f.lhs, sub), subst_term(f.rhs, sub))
    if isinstance(f, Quant):
        sub = {k: v for k, v in sub.items()
               if k not in {d.name for d in f.vars}}
        if not sub:
            return f
        # rename bound variables that would capture a substituted term
        used = set()
        for v in sub.values():
            used |= term_vars(v) if not isinstance(v, (BoolVar,)) else {v.name}
        ren = {}
        new_vars = []
        taken = used | free_vars(f.body)
        for d in f.vars:
            if d.name in used:
                k = 1
                cand = f"{d.name}_{fresh_hint}{k}"
                while cand in taken:
                    k += 1
                    cand = f"{d.name}_{fresh_hint}{k}"
                taken.add(cand)
                ren[d.name] = Var(cand)
                new_vars.append(VariableDecl(cand, d.sort, d.phase))
            else:
                new_vars.append(d)
        body = subst(f.body, ren, fresh_hint) if ren else f.body
        return Quant(f.kind, tuple(new_vars), subst(body, sub, fresh_hint))
    raise FormulaError(f"not a formula: {f!r}")


def rename_bound(f: Formula, taken: set, fresh_hint: str = "r") -> Formula:
    """Rename quantified variables of f away from the given name set."""
    if isinstance(f, Quant):
        ren = {}
        new_vars = []
        pool = set(taken) | free_vars(f)
        for d in f.vars:
            if d.name in taken:
                k = 1
                cand = f"{d.name}{k}"
                while cand in pool or cand in taken:
                    k += 1
                    cand = f"{d.name}{k}"
                pool.add(cand)
                ren[d.name] = Var(cand)
                new_vars.append(VariableDecl(cand, d.sort, d.phase))
            else:
                new_vars.append(d)
        body = rename_bound(f.body, taken, fresh_hint)
        if ren:
            body = subst(body, ren, fresh_hint)
        return Quant(f.kind, tuple(new_vars), body)
    if isinstance(f, Not):
        return Not(rename_bound(f.arg, taken, fresh_hint))
    if isinstance(f, And):
        return And(tuple(rename_bound(g, taken, fresh_hint) for g in f.args))
    if isinstance(f, Or):
        return Or(tuple(rename_bound(g, taken, fresh_hint) for g in f.args))
    if isinstance(f, Implies):
        return Implies(rename_bound(f.lhs, taken, fresh_hint),
                       rename_bound(f.rhs, taken, fresh_hint))
    if isinstance(f, Iff):
        return Iff(rename_bound(f.lhs, taken, fresh_hint),
                   rename_bound(f.rhs, taken, fresh_hint))
    return f


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form; pushes Not down to atoms."""
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, And):
        parts = tuple(nnf(g, negate) for g in f.args)
        return Or(parts) if negate else And(parts)
    if isinstance(f, Or):
        parts = tuple(nnf(g, negate) for g in f.args)
        return And(parts) if negate else Or(parts)
    if isinstance(f, Implies):
        return nnf(Or((Not(f.lhs), f.rhs)), negate)
    if isinstance(f, Iff):
        both = Or((And((f.lhs, f.rhs)), And((Not(f.lhs), Not(f.rhs)))))
        return nnf(both, negate)
    if isinstance(f, Quant):
        kind = f.kind
        if negate:
            kind = "forall" if kind == "exists" else "exists"
        return Quant(kind, f.vars, nnf(f.body, negate))
    if isinstance(f, BoolLit):
        return BoolLit(f.value != negate)
    return Not(f) if negate else f


def fold_ground(t: Term) -> Term:
    """Fold constant arithmetic: Sub(IntLit(5), IntLit(1)) -> IntLit(4)."""
    if isinstance(t, Add):
        a, b = fold_ground(t.lhs), fold_ground(t.rhs)
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return IntLit(a.value + b.value)
        return Add(a, b)
    if isinstance(t, Sub):
        a, b = fold_ground(t.lhs), fold_ground(t.rhs)
        if isinstance(a, IntLit) and isinstance(b, IntLit):
            return IntLit(a.value - b.value)
        return Sub(a, b)
    if isinstance(t, Mul):
        inner = fold_ground(t.term)
        if isinstance(inner, IntLit):
            return IntLit(t.coeff * inner.value)
        return Mul(t.coeff, inner)
    if isinstance(t, Select):
        return Select(t.array, fold_ground(t.index))
    return t


def fold_formula(f: Formula) -> Formula:
    if isinstance(f, Cmp):
        return Cmp(f.op, fold_ground(f.lhs), fold_ground(f.rhs))
    if isinstance(f, Not):
        return Not(fold_formula(f.arg))
    if isinstance(f, And):
        return And(tuple(fold_formula(g) for g in f.args))
    if isinstance(f, Or):
        return Or(tuple(fold_formula(g) for g in f.args))
    if isinstance(f, Implies):
        return Implies(fold_formula(f.lhs), fold_formula(f.rhs))
    if isinstance(f, Iff):
        return Iff(fold_formula(f.lhs), fold_formula(f.rhs))
    if isinstance(f, Quant):
        return Quant(f.kind, f.vars, fold_formula(f.body))
    return f


# ---------------------------------------------------------------------------
# valuations

class Valuation:
    """A truth assignment over a fixed, ordered, finite formula set."""

    __slots__ = ("formulas", "bits")

    def __init__(self, formulas: Iterable[Formula], bits: Iterable[bool]):
        object.__setattr__(self, "formulas", tuple(formulas))
        object.__setattr__(self, "bits", tuple(bool(x) for x in bits))
        if len(self.formulas) != len(self.bits):
            raise FormulaError("valuation domain/assignment length mismatch")

    def __len__(self):
        return len(self.formulas)

    def __getitem__(self, f: Formula) -> bool:
        try:
            return self.bits[self.formulas.index(f)]
        except ValueError:
            raise FormulaError(f"formula not in valuation domain: {f!r}")

    def items(self):
        return zip(self.formulas, self.bits)

    def formula(self) -> Formula:
        """for(V): the conjunction asserting each member's assigned value."""
        return conj(f if v else Not(f) for f, v in self.items())

    def __eq__(self, other):
        return (isinstance(other, Valuation)
                and self.formulas == other.formulas
                and self.bits == other.bits)

    def __hash__(self):
        return hash((self.formulas, self.bits))

    def __repr__(self):
        return f"Valuation({''.join('T' if b else 'F' for b in self.bits)})"


def valuation_formula(v: Valuation) -> Formula:
    return v.formula()


def behavior_valuation(formulas, b: Behavior, bound: int) -> Valuation:
    """The unique valuation over `formulas` satisfied by behavior b."""
    return Valuation(formulas, (eval_formula(f, b, bound) for f in formulas))


# ---------------------------------------------------------------------------
# specifications

@dataclass(frozen=True)
class Specification:
    pre: Formula
    post: Formula


def validate_specification(s: Specification, decls: Iterable[VariableDecl]):
    """The precondition may mention input variables only."""
    by_name = {d.name: d for d in decls}
    for name in free_vars(s.pre):
        d = by_name.get(name)
        if d is None:
            raise FormulaError(f"undeclared variable {name!r} in precondition")
        if d.phase == PHASE_OUTPUT:
            raise FormulaError(f"output variable {name!r} in precondition")


def models_spec(b: Behavior, s: Specification, bound: int) -> bool:
    return eval_formula(Implies(s.pre, s.post), b, bound)


# ---------------------------------------------------------------------------
# SMT-LIB2 serialization (emit only; deterministic)

def length_symbol(array: str) -> str:
    return f"len_{array}"


def smt_term(t: Term) -> str:
    if isinstance(t, IntLit):
        return str(t.value) if t.value >= 0 else f"(- {-t.value})"
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Add):
        return f"(+ {smt_term(t.lhs)} {smt_term(t.rhs)})"
    if isinstance(t, Sub):
        return f"(- {smt_term(t.lhs)} {smt_term(t.rhs)})"
    if isinstance(t, Mul):
        c = str(t.coeff) if t.coeff >= 0 else f"(- {-t.coeff})"
        return f"(* {c} {smt_term(t.term)})"
    if isinstance(t, Select):
        return f"(select {t.array} {smt_term(t.index)})"
    if isinstance(t, Length):
        return length_symbol(t.array)
    raise FormulaError(f"not a term: {t!r}")


_SMT_SORT = {"Bool": "Bool", "Int": "Int", "ArrayOfInt": "(Array Int Int)"}


def smt_sort(s: Sort) -> str:
    return _SMT_SORT[s.kind]


def to_smtlib(f: Formula) -> str:
    if isinstance(f, BoolLit):
        return "true" if f.value else "false"
    if isinstance(f, BoolVar):
        return f.name
    if isinstance(f, Not):
        return f"(not {to_smtlib(f.arg)})"
    if isinstance(f, And):
        if not f.args:
            return "true"
        return f"(and {' '.join(to_smtlib(g) for g in f.args)})"
    if isinstance(f, Or):
        if not f.args:
            return "false"
        return f"(or {' '.join(to_smtlib(g) for g in f.args)})"
    if isinstance(f, Implies):
        return f"(=> {to_smtlib(f.lhs)} {to_smtlib(f.rhs)})"
    if isinstance(f, Iff):
        return f"(= {to_smtlib(f.lhs)} {to_smtlib(f.rhs)})"
    if isinstance(f, Cmp):
        return f"({f.op} {smt_term(f.lhs)} {smt_term(f.rhs)})"
    if isinstance(f, Quant):
        binder = " ".join(f"({d.name} {smt_sort(d.sort)})" for d in f.vars)
        return f"({f.kind} ({binder}) {to_smtlib(f.body)})"
    raise FormulaError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# surface syntax (the "Spec:" rendering)

def _pretty_term(t: Term) -> str:
    if isinstance(t, IntLit):
        return str(t.value)
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Add):
        return f"{_pretty_term(t.lhs)} + {_pretty_term(t.rhs)}"
    if isinstance(t, Sub):
        return f"{_pretty_term(t.lhs)} - {_pretty_term(t.rhs)}"
    if isinstance(t, Mul):
        return f"{t.coeff} * {_pretty_term(t.term)}"
    if isinstance(t, Select):
        return f"{t.array}[{_pretty_term(t.index)}]"
    if isinstance(t, Length):
        return f"{t.array}.size"
    raise FormulaError(f"not a term: {t!r}")


def pretty(f: Formula, labels: Mapping[Formula, str] | None = None) -> str:
    """Render in the surface syntax: `and` binds tighter than `or`, atoms are
    infix, quantifiers prefix the whole formula."""
    labels = labels or {}

    def go(g, ctx):  # ctx: "or" | "and" | "atom"
        if g in labels:
            return labels[g]
        if isinstance(g, BoolLit):
            return "true" if g.value else "false"
        if isinstance(g, BoolVar):
            return g.name
        if isinstance(g, Cmp):
            return f"{_pretty_term(g.lhs)} {g.op} {_pretty_term(g.rhs)}"
        if isinstance(g, Not):
            if g.arg in labels:
                return f"!{labels[g.arg]}"
            if isinstance(g.arg, Cmp) and g.arg.op == "=":
                return f"{_pretty_term(g.arg.lhs)} != {_pretty_term(g.arg.rhs)}"
            return f"not ({go(g.arg, 'or')})"
        if isinstance(g, And):
            if not g.args:
                return "true"
            s = " and ".join(go(x, "and") for x in g.args)
            return f"({s})" if ctx == "atom" else s
        if isinstance(g, Or):
            if not g.args:
                return "false"
            s = " or ".join(go(x, "or") for x in g.args)
            return f"({s})" if ctx in ("and", "atom") else s
        if isinstance(g, Implies):
            return f"({go(g.lhs, 'atom')} => {go(g.rhs, 'atom')})"
        if isinstance(g, Iff):
            return f"({go(g.lhs, 'atom')} <=> {go(g.rhs, 'atom')})"
        if isinstance(g, Quant):
            names = ", ".join(d.name for d in g.vars)
            return f"{g.kind} {names}. {go(g.body, 'or')}"
        raise FormulaError(f"not a formula: {g!r}")

    return go(f, "or")


# ---------------------------------------------------------------------------
# JSON round trip for ASTs (registry persistence)

def term_to_json(t: Term):
    if isinstance(t, IntLit):
        return {"t": "int", "v": t.value}
    if isinstance(t, Var):
        return {"t": "var", "name": t.name}
    if isinstance(t, Add):
        return {"t": "add", "l": term_to_json(t.lhs), "r": term_to_json(t.rhs)}
    if isinstance(t, Sub):
        return {"t": "sub", "l": term_to_json(t.lhs), "r": term_to_json(t.rhs)}
    if isinstance(t, Mul):
        return {"t": "mul", "c": t.coeff, "x": term_to_json(t.term)}
    if isinstance(t, Select):
        return {"t": "select", "a": t.array, "i": term_to_json(t.index)}
    if isinstance(t, Length):
        return {"t": "len", "a": t.array}
    raise FormulaError(f"not a term: {t!r}")


def term_from_json(d) -> Term:
    k = d["t"]
    if k == "int":
        return IntLit(d["v"])
    if k == "var":
        return Var(d["name"])
    if k == "add":
        return Add(term_from_json(d["l"]), term_from_json(d["r"]))
    if k == "sub":
        return Sub(term_from_json(d["l"]), term_from_json(d["r"]))
    if k == "mul":
        return Mul(d["c"], term_from_json(d["x"]))
    if k == "select":
        return Select(d["a"], term_from_json(d["i"]))
    if k == "len":
        return Length(d["a"])
    raise FormulaError(f"bad term json: {d!r}")


def formula_to_json(f: Formula):
    if isinstance(f, BoolLit):
        return {"f": "lit", "v": f.value}
    if isinstance(f, BoolVar):
        return {"f": "bvar", "name": f.name}
    if isinstance(f, Not):
        return {"f": "not", "x": formula_to_json(f.arg)}
    if isinstance(f, And):
        return {"f": "and", "xs": [formula_to_json(g) for g in f.args]}
    if isinstance(f, Or):
        return {"f": "or", "xs": [formula_to_json(g) for g in f.args]}
    if isinstance(f, Implies):
        return {"f": "=>", "l": formula_to_json(f.lhs), "r": formula_to_json(f.rhs)}
    if isinstance(f, Iff):
        return {"f": "<=>", "l": formula_to_json(f.lhs), "r": formula_to_json(f.rhs)}
    if isinstance(f, Cmp):
        return {"f": "cmp", "op": f.op,
                "l": term_to_json(f.lhs), "r": term_to_json(f.rhs)}
    if isinstance(f, Quant):
        return {"f": f.kind,
                "vars": [[d.name, d.sort.kind, d.phase] for d in f.vars],
                "body": formula_to_json(f.body)}
    raise FormulaError(f"not a formula: {f!r}")


def formula_from_json(d) -> Formula:
    k = d["f"]
    if k == "lit":
        return BoolLit(d["v"])
    if k == "bvar":
        return BoolVar(d["name"])
    if k == "not":
        return Not(formula_from_json(d["x"]))
    if k == "and":
        return And(tuple(formula_from_json(x) for x in d["xs"]))
    if k == "or":
        return Or(tuple(formula_from_json(x) for x in d["xs"]))
    if k == "=>":
        return Implies(formula_from_json(d["l"]), formula_from_json(d["r"]))
    if k == "<=>":
        return Iff(formula_from_json(d["l"]), formula_from_json(d["r"]))
    if k == "cmp":
        return Cmp(d["op"], term_from_json(d["l"]), term_from_json(d["r"]))
    if k in ("exists", "forall"):
        vars_ = tuple(VariableDecl(n, Sort(s), p) for n, s, p in d["vars"])
        return Quant(k, vars_, formula_from_json(d["body"]))
    raise FormulaError(f"bad formula json: {d!r}")
