"""Theory input files: parsing, quantifier-variable injection, grammar-driven
vocabulary generation, and the decidable-fragment check.

File format (full grammar in the README):

    theory eina {
      int [] a; int left; int right; int e;
      grammar { (a,left,bound); (a,right,bound); (a,e,=); }
    }

Optional blocks: `out int rv;` declares an output variable, `bool
name(args);` imports a previously synthesized formula as a clause,
`literals { ... }`, `vocab { <formula>; ... }` supplies clauses directly,
`equiv { scalar <f>; indexed <f> where <range>; }` defines an equivalence
theory, and `options { k = 3; n = 1; ... }` presets CLI options.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from . import formula as F
from .equivalence import EquivalenceTheory, IndexedFamily
from .formula import (ARRAY_INT, BOOL, INT, Cmp, IntLit, Length, Select,
                      Var, VariableDecl)

SIGMA = frozenset({"index", "bound", "=", "<=", "+", "-", "*", "[]"})


class TheoryParseError(Exception):
    def __init__(self, msg, line, col):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class TypeTheory:
    name: str
    variables: tuple  # tuple[VariableDecl]

    def __post_init__(self):
        names = [d.name for d in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in type theory")
        if not self.variables:
            raise ValueError("type theory needs at least one variable")

    def by_name(self, name):
        for d in self.variables:
            if d.name == name:
                return d
        return None

    @property
    def arrays(self):
        return tuple(d.name for d in self.variables if d.sort == ARRAY_INT)


@dataclass(frozen=True)
class GrammarRule:
    lhs: str
    rhs: object  # variable name (str) or literal constant (int)
    ops: frozenset

    def __post_init__(self):
        if not self.ops:
            raise ValueError("rule needs at least one op")
        bad = self.ops - SIGMA
        if bad:
            raise ValueError(f"ops outside the alphabet: {sorted(bad)}")


@dataclass(frozen=True)
class GrammarSpec:
    rules: tuple = ()     # tuple[GrammarRule]
    literals: frozenset = frozenset()


@dataclass(frozen=True)
class VocabOptions:
    k: int = 1
    n: int = 0
    quantifier: str = "exists"   # "exists" | "forall"
    fragment_check: bool = False
    bound: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("K must be >= 1")
        if self.n < 0:
            raise ValueError("N must be >= 0")
        if self.quantifier not in ("exists", "forall"):
            raise ValueError("quantifier must be exists or forall")


PROV_USER = "user"
PROV_GENERATED = "generated"
PROV_DERIVED = "derived"
PROV_CORRECTION = "correction"


@dataclass(frozen=True)
class Clause:
    formula: F.Formula
    provenance: str = PROV_GENERATED
    label: str | None = None  # display name for derived clauses

    def text(self, value: bool = True) -> str:
        """Surface rendering of the clause literal with the given polarity."""
        if self.label is not None:
            return self.label if value else f"!{self.label}"
        if value:
            return F.pretty(self.formula)
        return F.pretty(F.Not(self.formula))


@dataclass(frozen=True)
class Vocabulary:
    clauses: tuple  # tuple[Clause]

    def __post_init__(self):
        seen = set()
        for c in self.clauses:
            key = F.to_smtlib(c.formula)
            if key in seen:
                raise ValueError(f"duplicate clause {key}")
            seen.add(key)

    def __len__(self):
        return len(self.clauses)

    def __iter__(self):
        return iter(self.clauses)

    @property
    def formulas(self):
        return tuple(c.formula for c in self.clauses)

    def labels(self):
        return {c.formula: c.label for c in self.clauses if c.label}

    def extended(self, clauses):
        return Vocabulary(self.clauses + tuple(clauses))


@dataclass
class ParsedTheory:
    type_theory: TypeTheory
    grammar: GrammarSpec
    options: VocabOptions
    imports: tuple = ()          # tuple[(name, arg names tuple)]
    vocab_clauses: tuple = ()    # tuple[Clause] from an explicit vocab block
    equivalence: EquivalenceTheory | None = None


# ---------------------------------------------------------------------------
# lexer

_PUNCT = ("<=>", "=>", "==", "!=", "<=", ">=", "<", ">", "=", "(", ")", "{",
          "}", "[", "]", ";", ",", ".", "+", "-", "*", "!", "|")


@dataclass
class _Tok:
    kind: str  # "ident" | "int" | "punct" | "eof"
    text: str
    line: int
    col: int


def _lex(src: str):
    toks = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c == "#" or (c == "/" and i + 1 < n and src[i + 1] == "/"):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(_Tok("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(_Tok("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise TheoryParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser

class _Parser:
    def __init__(self, toks, registry=None):
        self.toks = toks
        self.pos = 0
        self.registry = registry
        self.decls: list = []
        self.imports: list = []
        self.rules: list = []
        self.literals: set = set()
        self.vocab: list = []
        self.equiv_scalars: list = []
        self.equiv_families: list = []
        self.opts: dict = {}
        self.auto_dummies: list = []

    # token plumbing

    def peek(self, ahead=0):
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def next(self):
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, text):
        t = self.next()
        if t.text != text:
            raise TheoryParseError(f"expected {text!r}, found {t.text!r}",
                                   t.line, t.col)
        return t

    def expect_ident(self):
        t = self.next()
        if t.kind != "ident":
            raise TheoryParseError(f"expected identifier, found {t.text!r}",
                                   t.line, t.col)
        return t

    def err(self, msg):
        t = self.peek()
        raise TheoryParseError(msg, t.line, t.col)

    # theory structure

    def parse(self) -> ParsedTheory:
        self.expect("theory")
        name = self._theory_name()
        self.expect("{")
        while self.peek().text != "}":
            self.item()
        self.expect("}")
        if self.peek().kind != "eof":
            self.err(f"trailing input after theory: {self.peek().text!r}")
        if not self.decls:
            self.err("theory declares no variables")
        tt = TypeTheory(name, tuple(self.decls))
        grammar = GrammarSpec(tuple(self.rules), frozenset(self.literals))
        self._check_rules(tt, grammar)
        opts = VocabOptions(**self.opts) if self.opts else VocabOptions()
        equiv = None
        if self.equiv_scalars or self.equiv_families:
            equiv = EquivalenceTheory(tuple(self.equiv_scalars),
                                      tuple(self.equiv_families),
                                      tuple(self.decls))
        return ParsedTheory(tt, grammar, opts, tuple(self.imports),
                            tuple(self.vocab), equiv)

    def _theory_name(self):
        parts = [self.expect_ident().text]
        while self.peek().text == "-" and self.peek(1).kind == "ident":
            self.next()
            parts.append(self.next().text)
        return "-".join(parts)

    def item(self):
        t = self.peek()
        if t.text == "grammar":
            self.grammar_block()
        elif t.text == "literals":
            self.literals_block()
        elif t.text == "vocab":
            self.vocab_block()
        elif t.text == "equiv":
            self.equiv_block()
        elif t.text == "options":
            self.options_block()
        elif t.text in ("int", "bool", "out", "in", "dummy"):
            self.decl()
        else:
            self.err(f"unexpected {t.text!r} in theory body")

    def decl(self):
        phase = F.PHASE_INPUT
        t = self.peek()
        if t.text in ("out", "in", "dummy"):
            self.next()
            phase = {"out": F.PHASE_OUTPUT, "in": F.PHASE_INPUT,
                     "dummy": F.PHASE_DUMMY}[t.text]
        kw = self.next()
        if kw.text == "bool" and self.peek(1).text == "(":
            # imported clause: bool name(arg, ...);
            name = self.expect_ident().text
            self.expect("(")
            args = [self.expect_ident().text]
            while self.peek().text == ",":
                self.next()
                args.append(self.expect_ident().text)
            self.expect(")")
            self.expect(";")
            self.imports.append((name, tuple(args)))
            return
        if kw.text == "int":
            sort = INT
            if self.peek().text == "[":
                self.next()
                self.expect("]")
                sort = ARRAY_INT
        elif kw.text == "bool":
            sort = BOOL
        else:
            raise TheoryParseError(f"expected a type, found {kw.text!r}",
                                   kw.line, kw.col)
        names = [self.expect_ident().text]
        while self.peek().text == ",":
            self.next()
            names.append(self.expect_ident().text)
        self.expect(";")
        for nm in names:
            if any(d.name == nm for d in self.decls):
                self.err(f"duplicate declaration of {nm!r}")
            self.decls.append(VariableDecl(nm, sort, phase))

    def grammar_block(self):
        self.expect("grammar")
        self.expect("{")
        while self.peek().text != "}":
            self.rule()
        self.expect("}")

    def rule(self):
        self.expect("(")
        lhs = self.expect_ident().text
        self.expect(",")
        t = self.next()
        if t.kind == "int":
            rhs: object = int(t.text)
        elif t.text == "-" and self.peek().kind == "int":
            rhs = -int(self.next().text)
        elif t.kind == "ident":
            rhs = t.text
        else:
            raise TheoryParseError("expected variable or literal", t.line, t.col)
        self.expect(",")
        ops = set()
        if self.peek().text == "{":
            self.next()
            ops.add(self._op())
            while self.peek().text == ",":
                self.next()
                ops.add(self._op())
            self.expect("}")
        else:
            ops.add(self._op())
        self.expect(")")
        self.expect(";")
        try:
            self.rules.append(GrammarRule(lhs, rhs, frozenset(ops)))
        except ValueError as e:
            self.err(str(e))

    def _op(self):
        t = self.next()
        op = t.text
        if op == "[":
            self.expect("]")
            op = "[]"
        if op not in SIGMA:
            raise TheoryParseError(f"unknown op {op!r}", t.line, t.col)
        return op

    def literals_block(self):
        self.expect("literals")
        self.expect("{")
        while self.peek().text != "}":
            neg = False
            if self.peek().text == "-":
                self.next()
                neg = True
            t = self.next()
            if t.kind == "int":
                self.literals.add(-int(t.text) if neg else int(t.text))
            elif t.text in ("true", "false"):
                self.literals.add(t.text == "true")
            else:
                raise TheoryParseError("expected a constant", t.line, t.col)
            self.expect(";")
        self.expect("}")

    def vocab_block(self):
        self.expect("vocab")
        self.expect("{")
        while self.peek().text != "}":
            start = self.pos
            f, label = self.formula(allow_calls=True)
            # a bare imported-clause call keeps its name as the display label
            if not self._is_bare_call(start, self.pos):
                label = None
            self.expect(";")
            prov = PROV_DERIVED if label else PROV_USER
            self.vocab.append(Clause(f, prov, label))
        self.expect("}")

    def _is_bare_call(self, start, end):
        toks = self.toks[start:end]
        if len(toks) < 3 or toks[0].kind != "ident" or toks[1].text != "(":
            return False
        depth = 0
        for i, t in enumerate(toks[1:], 1):
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
                if depth == 0:
                    return i == len(toks) - 1
        return False

    def equiv_block(self):
        self.expect("equiv")
        self.expect("{")
        while self.peek().text != "}":
            kw = self.next()
            if kw.text == "scalar":
                f, _ = self.formula()
                self.expect(";")
                self.equiv_scalars.append(f)
            elif kw.text == "indexed":
                body, _ = self.formula()
                self.expect("where")
                rng, _ = self.formula()
                self.expect(";")
                dummies = self._family_dummies(body, rng)
                self.equiv_families.append(IndexedFamily(body, dummies, rng))
            else:
                raise TheoryParseError("expected 'scalar' or 'indexed'",
                                       kw.line, kw.col)
        self.expect("}")

    def _family_dummies(self, body, rng):
        declared = {d.name for d in self.decls}
        order = []
        for f in (body, rng):
            for name in sorted(F.free_vars(f)):
                if name not in declared and name not in order:
                    order.append(name)
        # keep appearance order stable: sort by first occurrence in pretty text
        text = F.pretty(body) + " " + F.pretty(rng)
        order.sort(key=lambda nm: text.find(nm))
        return tuple(VariableDecl(nm, INT, F.PHASE_DUMMY) for nm in order)

    def options_block(self):
        self.expect("options")
        self.expect("{")
        while self.peek().text != "}":
            key = self.expect_ident().text
            self.expect("=")
            t = self.next()
            if key in ("k", "n", "bound"):
                if t.kind != "int":
                    raise TheoryParseError("expected an integer", t.line, t.col)
                self.opts[key] = int(t.text)
            elif key == "quantifier":
                self.opts["quantifier"] = t.text
            elif key == "fragment_check":
                self.opts["fragment_check"] = t.text == "true"
            else:
                raise TheoryParseError(f"unknown option {key!r}", t.line, t.col)
            self.expect(";")
        self.expect("}")

    def _check_rules(self, tt: TypeTheory, g: GrammarSpec):
        for r in g.rules:
            if tt.by_name(r.lhs) is None:
                raise TheoryParseError(f"rule references unknown {r.lhs!r}", 0, 0)
            if isinstance(r.rhs, str) and tt.by_name(r.rhs) is None:
                raise TheoryParseError(f"rule references unknown {r.rhs!r}", 0, 0)
            if isinstance(r.rhs, int) and r.rhs not in g.literals:
                raise TheoryParseError(
                    f"rule literal {r.rhs} missing from literals block", 0, 0)

    # formulas (precedence: iff < implies < or < and < unary < cmp < add < mul)

    def formula(self, allow_calls=False):
        self._top_label = None
        f = self._iff(allow_calls)
        return f, self._top_label

    def _iff(self, calls):
        lhs = self._implies(calls)
        while self.peek().text == "<=>":
            self.next()
            lhs = F.Iff(lhs, self._implies(calls))
        return lhs

    def _implies(self, calls):
        lhs = self._or(calls)
        if self.peek().text == "=>":
            self.next()
            return F.Implies(lhs, self._implies(calls))
        return lhs

    def _or(self, calls):
        lhs = self._and(calls)
        while self.peek().text == "or":
            self.next()
            rhs = self._and(calls)
            lhs = F.disj([lhs, rhs]) if not isinstance(lhs, F.Or) \
                else F.Or(lhs.args + (rhs,))
        return lhs

    def _and(self, calls):
        lhs = self._unary(calls)
        while self.peek().text == "and":
            self.next()
            rhs = self._unary(calls)
            lhs = F.conj([lhs, rhs]) if not isinstance(lhs, F.And) \
                else F.And(lhs.args + (rhs,))
        return lhs

    def _unary(self, calls):
        t = self.peek()
        if t.text in ("not", "!"):
            self.next()
            return F.Not(self._unary(calls))
        return self._cmp(calls)

    def _cmp(self, calls):
        lhs = self._sum()
        t = self.peek()
        if t.text in ("<=", "<", "=", "==", "!=", ">=", ">"):
            self.next()
            rhs = self._sum()
            lt, rt = self._as_terms(lhs, rhs, t)
            if t.text in ("=", "=="):
                return Cmp("=", lt, rt)
            if t.text == "!=":
                return F.Not(Cmp("=", lt, rt))
            if t.text == "<=":
                return Cmp("<=", lt, rt)
            if t.text == "<":
                return Cmp("<", lt, rt)
            if t.text == ">=":
                return Cmp("<=", rt, lt)
            return Cmp("<", rt, lt)
        if isinstance(lhs, tuple):  # term where formula expected
            self.err("expected a comparison or boolean")
        return lhs

    def _as_terms(self, lhs, rhs, tok):
        def unwrap(x):
            if isinstance(x, tuple):
                return x[0]
            if isinstance(x, F.BoolVar):
                raise TheoryParseError("boolean used as integer",
                                       tok.line, tok.col)
            raise TheoryParseError("formula used as integer term",
                                   tok.line, tok.col)
        return unwrap(lhs), unwrap(rhs)

    def _sum(self):
        lhs = self._product()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            rhs = self._product()
            if isinstance(lhs, tuple) and isinstance(rhs, tuple):
                lhs = ((F.Add if op == "+" else F.Sub)(lhs[0], rhs[0]),)
            else:
                self.err("arithmetic on booleans")
        return lhs

    def _product(self):
        lhs = self._atom()
        while self.peek().text == "*":
            tok = self.next()
            rhs = self._atom()
            lt = lhs[0] if isinstance(lhs, tuple) else None
            rt = rhs[0] if isinstance(rhs, tuple) else None
            if isinstance(lt, IntLit):
                lhs = (F.Mul(lt.value, rt),)
            elif isinstance(rt, IntLit):
                lhs = (F.Mul(rt.value, lt),)
            else:
                raise TheoryParseError(
                    "multiplication needs a literal factor", tok.line, tok.col)
        return lhs

    def _atom(self):
        t = self.next()
        if t.kind == "int":
            return (IntLit(int(t.text)),)
        if t.text == "-" and self.peek().kind == "int":
            return (IntLit(-int(self.next().text)),)
        if t.text == "(":
            save = self.pos
            try:
                f = self._iff(True)
                self.expect(")")
                return f
            except TheoryParseError:
                self.pos = save
                inner = self._sum()
                self.expect(")")
                return inner
        if t.text == "true":
            return F.TRUE
        if t.text == "false":
            return F.FALSE
        if t.kind == "ident":
            name = t.text
            if self.peek().text == "(":
                return self._call(name, t)
            if self.peek().text == "[":
                self.next()
                idx = self._sum()
                self.expect("]")
                return (Select(name, idx[0]),)
            if self.peek().text == "." and self.peek(1).text == "size":
                self.next()
                self.next()
                return (Length(name),)
            d = next((d for d in self.decls if d.name == name), None)
            if d is not None and d.sort == BOOL:
                return F.BoolVar(name)
            return (Var(name),)
        raise TheoryParseError(f"unexpected {t.text!r} in formula",
                               t.line, t.col)

    def _call(self, name, tok):
        self.expect("(")
        args = [self.expect_ident().text]
        while self.peek().text == ",":
            self.next()
            args.append(self.expect_ident().text)
        self.expect(")")
        imported = dict(self.imports)
        if name not in imported:
            raise TheoryParseError(
                f"reference to unknown theory name {name!r}", tok.line, tok.col)
        if self.registry is None:
            raise TheoryParseError(
                f"no clause registry supplied for import {name!r}",
                tok.line, tok.col)
        body = self.registry.instantiate(name, args,
                                         err=lambda m: TheoryParseError(
                                             m, tok.line, tok.col))
        label = f"{name}({','.join(args)})"
        self._top_label = label
        return body


def parse_theory(text: str, registry=None) -> ParsedTheory:
    """Parse a theory file into its type theory, grammar, options, explicit
    clauses, imports, and equivalence block."""
    return _Parser(_lex(text), registry).parse()


# ---------------------------------------------------------------------------
# quantifier variable injection

_DUMMY_POOL = ["i", "j", "k"] + [f"i{m}" for m in range(4, 64)]


def inject_quantifier_vars(tt: TypeTheory, g: GrammarSpec, n: int):
    """Add up to n fresh dummy index variables, each related to every array
    by an `index` rule.  Fresh names never collide with user names."""
    if n < 0:
        raise ValueError("N must be >= 0")
    if n == 0:
        return tt, g
    taken = {d.name for d in tt.variables}
    fresh = []
    for cand in _DUMMY_POOL:
        if len(fresh) == n:
            break
        if cand not in taken:
            fresh.append(cand)
            taken.add(cand)
    if len(fresh) < n:
        raise ValueError("dummy name pool exhausted")
    new_vars = tt.variables + tuple(
        VariableDecl(nm, INT, F.PHASE_DUMMY) for nm in fresh)
    new_rules = list(g.rules)
    for arr in tt.arrays:
        for nm in fresh:
            new_rules.append(GrammarRule(arr, nm, frozenset({"index"})))
    return (TypeTheory(tt.name, new_vars),
            GrammarSpec(tuple(new_rules), g.literals))


# ---------------------------------------------------------------------------
# vocabulary generation

def _index_constants(g: GrammarSpec):
    cs = {1}
    cs.update(abs(c) for c in g.literals
              if isinstance(c, int) and not isinstance(c, bool) and c != 0)
    return sorted(cs)


def _index_terms(name: str, g: GrammarSpec):
    """Index terms rooted at an index variable: the bare variable, then x+c
    and x-c for each constant, ascending."""
    out = [Var(name)]
    for c in _index_constants(g):
        out.append(F.Add(Var(name), IntLit(c)))
        out.append(F.Sub(Var(name), IntLit(c)))
    return out


def _range_atoms(t: F.Term, arr: str):
    lo = Cmp("<=", IntLit(0), t)
    hi = Cmp("<=", t, F.Sub(Length(arr), IntLit(1)))
    return lo, hi


def generate_vocabulary(tt: TypeTheory, g: GrammarSpec,
                        opts: VocabOptions) -> Vocabulary:
    """All boolean clauses derivable from the grammar with at most K operator
    occurrences.

    Per array, the variables reached by `bound`/`index`/`[]` rules form its
    index family: each member gets the two range atoms, distinct members get
    pairwise order and equality atoms, and index-role members contribute read
    terms a[t] for t in their index-term set.  `=`/`<=` rules between
    scalars (or against literals) yield the corresponding atoms; `(a,e,=)`
    licenses a[t] = e; `(a,a,<=)` licenses a[t1] <= a[t2].  Emission order is
    fixed (ranges, pairs, scalar rules, reads, read comparisons) so identical
    inputs give identical clause lists.
    """
    k = opts.k
    emitted: list = []
    seen: set = set()

    def emit(f: F.Formula):
        f = F.fold_formula(f)
        if F.op_count(f) > k:
            return
        key = F.to_smtlib(f)
        if key in seen:
            return
        seen.add(key)
        emitted.append(Clause(f, PROV_GENERATED))

    arrays = [d.name for d in tt.variables if d.sort == ARRAY_INT]
    fam: dict = {a: [] for a in arrays}       # array -> family member names
    idx_role: dict = {a: [] for a in arrays}  # array -> index-role names
    for r in g.rules:
        lhs_d = tt.by_name(r.lhs)
        if lhs_d is not None and lhs_d.sort == ARRAY_INT and isinstance(r.rhs, str):
            roles = r.ops & {"bound", "index", "[]"}
            if roles and tt.by_name(r.rhs).sort == INT:
                if r.rhs not in fam[r.lhs]:
                    fam[r.lhs].append(r.rhs)
                if ("index" in roles or "[]" in roles) \
                        and r.rhs not in idx_role[r.lhs]:
                    idx_role[r.lhs].append(r.rhs)

    terms: dict = {}
    for a in arrays:
        for x in idx_role[a]:
            terms[(a, x)] = _index_terms(x, g)

    # range atoms: bare family members first, then composite index terms
    for a in arrays:
        for x in fam[a]:
            lo, hi = _range_atoms(Var(x), a)
            emit(lo)
            emit(hi)
        for x in idx_role[a]:
            for t in terms[(a, x)][1:]:
                lo, hi = _range_atoms(t, a)
                emit(lo)
                emit(hi)

    # pairwise order/equality atoms within each family
    for a in arrays:
        members = fam[a]
        for x, y in itertools.combinations(members, 2):
            emit(Cmp("<=", Var(x), Var(y)))
            emit(Cmp("<=", Var(y), Var(x)))
            emit(Cmp("=", Var(x), Var(y)))

    # scalar-scalar and scalar-literal rules
    for r in g.rules:
        lhs_d = tt.by_name(r.lhs)
        if lhs_d is None or lhs_d.sort != INT:
            continue
        rhs_term = IntLit(r.rhs) if isinstance(r.rhs, int) else Var(r.rhs)
        if isinstance(r.rhs, str) and tt.by_name(r.rhs).sort != INT:
            continue
        if "<=" in r.ops:
            emit(Cmp("<=", Var(r.lhs), rhs_term))
        if "=" in r.ops:
            emit(Cmp("=", Var(r.lhs), rhs_term))

    # element membership: (a, e, =) licenses a[t] = e for index terms t
    for r in g.rules:
        lhs_d = tt.by_name(r.lhs)
        if (lhs_d is None or lhs_d.sort != ARRAY_INT or "=" not in r.ops
                or not isinstance(r.rhs, str)):
            continue
        if tt.by_name(r.rhs).sort != INT:
            continue
        for x in idx_role[r.lhs]:
            for t in terms[(r.lhs, x)]:
                emit(Cmp("=", Select(r.lhs, t), Var(r.rhs)))

    # element order: (a, a, <=) licenses a[t1] <= a[t2]
    for r in g.rules:
        if not (isinstance(r.rhs, str) and r.lhs == r.rhs and "<=" in r.ops):
            continue
        a = r.lhs
        if tt.by_name(a).sort != ARRAY_INT:
            continue
        all_terms = []
        for x in idx_role[a]:
            all_terms.extend(terms[(a, x)])
        for t1, t2 in itertools.permutations(all_terms, 2):
            emit(Cmp("<=", Select(a, t1), Select(a, t2)))

    return Vocabulary(tuple(emitted))


# ---------------------------------------------------------------------------
# array property fragment check

@dataclass(frozen=True)
class Violation:
    clause: F.Formula
    reason: str


def _presburger(t: F.Term, allow_len=True) -> bool:
    if isinstance(t, (IntLit, Var)):
        return True
    if isinstance(t, Length):
        return allow_len
    if isinstance(t, (F.Add, F.Sub)):
        return _presburger(t.lhs, allow_len) and _presburger(t.rhs, allow_len)
    if isinstance(t, F.Mul):
        return _presburger(t.term, allow_len)
    return False  # Select in an index position


def _fragment_violations(f: F.Formula, clause: F.Formula, out: list,
                         bound_names: frozenset):
    if isinstance(f, Cmp):
        for t in (f.lhs, f.rhs):
            _term_violations(t, clause, out)
    elif isinstance(f, F.Not):
        _fragment_violations(f.arg, clause, out, bound_names)
    elif isinstance(f, (F.And, F.Or)):
        for g in f.args:
            _fragment_violations(g, clause, out, bound_names)
    elif isinstance(f, (F.Implies, F.Iff)):
        _fragment_violations(f.lhs, clause, out, bound_names)
        _fragment_violations(f.rhs, clause, out, bound_names)
    elif isinstance(f, F.Quant):
        names = frozenset(d.name for d in f.vars)
        _quantified_usage(f.body, names, clause, out)
        _fragment_violations(f.body, clause, out, bound_names | names)


def _term_violations(t: F.Term, clause, out):
    if isinstance(t, F.Select):
        if not _presburger(t.index):
            out.append(Violation(clause,
                                 "non-Presburger index (nested read or product "
                                 "of variables) in index position"))
        else:
            _index_nested(t.index, clause, out)
    elif isinstance(t, (F.Add, F.Sub)):
        _term_violations(t.lhs, clause, out)
        _term_violations(t.rhs, clause, out)
    elif isinstance(t, F.Mul):
        _term_violations(t.term, clause, out)


def _index_nested(t, clause, out):
    if isinstance(t, F.Select):
        out.append(Violation(clause, "nested array read in index position"))
    elif isinstance(t, (F.Add, F.Sub)):
        _index_nested(t.lhs, clause, out)
        _index_nested(t.rhs, clause, out)
    elif isinstance(t, F.Mul):
        _index_nested(t.term, clause, out)


def _quantified_usage(body, names: frozenset, clause, out):
    """Quantified index variables may appear only inside select indices or in
    Presburger guard comparisons."""
    def scan_term(t, in_index):
        if isinstance(t, Var):
            if t.name in names and not in_index:
                out.append(Violation(
                    clause, f"quantified variable {t.name!r} outside an index "
                            f"position or guard"))
        elif isinstance(t, (F.Add, F.Sub)):
            scan_term(t.lhs, in_index)
            scan_term(t.rhs, in_index)
        elif isinstance(t, F.Mul):
            scan_term(t.term, in_index)
        elif isinstance(t, F.Select):
            scan_term(t.index, True)

    def guard_ok(c: Cmp):
        return _presburger(c.lhs) and _presburger(c.rhs)

    def scan(g):
        if isinstance(g, Cmp):
            if guard_ok(g):
                return  # pure Presburger comparison: a legal guard
            scan_term(g.lhs, False)
            scan_term(g.rhs, False)
        elif isinstance(g, F.Not):
            scan(g.arg)
        elif isinstance(g, (F.And, F.Or)):
            for x in g.args:
                scan(x)
        elif isinstance(g, (F.Implies, F.Iff)):
            scan(g.lhs)
            scan(g.rhs)
        elif isinstance(g, F.Quant):
            scan(g.body)

    scan(body)


def check_fragment(v: Vocabulary):
    """Syntactic membership of every clause in the decidable array fragment.

    Returns "InFragment" or the violation list."""
    out: list = []
    for c in v:
        _fragment_violations(c.formula, c.formula, out, frozenset())
    return "InFragment" if not out else out
