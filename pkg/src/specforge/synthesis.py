"""The formula construction loop and its optimizations.

The loop enumerates truth assignments over the vocabulary through a frontier
of disjoint cubes, asks the solver for a representative behavior of each
satisfiable class, asks the oracle to classify it, and accumulates the
accepted class formulas.  Unsat cores and partial-assignment answers each
remove whole cubes of assignments at once.

The engine is a generator so interactive front-ends can drive it one query
at a time; `construct_formula` and `construct_universal` wrap it for
scripted oracles.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import formula as F
from . import minimize as M
from . import solver as S
from .formula import Behavior, Valuation, VariableDecl
from .theory import Clause, PROV_CORRECTION, Vocabulary

DASH = M.DASH


class SynthesisError(Exception):
    pass


# ---------------------------------------------------------------------------
# frontier of unprocessed valuations

class Frontier:
    """The unprocessed assignment set as a list of pairwise disjoint cubes.

    A cube is a tuple over {0, 1, DASH}; its expansion is the set of full
    assignments agreeing with its fixed positions.
    """

    def __init__(self, n: int):
        self.n = n
        self.cubes = [tuple([DASH] * n)] if n else []

    def size(self) -> int:
        return sum(1 << c.count(DASH) for c in self.cubes)

    def is_empty(self) -> bool:
        return not self.cubes

    def first(self):
        """Lexicographically least remaining assignment, false-first."""
        if not self.cubes:
            raise SynthesisError("frontier is empty")
        return min(tuple(0 if x == DASH else x for x in c) for c in self.cubes)

    def _subtract(self, cube, sub):
        """cube minus sub, as disjoint cubes (sub must overlap cube)."""
        out = []
        cur = list(cube)
        for p, want in enumerate(sub):
            if want == DASH:
                continue
            if cur[p] == DASH:
                split = list(cur)
                split[p] = 1 - want
                out.append(tuple(split))
                cur[p] = want
            # cur[p] == want: nothing to split off
        return out

    def remove_cube(self, sub) -> int:
        """Remove every assignment matching `sub`; returns how many were
        still present."""
        removed = 0
        new_cubes = []
        for c in self.cubes:
            if not M.cubes_overlap(c, sub):
                new_cubes.append(c)
                continue
            inter_dashes = sum(1 for x, y in zip(c, sub)
                               if x == DASH and y == DASH)
            removed += 1 << inter_dashes
            new_cubes.extend(self._subtract(c, sub))
        self.cubes = new_cubes
        return removed

    def remove_point(self, bits) -> int:
        return self.remove_cube(tuple(bits))

    def members_matching(self, sub):
        """Remaining full assignments that match `sub`, in order."""
        out = []
        for c in self.cubes:
            if not M.cubes_overlap(c, sub):
                continue
            inter = tuple(y if y != DASH else x for x, y in zip(c, sub))
            out.extend(M.expand_cube(inter))
        return sorted(out)


def partial_to_cube(n: int, partial: dict):
    cube = [DASH] * n
    for pos, bit in partial.items():
        cube[pos] = 1 if bit else 0
    return tuple(cube)


# ---------------------------------------------------------------------------
# oracle surface

@dataclass(frozen=True)
class Query:
    behavior: Behavior     # dummy variables hidden
    full_model: Behavior   # includes dummy witnesses (scripted oracles only)
    valuation: Valuation
    processed: int
    total: int


@dataclass(frozen=True)
class Answer:
    value: object = None        # True=vtt, False=vff, or "good"/"bad"/"dontCare"
    reason: tuple = ()          # variable names backing the answer, or empty
    abort: bool = False


@dataclass
class Oracle:
    """Classification source: a scripted predicate or an interactive driver.

    Scripted predicates receive the full model (dummy witnesses included) as
    a plain dict and must be deterministic functions of the valuation class;
    see the oracle-script docs.
    """
    classify: object                 # callable(dict) -> bool | str
    reason_for: object = None        # optional callable(dict) -> list[str]
    three_way: bool = False
    interactive: bool = False

    def answer_with_bound(self, q: Query, bound: int) -> Answer:
        values = q.full_model.values
        values["_bound"] = bound
        out = self.classify(values)
        reason = ()
        if self.reason_for is not None:
            reason = tuple(self.reason_for(values) or ())
        if self.three_way:
            if out not in ("good", "bad", "dontCare"):
                raise SynthesisError(f"three-way oracle returned {out!r}")
            return Answer(out, reason)
        if isinstance(out, str):
            out = {"t": True, "f": False, "vtt": True, "vff": False}[out]
        return Answer(bool(out), reason)


def scripted(fn, reason_for=None, three_way=False) -> Oracle:
    return Oracle(fn, reason_for, three_way)


# ---------------------------------------------------------------------------
# results

@dataclass
class Stats:
    clauses: int = 0
    total_valuations: int = 0
    smt_queries: int = 0
    oracle_queries: int = 0
    core_eliminated: int = 0
    pa_eliminated: int = 0
    pa_uses: int = 0

    def conservation_ok(self) -> bool:
        return (self.smt_queries + self.core_eliminated + self.pa_eliminated
                == self.total_valuations)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SynthesisResult:
    vocabulary: Vocabulary
    mode: str                      # "exists" | "forall"
    bound: int
    status: str                    # "done" | "failure" | "aborted"
    accepted: list                 # satisfiable valuations classified vtt
    rejected: list                 # valuations classified vff
    unsat_cubes: list              # cubes of classes empty at the bound
    log: list                      # (Behavior, answer, reason vars)
    stats: Stats
    decls: tuple = ()
    dummies: tuple = ()            # injected index variables
    formula: F.Formula = F.FALSE   # minimized, quantified
    formula_raw: F.Formula = F.FALSE


def raw_disjunction(accepted) -> F.Formula:
    return F.disj(v.formula() for v in accepted)


def raw_universal(rejected) -> F.Formula:
    return F.conj(F.Not(v.formula()) for v in rejected)


# ---------------------------------------------------------------------------
# eliminations

def eliminate_unsat_core(frontier: Frontier, core_partial: dict) -> int:
    """Remove all extensions of the unsat core; returns the removal count."""
    if not core_partial:
        return 0
    return frontier.remove_cube(partial_to_cube(frontier.n, core_partial))


def decided_clauses(clauses, behavior: Behavior, reason, bound: int,
                    dummy_names) -> dict:
    """Clause positions whose truth value the reason variables pin down.

    A clause is decided when all its free variables are reason variables;
    clauses over hidden dummy witnesses are never decided (the user cannot
    select them).
    """
    reason = set(reason)
    decided = {}
    for pos, f in enumerate(clauses):
        fv = F.free_vars(f)
        if fv and fv <= reason and not (fv & set(dummy_names)):
            decided[pos] = F.eval_formula(f, behavior, bound)
    return decided


def eliminate_partial_assignment(frontier: Frontier, valuation: Valuation,
                                 reason, classification: bool,
                                 behavior: Behavior, bound: int,
                                 dummy_names=()):
    """Classify every remaining valuation that agrees with the clauses the
    reason variables decide.  Returns (decided valuation bit-tuples, removed
    count, warning or None)."""
    decided = decided_clauses(valuation.formulas, behavior, reason, bound,
                              dummy_names)
    if not decided:
        msg = f"reason {sorted(reason)} decides no vocabulary clause"
        warnings.warn(msg)
        return [], 0, msg
    cube = partial_to_cube(frontier.n, decided)
    members = frontier.members_matching(cube)
    removed = frontier.remove_cube(cube)
    return members, removed, None


# ---------------------------------------------------------------------------
# the construction loop

def synthesis_loop(vocab: Vocabulary, decls, bound: int,
                   cfg: S.SolverConfig | None = None,
                   bridge: S.SolverBridge | None = None):
    """Generator: yields Query, receives Answer, returns SynthesisResult.

    The caller classifies each yielded representative; reasons trigger
    partial-assignment elimination.  Solver failure (unknown after retry)
    ends the run with status "failure" and partial results.
    """
    if len(vocab) == 0:
        raise SynthesisError("vocabulary is empty")
    if bound < 1:
        raise SynthesisError("bound must be positive")
    decls = tuple(decls)
    clauses = vocab.formulas
    names = {d.name for d in decls}
    for f in clauses:
        missing = F.free_vars(f) - names
        if missing:
            raise SynthesisError(f"clause mentions undeclared {sorted(missing)}")
    dummy_names = tuple(d.name for d in decls if d.phase == F.PHASE_DUMMY)
    visible_names = [d.name for d in decls if d.phase != F.PHASE_DUMMY]

    own_bridge = bridge is None
    if own_bridge:
        bridge = S.SolverBridge(cfg)
    bridge.declare(decls, bound=bound, range_axioms=True)

    n = len(clauses)
    frontier = Frontier(n)
    stats = Stats(clauses=n, total_valuations=1 << n)
    accepted: list = []
    rejected: list = []
    unsat_cubes: list = []
    log: list = []
    status = "done"

    def check_bits(bits):
        stats.smt_queries += 1
        assertions = [(f"c{pos}", f if bit else F.Not(f))
                      for pos, (f, bit) in enumerate(zip(clauses, bits))]
        return bridge.check(assertions)

    try:
        while not frontier.is_empty():
            bits = frontier.first()
            frontier.remove_point(bits)
            v = Valuation(clauses, bits)
            verdict = check_bits(bits)

            if isinstance(verdict, S.Unknown):
                status = "failure"
                break

            if isinstance(verdict, S.Unsat):
                positions = sorted(int(lbl[1:]) for lbl in verdict.core
                                   if lbl.startswith("c"))
                partial = {p: bits[p] for p in positions}
                if not partial:  # defensive: an empty core still kills one
                    partial = {p: bits[p] for p in range(n)}
                stats.core_eliminated += eliminate_unsat_core(frontier, partial)
                unsat_cubes.append(partial_to_cube(n, partial))
                continue

            full = S.complete_model(verdict.model, decls, bound)
            visible = full.restrict(visible_names)
            answer = yield Query(visible, full, v,
                                 stats.smt_queries, stats.total_valuations)
            if answer is None or answer.abort:
                status = "aborted"
                break
            stats.oracle_queries += 1
            cls = answer.value
            if isinstance(cls, str):
                cls = {"t": True, "f": False, "vtt": True, "vff": False}[cls]
            log.append((visible, bool(cls), tuple(answer.reason or ())))
            (accepted if cls else rejected).append(v)

            if answer.reason:
                members, removed, warning = eliminate_partial_assignment(
                    frontier, v, answer.reason, bool(cls), full, bound,
                    dummy_names)
                if warning:
                    continue
                stats.pa_uses += 1
                if not cls:
                    stats.pa_eliminated += removed
                    rejected.extend(Valuation(clauses, m) for m in members)
                else:
                    # inclusion: each member joins F only if its class is
                    # nonempty, so check satisfiability individually
                    for m in members:
                        mv = Valuation(clauses, m)
                        verdict_m = check_bits(m)
                        if isinstance(verdict_m, S.Unknown):
                            status = "failure"
                            break
                        if isinstance(verdict_m, S.Unsat):
                            unsat_cubes.append(tuple(m))
                        else:
                            accepted.append(mv)
                    if status == "failure":
                        break
    finally:
        if own_bridge:
            bridge.close()

    return SynthesisResult(
        vocab, "exists", bound, status, accepted, rejected, unsat_cubes,
        log, stats, decls=decls,
        dummies=tuple(VariableDecl(nm, F.INT, F.PHASE_DUMMY)
                      for nm in dummy_names))


# ---------------------------------------------------------------------------
# result assembly

def quantify_existential(f: F.Formula, dummies) -> F.Formula:
    """One existential block over the injected index variables, in front of
    the whole disjunction (legal since ∃ distributes through ∨)."""
    used = F.free_vars(f)
    ds = tuple(d for d in dummies if d.name in used)
    if not ds:
        return f
    return F.Quant("exists", ds, f)


def assemble(result: SynthesisResult, mode: str = "exists",
             do_minimize: bool = True,
             cfg: S.SolverConfig | None = None) -> SynthesisResult:
    """Fill in formula_raw and the minimized, quantified formula."""
    result.mode = mode
    clauses = result.vocabulary.formulas
    if mode == "exists":
        result.formula_raw = raw_disjunction(result.accepted)
        side = result.accepted
    else:
        result.formula_raw = raw_universal(result.rejected)
        side = result.rejected
    on, dc = _covers(result, side, cfg)
    cover = M.minimize(on, dc) if do_minimize else on
    body = M.cover_to_formula(cover, clauses)
    if mode == "exists":
        result.formula = quantify_existential(body, result.dummies)
    else:
        neg = F.nnf(F.Not(body))
        used = F.free_vars(neg)
        ds = tuple(d for d in result.dummies if d.name in used)
        result.formula = F.Quant("forall", ds, neg) if ds else neg
    return result


def _raw_empty_cubes(result: SynthesisResult, cubes,
                     cfg: S.SolverConfig | None):
    """Keep only cubes whose classes are empty with no background at all.

    Synthesis checks run at the session bound with reads totalized, which
    empties more classes than plain first-order semantics does; the minimizer
    may only exploit classes that are empty outright, or the output formula
    would drift from the class DNF on structures outside the bound.
    """
    if not cubes or not result.decls:
        return list(cubes)
    clauses = result.vocabulary.formulas
    bridge = S.SolverBridge(cfg)
    out = []
    try:
        bridge.declare(result.decls, bound=None, range_axioms=False)
        for c in cubes:
            assertions = []
            for pos, bit in enumerate(c):
                if bit == DASH:
                    continue
                f = clauses[pos]
                assertions.append((f"c{pos}", f if bit else F.Not(f)))
            if isinstance(bridge.check(assertions), S.Unsat):
                out.append(c)
    finally:
        bridge.close()
    return out


def _covers(result: SynthesisResult, side, cfg: S.SolverConfig | None = None):
    n = len(result.vocabulary)
    on = M.cover(n, [tuple(1 if b else 0 for b in v.bits) for v in side])
    seen = set(on.cubes)
    dc = []
    for c in _raw_empty_cubes(result, result.unsat_cubes, cfg):
        c = tuple(c)
        if c not in seen and not any(M.cubes_overlap(c, q) for q in on.cubes):
            seen.add(c)
            dc.append(c)
    return on, M.cover(n, dc)


def drive(gen, oracle: Oracle, bound: int) -> SynthesisResult:
    """Run a synthesis generator to completion against an oracle."""
    try:
        q = next(gen)
        while True:
            q = gen.send(oracle.answer_with_bound(q, bound))
    except StopIteration as stop:
        return stop.value


def construct_formula(vocab: Vocabulary, oracle: Oracle, bound: int,
                      decls, cfg: S.SolverConfig | None = None,
                      do_minimize: bool = True) -> SynthesisResult:
    """ConstructFormula: md(formula) = vtt over the expressible partition."""
    result = drive(synthesis_loop(vocab, decls, bound, cfg), oracle, bound)
    return assemble(result, "exists", do_minimize, cfg)


def construct_universal(vocab: Vocabulary, oracle: Oracle, bound: int,
                        decls, cfg: S.SolverConfig | None = None,
                        do_minimize: bool = True) -> SynthesisResult:
    """The complement variant: starts from true and conjoins the negations
    of rejected class formulas; dummies get universally quantified."""
    result = drive(synthesis_loop(vocab, decls, bound, cfg), oracle, bound)
    return assemble(result, "forall", do_minimize, cfg)


# ---------------------------------------------------------------------------
# specification construction

def derive_two_way(oracle3: Oracle):
    """The two formula-construction oracles of a three-way classification:
    precondition (good+bad vs dontCare) and postcondition (good+φ vs bad+ψ),
    with the dontCare split φ chosen when building Q."""
    if not oracle3.three_way:
        raise SynthesisError("expected a three-way oracle")

    def pre_fn(values):
        return oracle3.classify(values) in ("good", "bad")

    def post_fn_true(values):
        return oracle3.classify(values) in ("good", "dontCare")

    def post_fn_false(values):
        return oracle3.classify(values) == "good"

    return pre_fn, post_fn_true, post_fn_false


def construct_specification(oracle3: Oracle, v_pre: Vocabulary,
                            v_post: Vocabulary, bound: int, decls,
                            cfg: S.SolverConfig | None = None,
                            dontcare_to_post: bool = True):
    """Build ⟨P, Q⟩: P accurate for (good ∪ bad, dontCare), Q accurate for
    (good ∪ φ, bad ∪ ψ).  By default φ = dontCare (weakest Q); setting
    dontcare_to_post=False puts dontCare in ψ instead."""
    pre_fn, post_true, post_false = derive_two_way(oracle3)
    input_names = {d.name for d in decls if d.phase == F.PHASE_INPUT}
    for c in v_pre:
        bad = F.free_vars(c.formula) - input_names - \
            {d.name for d in decls if d.phase == F.PHASE_DUMMY}
        if bad:
            raise SynthesisError(
                f"precondition vocabulary mentions non-input {sorted(bad)}")
    pre_res = construct_formula(v_pre, scripted(pre_fn), bound, decls, cfg)
    post_fn = post_true if dontcare_to_post else post_false
    post_res = construct_formula(v_post, scripted(post_fn), bound, decls, cfg)
    spec = F.Specification(pre_res.formula, post_res.formula)
    F.validate_specification(spec, decls)
    return spec, pre_res, post_res


# ---------------------------------------------------------------------------
# derived clause registry (hierarchical construction)

class DerivedClauseRegistry:
    """Named synthesized formulas, importable into later vocabularies."""

    def __init__(self, directory: str | Path | None = None):
        self._defs: dict = {}
        self.directory = Path(directory) if directory else None
        if self.directory and self.directory.is_dir():
            self._load_all()

    def register(self, name: str, params, body: F.Formula,
                 persist: bool = True):
        if name in self._defs:
            raise SynthesisError(f"derived clause {name!r} already registered")
        params = tuple(params)
        missing = F.free_vars(body) - {p.name for p in params}
        if missing:
            raise SynthesisError(
                f"derived clause {name!r} leaves {sorted(missing)} unbound")
        self._defs[name] = (params, body)
        if persist and self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
            payload = {
                "name": name,
                "params": [[p.name, p.sort.kind, p.phase] for p in params],
                "body": F.formula_to_json(body),
            }
            path = self.directory / f"{name}.clause.json"
            path.write_text(json.dumps(payload, indent=1, sort_keys=True))

    def names(self):
        return sorted(self._defs)

    def lookup(self, name):
        return self._defs[name]

    def instantiate(self, name: str, args, err=None) -> F.Formula:
        """Inline the named formula with the arguments substituted for the
        parameters; bound variables are renamed clear of the argument names."""
        def fail(msg):
            raise err(msg) if err else SynthesisError(msg)

        if name not in self._defs:
            fail(f"reference to unknown theory name {name!r}")
        params, body = self._defs[name]
        if len(args) != len(params):
            fail(f"{name!r} takes {len(params)} arguments, got {len(args)}")
        body = F.rename_bound(body, set(args))
        sub = {p.name: F.Var(a) for p, a in zip(params, args)}
        return F.subst(body, sub)

    def _load_all(self):
        for path in sorted(self.directory.glob("*.clause.json")):
            payload = json.loads(path.read_text())
            params = tuple(VariableDecl(n, F.Sort(s), ph)
                           for n, s, ph in payload["params"])
            body = F.formula_from_json(payload["body"])
            self._defs[payload["name"]] = (params, body)


def register_derived_clause(name: str, formula: F.Formula,
                            registry: DerivedClauseRegistry, params=None):
    """Store a synthesized formula for import into later theories."""
    if params is None:
        names = sorted(F.free_vars(formula))
        params = tuple(VariableDecl(nm, F.INT) for nm in names)
    registry.register(name, params, formula)
