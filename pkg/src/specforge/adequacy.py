"""Vocabulary adequacy checking and correction.

Every satisfiable equivalence-class at the working bound gets one
representative classified by the oracle.  A vocabulary class that contains
representatives from both sides is a witness of inadequacy; its correction
formula is the disjunction of the vtt-side class formulas it contains, and
augmenting the vocabulary with all corrections makes it adequate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import formula as F
from . import solver as S
from .equivalence import BoundedTheory
from .formula import Behavior, Valuation
from .synthesis import (Answer, Frontier, Oracle, Query, Stats, drive,
                        partial_to_cube)
from .theory import Clause, PROV_CORRECTION, Vocabulary


class AdequacyError(Exception):
    pass


@dataclass
class AdequacyReport:
    vocabulary: Vocabulary
    bounded: BoundedTheory
    side: dict            # Valuation(eps_b) -> "vtt" | "vff" | "empty"
    reps: dict            # Valuation(eps_b) -> Behavior (satisfiable classes)
    sides: dict           # Valuation(nu) -> frozenset subset of {"vtt","vff"}
    corrections: dict     # Valuation(nu) -> Formula (true when no straddle)
    stats: Stats
    status: str = "done"

    def straddling(self):
        return [v for v, s in self.sides.items() if s == {"vtt", "vff"}]

    def correction_clauses(self):
        out = []
        for v in self.straddling():
            out.append(Clause(self.corrections[v], PROV_CORRECTION))
        return out


def is_adequate(report: AdequacyReport) -> bool:
    """No vocabulary class straddles vtt and vff."""
    return not report.straddling()


def augmented_vocabulary(report: AdequacyReport) -> Vocabulary:
    """The input vocabulary plus the correction formulas (deduplicated)."""
    existing = {F.to_smtlib(c.formula) for c in report.vocabulary}
    extra = []
    for c in report.correction_clauses():
        key = F.to_smtlib(c.formula)
        if key not in existing:
            existing.add(key)
            extra.append(c)
    return report.vocabulary.extended(extra)


def adequacy_loop(vocab: Vocabulary, e_b: BoundedTheory, decls,
                  cfg: S.SolverConfig | None = None,
                  bridge: S.SolverBridge | None = None):
    """Generator: yields one Query per satisfiable equivalence class,
    receives vtt/vff Answers, returns the AdequacyReport."""
    decls = tuple(decls)
    dummy_names = {d.name for d in decls if d.phase == F.PHASE_DUMMY}
    for f in tuple(vocab.formulas) + e_b.formulas:
        if F.free_vars(f) & dummy_names:
            raise AdequacyError(
                "adequacy runs need dummy-free vocabularies and theories")
        if not F.quantifier_free(f):
            raise AdequacyError("adequacy runs need quantifier-free formulas")

    eps = e_b.formulas
    if not eps:
        raise AdequacyError("bounded equivalence theory is empty")
    n = len(eps)
    bound = e_b.bound

    own_bridge = bridge is None
    if own_bridge:
        bridge = S.SolverBridge(cfg)
    bridge.declare(decls, bound=bound, range_axioms=True)

    frontier = Frontier(n)
    stats = Stats(clauses=n, total_valuations=1 << n)
    side: dict = {}
    reps: dict = {}
    status = "done"

    try:
        while not frontier.is_empty():
            bits = frontier.first()
            frontier.remove_point(bits)
            v = Valuation(eps, bits)
            stats.smt_queries += 1
            assertions = [(f"c{pos}", f if bit else F.Not(f))
                          for pos, (f, bit) in enumerate(zip(eps, bits))]
            verdict = bridge.check(assertions)
            if isinstance(verdict, S.Unknown):
                status = "failure"
                break
            if isinstance(verdict, S.Unsat):
                side[v] = "empty"
                positions = sorted(int(lbl[1:]) for lbl in verdict.core
                                   if lbl.startswith("c"))
                partial = {p: bits[p] for p in positions} or \
                    {p: bits[p] for p in range(n)}
                stats.core_eliminated += frontier.remove_cube(
                    partial_to_cube(n, partial))
                continue
            rep = S.complete_model(verdict.model, decls, bound)
            answer = yield Query(rep, rep, v, stats.smt_queries,
                                 stats.total_valuations)
            if answer is None or answer.abort:
                status = "aborted"
                break
            stats.oracle_queries += 1
            cls = answer.value
            if isinstance(cls, str):
                cls = {"t": True, "f": False, "vtt": True, "vff": False}[cls]
            side[v] = "vtt" if cls else "vff"
            reps[v] = rep
    finally:
        if own_bridge:
            bridge.close()

    report = AdequacyReport(vocab, e_b, side, reps, {}, {}, stats, status)
    if status == "done":
        _classify_vocab_valuations(report, bound)
    return report


def _classify_vocab_valuations(report: AdequacyReport, bound: int):
    """Which sides each vocabulary class touches, plus correction formulas.

    Membership uses the finite evaluation of for(V_nu) on each class
    representative; by construction a representative's whole class lands on
    one side of every vocabulary class."""
    clauses = report.vocabulary.formulas
    n = len(clauses)
    for code in range(1 << n):
        bits = tuple((code >> (n - 1 - i)) & 1 for i in range(n))
        vv = Valuation(clauses, bits)
        touched = set()
        members_vtt = []
        for ve, rep in report.reps.items():
            if F.eval_formula(vv.formula(), rep, bound):
                touched.add(report.side[ve])
                if report.side[ve] == "vtt":
                    members_vtt.append(ve)
        report.sides[vv] = frozenset(touched)
        if touched == {"vtt", "vff"}:
            report.corrections[vv] = F.disj(ve.formula() for ve in members_vtt)
        else:
            report.corrections[vv] = F.TRUE


def make_adequate(vocab: Vocabulary, e_b: BoundedTheory, oracle: Oracle,
                  decls, cfg: S.SolverConfig | None = None) -> AdequacyReport:
    """Classify class representatives, detect straddling vocabulary classes,
    and emit their correction formulas."""
    gen = adequacy_loop(vocab, e_b, decls, cfg)
    return drive(gen, oracle, e_b.bound)
