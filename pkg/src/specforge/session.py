"""Event-sourced synthesis sessions.

A session is one run of formula construction, specification construction, or
adequacy checking.  Its only mutable state is an append-only event log;
replaying the log through the deterministic engine reconstructs the exact
session state, which is what makes undo possible: retracting an answer and
replaying the rest.
"""

from __future__ import annotations

import json
import runpy
import uuid
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import adequacy as A
from . import equivalence as E
from . import formula as F
from . import solver as S
from . import synthesis as SY
from . import theory as T

MODES = ("construct", "construct-universal", "construct-spec", "make-adequate")

AWAITING = "AwaitingAnswer"
RUNNING = "Running"
DONE = "Done"
FAILED = "Failed"
ABORTED = "Aborted"


class SessionError(Exception):
    pass


@dataclass
class SessionOptions:
    mode: str = "construct"
    bound: int = 3
    k: int = 1
    n: int = 0
    fragment_check: bool = False
    dontcare_to_post: bool = True
    auto_threshold: int | None = None
    registry_dir: str | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise SessionError(f"unknown mode {self.mode!r}")

    def to_dict(self):
        return dict(self.__dict__)

    @staticmethod
    def from_dict(d):
        return SessionOptions(**d)


# ---------------------------------------------------------------------------
# oracle scripts

def load_oracle_script(path) -> SY.Oracle:
    """An oracle script is a Python file defining classify(behavior_dict);
    optional: reason_for(behavior_dict) -> [var names], three_way = True.

    The behavior dict contains every declared variable (dummy witnesses
    included) plus "_bound"; classification must be a deterministic function
    of the vocabulary-clause values on the behavior.
    """
    ns = runpy.run_path(str(path))
    if "classify" not in ns:
        raise SessionError(f"oracle script {path} defines no classify()")
    return SY.Oracle(ns["classify"], ns.get("reason_for"),
                     bool(ns.get("three_way", False)))


# ---------------------------------------------------------------------------
# rendering

def render_behavior_lines(b: F.Behavior, decls):
    """`name = value` lines: inputs first, outputs second, alphabetical
    within each group; dummies are never shown."""
    groups = {F.PHASE_INPUT: [], F.PHASE_OUTPUT: []}
    for d in decls:
        if d.phase == F.PHASE_DUMMY or d.name not in b:
            continue
        groups[d.phase].append(d.name)
    lines = []
    for phase in (F.PHASE_INPUT, F.PHASE_OUTPUT):
        for name in sorted(groups[phase]):
            v = b[name]
            if isinstance(v, tuple):
                lines.append(f"{name} = [{', '.join(str(x) for x in v)}]")
            elif isinstance(v, bool):
                lines.append(f"{name} = {'true' if v else 'false'}")
            else:
                lines.append(f"{name} = {v}")
    return lines


def behavior_rows(b: F.Behavior, decls):
    rows = []
    by_phase = {F.PHASE_INPUT: 0, F.PHASE_OUTPUT: 1}
    ordered = sorted(
        (d for d in decls if d.phase != F.PHASE_DUMMY and d.name in b),
        key=lambda d: (by_phase[d.phase], d.name))
    for d in ordered:
        v = b[d.name]
        rows.append({
            "name": d.name,
            "sort": d.sort.kind,
            "value": list(v) if isinstance(v, tuple) else v,
            "selectable": True,
        })
    return rows


def stats_block(stats: SY.Stats) -> str:
    pairs = [
        ("clauses", stats.clauses),
        ("valuations", stats.total_valuations),
        ("smt-queries", stats.smt_queries),
        ("oracle-queries", stats.oracle_queries),
        ("core-eliminated", stats.core_eliminated),
        ("pa-eliminated", stats.pa_eliminated),
        ("pa-uses", stats.pa_uses),
    ]
    width = max(len(k) for k, _ in pairs)
    lines = ["stats:"] + [f"  {k.ljust(width)} {v}" for k, v in pairs]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# session core

@dataclass
class PendingQuery:
    behavior: F.Behavior
    phase: str           # "formula" | "pre" | "post" | "equivalence"
    processed: int
    total: int


class Session:
    """One synthesis run driven answer by answer, rebuilt from its event log.

    Events: created, query, answer {value, reason, nonce}, retract {index},
    completed {status}.  Additions go through answer()/undo(); replay happens
    on construction.
    """

    def __init__(self, session_id: str, theory_src: str,
                 options: SessionOptions,
                 cfg: S.SolverConfig | None = None,
                 registry: SY.DerivedClauseRegistry | None = None,
                 events=None, sink=None):
        self.id = session_id
        self.theory_src = theory_src
        self.options = options
        self.cfg = cfg
        self.registry = registry or SY.DerivedClauseRegistry(
            options.registry_dir)
        self.events: list = []
        self.sink = sink  # callable(event dict) for persistence
        self.status = RUNNING
        self.pending: PendingQuery | None = None
        self.result_payload: dict | None = None
        self.stats: SY.Stats | None = None
        self._gen = None
        self._replaying = bool(events)
        self._emit({"type": "created", "theory": theory_src,
                    "options": options.to_dict()})
        self._build()
        self._advance(None)
        if events:
            self._replay(events)
            self._replaying = False

    # -- event plumbing

    def _emit(self, ev):
        self.events.append(ev)
        if self.sink and not self._replaying:
            self.sink(ev)

    def effective_answers(self, events):
        """Answer events minus retracted ones, in order."""
        answers = []
        retracted = {ev["index"] for ev in events if ev.get("type") == "retract"}
        for idx, ev in enumerate(events):
            if ev.get("type") == "answer" and idx not in retracted:
                answers.append(ev)
        return answers

    def _replay(self, events):
        for ev in self.effective_answers(events):
            if self.status != AWAITING:
                warnings.warn("log has more answers than the run consumes")
                break
            self._feed(ev["value"], tuple(ev.get("reason") or ()),
                       record=False)

    # -- pipeline construction

    def _build(self):
        opts = self.options
        try:
            parsed = T.parse_theory(self.theory_src, registry=self.registry)
        except T.TheoryParseError:
            raise
        self.parsed = parsed
        self.decls = parsed.type_theory.variables
        if opts.mode in ("construct", "construct-universal", "construct-spec"):
            self._build_synthesis(parsed)
        else:
            self._build_adequacy(parsed)

    def _vocabulary(self, parsed: T.ParsedTheory):
        opts = self.options
        clauses = list(parsed.vocab_clauses)
        if parsed.grammar.rules:
            tt, g = T.inject_quantifier_vars(parsed.type_theory,
                                             parsed.grammar, opts.n)
            self.decls = tt.variables
            generated = T.generate_vocabulary(
                tt, g, T.VocabOptions(k=opts.k, n=opts.n))
            known = {F.to_smtlib(c.formula) for c in clauses}
            clauses += [c for c in generated
                        if F.to_smtlib(c.formula) not in known]
        referenced = {c.label for c in clauses if c.label}
        for name, args in parsed.imports:
            label = f"{name}({','.join(args)})"
            if label not in referenced:
                body = self.registry.instantiate(name, list(args))
                clauses.append(T.Clause(body, T.PROV_DERIVED, label))
        if not clauses:
            raise SessionError("empty vocabulary: no clauses given or derivable")
        vocab = T.Vocabulary(tuple(clauses))
        if opts.fragment_check:
            verdict = T.check_fragment(vocab)
            if verdict != "InFragment":
                msgs = "; ".join(v.reason for v in verdict)
                raise SessionError(f"vocabulary outside decidable fragment: {msgs}")
        return vocab

    def _build_synthesis(self, parsed):
        opts = self.options
        self.vocabulary = self._vocabulary(parsed)
        if opts.mode == "construct-spec":
            input_names = {d.name for d in self.decls
                           if d.phase == F.PHASE_INPUT}
            dummy_names = {d.name for d in self.decls
                           if d.phase == F.PHASE_DUMMY}
            pre_clauses = tuple(
                c for c in self.vocabulary
                if F.free_vars(c.formula) <= input_names | dummy_names)
            if not pre_clauses:
                raise SessionError("no input-only clauses for the precondition")
            self.pre_vocab = T.Vocabulary(pre_clauses)
            self._gen = self._spec_generator()
        else:
            self._gen = self._formula_generator("formula", self.vocabulary)

    def _formula_generator(self, phase, vocab):
        gen = SY.synthesis_loop(vocab, self.decls, self.options.bound,
                                self.cfg)
        answer = None
        try:
            while True:
                q = gen.send(answer) if answer is not None else next(gen)
                answer = yield (phase, q)
        except StopIteration as stop:
            mode = ("forall" if self.options.mode == "construct-universal"
                    else "exists")
            result = SY.assemble(stop.value, mode, True, self.cfg)
            return {"kind": "formula", "results": [result]}

    def _spec_generator(self):
        pre_gen = self._formula_generator("pre", self.pre_vocab)
        answer = None
        try:
            while True:
                ph, q = pre_gen.send(answer) if answer is not None else next(pre_gen)
                answer = yield (ph, q)
        except StopIteration as stop:
            pre_result = stop.value["results"][0]
        if pre_result.status != "done":
            return {"kind": "spec", "results": [pre_result]}
        post_gen = self._formula_generator("post", self.vocabulary)
        answer = None
        try:
            while True:
                ph, q = post_gen.send(answer) if answer is not None else next(post_gen)
                answer = yield (ph, q)
        except StopIteration as stop:
            post_result = stop.value["results"][0]
        return {"kind": "spec", "results": [pre_result, post_result]}

    def _build_adequacy(self, parsed):
        opts = self.options
        if parsed.equivalence is None:
            raise SessionError("make-adequate needs an equiv block")
        self.equivalence = parsed.equivalence
        bad = E.verify_monotone(self.equivalence, self.cfg)
        if bad:
            raise SessionError(
                f"non-monotone range predicate in family {bad[0][0]}")
        self.threshold_result = None
        bound = opts.bound
        if opts.auto_threshold:
            self.threshold_result = E.compute_threshold(
                self.equivalence, opts.auto_threshold, self.cfg)
            bound = self.threshold_result.theta
        self.adequacy_bound = bound
        self.bounded = E.expand_bounded(self.equivalence, bound)
        clauses = list(parsed.vocab_clauses)
        if not clauses:
            raise SessionError("make-adequate needs a vocab block")
        self.vocabulary = T.Vocabulary(tuple(clauses))
        self._gen = self._adequacy_generator()

    def _adequacy_generator(self):
        gen = A.adequacy_loop(self.vocabulary, self.bounded, self.decls,
                              self.cfg)
        answer = None
        try:
            while True:
                q = gen.send(answer) if answer is not None else next(gen)
                answer = yield ("equivalence", q)
        except StopIteration as stop:
            return {"kind": "adequacy", "report": stop.value}

    # -- stepping

    def _advance(self, answer):
        try:
            if answer is None:
                phase, q = next(self._gen)
            else:
                phase, q = self._gen.send(answer)
        except StopIteration as stop:
            self._complete(stop.value)
            return
        self.pending = PendingQuery(q.behavior, phase, q.processed, q.total)
        self._query_query = q
        self.status = AWAITING
        self._emit({"type": "query", "phase": phase,
                    "behavior": q.behavior.to_json()})

    def answer(self, value, reason=(), nonce=None):
        """Record and apply one classification answer."""
        if self.status != AWAITING:
            raise SessionError(f"session is {self.status}, not awaiting")
        if nonce is not None:
            for ev in self.events:
                if ev.get("type") == "answer" and ev.get("nonce") == nonce:
                    return  # idempotent re-post
        value = self._check_value(value)
        self._feed(value, tuple(reason or ()), record=True, nonce=nonce)

    def _check_value(self, value):
        if self.options.mode == "construct-spec" or (
                self.pending and self.pending.phase in ("pre", "post")):
            mapping = {"good": "good", "bad": "bad", "dontCare": "dontCare",
                       "g": "good", "b": "bad", "d": "dontCare",
                       "t": "t", "f": "f", True: "t", False: "f"}
        else:
            mapping = {"t": "t", "f": "f", "vtt": "t", "vff": "f",
                       True: "t", False: "f"}
        if value not in mapping:
            raise ValueError(f"bad classification {value!r}")
        return mapping[value]

    def _feed(self, value, reason, record, nonce=None):
        if record:
            self._emit({"type": "answer", "value": value,
                        "reason": list(reason), "nonce": nonce})
        v = value
        if self.pending and self.pending.phase == "pre":
            v = value in ("good", "bad") if value in ("good", "bad", "dontCare") else v
        elif self.pending and self.pending.phase == "post":
            good = ("good", "dontCare") if self.options.dontcare_to_post \
                else ("good",)
            v = value in good if value in ("good", "bad", "dontCare") else v
        self._advance(SY.Answer(v, reason))

    def abort(self):
        if self.status != AWAITING:
            raise SessionError(f"session is {self.status}, not awaiting")
        try:
            self._gen.send(SY.Answer(abort=True))
        except StopIteration as stop:
            self._complete(stop.value)
        self._emit({"type": "completed", "status": self.status})

    def undo(self) -> bool:
        """Retract the most recent unretracted answer and replay."""
        answers = []
        retracted = {ev["index"] for ev in self.events
                     if ev.get("type") == "retract"}
        for idx, ev in enumerate(self.events):
            if ev.get("type") == "answer" and idx not in retracted:
                answers.append(idx)
        if not answers:
            return False
        self._emit({"type": "retract", "index": answers[-1]})
        self._rebuild_from_events()
        return True

    def _rebuild_from_events(self):
        events = self.events
        old_gen = self._gen
        self.status = RUNNING
        self.pending = None
        self.result_payload = None
        self.stats = None
        self._replaying = True
        try:
            if old_gen is not None:
                old_gen.close()  # releases the abandoned solver process
            self._build()
            self._advance(None)
            for ev in self.effective_answers(events):
                if self.status != AWAITING:
                    break
                self._feed(ev["value"], tuple(ev.get("reason") or ()),
                           record=False)
        finally:
            self._replaying = False

    # -- completion

    def _complete(self, payload):
        self.pending = None
        if payload["kind"] in ("formula", "spec"):
            results = payload["results"]
            status = results[-1].status
            self.stats = self._merge_stats([r.stats for r in results])
            if status == "done":
                self.status = DONE
                self.result_payload = self._format_results(payload)
            elif status == "aborted":
                self.status = ABORTED
            else:
                self.status = FAILED
            self.results = results
        else:
            report = payload["report"]
            self.stats = report.stats
            self.report = report
            if report.status == "done":
                self.status = DONE
                self.result_payload = self._format_adequacy(report)
            elif report.status == "aborted":
                self.status = ABORTED
            else:
                self.status = FAILED
        if self.status == DONE:
            self._emit({"type": "completed", "status": "done"})
        elif self.status == FAILED:
            self._emit({"type": "completed", "status": "failure"})

    def _merge_stats(self, stats_list):
        total = SY.Stats()
        for st in stats_list:
            for k, v in st.to_dict().items():
                setattr(total, k, getattr(total, k) + v)
        return total

    def _format_results(self, payload):
        labels = self.vocabulary.labels()
        if payload["kind"] == "formula":
            r = payload["results"][0]
            text = f"Spec: {F.pretty(r.formula, labels)}\n"
            formula_json = F.formula_to_json(r.formula)
        else:
            pre, post = payload["results"]
            text = (f"Pre: {F.pretty(pre.formula, labels)}\n"
                    f"Post: {F.pretty(post.formula, labels)}\n")
            formula_json = {
                "pre": F.formula_to_json(pre.formula),
                "post": F.formula_to_json(post.formula),
            }
        text += "\n" + stats_block(self.stats) + "\n"
        return {"spec_text": text, "formula": formula_json,
                "stats": self.stats.to_dict()}

    def _format_adequacy(self, report):
        lines = []
        if self.threshold_result is not None:
            lines.append(f"threshold: {self.threshold_result.theta}")
        corrections = report.correction_clauses()
        lines.append(f"adequate: {'yes' if A.is_adequate(report) else 'no'}")
        lines.append(f"corrections: {len(corrections)}")
        for c in corrections:
            lines.append(f"  {F.pretty(c.formula)}")
        lines.append("vocabulary:")
        for c in A.augmented_vocabulary(report):
            lines.append(f"  {c.text()}")
        text = "\n".join(lines) + "\n\n" + stats_block(report.stats) + "\n"
        return {"spec_text": text, "stats": report.stats.to_dict(),
                "adequate": A.is_adequate(report),
                "corrections": len(corrections)}

    # -- views

    def progress(self):
        total = 0
        processed = core = pa = 0
        if self.pending is not None:
            total = self.pending.total
            processed = self.pending.processed
        if self.stats is not None:
            total = self.stats.total_valuations
            processed = self.stats.smt_queries
            core = self.stats.core_eliminated
            pa = self.stats.pa_eliminated
        return {"processed": processed, "total": total,
                "core_eliminated": core, "pa_eliminated": pa}

    def to_view(self):
        view = {
            "id": self.id,
            "mode": self.options.mode,
            "status": self.status,
            "bound": self.options.bound,
            "progress": self.progress(),
        }
        if self.pending is not None:
            view["pending"] = {
                "phase": self.pending.phase,
                "variables": behavior_rows(self.pending.behavior, self.decls),
                "three_way": self.options.mode == "construct-spec",
            }
        return view


# ---------------------------------------------------------------------------
# persistence

class SessionStore:
    """One append-only JSONL event file per session."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.events.jsonl"

    def append(self, session_id: str, event: dict):
        with open(self.path(session_id), "a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    def sink_for(self, session_id: str):
        return lambda ev: self.append(session_id, ev)

    def load_events(self, session_id: str):
        """Events from disk; a corrupt trailing record is truncated away with
        a warning."""
        path = self.path(session_id)
        if not path.exists():
            return []
        events = []
        raw = path.read_text().splitlines()
        for lineno, line in enumerate(raw):
            if not line.strip():
                continue
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                if lineno == len(raw) - 1:
                    warnings.warn(f"truncating corrupt trailing record in "
                                  f"{path.name}")
                    path.write_text("\n".join(raw[:lineno]) + "\n")
                    break
                raise
        return events

    def session_ids(self):
        return sorted(p.name.rsplit(".events.jsonl", 1)[0]
                      for p in self.directory.glob("*.events.jsonl"))

    def load(self, session_id: str,
             cfg: S.SolverConfig | None = None) -> Session:
        events = self.load_events(session_id)
        if not events or events[0].get("type") != "created":
            raise SessionError(f"no created event for session {session_id}")
        created = events[0]
        opts = SessionOptions.from_dict(created["options"])
        return Session(session_id, created["theory"], opts, cfg,
                       events=events[1:], sink=self.sink_for(session_id))


def new_session(theory_src: str, options: SessionOptions,
                store: SessionStore | None = None,
                cfg: S.SolverConfig | None = None,
                registry: SY.DerivedClauseRegistry | None = None) -> Session:
    session_id = uuid.uuid4().hex[:12]
    sink = store.sink_for(session_id) if store else None
    return Session(session_id, theory_src, options, cfg, registry,
                   sink=sink)
