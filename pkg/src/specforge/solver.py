"""Child-process SMT solver bridge over the SMT-LIB2 textual protocol.

Any solver that reads SMT-LIB2 on stdin works (`z3 -in -smt2`, cvc5, ...).
When no binary is on PATH the bridge falls back to the bundled Node shim
around the z3 WebAssembly build.  One bridge owns one solver process and is
used from one thread; sessions each own a bridge.
"""

from __future__ import annotations

import os
import select
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

from . import formula as F
from .formula import (ARRAY_INT, BOOL, INT, Behavior, VariableDecl,
                      length_symbol, smt_sort, smt_term, to_smtlib)


class SolverTransportError(Exception):
    """Process launch / protocol failure, distinct from an Unknown verdict."""


@dataclass(frozen=True)
class SolverConfig:
    command: tuple = ()          # executable + args; empty -> auto-discover
    timeout_ms: int = 5000       # per-query soft timeout
    logic: str = "ALL"

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")

    def resolved_command(self) -> tuple:
        return self.command if self.command else discover_solver_command()


@dataclass(frozen=True)
class Sat:
    model: Behavior  # partial: only what the solver reported


@dataclass(frozen=True)
class Unsat:
    core: frozenset  # labels of named assertions


@dataclass(frozen=True)
class Unknown:
    reason: str = ""


SolverVerdict = object  # Sat | Unsat | Unknown


@dataclass(frozen=True)
class Valid:
    pass


@dataclass(frozen=True)
class Invalid:
    counterexample: Behavior


@lru_cache(maxsize=1)
def _npm_global_root() -> str | None:
    npm = shutil.which("npm")
    if not npm:
        return None
    try:
        out = subprocess.run([npm, "root", "-g"], capture_output=True,
                             text=True, timeout=30)
        root = out.stdout.strip()
        return root or None
    except Exception:
        return None


@lru_cache(maxsize=1)
def discover_solver_command() -> tuple:
    """Pick a solver command: $SPECFORGE_SOLVER, a z3/cvc5 binary on PATH,
    or the bundled Node shim over the z3 wasm package."""
    env = os.environ.get("SPECFORGE_SOLVER")
    if env:
        return tuple(shlex.split(env))
    z3 = shutil.which("z3")
    if z3:
        return (z3, "-in", "-smt2")
    cvc5 = shutil.which("cvc5")
    if cvc5:
        return (cvc5, "--incremental", "--produce-models")
    node = shutil.which("node")
    shim = Path(__file__).parent / "data" / "z3_stdio.js"
    if node and shim.exists():
        root = _npm_global_root()
        module = str(Path(root) / "z3-solver") if root else "z3-solver"
        return (node, str(shim), module)
    raise SolverTransportError(
        "no SMT solver found: set SPECFORGE_SOLVER or install z3/node")


# ---------------------------------------------------------------------------
# s-expression reading

def parse_sexprs(text: str):
    """Parse a sequence of s-expressions into nested lists of strings."""
    toks = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
        elif c == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            toks.append(c)
            i += 1
        elif c == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            toks.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in " \t\r\n();\"":
                j += 1
            toks.append(text[i:j])
            i = j
    out, stack = [], []
    for tok in toks:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if not stack:
                raise SolverTransportError(f"unbalanced solver output: {text!r}")
            done = stack.pop()
            (stack[-1] if stack else out).append(done)
        else:
            (stack[-1] if stack else out).append(tok)
    if stack:
        raise SolverTransportError(f"unbalanced solver output: {text!r}")
    return out


def sexpr_int(e) -> int:
    if isinstance(e, str):
        return int(e)
    if isinstance(e, list) and len(e) == 2 and e[0] == "-":
        return -sexpr_int(e[1])
    raise SolverTransportError(f"expected integer value, got {e!r}")


def sexpr_value(e):
    if e == "true":
        return True
    if e == "false":
        return False
    return sexpr_int(e)


# ---------------------------------------------------------------------------
# raw process

_MARK = "<<specforge-sync>>"


class SolverProcess:
    """One solver child process speaking SMT-LIB2 on stdin/stdout."""

    def __init__(self, command, wall_timeout_s: float = 120.0):
        self.command = tuple(command)
        self.wall_timeout_s = wall_timeout_s
        try:
            self.proc = subprocess.Popen(
                list(self.command), stdin=subprocess.PIPE,
                stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
                text=True, bufsize=1)
        except OSError as e:
            raise SolverTransportError(f"cannot launch solver {self.command}: {e}")
        self._buf = ""

    def request(self, commands: str, wall_timeout_s: float | None = None) -> str:
        """Send commands, then an echo marker; return output up to the marker."""
        if self.proc.poll() is not None:
            raise SolverTransportError("solver process exited")
        deadline = time.monotonic() + (wall_timeout_s or self.wall_timeout_s)
        try:
            self.proc.stdin.write(commands + f'\n(echo "{_MARK}")\n')
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise SolverTransportError(f"solver pipe closed: {e}")
        fd = self.proc.stdout.fileno()
        while True:
            idx = self._buf.find(_MARK)
            if idx >= 0:
                out = self._buf[:idx]
                self._buf = self._buf[idx + len(_MARK):].lstrip("\n")
                return out
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.kill()
                raise SolverTransportError("solver wall timeout")
            ready, _, _ = select.select([fd], [], [], min(remaining, 1.0))
            if ready:
                chunk = os.read(fd, 65536).decode("utf8", "replace")
                if not chunk:
                    raise SolverTransportError("solver closed stdout")
                self._buf += chunk

    def kill(self):
        try:
            self.proc.kill()
        except Exception:
            pass

    def close(self):
        try:
            if self.proc.poll() is None:
                self.proc.stdin.write("(exit)\n")
                self.proc.stdin.flush()
                self.proc.wait(timeout=5)
        except Exception:
            self.kill()


# ---------------------------------------------------------------------------
# bridge

def array_range_axiom(name: str) -> F.Formula:
    """Out-of-range cells read as 0, matching the finite eval semantics."""
    j = VariableDecl("_j", INT, F.PHASE_DUMMY)
    guard = F.Or((F.Cmp("<", F.Var("_j"), F.IntLit(0)),
                  F.Not(F.Cmp("<", F.Var("_j"), F.Length(name)))))
    body = F.Implies(guard, F.Cmp("=", F.Select(name, F.Var("_j")), F.IntLit(0)))
    return F.Quant("forall", (j,), body)


def _guarded_term(t, arrays) -> str:
    """SMT text with every array read totalized: out-of-range selects read 0.

    Quantifier-free encoding of the range axiom; ground ites keep the solver
    fast where the quantified form forces instantiation on every check.
    """
    if isinstance(t, F.Select) and t.array in arrays:
        idx = _guarded_term(t.index, arrays)
        ln = length_symbol(t.array)
        return (f"(ite (and (<= 0 {idx}) (< {idx} {ln})) "
                f"(select {t.array} {idx}) 0)")
    if isinstance(t, F.Add):
        return f"(+ {_guarded_term(t.lhs, arrays)} {_guarded_term(t.rhs, arrays)})"
    if isinstance(t, F.Sub):
        return f"(- {_guarded_term(t.lhs, arrays)} {_guarded_term(t.rhs, arrays)})"
    if isinstance(t, F.Mul):
        c = str(t.coeff) if t.coeff >= 0 else f"(- {-t.coeff})"
        return f"(* {c} {_guarded_term(t.term, arrays)})"
    return smt_term(t)


def to_smtlib_guarded(f: F.Formula, arrays) -> str:
    if isinstance(f, F.Not):
        return f"(not {to_smtlib_guarded(f.arg, arrays)})"
    if isinstance(f, F.And):
        if not f.args:
            return "true"
        return "(and " + " ".join(to_smtlib_guarded(g, arrays)
                                  for g in f.args) + ")"
    if isinstance(f, F.Or):
        if not f.args:
            return "false"
        return "(or " + " ".join(to_smtlib_guarded(g, arrays)
                                 for g in f.args) + ")"
    if isinstance(f, F.Implies):
        return (f"(=> {to_smtlib_guarded(f.lhs, arrays)} "
                f"{to_smtlib_guarded(f.rhs, arrays)})")
    if isinstance(f, F.Iff):
        return (f"(= {to_smtlib_guarded(f.lhs, arrays)} "
                f"{to_smtlib_guarded(f.rhs, arrays)})")
    if isinstance(f, F.Cmp):
        return (f"({f.op} {_guarded_term(f.lhs, arrays)} "
                f"{_guarded_term(f.rhs, arrays)})")
    if isinstance(f, F.Quant):
        binder = " ".join(f"({d.name} {smt_sort(d.sort)})" for d in f.vars)
        return f"({f.kind} ({binder}) {to_smtlib_guarded(f.body, arrays)})"
    return to_smtlib(f)


class SolverBridge:
    """Incremental solver session: declarations persist, each check runs in a
    push/pop frame.  Restarts transparently after transport errors."""

    def __init__(self, cfg: SolverConfig | None = None):
        self.cfg = cfg or SolverConfig()
        self.decls: tuple = ()
        self.background: tuple = ()
        self.bound: int | None = None
        self.proc: SolverProcess | None = None
        self.smt_queries = 0
        self.guard_arrays: frozenset = frozenset()

    # -- lifecycle

    def _wall_s(self, timeout_ms) -> float:
        return (2 * timeout_ms) / 1000.0 + 20.0

    def _start(self):
        self.proc = SolverProcess(self.cfg.resolved_command(),
                                  self._wall_s(self.cfg.timeout_ms))
        self._replay_prelude()

    def _prelude_text(self) -> str:
        lines = [
            "(set-option :produce-models true)",
            "(set-option :produce-unsat-cores true)",
            f"(set-option :timeout {self.cfg.timeout_ms})",
        ]
        for d in self.decls:
            lines.append(f"(declare-const {d.name} {smt_sort(d.sort)})")
            if d.sort == ARRAY_INT:
                lines.append(f"(declare-const {length_symbol(d.name)} Int)")
        for g in self.background:
            lines.append(f"(assert {self._emit(g)})")
        return "\n".join(lines)

    def _replay_prelude(self):
        out = self.proc.request(self._prelude_text())
        if "error" in out:
            raise SolverTransportError(f"solver rejected prelude: {out.strip()}")

    def restart(self):
        if self.proc:
            self.proc.kill()
        self._start()

    def close(self):
        if self.proc:
            self.proc.close()
            self.proc = None

    def declare(self, decls, bound: int | None = None, background=(),
                range_axioms: bool = True):
        """(Re)install declarations and background assertions.

        With a bound, every array gets |a| = bound asserted; range axioms
        make out-of-range reads evaluate to 0 (via ground ite guards on every
        asserted read) so solver models agree with the finite eval.
        """
        self.decls = tuple(decls)
        names = [d.name for d in self.decls]
        if len(set(names)) != len(names):
            raise F.FormulaError("duplicate declarations")
        bg = list(background)
        if bound is not None:
            if bound < 1:
                raise ValueError("bound must be positive")
            for d in self.decls:
                if d.sort == ARRAY_INT:
                    bg.append(F.Cmp("=", F.Length(d.name), F.IntLit(bound)))
        self.guard_arrays = frozenset(
            d.name for d in self.decls
            if d.sort == ARRAY_INT) if range_axioms else frozenset()
        self.bound = bound
        self.background = tuple(bg)
        if self.proc is None:
            self._start()
        else:
            out = self.proc.request("(reset)")
            if "error" in out:
                raise SolverTransportError(out.strip())
            self._replay_prelude()

    def _emit(self, f: F.Formula) -> str:
        if self.guard_arrays:
            return to_smtlib_guarded(f, self.guard_arrays)
        return to_smtlib(f)

    # -- queries

    def check(self, assertions, timeout_ms: int | None = None) -> SolverVerdict:
        """Check a labeled assertion list in a push/pop frame.

        Returns Sat with a partial model over the declared variables, Unsat
        with a sound label core, or Unknown.  Unknown and transport failures
        are retried once with a doubled timeout, on a fresh process if needed.
        """
        if self.proc is None:
            self._start()
        t = timeout_ms or self.cfg.timeout_ms
        try:
            verdict = self._check_once(assertions, t)
        except SolverTransportError:
            self.restart()
            verdict = Unknown("transport")
        if isinstance(verdict, Unknown):
            try:
                verdict = self._check_once(assertions, 2 * t)
            except SolverTransportError:
                self.restart()
                return Unknown("transport after retry")
        return verdict

    def _check_once(self, assertions, timeout_ms) -> SolverVerdict:
        """Single round trip: check-sat plus both result queries, one of which
        the solver answers with an inline error we skip over."""
        self.smt_queries += 1
        lines = ["(push 1)"]
        if timeout_ms != self.cfg.timeout_ms:
            lines.append(f"(set-option :timeout {timeout_ms})")
        for label, f in assertions:
            lines.append(f"(assert (! {self._emit(f)} :named {label}))")
        lines.append("(check-sat)")
        lines.append("(get-unsat-core)")
        terms = self._model_query_terms()
        if terms:
            lines.append("(get-value (" + " ".join(t[2] for t in terms) + "))")
        lines.append("(pop 1)")
        if timeout_ms != self.cfg.timeout_ms:  # options are not pop-scoped
            lines.append(f"(set-option :timeout {self.cfg.timeout_ms})")
        out = self.proc.request("\n".join(lines), self._wall_s(timeout_ms))
        exprs = parse_sexprs(out)
        status = next((e for e in exprs
                       if e in ("sat", "unsat", "unknown", "timeout")), None)
        payloads = [e for e in exprs
                    if isinstance(e, list) and (not e or e[0] != "error")]
        if status == "sat":
            pairs = next((p for p in payloads
                          if len(p) == len(terms)
                          and all(isinstance(x, list) and len(x) == 2
                                  for x in p)), None)
            if terms and pairs is None:
                raise SolverTransportError(f"missing model in: {out!r}")
            return Sat(self._model_from_pairs(terms, pairs or []))
        if status == "unsat":
            labels = next((p for p in payloads
                           if all(isinstance(x, str) for x in p)), [])
            return Unsat(frozenset(x for x in labels if isinstance(x, str)))
        if status in ("unknown", "timeout"):
            return Unknown(status)
        raise SolverTransportError(f"unrecognized solver output: {out!r}")

    def _model_query_terms(self):
        terms = []
        for d in self.decls:
            if d.sort == ARRAY_INT:
                n = self.bound if self.bound is not None else 0
                for j in range(n):
                    terms.append((d.name, j, f"(select {d.name} {j})"))
            else:
                terms.append((d.name, None, d.name))
        return terms

    def _model_from_pairs(self, terms, pairs) -> Behavior:
        if len(pairs) != len(terms):
            raise SolverTransportError("model shape mismatch")
        values: dict = {}
        arrays: dict = {}
        for (name, idx, _), pair in zip(terms, pairs):
            val = sexpr_value(pair[1])
            if idx is None:
                values[name] = val
            else:
                arrays.setdefault(name, {})[idx] = val
        for name, cells in arrays.items():
            values[name] = tuple(cells[j] for j in sorted(cells))
        return Behavior(values)


# ---------------------------------------------------------------------------
# module-level operations

def check(assertions, decls, cfg: SolverConfig | None = None,
          bound: int | None = None, range_axioms: bool = False) -> SolverVerdict:
    """One-shot satisfiability check of labeled (label, Formula) assertions."""
    bridge = SolverBridge(cfg)
    try:
        bridge.declare(decls, bound=bound, range_axioms=range_axioms)
        return bridge.check(list(assertions))
    finally:
        bridge.close()


def complete_model(partial: Behavior, decls, bound: int) -> Behavior:
    """Total behavior over decls: missing ints are 0, bools false, arrays
    padded/truncated to the bound with 0."""
    if bound < 1:
        raise ValueError("bound must be positive")
    values = {}
    for d in decls:
        v = partial.get(d.name)
        if d.sort == BOOL:
            values[d.name] = v if isinstance(v, bool) else False
        elif d.sort == INT:
            values[d.name] = v if isinstance(v, int) and not isinstance(v, bool) else 0
        elif d.sort == ARRAY_INT:
            arr = tuple(v) if isinstance(v, tuple) else ()
            arr = arr[:bound] + (0,) * max(0, bound - len(arr))
            values[d.name] = arr
        else:
            raise F.FormulaError(f"unknown sort {d.sort}")
    return Behavior(values)


def check_validity(f: F.Formula, decls, cfg: SolverConfig | None = None,
                   bridge: SolverBridge | None = None):
    """Valid / Invalid(counterexample) / Unknown via satisfiability of ¬f."""
    own = bridge is None
    b = bridge or SolverBridge(cfg)
    try:
        if own:
            b.declare(decls, bound=None, range_axioms=False)
        verdict = b.check([("negation", F.Not(f))])
        if isinstance(verdict, Unsat):
            return Valid()
        if isinstance(verdict, Sat):
            return Invalid(verdict.model)
        return verdict
    finally:
        if own:
            b.close()


def smt_equivalent(f: F.Formula, g: F.Formula, decls,
                   cfg: SolverConfig | None = None):
    """check_validity of the biconditional f <=> g."""
    return check_validity(F.Iff(f, g), decls, cfg)
