"""SMT-LIB2 emission and the external solver subprocess boundary.

The script is deterministic (sorted declarations, stable traversal) so
dumps are byte-identical across runs.  Strings are interned as constants
of an uninterpreted sort with pairwise distinctness; nonlinear
multiplication passes through as real multiplication; division and
modulus stay uninterpreted (their runtime semantics is truncating, which
neither Int div nor mod matches)."""

from __future__ import annotations

import shlex
import subprocess

from ..logic import Sort
from ..syntax import (
    PAnd, PAtom, PKvar, PNot, Pred, TBuiltin, TConst, TField, TThis,
    TUF, TValueVar, TVar, Term, UNDEFINED,
)
from .normal import NormError, infer_sort


def _sort_name(s: Sort) -> str:
    return {
        "int": "Int", "bool": "Bool", "str": "Str",
        "undefined": "Undef", "null": "Null", "obj": "Obj", "arr": "Arr",
        "bot": "Bot",
    }.get(s.kind) or f"TV_{s.name}"


def _sym(name: str) -> str:
    if name.isidentifier() and not name.startswith("%"):
        return name
    safe = name.replace("|", "_").replace("\\", "_")
    return f"|{safe}|"


class _Emitter:
    def __init__(self, sorts: dict):
        self.sorts = sorts
        self.strings: dict[str, str] = {}
        self.funs: dict[str, tuple] = {}  # smt name -> (arg sorts, ret)
        self.uninterp_sorts: set[str] = set()

    def note_sort(self, s: Sort) -> str:
        n = _sort_name(s)
        if n not in ("Int", "Bool"):
            self.uninterp_sorts.add(n)
        return n

    def term(self, t: Term) -> str:
        if isinstance(t, TVar):
            self.note_sort(infer_sort(t, self.sorts))
            return _sym(t.name)
        if isinstance(t, TValueVar):
            self.note_sort(infer_sort(t, self.sorts))
            return _sym("%v")
        if isinstance(t, TThis):
            self.note_sort(infer_sort(t, self.sorts))
            return _sym("this")
        if isinstance(t, TConst):
            v = t.value
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v) if v >= 0 else f"(- {-v})"
            if isinstance(v, str):
                if v not in self.strings:
                    self.strings[v] = f"str!{len(self.strings)}"
                return self.strings[v]
            if v is UNDEFINED:
                self.funs.setdefault("undef!", ((), "Undef"))
                self.uninterp_sorts.add("Undef")
                return "undef!"
            self.funs.setdefault("null!", ((), "Null"))
            self.uninterp_sorts.add("Null")
            return "null!"
        if isinstance(t, TField):
            base = self.term(t.base)
            bs = self.note_sort(infer_sort(t.base, self.sorts))
            rs = self.note_sort(infer_sort(t, self.sorts))
            fn = f"fld_{t.fname}@{bs}"
            self.funs.setdefault(fn, ((bs,), rs))
            return f"({_sym(fn)} {base})"
        if isinstance(t, TUF):
            args = [self.term(a) for a in t.args]
            argsorts = [self.note_sort(infer_sort(a, self.sorts))
                        for a in t.args]
            rs = self.note_sort(infer_sort(t, self.sorts))
            fn = f"{t.fname}@{'+'.join(argsorts)}"
            self.funs.setdefault(fn, (tuple(argsorts), rs))
            return f"({_sym(fn)} {' '.join(args)})"
        if isinstance(t, TBuiltin):
            op = t.op
            args = [self.term(a) for a in t.args]
            if op in ("add", "sub", "mul"):
                sym = {"add": "+", "sub": "-", "mul": "*"}[op]
                return f"({sym} {args[0]} {args[1]})"
            if op in ("div", "mod"):
                fn = f"js{op}"
                self.funs.setdefault(fn, (("Int", "Int"), "Int"))
                return f"({fn} {args[0]} {args[1]})"
            if op in ("lt", "le", "gt", "ge"):
                sym = {"lt": "<", "le": "<=", "gt": ">", "ge": ">="}[op]
                return f"({sym} {args[0]} {args[1]})"
            if op == "eq":
                return f"(= {args[0]} {args[1]})"
            if op == "ne":
                return f"(not (= {args[0]} {args[1]}))"
            if op == "and":
                return f"(and {args[0]} {args[1]})"
            if op == "or":
                return f"(or {args[0]} {args[1]})"
            if op == "not":
                return f"(not {args[0]})"
            if op == "implies":
                return f"(=> {args[0]} {args[1]})"
        raise NormError(f"cannot emit {t!r}")

    def pred(self, p: Pred) -> str:
        if isinstance(p, PAnd):
            inner = " ".join(self.pred(c) for c in p.conjuncts)
            return f"(and {inner})"
        if isinstance(p, PNot):
            return f"(not {self.pred(p.pred)})"
        if isinstance(p, PAtom):
            return self.term(p.term)
        if isinstance(p, PKvar):
            raise NormError("refinement variable reached the solver")
        raise TypeError(p)


def emit(q) -> str:
    em = _Emitter(q.sort_map())
    hyp = em.pred(q.hyp)
    goal = em.pred(q.goal)
    lines = ["(set-logic ALL)"]
    for sname in sorted(em.uninterp_sorts):
        lines.append(f"(declare-sort {sname} 0)")
    for name, sort in q.sorts:
        if sort.kind == "bot":
            continue
        lines.append(f"(declare-const {_sym(name)}"
                     f" {_sort_name(sort)})")
    for lit in sorted(em.strings):
        if "Str" not in em.uninterp_sorts:
            lines.insert(1, "(declare-sort Str 0)")
            em.uninterp_sorts.add("Str")
        lines.append(f"(declare-const {em.strings[lit]} Str)"
                     f" ; {lit!r}")
    if len(em.strings) > 1:
        consts = " ".join(em.strings[k] for k in sorted(em.strings))
        lines.append(f"(assert (distinct {consts}))")
    for fn in sorted(em.funs):
        argsorts, ret = em.funs[fn]
        args = " ".join(argsorts)
        lines.append(f"(declare-fun {_sym(fn)} ({args}) {ret})")
    lines.append(f"(assert {hyp})")
    lines.append(f"(assert (not {goal}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def check_external(q, config):
    from . import Verdict
    if not config.command:
        return Verdict("unknown", reason="no external solver configured")
    try:
        script = emit(q)
    except NormError as e:
        return Verdict("unknown", reason=str(e))
    try:
        proc = subprocess.run(
            shlex.split(config.command), input=script, capture_output=True,
            text=True, timeout=config.timeout_ms / 1000.0)
    except subprocess.TimeoutExpired:
        return Verdict("unknown", reason="external solver timeout")
    except OSError as e:
        return Verdict("unknown", reason=f"cannot run solver: {e}")
    out = (proc.stdout or "").strip().splitlines()
    answer = out[-1].strip() if out else ""
    if answer == "unsat":
        return Verdict("valid")
    if answer == "sat":
        return Verdict("invalid", model="(external solver: sat)")
    detail = answer or (proc.stderr or "").strip()[:200] or "no output"
    return Verdict("unknown", reason=f"external solver said: {detail}")
