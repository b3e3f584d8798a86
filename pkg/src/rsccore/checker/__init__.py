"""Driver: typing rules over every declaration, constraint solving, and
the final verdict."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..infer import (
    KvarAssignment, KvarRegistry, default_qualifiers, solve, split_horn,
)
from ..logic import ClassTable, NameSupply, TypeEnv, WfViolation, wf_pred, wf_type
from ..solver import SolverConfig
from ..ssa import SsaErrors, ssa_program
from ..syntax import (
    BClass, ClassDecl, EConst, FuncDecl, P_TRUE, Program, RBase, RFun,
    RInter, RType, SourceSpan, trivially_refine, walk_body, stmt_exprs,
    walk_expr, BReturn, BSeq, BIte,
)
from .constraints import Constraint, Diagnostic
from .core import CheckAbort, Checker
from .ctor import CtorError, ctor_init_signature, ctor_rewrite
from .twophase import OverloadClone, two_phase_expand

__all__ = ["check_program", "CheckResult", "Diagnostic", "Constraint"]


@dataclass
class CheckResult:
    verdict: str  # "verified" | "errors"
    diagnostics: list
    constraints: list
    clauses: list
    assignment: Optional[KvarAssignment]
    registry: KvarRegistry
    classes: Optional[ClassTable]
    program: Optional[Program]
    config: SolverConfig

    @property
    def ok(self) -> bool:
        return self.verdict == "verified"

    def errors(self) -> list:
        return [d for d in self.diagnostics if d.severity == "error"]


def _collect_strings(program: Program) -> list:
    out: list = []

    def from_body(b):
        if b is None:
            return
        for node in walk_body(b):
            exprs = []
            if isinstance(node, (BReturn,)):
                exprs = [node.expr]
            elif isinstance(node, BIte):
                exprs = [node.cond]
            elif hasattr(node, "span") and not isinstance(node, (BSeq,)):
                exprs = stmt_exprs(node)
            for e in exprs:
                for sub in walk_expr(e):
                    if isinstance(sub, EConst) and isinstance(sub.value, str):
                        if sub.value not in out:
                            out.append(sub.value)

    for f in program.functions:
        from_body(f.body)
    for c in program.classes:
        for m in c.methods:
            from_body(m.body)
    from_body(program.top)
    return out


def check_program(program: Program, config: Optional[SolverConfig] = None,
                  qualifiers: Optional[list] = None,
                  strict_unknown: bool = False) -> CheckResult:
    config = config or SolverConfig()
    diags: list[Diagnostic] = []
    registry = KvarRegistry()
    supply = NameSupply()

    def fail() -> CheckResult:
        return CheckResult("errors", diags, [], [], None, registry, None,
                           program, config)

    try:
        classes = ClassTable(program)
    except WfViolation as e:
        diags.append(Diagnostic("error", SourceSpan(program.file, 0, 0, 1, 1),
                                "CLASS", e.reason))
        return fail()

    # class declarations: field types, invariants, constructor rewriting
    ctor_inits: dict = {}
    witnesses: dict = {}
    checked_classes: list[ClassDecl] = []
    for c in program.classes:
        env_this = TypeEnv(classes, supply).bind_raw(
            "this", trivially_refine(BClass(c.name)))
        for f in c.fields:
            for v in wf_type(env_this, f.rtype):
                diags.append(Diagnostic("error", f.span, "WF", v))
        for v in wf_pred(env_this, c.invariant, None):
            diags.append(Diagnostic("error", c.span, "WF", v))
        try:
            rewritten, wit = ctor_rewrite(c, classes)
            info = ctor_init_signature(classes, c.name)
        except (CtorError,) as e:
            diags.append(Diagnostic("error", e.span, "CTOR", e.msg))
            continue
        except WfViolation as e:
            diags.append(Diagnostic("error", c.span, "CTOR", e.reason))
            continue
        ctor_inits[c.name] = info.init_sig
        witnesses[c.name] = wit
        methods = [m for m in c.methods if not m.is_ctor] + [rewritten]
        checked_classes.append(ClassDecl(c.name, c.invariant, c.parent,
                                         c.fields, methods, c.span))
    if any(d.severity == "error" for d in diags):
        return fail()

    # two-phase expansion of intersection-typed functions
    clones: list[OverloadClone] = []
    check_funcs: list[FuncDecl] = []
    for f in program.functions:
        if isinstance(f.signature, RInter) and f.body is not None:
            try:
                cs = two_phase_expand(f, program)
            except Exception as e:  # shape-system structural failure
                diags.append(Diagnostic("error", f.span, "OVERLOAD", str(e)))
                return fail()
            clones.extend(cs)
            check_funcs.append(FuncDecl(f.name, f.params, f.signature,
                                        None, f.span))
        else:
            check_funcs.append(f)
    for cl in clones:
        check_funcs.append(cl.decl)

    program2 = Program(program.aliases, checked_classes, check_funcs,
                       program.top, program.file)
    try:
        ssa2, theta2 = ssa_program(program2)
    except SsaErrors as errs:
        for e in errs.errors:
            diags.append(Diagnostic("error", e.span, "SSA", e.msg))
        return fail()

    checker = Checker(program2, classes, registry, supply, config,
                      ctor_inits, witnesses)
    checker.fn_sigs = {f.name: f.signature for f in program.functions}
    for cl in clones:
        checker.fn_sigs[cl.name] = cl.decl.signature
    checker.fn_decls = {f.name: f for f in check_funcs}
    checker.ssa_funcs = ssa2.functions
    registry.note_strings(_collect_strings(program))

    clone_names = {cl.name: cl for cl in clones}

    # -- functions ---------------------------------------------------------
    from ..semantics.frsc import subst_expr
    from ..syntax import EConst as _EConst

    for f in check_funcs:
        if f.body is None or f.signature is None:
            continue
        sig = f.signature
        if not isinstance(sig, RFun):
            continue
        sf = ssa2.functions.get(f.name)
        if sf is None or sf.body is None:
            continue
        checker.current_unit = f.name
        env = TypeEnv(classes, supply)
        try:
            for n, pt in sig.params:
                checker.emit_wf(env, pt, f.span, "WF-SIG")
                env = checker._bind(env, n, pt)
            if sig.ret is not None:
                checker.emit_wf(env, sig.ret, f.span, "WF-SIG")
            if sig.precond != P_TRUE:
                env = env.guard(sig.precond)
            body = subst_expr(sf.body,
                              {"#argc": _EConst(len(sig.params), nid=0)})
            t_body = checker.check_expr(env, body)
            if sig.ret is None:
                inferred = _trivial_ret(t_body)
                newsig = RFun(sig.params, inferred, sig.tyvars, sig.precond)
                f.signature = newsig
                checker.fn_sigs[f.name] = newsig
            else:
                checker.sub(env, t_body, sig.ret, f.span, "RET")
        except CheckAbort as a:
            d = a.diag
            if f.name in clone_names:
                cl = clone_names[f.name]
                d = Diagnostic(d.severity, d.span, d.rule,
                               f"overload {cl.index} of {cl.base_name}:"
                               f" {d.message}", d.vc)
            diags.append(d)

    # -- methods -----------------------------------------------------------
    for c in checked_classes:
        for m in c.methods:
            sm = ssa2.methods.get((c.name, m.name))
            if sm is None:
                continue
            checker.current_unit = f"{c.name}.{m.name}"
            checker._current_ctor = c.name if m.is_ctor else None
            env = TypeEnv(classes, supply)
            try:
                env = env.bind_raw("this", trivially_refine(BClass(c.name)),
                                   raw_class=m.is_ctor)
                for n, pt in m.params:
                    checker.emit_wf(env, pt, m.span, "WF-SIG")
                    env = checker._bind(env, n, pt)
                checker.emit_wf(env, m.ret, m.span, "WF-SIG")
                if m.precond != P_TRUE:
                    env = env.guard(m.precond)
                body = subst_expr(sm.body,
                                  {"#argc": _EConst(len(m.params), nid=0)})
                t_body = checker.check_expr(env, body)
                if not m.is_ctor:
                    checker.sub(env, t_body, m.ret, m.span, "RET")
            except CheckAbort as a:
                diags.append(a.diag)
            finally:
                checker._current_ctor = None

    # -- top level -----------------------------------------------------------
    if ssa2.top is not None:
        checker.current_unit = "<top>"
        env = TypeEnv(classes, supply)
        try:
            checker.check_expr(env, ssa2.top)
        except CheckAbort as a:
            diags.append(a.diag)

    diags.extend(checker.diags)

    # -- solve ---------------------------------------------------------------
    clauses = split_horn(checker.constraints, registry, classes)
    quals = default_qualifiers() + (qualifiers or [])
    assignment = None
    if not any(d.severity == "error" for d in diags):
        try:
            assignment, failures = solve(clauses, quals, registry, config,
                                         strict_unknown=strict_unknown)
        except WfViolation as e:
            diags.append(Diagnostic("error",
                                    SourceSpan(program.file, 0, 0, 1, 1),
                                    "SOLVE", e.reason))
            failures = []
        for fl in failures:
            why = fl.verdict.reason if fl.verdict.status == "unknown" else \
                (f"counterexample: {fl.verdict.model}"
                 if fl.verdict.model else "not valid")
            msg = "verification condition failed" if \
                fl.verdict.status == "invalid" else \
                "could not verify (solver unknown)"
            if fl.clause.unit in clone_names:
                cl = clone_names[fl.clause.unit]
                msg = f"overload {cl.index} of {cl.base_name}: {msg}"
            diags.append(Diagnostic("error", fl.clause.span, fl.clause.rule,
                                    f"{msg}: {why}",
                                    vc=fl.clause.describe()))

    diags.sort(key=lambda d: (d.span.file, d.span.line, d.span.col,
                              d.rule, d.message))
    verdict = "errors" if any(d.severity == "error" for d in diags) \
        else "verified"
    return CheckResult(verdict, diags, checker.constraints, clauses,
                       assignment, registry, classes, program2, config)


def _trivial_ret(t: RType) -> RType:
    from ..syntax import RExists
    while isinstance(t, RExists):
        t = t.body
    if isinstance(t, RBase):
        return trivially_refine(t.base)
    return t
