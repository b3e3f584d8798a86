"""Abstract syntax shared by every stage of the pipeline.

Three layers live here:

* the imperative source language (statements, bodies, class/function decls),
* its functional SSA target (let/letif/letwhile contexts over expressions),
* the logic vocabulary (terms, predicates, refinement types) that the
  checker, inference engine and solver all consume.

Types and predicates are immutable and hashable; program nodes are plain
mutable dataclasses carrying a node id and a source span.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


# ---------------------------------------------------------------------------
# Spans and node ids


@dataclass(frozen=True)
class SourceSpan:
    file: str
    start: int
    end: int
    line: int
    col: int
    end_line: int = 0
    end_col: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


NO_SPAN = SourceSpan("<builtin>", 0, 0, 0, 0)

_node_counter = itertools.count(1)


def next_node_id() -> int:
    return next(_node_counter)


# ---------------------------------------------------------------------------
# Runtime value sentinels (shared by parser literals and the interpreters)


class _Undefined:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "undefined"


class _Null:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "null"


UNDEFINED = _Undefined()
NULL = _Null()

Literal = Union[int, bool, str, _Undefined, _Null]


def literal_str(v: Literal) -> str:
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, str):
        return '"%s"' % v.replace('"', '\\"')
    return repr(v) if not isinstance(v, int) else str(v)


# ---------------------------------------------------------------------------
# Logical terms


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class TConst:
    value: Literal


@dataclass(frozen=True)
class TValueVar:
    """The reserved value variable (printed as `v`)."""


@dataclass(frozen=True)
class TThis:
    pass


@dataclass(frozen=True)
class TField:
    base: "Term"
    fname: str


@dataclass(frozen=True)
class TUF:
    """Uninterpreted function application: len, ttag, instanceof, ..."""

    fname: str
    args: tuple


@dataclass(frozen=True)
class TBuiltin:
    """Builtin operator application: add/sub/mul/div/mod, lt/le/gt/ge,
    eq/ne, and/or/not."""

    op: str
    args: tuple


Term = Union[TVar, TConst, TValueVar, TThis, TField, TUF, TBuiltin]

VV = TValueVar()


# ---------------------------------------------------------------------------
# Predicates


@dataclass(frozen=True)
class PAnd:
    conjuncts: tuple


@dataclass(frozen=True)
class PNot:
    pred: "Pred"


@dataclass(frozen=True)
class PAtom:
    term: Term


@dataclass(frozen=True)
class PKvar:
    """A refinement (kappa) variable application under a substitution.

    `subst` maps formal names (including the value variable, keyed as "v")
    to terms; it stays identity-shaped through checking and is resolved by
    the inference fixpoint.
    """

    kid: int
    subst: tuple  # tuple[(str, Term)], sorted by name


Pred = Union[PAnd, PNot, PAtom, PKvar]

P_TRUE = PAtom(TConst(True))
P_FALSE = PAtom(TConst(False))


def p_and(*preds: Pred) -> Pred:
    flat: list[Pred] = []
    for p in preds:
        if isinstance(p, PAnd):
            flat.extend(p.conjuncts)
        elif p == P_TRUE:
            continue
        else:
            flat.append(p)
    if not flat:
        return P_TRUE
    if len(flat) == 1:
        return flat[0]
    return PAnd(tuple(flat))


def p_not(p: Pred) -> Pred:
    if p == P_TRUE:
        return P_FALSE
    if p == P_FALSE:
        return P_TRUE
    if isinstance(p, PNot):
        return p.pred
    return PNot(p)


def p_or(a: Pred, b: Pred) -> Pred:
    return p_not(p_and(p_not(a), p_not(b)))


def p_implies(a: Pred, b: Pred) -> Pred:
    return p_not(p_and(a, p_not(b)))


def p_eq(a: Term, b: Term) -> Pred:
    return PAtom(TBuiltin("eq", (a, b)))


def conjuncts_of(p: Pred) -> list[Pred]:
    if isinstance(p, PAnd):
        out = []
        for c in p.conjuncts:
            out.extend(conjuncts_of(c))
        return out
    if p == P_TRUE:
        return []
    return [p]


# ---------------------------------------------------------------------------
# Base types and refinement types


@dataclass(frozen=True)
class BPrim:
    name: str  # number | bool | string | undefined | null


@dataclass(frozen=True)
class BClass:
    name: str


@dataclass(frozen=True)
class BVar:
    """A rigid type variable (generic placeholder)."""

    name: str


@dataclass(frozen=True)
class BBot:
    """Uninhabited base; only produced for un-unified instantiations
    (e.g. the return of `assert`)."""


@dataclass(frozen=True)
class BArr:
    elem: "RType"
    mut: str = "imm"


Base = Union[BPrim, BClass, BVar, BBot, BArr]

B_NUM = BPrim("number")
B_BOOL = BPrim("bool")
B_STR = BPrim("string")
B_UNDEF = BPrim("undefined")
B_NULL = BPrim("null")


@dataclass(frozen=True)
class RBase:
    base: Base
    pred: Pred


@dataclass(frozen=True)
class RExists:
    name: str
    bound: "RType"
    body: "RType"


@dataclass(frozen=True)
class RFun:
    params: tuple  # tuple[(str, RType)]
    ret: "RType"
    tyvars: tuple = ()
    precond: Pred = P_TRUE


@dataclass(frozen=True)
class RInter:
    conjuncts: tuple  # tuple[RFun]


RType = Union[RBase, RExists, RFun, RInter]


def trivially_refine(base: Base) -> RType:
    """t abbreviates {v:t | true}."""
    return RBase(base, P_TRUE)


R_NUM = trivially_refine(B_NUM)
R_BOOL = trivially_refine(B_BOOL)
R_STR = trivially_refine(B_STR)
R_UNDEF = trivially_refine(B_UNDEF)
R_NULL = trivially_refine(B_NULL)
R_BOT = RBase(BBot(), P_FALSE)


# ---------------------------------------------------------------------------
# Free variables and substitution over terms / predicates / types


def term_free_vars(t: Term) -> set[str]:
    if isinstance(t, TVar):
        return {t.name}
    if isinstance(t, TField):
        return term_free_vars(t.base)
    if isinstance(t, (TUF, TBuiltin)):
        out: set[str] = set()
        for a in t.args:
            out |= term_free_vars(a)
        return out
    return set()


def pred_free_vars(p: Pred) -> set[str]:
    if isinstance(p, PAnd):
        out: set[str] = set()
        for c in p.conjuncts:
            out |= pred_free_vars(c)
        return out
    if isinstance(p, PNot):
        return pred_free_vars(p.pred)
    if isinstance(p, PAtom):
        return term_free_vars(p.term)
    if isinstance(p, PKvar):
        out = set()
        for _, t in p.subst:
            out |= term_free_vars(t)
        return out
    raise TypeError(p)


def free_type_vars(t: RType) -> set[str]:
    """Logical variables occurring free in the type's predicates."""
    if isinstance(t, RBase):
        out = pred_free_vars(t.pred)
        if isinstance(t.base, BArr):
            out |= free_type_vars(t.base.elem)
        return out
    if isinstance(t, RExists):
        return free_type_vars(t.bound) | (free_type_vars(t.body) - {t.name})
    if isinstance(t, RFun):
        out = pred_free_vars(t.precond)
        bound: set[str] = set()
        for name, pt in t.params:
            out |= free_type_vars(pt) - bound
            bound.add(name)
        out |= free_type_vars(t.ret) - bound
        return out
    if isinstance(t, RInter):
        out = set()
        for c in t.conjuncts:
            out |= free_type_vars(c)
        return out
    raise TypeError(t)


def term_subst(t: Term, m: dict) -> Term:
    """Substitute terms for names in `m`; the key "v" stands for the value
    variable and "this" for the receiver."""
    if isinstance(t, TVar):
        return m.get(t.name, t)
    if isinstance(t, TValueVar):
        return m.get("v", t)
    if isinstance(t, TThis):
        return m.get("this", t)
    if isinstance(t, TField):
        return TField(term_subst(t.base, m), t.fname)
    if isinstance(t, TUF):
        return TUF(t.fname, tuple(term_subst(a, m) for a in t.args))
    if isinstance(t, TBuiltin):
        return TBuiltin(t.op, tuple(term_subst(a, m) for a in t.args))
    return t


def pred_subst(p: Pred, m: dict) -> Pred:
    if not m:
        return p
    if isinstance(p, PAnd):
        return PAnd(tuple(pred_subst(c, m) for c in p.conjuncts))
    if isinstance(p, PNot):
        return PNot(pred_subst(p.pred, m))
    if isinstance(p, PAtom):
        return PAtom(term_subst(p.term, m))
    if isinstance(p, PKvar):
        return PKvar(p.kid, tuple((n, term_subst(t, m)) for n, t in p.subst))
    raise TypeError(p)


_fresh_alpha = itertools.count(1)


def type_subst(t: RType, m: dict) -> RType:
    """Capture-avoiding substitution of terms for free logical names."""
    if not m:
        return t
    if isinstance(t, RBase):
        base = t.base
        if isinstance(base, BArr):
            base = BArr(type_subst(base.elem, m), base.mut)
        return RBase(base, pred_subst(t.pred, m))
    if isinstance(t, RExists):
        binder = t.name
        body = t.body
        m2 = {k: v for k, v in m.items() if k != binder}
        hit = set()
        for v in m2.values():
            hit |= term_free_vars(v)
        if binder in hit:
            fresh = f"{binder}%{next(_fresh_alpha)}"
            body = type_subst(body, {binder: TVar(fresh)})
            binder = fresh
        return RExists(binder, type_subst(t.bound, m), type_subst(body, m2))
    if isinstance(t, RFun):
        m2 = dict(m)
        params = []
        for name, pt in t.params:
            params.append((name, type_subst(pt, m2)))
            m2.pop(name, None)
        return RFun(tuple(params), type_subst(t.ret, m2), t.tyvars,
                    pred_subst(t.precond, m2))
    if isinstance(t, RInter):
        return RInter(tuple(type_subst(c, m) for c in t.conjuncts))
    raise TypeError(t)


def base_subst(t: RType, m: dict) -> RType:
    """Substitute refinement types for type-variable bases."""
    if not m:
        return t
    if isinstance(t, RBase):
        base = t.base
        if isinstance(base, BVar) and base.name in m:
            inst = m[base.name]
            if isinstance(inst, RBase):
                return RBase(inst.base, p_and(inst.pred, t.pred))
            if t.pred == P_TRUE:
                return inst
            raise TypeError(f"cannot refine instantiation of {base.name}")
        if isinstance(base, BArr):
            return RBase(BArr(base_subst(base.elem, m), base.mut), t.pred)
        return t
    if isinstance(t, RExists):
        return RExists(t.name, base_subst(t.bound, m), base_subst(t.body, m))
    if isinstance(t, RFun):
        m2 = {k: v for k, v in m.items() if k not in t.tyvars}
        return RFun(tuple((n, base_subst(pt, m2)) for n, pt in t.params),
                    base_subst(t.ret, m2), t.tyvars, t.precond)
    if isinstance(t, RInter):
        return RInter(tuple(base_subst(c, m) for c in t.conjuncts))
    raise TypeError(t)


def type_base_vars(t: RType) -> set[str]:
    if isinstance(t, RBase):
        if isinstance(t.base, BVar):
            return {t.base.name}
        if isinstance(t.base, BArr):
            return type_base_vars(t.base.elem)
        return set()
    if isinstance(t, RExists):
        return type_base_vars(t.bound) | type_base_vars(t.body)
    if isinstance(t, RFun):
        out = set()
        for _, pt in t.params:
            out |= type_base_vars(pt)
        out |= type_base_vars(t.ret)
        return out - set(t.tyvars)
    if isinstance(t, RInter):
        out = set()
        for c in t.conjuncts:
            out |= type_base_vars(c)
        return out
    raise TypeError(t)


# ---------------------------------------------------------------------------
# Source expressions (shared by the imperative language and, with a few
# extra forms, the SSA target)


@dataclass
class Node:
    nid: int = field(default=-1, kw_only=True)
    span: SourceSpan = field(default=NO_SPAN, kw_only=True)


@dataclass
class EVar(Node):
    name: str


@dataclass
class EConst(Node):
    value: Literal


@dataclass
class EThis(Node):
    pass


@dataclass
class EFieldRead(Node):
    obj: "Expr"
    fname: str


@dataclass
class EMethodCall(Node):
    obj: "Expr"
    mname: str
    args: list


@dataclass
class EFuncCall(Node):
    """Call of a named top-level function or builtin, or through a
    local variable holding a closure (callee as expression)."""

    callee: "Expr"
    args: list


@dataclass
class ENew(Node):
    cname: str
    args: list


@dataclass
class ECast(Node):
    rtype: RType
    expr: "Expr"


@dataclass
class EClosure(Node):
    """Reference to a lambda-lifted nested function with its captures."""

    fname: str
    captures: list


@dataclass
class EArgsLen(Node):
    """`arguments.length`; resolved to a constant per overload conjunct."""


@dataclass
class EVal(Node):
    """Runtime-only leaf holding an evaluated value."""

    value: object


@dataclass
class EFieldAssign(Node):
    """FRSC-only expression form e1.f = e2 (statement in the source)."""

    obj: "Expr"
    fname: str
    rhs: "Expr"


@dataclass
class ECtxApply(Node):
    """FRSC: an SSA context applied to its continuation, K[e]."""

    ctx: "Ctx"
    expr: "Expr"


Expr = Union[EVar, EConst, EThis, EFieldRead, EMethodCall, EFuncCall, ENew,
             ECast, EClosure, EArgsLen, EVal, EFieldAssign, ECtxApply]


# ---------------------------------------------------------------------------
# SSA contexts


@dataclass
class PhiIf:
    """phi = left in branch 1, right in branch 2."""

    src: str
    phi: str
    left: str
    right: str


@dataclass
class PhiWhile:
    """phi joins init (loop entry) with next (back edge)."""

    src: str
    phi: str
    init: str
    next: str


@dataclass
class KHole(Node):
    pass


@dataclass
class KLetIn(Node):
    name: str
    expr: Expr
    rest: "Ctx"


@dataclass
class KLetIf(Node):
    phis: list  # list[PhiIf]
    cond: Expr
    then_ctx: "Ctx"
    else_ctx: "Ctx"
    rest: "Ctx"
    # expression slots for the branch values a phi selects; names bound
    # inside a branch stay symbolic until that branch's lets fire, names
    # bound outside are rewritten to values by enclosing substitutions
    left_exprs: Optional[list] = None
    right_exprs: Optional[list] = None

    def lefts(self) -> list:
        if self.left_exprs is None:
            self.left_exprs = [EVar(p.left, nid=next_node_id())
                               for p in self.phis]
        return self.left_exprs

    def rights(self) -> list:
        if self.right_exprs is None:
            self.right_exprs = [EVar(p.right, nid=next_node_id())
                                for p in self.phis]
        return self.right_exprs


@dataclass
class KLetWhile(Node):
    phis: list  # list[PhiWhile]
    cond: Expr
    body_ctx: "Ctx"
    rest: "Ctx"
    # current values flowing into the phi names; starts as [EVar(p.init)]
    # and is rewritten by substitution as enclosing bindings reduce
    init_exprs: Optional[list] = None

    def inits(self) -> list:
        if self.init_exprs is None:
            self.init_exprs = [EVar(p.init, nid=next_node_id())
                               for p in self.phis]
        return self.init_exprs


Ctx = Union[KHole, KLetIn, KLetIf, KLetWhile]


# ---------------------------------------------------------------------------
# Source statements and bodies


@dataclass
class SVarDecl(Node):
    name: str
    expr: Expr


@dataclass
class SAssign(Node):
    name: str
    expr: Expr


@dataclass
class SFieldAssign(Node):
    obj: Expr
    fname: str
    rhs: Expr


@dataclass
class SExprStmt(Node):
    expr: Expr


@dataclass
class SIte(Node):
    cond: Expr
    then_s: "Stmt"
    else_s: "Stmt"


@dataclass
class SWhile(Node):
    phis: list  # list[PhiWhile]; empty until SSA fills it
    cond: Expr
    body: "Stmt"


@dataclass
class SSeq(Node):
    first: "Stmt"
    second: "Stmt"


@dataclass
class SSkip(Node):
    pass


Stmt = Union[SVarDecl, SAssign, SFieldAssign, SExprStmt, SIte, SWhile, SSeq,
             SSkip]


@dataclass
class BReturn(Node):
    expr: Expr


@dataclass
class BSeq(Node):
    stmt: Stmt
    rest: "Body"


@dataclass
class BIte(Node):
    """A conditional whose branches both conclude the body (the image of
    early returns after normalization)."""

    cond: Expr
    then_b: "Body"
    else_b: "Body"


Body = Union[BReturn, BSeq, BIte]


def seq_stmts(stmts: list, span: SourceSpan) -> Stmt:
    """Right-nested Seq normal form."""
    if not stmts:
        return SSkip(span=span, nid=next_node_id())
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = SSeq(s, out, span=s.span, nid=next_node_id())
    return out


# ---------------------------------------------------------------------------
# Declarations


@dataclass
class FieldDecl:
    mut: str  # "imm" | "mut"
    name: str
    rtype: RType
    span: SourceSpan = NO_SPAN


@dataclass
class MethodDecl:
    name: str
    params: list  # list[(str, RType)]
    precond: Pred
    ret: RType
    body: Optional[Body]
    tyvars: tuple = ()
    span: SourceSpan = NO_SPAN
    is_ctor: bool = False


@dataclass
class ClassDecl:
    name: str
    invariant: Pred
    parent: Optional[str]
    fields: list  # list[FieldDecl]
    methods: list  # list[MethodDecl]
    span: SourceSpan = NO_SPAN


@dataclass
class FuncDecl:
    name: str
    params: list  # list[str]; types live in `signature`
    signature: Optional[RType]  # RFun or RInter; None = unannotated (nested)
    body: Optional[Body]  # None = ghost (trusted lemma)
    span: SourceSpan = NO_SPAN
    is_ghost: bool = False
    captures: list = field(default_factory=list)  # lifted closure captures


@dataclass
class TypeAliasDecl:
    name: str
    params: list  # list[str]
    body: RType  # may contain BVar / TVar placeholders for params
    span: SourceSpan = NO_SPAN


@dataclass
class Program:
    aliases: dict
    classes: list  # list[ClassDecl]
    functions: list  # list[FuncDecl]
    top: Optional[Body]
    file: str = "<input>"


# ---------------------------------------------------------------------------
# Pretty printing


_PREC = {"or": 1, "and": 2, "eq": 3, "ne": 3, "lt": 4, "le": 4, "gt": 4,
         "ge": 4, "add": 5, "sub": 5, "mul": 6, "div": 6, "mod": 6}
_OPTXT = {"or": "||", "and": "&&", "eq": "=", "ne": "!=", "lt": "<",
          "le": "<=", "gt": ">", "ge": ">=", "add": "+", "sub": "-",
          "mul": "*", "div": "/", "mod": "%"}


def term_str(t: Term, prec: int = 0) -> str:
    if isinstance(t, TVar):
        return t.name
    if isinstance(t, TConst):
        return literal_str(t.value)
    if isinstance(t, TValueVar):
        return "v"
    if isinstance(t, TThis):
        return "this"
    if isinstance(t, TField):
        return f"{term_str(t.base, 9)}.{t.fname}"
    if isinstance(t, TUF):
        return f"{t.fname}({', '.join(term_str(a) for a in t.args)})"
    if isinstance(t, TBuiltin):
        if t.op == "not":
            return f"!{term_str(t.args[0], 9)}"
        if t.op == "neg":
            return f"-{term_str(t.args[0], 9)}"
        p = _PREC[t.op]
        s = f" {_OPTXT[t.op]} ".join(term_str(a, p + 1) for a in t.args)
        return f"({s})" if p < prec else s
    raise TypeError(t)


def pred_str(p: Pred) -> str:
    if isinstance(p, PAnd):
        return " && ".join(f"({pred_str(c)})" if isinstance(c, PAnd) else
                           pred_str(c) for c in p.conjuncts)
    if isinstance(p, PNot):
        inner = p.pred
        # re-sugar p => q, printed from not(p && not q)
        if isinstance(inner, PAnd) and len(inner.conjuncts) == 2 and \
                isinstance(inner.conjuncts[1], PNot):
            lhs, rhs = inner.conjuncts
            return f"({pred_str(lhs)}) => ({pred_str(rhs.pred)})"
        return f"!({pred_str(inner)})"
    if isinstance(p, PAtom):
        return term_str(p.term)
    if isinstance(p, PKvar):
        sub = ", ".join(f"{n}:={term_str(t)}" for n, t in p.subst
                        if not (isinstance(t, TVar) and t.name == n)
                        and not (n == "v" and isinstance(t, TValueVar)))
        return f"k{p.kid}" + (f"[{sub}]" if sub else "")
    raise TypeError(p)


def base_str(b: Base) -> str:
    if isinstance(b, BPrim):
        return b.name
    if isinstance(b, (BClass, BVar)):
        return b.name
    if isinstance(b, BBot):
        return "bot"
    if isinstance(b, BArr):
        return f"{type_str(b.elem, 9)}[]"
    raise TypeError(b)


def type_str(t: RType, prec: int = 0) -> str:
    if isinstance(t, RBase):
        if t.pred == P_TRUE:
            return base_str(t.base)
        return "{v:%s | %s}" % (base_str(t.base), pred_str(t.pred))
    if isinstance(t, RExists):
        s = f"exists {t.name}:{type_str(t.bound)}. {type_str(t.body)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, RFun):
        tv = f"<{', '.join(t.tyvars)}>" if t.tyvars else ""
        ps = ", ".join(f"{n}:{type_str(pt)}" for n, pt in t.params)
        s = f"{tv}({ps}) => {type_str(t.ret)}"
        if t.precond != P_TRUE:
            s += f" requires {pred_str(t.precond)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, RInter):
        return " /\\ ".join(type_str(c, 9) for c in t.conjuncts)
    raise TypeError(t)


_SRC_BINOPS = {"+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=",
               "===", "!==", "&&", "||"}


def expr_str(e: Expr) -> str:
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EConst):
        return literal_str(e.value)
    if isinstance(e, EThis):
        return "this"
    if isinstance(e, EFieldRead):
        return f"{expr_str(e.obj)}.{e.fname}"
    if isinstance(e, EMethodCall):
        return f"{expr_str(e.obj)}.{e.mname}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, EFuncCall):
        if isinstance(e.callee, EVar):
            name = e.callee.name
            if name in _SRC_BINOPS and len(e.args) == 2:
                return f"({expr_str(e.args[0])} {name} {expr_str(e.args[1])})"
            if name == "!" and len(e.args) == 1:
                return f"!{expr_str(e.args[0])}"
            if name == "neg" and len(e.args) == 1:
                return f"(-{expr_str(e.args[0])})"
            if name == "typeof" and len(e.args) == 1:
                return f"typeof {expr_str(e.args[0])}"
            if name == "newarray#":
                return f"new Array({', '.join(expr_str(a) for a in e.args)})"
            if name == "arraylit#":
                return f"[{', '.join(expr_str(a) for a in e.args)}]"
        return f"{expr_str(e.callee)}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, ENew):
        return f"new {e.cname}({', '.join(expr_str(a) for a in e.args)})"
    if isinstance(e, ECast):
        return f"<{type_str(e.rtype)}> {expr_str(e.expr)}"
    if isinstance(e, EClosure):
        return e.fname
    if isinstance(e, EArgsLen):
        return "arguments.length"
    if isinstance(e, EVal):
        v = e.value
        return literal_str(v) if isinstance(v, (int, bool, str)) or v in (
            UNDEFINED, NULL) else f"#{v!r}"
    if isinstance(e, EFieldAssign):
        return f"{expr_str(e.obj)}.{e.fname} = {expr_str(e.rhs)}"
    if isinstance(e, ECtxApply):
        return ctx_str(e.ctx, expr_str(e.expr))
    raise TypeError(e)


def ctx_str(k: Ctx, hole: str) -> str:
    if isinstance(k, KHole):
        return hole
    if isinstance(k, KLetIn):
        return f"let {k.name} = {expr_str(k.expr)} in\n{ctx_str(k.rest, hole)}"
    if isinstance(k, KLetIf):
        phis = ", ".join(f"{p.phi}=phi({p.left},{p.right})" for p in k.phis)
        return (f"letif [{phis}] ({expr_str(k.cond)})"
                f" {{ {ctx_str(k.then_ctx, 'o')} }}"
                f" {{ {ctx_str(k.else_ctx, 'o')} }} in\n{ctx_str(k.rest, hole)}")
    if isinstance(k, KLetWhile):
        phis = ", ".join(f"{p.phi}=phi({p.init},{p.next})" for p in k.phis)
        return (f"letwhile [{phis}] ({expr_str(k.cond)})"
                f" {{ {ctx_str(k.body_ctx, 'o')} }} in\n{ctx_str(k.rest, hole)}")
    raise TypeError(k)


def stmt_str(s: Stmt, ind: str = "") -> str:
    if isinstance(s, SVarDecl):
        return f"{ind}var {s.name} = {expr_str(s.expr)};"
    if isinstance(s, SAssign):
        return f"{ind}{s.name} = {expr_str(s.expr)};"
    if isinstance(s, SFieldAssign):
        return f"{ind}{expr_str(s.obj)}.{s.fname} = {expr_str(s.rhs)};"
    if isinstance(s, SExprStmt):
        return f"{ind}{expr_str(s.expr)};"
    if isinstance(s, SIte):
        return (f"{ind}if ({expr_str(s.cond)}) {{\n{stmt_str(s.then_s, ind + '  ')}\n"
                f"{ind}}} else {{\n{stmt_str(s.else_s, ind + '  ')}\n{ind}}}")
    if isinstance(s, SWhile):
        return (f"{ind}while ({expr_str(s.cond)}) {{\n"
                f"{stmt_str(s.body, ind + '  ')}\n{ind}}}")
    if isinstance(s, SSeq):
        return f"{stmt_str(s.first, ind)}\n{stmt_str(s.second, ind)}"
    if isinstance(s, SSkip):
        return f"{ind};"
    raise TypeError(s)


def body_str(b: Body, ind: str = "") -> str:
    if isinstance(b, BReturn):
        return f"{ind}return {expr_str(b.expr)};"
    if isinstance(b, BSeq):
        return f"{stmt_str(b.stmt, ind)}\n{body_str(b.rest, ind)}"
    if isinstance(b, BIte):
        return (f"{ind}if ({expr_str(b.cond)}) {{\n{body_str(b.then_b, ind + '  ')}\n"
                f"{ind}}} else {{\n{body_str(b.else_b, ind + '  ')}\n{ind}}}")
    raise TypeError(b)


# ---------------------------------------------------------------------------
# Generic traversal helpers


def expr_children(e: Expr) -> list:
    if isinstance(e, (EVar, EConst, EThis, EArgsLen, EVal)):
        return []
    if isinstance(e, EFieldRead):
        return [e.obj]
    if isinstance(e, EMethodCall):
        return [e.obj, *e.args]
    if isinstance(e, EFuncCall):
        return [e.callee, *e.args]
    if isinstance(e, ENew):
        return list(e.args)
    if isinstance(e, ECast):
        return [e.expr]
    if isinstance(e, EClosure):
        return list(e.captures)
    if isinstance(e, EFieldAssign):
        return [e.obj, e.rhs]
    if isinstance(e, ECtxApply):
        return []
    raise TypeError(e)


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    for c in expr_children(e):
        yield from walk_expr(c)


def stmt_exprs(s: Stmt) -> list:
    if isinstance(s, (SVarDecl, SAssign)):
        return [s.expr]
    if isinstance(s, SFieldAssign):
        return [s.obj, s.rhs]
    if isinstance(s, SExprStmt):
        return [s.expr]
    if isinstance(s, SIte):
        return [s.cond]
    if isinstance(s, SWhile):
        return [s.cond]
    return []


def walk_stmts(s: Stmt) -> Iterator[Stmt]:
    yield s
    if isinstance(s, SIte):
        yield from walk_stmts(s.then_s)
        yield from walk_stmts(s.else_s)
    elif isinstance(s, SWhile):
        yield from walk_stmts(s.body)
    elif isinstance(s, SSeq):
        yield from walk_stmts(s.first)
        yield from walk_stmts(s.second)


def walk_body(b: Body) -> Iterator[Union[Stmt, Body]]:
    yield b
    if isinstance(b, BSeq):
        yield from walk_stmts(b.stmt)
        yield from walk_body(b.rest)
    elif isinstance(b, BIte):
        yield from walk_body(b.then_b)
        yield from walk_body(b.else_b)


def assigned_names(s: Stmt, outer: set[str]) -> list[str]:
    """Variables from `outer` that s updates anywhere (assignment, or a
    re-declaration of a live name), in first-update order."""
    seen: list[str] = []
    for node in walk_stmts(s):
        if isinstance(node, (SVarDecl, SAssign)):
            if node.name in outer and node.name not in seen:
                seen.append(node.name)
    return seen
