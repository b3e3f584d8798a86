"""Phase-two expansion of intersection-typed functions: one clone per
conjunct, with shape-ill-typed statements replaced by dead-code assertions
and arguments.length resolved to the conjunct's arity."""

from __future__ import annotations

from dataclasses import dataclass

from ..frontend.desugar import _clone
from ..frontend.prelude import load_prelude
from ..syntax import (
    Body, EArgsLen, EConst, FuncDecl, Program, RFun, RInter, next_node_id,
)
from .shapes import ShapeChecker


@dataclass
class OverloadClone:
    base_name: str
    index: int  # 1-based conjunct index
    conjunct: RFun
    decl: FuncDecl

    @property
    def name(self) -> str:
        return self.decl.name


def _replace_argslen(node, arity: int):
    from dataclasses import fields as dc_fields
    for f in dc_fields(node):
        v = getattr(node, f.name)
        if isinstance(v, list):
            for i, c in enumerate(v):
                if isinstance(c, EArgsLen):
                    v[i] = EConst(arity, span=c.span, nid=next_node_id())
                elif hasattr(c, "nid"):
                    _replace_argslen(c, arity)
        elif isinstance(v, EArgsLen):
            setattr(node, f.name, EConst(arity, span=v.span,
                                         nid=next_node_id()))
        elif hasattr(v, "nid"):
            _replace_argslen(v, arity)


def make_shape_checker(program: Program) -> ShapeChecker:
    prelude = load_prelude()
    fn_shapes: dict = {}
    for f in program.functions:
        if f.signature is not None:
            fn_shapes[f.name] = f.signature
        else:
            fn_shapes[f.name] = ("closure", f.name)
    class_fields: dict = {}
    class_methods: dict = {}
    checker = ShapeChecker(fn_shapes, class_fields, class_methods, prelude)
    from ..logic import ClassTable
    ct = ClassTable(program)
    from ..syntax import P_TRUE, RBase, BClass, TThis
    for c in program.classes:
        fields = {}
        for mut, name, ft in ct.fields_of(RBase(BClass(c.name), P_TRUE),
                                          TThis(), False):
            fields[name] = checker.shape_of_type(ft, set())
        class_fields[c.name] = fields
        methods = {}
        cur = c
        seen = set()
        while cur is not None:
            for m in cur.methods:
                if not m.is_ctor and m.name not in seen:
                    seen.add(m.name)
                    methods[m.name] = RFun(tuple(m.params), m.ret, m.tyvars,
                                           m.precond)
            cur = next((d for d in program.classes if d.name == cur.parent),
                       None)
        class_methods[c.name] = methods
    return checker


def two_phase_expand(fn: FuncDecl, program: Program) -> list:
    """Clones of an intersection-typed function, one per conjunct, each
    shape-checked with ill-typed statements replaced by assert(false)."""
    sig = fn.signature
    if not isinstance(sig, RInter):
        return []
    clones: list[OverloadClone] = []
    for i, conj in enumerate(sig.conjuncts, 1):
        body: Body = _clone(fn.body)
        arity = len(conj.params)
        _replace_argslen(body, arity)
        checker = make_shape_checker(program)
        rigid = set(conj.tyvars)
        env = {}
        for (pname, ptype) in conj.params:
            env[pname] = checker.shape_of_type(ptype, rigid)
        ret_shape = checker.shape_of_type(conj.ret, rigid) \
            if conj.ret is not None else checker.fresh()
        body = checker.check_body(env, body, ret_shape, rigid)
        decl = FuncDecl(f"{fn.name}@{i}", [n for n, _ in conj.params],
                        RFun(conj.params, conj.ret, conj.tyvars,
                             conj.precond),
                        body, fn.span)
        clones.append(OverloadClone(fn.name, i, conj, decl))
    return clones
