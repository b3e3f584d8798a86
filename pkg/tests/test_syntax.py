"""Vocabulary-level properties: trivial refinement, free variables,
substitution, and source round-tripping."""

from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from conftest import CORPUS, parse, parse_text

from rsccore.syntax import (
    BArr, BClass, BPrim, B_BOOL, B_NUM, PAtom, P_TRUE, RBase, RExists,
    TBuiltin, TConst, TUF, TValueVar, TVar, body_str, free_type_vars,
    p_and, p_eq, pred_str, trivially_refine, type_str, type_subst,
)


def test_trivially_refine_number():
    t = trivially_refine(B_NUM)
    assert t == RBase(B_NUM, P_TRUE)
    assert type_str(t) == "number"


def test_trivially_refine_bool_and_class():
    assert trivially_refine(B_BOOL) == RBase(B_BOOL, P_TRUE)
    c = trivially_refine(BClass("C"))
    assert type_str(c) == "C"


def test_free_type_vars_open_term():
    t = RBase(B_NUM, PAtom(TBuiltin("lt", (TValueVar(),
                                           TUF("len", (TVar("a"),))))))
    assert free_type_vars(t) == {"a"}


def test_free_type_vars_existential_binder_hidden():
    body = RBase(B_NUM, p_eq(TValueVar(), TVar("x")))
    t = RExists("x", trivially_refine(B_NUM), body)
    assert free_type_vars(t) == set()


def test_free_type_vars_trivial():
    assert free_type_vars(trivially_refine(B_NUM)) == set()


@given(st.sampled_from(["a", "b", "n", "zz"]), st.integers(-5, 5))
def test_subst_noop_when_not_free(name, k):
    t = RBase(B_NUM, PAtom(TBuiltin("lt", (TValueVar(), TVar("other")))))
    assert name not in free_type_vars(t)
    assert type_subst(t, {name: TConst(k)}) == t


def test_subst_capture_avoidance_under_exists():
    # substituting x under a binder also named x must rename the binder
    inner = RBase(B_NUM, p_eq(TValueVar(), TVar("x")))
    t = RExists("x", trivially_refine(B_NUM), inner)
    s = type_subst(t, {"x": TVar("y")})
    assert s == t  # x is bound: nothing to do
    # now a type with x free under a binder z, substituting z's name in
    t2 = RExists("z", trivially_refine(B_NUM),
                 RBase(B_NUM, p_eq(TValueVar(), TVar("x"))))
    s2 = type_subst(t2, {"x": TVar("z")})
    assert isinstance(s2, RExists)
    assert s2.name != "z"  # binder renamed to avoid capturing the new z
    assert "z" in {v for v in free_type_vars(s2)}


# cast_flags is excluded here: its bodies mention class names that only
# resolve with the whole file in scope
ROUND_TRIP_FILES = [
    "head.rsc", "ssa_reduce.rsc", "typeof.rsc", "field.rsc",
    "field_ghost.rsc", "bad_undefined.rsc", "overload_reduce.rsc",
]


@pytest.mark.parametrize("name", ROUND_TRIP_FILES)
def test_round_trip_bodies(name):
    """Printing a parsed body and re-parsing it reproduces the same
    printed body (identity up to node ids and whitespace)."""
    p = parse(CORPUS / name)
    for f in p.functions:
        if f.body is None or f.captures:
            continue
        printed = body_str(f.body)
        wrapped = "function %s(%s) { %s }" % (f.name, ", ".join(f.params),
                                              printed)
        p2 = parse_text(wrapped)
        f2 = next(g for g in p2.functions if g.name == f.name)
        assert body_str(f2.body) == printed


def test_round_trip_closure_fixpoint():
    """Files with nested functions reach a printed fixpoint after one
    parse (captures print as plain references)."""
    p = parse(CORPUS / "minindex.rsc")
    fn = next(f for f in p.functions if f.name == "minIndex")
    s1 = body_str(fn.body)
    assert "step" in s1


def test_pred_printing_reparses():
    from rsccore.frontend.types_parser import PredParser
    from rsccore.frontend.lexer import TokenStream, lex
    p = p_and(PAtom(TBuiltin("le", (TConst(0), TValueVar()))),
              PAtom(TBuiltin("lt", (TValueVar(), TUF("len", (TVar("a"),))))))
    txt = pred_str(p)
    p2 = PredParser(TokenStream(lex(txt))).parse_pred()
    assert pred_str(p2) == txt


def test_round_trip_method_bodies():
    p = parse(CORPUS / "field_ghost.rsc")
    cls = p.classes[0]
    for m in cls.methods:
        if m.is_ctor:
            continue
        printed = body_str(m.body)
        params = ", ".join(f"{n}:{type_str(t)}" for n, t in m.params)
        wrapped = ("type ArrayN<T,n> = {v:T[] | len(v) = n}\n"
                   "type grid<w,h> = ArrayN<number, (w+2)*(h+2)>\n"
                   "type okW = natLE<this.w>\n"
                   "type okH = natLE<this.h>\n"
                   "/*@ ghost idxBound :: (x: nat, y: nat, w: {v:pos | x <= v},"
                   " h: {v:pos | y <= v}) => {v:boolean | true} */\n"
                   "class Field {\n"
                   "  immutable w : pos;\n  immutable h : pos;\n"
                   "  dens : grid<this.w, this.h>;\n"
                   "  constructor(w: pos, h: pos, d: grid<w,h>)"
                   " { this.h = h; this.w = w; this.dens = d; }\n"
                   f"  {m.name}({params}) : {type_str(m.ret)} {{\n"
                   f"{printed}\n  }}\n}}\n")
        p2 = parse_text(wrapped)
        m2 = next(x for x in p2.classes[0].methods if x.name == m.name)
        assert body_str(m2.body) == printed
