"""Environment embedding, strengthening, well-formedness, and the object
constraint system, exercised on the two-dimensional-array class fixture."""

import pytest

from conftest import CORPUS, parse

from rsccore.logic import (
    ClassTable, NameSupply, TypeEnv, WfViolation, selfify, strengthen,
    wf_type,
)
from rsccore.solver import Query, SolverConfig, check_valid
from rsccore.syntax import (
    BArr, BClass, BPrim, B_NUM, P_TRUE, PAtom, RBase, RExists, TBuiltin,
    TConst, TField, TThis, TUF, TValueVar, TVar, conjuncts_of, p_and,
    p_eq, pred_str, trivially_refine, type_str,
)


@pytest.fixture()
def field_classes():
    p = parse(CORPUS / "field.rsc")
    return ClassTable(p)


def _env(ct=None):
    return TypeEnv(ct or ClassTable(), NameSupply())


def test_embed_empty_env_is_true():
    assert _env().embed() == P_TRUE


def test_embed_array_binding_has_len_hypothesis():
    t = RBase(BArr(trivially_refine(B_NUM)),
              PAtom(TBuiltin("lt", (TConst(0), TUF("len", (TValueVar(),))))))
    env = _env().bind("a", t)
    conj = {pred_str(c) for c in conjuncts_of(env.embed())}
    assert "0 < len(a)" in conj


def test_embed_binding_and_guard():
    env = _env().bind("x", RBase(B_NUM, PAtom(
        TBuiltin("ge", (TValueVar(), TConst(0))))))
    env = env.guard(PAtom(TBuiltin("lt", (TVar("x"), TConst(10)))))
    conj = {pred_str(c) for c in conjuncts_of(env.embed())}
    assert "x >= 0" in conj and "x < 10" in conj


def test_embed_monotone_under_extension():
    env1 = _env().bind("x", RBase(B_NUM, PAtom(
        TBuiltin("ge", (TValueVar(), TConst(0))))))
    env2 = env1.bind("y", RBase(B_NUM, PAtom(
        TBuiltin("lt", (TValueVar(), TVar("x"))))))
    q = Query.make({**env2.sorts()}, env2.embed(), env1.embed())
    assert check_valid(q).is_valid


def test_selfify():
    t = RBase(B_NUM, PAtom(TBuiltin("ge", (TValueVar(), TConst(0)))))
    s = selfify(t, TVar("x"))
    assert pred_str(s.pred) == "v >= 0 && v = x"


def test_strengthen_pushes_under_existential():
    inner = RBase(BClass("C"), PAtom(TVar("p")))
    t = RExists("y", trivially_refine(B_NUM), inner)
    s = strengthen(t, PAtom(TVar("q")))
    assert isinstance(s, RExists)
    assert pred_str(s.body.pred) == "p && q"


def test_strengthen_true_is_identity():
    t = RBase(B_NUM, PAtom(TVar("p")))
    assert strengthen(t, P_TRUE) == t


def test_wf_immutable_field_path_ok(field_classes):
    env = _env(field_classes).bind(
        "this", trivially_refine(BClass("Field")))
    # len(v) = (this.w+2)*(this.h+2) is fine: w and h are immutable
    t = RBase(BArr(trivially_refine(B_NUM)), p_eq(
        TUF("len", (TValueVar(),)),
        TBuiltin("mul", (TBuiltin("add", (TField(TThis(), "w"), TConst(2))),
                         TBuiltin("add", (TField(TThis(), "h"),
                                          TConst(2)))))))
    assert wf_type(env, t) == []


def test_wf_rejects_mutable_field_in_refinement(field_classes):
    env = _env(field_classes).bind(
        "this", trivially_refine(BClass("Field")))
    t = RBase(B_NUM, p_eq(TValueVar(), TUF("len", (TField(TThis(), "dens"),))))
    violations = wf_type(env, t)
    assert any("mutable field" in v for v in violations)


def test_wf_unbound_symbol():
    t = RBase(B_NUM, p_eq(TValueVar(), TVar("zz")))
    violations = wf_type(_env(), t)
    assert any("unbound" in v for v in violations)


def test_fields_of_field_class(field_classes):
    recv = trivially_refine(BClass("Field"))
    fields = field_classes.fields_of(recv, TVar("z"))
    names = [(m, n) for m, n, _ in fields]
    assert names == [("imm", "w"), ("imm", "h"), ("mut", "dens")]
    # this is substituted by the receiver in field types
    dens = fields[2][2]
    assert "z.w" in type_str(dens) and "z.h" in type_str(dens)


def test_fields_of_object_is_empty(field_classes):
    with pytest.raises(WfViolation):
        # Object resolves to no declaration; chain() is empty so there is
        # nothing to look up
        field_classes.field_of(trivially_refine(BClass("Object")),
                               TVar("o"), "x")
    assert field_classes.chain("Object") == []


def test_has_member_substitutes_receiver(field_classes):
    recv = trivially_refine(BClass("Field"))
    sig, decl, owner = field_classes.has_member(recv, TVar("z"),
                                                "setDensity")
    assert owner == "Field"
    assert [n for n, _ in sig.params] == ["x", "y", "d"]
    assert "z.w" in type_str(sig.params[0][1])


def test_class_inv_includes_inclusion(field_classes):
    inv = field_classes.class_inv("Field", TVar("w"))
    assert 'instanceof(w, "Field")' in pred_str(inv)


def test_class_inv_inherited_chain():
    p = parse(CORPUS / "cast_flags.rsc")
    ct = ClassTable(p)
    inv = pred_str(ct.class_inv("ObjectType", TVar("o")))
    assert 'instanceof(o, "ObjectType")' in inv
    assert 'instanceof(o, "Type")' in inv
    assert "o.flags" in inv  # the declared invariant, inherited


def test_strengthen_distributes_through_embedding():
    t = RBase(B_NUM, PAtom(TBuiltin("ge", (TValueVar(), TConst(0)))))
    extra = PAtom(TBuiltin("lt", (TValueVar(), TConst(9))))
    env1 = _env().bind("x", strengthen(t, extra))
    env2 = _env().bind("x", t).guard(
        PAtom(TBuiltin("lt", (TVar("x"), TConst(9)))))
    q1 = Query.make(env1.sorts(), env1.embed(), env2.embed())
    q2 = Query.make(env2.sorts(), env2.embed(), env1.embed())
    assert check_valid(q1).is_valid and check_valid(q2).is_valid


def test_existential_bindings_open_into_env():
    inner = RBase(B_NUM, p_eq(TValueVar(), TVar("w")))
    t = RExists("w", RBase(B_NUM, PAtom(
        TBuiltin("ge", (TValueVar(), TConst(5))))), inner)
    env = _env().bind("x", t)
    conj = " && ".join(pred_str(c) for c in conjuncts_of(env.embed()))
    assert ">= 5" in conj and "x =" in conj
