"""Concrete evaluator for logical predicates over runtime values, used by
method preconditions and checked casts. Total on closed predicates whose
uninterpreted symbols (len, ttag, instanceof, field paths) are given
meaning by the heap."""

from __future__ import annotations

from ..syntax import (
    PAnd, PAtom, PKvar, PNot, Pred, TBuiltin, TConst, TField, TThis, TUF,
    TValueVar, TVar, Term,
)
from .values import (
    HArr, HObj, Heap, StuckError, VLoc, Value, js_div, js_mod, type_tag,
    values_equal,
)


def eval_term(t: Term, env: dict, heap: Heap, parents: dict) -> Value:
    if isinstance(t, TVar):
        if t.name not in env:
            raise StuckError(f"unbound symbol {t.name!r} in predicate")
        return env[t.name]
    if isinstance(t, TConst):
        return t.value
    if isinstance(t, TValueVar):
        if "v" not in env:
            raise StuckError("value variable unbound in predicate")
        return env["v"]
    if isinstance(t, TThis):
        if "this" not in env:
            raise StuckError("this unbound in predicate")
        return env["this"]
    if isinstance(t, TField):
        base = eval_term(t.base, env, heap, parents)
        if not isinstance(base, VLoc) or base.loc not in heap or \
                not isinstance(heap[base.loc], HObj):
            raise StuckError("field path on a non-object")
        obj = heap[base.loc]
        if t.fname not in obj.fields:
            raise StuckError(f"unknown field {t.fname!r} in predicate")
        return obj.fields[t.fname]
    if isinstance(t, TUF):
        args = [eval_term(a, env, heap, parents) for a in t.args]
        if t.fname == "len":
            v = args[0]
            if not isinstance(v, VLoc) or v.loc not in heap or \
                    not isinstance(heap[v.loc], HArr):
                raise StuckError("len of a non-array")
            return len(heap[v.loc].elems)
        if t.fname == "ttag":
            return type_tag(args[0])
        if t.fname == "instanceof":
            v, cname = args
            if not isinstance(cname, str):
                raise StuckError("instanceof needs a class name")
            if not isinstance(v, VLoc) or v.loc not in heap or \
                    not isinstance(heap[v.loc], HObj):
                return False
            cur = heap[v.loc].cname
            while cur is not None:
                if cur == cname:
                    return True
                cur = parents.get(cur)
            return cname == "Object"
        raise StuckError(f"uninterpreted function {t.fname!r} has no"
                         " runtime meaning")
    if isinstance(t, TBuiltin):
        if t.op == "implies":
            a = _as_bool(eval_term(t.args[0], env, heap, parents))
            if not a:
                return True
            return _as_bool(eval_term(t.args[1], env, heap, parents))
        args = [eval_term(a, env, heap, parents) for a in t.args]
        op = t.op
        if op in ("add", "sub", "mul", "div", "mod"):
            a, b = _as_num(args[0]), _as_num(args[1])
            if op == "add":
                return a + b
            if op == "sub":
                return a - b
            if op == "mul":
                return a * b
            if op == "div":
                return js_div(a, b)
            return js_mod(a, b)
        if op in ("lt", "le", "gt", "ge"):
            a, b = _as_num(args[0]), _as_num(args[1])
            return {"lt": a < b, "le": a <= b, "gt": a > b,
                    "ge": a >= b}[op]
        if op == "eq":
            return values_equal(args[0], args[1])
        if op == "ne":
            return not values_equal(args[0], args[1])
        if op == "and":
            return _as_bool(args[0]) and _as_bool(args[1])
        if op == "or":
            return _as_bool(args[0]) or _as_bool(args[1])
        if op == "not":
            return not _as_bool(args[0])
        raise StuckError(f"operator {op!r} has no runtime meaning")
    raise TypeError(t)


def _as_num(v: Value) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise StuckError("arithmetic on a non-number in predicate")
    return v


def _as_bool(v: Value) -> bool:
    if not isinstance(v, bool):
        raise StuckError("boolean operator on a non-boolean in predicate")
    return v


def eval_pred(p: Pred, env: dict, heap: Heap, parents: dict) -> bool:
    if isinstance(p, PAnd):
        return all(eval_pred(c, env, heap, parents) for c in p.conjuncts)
    if isinstance(p, PNot):
        return not eval_pred(p.pred, env, heap, parents)
    if isinstance(p, PAtom):
        return _as_bool(eval_term(p.term, env, heap, parents))
    if isinstance(p, PKvar):
        raise StuckError("refinement variable in a runtime predicate")
    raise TypeError(p)
