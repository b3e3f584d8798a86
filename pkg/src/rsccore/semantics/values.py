"""Runtime values, heaps, and the primitive operations shared by both
interpreters (so the two machines cannot drift on builtin behavior)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ..syntax import NULL, UNDEFINED, literal_str


@dataclass(frozen=True)
class VLoc:
    loc: int


@dataclass(frozen=True)
class VClosure:
    fname: str
    caps: tuple


Value = Union[int, bool, str, type(UNDEFINED), type(NULL), VLoc, VClosure]


@dataclass
class HObj:
    cname: str
    fields: dict


@dataclass
class HArr:
    elems: list


@dataclass
class HClassObj:
    cname: str
    parent_loc: Optional[int]
    methods: list


HeapObject = Union[HObj, HArr, HClassObj]


class Heap:
    def __init__(self):
        self.cells: dict[int, HeapObject] = {}
        self.next_loc = 0

    def alloc(self, obj: HeapObject) -> VLoc:
        loc = self.next_loc
        self.next_loc += 1
        self.cells[loc] = obj
        return VLoc(loc)

    def __getitem__(self, loc: int) -> HeapObject:
        return self.cells[loc]

    def __contains__(self, loc: int) -> bool:
        return loc in self.cells


class StuckError(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def inject_value(a, heap: Heap) -> Value:
    """Convert a host literal (int/bool/str/None/list) into a runtime
    value, allocating arrays on the heap."""
    if isinstance(a, list):
        return heap.alloc(HArr([inject_value(x, heap) for x in a]))
    if a is None:
        return UNDEFINED
    return a


def value_str(v: Value, heap: Optional[Heap] = None) -> str:
    if isinstance(v, VLoc):
        if heap is not None and v.loc in heap:
            obj = heap[v.loc]
            if isinstance(obj, HArr):
                return "[%s]" % ", ".join(value_str(e, heap)
                                          for e in obj.elems)
            if isinstance(obj, HObj):
                fs = ", ".join(f"{k}: {value_str(w, heap)}"
                               for k, w in obj.fields.items())
                return f"{obj.cname} {{{fs}}}"
            return f"<class {obj.cname}>"
        return f"<loc {v.loc}>"
    if isinstance(v, VClosure):
        return f"<function {v.fname}>"
    return literal_str(v)


def type_tag(v: Value) -> str:
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, int):
        return "number"
    if isinstance(v, str):
        return "string"
    if v is UNDEFINED:
        return "undefined"
    if v is NULL:
        return "object"
    if isinstance(v, VClosure):
        return "function"
    return "object"


def _num(v: Value, what: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise StuckError(f"{what} applied to non-number {value_str(v)}")
    return v


def _bool(v: Value, what: str) -> bool:
    if not isinstance(v, bool):
        raise StuckError(f"{what} applied to non-boolean {value_str(v)}")
    return v


def js_div(a: int, b: int) -> int:
    if b == 0:
        raise StuckError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def js_mod(a: int, b: int) -> int:
    if b == 0:
        raise StuckError("modulo by zero")
    return a - js_div(a, b) * b


def values_equal(a: Value, b: Value) -> bool:
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def apply_builtin(name: str, args: list, heap: Heap) -> Value:
    """Primitive reduction shared by both machines; raises StuckError when
    no rule applies."""
    if name == "get":
        arr = _array(args[0], heap, "array read")
        i = _num(args[1], "array index")
        if not 0 <= i < len(arr.elems):
            raise StuckError(f"array read out of bounds: index {i},"
                             f" length {len(arr.elems)}")
        return arr.elems[i]
    if name == "set":
        arr = _array(args[0], heap, "array write")
        i = _num(args[1], "array index")
        if not 0 <= i < len(arr.elems):
            raise StuckError(f"array write out of bounds: index {i},"
                             f" length {len(arr.elems)}")
        arr.elems[i] = args[2]
        return UNDEFINED
    if name == "length":
        arr = _array(args[0], heap, "length")
        return len(arr.elems)
    if name == "slice":
        arr = _array(args[0], heap, "slice")
        s = _num(args[1], "slice start")
        if not 0 <= s <= len(arr.elems):
            raise StuckError(f"slice start out of range: {s}")
        return heap.alloc(HArr(list(arr.elems[s:])))
    if name == "newarray#":
        n = _num(args[0], "Array length")
        if n < 0:
            raise StuckError(f"negative array length {n}")
        return heap.alloc(HArr([0] * n))
    if name == "arraylit#":
        return heap.alloc(HArr(list(args)))
    if name == "assert":
        if args[0] is not True:
            raise StuckError("assertion failed")
        return UNDEFINED
    if name == "typeof":
        return type_tag(args[0])
    if name in ("+", "-", "*", "/", "%"):
        a = _num(args[0], f"operator {name}")
        b = _num(args[1], f"operator {name}")
        if name == "+":
            return a + b
        if name == "-":
            return a - b
        if name == "*":
            return a * b
        if name == "/":
            return js_div(a, b)
        return js_mod(a, b)
    if name == "neg":
        return -_num(args[0], "negation")
    if name in ("<", "<=", ">", ">="):
        a = _num(args[0], f"operator {name}")
        b = _num(args[1], f"operator {name}")
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[name]
    if name in ("===", "=="):
        return values_equal(args[0], args[1])
    if name in ("!==", "!="):
        return not values_equal(args[0], args[1])
    if name == "&&":
        return _bool(args[0], "&&") and _bool(args[1], "&&")
    if name == "||":
        return _bool(args[0], "||") or _bool(args[1], "||")
    if name == "!":
        return not _bool(args[0], "!")
    raise StuckError(f"unknown builtin {name!r}")


def _array(v: Value, heap: Heap, what: str) -> HArr:
    if not isinstance(v, VLoc) or v.loc not in heap or \
            not isinstance(heap[v.loc], HArr):
        raise StuckError(f"{what} on non-array {value_str(v)}")
    return heap[v.loc]
