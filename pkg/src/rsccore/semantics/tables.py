"""Static program tables shared by both interpreters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..frontend.prelude import BUILTIN_NAMES
from ..ssa import SsaProgram
from ..syntax import ClassDecl, FieldDecl, MethodDecl, UNDEFINED
from .values import HClassObj, HObj, Heap, StuckError, VLoc, Value


@dataclass
class ClassInfo:
    decl: ClassDecl
    parent: Optional[str]
    fields: list  # FieldDecls, root-to-leaf order
    methods: dict  # name -> (MethodDecl, owner class name)
    ctor: Optional[MethodDecl]


class RuntimeTables:
    def __init__(self, ssa: SsaProgram):
        self.ssa = ssa
        self.program = ssa.source
        self.funcs = ssa.functions
        self.classes: dict[str, ClassInfo] = {}
        decls = {c.name: c for c in self.program.classes}
        for name in decls:
            self._build_class(name, decls, [])

    def _build_class(self, name: str, decls: dict, seen: list) -> ClassInfo:
        if name in self.classes:
            return self.classes[name]
        if name in seen:
            raise ValueError(f"inheritance cycle through {name}")
        c = decls[name]
        fields: list[FieldDecl] = []
        methods: dict = {}
        if c.parent and c.parent != "Object":
            if c.parent not in decls:
                raise ValueError(f"unknown parent class {c.parent}")
            pinfo = self._build_class(c.parent, decls, seen + [name])
            fields.extend(pinfo.fields)
            methods.update(pinfo.methods)
        ctor = None
        for m in c.methods:
            if m.is_ctor:
                ctor = m
            else:
                methods[m.name] = (m, name)
        fields = fields + list(c.fields)
        info = ClassInfo(c, c.parent, fields, methods, ctor)
        self.classes[name] = info
        return info

    # -- lookups ---------------------------------------------------------------

    def is_builtin(self, name: str) -> bool:
        return name in BUILTIN_NAMES

    def is_global_callee(self, name: str) -> bool:
        return name in BUILTIN_NAMES or name in self.funcs

    def is_subclass(self, sub: str, sup: str) -> bool:
        if sup == "Object":
            return True
        cur: Optional[str] = sub
        while cur is not None:
            if cur == sup:
                return True
            info = self.classes.get(cur)
            cur = info.parent if info else None
        return False

    def resolve_method(self, heap: Heap, v: Value, mname: str,
                       ssa: bool = False):
        if not isinstance(v, VLoc) or v.loc not in heap or \
                not isinstance(heap[v.loc], HObj):
            raise StuckError(f"method call {mname!r} on a non-object")
        cname = heap[v.loc].cname
        info = self.classes.get(cname)
        if info is None or mname not in info.methods:
            raise StuckError(f"unknown method {mname!r} on {cname}")
        mdecl, owner = info.methods[mname]
        if ssa:
            return self.ssa.methods[(owner, mname)]
        return mdecl

    def constructor_of(self, cname: str, ssa: bool = False):
        info = self.classes.get(cname)
        if info is None:
            raise StuckError(f"unknown class {cname!r}")
        if info.ctor is None:
            return None
        if ssa:
            return self.ssa.methods[(cname, "constructor")]
        return info.ctor

    def allocate_object(self, heap: Heap, cname: str) -> VLoc:
        info = self.classes.get(cname)
        if info is None:
            raise StuckError(f"unknown class {cname!r}")
        return heap.alloc(HObj(cname, {f.name: UNDEFINED
                                       for f in info.fields}))

    def prealloc_class_objects(self, heap: Heap):
        locs: dict[str, int] = {}
        for c in self.program.classes:
            parent_loc = locs.get(c.parent) if c.parent else None
            v = heap.alloc(HClassObj(c.name, parent_loc,
                                     [m.name for m in c.methods]))
            locs[c.name] = v.loc

    def parent_map(self) -> dict:
        return {name: info.parent for name, info in self.classes.items()}
