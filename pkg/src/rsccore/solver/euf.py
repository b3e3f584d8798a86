"""Congruence closure for equality with uninterpreted functions.

Terms are canonical skeletons; distinct constants of the same sort refuse
to merge, which is how string-literal distinctness and true/false conflict
detection fall out."""

from __future__ import annotations

from .normal import EufLit, Skel


class CongruenceClosure:
    def __init__(self):
        self.parent: dict[Skel, Skel] = {}
        self.uses: dict[Skel, list] = {}
        self.terms: set[Skel] = set()
        self.diseqs: list[tuple[Skel, Skel]] = []
        self.conflict: bool = False

    # -- union-find -----------------------------------------------------------

    def add(self, t: Skel):
        if t in self.terms:
            return
        self.terms.add(t)
        self.parent[t] = t
        self.uses[t] = []
        for a in t.args:
            self.add(a)
            self.uses[self.find(a)].append(t)

    def find(self, t: Skel) -> Skel:
        root = t
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[t] != root:
            self.parent[t], t = root, self.parent[t]
        return root

    def merge(self, a: Skel, b: Skel):
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if ra.kind == "const" and rb.kind == "const":
            self.conflict = True
            return
        # keep constants as representatives
        if rb.kind == "const":
            ra, rb = rb, ra
        self.parent[rb] = ra
        moved = self.uses.pop(rb, [])
        self.uses.setdefault(ra, []).extend(moved)
        # congruence: re-examine applications that used the merged class
        for app in list(self.uses.get(ra, [])):
            for other in list(self.terms):
                if other is app or other.kind != "app":
                    continue
                if other.head == app.head and \
                        len(other.args) == len(app.args):
                    if self.find(other) != self.find(app) and all(
                            self.find(x) == self.find(y)
                            for x, y in zip(other.args, app.args)):
                        self.merge(app, other)

    # -- API -------------------------------------------------------------------

    def assert_lit(self, lit: EufLit):
        if lit.eq:
            self.merge(lit.t1, lit.t2)
        else:
            self.add(lit.t1)
            self.add(lit.t2)
            self.diseqs.append((lit.t1, lit.t2))

    def close(self) -> bool:
        """Final congruence fixpoint; returns False on conflict."""
        changed = True
        while changed and not self.conflict:
            changed = False
            apps = [t for t in self.terms if t.kind == "app"]
            for i in range(len(apps)):
                for j in range(i + 1, len(apps)):
                    a, b = apps[i], apps[j]
                    if a.head != b.head or len(a.args) != len(b.args):
                        continue
                    if self.find(a) == self.find(b):
                        continue
                    if all(self.find(x) == self.find(y)
                           for x, y in zip(a.args, b.args)):
                        self.merge(a, b)
                        changed = True
        if self.conflict:
            return False
        for a, b in self.diseqs:
            if self.find(a) == self.find(b):
                return False
        return True

    def classes(self) -> dict:
        out: dict[Skel, list] = {}
        for t in self.terms:
            out.setdefault(self.find(t), []).append(t)
        return out

    def int_equalities(self) -> list:
        """Pairs of integer-sorted terms the closure proved equal."""
        out = []
        for rep, members in self.classes().items():
            ints = sorted((m for m in members if m.sort == "int"), key=str)
            for m in ints[1:]:
                out.append((ints[0], m))
        return out
