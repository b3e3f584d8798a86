"""Dual small-step interpreters and the lockstep differential harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..ssa import SsaProgram
from .frsc import FrscConfig, FrscMachine
from .irsc import IrscConfig, IrscMachine
from .simulate import SimReport, simulate
from .tables import RuntimeTables
from .values import Heap, StuckError, VClosure, VLoc, value_str

__all__ = [
    "run", "RunResult", "simulate", "SimReport", "IrscMachine",
    "FrscMachine", "IrscConfig", "FrscConfig", "RuntimeTables", "Heap",
    "StuckError", "value_str", "VLoc", "VClosure",
]


@dataclass
class RunResult:
    status: str  # "terminal" | "stuck" | "out-of-fuel"
    value: Optional[object] = None
    reason: Optional[str] = None
    steps: int = 0
    heap: Optional[Heap] = None

    def render(self) -> str:
        if self.status == "terminal":
            return value_str(self.value, self.heap)
        if self.status == "stuck":
            return f"stuck: {self.reason}"
        return "out of fuel"


def run(ssa_prog: SsaProgram, entry: Optional[str] = None,
        args: Optional[list] = None, fuel: int = 100_000,
        machine: str = "frsc") -> RunResult:
    """Iterate one of the two machines to a terminal value, a stuck state,
    or fuel exhaustion."""
    tables = RuntimeTables(ssa_prog)
    if machine == "frsc":
        m = FrscMachine(tables)
    elif machine == "irsc":
        m = IrscMachine(tables)
    else:
        raise ValueError(f"unknown machine {machine!r}")
    c = m.initial_top() if entry is None else m.initial_call(entry,
                                                             args or [])
    for i in range(fuel):
        r = m.step(c)
        if r[0] == "terminal":
            return RunResult("terminal", value=r[1], steps=c.steps,
                             heap=c.heap)
        if r[0] == "stuck":
            return RunResult("stuck", reason=r[1], steps=c.steps,
                             heap=c.heap)
        c = r[1]
    return RunResult("out-of-fuel", steps=c.steps, heap=c.heap)
