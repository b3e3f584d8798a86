"""rsc-core: a refinement type checker for a small imperative
object-oriented scripting language, with liquid-type inference, an
internal EUF+linear-arithmetic validity checker, an SMT-LIB2 subprocess
backend, and dual lockstep interpreters for differential testing."""

from .checker import CheckResult, check_program
from .frontend import parse_program
from .semantics import SimReport, run, simulate
from .solver import Query, SolverConfig, Verdict, check_valid
from .ssa import ssa_program

__version__ = "0.1.0"

__all__ = [
    "parse_program", "ssa_program", "check_program", "CheckResult",
    "run", "simulate", "SimReport", "check_valid", "Query", "Verdict",
    "SolverConfig", "__version__",
]
