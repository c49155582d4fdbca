"""quboforge: a MILP-to-QUBO compiler with a hybrid Benders decomposition
solver.

The compiler turns mixed-integer linear programs into quadratic unconstrained
binary optimization artifacts (penalty method, exact rational arithmetic,
dynamic slack sizing, optional hardware bit budget). The solver side offers
exhaustive search and simulated annealing for the monolithic path, and a
Benders decomposition whose binary master is a QUBO and whose continuous
subproblem is solved by an exact simplex with verifiable certificates.
"""

from .model import (
    Constraint,
    LinExpr,
    MilpModel,
    ModelError,
    Variable,
    canonicalize,
    parse_model,
    serialize_model,
)
from .binarize import (
    BitGroup,
    BudgetError,
    EncodingPlan,
    InfeasibleConstraintError,
    bits_for,
    plan_continuous,
    plan_integer,
    plan_model,
    plan_slack,
)
from .compiler import (
    CompileError,
    QuadForm,
    QuboArtifact,
    compile_model,
    read_artifact,
    write_artifact,
)
from .solvers import SolverError, SolverResult, decode, solve_exhaustive, solve_sa
from .simplex import LpProblem, LpSolution, SimplexError, check_certificates, solve_lp
from .benders import BendersError, BendersReport, Cut, Partition
from .benders import run as benders_run
from .bench import BenchError, CflpInstance, cflp_to_milp, generate, parse_orlib_cap

__version__ = "0.1.0"

__all__ = [
    "BendersError",
    "BendersReport",
    "BenchError",
    "BitGroup",
    "BudgetError",
    "CflpInstance",
    "CompileError",
    "Constraint",
    "Cut",
    "EncodingPlan",
    "InfeasibleConstraintError",
    "LinExpr",
    "LpProblem",
    "LpSolution",
    "MilpModel",
    "ModelError",
    "Partition",
    "QuadForm",
    "QuboArtifact",
    "SimplexError",
    "SolverError",
    "SolverResult",
    "Variable",
    "benders_run",
    "bits_for",
    "canonicalize",
    "cflp_to_milp",
    "check_certificates",
    "compile_model",
    "decode",
    "generate",
    "parse_model",
    "parse_orlib_cap",
    "plan_continuous",
    "plan_integer",
    "plan_model",
    "plan_slack",
    "read_artifact",
    "serialize_model",
    "solve_exhaustive",
    "solve_lp",
    "solve_sa",
    "write_artifact",
]
