"""seqbench: benchmarking discrete sequence black-box optimizers.

Procedurally generated motif-satisfaction oracles with a known optimum
of 1.0, budgeted and observed black-box handles (optionally behind a
local socket), a suite of baseline and GP-based solvers over sequence
space and its one-hot relaxation, and table aggregation for seeded
replications.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    Alphabet,
    BlackBoxHandle,
    EvaluationLedger,
    ProblemInfo,
    create_problem,
    evaluate,
    remaining_budget,
    validate_sequence,
)
from .ehrlich import (  # noqa: F401
    EhrlichConfig,
    EhrlichOracle,
    PestControlEquivConfig,
    construct_optimum,
    ehrlich_score,
)
from .onehot import one_hot_decode, one_hot_encode  # noqa: F401
from .gp import GPHyperparams, GPModel, expected_improvement, fit_gp  # noqa: F401
from .solvers import SolverRunConfig, get_solver, solver_names  # noqa: F401
