"""Joint phase retrieval and dictionary learning from magnitude-only measurements.

The package estimates an unknown dictionary D (atoms constrained to the unit
l2-ball) and sparse codes Z from magnitude-only observations Y = |F(D Z)| + N
of a structured complex linear mixing operator F.  Two solvers work on the
compact formulation in (D, Z) and the auxiliary-variable formulation in
(X, D, Z), plus a block-coordinate baseline for comparison.
"""

from prdl.operators import MixingOperator, OperatorBlock, OperatorCase
from prdl.problem import ProblemInstance
from prdl.solver_common import SolverConfig, SolverReport

__all__ = [
    "MixingOperator",
    "OperatorBlock",
    "OperatorCase",
    "ProblemInstance",
    "SolverConfig",
    "SolverReport",
]

__version__ = "0.1.0"
