"""Randomized approximate counting for spin systems on bounded-degree graphs."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExhausted,
    GrowthAssumptionViolated,
    InfeasibleConditioning,
    InternalConsistencyError,
    OracleTooLarge,
    OutOfRegime,
    SamplerStuck,
    SubquadError,
)
from .graph import Graph, ball, find_thin_sphere, gen_grid, gen_quad_boundary, read_graph, write_graph  # noqa: E402
from .spin import (  # noqa: E402
    QSpinParams,
    TwoSpinParams,
    exact_marginal,
    exact_partition,
    grid_marginal,
    hardcore,
    load_model,
)
from .estimator import HardcoreEstimatorConfig, fpras_hardcore  # noqa: E402
from .lattice import GrowthParams, fpras_lattice  # noqa: E402
