"""Risk-aware switch selection for multi-phase distribution feeders.

Library layout:

- :mod:`gridreconfig.feeder` -- feeder data model, stacked current
  coordinates, Kirchhoff incidence operators, document parsing.
- :mod:`gridreconfig.scenarios` -- correlated forecast-error sampling,
  sample-size bounds, constraint reduction.
- :mod:`gridreconfig.solver` -- operator-splitting solver for quadratic
  programs with group norms, linear constraints and disk caps.
- :mod:`gridreconfig.reconfig` -- centralized topology selection, lambda
  sweeps, out-of-sample validation.
- :mod:`gridreconfig.distributed` -- consensus-ADMM multi-area solver over
  a simulated message channel, plus a dual-subgradient baseline.
- :mod:`gridreconfig.cli` -- command-line front end.
"""

__version__ = "0.1.0"

from .feeder import (
    FeederModel,
    LineSpec,
    NodeSpec,
    DgSpec,
    ResUnit,
    parse_feeder,
    serialize_feeder,
    build_incidence,
    loss_matrix,
    shunt_to_loads,
    nominal_injection_map,
    validate_feeder,
)
from .scenarios import (
    CorrelationModel,
    ForecastErrorSpec,
    NetInjectionBounds,
    ScenarioSet,
    min_sample_size,
    min_sample_size_mr3,
    reduce_scenarios,
    sample_scenarios,
)
from .solver import (
    GroupSparseProgram,
    SolverSettings,
    block_soft_threshold,
    msto_subproblem,
    project_disk,
    solve,
)
from .reconfig import (
    CostSpec,
    ReconfigSolution,
    assemble,
    solve_centralized,
    solve_fixed_topology,
    sweep_lambda,
    validate_lol,
)
from .distributed import (
    AdmmSettings,
    AreaPartition,
    ConvergenceTrace,
    Message,
    PartitionError,
    load_partition,
    partition,
    run,
    subgradient_baseline,
)
