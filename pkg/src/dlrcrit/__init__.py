"""Multigroup diffusion criticality with dynamical low-rank power iteration."""
from .adaptive import (AdaptConfig, AdaptiveResult, FixedIncrement, RankAdaptiveSolver,
                       SingularValueDriven, adaptive_solve, cr_change_rank)
from .exceptions import (CriticalityError, DataUnavailableError, InconsistentGeometryError,
                         InvalidInputError, NonConvergenceError, ResourceLimitError,
                         SingularOperatorError, StationaryPointError, ValidationError)
from .io import RunRecord, parse_materials, read_trace_csv, serialize_materials, write_trace_csv
from .kernels import orthonormalize, solve_generalized_sylvester, svd_full
from .lowrank import LowRankFlux, LowRankPowerSolver, dlrp_iteration, dlrp_solve
from .operators import OperatorSet, assemble, materialize_full_operators
from .optimize import (AdaptOptSchedule, CriticalityOptimizer, OptConfig, OptProblem,
                       OptTrace, fd_gradient, four_layer_problem, objective,
                       optimize_adaptive, optimize_fixed_rank)
from .power import PowerIterationSolver, dense_oracle, power_solve, power_step
from .problems import (Benchmark, benchmark_stub, four_layer_sphere, synthetic_library,
                       synthetic_problem)
from .reactor import (VOID, LayeredGeometry, Material, MaterialLibrary, SphericalMesh,
                      build_mesh, density_fields)
from .trace import IterationTrace, TraceRecord

__version__ = "0.1.0"
