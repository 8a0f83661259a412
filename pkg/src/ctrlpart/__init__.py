"""Partitioning of networked dynamical systems into control units.

Workflow: build the equivalent graph of a system, select fundamental
units on it, score candidate partitions with the partition index, and
aggregate units with the greedy, refined or exact engines. A companion
MPC harness measures the control-performance/computation trade-off of
the resulting partitions.
"""

from .errors import (
    CtrlPartError,
    DimensionMismatchError,
    GuardOverlapError,
    JacobianError,
    OrphanVertexError,
    PartitionError,
    SizeGuardError,
    SolverError,
    UnactuatedInputError,
)
from .exact import (
    BnbResult,
    alpha_singleton_threshold,
    alpha_sweep,
    branch_and_bound,
    brute_force_partition,
    set_partitions,
)
from .fsu import Fsu, FsuCollection, backward_assign, forward_assign, select_fsus, select_roots
from .generators import (
    GenericSpec,
    ModularSpec,
    RandomFsuSpec,
    gen_generic,
    gen_modular,
    gen_random_fsu,
)
from .graphs import (
    EquivalentGraph,
    Subgraph,
    aggregate,
    build_differentiable_graph,
    build_linear_graph,
    build_pwa_graph,
    frontier,
    graph_to_dot,
    is_csu,
    max_topology_count,
    neighbors,
    topology_signature,
)
from .greedy import greedy_partition, greedy_refined, refine_partition
from .metrics import (
    QUADRATIC,
    RATIO_COUPLING,
    RATIO_FULL,
    AssignmentMatrix,
    IndexConfig,
    Partition,
    delta_from_partition,
    index_quadratic,
    index_ratio,
    partition_from_delta,
    w_inter,
    w_intra,
    w_size,
)
from .mpc import (
    AdmmCoordinator,
    BoxQpSolver,
    CsuSystem,
    RunMetrics,
    Scenario,
    admm_dmpc_step,
    centralized_mpc_step,
    qp_solve,
    simulate,
    split_system,
)
from .systems import (
    DifferentiableSystem,
    Guard,
    LinearSystem,
    PwaMode,
    PwaSystem,
    system_from_json,
    system_to_json,
)

__version__ = "0.1.0"
