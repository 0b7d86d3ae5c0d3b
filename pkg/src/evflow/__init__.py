"""Darcy flow on non-matching multiblock grids with interface flux recovery."""

from .config import ConfigError, RunConfig, parse_config
from .coupling import (
    InterfaceOperators,
    TraceProjection,
    block_jacobi_solve,
    compare_dd,
    ghost_pressures,
    interface_operators,
    project_trace,
    trace_projection,
)
from .darcy import (
    ManufacturedCase,
    MixedSolution,
    PermField,
    SolverError,
    assemble_divergence,
    assemble_rhs,
    assemble_velocity_mass,
    residual_mass_conservation,
    solve_case,
    solve_monolithic,
)
from .mesh import (
    Discretization,
    DofMap,
    InterfaceMesh,
    MeshError,
    MultiblockMesh,
    SubdomainGrid,
    build_checkerboard,
    build_multiblock,
    build_two_blocks,
    compute_interface_trace,
    discretize,
    enumerate_dofs,
)
from .postprocess import (
    EdgeMultipliers,
    NodalField,
    PostFields,
    QuadraticCellField,
    RecoveredFlux,
    compute_lagrange_multipliers,
    oswald_average,
    postprocess_pressure,
    recover,
    recover_interface_velocity,
)
from .verification import (
    ConvergenceRow,
    convergence_order,
    convergence_study,
    interface_velocity_error,
    interior_velocity_error,
    manufactured_case,
    run_level,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceRow",
    "Discretization",
    "DofMap",
    "EdgeMultipliers",
    "InterfaceMesh",
    "InterfaceOperators",
    "ManufacturedCase",
    "MeshError",
    "MixedSolution",
    "MultiblockMesh",
    "NodalField",
    "PermField",
    "PostFields",
    "QuadraticCellField",
    "RecoveredFlux",
    "RunConfig",
    "SolverError",
    "SubdomainGrid",
    "TraceProjection",
    "assemble_divergence",
    "assemble_rhs",
    "assemble_velocity_mass",
    "block_jacobi_solve",
    "build_checkerboard",
    "build_multiblock",
    "build_two_blocks",
    "compare_dd",
    "compute_interface_trace",
    "compute_lagrange_multipliers",
    "convergence_order",
    "convergence_study",
    "discretize",
    "enumerate_dofs",
    "ghost_pressures",
    "interface_operators",
    "interface_velocity_error",
    "interior_velocity_error",
    "manufactured_case",
    "oswald_average",
    "parse_config",
    "postprocess_pressure",
    "project_trace",
    "recover",
    "recover_interface_velocity",
    "residual_mass_conservation",
    "run_level",
    "solve_case",
    "solve_monolithic",
    "trace_projection",
]
