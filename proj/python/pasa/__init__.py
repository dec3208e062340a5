"""Periodic adjoint sensitivity analysis for switched circuits."""

from ._core import (
    Circuit,
    MnaSystem,
    NetlistError,
    ParamDescriptor,
    PararealConfig,
    PararealResult,
    PeriodicityError,
    PeriodicRunInfo,
    PeriodicSolution,
    QoiSpec,
    Trajectory,
    asa_periodic,
    asa_periodic_literature,
    asa_transient,
    assemble,
    boundary_term_residual,
    build_buck_converter,
    convergence_metric,
    dsa,
    fd_oracle,
    integrate,
    integrate_adjoint,
    integrate_qoi,
    list_parameters,
    overhead_stats,
    parareal_solve,
    parse_netlist,
    pppc_solve,
    serialize_netlist,
    solve_periodic,
)

__all__ = [
    "Circuit",
    "MnaSystem",
    "NetlistError",
    "ParamDescriptor",
    "PararealConfig",
    "PararealResult",
    "PeriodicityError",
    "PeriodicRunInfo",
    "PeriodicSolution",
    "QoiSpec",
    "Trajectory",
    "asa_periodic",
    "asa_periodic_literature",
    "asa_transient",
    "assemble",
    "boundary_term_residual",
    "build_buck_converter",
    "convergence_metric",
    "dsa",
    "fd_oracle",
    "integrate",
    "integrate_adjoint",
    "integrate_qoi",
    "list_parameters",
    "overhead_stats",
    "parareal_solve",
    "parse_netlist",
    "pppc_solve",
    "serialize_netlist",
    "solve_periodic",
]
