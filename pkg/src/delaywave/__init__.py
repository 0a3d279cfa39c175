"""Delayed damped wave systems on structured grids.

Boundary (Robin) and internal delayed damping, a transport representation of
the delay, trapezoidal time stepping with energy and charge tracking, explicit
equilibria, decay fits and G-weighted resolvent sweeps.
"""
from .analyze import (
    DecayFit,
    Equilibrium,
    classify_decay,
    distance_to_equilibrium,
    equilibrium_chi,
    equilibrium_for,
    equilibrium_zeta,
    fit_decay,
)
from .delayline import DelayLine, RingBuffer, build_delayline, ring_step, sample_history
from .evolve import CNStepper, Trajectory, cn_step, dissipation_audit, simulate, simulate_ring
from .generator import (
    DiscreteGenerator,
    WaveState,
    assemble_boundary_generator,
    assemble_boundary_undelayed,
    assemble_internal_generator,
    assemble_internal_undelayed,
    assemble_scalar_delay,
    constraint_functional,
    export_coo,
    g_norm,
    project_mean_zero,
)
from .mesh import (
    CoefField,
    Mesh,
    assemble_neumann_laplacian,
    build_interval_mesh,
    build_rect_mesh,
    damping_strip_field,
)
from .params import (
    BoundaryDelayParams,
    InternalDelayParams,
    ParameterError,
    default_xi,
    validate_boundary_params,
    validate_internal_params,
)
from .spectral import ResolventSweep, SpectrumReport, resolvent_norm, spectrum, sweep_and_fit

__version__ = "0.1.0"
