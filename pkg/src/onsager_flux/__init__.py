"""Energy-flux diagnostics for incompressible flows on periodic grids."""

from .errors import (
    BadMagicError,
    GridMismatchError,
    NonFiniteError,
    OnsfError,
    ScaleError,
    TraceConvergenceError,
    TruncatedError,
    VersionMismatchError,
)
from .fitting import PowerLawFit, fit_power_law
from .flux import (
    DensityReport,
    FluxField,
    SweepResult,
    balance_flux,
    density_mechanism,
    flux_cet,
    flux_dr,
    grid_scales,
    sweep,
    trilinear,
    trilinear_cet,
    trilinear_dr,
    tube_mass,
)
from .grid import GridField, TimeSeriesField, read_field, sample_function, write_field
from .kernels import BUMP, QUARTIC, DiscreteKernel, KernelProfile, build_discrete_kernel, kernel_for, mollify
from .norms import NormReport, bd_longitudinal, besov_seminorm, bmo_commutator_ratio, bmo_norm, vmo_modulus
from .pressure import leray_project, solve_pressure
from .synth import FieldSpec, burgers_shock, random_fourier_field, shear_layer, taylor_green, weierstrass_field
from .traces import (
    Interface,
    JumpReport,
    TraceSample,
    bd_jump_formula_check,
    classify_points,
    composition_check,
    half_ball_trace,
    jump_residuals,
    surface_dissipation,
)

__version__ = "0.1.0"
