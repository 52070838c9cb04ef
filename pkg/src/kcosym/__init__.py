"""Numerical k-cosymplectic Hamiltonian field theory in Darboux coordinates."""

from .chart import (
    ChartPoint,
    Covector,
    Dimensions,
    KTangent,
    TangentVector,
    contract_eta,
    contract_omega,
    contract_theta,
    kernel_dimension,
    kernel_residual,
    reeb,
)
from .hamiltonian import (
    SYMMETRIC,
    ConcentratedGauge,
    HamiltonianFunction,
    QuadraticHamiltonian,
    SymmetricGauge,
    build_hdw,
    dual_metric,
    eval_quadratic,
    gradient,
    hdw_residual,
    reconstruct_from_section,
    wave_hamiltonian,
)
from .symmetry import (
    BaseVectorField,
    BundleMap,
    ConservedCurrent,
    NoetherReport,
    PhaseVectorField,
    SymmetryError,
    bracket_field,
    canonical_prolongation,
    complete_lift,
    conserved_from_killing,
    conserved_from_noether,
    killing_check,
    lie_bracket,
    lie_derivative_omega,
    lie_derivative_scalar,
    lie_derivative_theta,
    noether_check,
    sample_box,
)
from .fields import (
    BaseGrid,
    SectionGrid,
    WaveParams,
    divergence,
    hdw_residual_on_section,
    integrate_quadratic,
    integrate_wave,
    momenta_from_section,
    read_section_csv,
    wave_grid,
    write_section_csv,
)

__version__ = "0.1.0"
