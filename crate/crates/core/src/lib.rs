//! Band structure of odd-order periodic differential operators with matrix
//! coefficients.
//!
//! The operator `(-i)^n y^{(n)} + sum_{v=2}^{n} P_v(x) y^{(n-v)}` on the line, with
//! `n` odd, `m x m` coefficients of period 1 and finite Fourier series, is
//! studied through its fibers `L_t` (quasiperiodic conditions with multiplier
//! `e^{i pi t}`). The crate provides
//!
//! * [`coeffs`]: coefficient input and the norm `M`,
//! * [`localization`]: closed-form intervals that localize the Bloch eigenvalues,
//! * [`galerkin`]: the Fourier–Galerkin fiber matrices and their spectra,
//! * [`monodromy`]: the characteristic determinant and root counting,
//! * [`bands`]: band numbering, band tables and gap reports,
//! * [`verify`]: the predicate suite over a quasimomentum grid.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bands;
pub mod coeffs;
pub mod desk;
pub mod error;
pub mod galerkin;
pub mod localization;
pub mod monodromy;
pub mod ode;
pub mod verify;

pub use bands::{
    build_band_table, check_overlap, check_small_m_structure, detect_gaps, detect_gaps_two_resolutions,
    number_eigenvalues, uniform_grid, BandOptions, BandTable, GapReport,
};
pub use coeffs::{
    check_formal_self_adjointness, compute_m_norm, load_operator_spec, load_operator_spec_file, CoefficientNorm,
    FourierMatrixSeries, OperatorSpec,
};
pub use error::{Error, ErrorKind, Result};
pub use galerkin::{assemble_fiber_matrix, fiber_spectrum, solve_fiber, FiberMatrix, FiberSpectrum};
pub use localization::{build_localization_plan, compute_threshold, Interval, LocalizationPlan};
pub use monodromy::{characteristic_determinant, count_roots_in_interval, DeterminantEvaluator, MonodromyOptions};
pub use ode::Tolerances;
pub use verify::{run_verification, VerificationSummary, VerifyOptions};
