//! Numeric tolerances used across the crate.
//!
//! Validation thresholds live here so every module measures against the same
//! values; nothing in the library hard-codes an ad-hoc epsilon.

/// Relative Hermiticity / symmetry tolerance for input matrices.
/// Inputs beyond this are rejected rather than symmetrized.
pub const HERMITICITY_REL: f64 = 1e-12;

/// Unit-norm tolerance for state vectors (`| |z|² - 1 | ≤ UNIT_NORM`).
pub const UNIT_NORM: f64 = 1e-9;

/// Relative eigendecomposition residual: `‖S - VΛVᵀ‖_max ≤ EIG_RESIDUAL·‖S‖_max`.
pub const EIG_RESIDUAL: f64 = 1e-10;

/// Jacobi sweep convergence: off-diagonal Frobenius norm ≤ `JACOBI_OFF_REL·‖S‖_F`.
pub const JACOBI_OFF_REL: f64 = 1e-13;

/// Eigenvalues in `[-PSD_CLIP, 0)` are treated as roundoff and clipped to 0
/// when a positive semi-definite matrix is expected; anything below is an error.
pub const PSD_CLIP: f64 = 1e-10;

/// Trace deviation allowed for integrated density matrices.
pub const DENSITY_TRACE: f64 = 1e-9;

/// Hermiticity deviation allowed for integrated density matrices.
pub const DENSITY_HERMITICITY: f64 = 1e-10;

/// Smallest eigenvalue allowed for integrated density matrices.
pub const DENSITY_POSITIVITY: f64 = -1e-8;

/// Allowed imaginary residue when an expectation value must be real.
pub const REAL_EXPECTATION: f64 = 1e-9;

/// Default cap on the symmetric-subspace dimension C(n+N-1, n).
pub const FOCK_DIM_CAP: usize = 20_000;
