//! Numerical thresholds. All are absolute and assume inputs normalized so
//! that coefficient norms are `O(1)`.

/// Hermiticity tolerance for self-adjoint evaluation tuples.
pub const EPS_HERM: f64 = 1e-9;
/// Unitarity tolerance for group-mode evaluation tuples.
pub const EPS_UNIT: f64 = 1e-9;
/// Coefficients with Frobenius norm at or below this are dropped.
pub const EPS_DROP: f64 = 1e-14;
/// Gram and Hankel matrices are accepted as psd down to `-EPS_PSD`.
pub const EPS_PSD: f64 = 1e-8;
/// Eigenvalues below this are clipped when factoring a Gram matrix.
pub const EPS_RANK: f64 = 1e-10;
/// Maximum coefficient residual of an accepted SOS certificate.
pub const EPS_CERT: f64 = 1e-7;
/// A witness must push the minimum eigenvalue of `f(Y)` to `-EPS_WIT` or below.
pub const EPS_WIT: f64 = 1e-6;
/// Relative null-space cutoff in the GNS construction.
pub const EPS_NULL_REL: f64 = 1e-10;
/// Residual allowed when fitting the shift operators on the GNS space.
pub const EPS_SHIFT_FIT: f64 = 1e-8;
/// Affine consistency threshold for `project_affine`.
pub const EPS_AFFINE: f64 = 1e-8;

/// Default feasibility tolerance of the alternating-projection engine.
pub const SOLVER_TOL: f64 = 1e-9;
/// Default iteration cap of the alternating-projection engine.
pub const SOLVER_MAX_ITER: usize = 50_000;

/// Initial margin of the dual witness search.
pub const DELTA_START: f64 = 1e-4;
/// Smallest margin tried before giving up on the dual side.
pub const DELTA_MIN: f64 = 1e-8;

/// Seed used for verification coefficients and spot checks unless overridden.
pub const DEFAULT_SEED: u64 = 0x5eed_2d0f_0c75;
