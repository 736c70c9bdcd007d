//! Decision pipeline: a Gram certificate when `f` is a sum of squares, a
//! finite counterexample model otherwise.
//!
//! The primal side searches for a psd Gram matrix at half-degree `d`. The
//! dual side searches for a normalized positive Hankel functional that is
//! strictly negative on `f`, at degree `d + 1` for the free monoid (one more
//! than the Gram basis, so the GNS shifts are defined on `E`) and `d` for the
//! free group. Every decisive answer is re-verified independently of the
//! solver: certificates symbolically, witnesses by evaluating `f(Y)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::freewords::Mode;
use crate::gns::{self, GnsError, HankelFunctional, WitnessModel};
use crate::gram::{self, constraint_index, GramError, GramMatrix, SosCertificate};
use crate::linalg::{self, CMat, C64, ONE};
use crate::ncpoly::{NcPoly, OperatorTuple, PolyError};
use crate::sdp::{self, AffineSystem, Feasibility, SdpError, SolveOptions};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("polynomial is not Hermitian (defect {0:.3e}); only Hermitian polynomials can be sums of squares")]
    NotHermitian(f64),
    #[error("polynomial has degree {degree}, above 2d = {}", 2 * d)]
    DegreeTooHigh { degree: usize, d: usize },
    #[error(transparent)]
    Gram(#[from] GramError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Gns(#[from] GnsError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifyOptions {
    /// Half-degree `d`; inferred as `⌈deg f / 2⌉` when absent.
    pub degree: Option<usize>,
    pub solver: SolveOptions,
    pub delta_start: f64,
    pub delta_min: f64,
    pub eps_cert: f64,
    pub eps_wit: f64,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            degree: None,
            solver: SolveOptions::default(),
            delta_start: tol::DELTA_START,
            delta_min: tol::DELTA_MIN,
            eps_cert: tol::EPS_CERT,
            eps_wit: tol::EPS_WIT,
            seed: tol::DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Witness {
    pub model: WitnessModel,
    /// Smallest eigenvalue of `f(Y)`; at most `-eps_wit`.
    pub min_eig: f64,
    /// `⟨f(Y)γ, γ⟩ = φ(f) < 0`, the separating value reproduced by the model.
    pub refuted_value: f64,
    /// Margin the dual search succeeded with.
    pub delta: f64,
    /// `gns_verify` residual of the model against its functional.
    pub gns_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub primal_gap: f64,
    pub primal_iterations: usize,
    pub dual_gap: f64,
    pub dual_iterations: usize,
    /// Smallest margin tried on the dual side.
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub enum CertifyOutcome {
    Sos(SosCertificate),
    Witness(Box<Witness>),
    Undecided(Diagnostics),
}

impl CertifyOutcome {
    /// CLI exit code: 0 sos, 1 witness, 2 undecided.
    pub fn exit_code(&self) -> i32 {
        match self {
            CertifyOutcome::Sos(_) => 0,
            CertifyOutcome::Witness(_) => 1,
            CertifyOutcome::Undecided(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CertifyOutcome::Sos(_) => "sos",
            CertifyOutcome::Witness(_) => "witness",
            CertifyOutcome::Undecided(_) => "undecided",
        }
    }
}

/// Result of one search side: the verified object or the solver's gap.
#[derive(Clone, Debug)]
pub enum Search<T> {
    Found(T),
    NotFound { gap: f64, iterations: usize },
}

/// `d = ⌈deg f / 2⌉` unless overridden; checks `deg f ≤ 2d`.
pub fn half_degree(f: &NcPoly, opts: &CertifyOptions) -> Result<usize, CertifyError> {
    let degree = f.degree();
    let d = opts.degree.unwrap_or(degree.div_ceil(2));
    if degree > 2 * d {
        return Err(CertifyError::DegreeTooHigh { degree, d });
    }
    Ok(d)
}

/// Rejects polynomials with `‖f − f*‖` above `EPS_HERM` relative to their size.
pub fn check_hermitian(f: &NcPoly) -> Result<(), CertifyError> {
    let defect = f.try_sub(&f.adjoint())?.max_coeff_norm();
    if defect > tol::EPS_HERM * f.max_coeff_norm().max(1.0) {
        return Err(CertifyError::NotHermitian(defect));
    }
    Ok(())
}

pub fn certify(f: &NcPoly, opts: &CertifyOptions) -> Result<CertifyOutcome, CertifyError> {
    check_hermitian(f)?;
    let d = half_degree(f, opts)?;
    let (primal_gap, primal_iterations) = match primal_search(f, d, opts)? {
        Search::Found(cert) => return Ok(CertifyOutcome::Sos(cert)),
        Search::NotFound { gap, iterations } => (gap, iterations),
    };
    let (dual_gap, dual_iterations) = match dual_search(f, d, opts)? {
        Search::Found(w) => return Ok(CertifyOutcome::Witness(Box::new(w))),
        Search::NotFound { gap, iterations } => (gap, iterations),
    };
    Ok(CertifyOutcome::Undecided(Diagnostics {
        primal_gap,
        primal_iterations,
        dual_gap,
        dual_iterations,
        delta: opts.delta_min,
    }))
}

/// Gram feasibility at half-degree `d`, factored and re-verified against `f`.
pub fn primal_search(f: &NcPoly, d: usize, opts: &CertifyOptions) -> Result<Search<SosCertificate>, CertifyError> {
    let sys = gram::primal_system(f, d)?;
    let res = sdp::solve_with_face_reduction(&sys, &opts.solver, 2)?;
    let iterations = res.iterations();
    let x = match res.status {
        Feasibility::Feasible { solution, .. } => solution,
        Feasibility::Inconclusive { final_gap, .. } => {
            log::info!("primal search inconclusive after {iterations} iterations, gap {final_gap:.3e}");
            return Ok(Search::NotFound { gap: final_gap, iterations });
        }
    };
    let gram = GramMatrix::new(f.alphabet(), f.mode(), d, f.coeff_dim(), x)?;
    let mut cert = match gram::factor_gram(&gram, tol::EPS_RANK) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("feasible Gram matrix failed to factor: {e}");
            return Ok(Search::NotFound { gap: sys.residual(gram.matrix()), iterations });
        }
    };
    cert.residual = cert.residual_against(f)?;
    if cert.residual > opts.eps_cert {
        log::warn!("Gram factors miss f by {:.3e}", cert.residual);
        return Ok(Search::NotFound { gap: cert.residual, iterations });
    }
    Ok(Search::Found(cert))
}

/// Affine constraints on assembled functionals `X` of degree `D`: Hankel
/// structure, `Tr X = 1` and `φ_X(f) = -delta`, where `φ_X` averages each
/// product word's blocks.
pub fn dual_system(f: &NcPoly, degree: usize, delta: f64) -> Result<AffineSystem, CertifyError> {
    let (g, mode, k) = (f.alphabet(), f.mode(), f.coeff_dim());
    let idx = constraint_index(g, degree, mode);
    let n = idx.basis().len() * k;
    let mut sys = AffineSystem::new(n);
    let mut target: Vec<(usize, usize, C64)> = Vec::new();
    for (u, pos) in idx.iter() {
        let (i0, j0) = pos[0];
        for a in 0..k {
            for b in 0..k {
                for &(i, j) in &pos[1..] {
                    let eq = [(i * k + a, j * k + b, ONE), (i0 * k + a, j0 * k + b, -ONE)];
                    sys.add_complex_equation(&eq, C64::new(0.0, 0.0))?;
                }
            }
        }
        if let Some(c) = f.coeff(u) {
            let weight = 1.0 / pos.len() as f64;
            for a in 0..k {
                for b in 0..k {
                    // ⟨B, X⟩ = Σ conj(B) X with conj(B) = F_u[a,b] / |pos|
                    let entry = c[(a, b)].conj() * weight;
                    target.extend(pos.iter().map(|&(i, j)| (i * k + a, j * k + b, entry)));
                }
            }
        }
    }
    sys.add_hermitian((0..n).map(|i| (i, i, ONE)), 1.0)?;
    sys.add_complex_equation(&target, C64::new(-delta, 0.0))?;
    Ok(sys)
}

/// Dual search with margins `delta_start, delta_start/10, …, delta_min`.
///
/// Each attempt looks for `X = Z + ε I` with `Z ⪰ 0` and `ε = δ / (10 n)`,
/// so the functional handed to the GNS construction is positive definite
/// with a margin far above solver noise.
pub fn dual_search(f: &NcPoly, d: usize, opts: &CertifyOptions) -> Result<Search<Witness>, CertifyError> {
    let mode = f.mode();
    let degree = match mode {
        Mode::Monoid => d + 1,
        Mode::Group => d,
    };
    let mut delta = opts.delta_start;
    let mut last_gap = f64::INFINITY;
    let mut iterations = 0;
    while delta >= opts.delta_min * (1.0 - 1e-12) {
        let sys = dual_system(f, degree, delta)?;
        let n = sys.dim();
        let margin = delta / (10.0 * n as f64);
        let shift = linalg::identity(n) * C64::new(margin, 0.0);
        let res = match sdp::solve_feasibility(&sys.shifted(&shift)?, &opts.solver) {
            Ok(r) => r,
            Err(SdpError::Inconsistent { residual }) => {
                log::info!("dual system inconsistent at delta {delta:.1e} (residual {residual:.3e})");
                last_gap = residual;
                delta /= 10.0;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        iterations += res.iterations();
        match res.status {
            Feasibility::Feasible { solution, .. } => {
                let x = solution + &shift;
                match witness_from(f, &x, degree, delta, opts) {
                    Ok(w) => return Ok(Search::Found(w)),
                    Err(e) => {
                        log::warn!("dual solution at delta {delta:.1e} did not yield a witness: {e}");
                        last_gap = 0.0;
                    }
                }
            }
            Feasibility::Inconclusive { final_gap, .. } => {
                log::info!("dual search inconclusive at delta {delta:.1e}, gap {final_gap:.3e}");
                last_gap = final_gap;
            }
        }
        delta /= 10.0;
    }
    Ok(Search::NotFound { gap: last_gap, iterations })
}

#[derive(Debug, Error)]
enum WitnessFailure {
    #[error(transparent)]
    Gns(#[from] GnsError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("min eigenvalue of f(Y) is {0:.3e}, not below -eps_wit")]
    NotNegative(f64),
    #[error("GNS reproduction residual {0:.3e} too large")]
    Residual(f64),
}

fn witness_from(
    f: &NcPoly,
    x: &CMat,
    degree: usize,
    delta: f64,
    opts: &CertifyOptions,
) -> Result<Witness, WitnessFailure> {
    let s = HankelFunctional::from_assembled(f.alphabet(), f.mode(), f.coeff_dim(), degree, x)?;
    let model = gns::construct(&s)?;
    let gns_residual = gns::gns_verify(&s, &model, opts.seed);
    if gns_residual > tol::EPS_SHIFT_FIT {
        return Err(WitnessFailure::Residual(gns_residual));
    }
    let fy = f.eval(&model.tuple)?;
    let min_eig = linalg::min_eig(&fy);
    if min_eig > -opts.eps_wit {
        return Err(WitnessFailure::NotNegative(min_eig));
    }
    let refuted_value = model.gamma.dotc(&(&fy * &model.gamma)).re;
    Ok(Witness { model, min_eig, refuted_value, delta, gns_residual })
}

/// Random evaluation points: Hermitian tuples with Gaussian entries in
/// monoid mode, Haar-distributed unitaries (QR with phase correction) in
/// group mode.
pub fn random_tuple(rng: &mut ChaCha8Rng, g: u32, mode: Mode, n: usize) -> OperatorTuple {
    let mut gauss = || {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    };
    let mats: Vec<CMat> = (0..g).map(|_| CMat::from_fn(n, n, |_, _| gauss())).collect();
    match mode {
        Mode::Monoid => OperatorTuple::self_adjoint(mats.iter().map(linalg::hermitian_part).collect())
            .expect("Hermitian parts are self-adjoint"),
        Mode::Group => OperatorTuple::unitary(
            mats.into_iter()
                .map(|m| {
                    let qr = m.qr();
                    let r = qr.r();
                    let phases = DMatrix::from_fn(n, n, |i, j| {
                        if i != j {
                            return C64::new(0.0, 0.0);
                        }
                        let z = r[(i, i)];
                        if z.norm() > 0.0 {
                            z / z.norm()
                        } else {
                            ONE
                        }
                    });
                    qr.q() * phases
                })
                .collect(),
        )
        .expect("QR factors are unitary"),
    }
}

/// What an outcome asserts, in a form that can be re-checked independently.
#[derive(Clone, Debug)]
pub enum Claim {
    Sos(Vec<NcPoly>),
    Witness(OperatorTuple),
    Undecided,
}

impl Claim {
    pub fn kind(&self) -> &'static str {
        match self {
            Claim::Sos(_) => "sos",
            Claim::Witness(_) => "witness",
            Claim::Undecided => "undecided",
        }
    }
}

impl From<&CertifyOutcome> for Claim {
    fn from(o: &CertifyOutcome) -> Self {
        match o {
            CertifyOutcome::Sos(c) => Claim::Sos(c.factors.clone()),
            CertifyOutcome::Witness(w) => Claim::Witness(w.model.tuple.clone()),
            CertifyOutcome::Undecided(_) => Claim::Undecided,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpotcheckReport {
    pub outcome: &'static str,
    pub trials: usize,
    /// Smallest eigenvalue of `f` seen over the random tuples.
    pub sampled_min_eig: f64,
    /// Max coefficient deviation of `f - Σ r_j* r_j` for a sos claim.
    pub factor_residual: Option<f64>,
    /// Min eigenvalue of `f(Y)` at the witness model, if any.
    pub witness_min_eig: Option<f64>,
    /// Whether the samples, factors and witness agree with the claim.
    pub consistent: bool,
}

/// Re-checks a claim about `f` by random evaluation plus direct recomputation.
pub fn spotcheck(
    f: &NcPoly,
    claim: &Claim,
    trials: usize,
    n_max: usize,
    seed: u64,
) -> Result<SpotcheckReport, CertifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = f64::INFINITY;
    for t in 0..trials {
        let n = 1 + t % n_max.max(1);
        let x = random_tuple(&mut rng, f.alphabet(), f.mode(), n);
        sampled = sampled.min(linalg::min_eig(&f.eval(&x)?));
    }
    let factor_residual = match claim {
        Claim::Sos(factors) => {
            let mut sum = NcPoly::zero(f.alphabet(), f.mode(), f.coeff_dim());
            for r in factors {
                sum = sum.try_add(&r.adjoint().try_mul(r)?)?;
            }
            Some(f.try_sub(&sum)?.max_coeff_norm())
        }
        _ => None,
    };
    let witness_min_eig = match claim {
        Claim::Witness(x) => Some(linalg::min_eig(&f.eval(x)?)),
        _ => None,
    };
    let consistent = match claim {
        Claim::Sos(_) => sampled >= -tol::EPS_PSD && factor_residual.is_some_and(|r| r <= tol::EPS_CERT),
        Claim::Witness(_) => witness_min_eig.is_some_and(|m| m <= -tol::EPS_WIT),
        Claim::Undecided => true,
    };
    Ok(SpotcheckReport {
        outcome: claim.kind(),
        trials,
        sampled_min_eig: sampled,
        factor_residual,
        witness_min_eig,
        consistent,
    })
}
