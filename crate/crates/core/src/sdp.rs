//! Semidefinite feasibility by Dykstra's alternating projections.
//!
//! The search space is the real vector space of Hermitian `m×m` matrices
//! with the trace pairing `⟨C, X⟩ = Re Tr(C* X)`. A problem is an affine
//! subspace `{X : ⟨C_t, X⟩ = b_t}` intersected with the psd cone. The engine
//! either returns a psd matrix satisfying every constraint to tolerance, or
//! reports `Inconclusive` with the last gap. It never claims infeasibility.

use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, CMat, C64};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("inconsistent affine constraints: residual {residual:.3e} after projection")]
    Inconsistent { residual: f64 },
    #[error("constraint entry ({row}, {col}) is outside the {dim}x{dim} variable")]
    OutOfRange { row: usize, col: usize, dim: usize },
    #[error("constraint matrix is not Hermitian at ({row}, {col})")]
    NotHermitian { row: usize, col: usize },
    #[error("matrix is {rows}x{cols}, system expects {dim}x{dim}")]
    Dimension { rows: usize, cols: usize, dim: usize },
}

/// A Hermitian constraint matrix stored sparsely, with its right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    entries: Vec<(usize, usize, C64)>,
    rhs: f64,
}

impl Constraint {
    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn rhs(&self) -> f64 {
        self.rhs
    }

    /// `⟨C, X⟩ = Re Σ conj(C_ij) X_ij`.
    pub fn pairing(&self, x: &CMat) -> f64 {
        self.entries.iter().map(|&(i, j, c)| (c.conj() * x[(i, j)]).re).sum()
    }

    pub fn to_dense(&self, dim: usize) -> CMat {
        let mut m = CMat::zeros(dim, dim);
        for &(i, j, c) in &self.entries {
            m[(i, j)] += c;
        }
        m
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineSystem {
    dim: usize,
    constraints: Vec<Constraint>,
}

fn merge(entries: impl IntoIterator<Item = (usize, usize, C64)>) -> Vec<(usize, usize, C64)> {
    let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
    for (i, j, c) in entries {
        *acc.entry((i, j)).or_default() += c;
    }
    acc.into_iter().filter(|(_, c)| c.norm() > 1e-15).map(|((i, j), c)| (i, j, c)).collect()
}

impl AffineSystem {
    pub fn new(dim: usize) -> Self {
        AffineSystem { dim, constraints: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Adds `⟨C, X⟩ = rhs` for a Hermitian `C` given by its nonzero entries
    /// (both triangles). A zero `C` with zero right-hand side is dropped.
    pub fn add_hermitian(
        &mut self,
        entries: impl IntoIterator<Item = (usize, usize, C64)>,
        rhs: f64,
    ) -> Result<(), SdpError> {
        let entries = merge(entries);
        let lookup: BTreeMap<(usize, usize), C64> = entries.iter().map(|&(i, j, c)| ((i, j), c)).collect();
        for &(i, j, c) in &entries {
            if i >= self.dim || j >= self.dim {
                return Err(SdpError::OutOfRange { row: i, col: j, dim: self.dim });
            }
            let mirror = lookup.get(&(j, i)).copied().unwrap_or_default();
            if (mirror.conj() - c).norm() > 1e-12 {
                return Err(SdpError::NotHermitian { row: i, col: j });
            }
        }
        if entries.is_empty() && rhs == 0.0 {
            return Ok(());
        }
        self.constraints.push(Constraint { entries, rhs });
        Ok(())
    }

    /// Adds the complex equation `Tr(B* X) = rhs` for an arbitrary (sparse)
    /// `B`, as two real constraints on Hermitian `X`: real and imaginary part.
    pub fn add_complex_equation(&mut self, b: &[(usize, usize, C64)], rhs: C64) -> Result<(), SdpError> {
        let half = C64::new(0.5, 0.0);
        let re = b.iter().flat_map(|&(i, j, c)| [(i, j, c * half), (j, i, c.conj() * half)]);
        self.add_hermitian(re, rhs.re)?;
        let i_half = C64::new(0.0, 0.5);
        let im = b.iter().flat_map(|&(i, j, c)| [(i, j, c * i_half), (j, i, -c.conj() * i_half)]);
        self.add_hermitian(im, rhs.im)
    }

    /// Largest constraint violation `max_t |⟨C_t, X⟩ − b_t|`.
    pub fn residual(&self, x: &CMat) -> f64 {
        self.constraints.iter().map(|c| (c.pairing(x) - c.rhs).abs()).fold(0.0, f64::max)
    }

    /// The system satisfied by `Z = X − shift` whenever `X` satisfies `self`.
    pub fn shifted(&self, shift: &CMat) -> Result<AffineSystem, SdpError> {
        self.check_shape(shift)?;
        let constraints = self
            .constraints
            .iter()
            .map(|c| Constraint { entries: c.entries.clone(), rhs: c.rhs - c.pairing(shift) })
            .collect();
        Ok(AffineSystem { dim: self.dim, constraints })
    }

    fn check_shape(&self, x: &CMat) -> Result<(), SdpError> {
        if x.nrows() != self.dim || x.ncols() != self.dim {
            return Err(SdpError::Dimension { rows: x.nrows(), cols: x.ncols(), dim: self.dim });
        }
        Ok(())
    }

    pub fn projector(&self) -> AffineProjector<'_> {
        AffineProjector::new(self)
    }
}

/// Cached normal-equation data for repeated projections onto one system.
pub struct AffineProjector<'a> {
    system: &'a AffineSystem,
    gram_pinv: DMatrix<f64>,
}

impl<'a> AffineProjector<'a> {
    fn new(system: &'a AffineSystem) -> Self {
        let t = system.constraints.len();
        let index: Vec<BTreeMap<(usize, usize), C64>> =
            system.constraints.iter().map(|c| c.entries.iter().map(|&(i, j, v)| ((i, j), v)).collect()).collect();
        let mut gram = DMatrix::<f64>::zeros(t, t);
        for s in 0..t {
            for u in s..t {
                let (small, large) = if index[s].len() <= index[u].len() { (s, u) } else { (u, s) };
                let v: f64 =
                    index[small].iter().filter_map(|(pos, a)| index[large].get(pos).map(|b| (a.conj() * b).re)).sum();
                gram[(s, u)] = v;
                gram[(u, s)] = v;
            }
        }
        AffineProjector { system, gram_pinv: linalg::psd_pinv(&gram, 1e-12) }
    }

    /// The `W = Σ y_t C_t` nearest to `target` subject to `Σ y_t b_t = 0`.
    pub fn exposing(&self, target: &CMat) -> CMat {
        let cons = &self.system.constraints;
        let a = DVector::from_iterator(cons.len(), cons.iter().map(|c| c.pairing(target)));
        let b = DVector::from_iterator(cons.len(), cons.iter().map(|c| c.rhs));
        let ga = &self.gram_pinv * &a;
        let gb = &self.gram_pinv * &b;
        let denom = b.dot(&gb);
        let y = if denom.abs() > 1e-300 { &ga - &gb * (b.dot(&ga) / denom) } else { ga };
        let mut w = CMat::zeros(self.system.dim, self.system.dim);
        for (c, &coef) in cons.iter().zip(y.iter()) {
            for &(i, j, v) in &c.entries {
                w[(i, j)] += v * coef;
            }
        }
        linalg::hermitian_part(&w)
    }

    /// Frobenius-orthogonal projection onto the affine set. Fails when the
    /// least-squares solution still violates the constraints.
    pub fn project(&self, x: &CMat) -> Result<CMat, SdpError> {
        self.system.check_shape(x)?;
        let r = DVector::from_iterator(
            self.system.constraints.len(),
            self.system.constraints.iter().map(|c| c.pairing(x) - c.rhs),
        );
        let y = &self.gram_pinv * r;
        let mut out = x.clone();
        for (c, &coef) in self.system.constraints.iter().zip(y.iter()) {
            if coef == 0.0 {
                continue;
            }
            for &(i, j, v) in &c.entries {
                out[(i, j)] -= v * coef;
            }
        }
        let residual = self.system.residual(&out);
        let scale = self.system.constraints.iter().map(|c| c.rhs.abs()).fold(1.0, f64::max);
        if residual > tol::EPS_AFFINE * scale {
            return Err(SdpError::Inconsistent { residual });
        }
        Ok(out)
    }
}

/// Nearest psd matrix in Frobenius norm: clip negative eigenvalues of the
/// Hermitian part.
pub fn project_psd(x: &CMat) -> CMat {
    let (vals, vecs) = linalg::eigh(x);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let s = if lam > 0.0 { lam } else { 0.0 };
        scaled.column_mut(j).scale_mut(s);
    }
    let out = scaled * vecs.adjoint();
    if n == 0 {
        return out;
    }
    linalg::hermitian_part(&out)
}

pub fn project_affine(x: &CMat, sys: &AffineSystem) -> Result<CMat, SdpError> {
    sys.projector().project(x)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Keep one [`TraceRecord`] per iteration.
    pub record_trace: bool,
    /// Stop early when the gap stops shrinking (checked every `stall_window`
    /// iterations); `0` disables the check.
    pub stall_window: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { max_iter: tol::SOLVER_MAX_ITER, tol: tol::SOLVER_TOL, record_trace: false, stall_window: 1000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Constraint violation of the psd iterate.
    pub affine_residual: f64,
    /// `‖x − y‖_F` between the affine and the psd iterate; bounds the psd
    /// violation of the affine iterate.
    pub gap: f64,
}

impl TraceRecord {
    pub fn residual(&self) -> f64 {
        self.affine_residual.max(self.gap)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible { solution: CMat, iterations: usize },
    Inconclusive { iterations: usize, final_gap: f64, stalled: bool },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub status: Feasibility,
    pub trace: Vec<TraceRecord>,
    /// Last psd iterate (the solution when feasible).
    pub last_iterate: CMat,
}

impl FeasibilityResult {
    pub fn solution(&self) -> Option<&CMat> {
        match &self.status {
            Feasibility::Feasible { solution, .. } => Some(solution),
            Feasibility::Inconclusive { .. } => None,
        }
    }

    pub fn iterations(&self) -> usize {
        match self.status {
            Feasibility::Feasible { iterations, .. } | Feasibility::Inconclusive { iterations, .. } => iterations,
        }
    }

    /// Writes the trace as line-delimited JSON.
    pub fn write_trace(&self, mut out: impl Write) -> io::Result<()> {
        for rec in &self.trace {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Dykstra's alternating projection between the psd cone and the affine set,
/// started from `project_affine(0)`.
///
/// Only the cone step carries a Dykstra correction; the affine step needs
/// none. The psd iterate is returned once it satisfies every constraint to
/// `tol` and its distance to the affine iterate is below `tol`.
pub fn solve_feasibility(sys: &AffineSystem, opts: &SolveOptions) -> Result<FeasibilityResult, SdpError> {
    let projector = sys.projector();
    let m = sys.dim();
    let mut x = projector.project(&CMat::zeros(m, m))?;
    let mut correction = CMat::zeros(m, m);
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut best_at_checkpoint = f64::INFINITY;
    let mut last_gap = f64::INFINITY;
    let mut last = CMat::zeros(m, m);
    for it in 1..=opts.max_iter {
        let shifted = &x + &correction;
        let y = project_psd(&shifted);
        correction = shifted - &y;
        x = projector.project(&y)?;
        let rec = TraceRecord { iteration: it, affine_residual: sys.residual(&y), gap: (&x - &y).norm() };
        last_gap = rec.residual();
        if opts.record_trace {
            trace.push(rec);
        }
        if rec.affine_residual <= opts.tol && rec.gap <= opts.tol {
            return Ok(FeasibilityResult {
                status: Feasibility::Feasible { solution: y.clone(), iterations: it },
                trace,
                last_iterate: y,
            });
        }
        best = best.min(rec.residual());
        if opts.stall_window > 0 && it % opts.stall_window == 0 {
            let stalled = best > 100.0 * opts.tol && best > (1.0 - 1e-4) * best_at_checkpoint;
            if stalled {
                log::debug!("alternating projections stalled at iteration {it}, gap {best:.3e}");
                return Ok(FeasibilityResult {
                    status: Feasibility::Inconclusive { iterations: it, final_gap: last_gap, stalled: true },
                    trace,
                    last_iterate: y,
                });
            }
            best_at_checkpoint = best;
        }
        if it == opts.max_iter {
            last = y;
        }
    }
    Ok(FeasibilityResult {
        status: Feasibility::Inconclusive { iterations: opts.max_iter, final_gap: last_gap, stalled: false },
        trace,
        last_iterate: last,
    })
}

/// The system for `Z` with `X = V Z V*`: each `C_t` becomes `V* C_t V`.
pub fn restrict_to_face(sys: &AffineSystem, v: &CMat) -> Result<AffineSystem, SdpError> {
    if v.nrows() != sys.dim {
        return Err(SdpError::Dimension { rows: v.nrows(), cols: v.ncols(), dim: sys.dim });
    }
    let r = v.ncols();
    let mut out = AffineSystem::new(r);
    for c in &sys.constraints {
        let reduced = linalg::hermitian_part(&(v.adjoint() * c.to_dense(sys.dim) * v));
        let entries = (0..r).flat_map(|i| (0..r).map(move |j| (i, j))).map(|(i, j)| (i, j, reduced[(i, j)]));
        out.add_hermitian(entries, c.rhs)?;
    }
    Ok(out)
}

/// Candidate faces from the spectrum of a near-feasible psd iterate.
///
/// For each spectral gap of at least 100× (best gap first), the eigenvectors
/// below the gap span a guessed kernel `K`. The guess is snapped to an exact
/// exposing matrix: the `W = Σ y_t C_t` with `Σ y_t b_t = 0` nearest to
/// `K K*`. Such a `W` has `⟨W, X⟩ = 0` on the whole affine set, so when it is
/// psd every feasible `X` has range inside `null(W)`, which is the face.
fn candidate_faces(projector: &AffineProjector<'_>, y: &CMat, limit: usize) -> Vec<CMat> {
    let (vals, vecs) = linalg::eigh(y);
    let n = vals.len();
    let mut cuts: Vec<(f64, usize)> = (1..n)
        .filter_map(|r| {
            let (inside, outside) = (vals[n - r], vals[n - r - 1].max(0.0));
            (inside > 0.0 && outside <= 1e-2 * inside).then_some((outside / inside, r))
        })
        .collect();
    cuts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut faces = Vec::new();
    for (_, r) in cuts.into_iter().take(limit) {
        let kernel = vecs.columns(0, n - r);
        let mut guess = kernel * kernel.adjoint();
        // alternate between the exposing subspace and rank-(n−r) psd matrices
        let mut exposed = None;
        for _ in 0..500 {
            let w = projector.exposing(&guess);
            let (wv, wvecs) = linalg::eigh(&w);
            let top = wv.last().copied().unwrap_or(0.0);
            if top <= 0.0 {
                break;
            }
            if wv[0] >= -1e-12 * top {
                exposed = Some((wv, wvecs));
                break;
            }
            guess = CMat::zeros(n, n);
            for (j, &lam) in wv.iter().enumerate().skip(r) {
                let col = wvecs.column(j);
                guess += col * col.adjoint() * C64::new(lam.max(0.0), 0.0);
            }
        }
        let Some((wv, wvecs)) = exposed else { continue };
        let top = wv[n - 1];
        let null = wv.iter().take_while(|&&l| l <= 1e-8 * top).count();
        if null == 0 || null == n {
            continue;
        }
        faces.push(wvecs.columns(0, null).into_owned());
    }
    faces
}

/// [`solve_feasibility`] with face reduction for problems whose feasible set
/// has no interior, where alternating projections converge sublinearly.
///
/// A first run gets a tenth of the iteration budget. If it is inconclusive,
/// the spectrum of its last psd iterate suggests faces `{V Z V*}`; each is
/// tried (recursively, up to `depth` levels) and a feasible `Z` is lifted
/// back. Failing that, a full-budget run decides. Lifted solutions satisfy
/// the original constraints to the same tolerance and are psd.
pub fn solve_with_face_reduction(
    sys: &AffineSystem,
    opts: &SolveOptions,
    depth: usize,
) -> Result<FeasibilityResult, SdpError> {
    if depth == 0 {
        return solve_feasibility(sys, opts);
    }
    let probe_opts = SolveOptions { max_iter: (opts.max_iter / 10).max(1), ..*opts };
    let probe = solve_feasibility(sys, &probe_opts)?;
    if probe.solution().is_some() {
        return Ok(probe);
    }
    let mut spent = probe.iterations();
    let projector = sys.projector();
    for v in candidate_faces(&projector, &probe.last_iterate, 3) {
        let reduced = match restrict_to_face(sys, &v) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let res = match solve_with_face_reduction(&reduced, opts, depth - 1) {
            Ok(r) => r,
            Err(SdpError::Inconsistent { .. }) => continue,
            Err(e) => return Err(e),
        };
        spent += res.iterations();
        if let Some(z) = res.solution() {
            let x = &v * z * v.adjoint();
            let x = linalg::hermitian_part(&x);
            if sys.residual(&x) <= opts.tol {
                log::debug!("feasible on a face of dimension {} after {spent} iterations", v.ncols());
                return Ok(FeasibilityResult {
                    status: Feasibility::Feasible { solution: x.clone(), iterations: spent },
                    trace: probe.trace,
                    last_iterate: x,
                });
            }
        }
    }
    let mut full = solve_feasibility(sys, opts)?;
    match &mut full.status {
        Feasibility::Feasible { iterations, .. } | Feasibility::Inconclusive { iterations, .. } => *iterations += spent,
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs_diff, min_eig, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn rand_herm(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let m = CMat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        linalg::hermitian_part(&m)
    }

    fn trace_system(n: usize, value: f64) -> AffineSystem {
        let mut sys = AffineSystem::new(n);
        sys.add_hermitian((0..n).map(|i| (i, i, ONE)), value).unwrap();
        sys
    }

    #[test]
    fn psd_projection_examples() {
        let x = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(-1.0)]));
        let p = project_psd(&x);
        assert!(max_abs_diff(&p, &CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0), c(0.0)]))) < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = CMat::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let psd = &a * a.adjoint();
        assert!(max_abs_diff(&project_psd(&psd), &psd) < 1e-12);
    }

    #[test]
    fn psd_projection_is_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = rand_herm(&mut rng, 4);
        let p = project_psd(&x);
        let d0 = (&x - &p).norm();
        for _ in 0..100 {
            let a = CMat::from_fn(4, 4, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let other = &a * a.adjoint() * c(rng.random_range(0.0..1.0));
            assert!(d0 <= (&x - &other).norm() + 1e-12);
        }
    }

    #[test]
    fn affine_projection_examples() {
        let sys = trace_system(2, 1.0);
        let p = project_affine(&CMat::zeros(2, 2), &sys).unwrap();
        assert!(max_abs_diff(&p, &(identity(2) * c(0.5))) < 1e-15);
        let fixed = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.25), c(0.75)]));
        assert!(max_abs_diff(&project_affine(&fixed, &sys).unwrap(), &fixed) < 1e-12);
    }

    #[test]
    fn affine_projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sys = AffineSystem::new(4);
        for _ in 0..5 {
            let h = rand_herm(&mut rng, 4);
            let entries: Vec<_> =
                (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).map(|(i, j)| (i, j, h[(i, j)])).collect();
            sys.add_hermitian(entries, rng.random_range(-1.0..1.0)).unwrap();
        }
        for _ in 0..10 {
            let x = rand_herm(&mut rng, 4);
            let once = project_affine(&x, &sys).unwrap();
            let twice = project_affine(&once, &sys).unwrap();
            assert!(max_abs_diff(&once, &twice) < 1e-10);
            assert!(sys.residual(&once) < 1e-10);
        }
    }

    #[test]
    fn contradictory_constraints_are_rejected() {
        let mut sys = trace_system(2, 0.0);
        sys.add_hermitian((0..2).map(|i| (i, i, ONE)), 1.0).unwrap();
        assert!(matches!(project_affine(&CMat::zeros(2, 2), &sys), Err(SdpError::Inconsistent { .. })));
        assert!(matches!(solve_feasibility(&sys, &SolveOptions::default()), Err(SdpError::Inconsistent { .. })));
    }

    #[test]
    fn rejects_non_hermitian_constraint() {
        let mut sys = AffineSystem::new(2);
        assert!(matches!(sys.add_hermitian([(0, 1, ONE)], 0.0), Err(SdpError::NotHermitian { .. })));
        assert!(matches!(sys.add_hermitian([(2, 2, ONE)], 0.0), Err(SdpError::OutOfRange { .. })));
    }

    #[test]
    fn complex_equation_pins_an_off_diagonal_entry() {
        let mut sys = AffineSystem::new(2);
        sys.add_complex_equation(&[(0, 1, ONE)], C64::new(0.3, -0.4)).unwrap();
        let p = project_affine(&CMat::zeros(2, 2), &sys).unwrap();
        assert!((p[(0, 1)] - C64::new(0.3, -0.4)).norm() < 1e-15);
        assert!((p[(1, 0)] - C64::new(0.3, 0.4)).norm() < 1e-15);
    }

    #[test]
    fn solver_finds_psd_point_on_trace_slice() {
        let mut sys = trace_system(3, 1.0);
        sys.add_hermitian([(0, 1, c(0.5)), (1, 0, c(0.5))], 0.4).unwrap();
        let res = solve_feasibility(&sys, &SolveOptions { record_trace: true, ..Default::default() }).unwrap();
        let x = res.solution().expect("feasible");
        assert!(sys.residual(x) <= 1e-9);
        assert!(min_eig(x) >= -1e-9);
        // residuals settle: no growth beyond slack over the final stretch
        let tail: Vec<f64> = res.trace.iter().rev().take(100).map(TraceRecord::residual).collect();
        for pair in tail.windows(2) {
            assert!(pair[0] <= pair[1] + 10.0 * 1e-9);
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let mut sys = trace_system(3, 1.0);
        sys.add_hermitian([(0, 2, c(0.5)), (2, 0, c(0.5))], 0.7).unwrap();
        let opts = SolveOptions { record_trace: true, ..Default::default() };
        let a = solve_feasibility(&sys, &opts).unwrap();
        let b = solve_feasibility(&sys, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn face_reduction_solves_singular_instance() {
        // psd with (1, 1, 1) forced into the kernel: X_00 + X_11 = 1 and
        // every entry of X·(1,1,1) pinned to zero, plus one off-diagonal fix
        let mut sys = AffineSystem::new(3);
        sys.add_hermitian([(0, 0, ONE), (1, 1, ONE)], 1.0).unwrap();
        let ones = nalgebra::DVector::from_element(3, ONE);
        for i in 0..3 {
            let row: Vec<(usize, usize, C64)> = (0..3).map(|j| (i, j, ones[j])).collect();
            sys.add_complex_equation(&row, C64::new(0.0, 0.0)).unwrap();
        }
        sys.add_hermitian([(0, 1, c(0.5)), (1, 0, c(0.5))], 0.1).unwrap();
        let opts = SolveOptions::default();
        let res = solve_with_face_reduction(&sys, &opts, 2).unwrap();
        let x = res.solution().expect("feasible after face reduction");
        assert!(sys.residual(x) <= 1e-9);
        assert!(min_eig(x) >= -1e-12);
    }

    #[test]
    fn infeasible_instance_is_inconclusive() {
        // X ⪰ 0 with X_00 = X_11 = 0 and X_01 + X_10 = 2 has no solution.
        let mut sys = AffineSystem::new(2);
        sys.add_hermitian([(0, 0, ONE)], 0.0).unwrap();
        sys.add_hermitian([(1, 1, ONE)], 0.0).unwrap();
        sys.add_hermitian([(0, 1, ONE), (1, 0, ONE)], 2.0).unwrap();
        let res = solve_feasibility(&sys, &SolveOptions::default()).unwrap();
        assert!(matches!(res.status, Feasibility::Inconclusive { final_gap, .. } if final_gap > 1e-3));
    }
}
