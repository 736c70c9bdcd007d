//! Dense complex linear algebra shared by every stage of the pipeline.
//!
//! Everything here is deterministic: eigenpairs are returned sorted, and no
//! routine depends on randomized pivoting or thread scheduling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

/// `(m + m*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of the Hermitian part of `m`, eigenvalues ascending.
///
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Smallest eigenvalue of the Hermitian part; `0` for an empty matrix.
pub fn min_eig(m: &CMat) -> f64 {
    eigh(m).0.first().copied().unwrap_or(0.0)
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Kronecker product with `a` as the outer (left) factor.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Trace pairing `Tr(a* b)`.
pub fn trace_pairing(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Entrywise bilinear pairing `Σ a_ij b_ij = Tr(aᵀ b)`.
pub fn entry_pairing(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Nearest unitary in Frobenius norm (polar factor).
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    u * v_t
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

pub fn unitarity_defect(m: &CMat) -> f64 {
    max_abs_diff(&(m * m.adjoint()), &identity(m.nrows()))
}

/// Moore–Penrose pseudo-inverse of a real symmetric positive semidefinite
/// matrix; eigenvalues below `rel_cutoff * λ_max` are treated as zero.
pub fn psd_pinv(k: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let n = k.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = k.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cutoff = rel_cutoff * top;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = if lam > cutoff && lam > 0.0 { 1.0 / lam } else { 0.0 };
        scaled.column_mut(j).scale_mut(s);
    }
    scaled * eig.eigenvectors.transpose()
}

/// Orthonormalizes `candidates` column by column, in order, against the
/// span of `basis` and of the vectors accepted so far. A candidate is
/// accepted when its residual norm exceeds `tol`. Two passes of classical
/// Gram–Schmidt per vector keep the result orthonormal to roundoff.
pub fn extend_orthonormal(basis: &CMat, candidates: &CMat, tol: f64) -> CMat {
    let rows = candidates.nrows();
    let mut accepted: Vec<CVec> = basis.column_iter().map(|c| c.into_owned()).collect();
    let fixed = accepted.len();
    for cand in candidates.column_iter() {
        let mut v: CVec = cand.into_owned();
        for _ in 0..2 {
            for q in &accepted {
                let c = q.dotc(&v);
                v.axpy(-c, q, ONE);
            }
        }
        let nrm = v.norm();
        if nrm > tol {
            accepted.push(v.unscale(nrm));
        }
    }
    let new = &accepted[fixed..];
    let mut out = zeros(rows, new.len());
    for (j, q) in new.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}

/// Orthonormal basis of the column span of `cols`, built by Gram–Schmidt
/// with column pivoting (largest remaining residual first). Columns whose
/// residual falls below `rel_tol` times the largest column norm are
/// considered dependent.
pub fn pivoted_orthonormal_span(cols: &CMat, rel_tol: f64) -> CMat {
    let rows = cols.nrows();
    let mut residuals: Vec<CVec> = cols.column_iter().map(|c| c.into_owned()).collect();
    let scale = residuals.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut basis: Vec<CVec> = Vec::new();
    if scale == 0.0 {
        return zeros(rows, 0);
    }
    let threshold = rel_tol * scale;
    let mut used = vec![false; residuals.len()];
    loop {
        let pick = residuals.iter().enumerate().filter(|(i, _)| !used[*i]).map(|(i, r)| (i, r.norm())).fold(
            None::<(usize, f64)>,
            |best, (i, n)| match best {
                Some((_, bn)) if bn >= n => best,
                _ => Some((i, n)),
            },
        );
        let Some((idx, nrm)) = pick else { break };
        if nrm <= threshold || basis.len() == rows {
            break;
        }
        used[idx] = true;
        let mut q = residuals[idx].unscale(nrm);
        // reorthogonalize against the accepted basis
        for b in &basis {
            let c = b.dotc(&q);
            q.axpy(-c, b, ONE);
        }
        let qn = q.norm();
        if qn <= f64::EPSILON {
            continue;
        }
        q.unscale_mut(qn);
        for (i, r) in residuals.iter_mut().enumerate() {
            if !used[i] {
                let c = q.dotc(r);
                r.axpy(-c, &q, ONE);
            }
        }
        basis.push(q);
    }
    let mut out = zeros(rows, basis.len());
    for (j, q) in basis.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}

/// Pseudo-inverse via SVD with a relative singular-value cutoff.
pub fn pinv(m: &CMat, rel_cutoff: f64) -> CMat {
    if m.is_empty() {
        return zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut sinv = zeros(v_t.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rel_cutoff * top && s > 0.0 {
            sinv[(i, i)] = C64::new(1.0 / s, 0.0);
        }
    }
    v_t.adjoint() * sinv * u.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_sorts_ascending() {
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0, 0.0), c(-1.0, 0.0), c(2.0, 0.0)]));
        let (vals, vecs) = eigh(&m);
        assert_eq!(vals, vec![-1.0, 2.0, 3.0]);
        let back =
            &vecs * CMat::from_diagonal(&CVec::from_iterator(3, vals.iter().map(|&v| c(v, 0.0)))) * vecs.adjoint();
        assert!(max_abs_diff(&back, &m) < 1e-12);
    }

    #[test]
    fn kron_puts_left_factor_outside() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)]);
        let b = identity(2);
        let k = kron(&a, &b);
        assert_eq!(k[(0, 2)], c(2.0, 0.0));
        assert_eq!(k[(1, 3)], c(2.0, 0.0));
        assert_eq!(k[(0, 1)], ZERO);
    }

    #[test]
    fn pivoted_span_detects_rank() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(0.0, 0.0),
                c(0.0, 1.0),
                c(0.0, 2.0),
                c(0.0, 0.0),
                c(1.0, 0.0),
                c(2.0, 0.0),
                c(1e-3, 0.0),
            ],
        );
        let q = pivoted_orthonormal_span(&m, 1e-9);
        assert_eq!(q.ncols(), 2);
        assert!(max_abs_diff(&(q.adjoint() * &q), &identity(2)) < 1e-12);
    }

    #[test]
    fn polar_of_unitary_is_itself() {
        let s = 0.5f64.sqrt();
        let u = CMat::from_row_slice(2, 2, &[c(s, 0.0), c(0.0, s), c(0.0, s), c(s, 0.0)]);
        assert!(max_abs_diff(&polar_unitary(&u), &u) < 1e-12);
    }

    #[test]
    fn extend_orthonormal_keeps_order() {
        let basis = CMat::from_column_slice(3, 1, &[ONE, ZERO, ZERO]);
        let cands = CMat::from_column_slice(3, 3, &[ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ONE, ZERO]);
        let ext = extend_orthonormal(&basis, &cands, 1e-12);
        assert_eq!(ext.ncols(), 2);
        assert_eq!(ext[(2, 0)], ONE);
        assert_eq!(ext[(1, 1)], ONE);
    }
}
