//! Gram representations `p = V_d* G V_d` over the degree-`d` word basis.
//!
//! `G` is an `(N·k)×(N·k)` block matrix, word-major: row `v·k + a` belongs to
//! basis word `v` and coefficient index `a`. Block `(v, w)` contributes to
//! the coefficient of `v*·w`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::freewords::{self, Mode, Word};
use crate::linalg::{self, CMat, C64};
use crate::ncpoly::{NcPoly, PolyError};
use crate::sdp::{AffineSystem, SdpError};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GramError {
    #[error("Gram matrix is {rows}x{cols}, basis needs {expected}x{expected}")]
    Dimension { rows: usize, cols: usize, expected: usize },
    #[error("Gram matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("Gram matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("factorization residual {0:.3e} exceeds tolerance")]
    Residual(f64),
    #[error("polynomial of degree {degree} needs more than half-degree {d}")]
    DegreeTooHigh { degree: usize, d: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// For each product word `u`, the basis pairs `(v, w)` with `v*·w = u`.
#[derive(Clone, Debug)]
pub struct ConstraintIndex {
    basis: Vec<Word>,
    pairs: BTreeMap<Word, Vec<(usize, usize)>>,
}

impl ConstraintIndex {
    pub fn basis(&self) -> &[Word] {
        &self.basis
    }

    /// Basis positions `(i, j)` with `basis[i]*·basis[j] = u`.
    pub fn positions(&self, u: &Word) -> &[(usize, usize)] {
        self.pairs.get(u).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn pairs(&self, u: &Word) -> Vec<(Word, Word)> {
        self.positions(u).iter().map(|&(i, j)| (self.basis[i].clone(), self.basis[j].clone())).collect()
    }

    /// Product words in order, each with its pair list.
    pub fn iter(&self) -> impl Iterator<Item = (&Word, &[(usize, usize)])> {
        self.pairs.iter().map(|(u, p)| (u, p.as_slice()))
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.pairs.keys()
    }
}

pub fn constraint_index(g: u32, d: usize, mode: Mode) -> ConstraintIndex {
    let basis = freewords::enumerate(g, d, mode);
    let mut pairs: BTreeMap<Word, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, v) in basis.iter().enumerate() {
        let vs = v.involute();
        for (j, w) in basis.iter().enumerate() {
            let u = vs.concat(w).expect("basis words share one alphabet");
            pairs.entry(u).or_default().push((i, j));
        }
    }
    ConstraintIndex { basis, pairs }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    g: u32,
    mode: Mode,
    d: usize,
    k: usize,
    matrix: CMat,
}

impl GramMatrix {
    /// Wraps `matrix` after checking its size and Hermiticity (to 1e-10,
    /// relative to its largest entry); the stored matrix is the Hermitian part.
    pub fn new(g: u32, mode: Mode, d: usize, k: usize, matrix: CMat) -> Result<Self, GramError> {
        let expected = freewords::count(g, d, mode) * k;
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(GramError::Dimension { rows: matrix.nrows(), cols: matrix.ncols(), expected });
        }
        let defect = linalg::max_abs_diff(&matrix, &matrix.adjoint());
        if defect > 1e-10 * linalg::max_abs(&matrix).max(1.0) {
            return Err(GramError::NotHermitian(defect));
        }
        Ok(GramMatrix { g, mode, d, k, matrix: linalg::hermitian_part(&matrix) })
    }

    pub fn alphabet(&self) -> u32 {
        self.g
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn half_degree(&self) -> usize {
        self.d
    }

    pub fn coeff_dim(&self) -> usize {
        self.k
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn block(&self, i: usize, j: usize) -> CMat {
        self.matrix.view((i * self.k, j * self.k), (self.k, self.k)).into_owned()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eig(&self.matrix)
    }
}

/// `P_u = Σ_{v*w = u} G_{v,w}`.
pub fn gram_to_poly(gram: &GramMatrix) -> NcPoly {
    let idx = constraint_index(gram.g, gram.d, gram.mode);
    let mut p = NcPoly::zero(gram.g, gram.mode, gram.k);
    for (u, pos) in idx.iter() {
        let mut c = CMat::zeros(gram.k, gram.k);
        for &(i, j) in pos {
            c += gram.block(i, j);
        }
        p.add_term(u.clone(), c).expect("blocks have coefficient shape");
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosCertificate {
    pub gram: GramMatrix,
    /// Polynomials `r_j` of degree at most `d` with `p ≈ Σ r_j* r_j`.
    pub factors: Vec<NcPoly>,
    /// Largest coefficient operator norm of `p − Σ r_j* r_j`.
    pub residual: f64,
}

impl SosCertificate {
    pub fn sum_of_squares(&self) -> NcPoly {
        let mut acc = NcPoly::zero(self.gram.g, self.gram.mode, self.gram.k);
        for r in &self.factors {
            let sq = r.adjoint().try_mul(r).expect("factors share one algebra");
            acc = acc.try_add(&sq).expect("factors share one algebra");
        }
        acc
    }

    /// Residual of the factor sum against `p`.
    pub fn residual_against(&self, p: &NcPoly) -> Result<f64, GramError> {
        Ok(p.try_sub(&self.sum_of_squares())?.max_coeff_norm())
    }
}

impl std::fmt::Display for SosCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} square(s), residual {:.3e}", self.factors.len(), self.residual)
    }
}

/// Factors a psd Gram matrix as `G = Σ_j R_j R_j*` with `R_j` the `j`-th
/// group of `k` columns of `Q Λ^{1/2}`, and reads off `r_j = R_j* V_d`.
/// Eigenvalues below `eps_rank` are clipped; all-zero groups are dropped.
pub fn factor_gram(gram: &GramMatrix, eps_rank: f64) -> Result<SosCertificate, GramError> {
    let (vals, vecs) = linalg::eigh(&gram.matrix);
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -tol::EPS_PSD {
        return Err(GramError::NotPsd(min));
    }
    let n = vals.len();
    let k = gram.k;
    // descending order so nonzero columns fill the leading groups
    let mut r = CMat::zeros(n, n);
    for (col, src) in (0..n).rev().enumerate() {
        let lam = vals[src];
        let s = if lam > eps_rank { lam.sqrt() } else { 0.0 };
        r.set_column(col, &(vecs.column(src) * C64::new(s, 0.0)));
    }
    let basis = freewords::enumerate(gram.g, gram.d, gram.mode);
    let mut factors = Vec::new();
    for group in 0..basis.len() {
        let cols = r.columns(group * k, k);
        if cols.iter().all(|z| *z == C64::new(0.0, 0.0)) {
            continue;
        }
        let mut f = NcPoly::zero(gram.g, gram.mode, k);
        for (wi, w) in basis.iter().enumerate() {
            let block = cols.rows(wi * k, k).adjoint();
            f.add_term(w.clone(), block)?;
        }
        factors.push(f);
    }
    let mut cert = SosCertificate { gram: gram.clone(), factors, residual: 0.0 };
    cert.residual = cert.residual_against(&gram_to_poly(gram))?;
    if cert.residual > tol::EPS_CERT {
        return Err(GramError::Residual(cert.residual));
    }
    Ok(cert)
}

/// Affine constraints `Σ_{v*w=u} G_{v,w} = F_u` on Gram matrices of
/// half-degree `d`, one complex equation per product word and entry.
pub fn primal_system(f: &NcPoly, d: usize) -> Result<AffineSystem, GramError> {
    let (g, mode, k) = (f.alphabet(), f.mode(), f.coeff_dim());
    if f.degree() > 2 * d {
        return Err(GramError::DegreeTooHigh { degree: f.degree(), d });
    }
    let idx = constraint_index(g, d, mode);
    let mut sys = AffineSystem::new(idx.basis().len() * k);
    for (u, pos) in idx.iter() {
        let target = f.coeff_or_zero(u);
        for a in 0..k {
            for b in 0..k {
                let entries: Vec<_> = pos.iter().map(|&(i, j)| (i * k + a, j * k + b, C64::new(1.0, 0.0))).collect();
                sys.add_complex_equation(&entries, target[(a, b)])?;
            }
        }
    }
    Ok(sys)
}
