//! Truncated full Fock space over `C^g`.
//!
//! The basis vectors `e_w` are indexed by words of length at most the
//! truncation level `ℓ`, in graded-lex order, so position 0 is the vacuum
//! `Ω = e_∅`. On this space we build
//!
//! * the compressed left creation operators `L_i : e_w ↦ e_{x_i w}` (zero on
//!   the top layer),
//! * the self-adjoint tuple `A_j = L_j + L_j*`,
//! * the extraction matrix `M[v,w] = ⟨A^w Ω, e_v⟩`, which recovers the
//!   coefficients of `q` from the single matrix `q(A)`,
//! * for the free group, unitaries `U_y` extending `e_w ↦ e_{yw}`.

use std::collections::HashMap;

use thiserror::Error;

use crate::freewords::{self, alphabet_letters, Letter, Mode, Word};
use crate::linalg::{self, CMat, C64, ONE};
use crate::ncpoly::{NcPoly, OperatorTuple};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("operation requires {expected} mode, basis is {found}")]
    WrongMode { expected: Mode, found: Mode },
    #[error("truncation level must be at least 1")]
    LevelTooSmall,
    #[error("extraction matrix is not unit upper triangular (defect {defect:.3e} at ({row}, {col}))")]
    NotTriangular { row: usize, col: usize, defect: f64 },
    #[error("matrix is {rows}x{cols}, expected {expected}x{expected}")]
    Dimension { rows: usize, cols: usize, expected: usize },
    #[error("word {0} is not in the truncated basis")]
    WordNotInBasis(String),
}

#[derive(Clone, Debug)]
pub struct FockBasis {
    g: u32,
    level: usize,
    mode: Mode,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
}

impl FockBasis {
    pub fn new(g: u32, level: usize, mode: Mode) -> Self {
        let words = freewords::enumerate(g, level, mode);
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        FockBasis { g, level, mode, words, index }
    }

    pub fn alphabet(&self) -> u32 {
        self.g
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn position(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    fn require(&self, mode: Mode) -> Result<(), FockError> {
        if self.mode != mode {
            return Err(FockError::WrongMode { expected: mode, found: self.mode });
        }
        Ok(())
    }
}

/// Compressed creation operators `ι* L_i ι`, `i = 1..g`.
pub fn build_creation(basis: &FockBasis) -> Result<Vec<CMat>, FockError> {
    basis.require(Mode::Monoid)?;
    let n = basis.dim();
    let ops = (1..=basis.g)
        .map(|i| {
            let mut l = CMat::zeros(n, n);
            for (col, w) in basis.words.iter().enumerate() {
                if w.len() < basis.level {
                    let target = w.left_mul(Letter::new(i)).expect("letter in alphabet");
                    l[(basis.index[&target], col)] = ONE;
                }
            }
            l
        })
        .collect();
    Ok(ops)
}

/// The self-adjoint tuple `A_j = ι*(L_j + L_j*)ι`.
pub fn build_symmetrized(basis: &FockBasis) -> Result<OperatorTuple, FockError> {
    let ops = build_creation(basis)?.into_iter().map(|l| &l + l.adjoint()).collect();
    Ok(OperatorTuple::self_adjoint(ops).expect("L + L* is exactly Hermitian"))
}

/// `M_ℓ` together with its inverse and the coefficient bound `λ_ℓ`.
#[derive(Clone, Debug)]
pub struct ExtractionMatrix {
    basis: FockBasis,
    tuple: OperatorTuple,
    matrix: CMat,
    inverse: CMat,
    lambda: f64,
}

pub fn build_extraction(basis: &FockBasis) -> Result<ExtractionMatrix, FockError> {
    basis.require(Mode::Monoid)?;
    if basis.level == 0 {
        return Err(FockError::LevelTooSmall);
    }
    let tuple = build_symmetrized(basis)?;
    let n = basis.dim();
    let mut m = CMat::zeros(n, n);
    m[(0, 0)] = ONE;
    // column w = A_{i_1} · (column of the suffix of w); suffixes come earlier
    // in graded-lex order.
    for (col, w) in basis.words.iter().enumerate().skip(1) {
        let first = w.letters()[0];
        let suffix = Word::from_letters(basis.g, Mode::Monoid, w.letters()[1..].iter().copied())
            .expect("suffix of a valid word");
        let prev = m.column(basis.index[&suffix]).into_owned();
        let next = tuple.letter(first) * prev;
        m.set_column(col, &next);
    }
    for col in 0..n {
        for row in col..n {
            let expected = if row == col { ONE } else { C64::new(0.0, 0.0) };
            let defect = (m[(row, col)] - expected).norm();
            if defect > 1e-12 {
                return Err(FockError::NotTriangular { row, col, defect });
            }
        }
    }
    let inverse =
        m.solve_upper_triangular(&linalg::identity(n)).expect("unit upper triangular matrices are invertible");
    let lambda = inverse.row_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    Ok(ExtractionMatrix { basis: basis.clone(), tuple, matrix: m, inverse, lambda })
}

impl ExtractionMatrix {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn inverse(&self) -> &CMat {
        &self.inverse
    }

    /// Max absolute row sum of `M⁻¹`; bounds `‖Q_w‖ ≤ λ ‖q(A)‖`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    /// The tuple `A` the matrix was computed from.
    pub fn tuple(&self) -> &OperatorTuple {
        &self.tuple
    }

    /// Recovers `q` from `E = q(A)`: `Q = M⁻¹ Z` with `Z_v` the `k×k` block of
    /// `E` at Fock row `v`, Fock column `∅`.
    pub fn extract(&self, e: &CMat, k: usize) -> Result<NcPoly, FockError> {
        let n = self.basis.dim();
        let expected = k * n;
        if e.nrows() != expected || e.ncols() != expected || k == 0 {
            return Err(FockError::Dimension { rows: e.nrows(), cols: e.ncols(), expected });
        }
        let z: Vec<CMat> = (0..n).map(|v| vacuum_block(e, n, k, v)).collect();
        let mut q = NcPoly::zero(self.basis.g, Mode::Monoid, k);
        for (wi, w) in self.basis.words.iter().enumerate() {
            let mut coeff = CMat::zeros(k, k);
            for (v, zv) in z.iter().enumerate().skip(wi) {
                let s = self.inverse[(wi, v)];
                if s.norm() != 0.0 {
                    coeff += zv * s;
                }
            }
            q.add_term(w.clone(), coeff).expect("shapes agree");
        }
        Ok(q)
    }
}

/// Block `E[(a, v), (b, ∅)]` under the coefficient-left index `(a, v) ↦ a·n + v`.
fn vacuum_block(e: &CMat, n: usize, k: usize, v: usize) -> CMat {
    CMat::from_fn(k, k, |a, b| e[(a * n + v, b * n)])
}

/// One-shot form of [`ExtractionMatrix::extract`].
pub fn extract_coeffs(e: &CMat, basis: &FockBasis, k: usize) -> Result<NcPoly, FockError> {
    build_extraction(basis)?.extract(e, k)
}

/// Unitaries `U_y` on the group Fock space `F_d`, one per signed letter, in
/// letter-key order.
///
/// `U_y` sends `e_w ↦ e_{yw}` for `w` in `(F_g)_{d-1} ∪ y⁻¹(F_g)_{d-1}`. The
/// leftover basis vectors of the domain and of the range are matched in
/// graded-lex order, which makes every `U_y` a permutation matrix and gives
/// `U_{y⁻¹} = U_y⁻¹`.
pub fn build_unitaries(g: u32, d: usize) -> Result<OperatorTuple, FockError> {
    if d == 0 {
        return Err(FockError::LevelTooSmall);
    }
    let basis = FockBasis::new(g, d, Mode::Group);
    let n = basis.dim();
    let shorter: Vec<&Word> = basis.words.iter().filter(|w| w.len() < d).collect();
    let ops = alphabet_letters(g, Mode::Group)
        .into_iter()
        .map(|y| {
            let y_word = Word::from_letters(g, Mode::Group, [y]).expect("valid letter");
            let y_inv = y_word.involute();
            let mut in_domain = vec![false; n];
            let mut in_range = vec![false; n];
            let mut u = CMat::zeros(n, n);
            for &w in &shorter {
                for src in [w.clone(), y_inv.concat(w).expect("same alphabet")] {
                    let dst = y_word.concat(&src).expect("same alphabet");
                    let (si, di) = (basis.index[&src], basis.index[&dst]);
                    in_domain[si] = true;
                    in_range[di] = true;
                    u[(di, si)] = ONE;
                }
            }
            let free_src = (0..n).filter(|&i| !in_domain[i]);
            let free_dst: Vec<usize> = (0..n).filter(|&i| !in_range[i]).collect();
            for (si, &di) in free_src.zip(&free_dst) {
                u[(di, si)] = ONE;
            }
            u
        })
        .collect();
    Ok(OperatorTuple::from_letter_operators(ops).expect("permutation matrices are unitary"))
}

/// `P_w` read off `E = p(U)`: the block at Fock row `w`, Fock column `∅`.
pub fn coefficient_peek(e: &CMat, basis: &FockBasis, k: usize, w: &Word) -> Result<CMat, FockError> {
    basis.require(Mode::Group)?;
    let n = basis.dim();
    if e.nrows() != k * n || e.ncols() != k * n || k == 0 {
        return Err(FockError::Dimension { rows: e.nrows(), cols: e.ncols(), expected: k * n });
    }
    let v = basis.position(w).ok_or_else(|| FockError::WordNotInBasis(w.to_string()))?;
    Ok(vacuum_block(e, n, k, v))
}

/// `μ_d = N(d)³ λ_{2d}²`: bounds `‖G‖ ≤ μ_d ‖p(A)‖` for every psd Gram matrix
/// of `p`, with `A` truncated at level `2d`.
pub fn gram_bound_monoid(g: u32, d: usize) -> Result<f64, FockError> {
    let ext = build_extraction(&FockBasis::new(g, (2 * d).max(1), Mode::Monoid))?;
    let n = freewords::count(g, d, Mode::Monoid) as f64;
    Ok(n.powi(3) * ext.lambda().powi(2))
}

/// `τ_d = N_red(d)³`: the group analogue, where coefficients are read off
/// `p(U)` without amplification (`‖P_w‖ ≤ ‖p(U)‖`).
pub fn gram_bound_group(g: u32, d: usize) -> f64 {
    (freewords::count(g, d, Mode::Group) as f64).powi(3)
}
