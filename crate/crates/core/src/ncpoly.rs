//! Operator-valued noncommutative polynomials `p = Σ P_w w` with complex
//! `k×k` coefficients, their involution, and evaluation at operator tuples.
//!
//! Evaluation uses the coefficient as the left Kronecker factor:
//! `p(X) = Σ P_w ⊗ X^w`. Index arithmetic elsewhere in the crate (coefficient
//! extraction, GNS vectors) relies on that ordering.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::freewords::{Letter, Mode, Word, WordError};
use crate::linalg::{self, CMat, C64};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomials live in different algebras: {0}")]
    Mismatch(String),
    #[error("coefficient for {word} is {rows}x{cols}, expected {k}x{k}")]
    CoefficientShape { word: String, rows: usize, cols: usize, k: usize },
    #[error("coefficient dimension must be positive")]
    ZeroCoefficientDim,
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("operator tuple: {0}")]
    Tuple(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NcPoly {
    g: u32,
    mode: Mode,
    k: usize,
    terms: BTreeMap<Word, CMat>,
}

impl NcPoly {
    pub fn zero(g: u32, mode: Mode, k: usize) -> Self {
        assert!(g >= 1 && k >= 1, "alphabet and coefficient dimension must be positive");
        NcPoly { g, mode, k, terms: BTreeMap::new() }
    }

    /// `c · ∅` for a `k×k` matrix `c`.
    pub fn constant(g: u32, mode: Mode, c: CMat) -> Result<Self, PolyError> {
        Self::monomial(Word::empty(g, mode), c)
    }

    /// `I_k · ∅`.
    pub fn one(g: u32, mode: Mode, k: usize) -> Self {
        Self::constant(g, mode, linalg::identity(k)).expect("identity is square")
    }

    pub fn monomial(word: Word, c: CMat) -> Result<Self, PolyError> {
        if !c.is_square() || c.nrows() == 0 {
            return Err(PolyError::CoefficientShape {
                word: word.to_string(),
                rows: c.nrows(),
                cols: c.ncols(),
                k: c.nrows().max(1),
            });
        }
        let mut p = NcPoly::zero(word.alphabet(), word.mode(), c.nrows());
        p.add_term(word, c)?;
        Ok(p)
    }

    /// Builds a polynomial from `(word, coefficient)` pairs; repeated words
    /// are summed.
    pub fn from_terms(
        g: u32,
        mode: Mode,
        k: usize,
        terms: impl IntoIterator<Item = (Word, CMat)>,
    ) -> Result<Self, PolyError> {
        if k == 0 {
            return Err(PolyError::ZeroCoefficientDim);
        }
        let mut p = NcPoly::zero(g, mode, k);
        for (w, c) in terms {
            p.add_term(w, c)?;
        }
        Ok(p)
    }

    /// Adds `c · word` in place.
    pub fn add_term(&mut self, word: Word, c: CMat) -> Result<(), PolyError> {
        if word.mode() != self.mode || word.alphabet() != self.g {
            return Err(PolyError::Mismatch(format!(
                "word {word} ({}, g={}) in polynomial ({}, g={})",
                word.mode(),
                word.alphabet(),
                self.mode,
                self.g
            )));
        }
        if c.nrows() != self.k || c.ncols() != self.k {
            return Err(PolyError::CoefficientShape {
                word: word.to_string(),
                rows: c.nrows(),
                cols: c.ncols(),
                k: self.k,
            });
        }
        let entry = self.terms.entry(word).or_insert_with(|| CMat::zeros(c.nrows(), c.ncols()));
        *entry += c;
        self.canonicalize();
        Ok(())
    }

    fn canonicalize(&mut self) {
        self.terms.retain(|_, c| c.norm() > tol::EPS_DROP);
    }

    pub fn alphabet(&self) -> u32 {
        self.g
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn coeff_dim(&self) -> usize {
        self.k
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &CMat)> {
        self.terms.iter()
    }

    pub fn coeff(&self, w: &Word) -> Option<&CMat> {
        self.terms.get(w)
    }

    /// Coefficient of `w`, zero when absent.
    pub fn coeff_or_zero(&self, w: &Word) -> CMat {
        self.terms.get(w).cloned().unwrap_or_else(|| CMat::zeros(self.k, self.k))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum word length in the support; `0` for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    fn check_same_algebra(&self, other: &NcPoly) -> Result<(), PolyError> {
        if self.g != other.g || self.mode != other.mode || self.k != other.k {
            return Err(PolyError::Mismatch(format!(
                "({}, g={}, k={}) vs ({}, g={}, k={})",
                self.mode, self.g, self.k, other.mode, other.g, other.k
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &NcPoly) -> Result<NcPoly, PolyError> {
        self.check_same_algebra(other)?;
        let mut out = self.clone();
        for (w, c) in &other.terms {
            *out.terms.entry(w.clone()).or_insert_with(|| CMat::zeros(self.k, self.k)) += c;
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn try_sub(&self, other: &NcPoly) -> Result<NcPoly, PolyError> {
        self.try_add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> NcPoly {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out.canonicalize();
        out
    }

    /// Convolution product: words multiply (with reduction in group mode),
    /// coefficients multiply as matrices.
    pub fn try_mul(&self, other: &NcPoly) -> Result<NcPoly, PolyError> {
        self.check_same_algebra(other)?;
        let mut out = NcPoly::zero(self.g, self.mode, self.k);
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let w = w1.concat(w2)?;
                *out.terms.entry(w).or_insert_with(|| CMat::zeros(self.k, self.k)) += c1 * c2;
            }
        }
        out.canonicalize();
        Ok(out)
    }

    /// `p* = Σ P_w* w*`.
    pub fn adjoint(&self) -> NcPoly {
        let terms = self.terms.iter().map(|(w, c)| (w.involute(), c.adjoint())).collect();
        NcPoly { g: self.g, mode: self.mode, k: self.k, terms }
    }

    /// Largest operator norm among the coefficients.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.values().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// `max_w ‖(p − p*)_w‖ ≤ tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.try_sub(&self.adjoint()).map(|d| d.max_coeff_norm() <= tol).unwrap_or(false)
    }

    /// `Σ_w P_w ⊗ X^w`, a `(k·n)×(k·n)` matrix.
    pub fn eval(&self, x: &OperatorTuple) -> Result<CMat, PolyError> {
        if x.mode != self.mode || x.g != self.g {
            return Err(PolyError::Mismatch(format!(
                "polynomial ({}, g={}) evaluated at tuple ({}, g={})",
                self.mode, self.g, x.mode, x.g
            )));
        }
        let n = x.n;
        let mut out = CMat::zeros(self.k * n, self.k * n);
        for (w, c) in &self.terms {
            out += linalg::kron(c, &x.word_operator(w));
        }
        Ok(out)
    }
}

/// Operators substituted for the letters of a word.
///
/// Monoid tuples hold `g` matrices `X_1..X_g`. Group tuples hold one operator
/// per signed letter, `2g` in total, stored in letter-key order
/// `x1, x1^-1, x2, x2^-1, …`; building from `g` unitaries fills the inverse
/// slots with adjoints.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTuple {
    mode: Mode,
    g: u32,
    n: usize,
    self_adjoint: bool,
    letter_ops: Vec<CMat>,
}

impl OperatorTuple {
    fn check_shapes(mats: &[CMat]) -> Result<usize, PolyError> {
        let n = mats.first().map(|m| m.nrows()).ok_or_else(|| PolyError::Tuple("empty tuple".into()))?;
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(PolyError::Tuple(format!(
                    "entry {} is {}x{}, expected {n}x{n}",
                    i + 1,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(n)
    }

    /// Arbitrary (not necessarily self-adjoint) monoid tuple.
    pub fn general(mats: Vec<CMat>) -> Result<Self, PolyError> {
        let n = Self::check_shapes(&mats)?;
        Ok(OperatorTuple { mode: Mode::Monoid, g: mats.len() as u32, n, self_adjoint: false, letter_ops: mats })
    }

    /// Monoid tuple of Hermitian matrices, checked to `EPS_HERM`.
    pub fn self_adjoint(mats: Vec<CMat>) -> Result<Self, PolyError> {
        let mut t = Self::general(mats)?;
        for (i, m) in t.letter_ops.iter().enumerate() {
            if !linalg::is_hermitian(m, tol::EPS_HERM) {
                return Err(PolyError::Tuple(format!("entry {} is not Hermitian", i + 1)));
            }
        }
        t.self_adjoint = true;
        Ok(t)
    }

    /// Group tuple from `g` unitaries; inverse letters act by adjoints.
    pub fn unitary(mats: Vec<CMat>) -> Result<Self, PolyError> {
        let n = Self::check_shapes(&mats)?;
        let mut ops = Vec::with_capacity(2 * mats.len());
        for (i, m) in mats.into_iter().enumerate() {
            let defect = linalg::unitarity_defect(&m);
            if defect > tol::EPS_UNIT {
                return Err(PolyError::Tuple(format!("entry {} is not unitary (defect {defect:.3e})", i + 1)));
            }
            ops.push(m.adjoint());
            ops.insert(ops.len() - 1, m);
        }
        Ok(OperatorTuple { mode: Mode::Group, g: (ops.len() / 2) as u32, n, self_adjoint: false, letter_ops: ops })
    }

    /// Group tuple with an explicit unitary for every signed letter, listed in
    /// letter-key order `x1, x1^-1, x2, x2^-1, …`.
    pub fn from_letter_operators(ops: Vec<CMat>) -> Result<Self, PolyError> {
        if !ops.len().is_multiple_of(2) {
            return Err(PolyError::Tuple("group tuple needs an operator per signed letter".into()));
        }
        let n = Self::check_shapes(&ops)?;
        for (i, m) in ops.iter().enumerate() {
            let defect = linalg::unitarity_defect(m);
            if defect > tol::EPS_UNIT {
                return Err(PolyError::Tuple(format!(
                    "operator for {} is not unitary (defect {defect:.3e})",
                    Letter::from_key(i as u32)
                )));
            }
        }
        Ok(OperatorTuple { mode: Mode::Group, g: (ops.len() / 2) as u32, n, self_adjoint: false, letter_ops: ops })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn alphabet(&self) -> u32 {
        self.g
    }

    /// Side length of each operator.
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    /// Operator substituted for `letter`.
    pub fn letter(&self, letter: Letter) -> &CMat {
        match self.mode {
            Mode::Monoid => &self.letter_ops[(letter.index - 1) as usize],
            Mode::Group => &self.letter_ops[letter.key() as usize],
        }
    }

    /// The generators `X_1..X_g` (positive letters only).
    pub fn generators(&self) -> Vec<&CMat> {
        (1..=self.g).map(|i| self.letter(Letter::new(i))).collect()
    }

    /// All stored letter operators in storage order.
    pub fn letter_operators(&self) -> &[CMat] {
        &self.letter_ops
    }

    /// `X^w = X_{i_1} ⋯ X_{i_n}`; the empty word gives `I_n`.
    pub fn word_operator(&self, w: &Word) -> CMat {
        let mut acc = linalg::identity(self.n);
        for &l in w.letters().iter().rev() {
            acc = self.letter(l) * acc;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freewords::enumerate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn w(s: &str, g: u32, mode: Mode) -> Word {
        Word::parse(s, g, mode).unwrap()
    }

    fn scalar(x: C64) -> CMat {
        CMat::from_element(1, 1, x)
    }

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, cc: usize) -> CMat {
        CMat::from_fn(r, cc, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn rand_herm(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        linalg::hermitian_part(&rand_mat(rng, n, n))
    }

    fn rand_poly(rng: &mut ChaCha8Rng, g: u32, mode: Mode, k: usize, deg: usize) -> NcPoly {
        let terms = enumerate(g, deg, mode).into_iter().map(|word| (word, rand_mat(rng, k, k)));
        NcPoly::from_terms(g, mode, k, terms).unwrap()
    }

    fn rand_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        linalg::polar_unitary(&rand_mat(rng, n, n))
    }

    #[test]
    fn product_examples() {
        let m = Mode::Monoid;
        let x1 = NcPoly::monomial(w("x1", 2, m), linalg::identity(1)).unwrap();
        let x2 = NcPoly::monomial(w("x2", 2, m), linalg::identity(1)).unwrap();
        let p = x1.try_mul(&x2).unwrap();
        assert_eq!(p.terms().count(), 1);
        assert_eq!(p.coeff(&w("x1 x2", 2, m)), Some(&linalg::identity(1)));

        let u = NcPoly::monomial(w("x1", 1, Mode::Group), linalg::identity(1)).unwrap();
        let uinv = NcPoly::monomial(w("x1^-1", 1, Mode::Group), linalg::identity(1)).unwrap();
        assert_eq!(u.try_mul(&uinv).unwrap(), NcPoly::one(1, Mode::Group, 1));
    }

    #[test]
    fn product_with_matrix_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, b, cm) = (rand_mat(&mut rng, 2, 2), rand_mat(&mut rng, 2, 2), rand_mat(&mut rng, 2, 2));
        let m = Mode::Monoid;
        let left = NcPoly::from_terms(2, m, 2, [(w("x1", 2, m), a.clone()), (w("x2", 2, m), b.clone())]).unwrap();
        let right = NcPoly::monomial(w("x1", 2, m), cm.clone()).unwrap();
        let prod = left.try_mul(&right).unwrap();
        assert_eq!(prod.terms().count(), 2);
        assert!(linalg::max_abs_diff(prod.coeff(&w("x1 x1", 2, m)).unwrap(), &(&a * &cm)) < 1e-15);
        assert!(linalg::max_abs_diff(prod.coeff(&w("x2 x1", 2, m)).unwrap(), &(&b * &cm)) < 1e-15);
    }

    #[test]
    fn mismatch_is_an_error() {
        let p = NcPoly::one(2, Mode::Monoid, 1);
        assert!(p.try_add(&NcPoly::one(2, Mode::Monoid, 2)).is_err());
        assert!(p.try_mul(&NcPoly::one(2, Mode::Group, 1)).is_err());
        assert!(p.try_add(&NcPoly::one(3, Mode::Monoid, 1)).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let m = Mode::Monoid;
        let p = NcPoly::monomial(w("x1 x2", 2, m), scalar(c(0.0, 1.0))).unwrap();
        let q = NcPoly::monomial(w("x2 x1", 2, m), scalar(c(0.0, -1.0))).unwrap();
        assert_eq!(p.adjoint(), q);

        let herm = NcPoly::from_terms(
            2,
            m,
            1,
            [(w("x1 x2", 2, m), scalar(c(1.0, 0.0))), (w("x2 x1", 2, m), scalar(c(1.0, 0.0)))],
        )
        .unwrap();
        assert_eq!(herm.adjoint(), herm);

        let pm = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 1.0), c(0.0, 3.0)]);
        let g = Mode::Group;
        let p = NcPoly::monomial(w("x1", 2, g), pm.clone()).unwrap();
        assert_eq!(p.adjoint(), NcPoly::monomial(w("x1^-1", 2, g), pm.adjoint()).unwrap());
    }

    #[test]
    fn eval_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = OperatorTuple::general(vec![rand_mat(&mut rng, 3, 3), rand_mat(&mut rng, 3, 3)]).unwrap();
        let one = NcPoly::one(2, Mode::Monoid, 2);
        assert!(linalg::max_abs_diff(&one.eval(&x).unwrap(), &linalg::identity(6)) < 1e-15);

        let m = Mode::Monoid;
        let f = NcPoly::from_terms(
            2,
            m,
            1,
            [(w("x1 x2", 2, m), scalar(c(1.0, 0.0))), (w("x2 x1", 2, m), scalar(c(1.0, 0.0)))],
        )
        .unwrap();
        let y = OperatorTuple::self_adjoint(vec![scalar(c(1.0, 0.0)), scalar(c(-1.0, 0.0))]).unwrap();
        assert_eq!(f.eval(&y).unwrap()[(0, 0)], c(-2.0, 0.0));
    }

    #[test]
    fn adjoint_commutes_with_eval_at_self_adjoint_tuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = rand_poly(&mut rng, 2, Mode::Monoid, 2, 3);
            let x = OperatorTuple::self_adjoint(vec![rand_herm(&mut rng, 3), rand_herm(&mut rng, 3)]).unwrap();
            let lhs = p.adjoint().eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap().adjoint();
            assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn eval_is_a_star_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for mode in [Mode::Monoid, Mode::Group] {
            for _ in 0..10 {
                let n = rng.random_range(1..=4);
                let k = rng.random_range(1..=2);
                let p = rand_poly(&mut rng, 2, mode, k, 2);
                let q = rand_poly(&mut rng, 2, mode, k, 2);
                let x = match mode {
                    Mode::Monoid => {
                        OperatorTuple::general(vec![rand_mat(&mut rng, n, n), rand_mat(&mut rng, n, n)]).unwrap()
                    }
                    Mode::Group => {
                        OperatorTuple::unitary(vec![rand_unitary(&mut rng, n), rand_unitary(&mut rng, n)]).unwrap()
                    }
                };
                let lhs = p.try_mul(&q).unwrap().eval(&x).unwrap();
                let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
                assert!(linalg::max_abs_diff(&lhs, &rhs) < 1e-10);
                if mode == Mode::Group {
                    let a = p.adjoint().eval(&x).unwrap();
                    assert!(linalg::max_abs_diff(&a, &p.eval(&x).unwrap().adjoint()) < 1e-10);
                }
                // (pq)* = q* p*
                assert!(
                    p.try_mul(&q)
                        .unwrap()
                        .adjoint()
                        .try_sub(&q.adjoint().try_mul(&p.adjoint()).unwrap())
                        .unwrap()
                        .max_coeff_norm()
                        < 1e-12
                );
                assert_eq!(p.adjoint().adjoint(), p);
            }
        }
    }

    #[test]
    fn hermitian_and_degree() {
        let m = Mode::Monoid;
        let sq = NcPoly::from_terms(
            2,
            m,
            1,
            [(w("x1 x1", 2, m), scalar(c(1.0, 0.0))), (w("x2 x2", 2, m), scalar(c(1.0, 0.0)))],
        )
        .unwrap();
        assert!(sq.is_hermitian(1e-12));
        let anti = NcPoly::monomial(w("x1", 2, m), scalar(c(0.0, 1.0))).unwrap();
        assert!(!anti.is_hermitian(1e-12));
        let cubic = NcPoly::monomial(w("x1 x2 x1", 2, m), scalar(c(1.0, 0.0))).unwrap();
        assert_eq!(cubic.degree(), 3);
        assert_eq!(NcPoly::zero(2, m, 1).degree(), 0);
    }

    #[test]
    fn canonical_form_drops_cancelled_terms() {
        let m = Mode::Monoid;
        let p = NcPoly::monomial(w("x1", 1, m), scalar(c(1.0, 0.0))).unwrap();
        assert!(p.try_sub(&p).unwrap().is_zero());
    }

    #[test]
    fn tuple_validation() {
        let not_unitary = CMat::from_element(1, 1, c(2.0, 0.0));
        assert!(OperatorTuple::unitary(vec![not_unitary]).is_err());
        let not_herm = CMat::from_element(1, 1, c(0.0, 1.0));
        assert!(OperatorTuple::self_adjoint(vec![not_herm]).is_err());
        let u = CMat::from_element(1, 1, c(0.0, 1.0));
        let t = OperatorTuple::unitary(vec![u.clone()]).unwrap();
        assert_eq!(t.letter(Letter::inv(1)), &u.adjoint());
    }
}
