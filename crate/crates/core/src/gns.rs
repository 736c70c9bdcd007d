//! GNS construction: from a positive block-Hankel functional to a finite
//! tuple of operators and a vector reproducing it.
//!
//! A functional on polynomials of degree `≤ 2D` is given by `k×k` blocks
//! `S_u` and acts on `F·u` by the entrywise pairing `Σ_ab S_u[a,b] F[a,b]`.
//! Positivity on squares `r*r` (degree `r ≤ D`) is psd-ness of the
//! assembled block matrix `[S_{v*w}]_{|v|,|w| ≤ D}`. The model reproduces
//! `φ(q* p) = ⟨p(Y)γ, q(Y)γ⟩`.
//!
//! The quotient space `M` is never formed explicitly: the frames `Φ(w)`
//! only enter through their Gram blocks `Φ(v)*Φ(w) = S_{v*w}`, so an
//! orthonormal basis of `E` comes from an eigendecomposition of the leading
//! principal block and all operators are written in that basis.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::freewords::{self, alphabet_letters, Letter, Mode, Word};
use crate::gram::constraint_index;
use crate::linalg::{self, CMat, CVec, C64};
use crate::ncpoly::{NcPoly, OperatorTuple, PolyError};
use crate::tol;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GnsError {
    #[error("construction requires {expected} mode, functional is {found}")]
    WrongMode { expected: Mode, found: Mode },
    #[error("block for {word} is not {k}x{k}")]
    BlockShape { word: String, k: usize },
    #[error("word {word} exceeds the functional's support (length ≤ {max})")]
    WordTooLong { word: String, max: usize },
    #[error("blocks of {word} and its involution are not adjoint (defect {defect:.3e})")]
    Structure { word: String, defect: f64 },
    #[error("assembled functional is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("functional vanishes on squares; the GNS space is zero")]
    ZeroFunctional,
    #[error("requested degree {requested} exceeds the functional's degree {available}")]
    Degree { requested: usize, available: usize },
    #[error("shift operator fit residual {0:.3e} exceeds tolerance")]
    ShiftFit(f64),
    #[error("orthocomplement matching failed for {0}")]
    Extension(String),
    #[error("matrix is {rows}x{cols}, expected {expected}")]
    Dimension { rows: usize, cols: usize, expected: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// `vec(T) = Σ_δ e_δ ⊗ T e_δ` for `T : C^k → C^m` (an `m×k` matrix); the
/// component at `(δ, j)` is `T[j, δ]`, stored at `δ·m + j`.
pub fn vec(t: &CMat) -> CVec {
    let (m, k) = t.shape();
    CVec::from_fn(k * m, |i, _| t[(i % m, i / m)])
}

/// Inverse of [`vec`] for a vector in `C^k ⊗ C^m`.
pub fn unvec(v: &CVec, k: usize) -> CMat {
    let m = v.len().checked_div(k).unwrap_or(0);
    CMat::from_fn(m, k, |j, d| v[d * m + j])
}

#[derive(Clone, Debug, PartialEq)]
pub struct HankelFunctional {
    g: u32,
    mode: Mode,
    k: usize,
    degree: usize,
    blocks: BTreeMap<Word, CMat>,
}

impl HankelFunctional {
    /// Validates shapes, support (`|u| ≤ 2D`) and `S_{u*} = S_u*` to 1e-10
    /// relative. Missing blocks are zero.
    pub fn new(g: u32, mode: Mode, k: usize, degree: usize, blocks: BTreeMap<Word, CMat>) -> Result<Self, GnsError> {
        let scale = blocks.values().map(linalg::max_abs).fold(1.0, f64::max);
        for (u, s) in &blocks {
            if u.mode() != mode || u.alphabet() != g {
                return Err(
                    PolyError::Mismatch(format!("block word {u} is not in the {mode} algebra on {g} letters")).into()
                );
            }
            if s.shape() != (k, k) {
                return Err(GnsError::BlockShape { word: u.to_string(), k });
            }
            if u.len() > 2 * degree {
                return Err(GnsError::WordTooLong { word: u.to_string(), max: 2 * degree });
            }
            let mirror = blocks.get(&u.involute()).cloned().unwrap_or_else(|| CMat::zeros(k, k));
            let defect = linalg::max_abs_diff(&mirror, &s.adjoint());
            if defect > 1e-10 * scale {
                return Err(GnsError::Structure { word: u.to_string(), defect });
            }
        }
        let blocks = blocks.into_iter().filter(|(_, s)| s.norm() > 0.0).collect();
        Ok(HankelFunctional { g, mode, k, degree, blocks })
    }

    /// `S_u = T* X^u T` for a tuple `X` on `C^n` and `T : C^k → C^n`.
    pub fn from_model(x: &OperatorTuple, t: &CMat, degree: usize) -> Result<Self, GnsError> {
        if t.nrows() != x.dim() {
            return Err(GnsError::Dimension {
                rows: t.nrows(),
                cols: t.ncols(),
                expected: format!("{} rows", x.dim()),
            });
        }
        let idx = constraint_index(x.alphabet(), degree, x.mode());
        let blocks = idx.words().map(|u| (u.clone(), t.adjoint() * x.word_operator(u) * t)).collect();
        let mut s = HankelFunctional::new(x.alphabet(), x.mode(), t.ncols(), degree, blocks)?;
        s.symmetrize();
        Ok(s)
    }

    /// `S_∅ = I_k`, every other block zero.
    pub fn delta(g: u32, mode: Mode, k: usize, degree: usize) -> Self {
        let mut blocks = BTreeMap::new();
        blocks.insert(Word::empty(g, mode), linalg::identity(k));
        HankelFunctional { g, mode, k, degree, blocks }
    }

    /// Reads `S_u` off an assembled matrix by averaging every block that
    /// should equal it, then enforces `S_{u*} = S_u*` exactly. For a matrix
    /// that is Hankel up to `ε`, the result is within `ε` of it.
    pub fn from_assembled(g: u32, mode: Mode, k: usize, degree: usize, x: &CMat) -> Result<Self, GnsError> {
        let idx = constraint_index(g, degree, mode);
        let n = idx.basis().len() * k;
        if x.shape() != (n, n) {
            return Err(GnsError::Dimension { rows: x.nrows(), cols: x.ncols(), expected: format!("{n}x{n}") });
        }
        let mut blocks = BTreeMap::new();
        for (u, pos) in idx.iter() {
            let mut acc = CMat::zeros(k, k);
            for &(i, j) in pos {
                acc += x.view((i * k, j * k), (k, k));
            }
            blocks.insert(u.clone(), acc / C64::new(pos.len() as f64, 0.0));
        }
        let mut s = HankelFunctional { g, mode, k, degree, blocks };
        s.symmetrize();
        Ok(s)
    }

    fn symmetrize(&mut self) {
        let keys: Vec<Word> = self.blocks.keys().cloned().collect();
        let mut out = BTreeMap::new();
        for u in keys {
            let s = &self.blocks[&u];
            let m = self.blocks.get(&u.involute()).map(|t| t.adjoint()).unwrap_or_else(|| CMat::zeros(self.k, self.k));
            out.insert(u, (s + m) * C64::new(0.5, 0.0));
        }
        self.blocks = out;
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

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn blocks(&self) -> &BTreeMap<Word, CMat> {
        &self.blocks
    }

    pub fn block(&self, u: &Word) -> CMat {
        self.blocks.get(u).cloned().unwrap_or_else(|| CMat::zeros(self.k, self.k))
    }

    /// `φ(f) = Σ_u Σ_ab S_u[a,b] F_u[a,b]`.
    pub fn evaluate(&self, f: &NcPoly) -> Result<C64, GnsError> {
        if f.mode() != self.mode || f.alphabet() != self.g || f.coeff_dim() != self.k {
            return Err(PolyError::Mismatch("functional and polynomial differ in alphabet, mode or k".into()).into());
        }
        let mut acc = C64::new(0.0, 0.0);
        for (u, c) in f.terms() {
            if u.len() > 2 * self.degree {
                return Err(GnsError::WordTooLong { word: u.to_string(), max: 2 * self.degree });
            }
            if let Some(s) = self.blocks.get(u) {
                acc += linalg::entry_pairing(s, c);
            }
        }
        Ok(acc)
    }
}

/// Block matrix `[S_{v*w}]` over words of length `≤ degree`, word-major.
pub fn assemble(s: &HankelFunctional, degree: usize) -> Result<CMat, GnsError> {
    if degree > s.degree {
        return Err(GnsError::Degree { requested: degree, available: s.degree });
    }
    let basis = freewords::enumerate(s.g, degree, s.mode);
    Ok(block_matrix(s, &basis, &basis, |v, w| v.involute().concat(w).expect("same alphabet")))
}

fn block_matrix(s: &HankelFunctional, rows: &[Word], cols: &[Word], product: impl Fn(&Word, &Word) -> Word) -> CMat {
    let k = s.k;
    let mut m = CMat::zeros(rows.len() * k, cols.len() * k);
    for (i, v) in rows.iter().enumerate() {
        for (j, w) in cols.iter().enumerate() {
            if let Some(b) = s.blocks.get(&product(v, w)) {
                m.view_mut((i * k, j * k), (k, k)).copy_from(b);
            }
        }
    }
    m
}

/// A finite model `(Y, γ)` with `φ(q*p) = ⟨p(Y)γ, q(Y)γ⟩`.
#[derive(Clone, Debug)]
pub struct WitnessModel {
    pub tuple: OperatorTuple,
    pub gamma: CVec,
    /// Coordinates of `P_E Φ(w)` in the orthonormal basis of `E`, one
    /// `dim×k` block per word of length `≤ D`.
    pub frames: BTreeMap<Word, CMat>,
    pub functional: HankelFunctional,
}

impl WitnessModel {
    pub fn dim(&self) -> usize {
        self.tuple.dim()
    }

    /// `γ` as the `dim×k` matrix `T` with `γ = vec(T)`.
    pub fn gamma_matrix(&self) -> CMat {
        unvec(&self.gamma, self.functional.k)
    }
}

fn check_psd(s: &HankelFunctional) -> Result<f64, GnsError> {
    let h = assemble(s, s.degree)?;
    let (vals, _) = linalg::eigh(&h);
    let top = vals.last().copied().unwrap_or(0.0);
    let bottom = vals.first().copied().unwrap_or(0.0);
    if bottom < -tol::EPS_PSD * top.max(1.0) {
        return Err(GnsError::NotPsd(bottom));
    }
    if top <= 0.0 {
        return Err(GnsError::ZeroFunctional);
    }
    Ok(top)
}

/// Orthonormal coordinates for the span of the frames over `words`:
/// returns `(Λ^{-1/2} V*, rank)` where `V, Λ` are the kept eigenpairs of
/// their Gram matrix. Multiplying a column block `[S_{v*w}]_v` by this map
/// gives the coordinates of `P_E Φ(w)`.
fn frame_coordinates(s: &HankelFunctional, words: &[Word], cutoff: f64) -> Result<CMat, GnsError> {
    let gram = block_matrix(s, words, words, |v, w| v.involute().concat(w).expect("same alphabet"));
    let (vals, vecs) = linalg::eigh(&gram);
    let kept: Vec<usize> = (0..vals.len()).rev().filter(|&i| vals[i] > cutoff).collect();
    if kept.is_empty() {
        return Err(GnsError::ZeroFunctional);
    }
    let mut map = CMat::zeros(kept.len(), gram.nrows());
    for (r, &i) in kept.iter().enumerate() {
        let row = vecs.column(i).adjoint() / C64::new(vals[i].sqrt(), 0.0);
        map.row_mut(r).copy_from(&row);
    }
    Ok(map)
}

fn frames_for(s: &HankelFunctional, span_words: &[Word], coords: &CMat, words: &[Word]) -> BTreeMap<Word, CMat> {
    words
        .iter()
        .map(|w| {
            let col = block_matrix(s, span_words, std::slice::from_ref(w), |v, w| {
                v.involute().concat(w).expect("same alphabet")
            });
            (w.clone(), coords * col)
        })
        .collect()
}

/// Monoid GNS. `S` has degree `D = d + 1`; `E` is spanned by `Φ(w)`,
/// `|w| ≤ d`, and `Y_i = P_E L_{x_i}` on `E`.
pub fn gns_construct(s: &HankelFunctional) -> Result<WitnessModel, GnsError> {
    if s.mode != Mode::Monoid {
        return Err(GnsError::WrongMode { expected: Mode::Monoid, found: s.mode });
    }
    if s.degree == 0 {
        return Err(GnsError::Degree { requested: 1, available: 0 });
    }
    let top = check_psd(s)?;
    let d = s.degree - 1;
    let inner = freewords::enumerate(s.g, d, s.mode);
    let coords = frame_coordinates(s, &inner, tol::EPS_NULL_REL * top)?;
    let all = freewords::enumerate(s.g, s.degree, s.mode);
    let frames = frames_for(s, &inner, &coords, &all);
    // B*Φ over the spanning words, as one e × N(d)k matrix
    let span: CMat = concat_columns(inner.iter().map(|w| &frames[w]));
    let span_pinv = linalg::pinv(&span, 1e-12);
    let mut ys = Vec::with_capacity(s.g as usize);
    let mut worst = 0.0f64;
    for letter in alphabet_letters(s.g, s.mode) {
        let shifted = concat_columns(inner.iter().map(|w| &frames[&w.left_mul(letter).expect("monoid letter")]));
        let y = linalg::hermitian_part(&(&shifted * &span_pinv));
        let fit = linalg::max_abs(&(&y * &span - &shifted)) / linalg::max_abs(&shifted).max(1.0);
        worst = worst.max(fit);
        ys.push(y);
    }
    if worst > tol::EPS_SHIFT_FIT {
        return Err(GnsError::ShiftFit(worst));
    }
    let tuple = OperatorTuple::self_adjoint(ys)?;
    let gamma = vec(&frames[&Word::empty(s.g, s.mode)]);
    Ok(WitnessModel { tuple, gamma, frames, functional: s.clone() })
}

fn concat_columns<'a>(blocks: impl Iterator<Item = &'a CMat>) -> CMat {
    let blocks: Vec<&CMat> = blocks.collect();
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), b.shape()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// Group GNS. `S` has degree `D = d`; `E` is spanned by all `Φ(w)`,
/// `|w| ≤ d`. Each `L_y : Φ(w) ↦ Φ(yw)` is isometric from the span over
/// `w ∈ (F)_{d−1} ∪ y⁻¹(F)_{d−1}` onto the span over `yw`; it is extended
/// to a unitary `U_y` by matching orthocomplement bases built in graded-lex
/// order. `U_{y⁻¹}` is set to `U_y*`.
pub fn gns_construct_unitary(s: &HankelFunctional) -> Result<WitnessModel, GnsError> {
    if s.mode != Mode::Group {
        return Err(GnsError::WrongMode { expected: Mode::Group, found: s.mode });
    }
    let top = check_psd(s)?;
    let d = s.degree;
    let all = freewords::enumerate(s.g, d, s.mode);
    let coords = frame_coordinates(s, &all, tol::EPS_NULL_REL * top)?;
    let frames = frames_for(s, &all, &coords, &all);
    let e = coords.nrows();
    let lower: Vec<Word> = if d == 0 { Vec::new() } else { freewords::enumerate(s.g, d - 1, s.mode) };
    // unit-norm candidates in word order, then the standard basis as backstop
    let mut candidates: Vec<CMat> = Vec::new();
    for w in &all {
        for col in frames[w].column_iter() {
            let n = col.norm();
            if n > 0.0 {
                candidates.push(CMat::from_iterator(e, 1, col.iter().map(|z| z / n)));
            }
        }
    }
    candidates.push(linalg::identity(e));
    let candidates = concat_columns(candidates.iter());
    let mut unitaries = Vec::with_capacity(s.g as usize);
    for i in 1..=s.g {
        let y = Letter::new(i);
        let mut domain: Vec<Word> = lower.clone();
        for w in &lower {
            let moved = w.left_mul(y.inverted()).expect("group letter");
            if !domain.contains(&moved) {
                domain.push(moved);
            }
        }
        let image: Vec<Word> = domain.iter().map(|w| w.left_mul(y).expect("group letter")).collect();
        let u = if domain.is_empty() {
            linalg::identity(e)
        } else {
            let dom_cols = concat_columns(domain.iter().map(|w| &frames[w]));
            let img_cols = concat_columns(image.iter().map(|w| &frames[w]));
            // orthonormalize the domain through its Gram matrix; the same
            // change of basis orthonormalizes the image since L_y is isometric
            let gram = dom_cols.adjoint() * &dom_cols;
            let (vals, vecs) = linalg::eigh(&gram);
            let cutoff = tol::EPS_NULL_REL * top;
            let kept: Vec<usize> = (0..vals.len()).rev().filter(|&j| vals[j] > cutoff).collect();
            let mut z = CMat::zeros(gram.nrows(), kept.len());
            for (c, &j) in kept.iter().enumerate() {
                z.set_column(c, &(vecs.column(j) / C64::new(vals[j].sqrt(), 0.0)));
            }
            let bd = &dom_cols * &z;
            let br = &img_cols * &z;
            let cd = linalg::extend_orthonormal(&bd, &candidates, 1e-6);
            let cr = linalg::extend_orthonormal(&br, &candidates, 1e-6);
            if bd.ncols() + cd.ncols() != e || br.ncols() + cr.ncols() != e {
                return Err(GnsError::Extension(y.to_string()));
            }
            let src = concat_columns([&bd, &cd].into_iter());
            let dst = concat_columns([&br, &cr].into_iter());
            linalg::polar_unitary(&(dst * src.adjoint()))
        };
        unitaries.push(u);
    }
    let tuple = OperatorTuple::unitary(unitaries)?;
    let gamma = vec(&frames[&Word::empty(s.g, s.mode)]);
    Ok(WitnessModel { tuple, gamma, frames, functional: s.clone() })
}

/// Runs the construction matching the functional's mode.
pub fn construct(s: &HankelFunctional) -> Result<WitnessModel, GnsError> {
    match s.mode {
        Mode::Monoid => gns_construct(s),
        Mode::Group => gns_construct_unitary(s),
    }
}

/// Max over basis words `v, w` and seeded random `P, Q` of
/// `|φ(Q*P · v*w) − ⟨p(Y)γ, q(Y)γ⟩|` with `p = P·w`, `q = Q·v`.
///
/// Monoid: `|v| ≤ D − 1`, `|w| ≤ D`. Group: `|v|, |w| ≤ D`.
pub fn gns_verify(s: &HankelFunctional, model: &WitnessModel, seed: u64) -> f64 {
    let k = s.k;
    let (vd, wd) = match s.mode {
        Mode::Monoid => (s.degree.saturating_sub(1), s.degree),
        Mode::Group => (s.degree, s.degree),
    };
    let t = model.gamma_matrix();
    let shifted: BTreeMap<Word, CMat> = freewords::enumerate(s.g, wd, s.mode)
        .into_iter()
        .map(|w| (w.clone(), model.tuple.word_operator(&w) * &t))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rand_mat =
        || CMat::from_fn(k, k, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut worst = 0.0f64;
    for v in freewords::enumerate(s.g, vd, s.mode) {
        for (w, zw) in &shifted {
            let p = rand_mat();
            let q = rand_mat();
            let expected =
                linalg::entry_pairing(&s.block(&v.involute().concat(w).expect("same alphabet")), &(q.adjoint() * &p));
            // (P⊗I)vec(Z) = vec(Z Pᵀ)
            let lhs = zw * p.transpose();
            let rhs = &shifted[&v] * q.transpose();
            let got = linalg::trace_pairing(&rhs, &lhs);
            worst = worst.max((expected - got).norm());
        }
    }
    worst
}
