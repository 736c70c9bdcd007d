//! JSON file formats.
//!
//! Matrices are row-major lists of rows, each entry a `[re, im]` pair.
//! Floats are written with 17 significant digits in exponent form so output
//! is byte-stable and round-trips exactly; non-finite values become `null`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::certify::{CertifyOutcome, Claim, Diagnostics, Witness};
use crate::freewords::{Mode, Word};
use crate::gram::SosCertificate;
use crate::linalg::{CMat, CVec, C64};
use crate::ncpoly::{NcPoly, OperatorTuple, PolyError};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Content { path: String, message: String },
}

fn content(path: impl Into<String>, message: impl ToString) -> FormatError {
    FormatError::Content { path: path.into(), message: message.to_string() }
}

fn parse_raw<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// A float that serializes as `{:.16e}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Option::<f64>::deserialize(d).map(|v| Real(v.unwrap_or(f64::NAN)))
    }
}

pub type MatrixJson = Vec<Vec<[Real; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [Real(m[(i, j)].re), Real(m[(i, j)].im)]).collect()).collect()
}

pub fn matrix_from_json(rows: &MatrixJson, path: &str) -> Result<CMat, FormatError> {
    let r = rows.len();
    let c = rows.first().map(Vec::len).unwrap_or(0);
    if let Some(bad) = rows.iter().position(|row| row.len() != c) {
        return Err(content(format!("{path}[{bad}]"), format!("row has {} entries, expected {c}", rows[bad].len())));
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, [re, im]) in row.iter().enumerate() {
            if !re.0.is_finite() || !im.0.is_finite() {
                return Err(content(format!("{path}[{i}][{j}]"), "entry is not a finite number"));
            }
        }
    }
    Ok(CMat::from_fn(r, c, |i, j| C64::new(rows[i][j][0].0, rows[i][j][1].0)))
}

pub fn vector_to_json(v: &CVec) -> Vec<[Real; 2]> {
    v.iter().map(|z| [Real(z.re), Real(z.im)]).collect()
}

#[derive(Serialize, Deserialize)]
pub struct TermJson {
    pub word: String,
    pub matrix: MatrixJson,
}

#[derive(Serialize, Deserialize)]
pub struct PolyJson {
    pub g: u32,
    pub mode: Mode,
    pub coeff_dim: usize,
    pub terms: Vec<TermJson>,
}

pub fn poly_to_json(p: &NcPoly) -> PolyJson {
    PolyJson {
        g: p.alphabet(),
        mode: p.mode(),
        coeff_dim: p.coeff_dim(),
        terms: p.terms().map(|(w, c)| TermJson { word: w.to_string(), matrix: matrix_to_json(c) }).collect(),
    }
}

pub fn poly_from_json(pj: &PolyJson, path: &str) -> Result<NcPoly, FormatError> {
    if pj.g == 0 {
        return Err(content(format!("{path}.g"), "alphabet size must be positive"));
    }
    if pj.coeff_dim == 0 {
        return Err(content(format!("{path}.coeff_dim"), PolyError::ZeroCoefficientDim));
    }
    let mut p = NcPoly::zero(pj.g, pj.mode, pj.coeff_dim);
    for (i, t) in pj.terms.iter().enumerate() {
        let at = format!("{path}.terms[{i}]");
        let w = Word::parse(&t.word, pj.g, pj.mode).map_err(|e| content(format!("{at}.word"), e))?;
        let m = matrix_from_json(&t.matrix, &format!("{at}.matrix"))?;
        p.add_term(w, m).map_err(|e| content(at, e))?;
    }
    Ok(p)
}

pub fn parse_poly(text: &str) -> Result<NcPoly, FormatError> {
    poly_from_json(&parse_raw(text)?, "$")
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Canonical compact JSON of `p`.
pub fn poly_canonical(p: &NcPoly) -> String {
    serde_json::to_string(&poly_to_json(p)).expect("JSON values serialize")
}

/// SHA-256 of the canonical JSON, hex encoded.
pub fn poly_hash(p: &NcPoly) -> String {
    hex::encode(Sha256::digest(poly_canonical(p).as_bytes()))
}

#[derive(Serialize, Deserialize)]
pub struct TupleJson {
    pub mode: Mode,
    /// Monoid: `g` self-adjoint matrices. Group: `g` unitaries, inverses implied.
    pub matrices: Vec<MatrixJson>,
}

pub fn tuple_to_json(x: &OperatorTuple) -> TupleJson {
    TupleJson { mode: x.mode(), matrices: x.generators().into_iter().map(matrix_to_json).collect() }
}

pub fn tuple_from_json(tj: &TupleJson, path: &str) -> Result<OperatorTuple, FormatError> {
    let mats = tj
        .matrices
        .iter()
        .enumerate()
        .map(|(i, m)| matrix_from_json(m, &format!("{path}.matrices[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let out = match tj.mode {
        Mode::Monoid => OperatorTuple::self_adjoint(mats),
        Mode::Group => OperatorTuple::unitary(mats),
    };
    out.map_err(|e| content(format!("{path}.matrices"), e))
}

pub fn parse_tuple(text: &str) -> Result<OperatorTuple, FormatError> {
    tuple_from_json(&parse_raw(text)?, "$")
}

pub fn parse_matrix(text: &str) -> Result<CMat, FormatError> {
    matrix_from_json(&parse_raw(text)?, "$")
}

#[derive(Serialize, Deserialize)]
pub struct CertificateJson {
    pub half_degree: usize,
    pub gram: MatrixJson,
    pub factors: Vec<PolyJson>,
    pub residual: Real,
}

#[derive(Serialize, Deserialize)]
pub struct BlockJson {
    pub word: String,
    pub matrix: MatrixJson,
}

#[derive(Serialize, Deserialize)]
pub struct FunctionalJson {
    pub degree: usize,
    pub blocks: Vec<BlockJson>,
}

#[derive(Serialize, Deserialize)]
pub struct WitnessJson {
    pub dim: usize,
    pub tuple: TupleJson,
    pub gamma: Vec<[Real; 2]>,
    pub min_eig: Real,
    pub refuted_value: Real,
    pub delta: Real,
    pub residual: Real,
    pub functional: FunctionalJson,
}

#[derive(Serialize, Deserialize)]
pub struct DiagnosticsJson {
    pub primal_gap: Real,
    pub primal_iterations: usize,
    pub dual_gap: Real,
    pub dual_iterations: usize,
    pub delta: Real,
}

#[derive(Serialize, Deserialize)]
pub struct OutcomeJson {
    pub outcome: String,
    pub input_sha256: String,
    pub input: PolyJson,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<CertificateJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<WitnessJson>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostics: Option<DiagnosticsJson>,
}

pub fn certificate_to_json(c: &SosCertificate) -> CertificateJson {
    CertificateJson {
        half_degree: c.gram.half_degree(),
        gram: matrix_to_json(c.gram.matrix()),
        factors: c.factors.iter().map(poly_to_json).collect(),
        residual: Real(c.residual),
    }
}

pub fn witness_to_json(w: &Witness) -> WitnessJson {
    let s = &w.model.functional;
    WitnessJson {
        dim: w.model.dim(),
        tuple: tuple_to_json(&w.model.tuple),
        gamma: vector_to_json(&w.model.gamma),
        min_eig: Real(w.min_eig),
        refuted_value: Real(w.refuted_value),
        delta: Real(w.delta),
        residual: Real(w.gns_residual),
        functional: FunctionalJson {
            degree: s.degree(),
            blocks: s
                .blocks()
                .iter()
                .map(|(u, b)| BlockJson { word: u.to_string(), matrix: matrix_to_json(b) })
                .collect(),
        },
    }
}

pub fn diagnostics_to_json(d: &Diagnostics) -> DiagnosticsJson {
    DiagnosticsJson {
        primal_gap: Real(d.primal_gap),
        primal_iterations: d.primal_iterations,
        dual_gap: Real(d.dual_gap),
        dual_iterations: d.dual_iterations,
        delta: Real(d.delta),
    }
}

pub fn outcome_to_json(f: &NcPoly, outcome: &CertifyOutcome) -> OutcomeJson {
    let mut out = OutcomeJson {
        outcome: outcome.kind().to_string(),
        input_sha256: poly_hash(f),
        input: poly_to_json(f),
        certificate: None,
        witness: None,
        diagnostics: None,
    };
    match outcome {
        CertifyOutcome::Sos(c) => out.certificate = Some(certificate_to_json(c)),
        CertifyOutcome::Witness(w) => out.witness = Some(witness_to_json(w)),
        CertifyOutcome::Undecided(d) => out.diagnostics = Some(diagnostics_to_json(d)),
    }
    out
}

/// Reads an outcome file; returns the hash it was issued for and its claim.
pub fn parse_claim(text: &str) -> Result<(String, Claim), FormatError> {
    let oj: OutcomeJson = parse_raw(text)?;
    let claim = match oj.outcome.as_str() {
        "sos" => {
            let c = oj.certificate.as_ref().ok_or_else(|| content("$.certificate", "missing for an sos outcome"))?;
            let factors = c
                .factors
                .iter()
                .enumerate()
                .map(|(i, p)| poly_from_json(p, &format!("$.certificate.factors[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Claim::Sos(factors)
        }
        "witness" => {
            let w = oj.witness.as_ref().ok_or_else(|| content("$.witness", "missing for a witness outcome"))?;
            Claim::Witness(tuple_from_json(&w.tuple, "$.witness.tuple")?)
        }
        "undecided" => Claim::Undecided,
        other => return Err(content("$.outcome", format!("unknown outcome {other:?}"))),
    };
    Ok((oj.input_sha256, claim))
}
