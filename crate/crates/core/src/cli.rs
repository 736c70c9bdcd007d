//! Command-line front end. Every command writes one JSON document to stdout
//! or `--out`; logs go to stderr.
//!
//! Exit codes: 0 sos (or success, for commands without a verdict), 1 witness,
//! 2 undecided, 64 usage, 65 malformed or unsupported input, 66 unreadable
//! input, 73 unwritable output.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::certify::{self, CertifyError, CertifyOptions, CertifyOutcome, Claim, Diagnostics, Search};
use crate::fock::{self, FockBasis, FockError};
use crate::freewords::Mode;
use crate::json::{self, FormatError, MatrixJson, Real};
use crate::ncpoly::{NcPoly, PolyError};
use crate::sdp::SolveOptions;
use crate::tol;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

#[derive(Debug, Parser)]
#[command(
    name = "ncsos",
    version,
    about = "Sum-of-squares certificates and counterexample witnesses for nc polynomials"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Half-degree d of the Gram basis; defaults to ceil(deg f / 2).
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Feasibility tolerance of the projection solver.
    #[arg(long, global = true, value_parser = positive, default_value_t = tol::SOLVER_TOL)]
    pub tol: f64,
    /// Iteration cap of the projection solver.
    #[arg(long, global = true, default_value_t = tol::SOLVER_MAX_ITER)]
    pub max_iter: usize,
    /// Largest witness margin tried; it is divided by 10 down to 1e-8.
    #[arg(long, global = true, value_parser = positive, default_value_t = tol::DELTA_START)]
    pub delta: f64,
    /// Maximum coefficient residual of an accepted certificate.
    #[arg(long, global = true, value_parser = positive, default_value_t = tol::EPS_CERT)]
    pub eps_cert: f64,
    /// Required negativity of the witness's minimum eigenvalue.
    #[arg(long, global = true, value_parser = positive, default_value_t = tol::EPS_WIT)]
    pub eps_wit: f64,
    /// Seed for verification coefficients and random spot checks.
    #[arg(long, global = true, default_value_t = tol::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide sos or not: certificate, witness, or undecided.
    Certify { file: PathBuf },
    /// Search for a Gram certificate only.
    Decompose { file: PathBuf },
    /// Search for a counterexample witness only.
    Witness { file: PathBuf },
    /// Evaluate a polynomial at an operator tuple.
    Eval {
        file: PathBuf,
        #[arg(long)]
        at: PathBuf,
    },
    /// Recover coefficients of q from E = q(A) at the truncated Fock tuple.
    Extract {
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        g: u32,
        #[arg(long)]
        l: usize,
        #[arg(long)]
        k: usize,
    },
    /// Dump the truncated Fock space operators.
    FockDump {
        #[arg(long)]
        g: u32,
        #[arg(long)]
        l: usize,
        /// Free group space with its unitaries instead of creation operators.
        #[arg(long)]
        group: bool,
    },
    /// Re-check an outcome file against random evaluations.
    Spotcheck {
        file: PathBuf,
        outcome: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// Largest matrix size sampled.
        #[arg(long, default_value_t = 5)]
        n_max: usize,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Validated settings of one invocation.
#[derive(Debug)]
pub struct RunConfig {
    pub command: Command,
    pub options: CertifyOptions,
    pub out: Option<PathBuf>,
}

impl From<Cli> for RunConfig {
    fn from(cli: Cli) -> Self {
        let options = CertifyOptions {
            degree: cli.degree,
            solver: SolveOptions { max_iter: cli.max_iter, tol: cli.tol, ..SolveOptions::default() },
            delta_start: cli.delta,
            delta_min: tol::DELTA_MIN.min(cli.delta),
            eps_cert: cli.eps_cert,
            eps_wit: cli.eps_wit,
            seed: cli.seed,
        };
        RunConfig { command: cli.command, options, out: cli.out }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error(transparent)]
    Certify(#[from] CertifyError),
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } => EXIT_NO_INPUT,
            CliError::Write { .. } => EXIT_CANT_CREATE,
            _ => EXIT_DATA,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn load<T>(path: &Path, parse: impl Fn(&str) -> Result<T, FormatError>) -> Result<T, CliError> {
    parse(&read(path)?).map_err(|source| CliError::Format { path: path.to_path_buf(), source })
}

/// Output document plus the exit code it implies.
pub struct Report {
    pub json: String,
    pub exit_code: i32,
}

#[derive(Serialize)]
struct FockDumpJson {
    g: u32,
    level: usize,
    mode: Mode,
    dim: usize,
    basis: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    creation: Option<Vec<MatrixJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetrized: Option<Vec<MatrixJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extraction: Option<MatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<Real>,
    /// Group mode: one unitary per signed letter, `x1, x1^-1, x2, …`.
    #[serde(skip_serializing_if = "Option::is_none")]
    unitaries: Option<Vec<MatrixJson>>,
}

#[derive(Serialize)]
struct SpotcheckJson {
    outcome: &'static str,
    input_sha256: String,
    hash_matches: bool,
    trials: usize,
    sampled_min_eig: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    factor_residual: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness_min_eig: Option<Real>,
    consistent: bool,
}

fn outcome_report(f: &NcPoly, outcome: &CertifyOutcome) -> Report {
    Report { json: json::to_pretty(&json::outcome_to_json(f, outcome)), exit_code: outcome.exit_code() }
}

fn one_sided(gap: f64, iterations: usize, primal: bool, delta: f64) -> CertifyOutcome {
    let (pg, pi, dg, di) = if primal { (gap, iterations, f64::NAN, 0) } else { (f64::NAN, 0, gap, iterations) };
    CertifyOutcome::Undecided(Diagnostics {
        primal_gap: pg,
        primal_iterations: pi,
        dual_gap: dg,
        dual_iterations: di,
        delta,
    })
}

/// Executes a validated configuration.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let opts = &cfg.options;
    match &cfg.command {
        Command::Certify { file } => {
            let f = load(file, json::parse_poly)?;
            Ok(outcome_report(&f, &certify::certify(&f, opts)?))
        }
        Command::Decompose { file } => {
            let f = load(file, json::parse_poly)?;
            certify::check_hermitian(&f)?;
            let d = certify::half_degree(&f, opts)?;
            let outcome = match certify::primal_search(&f, d, opts)? {
                Search::Found(c) => CertifyOutcome::Sos(c),
                Search::NotFound { gap, iterations } => one_sided(gap, iterations, true, f64::NAN),
            };
            Ok(outcome_report(&f, &outcome))
        }
        Command::Witness { file } => {
            let f = load(file, json::parse_poly)?;
            certify::check_hermitian(&f)?;
            let d = certify::half_degree(&f, opts)?;
            let outcome = match certify::dual_search(&f, d, opts)? {
                Search::Found(w) => CertifyOutcome::Witness(Box::new(w)),
                Search::NotFound { gap, iterations } => one_sided(gap, iterations, false, opts.delta_min),
            };
            Ok(outcome_report(&f, &outcome))
        }
        Command::Eval { file, at } => {
            let f = load(file, json::parse_poly)?;
            let x = load(at, json::parse_tuple)?;
            let value = f.eval(&x)?;
            Ok(Report { json: json::to_pretty(&json::matrix_to_json(&value)), exit_code: 0 })
        }
        Command::Extract { eval, g, l, k } => {
            if *g == 0 || *l == 0 || *k == 0 {
                return Err(CliError::Input("--g, --l and --k must be positive".into()));
            }
            let e = load(eval, json::parse_matrix)?;
            let ext = fock::build_extraction(&FockBasis::new(*g, *l, Mode::Monoid))?;
            let q = ext.extract(&e, *k)?;
            Ok(Report { json: json::to_pretty(&json::poly_to_json(&q)), exit_code: 0 })
        }
        Command::FockDump { g, l, group } => {
            if *g == 0 || *l == 0 {
                return Err(CliError::Input("--g and --l must be positive".into()));
            }
            let mode = if *group { Mode::Group } else { Mode::Monoid };
            let basis = FockBasis::new(*g, *l, mode);
            let mut dump = FockDumpJson {
                g: *g,
                level: *l,
                mode,
                dim: basis.dim(),
                basis: basis.words().iter().map(ToString::to_string).collect(),
                creation: None,
                symmetrized: None,
                extraction: None,
                lambda: None,
                unitaries: None,
            };
            if *group {
                let u = fock::build_unitaries(*g, *l)?;
                dump.unitaries = Some(u.letter_operators().iter().map(json::matrix_to_json).collect());
            } else {
                let ext = fock::build_extraction(&basis)?;
                dump.creation = Some(fock::build_creation(&basis)?.iter().map(json::matrix_to_json).collect());
                dump.symmetrized = Some(ext.tuple().letter_operators().iter().map(json::matrix_to_json).collect());
                dump.extraction = Some(json::matrix_to_json(ext.matrix()));
                dump.lambda = Some(Real(ext.lambda()));
            }
            Ok(Report { json: json::to_pretty(&dump), exit_code: 0 })
        }
        Command::Spotcheck { file, outcome, trials, n_max } => {
            let f = load(file, json::parse_poly)?;
            let (hash, claim): (String, Claim) = load(outcome, json::parse_claim)?;
            let rep = certify::spotcheck(&f, &claim, *trials, *n_max, opts.seed)?;
            let hash_matches = hash == json::poly_hash(&f);
            let out = SpotcheckJson {
                outcome: rep.outcome,
                input_sha256: hash,
                hash_matches,
                trials: rep.trials,
                sampled_min_eig: Real(rep.sampled_min_eig),
                factor_residual: rep.factor_residual.map(Real),
                witness_min_eig: rep.witness_min_eig.map(Real),
                consistent: rep.consistent && hash_matches,
            };
            let exit_code = if out.consistent { 0 } else { EXIT_DATA };
            Ok(Report { json: json::to_pretty(&out), exit_code })
        }
    }
}

/// Parses `args` (program name first), runs, writes output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = RunConfig::from(cli);
    let result = execute(&cfg).and_then(|report| {
        match &cfg.out {
            Some(path) => {
                fs::write(path, &report.json).map_err(|source| CliError::Write { path: path.clone(), source })?
            }
            None => print!("{}", report.json),
        }
        Ok(report.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            eprintln!("ncsos: {e}");
            e.exit_code()
        }
    }
}
