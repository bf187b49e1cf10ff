//! Command-line front end of the `qhahn` library.
//!
//! A run is described by a TOML file (see [`config`]); [`run`] dispatches the
//! command and returns a [`Report`] that the binary renders as CSV, JSON or
//! a plain-text table.

pub mod config;
pub mod expr;
pub mod output;
pub mod verify;

use std::fmt;

use num_complex::Complex64;
use qhahn::moments::{self, MomentFunction};
use qhahn::multiboson::{self, dimension_class, reduce, vacuum_lambdas};
use qhahn::pearson::{self, PearsonData};
use qhahn::qhahn::{monic_norms_by_product, ops_by_recurrence, structural_functions, StructuralSeq};
use qhahn::spectral::{self, DiscreteMeasure};
use serde_json::Value;

pub use config::{parse_config, Command, Format, RunConfig, Source};
pub use output::{Cell, Report};

/// Failure of a run, with its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Library(qhahn::Error),
    Io(String),
    VerifyFailed(usize),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::Library(e) => write!(f, "{e}"),
            CliError::VerifyFailed(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl From<qhahn::Error> for CliError {
    fn from(e: qhahn::Error) -> Self {
        CliError::Library(e)
    }
}

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl CliError {
    /// 1 failed verification, 2 configuration, 3 math domain, 4 non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Library(e) if e.is_input_error() => 2,
            CliError::Library(e) if e.is_non_convergence() => 4,
            CliError::Library(_) => 3,
            CliError::VerifyFailed(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "verify_failed",
            2 => "config",
            3 => "domain",
            _ => "non_convergence",
        }
    }

    /// Machine-readable error object.
    pub fn to_json(&self) -> String {
        let obj = serde_json::json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        obj.to_string()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Format used when neither the flag nor the config file chooses one.
pub fn default_format(command: Command) -> Format {
    match command {
        Command::Classify => Format::Json,
        Command::Verify => Format::Table,
        _ => Format::Csv,
    }
}

/// Runs the configured command.
pub fn run(cfg: &RunConfig) -> CliResult<Report> {
    match cfg.command {
        Command::Classify => classify(pearson_data(cfg)?),
        Command::Weight => weight(pearson_data(cfg)?, cfg),
        Command::Poly => poly(pearson_data(cfg)?, cfg),
        Command::Moments => moments(pearson_data(cfg)?, cfg),
        Command::Reduce => reduce_report(cfg),
        Command::Spectrum => spectrum(cfg),
        Command::Amplitude => amplitude(cfg),
        Command::Verify => verify::verify(cfg),
    }
}

fn pearson_data(cfg: &RunConfig) -> CliResult<&PearsonData> {
    match &cfg.source {
        Source::Pearson(d) => Ok(d),
        Source::Model(_) => Err(CliError::Config(format!("command {} needs a [pearson] block", cfg.command.name()))),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn classify(data: &PearsonData) -> CliResult<Report> {
    let spec = pearson::classify(data)?;
    let mut r = Report::new("classify", &["field", "value"]);
    r.push(vec!["case".into(), spec.case.label().into()]);
    r.push(vec!["r".into(), spec.r.into()]);
    r.push(vec!["support_lo".into(), spec.support.map(|s| s.lo).into()]);
    r.push(vec!["support_hi".into(), spec.support.map(|s| s.hi).into()]);
    r.meta.insert("weight".into(), to_value(&spec));
    Ok(r)
}

fn weight(data: &PearsonData, cfg: &RunConfig) -> CliResult<Report> {
    let spec = pearson::classify(data)?;
    let mut grid = pearson::support_grid(&spec, cfg.options.depth)?;
    grid.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut r = Report::new("weight", &["omega", "rho"]);
    for node in grid {
        r.push(vec![node.x.into(), pearson::weight_eval(&spec, node.x)?.into()]);
    }
    Ok(r)
}

fn poly(data: &PearsonData, cfg: &RunConfig) -> CliResult<Report> {
    let n_max = cfg.options.n_max;
    let spec = pearson::classify(data)?;
    let mu0 = moments::mu0_closed_form(&spec)?;
    let ops = ops_by_recurrence(data, n_max)?;
    let norms = monic_norms_by_product(&structural_functions(data)?, mu0, n_max)?;
    let mut header = vec!["n".to_string(), "norm".to_string()];
    header.extend((0..=n_max).map(|k| format!("c{k}")));
    let mut r = Report::new("poly", &[]);
    r.header = header;
    for (n, (p, norm2)) in ops.polys.iter().zip(norms).enumerate() {
        let mut row: Vec<Cell> = vec![n.into(), norm2.sqrt().into()];
        row.extend((0..=n_max).map(|k| if k <= n { Cell::Num(p.coeff(k)) } else { Cell::Empty }));
        r.push(row);
    }
    r.meta.insert("mu0".into(), to_value(&mu0));
    Ok(r)
}

fn moments(data: &PearsonData, cfg: &RunConfig) -> CliResult<Report> {
    let (n_max, tol) = (cfg.options.n_max, cfg.options.tol);
    let spec = pearson::classify(data)?;
    let mu0 = moments::mu0_closed_form(&spec)?;
    let rec = moments::moments_by_recurrence(data, mu0, n_max)?;
    let direct = moments::moments_direct_seq(&spec, n_max, tol)?;
    let hyper = MomentFunction::new(data, mu0, tol).and_then(|f| f.moments(n_max)).ok();
    let mut r = Report::new("moments", &["n", "recurrence", "direct", "closed_form", "hypergeometric"]);
    for n in 0..=n_max {
        r.push(vec![
            n.into(),
            rec.mu[n].into(),
            direct.mu[n].into(),
            moments::moment_closed_form(&spec, n).ok().into(),
            hyper.as_ref().map(|h| h.mu[n]).into(),
        ]);
    }
    Ok(r)
}

fn model_config(cfg: &RunConfig) -> CliResult<&config::ModelConfig> {
    match &cfg.source {
        Source::Model(m) => Ok(m),
        Source::Pearson(_) => Err(CliError::Config(format!("command {} needs a [model] block", cfg.command.name()))),
    }
}

fn reduce_report(cfg: &RunConfig) -> CliResult<Report> {
    let m = model_config(cfg)?;
    let red = reduce(&m.model, &m.lambdas, m.label, cfg.q)?;
    let vac = vacuum_lambdas(&m.model, &m.lambdas)?;
    let last = red.dimension.map_or(cfg.options.n_max, |d| cfg.options.n_max.min(d));
    let mut r = Report::new("reduce", &["n", "R", "D"]);
    for n in 0..=last {
        r.push(vec![n.into(), red.seq.r(n)?.into(), red.seq.d(n)?.into()]);
    }
    r.meta.insert("kappa".into(), to_value(&vac.kappa));
    r.meta.insert("labels".into(), to_value(&vac.labels));
    r.meta.insert("lambda0".into(), to_value(&vac.lambda0));
    r.meta.insert("label".into(), to_value(&red.label));
    r.meta.insert("lambda0_l".into(), to_value(&red.lambda0));
    r.meta.insert("vacuum".into(), to_value(&red.vacuum));
    r.meta.insert("dimension".into(), to_value(&red.dimension));
    r.meta.insert("dimension_class".into(), to_value(&dimension_class(&m.model)));
    Ok(r)
}

/// Structural sequence of the configured system and the orbit length when
/// it is finite.
pub fn system_sequence(cfg: &RunConfig) -> CliResult<(StructuralSeq, Option<usize>)> {
    match &cfg.source {
        Source::Pearson(d) => Ok((structural_functions(d)?, None)),
        Source::Model(m) => {
            let red = multiboson::reduce(&m.model, &m.lambdas, m.label, cfg.q)?;
            Ok((red.seq, red.dimension))
        }
    }
}

/// Gauss rule of the configured system with `M` capped at a finite orbit's length.
pub fn system_measure(cfg: &RunConfig, m: usize) -> CliResult<(DiscreteMeasure, StructuralSeq, usize)> {
    let (seq, dim) = system_sequence(cfg)?;
    let m = dim.map_or(m, |d| m.min(d));
    let measure = spectral::spectrum(&spectral::jacobi_matrix(&seq, m)?)?;
    Ok((measure, seq, m))
}

fn spectrum(cfg: &RunConfig) -> CliResult<Report> {
    let (measure, seq, m) = system_measure(cfg, cfg.options.m)?;
    let mut r = Report::new("spectrum", &["omega", "mu"]);
    for (x, w) in measure.nodes.iter().zip(&measure.weights) {
        r.push(vec![(*x).into(), (*w).into()]);
    }
    r.meta.insert("m".into(), to_value(&m));
    if m >= 2 {
        r.meta.insert("node_displacement".into(), to_value(&spectral::node_displacement(&seq, m)?));
    }
    let verdict = spectral::classify_type(&seq, cfg.options.horizon.max(10))?;
    r.meta.insert("type".into(), to_value(&verdict));
    Ok(r)
}

fn amplitude(cfg: &RunConfig) -> CliResult<Report> {
    let (measure, _, _) = system_measure(cfg, cfg.options.m)?;
    let mut r = Report::new("amplitude", &["t", "re", "im", "abs"]);
    for &t in &cfg.options.t {
        let a: Complex64 = spectral::vacuum_amplitude(&measure, t);
        r.push(vec![t.into(), a.re.into(), a.im.into(), a.norm().into()]);
    }
    Ok(r)
}
