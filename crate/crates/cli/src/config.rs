//! TOML run configuration.
//!
//! ```toml
//! command = "spectrum"      # classify | weight | poly | moments | reduce | spectrum | amplitude | verify
//! q = 0.5
//!
//! [pearson]                 # A(w) = a1 w + a0, B(w) = b2 w^2 + b1 w + b0
//! a1 = 2.0
//! a0 = 0.0
//! b2 = 1.0
//! b1 = 0.0
//! b0 = -1.0
//!
//! # or instead of [pearson]:
//! [model]
//! k = [1, -1]
//! alpha = [[1, 0], [1, 1]]
//! g0 = "1"                  # expression in n0..nN
//! h0 = "n0 + 2*n1"
//! lambdas = [4.0]           # eigenvalues of A_1..A_N
//! label = 0                 # element of L
//!
//! [options]
//! n_max = 10
//! m = 40
//! tol = 1e-15
//! depth = 50
//! horizon = 200
//! t = [0.0, 0.5, 1.0]
//! format = "csv"
//! output = "out.csv"
//! ```

use std::fmt;
use std::path::PathBuf;

use nalgebra::DMatrix;
use qhahn::multiboson::MultibosonModel;
use qhahn::pearson::PearsonData;
use qhahn::qcalc::QParam;
use serde::Deserialize;

use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Classify,
    Weight,
    Poly,
    Moments,
    Reduce,
    Spectrum,
    Amplitude,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Weight => "weight",
            Command::Poly => "poly",
            Command::Moments => "moments",
            Command::Reduce => "reduce",
            Command::Spectrum => "spectrum",
            Command::Amplitude => "amplitude",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    q: f64,
    pearson: Option<RawPearson>,
    model: Option<RawModel>,
    #[serde(default)]
    options: Options,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPearson {
    a1: f64,
    a0: f64,
    b2: f64,
    b1: f64,
    b0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    k: Vec<i64>,
    alpha: Vec<Vec<f64>>,
    #[serde(default = "one")]
    g0: String,
    #[serde(default = "zero")]
    h0: String,
    #[serde(default)]
    lambdas: Vec<f64>,
    #[serde(default)]
    label: i64,
}

fn one() -> String {
    "1".into()
}

fn zero() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    pub n_max: usize,
    pub m: usize,
    pub tol: f64,
    pub depth: usize,
    pub horizon: usize,
    pub t: Vec<f64>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            n_max: 10,
            m: qhahn::spectral::DEFAULT_TRUNCATION,
            tol: 1e-15,
            depth: 50,
            horizon: 200,
            t: (0..=10).map(|i| 0.5 * i as f64).collect(),
            format: None,
            output: None,
        }
    }
}

/// Multiboson block with the compiled model.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub model: MultibosonModel,
    pub lambdas: Vec<f64>,
    pub label: i64,
    pub g0: String,
    pub h0: String,
}

#[derive(Debug, Clone)]
pub enum Source {
    Pearson(PearsonData),
    Model(ModelConfig),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub q: QParam,
    pub source: Source,
    pub options: Options,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| err(format!("schema error: {e}")))?;
    let q = QParam::new(raw.q).map_err(|e| err(format!("field q: {e}")))?;
    let opts = raw.options;
    if !(opts.tol > 0.0) {
        return Err(err("field options.tol: tolerance must be positive"));
    }
    if opts.m == 0 {
        return Err(err("field options.m: truncation size must be at least 1"));
    }
    if opts.t.iter().any(|t| !t.is_finite()) {
        return Err(err("field options.t: times must be finite"));
    }
    let source = match (raw.pearson, raw.model) {
        (Some(_), Some(_)) => return Err(err("give exactly one of [pearson] and [model]")),
        (None, None) => return Err(err("missing [pearson] or [model] block")),
        (Some(p), None) => {
            if raw.command == Command::Reduce {
                return Err(err("command reduce needs a [model] block"));
            }
            let data = PearsonData::new(p.a1, p.a0, p.b2, p.b1, p.b0, q)
                .map_err(|e| err(format!("[pearson]: {e}")))?;
            Source::Pearson(data)
        }
        (None, Some(m)) => {
            if matches!(raw.command, Command::Classify | Command::Weight | Command::Poly | Command::Moments) {
                return Err(err(format!("command {} needs a [pearson] block", raw.command.name())));
            }
            Source::Model(model_config(m)?)
        }
    };
    Ok(RunConfig { command: raw.command, q, source, options: opts })
}

fn model_config(m: RawModel) -> Result<ModelConfig, ConfigError> {
    let modes = m.k.len();
    if modes == 0 {
        return Err(err("field model.k: at least one mode is required"));
    }
    if m.alpha.len() != modes || m.alpha.iter().any(|row| row.len() != modes) {
        return Err(err(format!("field model.alpha: expected a {modes}x{modes} matrix")));
    }
    if m.lambdas.len() + 1 != modes {
        return Err(err(format!("field model.lambdas: expected {} values", modes - 1)));
    }
    let alpha = DMatrix::from_row_iterator(modes, modes, m.alpha.iter().flatten().copied());
    let g0 = Expr::parse(&m.g0, modes).map_err(|e| err(format!("field model.g0 {e}")))?;
    let h0 = Expr::parse(&m.h0, modes).map_err(|e| err(format!("field model.h0 {e}")))?;
    let model = MultibosonModel::new(m.k, alpha, g0.into_fn(), h0.into_fn())
        .map_err(|e| err(format!("[model]: {e}")))?;
    Ok(ModelConfig { model, lambdas: m.lambdas, label: m.label, g0: m.g0, h0: m.h0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_pearson_block() {
        let cfg = parse_config(
            "command = \"classify\"\nq = 0.5\n[pearson]\na1 = 2\na0 = 0\nb2 = 1\nb1 = 0\nb0 = -1\n",
        )
        .unwrap();
        assert_eq!(cfg.command, Command::Classify);
        assert!(matches!(cfg.source, Source::Pearson(d) if d.a1 == 2.0 && d.b0 == -1.0));
        assert_eq!(cfg.options, Options::default());
    }

    #[test]
    fn model_block() {
        let cfg = parse_config(
            "command = \"reduce\"\nq = 0.5\n[model]\nk = [1, -1]\nalpha = [[1, 0], [1, 1]]\ng0 = \"1\"\nlambdas = [3]\n",
        )
        .unwrap();
        let Source::Model(m) = cfg.source else { panic!() };
        assert_eq!(m.model.k(), &[1, -1]);
        assert_eq!(m.model.g0(&[2.0, 1.0]), 1.0);
        assert_eq!(m.model.h0(&[2.0, 1.0]), 0.0);
    }

    #[test]
    fn rejections() {
        let bad_q = "command = \"classify\"\nq = 1.2\n[pearson]\na1 = 2\na0 = 0\nb2 = 1\nb1 = 0\nb0 = -1\n";
        assert!(parse_config(bad_q).unwrap_err().0.contains("field q"));
        let unknown = "command = \"classify\"\nq = 0.5\nextra = 1\n[pearson]\na1 = 2\na0 = 0\nb2 = 1\nb1 = 0\nb0 = -1\n";
        assert!(parse_config(unknown).unwrap_err().0.contains("line"));
        let neither = "command = \"classify\"\nq = 0.5\n";
        assert!(parse_config(neither).is_err());
        let bad_tol = "command = \"moments\"\nq = 0.5\n[pearson]\na1 = 2\na0 = 0\nb2 = 1\nb1 = 0\nb0 = -1\n[options]\ntol = 0\n";
        assert!(parse_config(bad_tol).unwrap_err().0.contains("tol"));
        let bad_expr = "command = \"reduce\"\nq = 0.5\n[model]\nk = [1]\nalpha = [[1]]\ng0 = \"exp(n0)\"\n";
        assert!(parse_config(bad_expr).unwrap_err().0.contains("g0"));
        let wrong_block = "command = \"reduce\"\nq = 0.5\n[pearson]\na1 = 2\na0 = 0\nb2 = 1\nb1 = 0\nb0 = -1\n";
        assert!(parse_config(wrong_block).is_err());
    }
}
