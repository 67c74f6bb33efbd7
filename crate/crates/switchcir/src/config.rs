//! Model configuration files.
//!
//! ```toml
//! schema_version = 1
//!
//! [model]
//! eta = 1.0
//! theta = 1.0
//! mu = [1.0, 3.0]
//! x_min = 1e-6            # optional
//! allow_nonfeller = false # optional
//!
//! [model.q]
//! base = [0.0, 1.0, 2.0, 0.0]   # row-major N×N, diagonal ignored
//! slope = [0.0, 0.5, -1.0, 0.0] # optional, defaults to zeros
//! ```
//!
//! Rates are `q_ij(x) = base_ij + slope_ij · x/(1+x)`. Regimes are numbered
//! from 1 in messages. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use switchcir_core::model::{validate, DEFAULT_X_MIN};
use switchcir_core::{ModelSpec, RateMatrixField};
use toml::Spanned;

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: PathBuf,
    /// 1-based line, when the error can be located.
    pub line: Option<usize>,
    /// Dotted key path, when known.
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(key) = &self.key {
            write!(f, ": {key}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Spanned<i64>,
    model: RawModel,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    eta: Spanned<f64>,
    theta: Spanned<f64>,
    mu: Spanned<Vec<f64>>,
    x_min: Option<Spanned<f64>>,
    #[serde(default)]
    allow_nonfeller: bool,
    q: RawRates,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRates {
    base: Spanned<Vec<f64>>,
    slope: Option<Spanned<Vec<f64>>>,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub spec: ModelSpec,
    pub path: PathBuf,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

pub fn load(path: &Path, allow_nonfeller: bool) -> Result<LoadedConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError {
        file: path.to_path_buf(),
        line: None,
        key: None,
        message: format!("cannot read file: {e}"),
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| ConfigError {
        file: path.to_path_buf(),
        line: None,
        key: None,
        message: "file is not valid UTF-8".into(),
    })?;
    let spec = parse(&text, allow_nonfeller).map_err(|mut e| {
        e.file = path.to_path_buf();
        e
    })?;
    Ok(LoadedConfig {
        spec,
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Parses and validates configuration text. `allow_nonfeller` from the
/// command line overrides a `false` in the file.
pub fn parse(text: &str, allow_nonfeller: bool) -> Result<ModelSpec, ConfigError> {
    let err = |span: Option<std::ops::Range<usize>>, key: Option<&str>, message: String| ConfigError {
        file: PathBuf::new(),
        line: span.map(|s| line_of(text, s.start)),
        key: key.map(str::to_owned),
        message,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| err(e.span(), None, e.message().trim().to_owned()))?;

    if *raw.schema_version.get_ref() != SCHEMA_VERSION {
        return Err(err(
            Some(raw.schema_version.span()),
            Some("schema_version"),
            format!("unsupported schema version {}, expected {SCHEMA_VERSION}", raw.schema_version.get_ref()),
        ));
    }
    let m = raw.model;
    let n = m.mu.get_ref().len();
    if n == 0 {
        return Err(err(Some(m.mu.span()), Some("model.mu"), "needs at least one regime".into()));
    }
    let base = m.q.base.get_ref();
    if base.len() != n * n {
        return Err(err(
            Some(m.q.base.span()),
            Some("model.q.base"),
            format!("expected {} entries (row-major {n}x{n}), found {}", n * n, base.len()),
        ));
    }
    let slope = match &m.q.slope {
        Some(s) if s.get_ref().len() != n * n => {
            return Err(err(
                Some(s.span()),
                Some("model.q.slope"),
                format!("expected {} entries (row-major {n}x{n}), found {}", n * n, s.get_ref().len()),
            ))
        }
        Some(s) => s.get_ref().clone(),
        None => vec![0.0; n * n],
    };
    let q = RateMatrixField::new(n, base.clone(), slope)
        .map_err(|e| err(Some(m.q.base.span()), Some("model.q"), e.to_string()))?;
    let x_min = m.x_min.as_ref().map(|s| *s.get_ref()).unwrap_or(DEFAULT_X_MIN);
    let spec = ModelSpec::new(*m.eta.get_ref(), *m.theta.get_ref(), m.mu.get_ref().clone(), q)
        .with_x_min(x_min)
        .with_allow_nonfeller(m.allow_nonfeller || allow_nonfeller);

    let report = validate(&spec);
    if let Some(first) = report.errors.first() {
        // Point at the key most responsible for the first violation.
        let (key, span) = match first.key() {
            "model.eta" => ("model.eta", m.eta.span()),
            "model.theta" => ("model.theta", m.theta.span()),
            "model.x_min" => ("model.x_min", m.x_min.as_ref().map(|s| s.span()).unwrap_or(m.eta.span())),
            "model.mu" => ("model.mu", m.mu.span()),
            _ => ("model.q", m.q.base.span()),
        };
        return Err(err(Some(span), Some(key), report.summary()));
    }
    Ok(spec)
}
