//! Experiment configuration and the flat `key = value` config file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use sgfs::solvers::stack::Variant;

use crate::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Md,
    Json,
}

impl FromStr for OutputFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "md" | "markdown" => Ok(Self::Md),
            "json" => Ok(Self::Json),
            other => Err(BenchError::Config(format!("unknown output format '{other}'"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Md => "md",
            Self::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub level: usize,
    pub sigma: f64,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    #[serde(serialize_with = "serialize_variants")]
    pub variants: Vec<Variant>,
    pub atol: f64,
    pub rtol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub mu: f64,
    pub a_min: f64,
    pub corr_len: f64,
    /// Mesh level of the KL eigenproblem; the solve level when unset.
    pub kl_level: Option<usize>,
    pub richardson_iters: usize,
    pub ilu_shift: bool,
    pub format: OutputFormat,
    pub seed: u64,
    /// Zero all timings and timestamps so that result files are reproducible
    /// byte for byte.
    pub no_timings: bool,
}

fn serialize_variants<S: serde::Serializer>(v: &[Variant], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|v| v.name()))
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            level: 3,
            sigma: 0.08,
            p: 4,
            q: 5,
            n: 2,
            variants: Variant::ALL.to_vec(),
            atol: 1e-10,
            rtol: 1e-10,
            restart: 30,
            max_iter: 2000,
            mu: 0.0,
            a_min: 0.01,
            corr_len: 0.1,
            kl_level: None,
            richardson_iters: 50,
            ilu_shift: false,
            format: OutputFormat::Csv,
            seed: 42,
            no_timings: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| BenchError::Config(format!("cannot parse '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(BenchError::Config(format!("cannot parse '{value}' for '{key}'"))),
    }
}

pub fn parse_variants(value: &str) -> Result<Vec<Variant>> {
    let value = value.trim();
    if value.is_empty() || value.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    if value.eq_ignore_ascii_case("all") {
        return Ok(Variant::ALL.to_vec());
    }
    value
        .split(',')
        .map(|s| s.parse::<Variant>().map_err(BenchError::from))
        .collect()
}

impl ExperimentConfig {
    /// Sets one field by name; `-` and `_` are interchangeable in keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key_norm = key.trim().to_ascii_lowercase().replace('-', "_");
        match key_norm.as_str() {
            "level" | "l" => self.level = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "p" | "p_order" => self.p = parse(key, value)?,
            "q" | "q_order" => self.q = parse(key, value)?,
            "n" | "stoch_dim" => self.n = parse(key, value)?,
            "precond" | "variants" => self.variants = parse_variants(value)?,
            "atol" => self.atol = parse(key, value)?,
            "rtol" => self.rtol = parse(key, value)?,
            "restart" => self.restart = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "mu" => self.mu = parse(key, value)?,
            "a_min" => self.a_min = parse(key, value)?,
            "corr_len" | "lc" => self.corr_len = parse(key, value)?,
            "kl_level" => self.kl_level = Some(parse(key, value)?),
            "richardson_iters" => self.richardson_iters = parse(key, value)?,
            "ilu_shift" => self.ilu_shift = parse_bool(key, value)?,
            "format" => self.format = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "no_timings" => self.no_timings = parse_bool(key, value)?,
            _ => return Err(BenchError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` starts a
    /// comment.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                BenchError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_file_contents(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.level == 0 {
            return bad("level must be >= 1");
        }
        if self.n == 0 {
            return bad("stochastic dimension must be >= 1");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.atol >= 0.0 && self.rtol >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        if self.restart == 0 {
            return bad("restart must be >= 1");
        }
        if self.kl_level == Some(0) {
            return bad("KL level must be >= 1");
        }
        Ok(())
    }

    pub fn kl_mesh_level(&self) -> usize {
        self.kl_level.unwrap_or(self.level)
    }
}
