use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use carpet::geometry::DEFAULT_MAX_LEVEL;

/// A problem with the command line or configuration file.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Whether small instances are also solved in exact rational arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Numbers {
    Auto,
    Float,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Level, or largest level, of the computation.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub level: Option<u32>,
    /// Relative residual tolerance of the iterative solver.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Resistance scaling factor; estimated from R_V when absent.
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Output directory for reports.
    #[arg(long, global = true, env = "CARPET_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub numbers: Option<Numbers>,
    /// Key-value configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Config {
    pub level: Option<u32>,
    pub tol: f64,
    pub max_iterations: Option<usize>,
    #[serde(skip)]
    pub threads: Option<usize>,
    pub seed: u64,
    pub rho: Option<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    pub format: Format,
    pub numbers: Numbers,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            level: None,
            tol: 1e-10,
            max_iterations: None,
            threads: None,
            seed: 1,
            rho: None,
            out: PathBuf::from("reports"),
            format: Format::Json,
            numbers: Numbers::Auto,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .or_else(|_| usage(format!("invalid value {value:?} for {key}")))
}

impl Config {
    /// Defaults, then the file, then command-line overrides.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let mut cfg = Config::default();
        if let Some(path) = &o.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = o.level {
            cfg.level = Some(v);
        }
        if let Some(v) = o.tol {
            cfg.tol = v;
        }
        if let Some(v) = o.max_iterations {
            cfg.max_iterations = Some(v);
        }
        if let Some(v) = o.threads {
            cfg.threads = Some(v);
        }
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.rho {
            cfg.rho = Some(v);
        }
        if let Some(v) = &o.out {
            cfg.out = v.clone();
        }
        if let Some(v) = o.format {
            cfg.format = v;
        }
        if let Some(v) = o.numbers {
            cfg.numbers = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => return usage(format!("cannot read {}: {e}", path.display())),
        };
        self.apply_text(&text)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("line {}: expected key = value", lineno + 1));
            };
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            match key.as_str() {
                "level" => self.level = Some(parse(&key, value)?),
                "tol" => self.tol = parse(&key, value)?,
                "max_iterations" => self.max_iterations = Some(parse(&key, value)?),
                "threads" => self.threads = Some(parse(&key, value)?),
                "seed" => self.seed = parse(&key, value)?,
                "rho" => self.rho = Some(parse(&key, value)?),
                "out" => self.out = PathBuf::from(value),
                "format" => {
                    self.format = Format::from_str(value, true).or_else(|e| usage(format!("format: {e}")))?
                }
                "numbers" => {
                    self.numbers = Numbers::from_str(value, true).or_else(|e| usage(format!("numbers: {e}")))?
                }
                _ => return usage(format!("line {}: unknown key {key:?}", lineno + 1)),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return usage("tol must be positive");
        }
        if self.level == Some(0) {
            return usage("level must be at least 1");
        }
        if self.threads == Some(0) {
            return usage("threads must be at least 1");
        }
        if let Some(r) = self.rho {
            if !(r > 1.0 && r.is_finite()) {
                return usage("rho must exceed 1");
            }
        }
        Ok(())
    }

    /// The configured level or the command default, checked against `cap`.
    pub fn level_or(&mut self, default: u32, cap: u32) -> Result<u32> {
        let level = self.level.unwrap_or(default);
        if level > cap {
            return usage(format!("level {level} exceeds the capacity {cap} of this command"));
        }
        self.level = Some(level);
        Ok(level)
    }

    pub fn solver(&self) -> carpet::solver::SolverOptions {
        let mut opts = carpet::solver::SolverOptions::with_tol(self.tol);
        opts.max_iterations = self.max_iterations;
        opts
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Serialize)]
pub struct Provenance {
    pub version: &'static str,
    pub config_hash: String,
    pub caps: Caps,
}

#[derive(Debug, Serialize)]
pub struct Caps {
    pub max_level: u32,
    pub rational_max_level: u32,
    pub exact_node_cap: usize,
    pub max_sample_level: u32,
}

impl Provenance {
    pub fn of(cfg: &Config) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash(),
            caps: Caps {
                max_level: DEFAULT_MAX_LEVEL,
                rational_max_level: carpet::special::RATIONAL_MAX_LEVEL,
                exact_node_cap: carpet::solver::exact::EXACT_NODE_CAP,
                max_sample_level: carpet::energy::MAX_SAMPLE_LEVEL,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut cfg = Config::default();
        cfg.apply_text("# comment\nlevel = 3\ntol=1e-8\nformat = csv\nmax-iterations = 10\n")
            .unwrap();
        assert_eq!(cfg.level, Some(3));
        assert_eq!(cfg.format, Format::Csv);
        assert_eq!(cfg.max_iterations, Some(10));
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("level").is_err());
        assert!(cfg.apply_text("tol = fast").is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = Config::default();
        let b = Config {
            out: PathBuf::from("elsewhere"),
            threads: Some(3),
            ..Config::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = Config {
            seed: 2,
            ..Config::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn validation() {
        let bad = Config {
            tol: -1.0,
            ..Config::default()
        };
        assert!(bad.validate().is_err());
        let mut cfg = Config::default();
        assert_eq!(cfg.level_or(4, 7).unwrap(), 4);
        assert!(Config::default().level_or(9, 7).is_err());
    }
}
