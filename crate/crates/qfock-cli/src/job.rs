//! Spec-file loading and option resolution.
//!
//! A job file is strict JSON: `schema_version` (currently 1), an optional
//! `command` that must match the invoked subcommand, the constant `c`,
//! named function specs, and an `options` table. Command-line flags win
//! over file options.

use std::collections::BTreeMap;
use std::path::Path;

use qfock::num::{rat_is_nonnegative, Rat, RealScalar};
use qfock::schema::{AnyFunction, FunctionSpec, NumberLit};
use qfock::{Error, Result};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobFile {
    pub schema_version: u32,
    #[serde(default)]
    pub command: Option<String>,
    pub c: NumberLit,
    #[serde(default)]
    pub functions: BTreeMap<String, FunctionSpec>,
    #[serde(default)]
    pub options: JobOptions,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobOptions {
    pub tol: Option<f64>,
    pub n: Option<u32>,
    pub n_max: Option<u32>,
    /// Names of the functions playing f and g; default "f" and "g".
    pub f: Option<String>,
    pub g: Option<String>,
    /// Gram family; default: every function, sorted by name.
    pub family: Option<Vec<String>>,
    /// Disjoint cell-id sets for factorization-style splits.
    pub split: Option<Vec<Vec<String>>>,
    pub rho_min: Option<f64>,
    pub rho_max: Option<f64>,
    pub rho_steps: Option<u32>,
    pub seed: Option<u64>,
}

impl JobFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ParseError(format!("cannot read {}: {e}", path.display())))?;
        let file: JobFile = serde_json::from_str(&text)
            .map_err(|e| Error::ParseError(format!("{}: {e}", path.display())))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::ParseError(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let positive = match &file.c {
            NumberLit::Exact(r) => rat_is_nonnegative(r) && !r.eq(&Rat::ratio(0, 1)),
            NumberLit::Float(x) => *x > 0.0,
        };
        if !positive {
            return Err(Error::ParseError("c must be positive".into()));
        }
        Ok(file)
    }

    /// The file's `command`, when present, must match the subcommand.
    pub fn check_command(&self, invoked: &str) -> Result<()> {
        match &self.command {
            Some(cmd) if cmd != invoked => Err(Error::ParseError(format!(
                "spec file is for command {cmd:?}, invoked as {invoked:?}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn c_f64(&self) -> f64 {
        self.c.to_f64()
    }

    pub fn c_exact(&self) -> Result<Rat> {
        self.c.as_exact().cloned().ok_or_else(|| {
            Error::NonRationalInput("this command needs c as an exact rational".into())
        })
    }

    pub fn function(&self, name: &str) -> Result<AnyFunction> {
        let spec = self.functions.get(name).ok_or_else(|| {
            Error::ParseError(format!("spec file defines no function named {name:?}"))
        })?;
        spec.build(name)
    }

    /// All functions, sorted by name.
    pub fn all_functions(&self) -> Result<Vec<(String, AnyFunction)>> {
        self.functions
            .iter()
            .map(|(name, spec)| Ok((name.clone(), spec.build(name)?)))
            .collect()
    }
}

/// Effective options for one run: flag, then file option, then default.
#[derive(Debug, Clone)]
pub struct Effective {
    pub tol: f64,
    pub n: Option<u32>,
    pub n_max: u32,
    pub seed: u64,
    pub jobs: usize,
}

impl Effective {
    pub fn resolve(
        file: &JobFile,
        tol: Option<f64>,
        n: Option<u32>,
        n_max: Option<u32>,
        seed: Option<u64>,
        jobs: Option<usize>,
    ) -> Result<Self> {
        let tol = tol.or(file.options.tol).unwrap_or(qfock::fock::DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::ParseError(format!("tol must be positive, got {tol}")));
        }
        let jobs = jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(Error::ParseError("jobs must be at least 1".into()));
        }
        Ok(Effective {
            tol,
            n: n.or(file.options.n),
            n_max: n_max.or(file.options.n_max).unwrap_or(qfock::fock::DEFAULT_N_MAX),
            seed: seed.or(file.options.seed).unwrap_or(0),
            jobs,
        })
    }

    pub fn require_n(&self) -> Result<u32> {
        self.n.ok_or_else(|| {
            Error::ParseError("this command needs an order: pass --n or set options.n".into())
        })
    }
}
