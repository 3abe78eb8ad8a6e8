//! Numerical property suites: structural admissibility of the constitutive
//! family, FE exactness and derivative oracles. Shared by the command-line
//! release gate and the acceptance tests.

mod adjoint;
mod constitutive;
mod fem;

pub use adjoint::{adjoint_fd_error, adjoint_suite, AdjointSuiteOptions};
pub use constitutive::{
    admissibility_suite, derivative_oracle_suite, expected_softplus, init_slope_expectation, init_slope_statistic,
    init_statistics_suite, sample_architectures, AdmissibilityOptions, InitStatistic,
};
pub use fem::{convergence_order, fem_suite};

use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Constitutive,
    Fem,
    Adjoint,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Constitutive => "constitutive",
            Suite::Fem => "fem",
            Suite::Adjoint => "adjoint",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constitutive" => Ok(Suite::Constitutive),
            "fem" => Ok(Suite::Fem),
            "adjoint" => Ok(Suite::Adjoint),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite {s:?} (expected constitutive, fem, adjoint or all)")),
        }
    }
}

/// One measured property. `value` is compared against `tolerance` in the
/// direction given by `upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    /// `true` when the check requires `value < tolerance`.
    pub upper: bool,
    pub passed: bool,
    /// Advisory checks are reported but do not fail a suite.
    pub advisory: bool,
    pub detail: String,
}

impl Check {
    pub fn below(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, tolerance, true, value < tolerance)
    }

    pub fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, tolerance, false, value > tolerance)
    }

    /// A check that could not be evaluated.
    pub fn error(name: &str, detail: impl Into<String>) -> Self {
        let mut c = Self::new(name, f64::NAN, f64::NAN, true, false);
        c.detail = detail.into();
        c
    }

    fn new(name: &str, value: f64, tolerance: f64, upper: bool, passed: bool) -> Self {
        Self { name: name.into(), value, tolerance, upper, passed, advisory: false, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn advisory(mut self) -> Self {
        self.advisory = true;
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.advisory) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "WARN",
        };
        let op = if self.upper { "<" } else { ">" };
        write!(f, "{status} {} value={:.3e} required{op}{:.3e}", self.name, self.value, self.tolerance)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.advisory)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub admissibility: AdmissibilityOptions,
    pub oracle_cases: usize,
    pub init_draws: usize,
    pub adjoint: AdjointSuiteOptions,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            admissibility: AdmissibilityOptions::default(),
            oracle_cases: 50,
            init_draws: 100_000,
            adjoint: AdjointSuiteOptions::default(),
        }
    }
}

fn timed(suite: Suite, f: impl FnOnce() -> Vec<Check>) -> SuiteReport {
    let t = Instant::now();
    let checks = f();
    SuiteReport { suite, checks, seconds: t.elapsed().as_secs_f64() }
}

/// Runs one suite, or every suite for [`Suite::All`].
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Vec<SuiteReport> {
    match suite {
        Suite::Constitutive => vec![timed(suite, || {
            let mut c = admissibility_suite(&opts.admissibility, opts.seed);
            c.extend(derivative_oracle_suite(opts.oracle_cases, opts.seed));
            c.extend(init_statistics_suite(opts.init_draws, opts.seed));
            c
        })],
        Suite::Fem => vec![timed(suite, fem_suite)],
        Suite::Adjoint => vec![timed(suite, || adjoint_suite(&opts.adjoint, opts.seed))],
        Suite::All => [Suite::Constitutive, Suite::Fem, Suite::Adjoint].into_iter().flat_map(|s| run_suite(s, opts)).collect(),
    }
}
