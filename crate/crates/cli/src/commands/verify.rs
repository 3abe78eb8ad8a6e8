use super::{required, write_file};
use crate::config::ConfigFile;
use crate::error::{Category, CliError, Result};
use clap::Args;
use ndfem::verify::{run_suite, AdjointSuiteOptions, AdmissibilityOptions, Suite, VerifyOptions};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyArgs {
    /// constitutive, fem, adjoint or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// Seed of the random draws.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Smaller sample counts for a fast smoke run.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub quick: Option<bool>,
    /// Optional JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn options(seed: u64, quick: bool) -> VerifyOptions {
    let base = VerifyOptions { seed, ..VerifyOptions::default() };
    if !quick {
        return base;
    }
    VerifyOptions {
        admissibility: AdmissibilityOptions { draws: 14, rotations: 100, segments: 1000 },
        oracle_cases: 10,
        init_draws: 20_000,
        adjoint: AdjointSuiteOptions { points: 3, ..AdjointSuiteOptions::default() },
        ..base
    }
}

/// Runs the property suites; any failed non-advisory check is a property
/// failure.
pub fn properties(cfg: &ConfigFile, flags: &VerifyArgs) -> Result<()> {
    let mut a = cfg.resolve("verify_properties", flags)?;
    let suite: Suite = required(a.suite.clone(), "suite")?.parse().map_err(CliError::config)?;
    let seed = *a.seed.get_or_insert(0);
    let quick = *a.quick.get_or_insert(false);
    let reports = run_suite(suite, &options(seed, quick));
    let mut failed = Vec::new();
    for r in &reports {
        for c in &r.checks {
            println!("{} {c}", r.suite.name());
            if !c.passed && !c.advisory {
                failed.push(format!("{}/{}", r.suite.name(), c.name));
            }
        }
        log::info!("suite done suite={} checks={} passed={} seconds={:.1}", r.suite.name(), r.checks.len(), r.passed(), r.seconds);
    }
    if let Some(out) = &a.out {
        write_file(out, serde_json::to_string_pretty(&reports).map_err(|e| CliError::data(e.to_string()))?)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(Category::Property, format!("failed checks: {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_options_shrink_every_sample_count() {
        let (q, f) = (options(3, true), options(3, false));
        assert_eq!(q.seed, 3);
        assert!(q.admissibility.draws < f.admissibility.draws);
        assert!(q.oracle_cases < f.oracle_cases);
        assert!(q.init_draws < f.init_draws);
        assert!(q.adjoint.points < f.adjoint.points);
    }
}
