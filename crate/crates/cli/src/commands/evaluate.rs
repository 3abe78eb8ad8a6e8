use super::{analytic, check_setup, create_dir, newton, parse_material, parse_resolution, required, write_file};
use crate::config::{write_snapshot, ConfigFile};
use crate::error::{CliError, Result};
use clap::Args;
use ndfem::analysis::{evaluate_model, load_reaction_csv, EvaluationArtifact, MetricReport};
use ndfem::constitutive::{deserialize_model, Checkpoint, CheckpointMeta, ConstitutiveModel};
use ndfem::experiments::build_setup;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateArgs {
    /// Model checkpoint (for example `model.json` of a training run).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Test setup id, 1 to 6.
    #[arg(long)]
    pub setup: Option<u8>,
    /// `reference`, `coarse` (default) or an element size.
    #[arg(long)]
    pub resolution: Option<String>,
    /// Geometry seed of the test setup.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Reference law (ih, mr, fu, nh); defaults to the ground truth recorded
    /// in the checkpoint.
    #[arg(long)]
    pub truth: Option<String>,
    /// Name used in the output files; defaults to `setup<N>`.
    #[arg(long)]
    pub label: Option<String>,
    /// Newton absolute residual tolerance.
    #[arg(long)]
    pub abs_tol: Option<f64>,
    /// Newton relative residual tolerance.
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Newton iterations per load step.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn reference_model(truth: Option<&str>, meta: &CheckpointMeta) -> Result<ConstitutiveModel> {
    if let Some(t) = truth {
        return Ok(analytic(parse_material(t)?));
    }
    let recorded = meta
        .provenance
        .get("ground_truth")
        .ok_or_else(|| CliError::config("checkpoint records no ground truth; pass --truth"))?;
    let c: Checkpoint = serde_json::from_str(recorded).map_err(|e| CliError::data(format!("recorded ground truth: {e}")))?;
    Ok(c.to_model()?)
}

pub fn metrics_csv(report: &MetricReport) -> String {
    let mut s = String::from("setup,geometry,load,n,rmse,variance,vrmse,max_reaction_rel_error\n");
    for e in &report.per_experiment {
        let worst = e.reactions.iter().map(|r| r.rel_error).fold(0.0, f64::max);
        let m = &e.metrics;
        let _ = writeln!(
            s,
            "{},{},{},{},{:.17e},{:.17e},{:.17e},{worst:.17e}",
            e.setup_id, e.geometry_id, e.load, m.n, m.rmse, m.variance, m.vrmse
        );
    }
    s
}

pub fn evaluate(cfg: &ConfigFile, flags: &EvaluateArgs) -> Result<()> {
    let mut a = cfg.resolve("evaluate", flags)?;
    let path = required(a.model.clone(), "model")?;
    let setup = check_setup(required(a.setup, "setup")?)?;
    let out = required(a.out.clone(), "out")?;
    let resolution = parse_resolution(a.resolution.get_or_insert_with(|| "coarse".into()))?;
    let seed = *a.seed.get_or_insert(0);
    let label = a.label.get_or_insert_with(|| format!("setup{setup}")).clone();
    if label.is_empty() || label.contains(['/', '\\']) {
        return Err(CliError::config(format!("label {label:?} must be a plain file-name fragment")));
    }
    let opts = newton(a.abs_tol, a.rel_tol, a.max_iters)?;
    (a.abs_tol, a.rel_tol, a.max_iters) = (Some(opts.abs_tol), Some(opts.rel_tol), Some(opts.max_iters));

    let bytes = std::fs::read(&path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let (model, meta) = deserialize_model(&bytes).map_err(|e| CliError::from(e).context(path.display()))?;
    let truth = reference_model(a.truth.as_deref(), &meta)?;
    let sigma_noise = meta.provenance.get("sigma_noise").and_then(|s| s.parse::<f64>().ok()).unwrap_or(0.0);

    create_dir(&out)?;
    write_snapshot(&out.join(format!("evaluate-{label}.config.toml")), "evaluate", "evaluate", &a)?;
    let exps = build_setup(setup, resolution, seed)?;
    log::info!("evaluate setup={setup} experiments={} nodes={} model={}", exps.len(), exps[0].space.mesh().n_nodes(), model.label());
    let report = evaluate_model(&exps, &truth, &model, &opts)?;
    write_file(&out.join(format!("metrics-{label}.csv")), metrics_csv(&report))?;
    write_file(&out.join(format!("reactions-{label}.csv")), load_reaction_csv(&[(sigma_noise, &report)]))?;
    let artifact = EvaluationArtifact { sigma_noise, report };
    let json = serde_json::to_string_pretty(&artifact).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&out.join(format!("evaluation-{label}.json")), json)?;
    let r = &artifact.report;
    log::info!(
        "evaluate done label={label} mean_vrmse={:.6e} pooled_vrmse={:.6e} max_reaction_rel_error={:.3e}",
        r.mean_vrmse,
        r.pooled.vrmse,
        r.max_reaction_rel_error()
    );
    println!("mean_vrmse={:.9e}", r.mean_vrmse);
    Ok(())
}
