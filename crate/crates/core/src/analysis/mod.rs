//! Error metrics, principal-stretch clouds, Sinkhorn divergences and plot
//! data.

mod export;
mod sinkhorn;
mod stretch;

pub use export::{
    boxplot_csv, boxplot_groups, boxplot_stats, canonical_curves, canonical_curves_csv, export_plot_data, load_reaction_csv, percentile,
    stretch_csv, svg_boxplot, svg_lines, svg_scatter, BoxStats, EvaluationArtifact, ExportedFiles, BOXPLOT_HEADER, CANONICAL_HEADER,
    LOAD_REACTION_HEADER, STRETCH_HEADER,
};
pub use sinkhorn::{default_epsilon, sinkhorn_divergence, subsample, SinkhornOptions, DEFAULT_MAX_SAMPLES};
pub use stretch::{stretch_cloud, StretchCloud};

use crate::constitutive::ConstitutiveModel;
use crate::experiments::{solve_experiments, Experiment};
use crate::fem::{reaction_force_full, EquilibriumSolution, FemError, NewtonOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("reference displacements have zero variance")]
    DegenerateVariance,
    #[error("metric needs at least two aligned points (got {predicted} predicted, {reference} reference)")]
    BadInput { predicted: usize, reference: usize },
    #[error("Sinkhorn iterations did not converge (marginal error {0:.3e})")]
    NoConvergence(f64),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing artifact {0}")]
    MissingArtifacts(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("forward solve failed: {0}")]
    Solve(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed artifact: {0}")]
    Malformed(String),
}

/// Displacement error statistics against a reference field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vrmse {
    pub n: usize,
    pub rmse: f64,
    pub variance: f64,
    pub vrmse: f64,
}

/// `RMSE / sqrt(Var(reference))` with `Var = mean ‖d̂ − mean(d̂)‖²`.
pub fn vrmse(predicted: &[[f64; 3]], reference: &[[f64; 3]]) -> Result<Vrmse, AnalysisError> {
    let n = reference.len();
    if predicted.len() != n || n < 2 {
        return Err(AnalysisError::BadInput { predicted: predicted.len(), reference: n });
    }
    let nf = n as f64;
    let mut mean = [0.0; 3];
    for d in reference {
        for c in 0..3 {
            mean[c] += d[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= nf);
    let sq = |a: &[f64; 3], b: &[f64; 3]| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>();
    let variance = reference.iter().map(|d| sq(d, &mean)).sum::<f64>() / nf;
    if !(variance > 0.0) {
        return Err(AnalysisError::DegenerateVariance);
    }
    let rmse = (predicted.iter().zip(reference).map(|(p, r)| sq(p, r)).sum::<f64>() / nf).sqrt();
    Ok(Vrmse { n, rmse, variance, vrmse: rmse / variance.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionComparison {
    pub tag: String,
    pub truth: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub setup_id: u8,
    pub geometry_id: usize,
    pub load: f64,
    pub metrics: Vrmse,
    pub reactions: Vec<ReactionComparison>,
    /// Nodal displacement error norms.
    pub point_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    /// Statistics over all nodes of all experiments pooled.
    pub pooled: Vrmse,
    /// Average of the per-experiment vRMSE values.
    pub mean_vrmse: f64,
    pub per_experiment: Vec<ExperimentMetrics>,
}

impl MetricReport {
    pub fn max_reaction_rel_error(&self) -> f64 {
        self.per_experiment.iter().flat_map(|e| &e.reactions).map(|r| r.rel_error).fold(0.0, f64::max)
    }
}

fn nodal(e: &Experiment, full: &[f64]) -> Vec<[f64; 3]> {
    let dim = e.space.dim();
    (0..e.space.mesh().n_nodes())
        .map(|n| {
            let mut d = [0.0; 3];
            d[..dim].copy_from_slice(&full[dim * n..dim * n + dim]);
            d
        })
        .collect()
}

/// Compares `model` against reference equilibria at every mesh node.
pub fn compare_solutions(
    experiments: &[Experiment],
    truth_model: &ConstitutiveModel,
    truth: &[EquilibriumSolution],
    model: &ConstitutiveModel,
    predicted: &[EquilibriumSolution],
) -> Result<MetricReport, AnalysisError> {
    let mut per_experiment = Vec::with_capacity(experiments.len());
    let mut all_pred = Vec::new();
    let mut all_ref = Vec::new();
    for ((e, t), p) in experiments.iter().zip(truth).zip(predicted) {
        let ft = t.full(&e.space);
        let fp = p.full(&e.space);
        let dt = nodal(e, &ft);
        let dp = nodal(e, &fp);
        let metrics = vrmse(&dp, &dt)?;
        let mut reactions = Vec::new();
        for tag in e.bc.dirichlet_tags() {
            let rt = reaction_force_full(&e.space, &e.bc, truth_model, &ft, &tag)?;
            let rp = reaction_force_full(&e.space, &e.bc, model, &fp, &tag)?;
            let rel_error = if rt != 0.0 { (rp - rt).abs() / rt.abs() } else { (rp - rt).abs() };
            reactions.push(ReactionComparison { tag, truth: rt, predicted: rp, rel_error });
        }
        let point_errors = dp.iter().zip(&dt).map(|(a, b)| (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt()).collect();
        per_experiment.push(ExperimentMetrics {
            setup_id: e.setup_id,
            geometry_id: e.geometry_id,
            load: e.load,
            metrics,
            reactions,
            point_errors,
        });
        all_pred.extend(dp);
        all_ref.extend(dt);
    }
    let pooled = vrmse(&all_pred, &all_ref)?;
    let mean_vrmse = per_experiment.iter().map(|e| e.metrics.vrmse).sum::<f64>() / per_experiment.len().max(1) as f64;
    Ok(MetricReport { model: model.label(), pooled, mean_vrmse, per_experiment })
}

/// Solves the test experiments with both models and compares them.
pub fn evaluate_model(
    experiments: &[Experiment],
    truth_model: &ConstitutiveModel,
    model: &ConstitutiveModel,
    newton: &NewtonOptions,
) -> Result<MetricReport, AnalysisError> {
    let truth = solve_experiments(experiments, truth_model, newton).map_err(|e| AnalysisError::Solve(e.to_string()))?;
    let predicted = solve_experiments(experiments, model, newton).map_err(|e| AnalysisError::Solve(e.to_string()))?;
    compare_solutions(experiments, truth_model, &truth, model, &predicted)
}
