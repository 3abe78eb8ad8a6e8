//! Model discovery from displacement and reaction data: loss, discrete
//! adjoint gradient, BFGS training and hyperparameter search.

mod bfgs;
mod search;

pub use bfgs::{bfgs_train, bfgs_train_observed, EpochRecord, StopReason, TrainOptions, TrainResult};
pub use search::{
    calibrate_analytic, grid_search, multi_seed_train, select_best, ArchitectureGrid, CandidateReport, GridReport, MultiSeedResult,
    SeedSummary,
};

use crate::constitutive::{ConstitutiveError, ConstitutiveModel};
use crate::experiments::{solve_experiments, Experiment, ExperimentError, SyntheticDataset};
use crate::fem::{
    assemble_tangent, locate_points, newton_solve, reaction_sensitivity, residual_param_vjp, EquilibriumSolution,
    FemError, NewtonOptions, SparseLu,
};
use crate::mesh::Point;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum DiscoveryError {
    #[error("equilibrium solve failed for experiment {experiment}: {reason}")]
    SolveFailure { experiment: usize, reason: String },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("observation targets do not match experiments: {0}")]
    Misaligned(String),
    #[error("every training run failed: {0}")]
    AllSeedsFailed(String),
}

/// Observed data for one experiment. Each observation point is a weighted
/// combination of nodal displacements; points at mesh nodes use a single
/// node with weight exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentTarget {
    pub picks: Vec<Vec<(usize, f64)>>,
    pub displacements: Vec<[f64; 3]>,
    /// `(Dirichlet tag, observed reaction)`.
    pub reactions: Vec<(String, f64)>,
}

/// Experiments together with the data they are fitted against.
#[derive(Debug, Clone)]
pub struct TrainingProblem {
    pub experiments: Vec<Experiment>,
    pub targets: Vec<ExperimentTarget>,
    pub alpha_r: f64,
    pub newton: NewtonOptions,
}

/// `α_R = Σ‖d̃‖² / Σ R̃²`, zero without reaction data.
pub fn reaction_weight(targets: &[ExperimentTarget]) -> f64 {
    let d: f64 = targets.iter().flat_map(|t| &t.displacements).map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum();
    let r: f64 = targets.iter().flat_map(|t| &t.reactions).map(|(_, x)| x * x).sum();
    if r > 0.0 {
        d / r
    } else {
        0.0
    }
}

impl TrainingProblem {
    pub fn new(experiments: Vec<Experiment>, targets: Vec<ExperimentTarget>, newton: NewtonOptions) -> Result<Self, DiscoveryError> {
        if experiments.len() != targets.len() {
            return Err(DiscoveryError::Misaligned(format!("{} experiments, {} targets", experiments.len(), targets.len())));
        }
        for (i, (e, t)) in experiments.iter().zip(&targets).enumerate() {
            let n = e.space.mesh().n_nodes();
            if t.picks.len() != t.displacements.len() || t.picks.iter().flatten().any(|&(k, _)| k >= n) {
                return Err(DiscoveryError::Misaligned(format!("experiment {i}: bad observation operator")));
            }
            let dirichlet = e.bc.dirichlet_tags();
            if let Some((tag, _)) = t.reactions.iter().find(|(tag, _)| !dirichlet.contains(tag)) {
                return Err(DiscoveryError::Misaligned(format!("experiment {i}: reaction tag {tag:?} is not Dirichlet")));
            }
        }
        let alpha_r = reaction_weight(&targets);
        Ok(Self { experiments, targets, alpha_r, newton })
    }

    /// Trains on the dataset's own meshes.
    pub fn from_dataset(ds: &SyntheticDataset) -> Result<Self, DiscoveryError> {
        let targets = ds
            .observations
            .iter()
            .map(|o| ExperimentTarget {
                picks: o.nodes.iter().map(|&n| vec![(n, 1.0)]).collect(),
                displacements: o.displacements.clone(),
                reactions: o.reactions.clone(),
            })
            .collect();
        Self::new(ds.experiments.clone(), targets, ds.meta.newton)
    }

    /// Trains on different meshes of the same specimens, interpolating at the
    /// observed points.
    pub fn on_meshes(ds: &SyntheticDataset, experiments: Vec<Experiment>) -> Result<Self, DiscoveryError> {
        if experiments.len() != ds.observations.len() {
            return Err(DiscoveryError::Misaligned("experiment count differs from dataset".into()));
        }
        let mut targets = Vec::with_capacity(experiments.len());
        for (e, o) in experiments.iter().zip(&ds.observations) {
            let pts: Vec<Point> = o.points.clone();
            let locs = locate_points(&e.space, &pts)?;
            let dim = e.space.dim();
            let picks = locs
                .iter()
                .map(|l| {
                    let cell = e.space.mesh().cell(l.cell);
                    (0..=dim).map(|a| (cell[a], l.weights[a])).collect()
                })
                .collect();
            targets.push(ExperimentTarget { picks, displacements: o.displacements.clone(), reactions: o.reactions.clone() });
        }
        Self::new(experiments, targets, ds.meta.newton)
    }

    pub fn n_experiments(&self) -> usize {
        self.experiments.len()
    }

    /// `Σ‖d̃‖²`, the natural scale of the loss.
    pub fn data_scale(&self) -> f64 {
        self.targets.iter().flat_map(|t| &t.displacements).map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub displacement_term: f64,
    pub reaction_term: f64,
    pub alpha_r: f64,
    pub total: f64,
    pub per_experiment: Vec<f64>,
}

/// Predicted displacement at each observation point.
pub fn predict(target: &ExperimentTarget, dim: usize, full: &[f64]) -> Vec<[f64; 3]> {
    target
        .picks
        .iter()
        .map(|p| {
            let mut d = [0.0; 3];
            for (c, dc) in d.iter_mut().enumerate().take(dim) {
                *dc = p.iter().map(|&(n, w)| w * full[dim * n + c]).sum();
            }
            d
        })
        .collect()
}

/// Solves every experiment. Without warm starts the loads are ramped by
/// continuation; with warm starts a single Newton solve per experiment is
/// attempted and any failure is reported.
pub fn solve_all(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    warm: Option<&[EquilibriumSolution]>,
) -> Result<Vec<EquilibriumSolution>, DiscoveryError> {
    match warm {
        None => solve_experiments(&problem.experiments, model, &problem.newton)
            .map_err(|e| DiscoveryError::SolveFailure { experiment: 0, reason: e.to_string() }),
        Some(warm) => {
            let sols: Vec<EquilibriumSolution> = problem
                .experiments
                .par_iter()
                .zip(warm)
                .map(|(e, w)| newton_solve(&e.space, &e.bc, model, &w.dofs, e.load, &problem.newton))
                .collect();
            if let Some((i, s)) = sols.iter().enumerate().find(|(_, s)| !s.converged) {
                return Err(DiscoveryError::SolveFailure {
                    experiment: i,
                    reason: s.failure.clone().unwrap_or_else(|| "not converged".into()),
                });
            }
            Ok(sols)
        }
    }
}

/// `(Σ‖d̃ − d‖², Σ (R̃ − R)²)` for predicted and observed values.
pub fn misfit_terms(pred: &[[f64; 3]], obs: &[[f64; 3]], r_pred: &[f64], r_obs: &[f64]) -> (f64, f64) {
    let d = pred.iter().zip(obs).map(|(p, o)| (0..3).map(|c| (o[c] - p[c]).powi(2)).sum::<f64>()).sum();
    let r = r_pred.iter().zip(r_obs).map(|(p, o)| (o - p).powi(2)).sum();
    (d, r)
}

struct ExperimentLoss {
    displacement: f64,
    reaction: f64,
}

fn experiment_loss(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    i: usize,
    sol: &EquilibriumSolution,
) -> Result<ExperimentLoss, DiscoveryError> {
    let e = &problem.experiments[i];
    let t = &problem.targets[i];
    let full = sol.full(&e.space);
    let pred = predict(t, e.space.dim(), &full);
    let observed: Vec<f64> = t.reactions.iter().map(|(_, r)| *r).collect();
    let mut predicted = Vec::with_capacity(observed.len());
    for (tag, _) in &t.reactions {
        predicted.push(reaction_sensitivity(&e.space, &e.bc, model, &full, tag, false)?.value);
    }
    let (displacement, reaction) = misfit_terms(&pred, &t.displacements, &predicted, &observed);
    Ok(ExperimentLoss { displacement, reaction })
}

/// `Σ‖d̃ − d_h‖² + α_R Σ (R̃ − R)²` at given equilibria.
pub fn loss_from_solutions(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    sols: &[EquilibriumSolution],
) -> Result<LossBreakdown, DiscoveryError> {
    let parts: Vec<Result<ExperimentLoss, DiscoveryError>> =
        (0..problem.n_experiments()).into_par_iter().map(|i| experiment_loss(problem, model, i, &sols[i])).collect();
    let mut out = LossBreakdown {
        displacement_term: 0.0,
        reaction_term: 0.0,
        alpha_r: problem.alpha_r,
        total: 0.0,
        per_experiment: Vec::with_capacity(parts.len()),
    };
    for p in parts {
        let p = p?;
        out.displacement_term += p.displacement;
        out.reaction_term += p.reaction;
        out.per_experiment.push(p.displacement + problem.alpha_r * p.reaction);
    }
    out.total = out.displacement_term + problem.alpha_r * out.reaction_term;
    Ok(out)
}

/// Solves (from `warm` when given) and evaluates the loss.
pub fn evaluate_loss(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    warm: Option<&[EquilibriumSolution]>,
) -> Result<(LossBreakdown, Vec<EquilibriumSolution>), DiscoveryError> {
    let sols = solve_all(problem, model, warm)?;
    let loss = loss_from_solutions(problem, model, &sols)?;
    Ok((loss, sols))
}

fn experiment_gradient(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    i: usize,
    sol: &EquilibriumSolution,
) -> Result<Vec<f64>, DiscoveryError> {
    let e = &problem.experiments[i];
    let t = &problem.targets[i];
    let space = &e.space;
    let dim = space.dim();
    let full = sol.full(space);
    let pred = predict(t, dim, &full);
    let mut g_full = vec![0.0; space.n_dofs()];
    for ((pick, p), d) in t.picks.iter().zip(&pred).zip(&t.displacements) {
        for c in 0..dim {
            let r = 2.0 * (p[c] - d[c]);
            for &(n, w) in pick {
                g_full[dim * n + c] += r * w;
            }
        }
    }
    let mut g = space.restrict(&g_full);
    let mut direct = vec![0.0; model.n_params()];
    for (tag, r_obs) in &t.reactions {
        let sens = reaction_sensitivity(space, &e.bc, model, &full, tag, true)?;
        let w = 2.0 * problem.alpha_r * (sens.value - r_obs);
        for (gk, dk) in g.iter_mut().zip(&sens.d_state) {
            *gk += w * dk;
        }
        for (o, dp) in direct.iter_mut().zip(&sens.d_params) {
            *o += w * dp;
        }
    }
    if g.iter().all(|&x| x == 0.0) {
        return Ok(direct);
    }
    let k = assemble_tangent(space, &e.bc, model, &sol.dofs, e.load)?;
    let lambda = SparseLu::factor(space, &k)?.solve_transpose(&g)?;
    let vjp = residual_param_vjp(space, model, &full, &lambda)?;
    Ok(direct.iter().zip(&vjp).map(|(a, b)| a - b).collect())
}

/// Gradient of the loss over the raw parameters by the discrete adjoint:
/// `Kᵀλ = ∂L/∂u`, `dL/dθ = ∂L/∂θ − λ·∂r/∂θ`.
pub fn gradient_from_solutions(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    sols: &[EquilibriumSolution],
) -> Result<Vec<f64>, DiscoveryError> {
    let parts: Vec<Result<Vec<f64>, DiscoveryError>> =
        (0..problem.n_experiments()).into_par_iter().map(|i| experiment_gradient(problem, model, i, &sols[i])).collect();
    let mut g = vec![0.0; model.n_params()];
    for p in parts {
        for (gk, pk) in g.iter_mut().zip(p?) {
            *gk += pk;
        }
    }
    Ok(g)
}

/// Loss and adjoint gradient, solving from `warm` when given.
pub fn adjoint_gradient(
    problem: &TrainingProblem,
    model: &ConstitutiveModel,
    warm: Option<&[EquilibriumSolution]>,
) -> Result<(LossBreakdown, Vec<f64>, Vec<EquilibriumSolution>), DiscoveryError> {
    let (loss, sols) = evaluate_loss(problem, model, warm)?;
    let g = gradient_from_solutions(problem, model, &sols)?;
    Ok((loss, g, sols))
}
