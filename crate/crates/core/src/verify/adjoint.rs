use super::Check;
use crate::constitutive::{AnalyticKind, AnalyticModel, ConstitutiveModel, Hnn, HnnArchitecture};
use crate::discovery::{bfgs_train_observed, evaluate_loss, gradient_from_solutions, TrainOptions, TrainingProblem};
use crate::experiments::{build_setup, generate_synthetic, MeshResolution, ObservationMask};
use crate::fem::NewtonOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSuiteOptions {
    /// Parameter states checked: the initialization plus training iterates.
    pub points: usize,
    /// Load levels of Setup 1 used as experiments.
    pub loads: usize,
    pub mesh_size: f64,
    pub fd_step: f64,
}

impl Default for AdjointSuiteOptions {
    fn default() -> Self {
        Self { points: 10, loads: 2, mesh_size: 0.1, fd_step: 1e-5 }
    }
}

/// Worst relative deviation `max_k |fd_k − g_k| / |g|` between the adjoint
/// gradient and central differences of the full loss.
pub fn adjoint_fd_error(problem: &TrainingProblem, model: &ConstitutiveModel, step: f64) -> Result<f64, String> {
    let (_, sols) = evaluate_loss(problem, model, None).map_err(|e| e.to_string())?;
    let g = gradient_from_solutions(problem, model, &sols).map_err(|e| e.to_string())?;
    let scale = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let theta = model.raw_params();
    let mut worst = 0.0f64;
    for k in 0..theta.len() {
        let loss_at = |d: f64| -> Result<f64, String> {
            let mut t = theta.clone();
            t[k] += d;
            let m = model.with_raw_params(&t).map_err(|e| e.to_string())?;
            Ok(evaluate_loss(problem, &m, Some(&sols)).map_err(|e| e.to_string())?.0.total)
        };
        let fd = (loss_at(step)? - loss_at(-step)?) / (2.0 * step);
        worst = worst.max((fd - g[k]).abs() / scale);
    }
    Ok(worst)
}

/// Adjoint gradients on a small Setup-1 instance with a 1×5 HNN, at the
/// initialization and at successive training iterates.
pub fn adjoint_suite(opts: &AdjointSuiteOptions, seed: u64) -> Vec<Check> {
    let newton = NewtonOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_iters: 40, ..NewtonOptions::default() };
    let truth: ConstitutiveModel = AnalyticModel::with_defaults(AnalyticKind::MooneyRivlin).into();
    let problem = build_setup(1, MeshResolution::Size(opts.mesh_size), seed)
        .map_err(|e| e.to_string())
        .and_then(|exps| {
            let exps: Vec<_> = exps.into_iter().take(opts.loads).collect();
            generate_synthetic(&exps, &truth, &ObservationMask::BoundaryOnly, 1e-3, seed, seed, &newton).map_err(|e| e.to_string())
        })
        .and_then(|ds| TrainingProblem::from_dataset(&ds).map_err(|e| e.to_string()));
    let problem = match problem {
        Ok(p) => p,
        Err(e) => return vec![Check::error("adjoint_vs_fd", e)],
    };
    let n_nodes = problem.experiments[0].space.mesh().n_nodes();
    let arch = HnnArchitecture::preset(2, AnalyticKind::MooneyRivlin).unwrap_or_else(|| HnnArchitecture::uniform(1, 5, false, false, 10.0, 0.1));
    let init: ConstitutiveModel = match Hnn::from_init(arch, seed) {
        Ok(m) => m.into(),
        Err(e) => return vec![Check::error("adjoint_vs_fd", e.to_string())],
    };

    let mut states = Vec::new();
    let train = TrainOptions { max_epochs: opts.points.saturating_sub(1), ..TrainOptions::default() };
    if let Err(e) = bfgs_train_observed(&problem, &init, &train, &mut |_, m| states.push(m.clone())) {
        return vec![Check::error("adjoint_vs_fd", e.to_string())];
    }
    states.truncate(opts.points);

    let mut worst = 0.0f64;
    for m in &states {
        match adjoint_fd_error(&problem, m, opts.fd_step) {
            Ok(e) => worst = worst.max(e),
            Err(e) => return vec![Check::error("adjoint_vs_fd", e)],
        }
    }
    vec![Check::below("adjoint_vs_fd", worst, 1e-5).with_detail(format!("{} parameter states, {n_nodes} nodes", states.len()))]
}
