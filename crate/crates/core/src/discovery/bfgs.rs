use super::{adjoint_gradient, evaluate_loss, gradient_from_solutions, DiscoveryError, LossBreakdown, TrainingProblem};
use crate::constitutive::ConstitutiveModel;
use crate::fem::EquilibriumSolution;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Stop when `(L[e−window] − L[e]) / L[e−window] < rel_improvement`.
    pub window: usize,
    pub rel_improvement: f64,
    pub armijo_c1: f64,
    pub max_trials: usize,
    /// Length bound on the first trial step, in raw-parameter units.
    pub initial_step: f64,
    /// Stop when `‖g‖ ≤ grad_tol · Σ‖d̃‖²`.
    pub grad_tol: f64,
    /// Stop when `L ≤ loss_tol · Σ‖d̃‖²`.
    pub loss_tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            max_epochs: 2000,
            window: 50,
            rel_improvement: 1e-4,
            armijo_c1: 1e-4,
            max_trials: 20,
            initial_step: 1.0,
            grad_tol: 1e-12,
            loss_tol: 1e-24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    LossTolerance,
    RelativeImprovement,
    EpochCap,
    /// No trial step was accepted; the result holds the last accepted state.
    Stalled { diagnostic: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub displacement_term: f64,
    pub reaction_term: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub rejections: usize,
    pub newton_iters: Vec<usize>,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,loss,displacement_term,reaction_term,grad_norm,step,rejections,newton_iters";

    pub fn csv_row(&self) -> String {
        let iters: Vec<String> = self.newton_iters.iter().map(|n| n.to_string()).collect();
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
            self.epoch,
            self.loss,
            self.displacement_term,
            self.reaction_term,
            self.grad_norm,
            self.step,
            self.rejections,
            iters.join(";")
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub model: ConstitutiveModel,
    pub loss: LossBreakdown,
    pub grad_norm: f64,
    pub history: Vec<EpochRecord>,
    pub stop: StopReason,
    pub rejections: usize,
    pub solutions: Vec<EquilibriumSolution>,
}

impl TrainResult {
    pub fn stalled(&self) -> bool {
        matches!(self.stop, StopReason::Stalled { .. })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense inverse-Hessian approximation, row-major.
struct InverseHessian {
    n: usize,
    h: Vec<f64>,
    /// Still the unscaled identity (no update accepted yet).
    fresh: bool,
}

impl InverseHessian {
    fn identity(n: usize) -> Self {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
        Self { n, h, fresh: true }
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(&self.h[i * self.n..(i + 1) * self.n], g)).collect()
    }

    /// Standard BFGS update; returns false (and leaves H unchanged) when the
    /// curvature condition fails.
    fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let sy = dot(s, y);
        if !(sy > 1e-12 * norm(s) * norm(y)) {
            return false;
        }
        let n = self.n;
        if self.fresh {
            let scale = sy / dot(y, y);
            for v in &mut self.h {
                *v *= scale;
            }
            self.fresh = false;
        }
        let rho = 1.0 / sy;
        let hy = self.apply(y);
        let yhy = dot(y, &hy);
        for i in 0..n {
            for j in 0..n {
                self.h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
            }
        }
        true
    }
}

/// BFGS over the raw parameters of `init` with an Armijo backtracking line
/// search. Trial points whose equilibrium solve fails count as rejected
/// steps and are halved.
pub fn bfgs_train(problem: &TrainingProblem, init: &ConstitutiveModel, opts: &TrainOptions) -> Result<TrainResult, DiscoveryError> {
    bfgs_train_observed(problem, init, opts, &mut |_, _| {})
}

/// As [`bfgs_train`], calling `observer` after every accepted epoch.
pub fn bfgs_train_observed(
    problem: &TrainingProblem,
    init: &ConstitutiveModel,
    opts: &TrainOptions,
    observer: &mut dyn FnMut(&EpochRecord, &ConstitutiveModel),
) -> Result<TrainResult, DiscoveryError> {
    let scale = problem.data_scale().max(f64::MIN_POSITIVE);
    let mut model = init.clone();
    let mut theta = model.raw_params();
    let (mut loss, mut g, mut sols) = adjoint_gradient(problem, &model, None)?;
    let mut hess = InverseHessian::identity(theta.len());
    let mut history = vec![EpochRecord {
        epoch: 0,
        loss: loss.total,
        displacement_term: loss.displacement_term,
        reaction_term: loss.reaction_term,
        grad_norm: norm(&g),
        step: 0.0,
        rejections: 0,
        newton_iters: sols.iter().map(|s| s.newton_iters).collect(),
    }];
    observer(&history[0], &model);
    let mut total_rejections = 0;
    let stop = loop {
        let epoch = history.len();
        let gn = norm(&g);
        if gn <= opts.grad_tol * scale {
            break StopReason::GradientTolerance;
        }
        if loss.total <= opts.loss_tol * scale {
            break StopReason::LossTolerance;
        }
        if epoch > opts.max_epochs {
            break StopReason::EpochCap;
        }
        if epoch > opts.window {
            let old = history[epoch - 1 - opts.window].loss;
            if old > 0.0 && (old - loss.total) / old < opts.rel_improvement {
                break StopReason::RelativeImprovement;
            }
        }

        let mut p: Vec<f64> = hess.apply(&g).iter().map(|x| -x).collect();
        let mut slope = dot(&p, &g);
        if !(slope < 0.0) {
            log::debug!("epoch {epoch}: not a descent direction, resetting the inverse Hessian");
            hess = InverseHessian::identity(theta.len());
            p = g.iter().map(|x| -x).collect();
            slope = -gn * gn;
        }
        if hess.fresh {
            let pn = norm(&p);
            if pn > opts.initial_step {
                let f = opts.initial_step / pn;
                p.iter_mut().for_each(|x| *x *= f);
                slope *= f;
            }
        }

        let mut step = 1.0;
        let mut accepted = None;
        let mut rejections = 0;
        let mut last_failure = String::new();
        for _ in 0..opts.max_trials {
            let trial: Vec<f64> = theta.iter().zip(&p).map(|(t, d)| t + step * d).collect();
            let outcome = model
                .with_raw_params(&trial)
                .map_err(DiscoveryError::from)
                .and_then(|m| evaluate_loss(problem, &m, Some(&sols)).map(|r| (m, r)));
            match outcome {
                Ok((m, (l, s))) if l.total.is_finite() && l.total <= loss.total + opts.armijo_c1 * step * slope => {
                    accepted = Some((trial, m, l, s));
                    break;
                }
                Ok((_, (l, _))) => last_failure = format!("insufficient decrease ({:.6e})", l.total),
                Err(e) => last_failure = e.to_string(),
            }
            rejections += 1;
            step *= 0.5;
        }
        total_rejections += rejections;
        let Some((trial, m, l, s)) = accepted else {
            log::warn!("epoch {epoch}: line search failed after {rejections} trials: {last_failure}");
            break StopReason::Stalled {
                diagnostic: format!("epoch {epoch}: no step accepted in {rejections} trials, last: {last_failure}"),
            };
        };
        let g_new = gradient_from_solutions(problem, &m, &s)?;
        let sk: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yk: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if !hess.update(&sk, &yk) {
            log::debug!("epoch {epoch}: curvature condition failed, update skipped");
        }
        theta = trial;
        model = m;
        loss = l;
        sols = s;
        g = g_new;
        let rec = EpochRecord {
            epoch,
            loss: loss.total,
            displacement_term: loss.displacement_term,
            reaction_term: loss.reaction_term,
            grad_norm: norm(&g),
            step,
            rejections,
            newton_iters: sols.iter().map(|s| s.newton_iters).collect(),
        };
        log::debug!("epoch {epoch}: loss {:.6e} |g| {:.3e} step {step:.3e}", rec.loss, rec.grad_norm);
        observer(&rec, &model);
        history.push(rec);
    };
    Ok(TrainResult { grad_norm: norm(&g), model, loss, history, stop, rejections: total_rejections, solutions: sols })
}
