use super::assembly::{assemble_residual, assemble_system, SparseMatrix};
use super::bc::BcProgram;
use super::space::FeSpace;
use super::FemError;
use crate::constitutive::ConstitutiveModel;
use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Mat};
use serde::{Deserialize, Serialize};
use std::sync::Once;

static SEQUENTIAL: Once = Once::new();

/// Sparse LU factorization of a free-dof tangent. The symbolic analysis is
/// shared by every matrix assembled on the same space.
pub struct SparseLu {
    lu: Option<Lu<usize, f64>>,
    n: usize,
}

impl SparseLu {
    pub fn factor(space: &FeSpace, k: &SparseMatrix) -> Result<Self, FemError> {
        // Sequential kernels keep the factorization bitwise reproducible.
        SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
        let n = k.n();
        if n == 0 {
            return Ok(SparseLu { lu: None, n });
        }
        let symbolic = space
            .symbolic_lu()
            .ok_or_else(|| FemError::LinearSolveFailure("symbolic analysis failed".into()))?;
        let sym = SymbolicSparseColMatRef::new_checked(n, n, k.col_ptr(), None, k.row_idx());
        let mat = SparseColMatRef::new(sym, k.values());
        let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| FemError::LinearSolveFailure(format!("{e:?}")))?;
        Ok(SparseLu { lu: Some(lu), n })
    }

    fn run(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>, FemError> {
        assert_eq!(b.len(), self.n);
        let Some(lu) = &self.lu else { return Ok(Vec::new()) };
        let mut x = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        if transpose {
            lu.solve_transpose_in_place_with_conj(Conj::No, x.as_mut());
        } else {
            lu.solve_in_place_with_conj(Conj::No, x.as_mut());
        }
        let out: Vec<f64> = (0..self.n).map(|i| x[(i, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(FemError::LinearSolveFailure("singular tangent".into()));
        }
        Ok(out)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, FemError> {
        self.run(b, false)
    }

    /// Solves `Kᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>, FemError> {
        self.run(b, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonOptions {
    /// Absolute tolerance, multiplied by the model stiffness scale and `h^dim`.
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { abs_tol: 1e-11, rel_tol: 1e-9, max_iters: 25, max_halvings: 8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    /// Free-dof displacement values.
    pub dofs: Vec<f64>,
    pub load_scale: f64,
    pub converged: bool,
    pub newton_iters: usize,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    pub failure: Option<String>,
}

impl EquilibriumSolution {
    pub fn full(&self, space: &FeSpace) -> Vec<f64> {
        space.expand(&self.dofs, self.load_scale)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn newton_tolerance(space: &FeSpace, model: &ConstitutiveModel, r0: f64, opts: &NewtonOptions) -> f64 {
    let abs = opts.abs_tol * model.stiffness_scale() * space.h().powi(space.dim() as i32);
    abs.max(opts.rel_tol * r0)
}

/// Damped Newton iteration. Failure is reported through `converged` and
/// `failure` rather than as an error.
pub fn newton_solve(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    initial: &[f64],
    s: f64,
    opts: &NewtonOptions,
) -> EquilibriumSolution {
    let mut sol = EquilibriumSolution {
        dofs: initial.to_vec(),
        load_scale: s,
        converged: false,
        newton_iters: 0,
        residual_norm: f64::INFINITY,
        residual_history: Vec::new(),
        failure: None,
    };
    if initial.iter().any(|x| !x.is_finite()) {
        sol.failure = Some(FemError::NonFiniteState.to_string());
        return sol;
    }
    let (mut r, mut k) = match assemble_system(space, bc, model, initial, s) {
        Ok(rk) => rk,
        Err(e) => {
            sol.failure = Some(e.to_string());
            return sol;
        }
    };
    let mut rn = norm(&r);
    sol.residual_history.push(rn);
    let tol = newton_tolerance(space, model, rn, opts);
    loop {
        sol.residual_norm = rn;
        if rn <= tol {
            sol.converged = true;
            return sol;
        }
        if sol.newton_iters >= opts.max_iters {
            sol.failure = Some(format!("no convergence in {} iterations (|r| = {rn:.3e}, tol = {tol:.3e})", opts.max_iters));
            return sol;
        }
        let du = match SparseLu::factor(space, &k).and_then(|lu| lu.solve(&r)) {
            Ok(du) => du,
            Err(e) => {
                sol.failure = Some(e.to_string());
                return sol;
            }
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = sol.dofs.iter().zip(&du).map(|(u, d)| u - step * d).collect();
            if let Ok(rt) = assemble_residual(space, bc, model, &trial, s) {
                let rtn = norm(&rt);
                if rtn < rn || rtn <= tol {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        sol.newton_iters += 1;
        let Some(next) = accepted else {
            sol.failure = Some(format!("line search failed after {} halvings (|r| = {rn:.3e})", opts.max_halvings));
            return sol;
        };
        match assemble_system(space, bc, model, &next, s) {
            Ok((rr, kk)) => {
                r = rr;
                k = kk;
            }
            Err(e) => {
                sol.failure = Some(e.to_string());
                return sol;
            }
        }
        sol.dofs = next;
        rn = norm(&r);
        sol.residual_history.push(rn);
    }
}

/// Load continuation from `start` (an equilibrium at `start_load`) to
/// `final_load`. Returns every accepted state; a failed increment is bisected
/// up to ten times.
pub fn continuation_path(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    start: &[f64],
    start_load: f64,
    final_load: f64,
    n_steps: usize,
    opts: &NewtonOptions,
) -> Result<Vec<EquilibriumSolution>, FemError> {
    assert!(n_steps >= 1);
    let mut inc = (final_load - start_load) / n_steps as f64;
    let mut s = start_load;
    let mut u = start.to_vec();
    let mut path = Vec::new();
    let done = |s: f64| (final_load - s).abs() <= 1e-14 * final_load.abs().max(1e-300);
    while !done(s) {
        let mut cuts = 0;
        loop {
            let target = if (final_load - s).abs() <= inc.abs() * (1.0 + 1e-12) { final_load } else { s + inc };
            let sol = newton_solve(space, bc, model, &u, target, opts);
            if sol.converged {
                log::debug!("continuation: load {target:.6e} converged in {} iterations", sol.newton_iters);
                u = sol.dofs.clone();
                s = target;
                path.push(sol);
                break;
            }
            cuts += 1;
            if cuts > 10 {
                return Err(FemError::ContinuationFailure { last_load: s, target: final_load, reason: sol.failure.unwrap_or_default() });
            }
            inc *= 0.5;
        }
    }
    if path.is_empty() {
        let sol = newton_solve(space, bc, model, &u, final_load, opts);
        if !sol.converged {
            return Err(FemError::ContinuationFailure { last_load: s, target: final_load, reason: sol.failure.unwrap_or_default() });
        }
        path.push(sol);
    }
    Ok(path)
}

/// Ramps the load from the rest state to `final_load` in `n_steps`
/// increments and returns the final equilibrium.
pub fn continuation_solve(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    final_load: f64,
    n_steps: usize,
    opts: &NewtonOptions,
) -> Result<EquilibriumSolution, FemError> {
    let zero = vec![0.0; space.n_free()];
    Ok(continuation_path(space, bc, model, &zero, 0.0, final_load, n_steps, opts)?.pop().unwrap())
}
