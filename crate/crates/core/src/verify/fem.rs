use super::Check;
use crate::constitutive::{piola_stress, AnalyticKind, AnalyticModel, ConstitutiveModel};
use crate::fem::{
    assemble_residual, assemble_tangent, newton_solve, reaction_force, BcProgram, BoundaryCondition, DisplacementField, FeSpace,
    NewtonOptions,
};
use crate::kinematics::Tensor2;
use crate::mesh::{generate_mesh, structured_box, GeometrySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mr() -> ConstitutiveModel {
    AnalyticModel::with_defaults(AnalyticKind::MooneyRivlin).into()
}

/// Least-squares slope of `log r_{k+1}` against `log r_k` over the last
/// (up to three) pairs above the round-off floor.
pub fn convergence_order(history: &[f64]) -> Option<f64> {
    let r0 = *history.first()?;
    let hist: Vec<f64> = history.iter().copied().filter(|&r| r > 1e-13 * r0.max(1e-300)).collect();
    if hist.len() < 3 {
        return None;
    }
    let pairs: Vec<(f64, f64)> = hist.windows(2).map(|w| (w[0].ln(), w[1].ln())).collect();
    let pairs = &pairs[pairs.len().saturating_sub(3)..];
    let n = pairs.len() as f64;
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Homogeneous stretch on a cube, tangent consistency and Newton's final
/// convergence rate.
pub fn fem_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let model = mr();
    let lambda = 1.2;
    let grad = [[lambda - 1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]];
    let mut bc = BcProgram::new();
    for t in ["left", "right", "front", "back", "up", "down"] {
        bc = bc.with(t, BoundaryCondition::DirichletVector { field: DisplacementField::Affine { gradient: grad } });
    }
    let space = match structured_box(3, [0.0; 3], [1.0; 3], [3, 3, 3]).map_err(|e| e.to_string()).and_then(|m| FeSpace::new(m, &bc).map_err(|e| e.to_string())) {
        Ok(s) => s,
        Err(e) => return vec![Check::error("affine_solution", e)],
    };
    let sol = newton_solve(&space, &bc, &model, &vec![0.0; space.n_free()], 1.0, &NewtonOptions::default());
    if !sol.converged {
        out.push(Check::error("affine_solution", sol.failure.clone().unwrap_or_default()));
    } else {
        let full = sol.full(&space);
        let err = space
            .mesh()
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, p)| (0..3).map(|c| (full[3 * i + c] - (0..3).map(|k| grad[c][k] * p[k]).sum::<f64>()).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        out.push(Check::below("affine_solution", err, 1e-10).with_detail(format!("{} nodes, max nodal error", space.mesh().n_nodes())));
        let f = Tensor2::from_diagonal(&nalgebra::Vector3::new(lambda, 1.0, 1.0));
        let p11 = piola_stress(&model, &f).map(|p| p[(0, 0)]).unwrap_or(f64::NAN);
        match reaction_force(&space, &bc, &model, &sol, "right") {
            Ok(r) => out.push(Check::below("affine_reaction", (r - p11).abs() / p11.abs(), 1e-8).with_detail("relative to P11 times area")),
            Err(e) => out.push(Check::error("affine_reaction", e.to_string())),
        }
    }

    // Tangent against central differences of the residual at a random state.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let u: Vec<f64> = (0..space.n_free()).map(|_| 0.05 * (rng.random::<f64>() - 0.5)).collect();
    match assemble_tangent(&space, &bc, &model, &u, 0.5) {
        Ok(k) => {
            let k = k.to_dense();
            let h = 1e-6;
            let mut worst = 0.0f64;
            for j in 0..space.n_free() {
                let mut up = u.clone();
                let mut um = u.clone();
                up[j] += h;
                um[j] -= h;
                let rp = assemble_residual(&space, &bc, &model, &up, 0.5).unwrap();
                let rm = assemble_residual(&space, &bc, &model, &um, 0.5).unwrap();
                for i in 0..space.n_free() {
                    worst = worst.max(((rp[i] - rm[i]) / (2.0 * h) - k[(i, j)]).abs());
                }
            }
            out.push(Check::below("tangent_vs_fd", worst / k.amax(), 1e-6));
        }
        Err(e) => out.push(Check::error("tangent_vs_fd", e.to_string())),
    }

    // Final-phase convergence on a plate with a hole under biaxial stretch.
    let g = GeometrySpec::for_setup(1, 0).expect("setup 1 geometry");
    let bc = BcProgram::new()
        .with("left", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("down", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("up", BoundaryCondition::DirichletNormal { value: 1.0 })
        .with("right", BoundaryCondition::DirichletNormal { value: 0.5 });
    let order = generate_mesh(&g, g.coarse_h())
        .map_err(|e| e.to_string())
        .and_then(|m| FeSpace::new(m, &bc).map_err(|e| e.to_string()))
        .and_then(|space| {
            let opts = NewtonOptions { rel_tol: 1e-14, abs_tol: 1e-14, ..Default::default() };
            let sol = newton_solve(&space, &bc, &model, &vec![0.0; space.n_free()], 0.1, &opts);
            convergence_order(&sol.residual_history).ok_or_else(|| format!("too few iterations: {:?}", sol.residual_history))
        });
    out.push(match order {
        Ok(p) => Check::above("newton_order", p, 1.5).with_detail("fitted exponent of r_{k+1} against r_k"),
        Err(e) => Check::error("newton_order", e),
    });
    out
}
