use super::*;
use crate::constitutive::{piola_stress, AnalyticKind, AnalyticModel, Hnn, HnnArchitecture};
use crate::kinematics::{cofactor, Tensor2};
use crate::mesh::{generate_mesh, structured_box, GeometrySpec, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mr() -> ConstitutiveModel {
    AnalyticModel::with_defaults(AnalyticKind::MooneyRivlin).into()
}

fn cube(n: usize) -> Mesh {
    structured_box(3, [0.0; 3], [1.0; 3], [n, n, n]).unwrap()
}

fn square(n: usize) -> Mesh {
    structured_box(2, [0.0; 3], [1.0, 1.0, 0.0], [n, n, 0]).unwrap()
}

fn affine_all_faces(dim: usize, h: [[f64; 3]; 3]) -> BcProgram {
    let tags: &[&str] = if dim == 2 { &["left", "right", "up", "down"] } else { &["left", "right", "front", "back", "up", "down"] };
    let mut bc = BcProgram::new();
    for t in tags {
        bc = bc.with(t, BoundaryCondition::DirichletVector { field: DisplacementField::Affine { gradient: h } });
    }
    bc
}

fn stretch_x(l: f64) -> [[f64; 3]; 3] {
    [[l - 1.0, 0.0, 0.0], [0.0; 3], [0.0; 3]]
}

/// Mixed program exercising springs, dead and follower loads in 2D.
fn mixed_2d() -> BcProgram {
    BcProgram::new()
        .with("down", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("left", BoundaryCondition::NormalSpring { stiffness: 0.3, traction: [0.0; 3], normal: -0.05 })
        .with("right", BoundaryCondition::FollowerPressure { pressure: 0.2, dead: [0.0, 0.05, 0.0] })
        .with("up", BoundaryCondition::Traction { traction: [0.02, 0.1, 0.0], normal: 0.0 })
}

fn mixed_3d() -> BcProgram {
    BcProgram::new()
        .with("down", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("front", BoundaryCondition::spring(0.2))
        .with("left", BoundaryCondition::spring(0.5))
        .with("back", BoundaryCondition::FollowerPressure { pressure: 0.1, dead: [0.0, 0.0, -0.02] })
        .with("up", BoundaryCondition::Traction { traction: [0.01, 0.0, 0.05], normal: 0.0 })
}

fn random_state(space: &FeSpace, amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..space.n_free()).map(|_| amp * (rng.random::<f64>() - 0.5)).collect()
}

fn fd_tangent_check(space: &FeSpace, bc: &BcProgram, model: &ConstitutiveModel, u: &[f64], s: f64) -> f64 {
    let k = assemble_tangent(space, bc, model, u, s).unwrap().to_dense();
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for j in 0..space.n_free() {
        let mut up = u.to_vec();
        let mut um = u.to_vec();
        up[j] += eps;
        um[j] -= eps;
        let rp = assemble_residual(space, bc, model, &up, s).unwrap();
        let rm = assemble_residual(space, bc, model, &um, s).unwrap();
        let col: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        let scale = col.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-8);
        for i in 0..col.len() {
            worst = worst.max((k[(i, j)] - col[i]).abs() / scale);
        }
    }
    worst
}

#[test]
fn rest_state_has_zero_residual() {
    let m = square(3);
    let bc = affine_all_faces(2, stretch_x(1.0));
    let space = FeSpace::new(m, &bc).unwrap();
    let r = assemble_residual(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.0).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-14));
}

#[test]
fn single_tet_fully_constrained() {
    let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let m = Mesh::with_exposed_boundary(3, nodes, vec![vec![0, 1, 2, 3]], |_, _, _| "all".to_string()).unwrap();
    let bc = BcProgram::new().with("all", BoundaryCondition::DirichletVector { field: DisplacementField::Affine { gradient: stretch_x(1.1) } });
    let space = FeSpace::new(m, &bc).unwrap();
    assert_eq!(space.n_free(), 0);
    assert!(assemble_residual(&space, &bc, &mr(), &[], 1.0).unwrap().is_empty());
}

#[test]
fn dof_counts_add_up() {
    let g = GeometrySpec::for_setup(1, 0).unwrap();
    let m = generate_mesh(&g, g.coarse_h()).unwrap();
    let bc = BcProgram::new()
        .with("left", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("down", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("up", BoundaryCondition::DirichletNormal { value: 1.0 });
    let space = FeSpace::new(m, &bc).unwrap();
    assert_eq!(space.n_free() + space.n_constrained(), 2 * space.mesh().n_nodes());
    let n_up = space.mesh().nodes_with_tag("up").len();
    let n_left = space.mesh().nodes_with_tag("left").len();
    let n_down = space.mesh().nodes_with_tag("down").len();
    assert_eq!(space.n_constrained(), n_up + n_left + n_down);
}

#[test]
fn normal_constraint_needs_axis_aligned_facets() {
    let g = GeometrySpec::for_setup(1, 0).unwrap();
    let m = generate_mesh(&g, g.coarse_h()).unwrap();
    let bc = BcProgram::new().with("hole", BoundaryCondition::DirichletNormal { value: 0.0 });
    assert!(matches!(FeSpace::new(m, &bc), Err(FemError::NonAxisAligned { .. })));
}

#[test]
fn unanchored_program_is_rejected() {
    let bc = BcProgram::new().with("up", BoundaryCondition::Traction { traction: [0.0, 1.0, 0.0], normal: 0.0 });
    assert!(matches!(FeSpace::new(square(2), &bc), Err(FemError::RigidBodyModes)));
    let bc = BcProgram::new().with("nowhere", BoundaryCondition::spring(1.0));
    assert!(matches!(FeSpace::new(square(2), &bc), Err(FemError::UnknownTag(_))));
}

#[test]
fn patch_test_interior_residual_vanishes() {
    let h = [[0.15, 0.05, -0.02], [0.03, -0.1, 0.04], [0.0, 0.02, 0.12]];
    let bc = affine_all_faces(3, h);
    let space = FeSpace::new(cube(3), &bc).unwrap();
    let exact: Vec<f64> = space
        .free_dofs()
        .iter()
        .map(|&d| {
            let x = space.mesh().node(d / 3);
            (0..3).map(|k| h[d % 3][k] * x[k]).sum()
        })
        .collect();
    let model: ConstitutiveModel = AnalyticModel::with_defaults(AnalyticKind::Fung).into();
    let r = assemble_residual(&space, &bc, &model, &exact, 1.0).unwrap();
    let rmax = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
    assert!(rmax < 1e-10, "{rmax}");
}

#[test]
fn tangent_matches_finite_differences_2d() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(3), &bc).unwrap();
    assert!(space.n_free() <= 50);
    let u = random_state(&space, 0.1, 1);
    for model in [mr(), AnalyticModel::with_defaults(AnalyticKind::Ishihara).into()] {
        let err = fd_tangent_check(&space, &bc, &model, &u, 1.3);
        assert!(err < 1e-6, "{err}");
    }
}

#[test]
fn tangent_matches_finite_differences_3d() {
    let bc = mixed_3d();
    let space = FeSpace::new(structured_box(3, [0.0; 3], [1.0; 3], [2, 2, 1]).unwrap(), &bc).unwrap();
    assert!(space.n_free() <= 50);
    let u = random_state(&space, 0.1, 2);
    let hnn: ConstitutiveModel = Hnn::from_init(HnnArchitecture::uniform(2, 4, true, false, 1.0, 0.3), 3).unwrap().into();
    for model in [mr(), hnn] {
        let err = fd_tangent_check(&space, &bc, &model, &u, 0.8);
        assert!(err < 1e-6, "{err}");
    }
}

#[test]
fn springs_only_tangent_is_symmetric() {
    let bc = BcProgram::new()
        .with("left", BoundaryCondition::spring(0.1))
        .with("right", BoundaryCondition::spring(0.2))
        .with("up", BoundaryCondition::spring(0.3))
        .with("down", BoundaryCondition::spring(0.4));
    let space = FeSpace::new(square(4), &bc).unwrap();
    let u = random_state(&space, 0.1, 4);
    let k = assemble_tangent(&space, &bc, &mr(), &u, 1.0).unwrap();
    assert!(k.asymmetry() < 1e-12);
}

#[test]
fn sparsity_is_node_adjacency() {
    let bc = BcProgram::new().with("left", BoundaryCondition::spring(1.0));
    let m = square(3);
    let space = FeSpace::new(m.clone(), &bc).unwrap();
    let k = assemble_tangent(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.0).unwrap();
    let mut adjacent = vec![vec![false; m.n_nodes()]; m.n_nodes()];
    for c in 0..m.n_cells() {
        for &a in m.cell(c) {
            for &b in m.cell(c) {
                adjacent[a][b] = true;
            }
        }
    }
    let mut expected = 0;
    for a in 0..m.n_nodes() {
        for b in 0..m.n_nodes() {
            if adjacent[a][b] {
                expected += 4;
            }
        }
    }
    assert_eq!(k.nnz(), expected);
    for j in 0..k.n() {
        for p in k.col_ptr()[j]..k.col_ptr()[j + 1] {
            let i = k.row_idx()[p];
            assert!(adjacent[space.free_dofs()[i] / 2][space.free_dofs()[j] / 2]);
        }
    }
}

#[test]
fn residual_is_energy_gradient_for_dead_loads() {
    let bc = BcProgram::new()
        .with("down", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("left", BoundaryCondition::NormalSpring { stiffness: 0.3, traction: [0.0; 3], normal: -0.05 })
        .with("up", BoundaryCondition::Traction { traction: [0.02, 0.1, 0.0], normal: 0.0 });
    let space = FeSpace::new(square(3), &bc).unwrap();
    let model = mr();
    let u = random_state(&space, 0.1, 5);
    let r = assemble_residual(&space, &bc, &model, &u, 1.0).unwrap();
    let eps = 1e-6;
    for j in 0..space.n_free() {
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += eps;
        um[j] -= eps;
        let d = (assemble_energy(&space, &bc, &model, &up, 1.0).unwrap() - assemble_energy(&space, &bc, &model, &um, 1.0).unwrap())
            / (2.0 * eps);
        assert!((d - r[j]).abs() <= 1e-6 * r[j].abs().max(1e-3), "{j}: {d} vs {}", r[j]);
    }
}

#[test]
fn follower_area_vector_is_cofactor_times_normal() {
    let h = [[0.2, 0.1, 0.0], [-0.05, 0.1, 0.07], [0.03, 0.0, -0.1]];
    let bc = affine_all_faces(3, h);
    let space = FeSpace::new(cube(1), &bc).unwrap();
    let full = space.expand(&vec![0.0; space.n_free()], 1.0);
    let f = Tensor2::identity() + Tensor2::from_fn(|i, j| h[i][j]);
    let cof = cofactor(&f);
    for facet in 0..space.mesh().n_facets() {
        let (a, _) = deformed_area_vector(&space, &full, facet);
        let (n, area) = space.mesh().facet_normal_and_measure(facet);
        for i in 0..3 {
            let expected = area * (0..3).map(|j| cof[(i, j)] * n[j]).sum::<f64>();
            assert!((a[i] - expected).abs() < 1e-13);
        }
    }
}

#[test]
fn newton_reproduces_homogeneous_stretch() {
    let model = mr();
    for n in [2, 3] {
        let bc = affine_all_faces(3, stretch_x(1.2));
        let space = FeSpace::new(cube(n), &bc).unwrap();
        let sol = newton_solve(&space, &bc, &model, &vec![0.0; space.n_free()], 1.0, &NewtonOptions::default());
        assert!(sol.converged, "{:?}", sol.failure);
        let full = sol.full(&space);
        for (i, p) in space.mesh().nodes().iter().enumerate() {
            assert!((full[3 * i] - 0.2 * p[0]).abs() < 1e-10);
            assert!(full[3 * i + 1].abs() < 1e-10 && full[3 * i + 2].abs() < 1e-10);
        }
        // Reaction on the pulled face equals P11 times the face area.
        let f = Tensor2::from_diagonal(&nalgebra::Vector3::new(1.2, 1.0, 1.0));
        let p11 = piola_stress(&model, &f).unwrap()[(0, 0)];
        let r = reaction_force(&space, &bc, &model, &sol, "right").unwrap();
        assert!(r > 0.0);
        assert!((r - p11).abs() <= 1e-8 * p11.abs(), "{r} vs {p11}");
        let rv = reaction_vector(&space, &bc, &model, &sol, "right").unwrap();
        assert!((rv[0] - r).abs() < 1e-12);
    }
}

#[test]
fn zero_load_converges_immediately() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(3), &bc).unwrap();
    let sol = newton_solve(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.0, &NewtonOptions::default());
    assert!(sol.converged);
    assert!(sol.newton_iters <= 1);
    let r = reaction_force(&space, &bc, &mr(), &sol, "down").unwrap();
    assert!(r.abs() < 1e-14);
}

#[test]
fn newton_converges_quadratically() {
    let g = GeometrySpec::for_setup(1, 0).unwrap();
    let m = generate_mesh(&g, g.coarse_h()).unwrap();
    let bc = BcProgram::new()
        .with("left", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("down", BoundaryCondition::DirichletNormal { value: 0.0 })
        .with("up", BoundaryCondition::DirichletNormal { value: 1.0 })
        .with("right", BoundaryCondition::DirichletNormal { value: 0.5 });
    let space = FeSpace::new(m, &bc).unwrap();
    let opts = NewtonOptions { rel_tol: 1e-14, abs_tol: 1e-14, ..Default::default() };
    let sol = newton_solve(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.1, &opts);
    let hist: Vec<f64> = sol.residual_history.iter().copied().filter(|&r| r > 1e-12).collect();
    assert!(hist.len() >= 3, "{:?}", sol.residual_history);
    let k = hist.len();
    let (r0, r1, r2) = (hist[k - 3], hist[k - 2], hist[k - 1]);
    let order = (r2 / r1).ln() / (r1 / r0).ln();
    assert!(order > 1.6, "order {order}: {hist:?}");
}

#[test]
fn single_step_continuation_equals_newton() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(3), &bc).unwrap();
    let opts = NewtonOptions::default();
    let a = continuation_solve(&space, &bc, &mr(), 0.3, 1, &opts).unwrap();
    let b = newton_solve(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.3, &opts);
    assert_eq!(a, b);
    let path = continuation_path(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.0, 1.0, 4, &opts).unwrap();
    assert_eq!(path.len(), 4);
    assert!(path.iter().all(|s| s.converged));
    assert_eq!(path.last().unwrap().load_scale, 1.0);
}

#[test]
fn dirichlet_translation_translates_solution() {
    let model = mr();
    let solve = |shift: [f64; 3]| {
        let pull = [0.15 + shift[0], shift[1], shift[2]];
        let bc = BcProgram::new()
            .with("left", BoundaryCondition::DirichletVector { field: DisplacementField::Uniform { value: shift } })
            .with("right", BoundaryCondition::DirichletVector { field: DisplacementField::Uniform { value: pull } });
        let space = FeSpace::new(cube(2), &bc).unwrap();
        let sol = continuation_solve(&space, &bc, &model, 1.0, 2, &NewtonOptions::default()).unwrap();
        sol.full(&space)
    };
    let a = solve([0.0; 3]);
    let t = [0.3, -0.2, 0.1];
    let b = solve(t);
    for i in 0..a.len() {
        assert!((b[i] - a[i] - t[i % 3]).abs() < 1e-9);
    }
}

#[test]
fn reaction_requires_dirichlet_tag() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(2), &bc).unwrap();
    let sol = newton_solve(&space, &bc, &mr(), &vec![0.0; space.n_free()], 0.0, &NewtonOptions::default());
    assert!(matches!(reaction_force(&space, &bc, &mr(), &sol, "up"), Err(FemError::TagNotDirichlet(_))));
}

#[test]
fn reaction_sensitivities_match_finite_differences() {
    let bc = mixed_3d();
    let space = FeSpace::new(structured_box(3, [0.0; 3], [1.0; 3], [2, 2, 1]).unwrap(), &bc).unwrap();
    let model: ConstitutiveModel = Hnn::from_init(HnnArchitecture::uniform(1, 3, false, true, 1.0, 0.4), 9).unwrap().into();
    let u = random_state(&space, 0.1, 6);
    let full = space.expand(&u, 1.0);
    let sens = reaction_sensitivity(&space, &bc, &model, &full, "down", true).unwrap();
    let eps = 1e-6;
    for j in 0..space.n_free() {
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += eps;
        um[j] -= eps;
        let rp = reaction_force_full(&space, &bc, &model, &space.expand(&up, 1.0), "down").unwrap();
        let rm = reaction_force_full(&space, &bc, &model, &space.expand(&um, 1.0), "down").unwrap();
        assert!(((rp - rm) / (2.0 * eps) - sens.d_state[j]).abs() < 1e-7);
    }
    let raw = model.raw_params();
    for p in 0..raw.len() {
        let mut rp = raw.clone();
        let mut rm = raw.clone();
        rp[p] += eps;
        rm[p] -= eps;
        let fp = reaction_force_full(&space, &bc, &model.with_raw_params(&rp).unwrap(), &full, "down").unwrap();
        let fm = reaction_force_full(&space, &bc, &model.with_raw_params(&rm).unwrap(), &full, "down").unwrap();
        assert!(((fp - fm) / (2.0 * eps) - sens.d_params[p]).abs() < 1e-7, "param {p}");
    }
}

#[test]
fn residual_param_vjp_matches_finite_differences() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(3), &bc).unwrap();
    let model: ConstitutiveModel = Hnn::from_init(HnnArchitecture::uniform(2, 3, true, false, 1.0, 0.4), 11).unwrap().into();
    let u = random_state(&space, 0.1, 7);
    let lam = random_state(&space, 1.0, 8);
    let full = space.expand(&u, 1.0);
    let g = residual_param_vjp(&space, &model, &full, &lam).unwrap();
    let raw = model.raw_params();
    let eps = 1e-6;
    for p in 0..raw.len() {
        let mut rp = raw.clone();
        let mut rm = raw.clone();
        rp[p] += eps;
        rm[p] -= eps;
        let a = assemble_residual(&space, &bc, &model.with_raw_params(&rp).unwrap(), &u, 1.0).unwrap();
        let b = assemble_residual(&space, &bc, &model.with_raw_params(&rm).unwrap(), &u, 1.0).unwrap();
        let fd: f64 = a.iter().zip(&b).zip(&lam).map(|((x, y), l)| l * (x - y) / (2.0 * eps)).sum();
        assert!((fd - g[p]).abs() < 1e-7 * fd.abs().max(1.0), "param {p}: {fd} vs {}", g[p]);
    }
}

#[test]
fn adjoint_solve_uses_transpose() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(3), &bc).unwrap();
    let u = random_state(&space, 0.1, 9);
    let k = assemble_tangent(&space, &bc, &mr(), &u, 1.0).unwrap();
    assert!(k.asymmetry() > 1e-8);
    let lu = SparseLu::factor(&space, &k).unwrap();
    let b = random_state(&space, 1.0, 10);
    let x = lu.solve(&b).unwrap();
    let y = lu.solve_transpose(&b).unwrap();
    let kd = k.to_dense();
    let kx = &kd * nalgebra::DVector::from_vec(x);
    let kty = kd.transpose() * nalgebra::DVector::from_vec(y);
    for i in 0..b.len() {
        assert!((kx[i] - b[i]).abs() < 1e-10 && (kty[i] - b[i]).abs() < 1e-10);
    }
}

#[test]
fn interpolation_is_exact_at_nodes_and_centroids() {
    let bc = mixed_2d();
    let space = FeSpace::new(square(4), &bc).unwrap();
    let u = random_state(&space, 1.0, 12);
    let full = space.expand(&u, 1.0);
    let mesh = space.mesh();
    let vals = interpolate_displacement(&space, &full, mesh.nodes()).unwrap();
    for (i, v) in vals.iter().enumerate() {
        assert!((v[0] - full[2 * i]).abs() < 1e-14 && (v[1] - full[2 * i + 1]).abs() < 1e-14);
    }
    for c in 0..mesh.n_cells() {
        let x = mesh.cell_coords(c);
        let cen = [(x[0][0] + x[1][0] + x[2][0]) / 3.0, (x[0][1] + x[1][1] + x[2][1]) / 3.0, 0.0];
        let v = interpolate_displacement(&space, &full, &[cen]).unwrap()[0];
        for k in 0..2 {
            let avg = mesh.cell(c).iter().map(|&n| full[2 * n + k]).sum::<f64>() / 3.0;
            assert!((v[k] - avg).abs() < 1e-13);
        }
    }
    assert!(matches!(interpolate_displacement(&space, &full, &[[1.5, 0.5, 0.0]]), Err(FemError::PointOutsideMesh(0))));
}

#[test]
fn interpolation_matches_brute_force_search() {
    let g = GeometrySpec::for_setup(4, 0).unwrap();
    let m = generate_mesh(&g, g.coarse_h()).unwrap();
    let bc = BcProgram::new().with("down", BoundaryCondition::spring(1.0));
    let space = FeSpace::new(m, &bc).unwrap();
    let u = random_state(&space, 1.0, 13);
    let full = space.expand(&u, 0.0);
    let mesh = space.mesh();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut checked = 0;
    while checked < 200 {
        let p = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        // Brute-force oracle: barycentric coordinates by solving a dense system per cell.
        let mut hit = None;
        for c in 0..mesh.n_cells() {
            let x = mesh.cell_coords(c);
            let a = nalgebra::Matrix4::from_fn(|r, k| if r < 3 { x[k][r] } else { 1.0 });
            let w = a.lu().solve(&nalgebra::Vector4::new(p[0], p[1], p[2], 1.0)).unwrap();
            if w.iter().all(|&v| v >= 1e-9) {
                hit = Some((c, w));
                break;
            }
        }
        let Some((c, w)) = hit else { continue };
        let v = interpolate_displacement(&space, &full, &[p]).unwrap()[0];
        for k in 0..3 {
            let expected: f64 = (0..4).map(|a| w[a] * full[3 * mesh.cell(c)[a] + k]).sum();
            assert!((v[k] - expected).abs() < 1e-12);
        }
        checked += 1;
    }
}

#[test]
fn solution_file_round_trip() {
    let sol = EquilibriumSolution {
        dofs: vec![0.1, -1.0 / 3.0, 1e-300, 2.5e7],
        load_scale: 0.7,
        converged: true,
        newton_iters: 4,
        residual_norm: 3.2e-13,
        residual_history: Vec::new(),
        failure: None,
    };
    let text = write_solution(&sol, "abc123");
    assert!(text.starts_with("solution 4\n"));
    let (back, sum) = read_solution(&text).unwrap();
    assert_eq!(back, sol);
    assert_eq!(sum, "abc123");
    let broken = text.replace("solution 4", "solution 5");
    assert!(matches!(read_solution(&broken), Err(FemError::MalformedSolutionFile { .. })));
}
