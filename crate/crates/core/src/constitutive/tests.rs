use super::*;
use crate::kinematics::rotation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_f(rng: &mut ChaCha8Rng, amp: f64) -> Tensor2 {
    loop {
        let mut f = Tensor2::identity();
        for v in f.iter_mut() {
            *v += rng.random_range(-amp..amp);
        }
        if f.determinant() > 0.2 {
            return f;
        }
    }
}

fn models(rng: &mut ChaCha8Rng) -> Vec<ConstitutiveModel> {
    let mut out: Vec<ConstitutiveModel> = AnalyticKind::ALL.iter().map(|&k| AnalyticModel::with_defaults(k).into()).collect();
    for (l, skip, iso) in [(1, false, false), (2, true, false), (3, false, true), (2, true, true)] {
        let arch = HnnArchitecture::uniform(l, 4, skip, iso, 3.0, 0.5);
        let mut p = init_params(&arch, rng.random());
        for layer in p.layers.iter_mut() {
            for b in layer.bias.iter_mut() {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        p.raw_w_vol = rng.random_range(-1.0..1.0);
        out.push(Hnn::new(arch, p).unwrap().into());
    }
    out
}

fn energy_of(m: &ConstitutiveModel, f: &Tensor2) -> f64 {
    strain_energy(m, f).unwrap()
}

#[test]
fn stress_matches_energy_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for m in models(&mut rng) {
        for _ in 0..5 {
            let f = random_f(&mut rng, 0.3);
            let p = piola_stress(&m, &f).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                for j in 0..3 {
                    let mut fp = f;
                    let mut fm = f;
                    fp[(i, j)] += h;
                    fm[(i, j)] -= h;
                    let fd = (energy_of(&m, &fp) - energy_of(&m, &fm)) / (2.0 * h);
                    assert!((fd - p[(i, j)]).abs() < 1e-6 * (1.0 + p.norm()), "{} {fd} {}", m.label(), p[(i, j)]);
                }
            }
        }
    }
}

#[test]
fn tangent_matches_stress_differences_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for m in models(&mut rng) {
        for _ in 0..4 {
            let f = random_f(&mut rng, 0.3);
            let a = material_tangent(&m, &f).unwrap();
            assert!((a - a.transpose()).norm() < 1e-10 * (1.0 + a.norm()));
            let h = 1e-6;
            for k in 0..3 {
                for l in 0..3 {
                    let mut fp = f;
                    let mut fm = f;
                    fp[(k, l)] += h;
                    fm[(k, l)] -= h;
                    let dp = (piola_stress(&m, &fp).unwrap() - piola_stress(&m, &fm).unwrap()) / (2.0 * h);
                    for i in 0..3 {
                        for j in 0..3 {
                            let exact = a[(3 * i + j, 3 * k + l)];
                            assert!((dp[(i, j)] - exact).abs() < 1e-5 * (1.0 + a.norm()), "{}", m.label());
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn param_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in models(&mut rng) {
        let f = random_f(&mut rng, 0.25);
        let g = stress_param_gradient(&m, &f).unwrap();
        let raw = m.raw_params();
        let h = 1e-6;
        for p in 0..raw.len() {
            let mut rp = raw.clone();
            let mut rm = raw.clone();
            rp[p] += h;
            rm[p] -= h;
            let sp = piola_stress(&m.with_raw_params(&rp).unwrap(), &f).unwrap();
            let sm = piola_stress(&m.with_raw_params(&rm).unwrap(), &f).unwrap();
            let fd = (sp - sm) / (2.0 * h);
            assert!((fd - g[p]).norm() < 1e-5 * (1.0 + g[p].norm()), "{} param {p}: {} vs {}", m.label(), fd, g[p]);
        }
    }
}

#[test]
fn reference_is_energy_and_stress_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for m in models(&mut rng) {
        let e = m.energy(Invariants::REFERENCE).unwrap();
        assert!(e.w.abs() <= 1e-12, "{}", m.label());
        assert!(piola_stress(&m, &Tensor2::identity()).unwrap().norm() < 1e-10);
        for g in stress_param_gradient(&m, &Tensor2::identity()).unwrap() {
            assert!(g.norm() < 1e-10);
        }
    }
}

#[test]
fn frame_indifference_and_isotropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for m in models(&mut rng) {
        for _ in 0..10 {
            let f = random_f(&mut rng, 0.3);
            let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let r = rotation(axis, rng.random_range(0.0..std::f64::consts::TAU));
            let w = energy_of(&m, &f);
            assert!((energy_of(&m, &(r * f)) - w).abs() <= 1e-12 * (1.0 + w.abs()));
            assert!((energy_of(&m, &(f * r)) - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }
}

#[test]
fn w_vol_sensitivity_closed_form() {
    let arch = HnnArchitecture::uniform(1, 3, false, false, 1.0, 0.3);
    let h = Hnn::from_init(arch, 7).unwrap();
    let m: ConstitutiveModel = h.clone().into();
    let f = Tensor2::new(1.1, 0.05, 0.0, 0.02, 0.9, 0.01, 0.0, 0.03, 1.2);
    let s = invariants(&f).unwrap();
    let g = stress_param_gradient(&m, &f).unwrap();
    let raw_vol = h.params().raw_w_vol;
    let expect = s.cof_f * (sigmoid(raw_vol) * 0.5 * ((s.j - 1.0) / s.j + s.j.ln()));
    assert!((g[h.n_params() - 1] - expect).norm() < 1e-14);
}

#[test]
fn ih_uniaxial_by_substitution() {
    let m: ConstitutiveModel = AnalyticModel::with_defaults(AnalyticKind::Ishihara).into();
    let f = Tensor2::from_diagonal(&nalgebra::Vector3::new(1.2, 1.0, 1.0));
    let j: f64 = 1.2;
    let i1 = 1.44 + 2.0;
    let i2 = 1.44 + 1.44 + 1.0;
    let i1b = j.powf(-2.0 / 3.0) * i1;
    let i2b = j.powf(-4.0 / 3.0) * i2;
    let expect = 0.5 * (i1b - 3.0) + (i2b - 3.0) + 3.0 * (i1b - 3.0).powi(2) + 1.5 * (j - 1.0).powi(2);
    assert!((energy_of(&m, &f) - expect).abs() < 1e-13);
}

#[test]
fn mr_tangent_at_identity_is_isotropic() {
    let m: ConstitutiveModel = AnalyticModel::with_defaults(AnalyticKind::MooneyRivlin).into();
    let a = material_tangent(&m, &Tensor2::identity()).unwrap();
    let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
    // Least squares on the basis δij δkl, δik δjl, δil δjk.
    let mut basis = [[0.0; 81]; 3];
    let mut target = [0.0; 81];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let r = 27 * i + 9 * j + 3 * k + l;
                    basis[0][r] = d(i, j) * d(k, l);
                    basis[1][r] = d(i, k) * d(j, l);
                    basis[2][r] = d(i, l) * d(j, k);
                    target[r] = a[(3 * i + j, 3 * k + l)];
                }
            }
        }
    }
    let mut g = nalgebra::Matrix3::<f64>::zeros();
    let mut rhs = nalgebra::Vector3::zeros();
    for p in 0..3 {
        for q in 0..3 {
            g[(p, q)] = (0..81).map(|r| basis[p][r] * basis[q][r]).sum();
        }
        rhs[p] = (0..81).map(|r| basis[p][r] * target[r]).sum();
    }
    let c = g.lu().solve(&rhs).unwrap();
    let resid: f64 = (0..81).map(|r| (target[r] - c[0] * basis[0][r] - c[1] * basis[1][r] - c[2] * basis[2][r]).powi(2)).sum();
    assert!(resid.sqrt() < 1e-10);
}

#[test]
fn non_positive_jacobian_is_rejected() {
    let m: ConstitutiveModel = AnalyticModel::with_defaults(AnalyticKind::Fung).into();
    let f = Tensor2::from_diagonal(&nalgebra::Vector3::new(-1.0, 1.0, 1.0));
    assert!(piola_stress(&m, &f).unwrap_err().is_non_positive_jacobian());
    assert!(m.energy(Invariants::new(3.0, 3.0, 0.0)).unwrap_err().is_non_positive_jacobian());
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for m in models(&mut rng) {
        let meta = CheckpointMeta { seed: Some(11), created_by: "test".into(), ..Default::default() };
        let bytes = serialize_model(&m, &meta);
        let (back, meta2) = deserialize_model(&bytes).unwrap();
        assert_eq!(meta2.seed, Some(11));
        let a: Vec<u64> = m.raw_params().iter().map(|x| x.to_bits()).collect();
        let b: Vec<u64> = back.raw_params().iter().map(|x| x.to_bits()).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn checkpoint_with_wrong_sizes_is_malformed() {
    let arch = HnnArchitecture::uniform(2, 3, true, false, 1.0, 0.1);
    let m: ConstitutiveModel = Hnn::from_init(arch, 1).unwrap().into();
    let bytes = serialize_model(&m, &CheckpointMeta::default());
    let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    v["architecture"]["n"] = serde_json::json!([3, 4]);
    let err = deserialize_model(&serde_json::to_vec(&v).unwrap()).unwrap_err();
    assert!(matches!(err, ConstitutiveError::MalformedCheckpoint(_)));
    assert!(matches!(deserialize_model(b"{not json").unwrap_err(), ConstitutiveError::MalformedCheckpoint(_)));
}
