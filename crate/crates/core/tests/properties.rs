use nalgebra::Matrix2;
use ndfem::analysis::{sinkhorn_divergence, subsample, vrmse, SinkhornOptions};
use ndfem::constitutive::{
    deserialize_model, hex_f64, parse_hex_f64, piola_stress, serialize_model, strain_energy, AnalyticKind, AnalyticModel, CheckpointMeta,
    ConstitutiveModel, Hnn, HnnArchitecture,
};
use ndfem::discovery::misfit_terms;
use ndfem::kinematics::{cofactor, embed_plane_strain, invariants, rotation, Tensor2};
use proptest::prelude::*;

fn gradient() -> impl Strategy<Value = Tensor2> {
    proptest::array::uniform9(-0.4..0.4f64)
        .prop_map(|g| Tensor2::identity() + Tensor2::from_row_slice(&g))
        .prop_filter("det F > 0.2", |f| f.determinant() > 0.2)
}

fn rot() -> impl Strategy<Value = Tensor2> {
    (proptest::array::uniform3(-1.0..1.0f64), -3.1..3.1f64)
        .prop_filter("axis away from zero", |(a, _)| a.iter().map(|x| x * x).sum::<f64>() > 1e-2)
        .prop_map(|(a, t)| rotation(a, t))
}

fn hnn() -> impl Strategy<Value = ConstitutiveModel> {
    (1..3usize, 2..6usize, any::<bool>(), any::<bool>(), any::<u64>()).prop_map(|(layers, width, skip, iso, seed)| {
        let arch = HnnArchitecture::uniform(layers, width, skip, iso, 10.0, 0.6);
        Hnn::from_init(arch, seed).unwrap().into()
    })
}

fn points(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<[f64; 3]>> {
    proptest::collection::vec(proptest::array::uniform3(-2.0..2.0f64), n)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn invariant_map_is_objective_and_isotropic(f in gradient(), r in rot()) {
        let s = invariants(&f).unwrap();
        for g in [r * f, f * r] {
            let t = invariants(&g).unwrap();
            prop_assert!(close(s.i1, t.i1, 1e-12) && close(s.i2, t.i2, 1e-12) && close(s.j, t.j, 1e-12), "{s:?} {t:?}");
        }
    }

    #[test]
    fn cofactor_identity(f in gradient()) {
        let lhs = f * cofactor(&f).transpose();
        let rhs = Tensor2::identity() * f.determinant();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn plane_strain_jacobian_is_the_in_plane_determinant(g in proptest::array::uniform4(-0.4..0.4f64)) {
        let f2 = Matrix2::identity() + Matrix2::from_row_slice(&g);
        prop_assume!(f2.determinant() > 0.05);
        let s = invariants(&embed_plane_strain(&f2)).unwrap();
        prop_assert!(close(s.j, f2.determinant(), 1e-14));
    }

    #[test]
    fn hnn_reference_state_is_energy_and_stress_free(m in hnn()) {
        let i = Tensor2::identity();
        prop_assert!(strain_energy(&m, &i).unwrap().abs() <= 1e-12);
        prop_assert!(piola_stress(&m, &i).unwrap().norm() < 1e-10);
    }

    #[test]
    fn hnn_energy_is_frame_indifferent(m in hnn(), f in gradient(), r in rot()) {
        let w = strain_energy(&m, &f).unwrap();
        let scale = w.abs().max(10.0);
        for g in [r * f, f * r] {
            prop_assert!((strain_energy(&m, &g).unwrap() - w).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(m in hnn(), seed in proptest::option::of(any::<u64>())) {
        let meta = CheckpointMeta { seed, created_by: "prop".into(), ..Default::default() };
        let (back, meta_back) = deserialize_model(&serialize_model(&m, &meta)).unwrap();
        prop_assert_eq!(meta_back, meta);
        let bits = |m: &ConstitutiveModel| m.raw_params().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&m));
        prop_assert_eq!(back, m);
    }

    #[test]
    fn analytic_checkpoints_round_trip(k in 0..4usize) {
        let kind = [AnalyticKind::NeoHookean, AnalyticKind::MooneyRivlin, AnalyticKind::Ishihara, AnalyticKind::Fung][k];
        let m: ConstitutiveModel = AnalyticModel::with_defaults(kind).into();
        let (back, _) = deserialize_model(&serialize_model(&m, &CheckpointMeta::default())).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn hex_doubles_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assert_eq!(parse_hex_f64(&hex_f64(x)).unwrap().to_bits(), bits);
    }

    #[test]
    fn vrmse_ignores_common_translations(pred in points(3..30), shift in proptest::array::uniform3(-5.0..5.0f64), seed in any::<u64>()) {
        let reference: Vec<[f64; 3]> = pred.iter().enumerate().map(|(i, p)| {
            let k = (seed.wrapping_add(i as u64) % 7) as f64 * 0.1;
            [p[0] + k, p[1] - k, p[2] * (1.0 + k)]
        }).collect();
        let v = vrmse(&pred, &reference);
        prop_assume!(v.is_ok());
        let v = v.unwrap();
        let mv = |s: &[[f64; 3]]| s.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect::<Vec<_>>();
        let w = vrmse(&mv(&pred), &mv(&reference)).unwrap();
        prop_assert!(close(v.vrmse, w.vrmse, 1e-9), "{v:?} {w:?}");
        prop_assert!(close(v.variance, w.variance, 1e-9));
    }

    #[test]
    fn misfit_is_non_negative_quadratic_and_zero_on_consistent_data(
        pred in points(1..20),
        obs in points(1..20),
        r in proptest::collection::vec(-3.0..3.0f64, 0..6),
        c in 0.1..10.0f64,
    ) {
        let n = pred.len().min(obs.len());
        let (pred, obs) = (&pred[..n], &obs[..n]);
        let r_obs: Vec<f64> = r.iter().map(|x| x + 0.5).collect();
        let (d, rr) = misfit_terms(pred, obs, &r, &r_obs);
        prop_assert!(d >= 0.0 && rr >= 0.0);
        prop_assert_eq!(misfit_terms(pred, pred, &r, &r), (0.0, 0.0));
        let sc = |s: &[[f64; 3]]| s.iter().map(|p| p.map(|x| c * x)).collect::<Vec<_>>();
        let scr = |s: &[f64]| s.iter().map(|x| c * x).collect::<Vec<_>>();
        let (d2, r2) = misfit_terms(&sc(pred), &sc(obs), &scr(&r), &scr(&r_obs));
        prop_assert!(close(d2, c * c * d, 1e-12) || d == 0.0);
        prop_assert!(close(r2, c * c * rr, 1e-12) || rr == 0.0);
    }
}

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.8..1.4f64, 2), 2..25)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sinkhorn_is_non_negative_symmetric_and_zero_on_itself(a in cloud(), b in cloud()) {
        let o = SinkhornOptions::default();
        let ab = sinkhorn_divergence(&a, &b, &o).unwrap();
        let ba = sinkhorn_divergence(&b, &a, &o).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
        prop_assert_eq!(sinkhorn_divergence(&a, &a, &o).unwrap(), 0.0);
    }

    #[test]
    fn subsampling_is_seeded_and_keeps_order(a in proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, 2), 1..60), max in 1..40usize, seed in any::<u64>()) {
        let s = subsample(&a, max, seed);
        prop_assert_eq!(s.len(), a.len().min(max));
        prop_assert_eq!(&subsample(&a, max, seed), &s);
        let mut pos = a.iter().enumerate();
        for p in &s {
            prop_assert!(pos.any(|(_, q)| q == p), "subsample must keep the original order");
        }
    }
}
