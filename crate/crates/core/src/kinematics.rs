//! Finite-deformation kinematics on 3×3 tensors.
//!
//! Two-dimensional (plane strain) states are embedded into the 3×3 setting
//! with `F₃₃ = 1`, so every constitutive routine has a single code path.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

/// Second-order tensor (deformation gradients, stresses, cofactors).
pub type Tensor2 = Matrix3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("non-positive Jacobian: det F = {0:e}")]
    NonPositiveJacobian(f64),
}

/// The three isotropic invariants `(I1, I2, J)` fed to every strain energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub i1: f64,
    pub i2: f64,
    pub j: f64,
}

impl Invariants {
    /// Invariants of the undeformed state.
    pub const REFERENCE: Invariants = Invariants { i1: 3.0, i2: 3.0, j: 1.0 };

    pub fn new(i1: f64, i2: f64, j: f64) -> Self {
        Self { i1, i2, j }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.i1, self.i2, self.j]
    }
}

/// A deformation gradient together with its cached cofactor and invariants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub f: Tensor2,
    pub cof_f: Tensor2,
    pub j: f64,
    pub i1: f64,
    pub i2: f64,
}

impl DeformationState {
    pub fn invariants(&self) -> Invariants {
        Invariants { i1: self.i1, i2: self.i2, j: self.j }
    }
}

/// `F = I + ∇d`.
pub fn deformation_gradient(grad_d: &Tensor2) -> Tensor2 {
    Tensor2::identity() + grad_d
}

/// Cofactor matrix, `cof F = det(F) F⁻ᵀ` for invertible `F`, computed from
/// 2×2 minors so it is defined for every `F`.
pub fn cofactor(f: &Tensor2) -> Tensor2 {
    let a = |i: usize, j: usize| f[(i, j)];
    Tensor2::new(
        a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1),
        a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2),
        a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0),
        a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2),
        a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0),
        a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1),
        a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1),
        a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2),
        a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
    )
}

/// Computes `(I1, I2, J)` with `I1 = |F|²`, `I2 = |cof F|²`, `J = det F`.
pub fn invariants(f: &Tensor2) -> Result<DeformationState, KinematicsError> {
    let cof_f = cofactor(f);
    let j = f.row(0).dot(&cof_f.row(0));
    if !(j > 0.0) {
        return Err(KinematicsError::NonPositiveJacobian(j));
    }
    Ok(DeformationState {
        f: *f,
        cof_f,
        j,
        i1: f.norm_squared(),
        i2: cof_f.norm_squared(),
    })
}

/// Isochoric invariants `(Ī1, Ī2, Ī2^{3/2})`.
pub fn isochoric_invariants(state: &DeformationState) -> (f64, f64, f64) {
    let j23 = state.j.powf(-2.0 / 3.0);
    let ibar1 = j23 * state.i1;
    let ibar2 = j23 * j23 * state.i2;
    (ibar1, ibar2, ibar2.powf(1.5))
}

/// Embeds an in-plane gradient into 3×3 with `F₃₃ = 1` (plane strain).
pub fn embed_plane_strain(f2: &Matrix2<f64>) -> Tensor2 {
    Tensor2::new(f2[(0, 0)], f2[(0, 1)], 0.0, f2[(1, 0)], f2[(1, 1)], 0.0, 0.0, 0.0, 1.0)
}

/// Eigenvalues of a symmetric 3×3 matrix in descending order.
pub fn symmetric_eigenvalues(c: &Tensor2) -> [f64; 3] {
    let sym = (c + c.transpose()) * 0.5;
    let e = sym.symmetric_eigenvalues();
    let mut ev = [e[0], e[1], e[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Principal stretches (singular values of `F`) in descending order.
pub fn principal_stretches(f: &Tensor2) -> [f64; 3] {
    let c = f.transpose() * f;
    symmetric_eigenvalues(&c).map(|l| l.max(0.0).sqrt())
}

/// In-plane principal stretches of a plane-strain state (descending).
pub fn principal_stretches_plane(f: &Tensor2) -> [f64; 2] {
    let f2 = f.fixed_view::<2, 2>(0, 0).into_owned();
    let c = f2.transpose() * f2;
    let m = 0.5 * (c[(0, 0)] + c[(1, 1)]);
    let d = (0.25 * (c[(0, 0)] - c[(1, 1)]).powi(2) + c[(0, 1)] * c[(1, 0)]).sqrt();
    let hi = m + d;
    // Small eigenvalue via the determinant, avoids cancellation in m - d.
    let lo = if hi > 0.0 { c.determinant() / hi } else { 0.0 };
    [hi.max(0.0).sqrt(), lo.max(0.0).sqrt()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CanonicalKind {
    UniaxialTension,
    UniaxialCompression,
    BiaxialTension,
    BiaxialCompression,
    SimpleShear,
}

impl CanonicalKind {
    pub const ALL: [CanonicalKind; 5] = [
        CanonicalKind::UniaxialTension,
        CanonicalKind::UniaxialCompression,
        CanonicalKind::BiaxialTension,
        CanonicalKind::BiaxialCompression,
        CanonicalKind::SimpleShear,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CanonicalKind::UniaxialTension => "uniaxial_tension",
            CanonicalKind::UniaxialCompression => "uniaxial_compression",
            CanonicalKind::BiaxialTension => "biaxial_tension",
            CanonicalKind::BiaxialCompression => "biaxial_compression",
            CanonicalKind::SimpleShear => "simple_shear",
        }
    }
}

/// Reference in-plane deformation families, parameterized by `δ ∈ [0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalDeformation {
    pub kind: CanonicalKind,
    pub delta: f64,
}

impl CanonicalDeformation {
    pub fn new(kind: CanonicalKind, delta: f64) -> Self {
        Self { kind, delta }
    }

    pub fn tensor(&self) -> Tensor2 {
        canonical_deformation(self)
    }
}

pub fn canonical_deformation(c: &CanonicalDeformation) -> Tensor2 {
    let d = c.delta;
    let f2 = match c.kind {
        CanonicalKind::UniaxialTension => Matrix2::new(1.0 + d, 0.0, 0.0, 1.0),
        CanonicalKind::UniaxialCompression => Matrix2::new(1.0 / (1.0 + d), 0.0, 0.0, 1.0),
        CanonicalKind::BiaxialTension => Matrix2::new(1.0 + d, 0.0, 0.0, 1.0 + d),
        CanonicalKind::BiaxialCompression => {
            Matrix2::new(1.0 / (1.0 + d), 0.0, 0.0, 1.0 / (1.0 + d))
        }
        CanonicalKind::SimpleShear => Matrix2::new(1.0, d, 0.0, 1.0),
    };
    embed_plane_strain(&f2)
}

/// Rotation matrix from an axis (need not be normalized) and an angle.
pub fn rotation(axis: [f64; 3], angle: f64) -> Tensor2 {
    let a = nalgebra::Vector3::from(axis);
    let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(a), angle);
    rot.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_f(rng: &mut ChaCha8Rng) -> Tensor2 {
        loop {
            let g = Tensor2::from_fn(|_, _| rng.random_range(-0.4..0.4));
            let f = deformation_gradient(&g);
            if f.determinant() > 0.2 {
                return f;
            }
        }
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Tensor2 {
        let axis = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)];
        rotation(axis, rng.random_range(-PI..PI))
    }

    #[test]
    fn deformation_gradient_adds_identity() {
        assert_eq!(deformation_gradient(&Tensor2::zeros()), Tensor2::identity());
        let g = Tensor2::from_diagonal(&nalgebra::Vector3::new(0.2, 0.0, 0.0));
        assert_eq!(deformation_gradient(&g), Tensor2::from_diagonal(&nalgebra::Vector3::new(1.2, 1.0, 1.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let g = Tensor2::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let f = deformation_gradient(&g);
            for i in 0..3 {
                for j in 0..3 {
                    let id = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(f[(i, j)], id + g[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn invariants_of_simple_cases() {
        let s = invariants(&Tensor2::identity()).unwrap();
        assert_eq!((s.i1, s.i2, s.j), (3.0, 3.0, 1.0));

        let s = invariants(&(Tensor2::identity() * 2.0)).unwrap();
        assert_relative_eq!(s.i1, 12.0);
        assert_relative_eq!(s.i2, 48.0);
        assert_relative_eq!(s.j, 8.0);

        // Simple shear γ = 0.5: tr C = 3 + γ², tr cof C = 3 + γ².
        let mut f = Tensor2::identity();
        f[(0, 1)] = 0.5;
        let s = invariants(&f).unwrap();
        assert_relative_eq!(s.i1, 3.25, epsilon = 1e-15);
        assert_relative_eq!(s.i2, 3.25, epsilon = 1e-15);
        assert_relative_eq!(s.j, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn non_positive_jacobian_is_rejected() {
        let f = Tensor2::from_diagonal(&nalgebra::Vector3::new(-1.0, 1.0, 1.0));
        assert!(matches!(invariants(&f), Err(KinematicsError::NonPositiveJacobian(_))));
        assert!(invariants(&Tensor2::zeros()).is_err());
    }

    #[test]
    fn isochoric_invariants_match_formula() {
        let s = invariants(&Tensor2::identity()).unwrap();
        let (a, b, c) = isochoric_invariants(&s);
        assert_eq!((a, b), (3.0, 3.0));
        assert_relative_eq!(c, 3f64.powf(1.5), epsilon = 1e-14);

        let s = invariants(&(Tensor2::identity() * 2.0)).unwrap();
        let (a, b, _) = isochoric_invariants(&s);
        assert_relative_eq!(a, 3.0, epsilon = 1e-14);
        assert_relative_eq!(b, 3.0, epsilon = 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let f = random_f(&mut rng);
            let s = invariants(&f).unwrap();
            let c = f.transpose() * f;
            let i1 = c.trace();
            let i2 = 0.5 * (i1 * i1 - (c * c).trace());
            let j = f.determinant();
            let (a, b, c32) = isochoric_invariants(&s);
            assert_relative_eq!(a, i1 / j.cbrt().powi(2), max_relative = 1e-13);
            assert_relative_eq!(b, i2 / j.cbrt().powi(4), max_relative = 1e-13);
            assert_relative_eq!(c32, (i2 / j.cbrt().powi(4)).powf(1.5), max_relative = 1e-13);
        }
    }

    #[test]
    fn cofactor_identity_and_objectivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let f = random_f(&mut rng);
            let cof = cofactor(&f);
            let j = f.determinant();
            let lhs = f * cof.transpose();
            assert!((lhs - Tensor2::identity() * j).norm() <= 1e-12 * j.abs().max(1.0));

            let r = random_rotation(&mut rng);
            let s = invariants(&f).unwrap();
            for g in [r * f, f * r] {
                let t = invariants(&g).unwrap();
                assert_relative_eq!(t.i1, s.i1, max_relative = 1e-12);
                assert_relative_eq!(t.i2, s.i2, max_relative = 1e-12);
                assert_relative_eq!(t.j, s.j, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn plane_strain_embedding_keeps_determinant() {
        let f2 = Matrix2::new(1.3, 0.2, -0.1, 0.8);
        let f = embed_plane_strain(&f2);
        assert_relative_eq!(invariants(&f).unwrap().j, f2.determinant(), max_relative = 1e-15);
    }

    /// Bisection on the characteristic polynomial of `FᵀF`: an oracle
    /// independent of the closed-form solver.
    fn eigen_by_bisection(c: &Tensor2) -> Vec<f64> {
        let c2 = c.trace();
        let c1 = 0.5 * (c2 * c2 - (c * c).trace());
        let c0 = c.determinant();
        let chi = |l: f64| ((l - c2) * l + c1) * l - c0;
        let hi = c2 + 1.0;
        let n = 200_000;
        let mut roots = Vec::new();
        let mut prev = chi(0.0);
        for k in 1..=n {
            let x = hi * k as f64 / n as f64;
            let v = chi(x);
            if prev == 0.0 || prev.signum() != v.signum() {
                let (mut a, mut b) = (hi * (k - 1) as f64 / n as f64, x);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if chi(a).signum() == chi(m).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev = v;
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn principal_stretches_cases() {
        assert_eq!(principal_stretches(&Tensor2::identity()), [1.0, 1.0, 1.0]);
        let f = Tensor2::from_diagonal(&nalgebra::Vector3::new(1.2, 1.0, 0.9));
        let s = principal_stretches(&f);
        assert_relative_eq!(s[0], 1.2, epsilon = 1e-14);
        assert_relative_eq!(s[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s[2], 0.9, epsilon = 1e-14);

        let mut f = Tensor2::identity();
        f[(0, 1)] = 0.5;
        let s = principal_stretches(&f);
        let roots = eigen_by_bisection(&(f.transpose() * f));
        assert_eq!(roots.len(), 3);
        for (a, b) in s.iter().zip(&roots) {
            assert_relative_eq!(*a, b.sqrt(), max_relative = 1e-10);
        }
        // Shear: λ1 λ2 = 1 with λ1 = (γ + sqrt(γ² + 4)) / 2.
        assert_relative_eq!(s[0], (0.5 + (4.25f64).sqrt()) / 2.0, max_relative = 1e-13);
    }

    #[test]
    fn principal_stretch_product_is_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let f = random_f(&mut rng);
            let s = principal_stretches(&f);
            assert!(s[0] >= s[1] && s[1] >= s[2]);
            assert_relative_eq!(s[0] * s[1] * s[2], f.determinant(), max_relative = 1e-10);
        }
    }

    #[test]
    fn plane_stretches_match_full_solver() {
        let f = embed_plane_strain(&Matrix2::new(1.3, 0.4, 0.1, 0.7));
        let p = principal_stretches_plane(&f);
        let full = principal_stretches(&f);
        let mut inplane: Vec<f64> = full.iter().copied().filter(|x| (x - 1.0).abs() > 1e-9).collect();
        inplane.sort_by(|a, b| b.total_cmp(a));
        assert_relative_eq!(p[0], inplane[0], max_relative = 1e-12);
        assert_relative_eq!(p[1], inplane[1], max_relative = 1e-12);
    }

    #[test]
    fn canonical_deformations() {
        for kind in CanonicalKind::ALL {
            assert_eq!(canonical_deformation(&CanonicalDeformation::new(kind, 0.0)), Tensor2::identity());
        }
        let f = canonical_deformation(&CanonicalDeformation::new(CanonicalKind::UniaxialTension, 0.5));
        assert_eq!(f, Tensor2::from_diagonal(&nalgebra::Vector3::new(1.5, 1.0, 1.0)));
        let f = canonical_deformation(&CanonicalDeformation::new(CanonicalKind::SimpleShear, 0.5));
        let mut expected = Tensor2::identity();
        expected[(0, 1)] = 0.5;
        assert_eq!(f, expected);
        let f = canonical_deformation(&CanonicalDeformation::new(CanonicalKind::BiaxialCompression, 0.25));
        assert_relative_eq!(f[(0, 0)], 0.8);
        assert_relative_eq!(f[(1, 1)], 0.8);
        assert_eq!(f[(2, 2)], 1.0);
    }
}
