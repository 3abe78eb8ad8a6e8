use super::EnergyEval;
use crate::kinematics::Invariants;
use nalgebra::{Matrix3, Vector3};

/// Change of variables from `(I1, I2, J)` to the variables a model is
/// written in. Derivatives computed in the mapped variables are pulled back
/// with [`InvariantMap::pull_back`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvariantMap {
    /// `(I1, I2, J)`.
    Native,
    /// `(J^{-2/3} I1, J^{-4/3} I2, J)`.
    Isochoric,
    /// `(J^{-2/3} I1, (J^{-4/3} I2)^{3/2}, J)`.
    IsochoricPow32,
}

/// Mapped values with Jacobian `jac[(a, k)] = ∂u_a/∂I_k` and Hessians
/// `hess[a][(k, l)] = ∂²u_a/∂I_k∂I_l`.
#[derive(Debug, Clone, Copy)]
pub struct MappedInvariants {
    pub u: Vector3<f64>,
    pub jac: Matrix3<f64>,
    pub hess: [Matrix3<f64>; 3],
}

/// `x J^p`, evaluated in the log domain when the power alone overflows.
fn scaled(x: f64, j: f64, p: f64) -> f64 {
    let a = j.powf(p);
    if a.is_finite() || x <= 0.0 {
        x * a
    } else {
        (x.ln() + p * j.ln()).exp()
    }
}

impl InvariantMap {
    pub fn map(self, inv: Invariants) -> MappedInvariants {
        let Invariants { i1, i2, j } = inv;
        let mut jac = Matrix3::identity();
        let mut hess = [Matrix3::zeros(); 3];
        let u = match self {
            InvariantMap::Native => Vector3::new(i1, i2, j),
            InvariantMap::Isochoric | InvariantMap::IsochoricPow32 => {
                let a = j.powf(-2.0 / 3.0);
                let u1 = scaled(i1, j, -2.0 / 3.0);
                jac[(0, 0)] = a;
                jac[(0, 2)] = -2.0 / 3.0 * u1 / j;
                hess[0][(0, 2)] = -2.0 / 3.0 * a / j;
                hess[0][(2, 0)] = hess[0][(0, 2)];
                hess[0][(2, 2)] = 10.0 / 9.0 * u1 / (j * j);
                let u2 = if self == InvariantMap::Isochoric {
                    let b = a * a;
                    let u2 = scaled(i2, j, -4.0 / 3.0);
                    jac[(1, 1)] = b;
                    jac[(1, 2)] = -4.0 / 3.0 * u2 / j;
                    hess[1][(1, 2)] = -4.0 / 3.0 * b / j;
                    hess[1][(2, 1)] = hess[1][(1, 2)];
                    hess[1][(2, 2)] = 28.0 / 9.0 * u2 / (j * j);
                    u2
                } else {
                    // Through J^{-4/3} so that strong compression stays finite.
                    let b = a * a;
                    let sq = i2.sqrt();
                    let ib = scaled(i2, j, -4.0 / 3.0);
                    let u2 = ib * ib.sqrt();
                    let d1 = 1.5 * sq * b * b.sqrt();
                    jac[(1, 1)] = d1;
                    jac[(1, 2)] = -2.0 * u2 / j;
                    hess[1][(1, 1)] = if sq > 0.0 { 0.5 * d1 / i2 } else { f64::INFINITY };
                    hess[1][(1, 2)] = -2.0 * d1 / j;
                    hess[1][(2, 1)] = hess[1][(1, 2)];
                    hess[1][(2, 2)] = 6.0 * u2 / (j * j);
                    u2
                };
                Vector3::new(u1, u2, j)
            }
        };
        MappedInvariants { u, jac, hess }
    }

    /// Mapped values at the reference configuration.
    pub fn reference(self) -> Vector3<f64> {
        match self {
            InvariantMap::Native | InvariantMap::Isochoric => Vector3::new(3.0, 3.0, 1.0),
            InvariantMap::IsochoricPow32 => Vector3::new(3.0, 3.0f64.powf(1.5), 1.0),
        }
    }

    /// Converts value/gradient/Hessian in mapped variables to `(I1, I2, J)`.
    pub fn pull_back(m: &MappedInvariants, e: &EnergyEval) -> EnergyEval {
        let dw = m.jac.transpose() * e.dw;
        let mut d2w = m.jac.transpose() * e.d2w * m.jac;
        for a in 0..3 {
            if e.dw[a] != 0.0 {
                d2w += m.hess[a] * e.dw[a];
            }
        }
        EnergyEval { w: e.w, dw, d2w }
    }
}
