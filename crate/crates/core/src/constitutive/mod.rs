//! Strain energies, first Piola-Kirchhoff stresses, material tangents and
//! parameter sensitivities for the analytic laws and the hyperelastic neural
//! network (HNN) family.
//!
//! Every model is a function of the invariants `(I1, I2, J)`. Models report
//! an [`EnergyEval`] (value, gradient and Hessian with respect to the
//! invariants); stresses and tangents are assembled from it here, so the
//! tensor algebra exists exactly once.

mod analytic;
mod checkpoint;
mod hnn;
mod invariant_map;

pub use analytic::{AnalyticKind, AnalyticModel};
pub use checkpoint::{deserialize_model, hex_f64, parse_hex_f64, serialize_model, Checkpoint, CheckpointMeta, CHECKPOINT_SCHEMA_VERSION};
pub use hnn::{
    hnn_energy, init_params, pnn_forward, shifted_softplus, sigmoid, softplus, softplus_inverse,
    Hnn, HnnArchitecture, HnnParams, HnnPreset, LayerParams,
};
pub use invariant_map::InvariantMap;

use crate::kinematics::{invariants, DeformationState, Invariants, KinematicsError, Tensor2};
use nalgebra::{Matrix3, SMatrix, Vector3};

/// Fourth-order tangent `A_{ijkl} = ∂P_ij/∂F_kl` stored as a 9×9 matrix with
/// row index `3i + j` and column index `3k + l`.
pub type Tangent = SMatrix<f64, 9, 9>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstitutiveError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed checkpoint: {0}")]
    MalformedCheckpoint(String),
}

impl ConstitutiveError {
    pub fn is_non_positive_jacobian(&self) -> bool {
        matches!(self, ConstitutiveError::Kinematics(KinematicsError::NonPositiveJacobian(_)))
    }
}

/// Strain energy value with first and second derivatives with respect to
/// `(I1, I2, J)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEval {
    pub w: f64,
    pub dw: Vector3<f64>,
    pub d2w: Matrix3<f64>,
}

impl EnergyEval {
    pub fn zero() -> Self {
        Self { w: 0.0, dw: Vector3::zeros(), d2w: Matrix3::zeros() }
    }
}

/// Any strain energy expressible through `(I1, I2, J)`, with trainable raw
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstitutiveModel {
    Analytic(AnalyticModel),
    Hnn(Box<Hnn>),
}

impl From<AnalyticModel> for ConstitutiveModel {
    fn from(m: AnalyticModel) -> Self {
        ConstitutiveModel::Analytic(m)
    }
}

impl From<Hnn> for ConstitutiveModel {
    fn from(m: Hnn) -> Self {
        ConstitutiveModel::Hnn(Box::new(m))
    }
}

impl ConstitutiveModel {
    pub fn energy(&self, inv: Invariants) -> Result<EnergyEval, ConstitutiveError> {
        if !(inv.j > 0.0) {
            return Err(KinematicsError::NonPositiveJacobian(inv.j).into());
        }
        Ok(match self {
            ConstitutiveModel::Analytic(m) => m.energy(inv),
            ConstitutiveModel::Hnn(m) => m.energy(inv),
        })
    }

    /// Characteristic stiffness (energy-density units), used to scale
    /// solver tolerances.
    pub fn stiffness_scale(&self) -> f64 {
        match self {
            ConstitutiveModel::Analytic(m) => m.stiffness_scale(),
            ConstitutiveModel::Hnn(m) => m.arch().w_scale,
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            ConstitutiveModel::Analytic(m) => m.n_params(),
            ConstitutiveModel::Hnn(m) => m.n_params(),
        }
    }

    /// Unconstrained parameter vector seen by the optimizer.
    pub fn raw_params(&self) -> Vec<f64> {
        match self {
            ConstitutiveModel::Analytic(m) => m.raw_params(),
            ConstitutiveModel::Hnn(m) => m.params().flatten(),
        }
    }

    pub fn with_raw_params(&self, raw: &[f64]) -> Result<Self, ConstitutiveError> {
        Ok(match self {
            ConstitutiveModel::Analytic(m) => ConstitutiveModel::Analytic(m.with_raw_params(raw)?),
            ConstitutiveModel::Hnn(m) => {
                let params = HnnParams::unflatten(m.arch(), raw)?;
                ConstitutiveModel::Hnn(Box::new(Hnn::new(m.arch().clone(), params)?))
            }
        })
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            ConstitutiveModel::Analytic(m) => m.kind.coefficient_names().iter().map(|s| format!("raw_{s}")).collect(),
            ConstitutiveModel::Hnn(m) => m.params().flat_names(m.arch()),
        }
    }

    /// Accumulates `∂/∂θ [ Σ_k seed_k ∂W/∂I_k ]` over the raw parameters into
    /// `out` (at the invariants `inv`).
    pub fn accumulate_seeded_param_gradient(&self, inv: Invariants, seed: [f64; 3], out: &mut [f64]) {
        match self {
            ConstitutiveModel::Analytic(m) => m.accumulate_seeded_param_gradient(inv, seed, out),
            ConstitutiveModel::Hnn(m) => m.accumulate_seeded_param_gradient(inv, seed, out),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConstitutiveModel::Analytic(m) => m.kind.tag().to_string(),
            ConstitutiveModel::Hnn(m) => {
                let a = m.arch();
                format!(
                    "hnn(L={},n={:?},skip={},iso={},W={},sigma={})",
                    a.neurons.len(),
                    a.neurons,
                    a.skip,
                    a.isochoric,
                    a.w_scale,
                    a.sigma_init
                )
            }
        }
    }
}

/// Derivatives of `(I1, I2, J)` with respect to `F`.
pub(crate) fn invariant_gradients(s: &DeformationState) -> [Tensor2; 3] {
    let f = s.f;
    let g1 = f * 2.0;
    let g2 = (f * s.i1 - f * f.transpose() * f) * 2.0;
    [g1, g2, s.cof_f]
}

/// `P = Σ_k ∂W/∂I_k ∂I_k/∂F`.
pub fn stress_from_eval(s: &DeformationState, e: &EnergyEval) -> Tensor2 {
    let g = invariant_gradients(s);
    g[0] * e.dw[0] + g[1] * e.dw[1] + g[2] * e.dw[2]
}

fn idx(i: usize, j: usize) -> usize {
    3 * i + j
}

fn levi(i: usize, j: usize, k: usize) -> f64 {
    if i == j || j == k || i == k {
        0.0
    } else if (i, j, k) == (0, 1, 2) || (i, j, k) == (1, 2, 0) || (i, j, k) == (2, 0, 1) {
        1.0
    } else {
        -1.0
    }
}

/// Exact tangent assembled from the invariant Hessian and the second
/// derivatives of the invariants with respect to `F`.
pub fn tangent_from_eval(s: &DeformationState, e: &EnergyEval) -> Tangent {
    let f = s.f;
    let c = f.transpose() * f;
    let b = f * f.transpose();
    let g = invariant_gradients(s);
    let gv: [SMatrix<f64, 9, 1>; 3] = g.map(|t| {
        let mut v = SMatrix::<f64, 9, 1>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                v[idx(i, j)] = t[(i, j)];
            }
        }
        v
    });
    let mut a = Tangent::zeros();
    for k in 0..3 {
        for l in 0..3 {
            let w = e.d2w[(k, l)];
            if w != 0.0 {
                a += gv[k] * gv[l].transpose() * w;
            }
        }
    }
    let (w1, w2, w3) = (e.dw[0], e.dw[1], e.dw[2]);
    let d = |p: usize, q: usize| if p == q { 1.0 } else { 0.0 };
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    let mut v = 2.0 * w1 * d(i, k) * d(j, l);
                    if w2 != 0.0 {
                        v += w2
                            * 2.0
                            * (2.0 * f[(i, j)] * f[(k, l)] + s.i1 * d(i, k) * d(j, l)
                                - d(i, k) * c[(l, j)]
                                - f[(i, l)] * f[(k, j)]
                                - b[(i, k)] * d(j, l));
                    }
                    if w3 != 0.0 {
                        let mut hj = 0.0;
                        for m in 0..3 {
                            let e1 = levi(i, k, m);
                            if e1 == 0.0 {
                                continue;
                            }
                            for n in 0..3 {
                                hj += e1 * levi(j, l, n) * f[(m, n)];
                            }
                        }
                        v += w3 * hj;
                    }
                    a[(idx(i, j), idx(k, l))] += v;
                }
            }
        }
    }
    a
}

pub fn piola_stress(model: &ConstitutiveModel, f: &Tensor2) -> Result<Tensor2, ConstitutiveError> {
    let s = invariants(f)?;
    let e = model.energy(s.invariants())?;
    Ok(stress_from_eval(&s, &e))
}

pub fn material_tangent(model: &ConstitutiveModel, f: &Tensor2) -> Result<Tangent, ConstitutiveError> {
    let s = invariants(f)?;
    let e = model.energy(s.invariants())?;
    Ok(tangent_from_eval(&s, &e))
}

pub fn strain_energy(model: &ConstitutiveModel, f: &Tensor2) -> Result<f64, ConstitutiveError> {
    let s = invariants(f)?;
    Ok(model.energy(s.invariants())?.w)
}

/// `∂P/∂θ` for every raw parameter.
pub fn stress_param_gradient(model: &ConstitutiveModel, f: &Tensor2) -> Result<Vec<Tensor2>, ConstitutiveError> {
    let s = invariants(f)?;
    let inv = s.invariants();
    let np = model.n_params();
    let g = invariant_gradients(&s);
    let mut out = vec![Tensor2::zeros(); np];
    let mut col = vec![0.0; np];
    for k in 0..3 {
        col.iter_mut().for_each(|c| *c = 0.0);
        let mut seed = [0.0; 3];
        seed[k] = 1.0;
        model.accumulate_seeded_param_gradient(inv, seed, &mut col);
        for (o, c) in out.iter_mut().zip(&col) {
            *o += g[k] * *c;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
