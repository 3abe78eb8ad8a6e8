use super::hnn::{sigmoid, softplus, softplus_inverse};
use super::{ConstitutiveError, EnergyEval, InvariantMap};
use crate::kinematics::Invariants;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalyticKind {
    /// Compressible neo-Hookean; the Mooney-Rivlin law with `C2 = 0`.
    #[serde(rename = "nh")]
    NeoHookean,
    /// Ishihara, `(C1, C2, C3, K)`.
    #[serde(rename = "ih")]
    Ishihara,
    /// Mooney-Rivlin, `(C1, C2, K)`.
    #[serde(rename = "mr")]
    MooneyRivlin,
    /// Fung, `(C, b, K)`.
    #[serde(rename = "fu")]
    Fung,
}

impl AnalyticKind {
    pub const ALL: [AnalyticKind; 4] =
        [AnalyticKind::NeoHookean, AnalyticKind::Ishihara, AnalyticKind::MooneyRivlin, AnalyticKind::Fung];

    pub fn tag(self) -> &'static str {
        match self {
            AnalyticKind::NeoHookean => "nh",
            AnalyticKind::Ishihara => "ih",
            AnalyticKind::MooneyRivlin => "mr",
            AnalyticKind::Fung => "fu",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag().eq_ignore_ascii_case(tag))
    }

    pub fn coefficient_names(self) -> &'static [&'static str] {
        match self {
            AnalyticKind::NeoHookean => &["C1", "K"],
            AnalyticKind::Ishihara => &["C1", "C2", "C3", "K"],
            AnalyticKind::MooneyRivlin => &["C1", "C2", "K"],
            AnalyticKind::Fung => &["C", "b", "K"],
        }
    }

    pub fn default_coefficients(self) -> Vec<f64> {
        match self {
            AnalyticKind::NeoHookean => vec![1.0, 1.0],
            AnalyticKind::Ishihara => vec![0.5, 1.0, 3.0, 1.5],
            AnalyticKind::MooneyRivlin => vec![1.0, 0.8, 1.0],
            AnalyticKind::Fung => vec![1.0, 3.0, 1.5],
        }
    }

    fn map(self) -> InvariantMap {
        match self {
            AnalyticKind::NeoHookean | AnalyticKind::MooneyRivlin => InvariantMap::Native,
            AnalyticKind::Ishihara | AnalyticKind::Fung => InvariantMap::Isochoric,
        }
    }
}

/// Closed-form strain energy with strictly positive coefficients. The
/// optimizer sees `softplus^{-1}` of each coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticModel {
    pub kind: AnalyticKind,
    coeffs: Vec<f64>,
    raw: Vec<f64>,
}

impl AnalyticModel {
    pub fn new(kind: AnalyticKind, coeffs: Vec<f64>) -> Result<Self, ConstitutiveError> {
        let expected = kind.coefficient_names().len();
        if coeffs.len() != expected {
            return Err(ConstitutiveError::InvalidParameters(format!(
                "{} expects {expected} coefficients, got {}",
                kind.tag(),
                coeffs.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(ConstitutiveError::InvalidParameters(format!("coefficient {c} must be finite and positive")));
        }
        let raw = coeffs.iter().map(|&c| softplus_inverse(c)).collect();
        Ok(Self { kind, coeffs, raw })
    }

    pub fn with_defaults(kind: AnalyticKind) -> Self {
        Self::new(kind, kind.default_coefficients()).expect("defaults are valid")
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_params(&self) -> usize {
        self.coeffs.len()
    }

    pub fn raw_params(&self) -> Vec<f64> {
        self.raw.clone()
    }

    pub fn with_raw_params(&self, raw: &[f64]) -> Result<Self, ConstitutiveError> {
        if raw.iter().any(|r| !r.is_finite()) {
            return Err(ConstitutiveError::InvalidParameters("non-finite raw parameter".into()));
        }
        let mut m = Self::new(self.kind, raw.iter().map(|&r| softplus(r)).collect())?;
        m.raw = raw.to_vec();
        Ok(m)
    }

    pub fn stiffness_scale(&self) -> f64 {
        let c = &self.coeffs;
        match self.kind {
            AnalyticKind::Fung => c[0].max(c[2]),
            _ => c.iter().cloned().fold(0.0, f64::max),
        }
    }

    pub fn energy(&self, inv: Invariants) -> EnergyEval {
        let map = self.kind.map();
        let m = map.map(inv);
        let e = self.energy_mapped(m.u);
        InvariantMap::pull_back(&m, &e)
    }

    fn energy_mapped(&self, u: Vector3<f64>) -> EnergyEval {
        let c = &self.coeffs;
        let (u1, u2, j) = (u[0], u[1], u[2]);
        let lj = j.ln();
        let mut dw = Vector3::zeros();
        let mut d2w = Matrix3::zeros();
        let w = match self.kind {
            AnalyticKind::NeoHookean | AnalyticKind::MooneyRivlin => {
                let (c1, c2, k) = if self.kind == AnalyticKind::NeoHookean { (c[0], 0.0, c[1]) } else { (c[0], c[1], c[2]) };
                dw[0] = c1;
                dw[1] = c2;
                dw[2] = -(2.0 * c1 + 4.0 * c2) / j + 0.5 * k * (lj + (j - 1.0) / j);
                d2w[(2, 2)] = (2.0 * c1 + 4.0 * c2) / (j * j) + 0.5 * k * (1.0 / j + 1.0 / (j * j));
                c1 * (u1 - 3.0 - 2.0 * lj) + c2 * (u2 - 3.0 - 4.0 * lj) + 0.5 * k * (j - 1.0) * lj
            }
            AnalyticKind::Ishihara => {
                let (c1, c2, c3, k) = (c[0], c[1], c[2], c[3]);
                let x = u1 - 3.0;
                dw[0] = c1 + 2.0 * c3 * x;
                dw[1] = c2;
                dw[2] = 2.0 * k * (j - 1.0);
                d2w[(0, 0)] = 2.0 * c3;
                d2w[(2, 2)] = 2.0 * k;
                c1 * x + c2 * (u2 - 3.0) + c3 * x * x + k * (j - 1.0) * (j - 1.0)
            }
            AnalyticKind::Fung => {
                let (cc, b, k) = (c[0], c[1], c[2]);
                let ex = (b * (u1 - 3.0)).exp();
                dw[0] = 0.5 * cc * ex;
                d2w[(0, 0)] = 0.5 * cc * b * ex;
                dw[2] = 0.5 * k * ((j - 1.0) + lj / j);
                d2w[(2, 2)] = 0.5 * k * (1.0 + (1.0 - lj) / (j * j));
                cc / (2.0 * b) * (b * (u1 - 3.0)).exp_m1() + 0.25 * k * ((j - 1.0).powi(2) + lj * lj)
            }
        };
        EnergyEval { w, dw, d2w }
    }

    /// `∂(∂W/∂u)/∂c_p` in mapped variables, one column per coefficient.
    fn mapped_gradient_sensitivity(&self, u: Vector3<f64>) -> Vec<Vector3<f64>> {
        let c = &self.coeffs;
        let (u1, j) = (u[0], u[2]);
        let lj = j.ln();
        let vol_mr = 0.5 * (lj + (j - 1.0) / j);
        match self.kind {
            AnalyticKind::NeoHookean => vec![Vector3::new(1.0, 0.0, -2.0 / j), Vector3::new(0.0, 0.0, vol_mr)],
            AnalyticKind::MooneyRivlin => vec![
                Vector3::new(1.0, 0.0, -2.0 / j),
                Vector3::new(0.0, 1.0, -4.0 / j),
                Vector3::new(0.0, 0.0, vol_mr),
            ],
            AnalyticKind::Ishihara => vec![
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 1.0, 0.0),
                Vector3::new(2.0 * (u1 - 3.0), 0.0, 0.0),
                Vector3::new(0.0, 0.0, 2.0 * (j - 1.0)),
            ],
            AnalyticKind::Fung => {
                let ex = (c[1] * (u1 - 3.0)).exp();
                vec![
                    Vector3::new(0.5 * ex, 0.0, 0.0),
                    Vector3::new(0.5 * c[0] * (u1 - 3.0) * ex, 0.0, 0.0),
                    Vector3::new(0.0, 0.0, 0.5 * ((j - 1.0) + lj / j)),
                ]
            }
        }
    }

    pub fn accumulate_seeded_param_gradient(&self, inv: Invariants, seed: [f64; 3], out: &mut [f64]) {
        let m = self.kind.map().map(inv);
        let c = m.jac * Vector3::from(seed);
        let raw = &self.raw;
        for (p, col) in self.mapped_gradient_sensitivity(m.u).into_iter().enumerate() {
            out[p] += col.dot(&c) * sigmoid(raw[p]);
        }
    }
}
