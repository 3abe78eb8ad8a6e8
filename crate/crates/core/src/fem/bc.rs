use crate::mesh::Point;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Prescribed displacement as a function of position and load scale `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisplacementField {
    /// `g = s · value`
    Uniform { value: [f64; 3] },
    /// `g = s · H X`, the displacement of a homogeneous deformation.
    Affine { gradient: [[f64; 3]; 3] },
    /// Axial lift `s · axial` along z combined with a rigid rotation about
    /// the z axis through `center` by `θ = s · twist`.
    TensionTorsion { center: [f64; 2], axial: f64, twist: f64 },
}

impl DisplacementField {
    pub fn eval(&self, x: &Point, s: f64) -> [f64; 3] {
        match self {
            DisplacementField::Uniform { value } => [s * value[0], s * value[1], s * value[2]],
            DisplacementField::Affine { gradient } => {
                let mut g = [0.0; 3];
                for (gi, row) in g.iter_mut().zip(gradient) {
                    *gi = s * (row[0] * x[0] + row[1] * x[1] + row[2] * x[2]);
                }
                g
            }
            DisplacementField::TensionTorsion { center, axial, twist } => {
                let th = s * twist;
                let (sn, cs) = th.sin_cos();
                let (x0, y0) = (x[0] - center[0], x[1] - center[1]);
                [(cs - 1.0) * x0 - sn * y0, sn * x0 + (cs - 1.0) * y0, s * axial]
            }
        }
    }
}

/// Boundary condition attached to one facet tag. Every load-dependent
/// quantity is multiplied by the load scale `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCondition {
    DirichletVector { field: DisplacementField },
    /// `d · n = s · value` with tangential traction free. Facets must be
    /// axis aligned.
    DirichletNormal { value: f64 },
    /// Dead load `h = s (traction + normal · N)`, `N` the reference normal.
    Traction { traction: [f64; 3], normal: f64 },
    /// `P N + k (N ⊗ N) d = s (traction + normal · N)`.
    NormalSpring { stiffness: f64, traction: [f64; 3], normal: f64 },
    /// `P N = −s · pressure · cof(F) N + s · dead`.
    FollowerPressure { pressure: f64, dead: [f64; 3] },
    Free,
}

impl BoundaryCondition {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::DirichletVector { .. } | BoundaryCondition::DirichletNormal { .. })
    }

    pub fn spring(stiffness: f64) -> Self {
        BoundaryCondition::NormalSpring { stiffness, traction: [0.0; 3], normal: 0.0 }
    }
}

/// One condition per boundary tag. Tags absent from the program are free.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BcProgram {
    pub conditions: BTreeMap<String, BoundaryCondition>,
}

impl BcProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: &str, bc: BoundaryCondition) -> Self {
        self.conditions.insert(tag.to_string(), bc);
        self
    }

    pub fn get(&self, tag: &str) -> &BoundaryCondition {
        self.conditions.get(tag).unwrap_or(&BoundaryCondition::Free)
    }

    pub fn dirichlet_tags(&self) -> Vec<String> {
        self.conditions.iter().filter(|(_, c)| c.is_dirichlet()).map(|(t, _)| t.clone()).collect()
    }

    /// True when some condition anchors the body (Dirichlet data or springs).
    pub fn removes_rigid_modes(&self) -> bool {
        self.conditions.values().any(|c| {
            c.is_dirichlet() || matches!(c, BoundaryCondition::NormalSpring { stiffness, .. } if *stiffness > 0.0)
        })
    }
}
