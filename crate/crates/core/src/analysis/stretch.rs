use crate::experiments::Experiment;
use crate::fem::{cell_deformation_gradients, EquilibriumSolution};
use crate::kinematics::{principal_stretches, principal_stretches_plane};

/// Principal stretches sampled at the single quadrature point of every cell,
/// in descending order. 2D clouds hold in-plane pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct StretchCloud {
    pub dim: usize,
    pub samples: Vec<Vec<f64>>,
    /// Jacobian of the sampled cell.
    pub jacobians: Vec<f64>,
}

impl StretchCloud {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn merge(mut self, other: StretchCloud) -> Self {
        assert_eq!(self.dim, other.dim);
        self.samples.extend(other.samples);
        self.jacobians.extend(other.jacobians);
        self
    }
}

pub fn stretch_cloud(experiments: &[Experiment], solutions: &[EquilibriumSolution]) -> StretchCloud {
    let dim = experiments.first().map_or(2, |e| e.space.dim());
    let mut samples = Vec::new();
    let mut jacobians = Vec::new();
    for (e, s) in experiments.iter().zip(solutions) {
        for f in cell_deformation_gradients(&e.space, &s.full(&e.space)) {
            let v = if dim == 2 { principal_stretches_plane(&f).to_vec() } else { principal_stretches(&f).to_vec() };
            samples.push(v);
            jacobians.push(f.determinant());
        }
    }
    StretchCloud { dim, samples, jacobians }
}
