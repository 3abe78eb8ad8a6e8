//! Vector P1 finite elements for finite-strain hyperelasticity.

mod assembly;
mod bc;
mod interp;
mod io;
mod solver;
mod space;

pub use assembly::{
    assemble_energy, assemble_residual, assemble_residual_full, assemble_system, assemble_tangent,
    cell_deformation_gradients, reaction_force_full, reaction_sensitivity, reaction_vector_full,
    residual_param_vjp, ReactionSensitivity, SparseMatrix,
};
#[cfg(test)]
use assembly::deformed_area_vector;
pub use bc::{BcProgram, BoundaryCondition, DisplacementField};
pub use interp::{interpolate_at, interpolate_displacement, locate_points, PointLocation, PointLocator};
pub use io::{read_solution, write_solution};
pub use solver::{
    continuation_path, continuation_solve, newton_solve, newton_tolerance, EquilibriumSolution, NewtonOptions,
    SparseLu,
};
pub use space::FeSpace;

use crate::constitutive::{ConstitutiveError, ConstitutiveModel};

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("element {0} is inverted (det F <= 0)")]
    ElementInversion(usize),
    #[error(transparent)]
    Constitutive(ConstitutiveError),
    #[error("boundary program references unknown tag {0:?}")]
    UnknownTag(String),
    #[error("no Dirichlet or spring condition: rigid-body modes are not removed")]
    RigidBodyModes,
    #[error("normal constraint on tag {tag:?} needs axis-aligned facets (facet {facet})")]
    NonAxisAligned { tag: String, facet: usize },
    #[error("conflicting constraints on node {node}, component {component}")]
    ConflictingConstraint { node: usize, component: usize },
    #[error("tag {0:?} carries no Dirichlet condition")]
    TagNotDirichlet(String),
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("continuation failed at load {last_load} (target {target}): {reason}")]
    ContinuationFailure { last_load: f64, target: f64, reason: String },
    #[error("point {0} lies outside the mesh")]
    PointOutsideMesh(usize),
    #[error("state has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state contains non-finite values")]
    NonFiniteState,
    #[error("malformed solution file, line {line}: {message}")]
    MalformedSolutionFile { line: usize, message: String },
}

/// Reaction `∫ (P N)·N dA` on a Dirichlet tag for a solution.
pub fn reaction_force(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    solution: &EquilibriumSolution,
    tag: &str,
) -> Result<f64, FemError> {
    reaction_force_full(space, bc, model, &solution.full(space), tag)
}

/// Vector reaction `∫ P N dA` on a Dirichlet tag.
pub fn reaction_vector(
    space: &FeSpace,
    bc: &BcProgram,
    model: &ConstitutiveModel,
    solution: &EquilibriumSolution,
    tag: &str,
) -> Result<[f64; 3], FemError> {
    reaction_vector_full(space, bc, model, &solution.full(space), tag)
}

#[cfg(test)]
mod tests;
