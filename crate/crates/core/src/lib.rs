//! Finite element discovery of hyperelastic strain energies from full-field
//! displacement and reaction-force data.
//!
//! The crate is organised bottom-up: [`kinematics`] and [`constitutive`]
//! evaluate material response at a point, [`mesh`] and [`fem`] solve the
//! nonlinear boundary value problems, [`discovery`] trains neural strain
//! energies through the adjoint method, [`experiments`] builds the benchmark
//! setups and datasets, and [`analysis`] computes the reported metrics.

pub mod analysis;
pub mod constitutive;
pub mod discovery;
pub mod experiments;
pub mod fem;
pub mod kinematics;
pub mod mesh;
pub mod verify;
