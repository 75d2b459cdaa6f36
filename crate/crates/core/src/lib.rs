//! Phase-field topology optimization of compliant morphing structures.
//!
//! A structure is made of three phases: void, a passive elastic material and
//! a responsive material that develops an isotropic inelastic strain `β s I`
//! under a scalar stimulus `s ∈ [-1, 1]`. The toolkit co-designs the nodal
//! densities of the two solid phases and one stimulus field per load case so
//! that a target subregion moves toward prescribed displacements, while a
//! multi-well phase-field energy penalizes interfaces.
//!
//! Module map:
//!
//! - [`mesh`]: structured P1 triangulations of rectangles and hexagons
//! - [`materials`]: isotropic responsive Hooke's laws and interpolation
//! - [`fields`]: nodal design / stimulus / vector containers
//! - [`linsolve`]: CSR storage and Jacobi-preconditioned CG
//! - [`elasticity`]: state and adjoint assembly and solves
//! - [`functional`]: objective terms and the phase-field perimeter
//! - [`sensitivity`]: adjoint gradients of the reduced objective
//! - [`stimulus_update`]: closed-form pointwise stimulus minimization
//! - [`optimizer`]: bounded nonlinear CG and the two outer schemes
//! - [`driver`]: configuration, orchestration and file export
//! - [`verify`]: independent oracles (finite differences, grid search, 1D profiles)

pub mod driver;
pub mod elasticity;
pub mod error;
pub mod fields;
pub mod functional;
pub mod linsolve;
pub mod materials;
pub mod mesh;
pub mod optimizer;
pub mod problem;
pub mod quadrature;
pub mod sensitivity;
pub mod stimulus_update;
pub mod verify;

pub use error::{Error, Result};
pub use fields::{DesignField, StimulusField, TargetDisplacement, VectorField};
pub use materials::{Material, PhaseSet};
pub use mesh::Mesh;
pub use problem::DesignProblem;

/// Spatial dimension. Everything in this crate is planar.
pub const DIM: usize = 2;
