//! Weak solutions of doubly nonlinear elliptic Neumann problems
//!
//! ```text
//!   -div a(x, ∇U) = f(x, U)   in Ω,     a(x, ∇U)·ν = 0 on ∂Ω,     0 ≤ U ≤ δ₀
//! ```
//!
//! with a variable-exponent diffusion law `a(x, ξ) = Ψ(x, |ξ|) ξ` and a
//! generalized logistic source `f`. Everything is discretized with piecewise
//! linear elements on a 1D interval or a triangulated rectangle, with mass
//! lumping for every zero-order term.
//!
//! The crate is organised bottom-up:
//!
//! * [`varexp`]: modulars and Luxemburg norms of discrete fields.
//! * [`flux`]: diffusion laws, their potentials and structural checks.
//! * [`sources`]: the reaction/capacity pair `(f, b)` and its extensions.
//! * [`mesh`], [`energy`]: meshes, quadrature and assembly of the energies.
//! * [`solver`]: damped Newton on the perturbed energy, ε-continuation and
//!   the operator 𝒦.
//! * [`steady`]: monotone 𝒦-iteration to extremal steady states.
//! * [`rothe`]: implicit time stepping of the parabolic problem.
//! * [`harness`]: the config-driven experiment runner behind `dnp-steady`.

pub mod banded;
pub mod energy;
pub mod error;
pub mod expr;
pub mod flux;
pub mod harness;
pub mod mesh;
pub mod quadrature;
pub mod rothe;
pub mod solver;
pub mod sources;
pub mod steady;
pub mod varexp;

use std::sync::Arc;

pub use error::{Error, Result};
pub use flux::FluxOperator;
pub use mesh::{DiscreteField, Mesh, MeshSpec};
pub use solver::{SolveOptions, SolveReport};
pub use sources::SourceSystem;
pub use varexp::ExponentField;

/// A point of Ω̄. One-dimensional meshes keep `y = 0`.
pub type Point = [f64; 2];

/// A spatially varying coefficient `x ↦ c(x)`.
pub type Coefficient = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// A Carathéodory-type evaluator `(x, s) ↦ h(x, s)`.
pub type Pointwise = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// Wraps a closure as a [`Coefficient`].
pub fn coefficient<F>(f: F) -> Coefficient
where
    F: Fn(Point) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// Wraps a closure as a [`Pointwise`] evaluator.
pub fn pointwise<F>(f: F) -> Pointwise
where
    F: Fn(Point, f64) -> f64 + Send + Sync + 'static,
{
    Arc::new(f)
}

/// A constant coefficient.
pub fn constant(c: f64) -> Coefficient {
    Arc::new(move |_| c)
}
