//! Mixed finite element solver for the 2D incompressible Navier-Stokes equations.
//!
//! The viscous term uses the full deviatoric symmetric stress
//! `ν(∇u + ∇uᵀ − ⅔(∇·u)I)` with interior-penalty face terms, discretized on
//! Taylor-Hood or H(div)-conforming (BDM/RT) velocity spaces. Time stepping is
//! BDF3 with Picard linearization of the convective term; each linear system is
//! solved by sparse LU with a Lagrange multiplier fixing the pressure mean.

pub mod analysis;
pub mod cli;
pub mod element;
pub mod error;
pub mod forms;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
