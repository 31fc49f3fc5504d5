//! Shear-modulus imaging on structured 2D grids.
//!
//! A soft solid vibrated at a fixed frequency responds with a
//! time-harmonic displacement governed by an incompressible linear
//! viscoelastic model: the complex shear modulus `mu + i omega eta`
//! carries both stiffness and viscous loss. Given the interior
//! displacement field (as produced by magnetic resonance or ultrasound
//! elastography), this crate recovers the modulus pair.
//!
//! The pieces line up as a pipeline:
//!
//! * [`field`] and [`ops`] hold nodal fields and the stencil calculus;
//! * [`linsys`] assembles and solves complex sparse systems;
//! * [`pde`] discretizes the forward, adjoint and Poisson problems;
//! * [`recon`] provides the direct algebraic inversion, a hybrid
//!   one-step initial guess, and misfit-descent reconstruction, with a
//!   localized variant for subdomains;
//! * [`phantom`] builds test media, synthesizes data and adds noise.

pub mod field;
pub mod grid;
pub mod linsys;
pub mod material;
pub mod ops;
pub mod pde;
pub mod phantom;
pub mod recon;

pub use field::{ScalarField, TensorField, VectorField};
pub use grid::{BoundaryPartition, Grid, NodeMask, NodeRole};
pub use material::MaterialMap;
