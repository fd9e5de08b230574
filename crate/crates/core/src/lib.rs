//! Numerical toolkit for energy monotonicity of variational minimizers
//! under sliding deformations.
//!
//! The library evaluates integral energies `E_R(u) = ∫_{B_R} F(∇u, u, x')`
//! over grids that are bounded in a leading block of axes and translation
//! invariant in the rest. Around that core it provides:
//!
//! - an integrand catalog with analytic or finite-difference derivatives
//!   and a quadratic-growth check for the Hessian in the gradient slot
//!   ([`integrand`]);
//! - regular grids, sampled scalar fields, gradients, and lossless text
//!   serialization ([`field`]);
//! - Lipschitz deformations along invariant axes, piecewise assemblies,
//!   iterated-logarithm cutoffs, and the sliding construction that
//!   translates a field by `t ψ_R(|x|)` along the last axis
//!   ([`deformation`]);
//! - quadrature, growth profiles `a(r)`, second energy differences of the
//!   slide, and first/second variations ([`energy`]);
//! - reproducible experiment drivers for the worked one-dimensional
//!   examples, random stability probes, and energy-improvement
//!   constructions ([`experiments`]);
//! - gradient-flow relaxation toward critical fields and the heteroclinic
//!   profile solver ([`solver`]).
//!
//! All stochastic drivers take explicit seeds, and every reduction uses a
//! fixed-shape pairwise tree so results are bitwise reproducible across
//! thread counts.

pub mod acceptance;
pub mod deformation;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod field;
pub mod integrand;
pub mod reduce;
pub mod sampler;
pub mod solver;

pub use error::{Error, Result};
