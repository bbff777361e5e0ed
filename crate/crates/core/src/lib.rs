//! Exact wavefront tracking for one-dimensional scalar conservation laws
//! `u_t + f(u)_x = 0`, together with the tools used to inspect its
//! solutions: families of boundary characteristics, entropy dissipation
//! measures, a boundary Riemann solver, a Lax-Oleinik oracle for Burgers,
//! and generators for two counterexample constructions.

pub mod counterex;
pub mod entropy;
pub mod error;
pub mod flux;
pub mod fronttrack;
pub mod lagrange;
pub mod laxoracle;
pub mod pwc;
pub mod quad;
pub mod riemann;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
