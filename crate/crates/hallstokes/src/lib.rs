//! Wall-crossing data in the Hall algebra of an equioriented `A_n` quiver,
//! certified as the Stokes data of an isomonodromic family of irregular
//! connections on the projective line.
//!
//! The library has two halves that compute the same objects by unrelated
//! routes, so each side can certify the other:
//!
//! * an **exact categorical side** ([`quiver`], [`hall`], [`stability`]):
//!   iso-classes of quiver representations, Hall-algebra convolution with
//!   Euler-characteristic weights counted on coordinate subrepresentations,
//!   semistable indicator elements `δ_γ`, their ray-logarithms `ε_α`, and the
//!   Harder–Narasimhan / clockwise-factorization identities, all in
//!   arbitrary-precision rational arithmetic;
//!
//! * an **analytic side** ([`multilog`], [`stokes`], [`connection`],
//!   [`isomonodromy`]): iterated-integral multilogarithms `M_n`, `L_n`, `J_n`
//!   evaluated on explicit contours, the series transforming a Lie-algebra
//!   residue `f` into Stokes factors and back, a blunt high-order ODE
//!   integrator that extracts Stokes data of `d − (Z/t² + f/t) dt` by
//!   asymptotic matching, and wall-crossing / isomonodromy experiments.
//!
//! The binary `hallstokes` exposes every operation as a CLI subcommand with
//! deterministic JSON output; see the crate README for the command list.

pub mod connection;
pub mod error;
pub mod exact;
pub mod graded;
pub mod hall;
pub mod isomonodromy;
pub mod multilog;
pub mod quiver;
pub mod rk;
pub mod stability;
pub mod stokes;

pub mod cli;

pub use error::{Error, Result};
