//! Bernoulli bond percolation on trees, grids and hyperbolic tilings, with the
//! operator, geometry and point-decomposition machinery around the
//! `p_c < p_{2->2}` criterion.

pub mod error;
pub mod graphs;
pub mod gromov;
pub mod hypgeom;
pub mod operators;
pub mod oracles;
pub mod percolation;
pub mod rng;
pub mod types;
pub mod unionfind;

pub use error::{Error, Result};
pub use types::{Estimate, TailCurve, TailPoint};
