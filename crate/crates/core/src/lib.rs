//! Simulation and verification laboratory for Gaussian Laplace eigenfunctions
//! on the 2-sphere and the 2-torus.

pub mod chaos;
pub mod error;
pub mod geomstats;
pub mod harness;
pub mod kernels;
pub mod oracles;
pub mod specfun;
pub mod sphere;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
