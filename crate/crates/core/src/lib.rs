//! Geometry-aware spatiotemporal Gaussian processes on triangle meshes.
//!
//! The spatial covariance is built from the eigenpairs of the cotangent
//! Laplacian of a mesh, the temporal covariance is Matérn-3/2, and the two
//! are coupled through a Kronecker product so that likelihood evaluation and
//! prediction only ever factor the small spatial and temporal matrices.
//! On top of the model sits an active-learning loop that trades off
//! predictive uncertainty against geodesic space-filling when choosing new
//! sensor locations, and an Aliev–Panfilov simulator that produces
//! ground-truth fields.

pub mod active;
pub mod error;
pub mod gp;
pub mod kernels;
pub mod mesh;
pub mod metrics;
pub mod optim;
pub mod simulate;

#[cfg(any(test, feature = "oracles"))]
pub mod testing;

pub use error::{Error, Result};
