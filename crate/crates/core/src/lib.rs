pub mod cli;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod green;
pub mod hamiltonian;
pub mod identities;
pub mod io;
pub mod limit;
pub mod linalg;
pub mod mesh;
pub mod spectrum;
pub mod vortex;

pub use error::{Error, Result};
pub use geometry::Point2;
