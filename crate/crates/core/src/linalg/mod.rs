//! Numerical building blocks: quadrature, sparse storage, the envelope
//! factorization and the Krylov eigensolver.

pub mod dense;
pub mod eigen;
pub mod quadrature;
pub mod skyline;
pub mod sparse;

pub use eigen::{krylov_eigenpairs, EigenPairs, KrylovOptions, Select};
pub use skyline::SkylineLdl;
pub use sparse::CsrMatrix;
