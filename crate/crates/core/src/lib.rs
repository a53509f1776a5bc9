//! Two-level Nystrom--Schur preconditioners for sparse SPD linear systems.
//!
//! The solver pipeline reorders a sparse SPD matrix to doubly bordered block
//! diagonal (DBBD) form, eliminates the interior blocks, and runs
//! preconditioned conjugate gradients on the interface Schur complement. The
//! preconditioners range from the one-level interface solve to two-level
//! variants whose deflation subspaces come from randomized Nystrom
//! approximations of a reformulated Schur operator, built by solving an inner
//! SPD system with breakdown-free block conjugate gradients.
//!
//! Modules:
//! - [`sparse`], [`dense`]: CSR storage, Matrix Market I/O, dense blocks.
//! - [`partition`]: DBBD permutations from recursive bisection or files.
//! - [`factor`]: sparse/dense Cholesky with multi-RHS triangular solves.
//! - [`krylov`]: PCG, breakdown-free block PCG, thick-restart Lanczos.
//! - [`randnla`]: Gaussian sketching and the Nystrom low-rank approximation.
//! - [`precond`]: Schur operators, the preconditioner family, end-to-end solve.
//! - [`analysis`]: dense spectrum oracles and condition-number bounds.
//! - [`gallery`]: desk-scale test matrices and seeded right-hand sides.

pub mod analysis;
pub mod dense;
pub mod error;
pub mod factor;
pub mod gallery;
pub mod krylov;
pub mod partition;
pub mod precond;
pub mod randnla;
pub mod sparse;

pub use dense::DenseBlock;
pub use error::{
    AnalysisError, FactorError, KrylovError, PartitionError, PipelineError, PrecondError,
    RandNlaError, SparseError, Stage,
};
pub use factor::{BlockDiagFactor, CholeskyFactor, SolveMode};
pub use krylov::{EigenReport, LinearOperator, SolveReport};
pub use partition::{BlockLabel, DBBDSystem, PartitionSpec};
pub use precond::{TwoLevelPrecond, Variant};
pub use randnla::{LowRankApprox, SketchConfig};
pub use sparse::{Permutation, SparseMatrix};
