//! Error types shared across the crate.

use thiserror::Error;

/// Errors from sparse storage, dense blocks, and Matrix Market I/O.
#[derive(Debug, Error)]
pub enum SparseError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidStructure(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("malformed Matrix Market header: {0}")]
    MalformedHeader(String),
    #[error("Matrix Market field is not real: {0}")]
    NonRealField(String),
    #[error("pattern-only Matrix Market file has no values")]
    PatternOnly,
    #[error("entry ({row}, {col}) out of bounds for {rows}x{cols} matrix")]
    IndexOutOfBounds { row: usize, col: usize, rows: usize, cols: usize },
    #[error("malformed Matrix Market entry at line {line}: {msg}")]
    MalformedEntry { line: usize, msg: String },
    #[error("symmetric Matrix Market file stores entry ({row}, {col}) above the diagonal")]
    UpperEntryInSymmetric { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from partitioning and DBBD assembly.
#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("requested {requested} blocks but the matrix has only {n} rows (need n_blocks <= n/2)")]
    TooManyBlocks { requested: usize, n: usize },
    #[error("built-in bisector requires a power-of-two block count, got {0}")]
    NotPowerOfTwo(usize),
    #[error("partition labels a block id {label} outside [0, {n_blocks})")]
    LabelOutOfRange { label: usize, n_blocks: usize },
    #[error("block {0} has no rows")]
    EmptyBlock(usize),
    #[error("partition length {got} does not match matrix dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(
        "separator violation: entry ({i}, {j}) couples interior block {block_i} to block {block_j}"
    )]
    SeparatorViolation { i: usize, j: usize, block_i: usize, block_j: usize },
    #[error("malformed partition file at line {line}: {msg}")]
    MalformedFile { line: usize, msg: String },
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from Cholesky factorization and triangular solves.
#[derive(Debug, Error)]
pub enum FactorError {
    #[error("matrix is not positive definite: non-positive pivot at index {pivot}")]
    NotPositiveDefinite { pivot: usize },
    #[error("block {block} is not positive definite: non-positive pivot at index {pivot}")]
    BlockNotPositiveDefinite { block: usize, pivot: usize },
    #[error("dimension mismatch: factor has dimension {expected}, block has {got} rows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Errors from the iterative solvers and eigensolvers.
#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("operator is not positive definite: p^T A p = {value:.3e} at iteration {iteration}")]
    IndefiniteOperator { iteration: usize, value: f64 },
    #[error("block solver stagnated: all search directions deflated before convergence at iteration {iteration}")]
    Stagnation { iteration: usize },
    #[error("dimension mismatch: operator dimension {expected}, input has {got} rows")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Errors from randomized sketching and the Nystrom approximation.
#[derive(Debug, Error)]
pub enum RandNlaError {
    #[error("core matrix has no eigenvalue above the threshold; the approximation has rank 0")]
    RankCollapse,
    #[error("non-finite values encountered during the Nystrom approximation")]
    NumericalFailure,
    #[error("invalid sketch configuration: {0}")]
    InvalidConfig(String),
    #[error("input block is not orthonormal: Gram deviation {0:.3e}")]
    NotOrthonormal(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Errors from preconditioner construction and the solve pipeline.
#[derive(Debug, Error)]
pub enum PrecondError {
    #[error("variant requires the Cholesky factor of the interface block, but the solver is configured iterative-only")]
    TriangularUnavailable,
    #[error("rank budget {k} must be below the interface dimension {n_gamma}")]
    RankTooLarge { k: usize, n_gamma: usize },
    #[error("theta must lie in [0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("eigensolver did not converge: {0} of {1} requested pairs within tolerance")]
    EigUnconverged(usize, usize),
    #[error("inner solve failed: {0}")]
    InnerSolve(#[source] KrylovError),
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    RandNla(#[from] RandNlaError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// Pipeline stage markers for end-to-end solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Partition,
    Factor,
    Build,
    Solve,
    Recover,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Partition => "partition",
            Stage::Factor => "factor",
            Stage::Build => "build",
            Stage::Solve => "solve",
            Stage::Recover => "recover",
        };
        f.write_str(s)
    }
}

/// An error tagged with the pipeline stage that produced it.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    pub fn new<E>(stage: Stage, source: E) -> Self
    where
        E: std::error::Error + Send + Sync + 'static,
    {
        Self { stage, source: Box::new(source) }
    }
}

/// Errors from the dense analysis oracles.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("operator dimension {got} exceeds the dense oracle cap {cap}")]
    DimensionOverCap { got: usize, cap: usize },
    #[error("materialized operator is not symmetric: relative asymmetry {0:.3e}")]
    NotSymmetric(f64),
    #[error("spectrum is empty after dropping eigenvalues below {0:.3e}")]
    EmptyAfterDrop(f64),
    #[error("expectation constant requires oversampling p >= 2, got {0}")]
    OversamplingTooSmall(usize),
    #[error("bound input invalid: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Factor(#[from] FactorError),
}
