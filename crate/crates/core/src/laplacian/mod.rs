//! Sheaf Laplacians over a skeleton.
//!
//! Matrices are kept as [`BlockSparseMatrix`] with one `d x d` block per pair of simplices.
//! Assembly collects one block per adjacency entry (in parallel, order preserved) and then sorts
//! and merges, so the output does not depend on the number of worker threads.

mod assemble;
mod block;
mod graph;
mod normalize;
mod spectrum;

use thiserror::Error;

pub use assemble::{assemble_diagonal, assemble_laplacian, degree0_direct, PairRestrictions};
pub use block::{BlockSparseMatrix, Cochain};
pub use graph::{graph_sheaf_laplacian, GraphLaplacians};
pub use normalize::{normalize, normalize_with, InvSqrt, NormalizeOptions, DEFAULT_PINV_REL_TOL};
pub use spectrum::{dirichlet_energy, spectrum, spectrum_with, Extreme, SpectrumOptions, DENSE_LIMIT};

use crate::sheaf::SheafError;
use crate::simplicial::SkeletonError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplacianError {
    #[error("degree {k} is out of range for a sheaf of degree {sheaf_degree}")]
    DegreeOutOfRange { k: usize, sheaf_degree: usize },
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("diagonal block {block} is not symmetric (asymmetry {asymmetry:e})")]
    NonSymmetricBlock { block: usize, asymmetry: f64 },
    #[error("expected a block-diagonal matrix, found block ({row}, {col})")]
    NotBlockDiagonal { row: usize, col: usize },
    #[error("matrix is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("no restriction for node {v} toward {w} in hyperedge {edge}")]
    MissingRestriction { edge: usize, v: usize, w: usize },
    #[error("orderings of ({v}, {w}) in hyperedge {edge} carry different maps")]
    AsymmetricPair { edge: usize, v: usize, w: usize },
    #[error("expected a graph (every hyperedge with exactly two nodes)")]
    NotAGraph,
    #[error("eigensolver did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },
}
