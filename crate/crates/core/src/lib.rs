//! Hypergraphs as symmetric simplicial sets, sheaf Laplacians over them, and neural sheaf
//! diffusion for node classification.

pub mod fixtures;
pub mod hypergraph;
pub mod laplacian;
pub mod nn;
pub mod oracle;
pub mod sheaf;
pub mod simplicial;

pub use hypergraph::{clique_expansion_multigraph, labeled_equal, Hypergraph, HypergraphError};
pub use simplicial::{build_skeleton, Simplex, Skeleton};
