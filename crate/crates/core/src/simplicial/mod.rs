//! The induced symmetric simplicial set of a hypergraph.
//!
//! Every hyperedge `e` contributes all ordered tuples drawn from its label, tagged with `e`;
//! constant tuples are identified across hyperedges so that dimension 0 is exactly the node set.
//! Only nondegenerate simplices (pairwise distinct entries) are materialized in a [`Skeleton`];
//! degenerate ones arise on the fly from [`Simplex::apply_map`] and are kept in canonical form.

mod simplex;
mod skeleton;

pub use simplex::{incidence_sign, Provenance, Simplex, SimplexError};
pub use skeleton::{
    build_skeleton, build_skeleton_with_cap, predicted_counts, AdjacencyEntry, MaximalClass, Skeleton,
    SkeletonError, DEFAULT_SIMPLEX_CAP,
};
