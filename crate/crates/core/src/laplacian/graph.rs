use super::normalize::{normalize, DEFAULT_PINV_REL_TOL};
use super::{BlockSparseMatrix, LaplacianError};
use crate::hypergraph::Hypergraph;
use crate::sheaf::GraphSheaf;

/// Sheaf Laplacian of a graph with its diagonal blocks and normalized form.
#[derive(Debug, Clone)]
pub struct GraphLaplacians {
    pub laplacian: BlockSparseMatrix,
    pub diagonal: BlockSparseMatrix,
    pub normalized: BlockSparseMatrix,
}

/// `L(x)_v = sum_{v, u <| e} F(v <| e)^T (F(v <| e) x_v - F(u <| e) x_u)` on node stalks.
pub fn graph_sheaf_laplacian(g: &Hypergraph, gs: &GraphSheaf) -> Result<GraphLaplacians, LaplacianError> {
    if !g.is_graph() {
        return Err(LaplacianError::NotAGraph);
    }
    let d = gs.stalk_dim();
    let mut triplets = Vec::with_capacity(4 * g.num_edges());
    let mut diag = Vec::with_capacity(2 * g.num_edges());
    for (e, edge) in g.edges().iter().enumerate() {
        let [fv, fu] = gs.endpoint_maps(e);
        let (v, u) = (edge.nodes[0], edge.nodes[1]);
        triplets.push((v, v, fv.tr_mul(fv)));
        triplets.push((u, u, fu.tr_mul(fu)));
        triplets.push((v, u, -fv.tr_mul(fu)));
        triplets.push((u, v, -fu.tr_mul(fv)));
        diag.push((v, v, fv.tr_mul(fv)));
        diag.push((u, u, fu.tr_mul(fu)));
    }
    let laplacian = BlockSparseMatrix::from_triplets(g.num_nodes(), d, triplets);
    let diagonal = BlockSparseMatrix::from_triplets(g.num_nodes(), d, diag);
    let normalized = normalize(&laplacian, &diagonal, DEFAULT_PINV_REL_TOL)?;
    Ok(GraphLaplacians { laplacian, diagonal, normalized })
}
