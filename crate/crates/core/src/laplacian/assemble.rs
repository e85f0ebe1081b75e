use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{BlockSparseMatrix, LaplacianError};
use crate::hypergraph::Hypergraph;
use crate::sheaf::CellularSheaf;
use crate::simplicial::{Provenance, Skeleton};

fn check_degree(sk: &Skeleton, sheaf: &CellularSheaf, k: usize) -> Result<(), LaplacianError> {
    if k > sheaf.degree() || k > sk.max_degree() {
        return Err(LaplacianError::DegreeOutOfRange { k, sheaf_degree: sheaf.degree() });
    }
    Ok(())
}

/// Degree-`k` sheaf Laplacian on the `k`-simplices of `sk`.
///
/// The upper term (through common cofacets) is present when the sheaf reaches dimension
/// `k + 1`; the lower term (through common facets) when `k >= 1`. Each incidence pair
/// contributes with sign `[s : t] * [s' : t]`, so the result is `B^T B` for the signed
/// coboundaries `B` and hence symmetric positive semidefinite.
pub fn assemble_laplacian(sk: &Skeleton, sheaf: &CellularSheaf, k: usize) -> Result<BlockSparseMatrix, LaplacianError> {
    check_degree(sk, sheaf, k)?;
    let d = sheaf.stalk_dim();
    let mut triplets: Vec<(usize, usize, DMatrix<f64>)> = Vec::new();
    if k < sheaf.degree() {
        let upper = sk.upper_adjacency(k)?;
        triplets.par_extend(upper.par_iter().map(|a| {
            let f_row = sheaf.restriction(k + 1, a.via, a.row_position);
            let f_col = sheaf.restriction(k + 1, a.via, a.col_position);
            (a.row, a.col, f_row.tr_mul(f_col) * a.sign())
        }));
    }
    if k >= 1 {
        let lower = sk.lower_adjacency(k)?;
        triplets.par_extend(lower.par_iter().map(|a| {
            let f_row = sheaf.restriction(k, a.row, a.row_position);
            let f_col = sheaf.restriction(k, a.col, a.col_position);
            (a.row, a.col, f_row * f_col.transpose() * a.sign())
        }));
    }
    Ok(BlockSparseMatrix::from_triplets(sk.count(k), d, triplets))
}

/// Block diagonal `D^k`: `sum_t F^T F` over cofacet incidences plus `sum_m F F^T` over facet
/// incidences. Equals the diagonal blocks of [`assemble_laplacian`].
pub fn assemble_diagonal(sk: &Skeleton, sheaf: &CellularSheaf, k: usize) -> Result<BlockSparseMatrix, LaplacianError> {
    check_degree(sk, sheaf, k)?;
    let d = sheaf.stalk_dim();
    let blocks: Vec<(usize, usize, DMatrix<f64>)> = (0..sk.count(k))
        .into_par_iter()
        .map(|s| {
            let mut acc = DMatrix::zeros(d, d);
            if k < sheaf.degree() {
                for &(t, i) in sk.cofacets(k, s) {
                    let f = sheaf.restriction(k + 1, t, i);
                    acc += f.tr_mul(f);
                }
            }
            if k >= 1 {
                for i in 0..=k {
                    let f = sheaf.restriction(k, s, i);
                    acc += f * f.transpose();
                }
            }
            (s, s, acc)
        })
        .collect();
    let blocks = blocks.into_iter().filter(|(_, _, m)| m.iter().any(|x| *x != 0.0)).collect();
    Ok(BlockSparseMatrix::from_triplets(sk.count(k), d, blocks))
}

/// Degree-1 restrictions in which both orderings of a pair carry the same map:
/// `F([v] <| [v, w]_e) = F([v] <| [w, v]_e)`, stored under `(e, v, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRestrictions {
    stalk_dim: usize,
    maps: HashMap<(usize, usize, usize), DMatrix<f64>>,
}

impl PairRestrictions {
    pub fn new(stalk_dim: usize) -> Self {
        PairRestrictions { stalk_dim, maps: HashMap::new() }
    }

    pub fn stalk_dim(&self) -> usize {
        self.stalk_dim
    }

    pub fn insert(&mut self, edge: usize, v: usize, w: usize, map: DMatrix<f64>) {
        assert_eq!((map.nrows(), map.ncols()), (self.stalk_dim, self.stalk_dim), "restriction shape");
        self.maps.insert((edge, v, w), map);
    }

    pub fn get(&self, edge: usize, v: usize, w: usize) -> Option<&DMatrix<f64>> {
        self.maps.get(&(edge, v, w))
    }

    /// Entries i.i.d. uniform in `[-1, 1]`, seeded; visited in edge order then pair order.
    pub fn random(h: &Hypergraph, d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = PairRestrictions::new(d);
        for (e, edge) in h.edges().iter().enumerate() {
            for &v in &edge.nodes {
                for &w in &edge.nodes {
                    if v != w {
                        out.insert(e, v, w, DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..=1.0)));
                    }
                }
            }
        }
        out
    }

    /// Reads the pair maps off a degree-1 sheaf, failing if the two orderings disagree.
    pub fn from_sheaf(sk: &Skeleton, sheaf: &CellularSheaf) -> Result<Self, LaplacianError> {
        if sheaf.degree() < 1 {
            return Err(LaplacianError::DegreeOutOfRange { k: 1, sheaf_degree: sheaf.degree() });
        }
        let mut out = PairRestrictions::new(sheaf.stalk_dim());
        for (s, simplex) in sk.simplices(1).iter().enumerate() {
            let Provenance::Edge(e) = simplex.provenance() else { unreachable!() };
            let (a, b) = (simplex.tuple()[0], simplex.tuple()[1]);
            // Position 1 removes b, leaving [a]; position 0 leaves [b].
            for (v, w, pos) in [(a, b, 1), (b, a, 0)] {
                let m = sheaf.restriction(1, s, pos);
                match out.maps.get(&(e, v, w)) {
                    Some(prev) if prev != m => return Err(LaplacianError::AsymmetricPair { edge: e, v, w }),
                    Some(_) => {}
                    None => {
                        out.maps.insert((e, v, w), m.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// The degree-1 sheaf on `sk` carrying these maps on both orderings.
    pub fn to_sheaf(&self, sk: &Skeleton) -> Result<CellularSheaf, LaplacianError> {
        let mut missing = None;
        let sheaf = CellularSheaf::from_fn(sk, self.stalk_dim, 1, |_, s, i| {
            let simplex = sk.simplex(1, s);
            let Provenance::Edge(e) = simplex.provenance() else { unreachable!() };
            let (v, w) = (simplex.tuple()[1 - i], simplex.tuple()[i]);
            match self.get(e, v, w) {
                Some(m) => m.clone(),
                None => {
                    missing.get_or_insert((e, v, w));
                    DMatrix::zeros(self.stalk_dim, self.stalk_dim)
                }
            }
        })?;
        if let Some((edge, v, w)) = missing {
            return Err(LaplacianError::MissingRestriction { edge, v, w });
        }
        Ok(sheaf)
    }
}

/// Degree-0 Laplacian straight from the hypergraph, without a skeleton.
///
/// Each unordered pair `{v, w}` inside each hyperedge `e` contributes `2 F_v^T F_v` and
/// `2 F_w^T F_w` on the diagonal and `-2 F_v^T F_w`, `-2 F_w^T F_v` off it, where `F_v` is the map
/// of `[v]` into `[v, w]_e`; the factor 2 accounts for the two orderings of the pair.
pub fn degree0_direct(h: &Hypergraph, restrictions: &PairRestrictions) -> Result<BlockSparseMatrix, LaplacianError> {
    let d = restrictions.stalk_dim();
    let mut triplets = Vec::new();
    for (e, edge) in h.edges().iter().enumerate() {
        for (a, &v) in edge.nodes.iter().enumerate() {
            for &w in &edge.nodes[a + 1..] {
                let fv = restrictions.get(e, v, w).ok_or(LaplacianError::MissingRestriction { edge: e, v, w })?;
                let fw = restrictions.get(e, w, v).ok_or(LaplacianError::MissingRestriction { edge: e, v: w, w: v })?;
                triplets.push((v, v, fv.tr_mul(fv) * 2.0));
                triplets.push((w, w, fw.tr_mul(fw) * 2.0));
                triplets.push((v, w, fv.tr_mul(fw) * -2.0));
                triplets.push((w, v, fw.tr_mul(fv) * -2.0));
            }
        }
    }
    Ok(BlockSparseMatrix::from_triplets(h.num_nodes(), d, triplets))
}
