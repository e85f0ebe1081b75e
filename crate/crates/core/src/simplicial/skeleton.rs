use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use super::simplex::{incidence_sign, Provenance, Simplex};
use crate::hypergraph::Hypergraph;

/// Default refusal threshold for the predicted number of simplices.
pub const DEFAULT_SIMPLEX_CAP: u128 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SkeletonError {
    #[error("skeleton would hold {predicted} simplices, above the cap of {cap}")]
    CountGuard { predicted: u128, cap: u128 },
    #[error("degree {k} is outside the skeleton range (max degree {max_degree})")]
    DegreeOutOfRange { k: usize, max_degree: usize },
    #[error("skeleton of max degree {have} is too shallow; need at least {need}")]
    TooShallow { need: usize, have: usize },
}

/// `s (s-1) ... (s-k+1)`, saturating.
fn falling_factorial(s: usize, k: usize) -> u128 {
    if k > s {
        return 0;
    }
    (0..k).fold(1u128, |acc, j| acc.saturating_mul((s - j) as u128))
}

/// Predicted nondegenerate simplex count per dimension `0..=max_degree`.
pub fn predicted_counts(h: &Hypergraph, max_degree: usize) -> Vec<u128> {
    (0..=max_degree)
        .map(|n| {
            if n == 0 {
                h.num_nodes() as u128
            } else {
                h.edges().iter().map(|e| falling_factorial(e.size(), n + 1)).fold(0u128, u128::saturating_add)
            }
        })
        .collect()
}

/// One dimension of the skeleton.
#[derive(Debug, Clone)]
struct Level {
    simplices: Vec<Simplex>,
    lookup: HashMap<Simplex, usize>,
    /// `facets[s * (n + 1) + i]` is the index of `d_i` of simplex `s` in the level below.
    facets: Vec<usize>,
    /// CSR of `(cofacet index, position)` into the level above; empty at the top level.
    cofacet_offsets: Vec<usize>,
    cofacets: Vec<(usize, usize)>,
}

/// The nondegenerate simplices of the induced symmetric simplicial set in dimensions
/// `0..=max_degree`, with facet and cofacet tables.
#[derive(Debug, Clone)]
pub struct Skeleton {
    max_degree: usize,
    node_ids: Vec<String>,
    edge_ids: Vec<String>,
    max_edge_dimension: usize,
    levels: Vec<Level>,
}

/// One incidence quadruple of an adjacency list.
///
/// For upper adjacency `via` indexes the common cofacet in dimension `k + 1` and the positions
/// are where `row` and `col` sit as facets of it. For lower adjacency `via` indexes the common
/// facet in dimension `k - 1` and the positions are where it sits inside `row` and `col`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdjacencyEntry {
    pub row: usize,
    pub col: usize,
    pub via: usize,
    pub row_position: usize,
    pub col_position: usize,
    pub row_sign: i8,
    pub col_sign: i8,
}

impl AdjacencyEntry {
    pub fn sign(&self) -> f64 {
        f64::from(self.row_sign * self.col_sign)
    }
}

/// Permutation orbit of the full injective tuples of one hyperedge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaximalClass {
    pub edge: usize,
    pub dimension: usize,
    /// Member indices within `dimension`, ascending.
    pub members: Vec<usize>,
    /// Underlying node set, ascending.
    pub nodes: Vec<usize>,
}

pub fn build_skeleton(h: &Hypergraph, max_degree: usize) -> Result<Skeleton, SkeletonError> {
    build_skeleton_with_cap(h, max_degree, DEFAULT_SIMPLEX_CAP)
}

pub fn build_skeleton_with_cap(h: &Hypergraph, max_degree: usize, cap: u128) -> Result<Skeleton, SkeletonError> {
    let predicted = predicted_counts(h, max_degree).into_iter().fold(0u128, u128::saturating_add);
    if predicted > cap {
        return Err(SkeletonError::CountGuard { predicted, cap });
    }

    // Per hyperedge, injective tuples of every length in lexicographic order; concatenating in
    // edge order then gives the canonical (provenance, tuple) order.
    let per_edge: Vec<Vec<Vec<Simplex>>> = h
        .edges()
        .par_iter()
        .enumerate()
        .map(|(e, edge)| {
            (1..=max_degree)
                .map(|n| {
                    edge.nodes
                        .iter()
                        .copied()
                        .permutations(n + 1)
                        .map(|t| Simplex::canonical(Provenance::Edge(e), t))
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut levels = Vec::with_capacity(max_degree + 1);
    levels.push((0..h.num_nodes()).map(|v| Simplex::vertex(v, 0)).collect::<Vec<_>>());
    for n in 1..=max_degree {
        levels.push(per_edge.iter().flat_map(|lv| lv[n - 1].iter().cloned()).collect());
    }
    debug_assert!(levels.iter().all(|l| l.windows(2).all(|w| w[0] < w[1])));

    let mut built: Vec<Level> = Vec::with_capacity(levels.len());
    for (n, simplices) in levels.into_iter().enumerate() {
        let lookup: HashMap<Simplex, usize> = simplices.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let facets = if n == 0 {
            Vec::new()
        } else {
            let below = &built[n - 1];
            simplices
                .par_iter()
                .flat_map_iter(|s| {
                    (0..=n).map(move |i| {
                        let (f, _) = s.facet(i).expect("dimension >= 1");
                        below.lookup[&f]
                    })
                })
                .collect()
        };
        built.push(Level { simplices, lookup, facets, cofacet_offsets: Vec::new(), cofacets: Vec::new() });
    }

    for n in 0..max_degree {
        let count = built[n].simplices.len();
        let above = &built[n + 1];
        let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::new(); count];
        for (t, chunk) in above.facets.chunks(n + 2).enumerate() {
            for (i, &f) in chunk.iter().enumerate() {
                buckets[f].push((t, i));
            }
        }
        let mut offsets = Vec::with_capacity(count + 1);
        offsets.push(0);
        let mut flat = Vec::new();
        for b in buckets {
            flat.extend(b);
            offsets.push(flat.len());
        }
        built[n].cofacet_offsets = offsets;
        built[n].cofacets = flat;
    }

    Ok(Skeleton {
        max_degree,
        node_ids: h.nodes().to_vec(),
        edge_ids: h.edges().iter().map(|e| e.id.clone()).collect(),
        max_edge_dimension: h.max_dimension(),
        levels: built,
    })
}

impl Skeleton {
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn count(&self, n: usize) -> usize {
        self.levels.get(n).map_or(0, |l| l.simplices.len())
    }

    pub fn counts(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.simplices.len()).collect()
    }

    pub fn simplices(&self, n: usize) -> &[Simplex] {
        &self.levels[n].simplices
    }

    pub fn simplex(&self, n: usize, index: usize) -> &Simplex {
        &self.levels[n].simplices[index]
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.levels.get(s.dimension())?.lookup.get(s).copied()
    }

    /// Index of `d_i` of simplex `index` in dimension `n - 1`.
    pub fn facet_index(&self, n: usize, index: usize, i: usize) -> usize {
        self.levels[n].facets[index * (n + 1) + i]
    }

    /// `(cofacet index, position)` pairs of simplex `index` in dimension `n`; empty at the top.
    pub fn cofacets(&self, n: usize, index: usize) -> &[(usize, usize)] {
        let level = &self.levels[n];
        if level.cofacet_offsets.is_empty() {
            return &[];
        }
        &level.cofacets[level.cofacet_offsets[index]..level.cofacet_offsets[index + 1]]
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn edge_ids(&self) -> &[String] {
        &self.edge_ids
    }

    fn check_degree(&self, k: usize) -> Result<(), SkeletonError> {
        if k > self.max_degree {
            return Err(SkeletonError::DegreeOutOfRange { k, max_degree: self.max_degree });
        }
        Ok(())
    }

    /// Pairs of `k`-simplices sharing a common cofacet, one entry per `(row, col, cofacet)`,
    /// including `row == col`.
    pub fn upper_adjacency(&self, k: usize) -> Result<Vec<AdjacencyEntry>, SkeletonError> {
        self.check_degree(k + 1)?;
        let n = k + 1;
        let mut out = Vec::with_capacity(self.count(n) * (n + 1) * (n + 1));
        for (t, chunk) in self.levels[n].facets.chunks(n + 1).enumerate() {
            for (i, &row) in chunk.iter().enumerate() {
                for (j, &col) in chunk.iter().enumerate() {
                    out.push(AdjacencyEntry {
                        row,
                        col,
                        via: t,
                        row_position: i,
                        col_position: j,
                        row_sign: incidence_sign(i),
                        col_sign: incidence_sign(j),
                    });
                }
            }
        }
        Ok(out)
    }

    /// Pairs of `k`-simplices sharing a common facet, one entry per `(row, col, facet)`,
    /// including `row == col`.
    pub fn lower_adjacency(&self, k: usize) -> Result<Vec<AdjacencyEntry>, SkeletonError> {
        if k == 0 {
            return Err(SkeletonError::DegreeOutOfRange { k, max_degree: self.max_degree });
        }
        self.check_degree(k)?;
        let mut out = Vec::new();
        for mu in 0..self.count(k - 1) {
            let co = self.cofacets(k - 1, mu);
            for &(row, i) in co {
                for &(col, j) in co {
                    out.push(AdjacencyEntry {
                        row,
                        col,
                        via: mu,
                        row_position: i,
                        col_position: j,
                        row_sign: incidence_sign(i),
                        col_sign: incidence_sign(j),
                    });
                }
            }
        }
        Ok(out)
    }

    fn require_full_depth(&self) -> Result<(), SkeletonError> {
        if self.max_degree < self.max_edge_dimension {
            return Err(SkeletonError::TooShallow { need: self.max_edge_dimension, have: self.max_degree });
        }
        Ok(())
    }

    /// Equivalence classes of maximal nondegenerate simplices.
    ///
    /// A nondegenerate simplex of dimension `n >= 1` is maximal when it has no nondegenerate
    /// cofacet; two are equivalent when one is a permutation of the other with equal provenance.
    pub fn maximal_classes(&self) -> Result<Vec<MaximalClass>, SkeletonError> {
        self.require_full_depth()?;
        let mut classes: BTreeMap<(usize, Vec<usize>), (usize, Vec<usize>)> = BTreeMap::new();
        for n in 1..=self.max_degree {
            for (idx, s) in self.levels[n].simplices.iter().enumerate() {
                if !self.cofacets(n, idx).is_empty() {
                    continue;
                }
                let Provenance::Edge(e) = s.provenance() else {
                    unreachable!("nondegenerate simplices of positive dimension carry edge provenance")
                };
                let mut key = s.tuple().to_vec();
                key.sort_unstable();
                classes.entry((e, key)).or_insert_with(|| (n, Vec::new())).1.push(idx);
            }
        }
        Ok(classes
            .into_iter()
            .map(|((edge, nodes), (dimension, members))| MaximalClass { edge, dimension, members, nodes })
            .collect())
    }

    /// The hypergraph read back from the skeleton: one node per 0-simplex and one hyperedge per
    /// maximal class, labelled by its node set.
    pub fn reconstruct_hypergraph(&self) -> Result<Hypergraph, SkeletonError> {
        let classes = self.maximal_classes()?;
        let nodes: Vec<String> =
            self.levels[0].simplices.iter().map(|s| self.node_ids[s.tuple()[0]].clone()).collect();
        let edges = classes.iter().map(|c| {
            (self.edge_ids[c.edge].clone(), c.nodes.iter().map(|&v| self.node_ids[v].clone()).collect::<Vec<_>>())
        });
        Ok(Hypergraph::new(nodes, edges).expect("skeleton data forms a valid hypergraph"))
    }

    /// Debug listing, one line per simplex: `dim n: <index> <provenance> (<tuple>)`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (n, level) in self.levels.iter().enumerate() {
            for (i, s) in level.simplices.iter().enumerate() {
                let prov = match s.provenance() {
                    Provenance::Vertex(v) => format!("v:{}", self.node_ids[v]),
                    Provenance::Edge(e) => format!("e:{}", self.edge_ids[e]),
                };
                let tuple = s.tuple().iter().map(|&v| self.node_ids[v].as_str()).join(", ");
                writeln!(out, "dim {n}: {i} {prov} ({tuple})").unwrap();
            }
        }
        out
    }
}
