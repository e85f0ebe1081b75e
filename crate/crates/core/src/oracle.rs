//! Brute-force references for tests.
//!
//! Nothing here calls into the assembler, the adjacency tables, or the facet tables of a
//! [`Skeleton`]: simplices are enumerated from the hyperedge labels and faces are computed by
//! deleting tuple entries. A skeleton is consulted only to translate a simplex into the index
//! that addresses its row and its restriction maps. Every routine refuses inputs above its
//! size guard instead of approximating.

use std::collections::BTreeSet;

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::hypergraph::Hypergraph;
use crate::sheaf::CellularSheaf;
use crate::simplicial::{Simplex, Skeleton};

pub const MAX_ORACLE_NODES: usize = 8;
pub const MAX_ORACLE_DEGREE: usize = 2;

pub type DenseMatrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("oracle refuses {what} = {value} (limit {limit})")]
    SizeGuard { what: &'static str, value: usize, limit: usize },
    #[error("degree {k} needs a sheaf of degree {need}, got {have}")]
    SheafTooShallow { k: usize, need: usize, have: usize },
    #[error("simplex {0} is not in the skeleton")]
    UnknownSimplex(String),
    #[error("finite-difference step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("loss is not finite at parameter {index}")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Origin {
    Node(usize),
    Edge(usize),
}

/// A nondegenerate tuple with its origin; a single entry is always a node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    origin: Origin,
    tuple: Vec<usize>,
}

impl Cell {
    fn delete(&self, i: usize) -> Cell {
        let mut tuple = self.tuple.clone();
        tuple.remove(i);
        if tuple.len() == 1 {
            Cell { origin: Origin::Node(tuple[0]), tuple }
        } else {
            Cell { origin: self.origin.clone(), tuple }
        }
    }

    fn to_simplex(&self, h: &Hypergraph) -> Simplex {
        match self.origin {
            Origin::Node(v) => Simplex::vertex(v, 0),
            Origin::Edge(e) => Simplex::in_edge(h, e, self.tuple.clone()).expect("tuple drawn from the edge"),
        }
    }
}

/// All nondegenerate `n`-cells, as a sorted set.
fn cells(h: &Hypergraph, n: usize) -> BTreeSet<Cell> {
    let mut out = BTreeSet::new();
    if n == 0 {
        for v in 0..h.num_nodes() {
            out.insert(Cell { origin: Origin::Node(v), tuple: vec![v] });
        }
        return out;
    }
    for (e, edge) in h.edges().iter().enumerate() {
        // All (n+1)-tuples over the label, keeping the injective ones.
        for tuple in std::iter::repeat_n(edge.nodes.iter().copied(), n + 1).multi_cartesian_product() {
            if tuple.iter().all_unique() {
                out.insert(Cell { origin: Origin::Edge(e), tuple });
            }
        }
    }
    out
}

fn lookup(sk: &Skeleton, h: &Hypergraph, c: &Cell) -> Result<usize, OracleError> {
    let s = c.to_simplex(h);
    sk.index_of(&s).ok_or_else(|| OracleError::UnknownSimplex(format!("{s}")))
}

/// Dense degree-`k` sheaf Laplacian by literal enumeration.
///
/// Upper part: for every `(k+1)`-cell `t` and every pair of positions `(i, j)`,
/// `(-1)^(i+j) F(d_i t <| t)^T F(d_j t <| t)` lands in block `(d_i t, d_j t)`.
/// Lower part: for every pair of `k`-cells `(s, s')` and positions `(a, b)` with
/// `d_a s = d_b s'`, `(-1)^(a+b) F(d_a s <| s) F(d_b s' <| s')^T` lands in block `(s, s')`.
/// Rows are ordered by the skeleton index of each cell.
pub fn brute_laplacian(h: &Hypergraph, sheaf: &CellularSheaf, sk: &Skeleton, k: usize) -> Result<DenseMatrix, OracleError> {
    if h.num_nodes() > MAX_ORACLE_NODES {
        return Err(OracleError::SizeGuard { what: "node count", value: h.num_nodes(), limit: MAX_ORACLE_NODES });
    }
    if k > MAX_ORACLE_DEGREE {
        return Err(OracleError::SizeGuard { what: "degree", value: k, limit: MAX_ORACLE_DEGREE });
    }
    if k > sheaf.degree() {
        return Err(OracleError::SheafTooShallow { k, need: k, have: sheaf.degree() });
    }
    let d = sheaf.stalk_dim();
    let rows = cells(h, k);
    let mut out = DMatrix::zeros(rows.len() * d, rows.len() * d);
    let mut add = |r: usize, c: usize, block: DMatrix<f64>| {
        let mut view = out.view_mut((r * d, c * d), (d, d));
        view += block;
    };

    if k < sheaf.degree() {
        for t in cells(h, k + 1) {
            let ti = lookup(sk, h, &t)?;
            for i in 0..=k + 1 {
                for j in 0..=k + 1 {
                    let r = lookup(sk, h, &t.delete(i))?;
                    let c = lookup(sk, h, &t.delete(j))?;
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    let fi = sheaf.restriction(k + 1, ti, i);
                    let fj = sheaf.restriction(k + 1, ti, j);
                    add(r, c, fi.transpose() * fj * sign);
                }
            }
        }
    }
    if k >= 1 {
        for s in &rows {
            let si = lookup(sk, h, s)?;
            for s2 in &rows {
                let s2i = lookup(sk, h, s2)?;
                for a in 0..=k {
                    for b in 0..=k {
                        if s.delete(a) != s2.delete(b) {
                            continue;
                        }
                        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        let fa = sheaf.restriction(k, si, a);
                        let fb = sheaf.restriction(k, s2i, b);
                        add(si, s2i, fa * fb.transpose() * sign);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exhaustive isomorphism test: some node bijection `a` and hyperedge bijection `b` with
/// `a(label(e)) = label'(b(e))` for every hyperedge `e`.
pub fn brute_isomorphic(h1: &Hypergraph, h2: &Hypergraph) -> Result<bool, OracleError> {
    for h in [h1, h2] {
        if h.num_nodes() > MAX_ORACLE_NODES {
            return Err(OracleError::SizeGuard { what: "node count", value: h.num_nodes(), limit: MAX_ORACLE_NODES });
        }
    }
    if h1.num_nodes() != h2.num_nodes() || h1.num_edges() != h2.num_edges() {
        return Ok(false);
    }
    let target: Vec<Vec<usize>> = h2.edges().iter().map(|e| e.nodes.clone()).collect();
    for perm in (0..h1.num_nodes()).permutations(h1.num_nodes()) {
        let mapped: Vec<Vec<usize>> = h1
            .edges()
            .iter()
            .map(|e| {
                let mut m: Vec<usize> = e.nodes.iter().map(|&v| perm[v]).collect();
                m.sort_unstable();
                m
            })
            .collect();
        let mut used = vec![false; target.len()];
        if match_edges(&mapped, &target, 0, &mut used) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn match_edges(mapped: &[Vec<usize>], target: &[Vec<usize>], next: usize, used: &mut [bool]) -> bool {
    if next == mapped.len() {
        return true;
    }
    for j in 0..target.len() {
        if !used[j] && target[j] == mapped[next] {
            used[j] = true;
            if match_edges(mapped, target, next + 1, used) {
                return true;
            }
            used[j] = false;
        }
    }
    false
}

/// Sheaf on the ordered simplicial complex of one triangle `{v0, v1, v2}`.
///
/// Edges are indexed `0: {v0,v1}`, `1: {v0,v2}`, `2: {v1,v2}`. `edge_maps[e]` restricts edge
/// `e` into the triangle; `vertex_maps[e][s]` restricts the `s`-th smaller node of edge `e`
/// (by node index) into the edge.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFixture {
    pub stalk_dim: usize,
    pub edge_maps: [DMatrix<f64>; 3],
    pub vertex_maps: [[DMatrix<f64>; 2]; 3],
}

const TRIANGLE_EDGES: [[usize; 2]; 3] = [[0, 1], [0, 2], [1, 2]];

impl OrderFixture {
    /// Random maps, with both node maps into `{v1, v2}` set to zero.
    pub fn random(stalk_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || DMatrix::from_fn(stalk_dim, stalk_dim, |_, _| rng.gen_range(-1.0..=1.0));
        let edge_maps = [draw(), draw(), draw()];
        let zero = DMatrix::zeros(stalk_dim, stalk_dim);
        let vertex_maps = [[draw(), draw()], [draw(), draw()], [zero.clone(), zero]];
        OrderFixture { stalk_dim, edge_maps, vertex_maps }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderDependence {
    /// Degree-1 Laplacian under `v0 < v1 < v2`, blocks indexed as in [`OrderFixture`].
    pub natural: DenseMatrix,
    /// Degree-1 Laplacian under `v1 < v0 < v2`.
    pub swapped: DenseMatrix,
    /// The `({v0,v1}, {v1,v2})` block under each order.
    pub natural_block: DenseMatrix,
    pub swapped_block: DenseMatrix,
    pub equal: bool,
}

/// Position of `v` inside the sorted (under `rank`) list `cell`.
fn ordered_position(cell: &[usize], v: usize, rank: &[usize; 3]) -> usize {
    cell.iter().filter(|&&u| rank[u] < rank[v]).count()
}

fn ordered_degree1(fx: &OrderFixture, rank: &[usize; 3]) -> DenseMatrix {
    let d = fx.stalk_dim;
    let mut out = DMatrix::zeros(3 * d, 3 * d);
    let triangle = [0usize, 1, 2];
    let missing = |e: usize| 3 - TRIANGLE_EDGES[e][0] - TRIANGLE_EDGES[e][1];
    let sign = |p: usize| if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    for r in 0..3 {
        for c in 0..3 {
            // Upper: the triangle is the only cofacet; edge e is the face omitting `missing(e)`.
            let sr = sign(ordered_position(&triangle, missing(r), rank));
            let sc = sign(ordered_position(&triangle, missing(c), rank));
            let mut block = fx.edge_maps[r].transpose() * &fx.edge_maps[c] * (sr * sc);
            // Lower: common vertex facets.
            for (ar, &u) in TRIANGLE_EDGES[r].iter().enumerate() {
                for (ac, &w) in TRIANGLE_EDGES[c].iter().enumerate() {
                    if u != w {
                        continue;
                    }
                    let other_r = TRIANGLE_EDGES[r][1 - ar];
                    let other_c = TRIANGLE_EDGES[c][1 - ac];
                    let s1 = sign(ordered_position(&TRIANGLE_EDGES[r], other_r, rank));
                    let s2 = sign(ordered_position(&TRIANGLE_EDGES[c], other_c, rank));
                    block += &fx.vertex_maps[r][ar] * fx.vertex_maps[c][ac].transpose() * (s1 * s2);
                }
            }
            out.view_mut((r * d, c * d), (d, d)).copy_from(&block);
        }
    }
    out
}

/// Degree-1 Laplacian of the ordered triangle under the two node orders.
pub fn ordered_complex_order_dependence(fx: &OrderFixture) -> OrderDependence {
    let d = fx.stalk_dim;
    let natural = ordered_degree1(fx, &[0, 1, 2]);
    let swapped = ordered_degree1(fx, &[1, 0, 2]);
    let natural_block = natural.view((0, 2 * d), (d, d)).into_owned();
    let swapped_block = swapped.view((0, 2 * d), (d, d)).into_owned();
    let equal = natural == swapped;
    OrderDependence { natural, swapped, natural_block, swapped_block, equal }
}

/// Central differences `(f(p + h e_i) - f(p - h e_i)) / 2h` for every coordinate.
pub fn finite_difference_grad<F>(mut loss: F, params: &[f64], step: f64) -> Result<Vec<f64>, OracleError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(OracleError::BadStep(step));
    }
    let mut p = params.to_vec();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let x = p[i];
        p[i] = x + step;
        let up = loss(&p);
        p[i] = x - step;
        let down = loss(&p);
        p[i] = x;
        if !(up.is_finite() && down.is_finite()) {
            return Err(OracleError::NonFinite { index: i });
        }
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::{identity_sheaf, random_sheaf};
    use crate::simplicial::build_skeleton;

    #[test]
    fn cell_counts_follow_falling_factorials() {
        let h = Hypergraph::parse("a b c d\nb c").unwrap();
        assert_eq!(cells(&h, 0).len(), 4);
        assert_eq!(cells(&h, 1).len(), 12 + 2);
        assert_eq!(cells(&h, 2).len(), 24);
        assert_eq!(cells(&h, 3).len(), 24);
    }

    #[test]
    fn single_edge_identity() {
        let h = Hypergraph::parse("a b").unwrap();
        let sk = build_skeleton(&h, 1).unwrap();
        let l = brute_laplacian(&h, &identity_sheaf(&sk, 1, 1).unwrap(), &sk, 0).unwrap();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]));
    }

    #[test]
    fn hub_triangles_identity() {
        let h = Hypergraph::parse("v0 v1 v2\nv0 v2 v3\nv0 v1 v3").unwrap();
        let sk = build_skeleton(&h, 1).unwrap();
        let l = brute_laplacian(&h, &identity_sheaf(&sk, 1, 1).unwrap(), &sk, 0).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[12.0, -4.0, -4.0, -4.0, -4.0, 8.0, -2.0, -2.0, -4.0, -2.0, 8.0, -2.0, -4.0, -2.0, -2.0, 8.0],
        );
        assert_eq!(l, expected);
    }

    #[test]
    fn size_guards() {
        let h = Hypergraph::from_index_edges(9, &[vec![0, 1]]).unwrap();
        let sk = build_skeleton(&h, 1).unwrap();
        let sheaf = identity_sheaf(&sk, 1, 1).unwrap();
        assert!(matches!(brute_laplacian(&h, &sheaf, &sk, 0), Err(OracleError::SizeGuard { .. })));
        assert!(matches!(brute_isomorphic(&h, &h), Err(OracleError::SizeGuard { .. })));
        let small = Hypergraph::parse("a b c d").unwrap();
        let sk = build_skeleton(&small, 3).unwrap();
        let sheaf = identity_sheaf(&sk, 1, 3).unwrap();
        assert!(matches!(brute_laplacian(&small, &sheaf, &sk, 3), Err(OracleError::SizeGuard { .. })));
    }

    #[test]
    fn brute_laplacian_is_symmetric_psd() {
        let h = Hypergraph::parse("a b c\nb c d\nc d").unwrap();
        let sk = build_skeleton(&h, 2).unwrap();
        let sheaf = random_sheaf(&sk, 2, 1, 3).unwrap();
        for k in 0..=1 {
            let l = brute_laplacian(&h, &sheaf, &sk, k).unwrap();
            assert_eq!(l, l.transpose());
            let min = l.symmetric_eigenvalues().min();
            assert!(min > -1e-10);
        }
    }

    #[test]
    fn isomorphism() {
        let h = Hypergraph::parse("a b c\nc d\nc d").unwrap();
        let relabeled = Hypergraph::parse("x y\nw z x\ny x").unwrap();
        assert!(brute_isomorphic(&h, &relabeled).unwrap());
        let one_parallel = Hypergraph::parse("a b c\nc d").unwrap();
        let h3 = Hypergraph::parse("a b c\nc d\na d").unwrap();
        assert!(!brute_isomorphic(&h, &one_parallel).unwrap());
        assert!(!brute_isomorphic(&h, &h3).unwrap());
        let with_extra = Hypergraph::parse("v0 v1 v2\nv0 v1").unwrap();
        let without = Hypergraph::parse("v0 v1 v2").unwrap();
        assert!(!brute_isomorphic(&with_extra, &without).unwrap());
    }

    #[test]
    fn order_flips_sign_of_cross_block() {
        for seed in 0..5 {
            let fx = OrderFixture::random(2, seed);
            let out = ordered_complex_order_dependence(&fx);
            let expected = fx.edge_maps[0].transpose() * &fx.edge_maps[2];
            assert!((&out.natural_block - &expected).amax() < 1e-15);
            assert_eq!(out.swapped_block, -&out.natural_block);
            assert!(!out.equal);
        }
    }

    #[test]
    fn order_agrees_without_cross_map() {
        let mut fx = OrderFixture::random(2, 1);
        fx.edge_maps[2] = DMatrix::zeros(2, 2);
        let out = ordered_complex_order_dependence(&fx);
        assert_eq!(out.natural.abs(), out.swapped.abs());
    }

    #[test]
    fn finite_differences_of_a_quadratic() {
        let g = finite_difference_grad(|p| p[0] * p[0] + 3.0 * p[0] * p[1], &[1.0, 2.0], 1e-3).unwrap();
        assert!((g[0] - 8.0).abs() < 1e-9 && (g[1] - 3.0).abs() < 1e-9);
        assert!(finite_difference_grad(|p| p[0], &[0.0], 0.0).is_err());
        assert!(finite_difference_grad(|p| 1.0 / p[0], &[1e-9], 1e-3).is_ok());
        assert!(matches!(finite_difference_grad(|_| f64::NAN, &[0.0], 1e-3), Err(OracleError::NonFinite { index: 0 })));
    }
}
