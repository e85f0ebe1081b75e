//! Cellular sheaves on a skeleton.
//!
//! Every simplex of dimension `0..=degree` carries the stalk `R^d`, and every facet incidence
//! `d_i(s) <| s` carries a `d x d` restriction map. Restrictions are keyed by the cofacet and the
//! facet position `i`, because the same facet can sit at several positions of one cofacet in
//! general. The adjoint of a restriction is its transpose.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypergraph::Hypergraph;
use crate::simplicial::{Provenance, Skeleton};

/// Default entrywise tolerance for [`check_compatibility`].
pub const DEFAULT_COMPATIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SheafError {
    #[error("sheaf degree {degree} exceeds skeleton max degree {max_degree}")]
    DegreeExceedsSkeleton { degree: usize, max_degree: usize },
    #[error("random restriction maps of degree {0} would violate compatibility; use random_compatible_sheaf")]
    NeedsCompatibleGenerator(usize),
    #[error("expected a graph (every hyperedge with exactly two nodes)")]
    NotAGraph,
    #[error("restriction ({dim}, {cofacet}, {position}) has shape {rows}x{cols}, expected {d}x{d}")]
    Shape { dim: usize, cofacet: usize, position: usize, rows: usize, cols: usize, d: usize },
    #[error("restriction ({dim}, {cofacet}, {position}) has a non-finite entry")]
    NonFinite { dim: usize, cofacet: usize, position: usize },
    #[error("restriction ({dim}, {cofacet}, {position}) is missing")]
    Missing { dim: usize, cofacet: usize, position: usize },
    #[error("restriction ({dim}, {cofacet}, {position}) is out of range or listed twice")]
    BadEntry { dim: usize, cofacet: usize, position: usize },
    #[error("stalk dimension must be at least 1")]
    ZeroStalk,
    #[error("skeleton does not match the graph")]
    SkeletonMismatch,
    #[error("invalid sheaf json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellularSheaf {
    degree: usize,
    stalk_dim: usize,
    /// `maps[n - 1][s * (n + 1) + i]` restricts from `d_i(s)` into `s`, for `s` of dimension `n`.
    maps: Vec<Vec<DMatrix<f64>>>,
}

impl CellularSheaf {
    /// Fills every restriction with `make(dim, cofacet, position)`.
    pub fn from_fn<F>(sk: &Skeleton, d: usize, degree: usize, mut make: F) -> Result<Self, SheafError>
    where
        F: FnMut(usize, usize, usize) -> DMatrix<f64>,
    {
        if d == 0 {
            return Err(SheafError::ZeroStalk);
        }
        if degree > sk.max_degree() {
            return Err(SheafError::DegreeExceedsSkeleton { degree, max_degree: sk.max_degree() });
        }
        let mut maps = Vec::with_capacity(degree);
        for n in 1..=degree {
            let mut level = Vec::with_capacity(sk.count(n) * (n + 1));
            for s in 0..sk.count(n) {
                for i in 0..=n {
                    let m = make(n, s, i);
                    validate(&m, d, n, s, i)?;
                    level.push(m);
                }
            }
            maps.push(level);
        }
        Ok(CellularSheaf { degree, stalk_dim: d, maps })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn stalk_dim(&self) -> usize {
        self.stalk_dim
    }

    /// `F(d_i(s) <| s)` for simplex `cofacet` of dimension `dim`.
    pub fn restriction(&self, dim: usize, cofacet: usize, position: usize) -> &DMatrix<f64> {
        &self.maps[dim - 1][cofacet * (dim + 1) + position]
    }

    pub fn restriction_mut(&mut self, dim: usize, cofacet: usize, position: usize) -> &mut DMatrix<f64> {
        &mut self.maps[dim - 1][cofacet * (dim + 1) + position]
    }

    pub fn to_json(&self) -> String {
        let mut entries = Vec::new();
        for (lvl, maps) in self.maps.iter().enumerate() {
            let n = lvl + 1;
            for (k, m) in maps.iter().enumerate() {
                entries.push(SheafEntry {
                    dim: n,
                    cofacet_index: k / (n + 1),
                    position: k % (n + 1),
                    matrix: row_major(m),
                });
            }
        }
        serde_json::to_string(&SheafFile { d: self.stalk_dim, degree: self.degree, entries }).expect("sheaf json")
    }

    /// Reads a sheaf file against `sk`; every restriction must be listed exactly once.
    pub fn from_json(text: &str, sk: &Skeleton) -> Result<Self, SheafError> {
        let file: SheafFile = serde_json::from_str(text).map_err(|e| SheafError::Json(e.to_string()))?;
        let d = file.d;
        let mut slots: Vec<Vec<Option<DMatrix<f64>>>> =
            (1..=file.degree).map(|n| vec![None; sk.count(n) * (n + 1)]).collect();
        if file.degree > sk.max_degree() {
            return Err(SheafError::DegreeExceedsSkeleton { degree: file.degree, max_degree: sk.max_degree() });
        }
        for e in file.entries {
            let bad = SheafError::BadEntry { dim: e.dim, cofacet: e.cofacet_index, position: e.position };
            if e.dim == 0 || e.dim > file.degree || e.position > e.dim || e.cofacet_index >= sk.count(e.dim) {
                return Err(bad);
            }
            if e.matrix.len() != d * d {
                return Err(SheafError::Shape {
                    dim: e.dim,
                    cofacet: e.cofacet_index,
                    position: e.position,
                    rows: e.matrix.len(),
                    cols: 1,
                    d,
                });
            }
            let slot = &mut slots[e.dim - 1][e.cofacet_index * (e.dim + 1) + e.position];
            if slot.is_some() {
                return Err(bad);
            }
            *slot = Some(DMatrix::from_row_slice(d, d, &e.matrix));
        }
        Self::from_fn(sk, d, file.degree, |n, s, i| {
            slots[n - 1][s * (n + 1) + i].take().unwrap_or_else(|| DMatrix::from_element(0, 0, 0.0))
        })
        .map_err(|e| match e {
            SheafError::Shape { dim, cofacet, position, rows: 0, .. } => SheafError::Missing { dim, cofacet, position },
            other => other,
        })
    }
}

fn validate(m: &DMatrix<f64>, d: usize, dim: usize, cofacet: usize, position: usize) -> Result<(), SheafError> {
    if m.nrows() != d || m.ncols() != d {
        return Err(SheafError::Shape { dim, cofacet, position, rows: m.nrows(), cols: m.ncols(), d });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(SheafError::NonFinite { dim, cofacet, position });
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

#[derive(Serialize, Deserialize)]
struct SheafFile {
    d: usize,
    degree: usize,
    entries: Vec<SheafEntry>,
}

#[derive(Serialize, Deserialize)]
struct SheafEntry {
    dim: usize,
    cofacet_index: usize,
    position: usize,
    matrix: Vec<f64>,
}

/// Every restriction is the identity.
pub fn identity_sheaf(sk: &Skeleton, d: usize, degree: usize) -> Result<CellularSheaf, SheafError> {
    CellularSheaf::from_fn(sk, d, degree, |_, _, _| DMatrix::identity(d, d))
}

fn uniform_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..=1.0))
}

/// Restrictions with entries i.i.d. uniform in `[-1, 1]`, seeded. Degrees of 2 and above are
/// refused because independent maps break compatibility.
pub fn random_sheaf(sk: &Skeleton, d: usize, degree: usize, seed: u64) -> Result<CellularSheaf, SheafError> {
    if degree >= 2 {
        return Err(SheafError::NeedsCompatibleGenerator(degree));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CellularSheaf::from_fn(sk, d, degree, |_, _, _| uniform_matrix(&mut rng, d))
}

/// A random sheaf of any degree that satisfies compatibility.
///
/// Follows the pattern of the sheaf induced from a graph sheaf: each (node, hyperedge) incidence
/// gets one random map `A(v, e)` used for every `[v] <| [v, w]_e` and `[v] <| [w, v]_e`, and every
/// restriction between simplices of dimension 1 and above is the identity.
pub fn random_compatible_sheaf(
    sk: &Skeleton,
    d: usize,
    degree: usize,
    seed: u64,
) -> Result<CellularSheaf, SheafError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_incidence: BTreeMap<(usize, usize), DMatrix<f64>> = BTreeMap::new();
    if degree >= 1 {
        for s in sk.simplices(1) {
            let Provenance::Edge(e) = s.provenance() else { continue };
            for &v in s.tuple() {
                per_incidence.entry((e, v)).or_insert_with(|| DMatrix::zeros(d, d));
            }
        }
        for m in per_incidence.values_mut() {
            *m = uniform_matrix(&mut rng, d);
        }
    }
    CellularSheaf::from_fn(sk, d, degree, |n, s, i| {
        if n == 1 {
            let simplex = sk.simplex(1, s);
            let Provenance::Edge(e) = simplex.provenance() else { unreachable!() };
            let v = simplex.tuple()[1 - i];
            per_incidence[&(e, v)].clone()
        } else {
            DMatrix::identity(d, d)
        }
    })
}

/// A sheaf on a graph: one map `F(v <| e)` per endpoint of every edge.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSheaf {
    stalk_dim: usize,
    /// `maps[e][k]` for the `k`-th endpoint (ascending node index) of edge `e`.
    maps: Vec<[DMatrix<f64>; 2]>,
}

impl GraphSheaf {
    pub fn new(g: &Hypergraph, d: usize, maps: Vec<[DMatrix<f64>; 2]>) -> Result<Self, SheafError> {
        if !g.is_graph() {
            return Err(SheafError::NotAGraph);
        }
        if d == 0 {
            return Err(SheafError::ZeroStalk);
        }
        if maps.len() != g.num_edges() {
            return Err(SheafError::SkeletonMismatch);
        }
        for (e, pair) in maps.iter().enumerate() {
            for (k, m) in pair.iter().enumerate() {
                validate(m, d, 1, e, k)?;
            }
        }
        Ok(GraphSheaf { stalk_dim: d, maps })
    }

    pub fn identity(g: &Hypergraph, d: usize) -> Result<Self, SheafError> {
        let maps = (0..g.num_edges()).map(|_| [DMatrix::identity(d, d), DMatrix::identity(d, d)]).collect();
        Self::new(g, d, maps)
    }

    pub fn random(g: &Hypergraph, d: usize, seed: u64) -> Result<Self, SheafError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let maps = (0..g.num_edges()).map(|_| [uniform_matrix(&mut rng, d), uniform_matrix(&mut rng, d)]).collect();
        Self::new(g, d, maps)
    }

    pub fn stalk_dim(&self) -> usize {
        self.stalk_dim
    }

    /// `F(v <| e)`; `v` must be an endpoint of `e`.
    pub fn map(&self, g: &Hypergraph, v: usize, e: usize) -> &DMatrix<f64> {
        let nodes = &g.edges()[e].nodes;
        let k = nodes.iter().position(|&u| u == v).expect("node is an endpoint of the edge");
        &self.maps[e][k]
    }

    pub(crate) fn endpoint_maps(&self, e: usize) -> &[DMatrix<f64>; 2] {
        &self.maps[e]
    }
}

/// The degree-1 sheaf on the induced simplicial set of a graph: `[v] <| [v, w]_e` and
/// `[v] <| [w, v]_e` both carry `F(v <| e)`.
pub fn induce_from_graph_sheaf(g: &Hypergraph, gs: &GraphSheaf, sk: &Skeleton) -> Result<CellularSheaf, SheafError> {
    if !g.is_graph() {
        return Err(SheafError::NotAGraph);
    }
    if sk.num_nodes() != g.num_nodes() || sk.max_degree() < 1 || sk.count(1) != 2 * g.num_edges() {
        return Err(SheafError::SkeletonMismatch);
    }
    CellularSheaf::from_fn(sk, gs.stalk_dim, 1, |_, s, i| {
        let simplex = sk.simplex(1, s);
        let Provenance::Edge(e) = simplex.provenance() else { unreachable!() };
        gs.map(g, simplex.tuple()[1 - i], e).clone()
    })
}

/// One failed instance of the compatibility condition.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityViolation {
    pub dim: usize,
    pub simplex: usize,
    pub i: usize,
    pub j: usize,
    pub max_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompatibilityReport {
    pub violations: Vec<CompatibilityViolation>,
}

impl CompatibilityReport {
    pub fn is_compatible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that for every simplex `s` of dimension `2..=degree` and `j < i`, the two ways up from
/// the double facet `d_j d_i s = d_{i-1} d_j s` into `s` agree entrywise within `tol`.
pub fn check_compatibility(sheaf: &CellularSheaf, sk: &Skeleton, tol: f64) -> CompatibilityReport {
    let mut violations = Vec::new();
    for n in 2..=sheaf.degree() {
        for s in 0..sk.count(n) {
            for i in 1..=n {
                for j in 0..i {
                    let via_i = sk.facet_index(n, s, i);
                    let via_j = sk.facet_index(n, s, j);
                    debug_assert_eq!(sk.facet_index(n - 1, via_i, j), sk.facet_index(n - 1, via_j, i - 1));
                    let left = sheaf.restriction(n, s, i) * sheaf.restriction(n - 1, via_i, j);
                    let right = sheaf.restriction(n, s, j) * sheaf.restriction(n - 1, via_j, i - 1);
                    let diff = (left - right).amax();
                    if diff > tol {
                        violations.push(CompatibilityViolation { dim: n, simplex: s, i, j, max_abs_diff: diff });
                    }
                }
            }
        }
    }
    CompatibilityReport { violations }
}
