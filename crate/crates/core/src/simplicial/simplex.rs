use std::fmt;

use thiserror::Error;

use crate::hypergraph::Hypergraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimplexError {
    #[error("map index {index} out of range for a simplex of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("a simplicial map needs a nonempty domain")]
    EmptyMap,
    #[error("facets are only defined for simplices of dimension at least 1")]
    NoFacets,
    #[error("node {node} is not in hyperedge {edge}")]
    NotInEdge { node: usize, edge: usize },
    #[error("hyperedge {0} does not exist")]
    UnknownEdge(usize),
    #[error("node {0} does not exist")]
    UnknownNode(usize),
}

/// Where a simplex comes from: a single node `{v}` or a hyperedge label `f(e)`.
///
/// Variant order matters: vertex-provenance simplices sort before edge-provenance ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Vertex(usize),
    Edge(usize),
}

/// `[v_0, ..., v_n]_x`: an ordered tuple of node indices tagged with its provenance `x`.
///
/// Values are kept in canonical form: a constant tuple always carries vertex provenance, which
/// realizes the identification of `(v, ..., v)` across every hyperedge containing `v`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    provenance: Provenance,
    tuple: Vec<usize>,
}

impl Simplex {
    /// `[v, ..., v]_v` of dimension `dim`.
    pub fn vertex(v: usize, dim: usize) -> Self {
        Simplex { provenance: Provenance::Vertex(v), tuple: vec![v; dim + 1] }
    }

    /// A simplex drawn from hyperedge `edge`, checked against `h` and put in canonical form.
    pub fn in_edge(h: &Hypergraph, edge: usize, tuple: Vec<usize>) -> Result<Self, SimplexError> {
        let e = h.edges().get(edge).ok_or(SimplexError::UnknownEdge(edge))?;
        if tuple.is_empty() {
            return Err(SimplexError::EmptyMap);
        }
        if let Some(&node) = tuple.iter().find(|&&v| !e.contains(v)) {
            return Err(SimplexError::NotInEdge { node, edge });
        }
        Ok(Self::canonical(Provenance::Edge(edge), tuple))
    }

    /// Canonical form without membership checks; callers guarantee the tuple lies in the label.
    pub(crate) fn canonical(provenance: Provenance, tuple: Vec<usize>) -> Self {
        debug_assert!(!tuple.is_empty());
        let first = tuple[0];
        if tuple.iter().all(|&v| v == first) {
            Simplex { provenance: Provenance::Vertex(first), tuple }
        } else {
            Simplex { provenance, tuple }
        }
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn tuple(&self) -> &[usize] {
        &self.tuple
    }

    pub fn dimension(&self) -> usize {
        self.tuple.len() - 1
    }

    /// Nondegenerate iff the tuple entries are pairwise distinct.
    pub fn is_degenerate(&self) -> bool {
        let n = self.tuple.len();
        (0..n).any(|a| (a + 1..n).any(|b| self.tuple[a] == self.tuple[b]))
    }

    /// `X(mu)(self)` for `mu : [m] -> [n]` given as the sequence `mu(0), ..., mu(m)`.
    pub fn apply_map(&self, mu: &[usize]) -> Result<Simplex, SimplexError> {
        if mu.is_empty() {
            return Err(SimplexError::EmptyMap);
        }
        let dim = self.dimension();
        let tuple = mu
            .iter()
            .map(|&i| self.tuple.get(i).copied().ok_or(SimplexError::IndexOutOfRange { index: i, dim }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Simplex::canonical(self.provenance, tuple))
    }

    /// The `i`-th facet `d_i` (position `i` removed) and the signed incidence `(-1)^i`.
    pub fn facet(&self, i: usize) -> Result<(Simplex, i8), SimplexError> {
        let dim = self.dimension();
        if dim == 0 {
            return Err(SimplexError::NoFacets);
        }
        if i > dim {
            return Err(SimplexError::IndexOutOfRange { index: i, dim });
        }
        let delta: Vec<usize> = (0..=dim).filter(|&j| j != i).collect();
        Ok((self.apply_map(&delta)?, incidence_sign(i)))
    }

    /// The `i`-th degeneracy `s_i`, which repeats position `i`.
    pub fn degeneracy(&self, i: usize) -> Result<Simplex, SimplexError> {
        let dim = self.dimension();
        if i > dim {
            return Err(SimplexError::IndexOutOfRange { index: i, dim });
        }
        let sigma: Vec<usize> = (0..=dim + 1).map(|j| if j <= i { j } else { j - 1 }).collect();
        self.apply_map(&sigma)
    }
}

/// `(-1)^i`.
pub fn incidence_sign(i: usize) -> i8 {
    if i.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.tuple.iter().map(|v| v.to_string()).collect();
        match self.provenance {
            Provenance::Vertex(v) => write!(f, "[{}]_v{}", body.join(","), v),
            Provenance::Edge(e) => write!(f, "[{}]_e{}", body.join(","), e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge_simplex(tuple: &[usize]) -> Simplex {
        Simplex::canonical(Provenance::Edge(0), tuple.to_vec())
    }

    #[test]
    fn apply_map_substitutes() {
        // [a, b, c]_e with mu = (2, 0) gives [c, a]_e.
        let s = edge_simplex(&[10, 11, 12]);
        let t = s.apply_map(&[2, 0]).unwrap();
        assert_eq!(t.tuple(), &[12, 10]);
        assert_eq!(t.provenance(), Provenance::Edge(0));
    }

    #[test]
    fn constant_image_is_vertex_provenance() {
        let s = edge_simplex(&[3, 4]);
        let t = s.apply_map(&[0, 0]).unwrap();
        assert_eq!(t, Simplex::vertex(3, 1));
        assert!(t.is_degenerate());
    }

    #[test]
    fn apply_map_range_checked() {
        let s = edge_simplex(&[3, 4]);
        assert_eq!(s.apply_map(&[0, 2]), Err(SimplexError::IndexOutOfRange { index: 2, dim: 1 }));
        assert_eq!(s.apply_map(&[]), Err(SimplexError::EmptyMap));
    }

    #[test]
    fn facet_signs() {
        let s = edge_simplex(&[0, 1, 2]);
        let (f, sign) = s.facet(1).unwrap();
        assert_eq!(f, edge_simplex(&[0, 2]));
        assert_eq!(sign, -1);

        let e = edge_simplex(&[5, 7]);
        assert_eq!(e.facet(0).unwrap(), (Simplex::vertex(7, 0), 1));
        assert_eq!(e.facet(1).unwrap(), (Simplex::vertex(5, 0), -1));
        assert_eq!(Simplex::vertex(5, 0).facet(0), Err(SimplexError::NoFacets));
    }

    #[test]
    fn degeneracy_repeats_position() {
        let s = edge_simplex(&[1, 2, 3]);
        let d = s.degeneracy(1).unwrap();
        assert_eq!(d.tuple(), &[1, 2, 2, 3]);
        assert!(d.is_degenerate());
        // d_i s_i = id
        assert_eq!(d.facet(1).unwrap().0, s);
        assert_eq!(d.facet(2).unwrap().0, s);
    }

    #[test]
    fn in_edge_checks_membership() {
        let h = Hypergraph::parse("a b c\nc d").unwrap();
        assert!(Simplex::in_edge(&h, 0, vec![0, 2]).is_ok());
        assert_eq!(Simplex::in_edge(&h, 1, vec![0, 2]), Err(SimplexError::NotInEdge { node: 0, edge: 1 }));
        assert_eq!(Simplex::in_edge(&h, 1, vec![3, 3]).unwrap(), Simplex::vertex(3, 1));
    }

    fn tuple_and_maps() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
        // s has dimension p, nu : [n] -> [p], mu : [m] -> [n].
        (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(p1, n1, m1)| {
            (
                proptest::collection::vec(0usize..4, p1),
                proptest::collection::vec(0..p1, n1),
                proptest::collection::vec(0..n1, m1),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn contravariance((tuple, nu, mu) in tuple_and_maps()) {
            let s = Simplex::canonical(Provenance::Edge(1), tuple);
            let stepwise = s.apply_map(&nu).unwrap().apply_map(&mu).unwrap();
            let composite: Vec<usize> = mu.iter().map(|&j| nu[j]).collect();
            prop_assert_eq!(stepwise, s.apply_map(&composite).unwrap());
        }

        #[test]
        fn facet_identity(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle(), len in 3usize..6, i in 1usize..6, j in 0usize..6) {
            let s = edge_simplex(&perm[..len]);
            let n = s.dimension();
            prop_assume!(i <= n && j < i);
            let lhs = s.facet(i).unwrap().0.facet(j).unwrap().0;
            let rhs = s.facet(j).unwrap().0.facet(i - 1).unwrap().0;
            prop_assert_eq!(lhs, rhs);
        }
    }
}
