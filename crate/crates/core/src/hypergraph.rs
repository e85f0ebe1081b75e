//! Hypergraph data model.
//!
//! A hypergraph is a node set together with a list of hyperedges, each labelled by a node subset
//! of size at least two. Node identifiers are arbitrary strings; at construction time they are
//! mapped to dense indices `0..n` and every downstream structure works on those indices.
//!
//! Two on-disk formats are accepted:
//!
//! - text: an optional first line `#nodes <count>`, then one hyperedge per nonempty line as
//!   whitespace-separated node tokens. `#` starts a comment. With the header present, node tokens
//!   must be the integers `0..count` and nodes that appear in no hyperedge are kept as isolated
//!   nodes.
//! - JSON: `{"nodes": [...], "edges": [[...], ...]}`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HypergraphError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: hyperedge has a single node; hyperedges need at least two nodes")]
    SingletonEdge { line: usize },
    #[error("hyperedge {edge} has a single node")]
    SingletonLabel { edge: String },
    #[error("hyperedge {edge} is empty")]
    EmptyEdge { edge: String },
    #[error("line {line}: unknown node `{token}`")]
    UnknownNode { line: usize, token: String },
    #[error("duplicate node identifier `{0}`")]
    DuplicateNode(String),
    #[error("duplicate hyperedge identifier `{0}`")]
    DuplicateEdge(String),
    #[error("hyperedge {edge} lists node `{node}` more than once")]
    RepeatedNodeInEdge { edge: String, node: String },
    #[error("invalid json: {0}")]
    Json(String),
    #[error("hypergraph cannot be written as text: {0}")]
    NotRepresentable(String),
}

/// A hyperedge: identifier plus its node label, stored as sorted dense node indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub id: String,
    pub nodes: Vec<usize>,
}

impl Hyperedge {
    /// Number of nodes in the label.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// `|label| - 1`.
    pub fn dimension(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn contains(&self, v: usize) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    edges: Vec<Hyperedge>,
}

impl Hypergraph {
    /// Builds a validated hypergraph from node identifiers and `(edge id, node ids)` records.
    pub fn new<N, E, L>(nodes: N, edges: E) -> Result<Self, HypergraphError>
    where
        N: IntoIterator,
        N::Item: Into<String>,
        E: IntoIterator<Item = (String, L)>,
        L: IntoIterator,
        L::Item: AsRef<str>,
    {
        let nodes: Vec<String> = nodes.into_iter().map(Into::into).collect();
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, id) in nodes.iter().enumerate() {
            if node_index.insert(id.clone(), i).is_some() {
                return Err(HypergraphError::DuplicateNode(id.clone()));
            }
        }
        let mut out = Vec::new();
        let mut seen_ids = HashMap::new();
        for (id, label) in edges {
            let mut idx = Vec::new();
            for tok in label {
                let tok = tok.as_ref();
                let v = *node_index.get(tok).ok_or_else(|| HypergraphError::UnknownNode {
                    line: out.len() + 1,
                    token: tok.to_string(),
                })?;
                idx.push(v);
            }
            if seen_ids.insert(id.clone(), ()).is_some() {
                return Err(HypergraphError::DuplicateEdge(id));
            }
            out.push(Self::checked_edge(id, idx, &nodes)?);
        }
        Ok(Hypergraph { nodes, node_index, edges: out })
    }

    /// Builds a hypergraph on nodes `"0".."n-1"` with edges given as index lists; edge ids are
    /// `"e0", "e1", ...`.
    pub fn from_index_edges(n: usize, edges: &[Vec<usize>]) -> Result<Self, HypergraphError> {
        let nodes: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let node_index = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut out = Vec::with_capacity(edges.len());
        for (k, e) in edges.iter().enumerate() {
            if let Some(&bad) = e.iter().find(|&&v| v >= n) {
                return Err(HypergraphError::UnknownNode { line: k + 1, token: bad.to_string() });
            }
            out.push(Self::checked_edge(format!("e{k}"), e.clone(), &nodes)?);
        }
        Ok(Hypergraph { nodes, node_index, edges: out })
    }

    fn checked_edge(id: String, mut idx: Vec<usize>, nodes: &[String]) -> Result<Hyperedge, HypergraphError> {
        match idx.len() {
            0 => return Err(HypergraphError::EmptyEdge { edge: id }),
            1 => return Err(HypergraphError::SingletonLabel { edge: id }),
            _ => {}
        }
        idx.sort_unstable();
        if let Some(w) = idx.windows(2).find(|w| w[0] == w[1]) {
            return Err(HypergraphError::RepeatedNodeInEdge { edge: id, node: nodes[w[0]].clone() });
        }
        Ok(Hyperedge { id, nodes: idx })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Hyperedge] {
        &self.edges
    }

    pub fn node_id(&self, v: usize) -> &str {
        &self.nodes[v]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    /// Largest hyperedge dimension, 0 when there are no hyperedges.
    pub fn max_dimension(&self) -> usize {
        self.edges.iter().map(Hyperedge::dimension).max().unwrap_or(0)
    }

    /// Every hyperedge has exactly two nodes.
    pub fn is_graph(&self) -> bool {
        self.edges.iter().all(|e| e.size() == 2)
    }

    pub fn average_edge_size(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edges.iter().map(|e| e.size()).sum::<usize>() as f64 / self.edges.len() as f64
    }

    /// Relabels node `v` as `perm[v]`. Node identifiers travel with their nodes, so the result is
    /// labeled-equal to `self`; only the dense indexing changes.
    pub fn permute_nodes(&self, perm: &[usize]) -> Hypergraph {
        assert_eq!(perm.len(), self.nodes.len(), "permutation length");
        let mut nodes = vec![String::new(); self.nodes.len()];
        for (v, &p) in perm.iter().enumerate() {
            nodes[p] = self.nodes[v].clone();
        }
        let node_index = nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let mut idx: Vec<usize> = e.nodes.iter().map(|&v| perm[v]).collect();
                idx.sort_unstable();
                Hyperedge { id: e.id.clone(), nodes: idx }
            })
            .collect();
        Hypergraph { nodes, node_index, edges }
    }

    /// Parses either format; input whose first non-blank character is `{` is read as JSON.
    pub fn parse(text: &str) -> Result<Self, HypergraphError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    pub fn parse_text(text: &str) -> Result<Self, HypergraphError> {
        let mut lines = text.lines().enumerate().peekable();
        while lines.peek().is_some_and(|(_, l)| l.trim().is_empty()) {
            lines.next();
        }
        let mut declared: Option<usize> = None;
        if let Some((lineno, l)) = lines.peek() {
            let l = l.trim();
            if let Some(rest) = l.strip_prefix("#nodes") {
                let count = rest.trim().parse::<usize>().map_err(|_| HypergraphError::Malformed {
                    line: lineno + 1,
                    msg: format!("bad node-count header `{l}`"),
                })?;
                declared = Some(count);
                lines.next();
            }
        }

        let mut nodes: Vec<String> = match declared {
            Some(n) => (0..n).map(|i| i.to_string()).collect(),
            None => Vec::new(),
        };
        let mut node_index: HashMap<String, usize> =
            nodes.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut edges = Vec::new();

        for (lineno, raw) in lines {
            let line = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.len() {
                0 => continue,
                1 => return Err(HypergraphError::SingletonEdge { line: lineno + 1 }),
                _ => {}
            }
            let mut idx = Vec::with_capacity(tokens.len());
            for tok in tokens {
                let v = match (declared, node_index.get(tok)) {
                    (_, Some(&v)) => v,
                    (Some(_), None) => {
                        return Err(HypergraphError::UnknownNode { line: lineno + 1, token: tok.to_string() })
                    }
                    (None, None) => {
                        let v = nodes.len();
                        nodes.push(tok.to_string());
                        node_index.insert(tok.to_string(), v);
                        v
                    }
                };
                idx.push(v);
            }
            let id = format!("e{}", edges.len());
            let edge = Self::checked_edge(id, idx, &nodes).map_err(|e| match e {
                HypergraphError::RepeatedNodeInEdge { node, .. } => HypergraphError::Malformed {
                    line: lineno + 1,
                    msg: format!("node `{node}` repeated within a hyperedge"),
                },
                other => other,
            })?;
            edges.push(edge);
        }
        Ok(Hypergraph { nodes, node_index, edges })
    }

    pub fn parse_json(text: &str) -> Result<Self, HypergraphError> {
        let doc: JsonHypergraph = serde_json::from_str(text).map_err(|e| HypergraphError::Json(e.to_string()))?;
        let token = |v: &Value| -> Result<String, HypergraphError> {
            match v {
                Value::String(s) => Ok(s.clone()),
                Value::Number(n) => Ok(n.to_string()),
                other => Err(HypergraphError::Json(format!("node identifier must be string or integer, got {other}"))),
            }
        };
        let nodes = doc.nodes.iter().map(token).collect::<Result<Vec<_>, _>>()?;
        let mut edges = Vec::with_capacity(doc.edges.len());
        for (k, e) in doc.edges.iter().enumerate() {
            let label = e.iter().map(token).collect::<Result<Vec<_>, _>>()?;
            edges.push((format!("e{k}"), label));
        }
        Self::new(nodes, edges)
    }

    /// Text serialization. Uses the `#nodes` header when node ids are exactly `0..n` in order;
    /// otherwise nodes must appear in first-appearance order with none isolated.
    pub fn to_text(&self) -> Result<String, HypergraphError> {
        let mut out = String::new();
        let canonical_ids = self.nodes.iter().enumerate().all(|(i, s)| *s == i.to_string());
        if canonical_ids {
            out.push_str(&format!("#nodes {}\n", self.nodes.len()));
        } else {
            let mut next = 0;
            let mut seen = vec![false; self.nodes.len()];
            for e in &self.edges {
                // Line order is the only order information in the headerless format.
                for &v in &e.nodes {
                    if !seen[v] {
                        if v != next {
                            return Err(HypergraphError::NotRepresentable(
                                "node order differs from first-appearance order".into(),
                            ));
                        }
                        seen[v] = true;
                        next += 1;
                    }
                }
            }
            if next != self.nodes.len() {
                return Err(HypergraphError::NotRepresentable("isolated nodes need a `#nodes` header".into()));
            }
            if self.nodes.iter().any(|s| s.contains('#') || s.split_whitespace().count() != 1) {
                return Err(HypergraphError::NotRepresentable("node id contains whitespace or `#`".into()));
            }
        }
        for e in &self.edges {
            let line: Vec<&str> = e.nodes.iter().map(|&v| self.nodes[v].as_str()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let doc = JsonHypergraph {
            nodes: self.nodes.iter().map(|s| Value::String(s.clone())).collect(),
            edges: self
                .edges
                .iter()
                .map(|e| e.nodes.iter().map(|&v| Value::String(self.nodes[v].clone())).collect())
                .collect(),
        };
        serde_json::to_string(&doc).expect("hypergraph json")
    }

    /// Labels as sorted identifier lists, sorted; the multiset `{f(e)}` in canonical form.
    fn label_multiset(&self) -> Vec<Vec<&str>> {
        let mut labels: Vec<Vec<&str>> = self
            .edges
            .iter()
            .map(|e| {
                let mut l: Vec<&str> = e.nodes.iter().map(|&v| self.nodes[v].as_str()).collect();
                l.sort_unstable();
                l
            })
            .collect();
        labels.sort_unstable();
        labels
    }
}

#[derive(Serialize, Deserialize)]
struct JsonHypergraph {
    nodes: Vec<Value>,
    edges: Vec<Vec<Value>>,
}

/// Isomorphism with the identity vertex map: equal node sets and equal label multisets.
pub fn labeled_equal(h1: &Hypergraph, h2: &Hypergraph) -> bool {
    if h1.num_nodes() != h2.num_nodes() || h1.num_edges() != h2.num_edges() {
        return false;
    }
    if h1.nodes.iter().any(|id| !h2.node_index.contains_key(id)) {
        return false;
    }
    h1.label_multiset() == h2.label_multiset()
}

/// Co-membership counts of the clique expansion: `weight(v, w)` is the number of hyperedges
/// containing both `v` and `w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueExpansion {
    num_nodes: usize,
    weights: BTreeMap<(usize, usize), u32>,
}

impl CliqueExpansion {
    pub fn weight(&self, v: usize, w: usize) -> u32 {
        if v == w {
            return 0;
        }
        let key = if v < w { (v, w) } else { (w, v) };
        self.weights.get(&key).copied().unwrap_or(0)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Nonzero weights keyed by `(v, w)` with `v < w`.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.weights.iter().map(|(&k, &w)| (k, w))
    }

    /// Weighted combinatorial Laplacian `W_deg - W` as a dense matrix.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.num_nodes, self.num_nodes);
        for (&(v, w), &c) in &self.weights {
            let c = c as f64;
            l[(v, w)] -= c;
            l[(w, v)] -= c;
            l[(v, v)] += c;
            l[(w, w)] += c;
        }
        l
    }
}

pub fn clique_expansion_multigraph(h: &Hypergraph) -> CliqueExpansion {
    let mut weights = BTreeMap::new();
    for e in h.edges() {
        for (a, &v) in e.nodes.iter().enumerate() {
            for &w in &e.nodes[a + 1..] {
                *weights.entry((v, w)).or_insert(0) += 1;
            }
        }
    }
    CliqueExpansion { num_nodes: h.num_nodes(), weights }
}
