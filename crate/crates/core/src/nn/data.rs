use nalgebra::DMatrix;

use super::NnError;
use crate::hypergraph::Hypergraph;

/// A hypergraph with one feature row and one class label per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hypergraph: Hypergraph,
    /// `N x raw`.
    pub features: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(hypergraph: Hypergraph, features: DMatrix<f64>, labels: Vec<usize>) -> Result<Self, NnError> {
        let n = hypergraph.num_nodes();
        if features.nrows() != n {
            return Err(NnError::Shape { what: "feature rows", expected: n.to_string(), found: features.nrows().to_string() });
        }
        if labels.len() != n {
            return Err(NnError::Shape { what: "labels", expected: n.to_string(), found: labels.len().to_string() });
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(NnError::Parse { line: 0, msg: "non-finite feature".into() });
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset { hypergraph, features, labels, num_classes })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn raw_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Relabels nodes so that old node `v` becomes `perm[v]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Dataset {
        let mut features = DMatrix::zeros(self.features.nrows(), self.features.ncols());
        let mut labels = vec![0; self.labels.len()];
        for (v, &p) in perm.iter().enumerate() {
            features.row_mut(p).copy_from(&self.features.row(v));
            labels[p] = self.labels[v];
        }
        Dataset { hypergraph: self.hypergraph.permute_nodes(perm), features, labels, num_classes: self.num_classes }
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// One row per node; values separated by commas or whitespace.
pub fn parse_features(text: &str) -> Result<DMatrix<f64>, NnError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, content) in data_lines(text) {
        let row = content
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|e| NnError::Parse { line, msg: format!("{t:?}: {e}") }))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(NnError::Parse { line, msg: format!("expected {} values, found {}", first.len(), row.len()) });
            }
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(NnError::Parse { line, msg: "non-finite value".into() });
        }
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// One nonnegative integer class per line.
pub fn parse_labels(text: &str) -> Result<Vec<usize>, NnError> {
    data_lines(text)
        .map(|(line, t)| t.parse::<usize>().map_err(|e| NnError::Parse { line, msg: format!("{t:?}: {e}") }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_features_and_labels() {
        let x = parse_features("1, 2\n# comment\n3 4\n").unwrap();
        assert_eq!(x, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert!(parse_features("1,2\n3").is_err());
        assert_eq!(parse_labels("0\n1\n\n1").unwrap(), vec![0, 1, 1]);
        assert!(parse_labels("-1").is_err());
    }

    #[test]
    fn dataset_checks_lengths() {
        let h = Hypergraph::parse("a b c").unwrap();
        assert!(Dataset::new(h.clone(), DMatrix::zeros(2, 1), vec![0, 1, 0]).is_err());
        assert!(Dataset::new(h.clone(), DMatrix::zeros(3, 1), vec![0, 1]).is_err());
        let ds = Dataset::new(h, DMatrix::zeros(3, 1), vec![0, 2, 0]).unwrap();
        assert_eq!(ds.num_classes, 3);
    }
}
