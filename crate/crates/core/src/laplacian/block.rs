use nalgebra::{DMatrix, DVector};

use super::LaplacianError;

/// Square matrix stored as `d x d` blocks in coordinate form, sorted by `(row, col)` with
/// duplicates merged.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix {
    block_dim: usize,
    n_blocks: usize,
    entries: Vec<(usize, usize, DMatrix<f64>)>,
}

impl BlockSparseMatrix {
    pub fn zeros(n_blocks: usize, block_dim: usize) -> Self {
        BlockSparseMatrix { block_dim, n_blocks, entries: Vec::new() }
    }

    /// Sorts by `(row, col)` and sums duplicates in their original relative order, so the result
    /// depends only on the input sequence.
    pub fn from_triplets(n_blocks: usize, block_dim: usize, mut triplets: Vec<(usize, usize, DMatrix<f64>)>) -> Self {
        debug_assert!(triplets.iter().all(|(r, c, m)| *r < n_blocks
            && *c < n_blocks
            && m.nrows() == block_dim
            && m.ncols() == block_dim));
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, DMatrix<f64>)> = Vec::with_capacity(triplets.len());
        for (r, c, m) in triplets {
            match entries.last_mut() {
                Some((lr, lc, acc)) if *lr == r && *lc == c => *acc += m,
                _ => entries.push((r, c, m)),
            }
        }
        BlockSparseMatrix { block_dim, n_blocks, entries }
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    /// Flat dimension `n_blocks * block_dim`.
    pub fn dim(&self) -> usize {
        self.n_blocks * self.block_dim
    }

    pub fn entries(&self) -> &[(usize, usize, DMatrix<f64>)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&DMatrix<f64>> {
        self.entries
            .binary_search_by_key(&(row, col), |&(r, c, _)| (r, c))
            .ok()
            .map(|k| &self.entries[k].2)
    }

    /// The stored diagonal blocks as their own block-diagonal matrix.
    pub fn diagonal(&self) -> BlockSparseMatrix {
        BlockSparseMatrix {
            block_dim: self.block_dim,
            n_blocks: self.n_blocks,
            entries: self.entries.iter().filter(|(r, c, _)| r == c).cloned().collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.block_dim;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, m) in &self.entries {
            out.view_mut((r * d, c * d), (d, d)).copy_from(m);
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> BlockSparseMatrix {
        BlockSparseMatrix {
            block_dim: self.block_dim,
            n_blocks: self.n_blocks,
            entries: self.entries.iter().map(|(r, c, m)| (*r, *c, m * factor)).collect(),
        }
    }

    /// Largest entrywise difference, treating absent blocks as zero.
    pub fn max_abs_diff(&self, other: &BlockSparseMatrix) -> f64 {
        assert_eq!((self.n_blocks, self.block_dim), (other.n_blocks, other.block_dim), "shape mismatch");
        (self.to_dense() - other.to_dense()).amax()
    }

    /// Exact structural symmetry: block `(i, j)` equals the transpose of block `(j, i)`.
    pub fn is_symmetric(&self) -> bool {
        self.max_asymmetry() == 0.0
    }

    pub fn max_asymmetry(&self) -> f64 {
        let zero = DMatrix::zeros(self.block_dim, self.block_dim);
        self.entries
            .iter()
            .map(|(r, c, m)| {
                let other = self.get(*c, *r).unwrap_or(&zero);
                (m - other.transpose()).amax()
            })
            .fold(0.0, f64::max)
    }

    /// `self * x` for a flat `dim x f` matrix.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.block_dim;
        assert_eq!(x.nrows(), self.dim(), "dimension mismatch");
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (r, c, m) in &self.entries {
            let prod = m * x.rows(c * d, d);
            let mut dst = out.rows_mut(r * d, d);
            dst += prod;
        }
        out
    }

    /// Nonzero flat entries `(row, col, value)` in row-major order.
    pub fn flat_triplets(&self) -> Vec<(usize, usize, f64)> {
        let d = self.block_dim;
        let mut out = Vec::new();
        for (r, c, m) in &self.entries {
            for a in 0..d {
                for b in 0..d {
                    let v = m[(a, b)];
                    if v != 0.0 {
                        out.push((r * d + a, c * d + b, v));
                    }
                }
            }
        }
        out.sort_by_key(|&(r, c, _)| (r, c));
        out
    }

    /// Compressed sparse rows of the flat matrix, for iterative solvers.
    pub(crate) fn to_csr(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let trip = self.flat_triplets();
        let mut offsets = vec![0usize; self.dim() + 1];
        for &(r, _, _) in &trip {
            offsets[r + 1] += 1;
        }
        for i in 0..self.dim() {
            offsets[i + 1] += offsets[i];
        }
        let cols = trip.iter().map(|t| t.1).collect();
        let vals = trip.iter().map(|t| t.2).collect();
        (offsets, cols, vals)
    }
}

/// A cochain with `f` channels: one `d x f` block per simplex, stacked into a flat
/// `(n_blocks * d) x f` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cochain {
    block_dim: usize,
    values: DMatrix<f64>,
}

impl Cochain {
    pub fn new(block_dim: usize, values: DMatrix<f64>) -> Result<Self, LaplacianError> {
        if block_dim == 0 || !values.nrows().is_multiple_of(block_dim) {
            return Err(LaplacianError::DimensionMismatch { expected: block_dim, found: values.nrows() });
        }
        Ok(Cochain { block_dim, values })
    }

    pub fn from_vector(block_dim: usize, values: DVector<f64>) -> Result<Self, LaplacianError> {
        let n = values.len();
        Self::new(block_dim, DMatrix::from_column_slice(n, 1, values.as_slice()))
    }

    /// The same vector `x` on every simplex.
    pub fn constant(n_blocks: usize, x: &[f64]) -> Self {
        let d = x.len();
        Cochain { block_dim: d, values: DMatrix::from_fn(n_blocks * d, 1, |r, _| x[r % d]) }
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn n_blocks(&self) -> usize {
        self.values.nrows() / self.block_dim
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn merge_sums_duplicates_in_order() {
        let m = BlockSparseMatrix::from_triplets(
            2,
            1,
            vec![(1, 0, one(-1.0)), (0, 0, one(1.0)), (0, 0, one(2.0)), (0, 1, one(-1.0))],
        );
        assert_eq!(m.entries().len(), 3);
        assert_eq!(m.get(0, 0), Some(&one(3.0)));
        assert_eq!(m.get(1, 1), None);
        assert!(m.is_symmetric());
        assert_eq!(m.to_dense(), DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn asymmetry_is_measured() {
        let m = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 1, one(1.0)), (1, 0, one(0.5))]);
        assert_eq!(m.max_asymmetry(), 0.5);
        let lone = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 1, one(1.0))]);
        assert_eq!(lone.max_asymmetry(), 1.0);
    }

    #[test]
    fn mul_dense_matches_dense_product() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m = BlockSparseMatrix::from_triplets(2, 2, vec![(0, 1, b.clone()), (1, 0, b.transpose())]);
        let x = DMatrix::from_fn(4, 3, |r, c| (r * 3 + c) as f64);
        assert_eq!(m.mul_dense(&x), m.to_dense() * &x);
    }

    #[test]
    fn csr_matches_triplets() {
        let m = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 0, one(2.0)), (0, 1, one(-2.0)), (1, 0, one(-2.0)), (1, 1, one(2.0))]);
        let (off, cols, vals) = m.to_csr();
        assert_eq!(off, vec![0, 2, 4]);
        assert_eq!(cols, vec![0, 1, 0, 1]);
        assert_eq!(vals, vec![2.0, -2.0, -2.0, 2.0]);
    }

    #[test]
    fn cochain_shapes() {
        let c = Cochain::constant(3, &[1.0, 2.0]);
        assert_eq!(c.n_blocks(), 3);
        assert_eq!(c.values().column(0).as_slice(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert!(Cochain::new(2, DMatrix::zeros(3, 1)).is_err());
    }
}
