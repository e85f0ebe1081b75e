use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{BlockSparseMatrix, LaplacianError};

/// Eigenvalues at or below `rel_tol * max eigenvalue` are treated as zero.
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeOptions {
    pub rel_tol: f64,
    /// Shift `D + eps I` before inverting; zero leaves `D` untouched.
    pub eps: f64,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions { rel_tol: DEFAULT_PINV_REL_TOL, eps: 0.0 }
    }
}

/// Pseudo-inverse square root of a symmetric PSD block, kept with its eigendecomposition so
/// that derivatives can be taken through it.
#[derive(Debug, Clone)]
pub struct InvSqrt {
    pub eigenvectors: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    /// `f(lambda)` per eigenvalue: `lambda^{-1/2}` above the threshold, 0 below.
    pub scaled: DVector<f64>,
    pub matrix: DMatrix<f64>,
}

impl InvSqrt {
    pub fn new(block: &DMatrix<f64>, opts: NormalizeOptions) -> Self {
        let n = block.nrows();
        let mut shifted = block.clone();
        for i in 0..n {
            shifted[(i, i)] += opts.eps;
        }
        let eig = SymmetricEigen::new(shifted);
        let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let threshold = opts.rel_tol * max;
        let scaled = eig.eigenvalues.map(|l| if max > 0.0 && l > threshold { l.sqrt().recip() } else { 0.0 });
        let q = &eig.eigenvectors;
        let matrix = q * DMatrix::from_diagonal(&scaled) * q.transpose();
        InvSqrt { eigenvectors: eig.eigenvectors, eigenvalues: eig.eigenvalues, scaled, matrix }
    }

    /// Given `dLoss/dS` for `S = f(D)`, returns `dLoss/dD` restricted to symmetric perturbations.
    ///
    /// Uses the divided differences of `f` in the eigenbasis; pairs involving a zeroed
    /// eigenvalue are treated as locally constant.
    pub fn backward(&self, grad_s: &DMatrix<f64>) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let n = self.eigenvalues.len();
        let sym = (grad_s + grad_s.transpose()) * 0.5;
        let mut inner = q.transpose() * sym * q;
        for a in 0..n {
            for b in 0..n {
                let (fa, fb) = (self.scaled[a], self.scaled[b]);
                let k = if fa == 0.0 || fb == 0.0 {
                    0.0
                } else {
                    // (a^{-1/2} - b^{-1/2}) / (a - b) = -1 / (sqrt(a) sqrt(b) (sqrt(a) + sqrt(b)))
                    let (ra, rb) = (fa.recip(), fb.recip());
                    -1.0 / (ra * rb * (ra + rb))
                };
                inner[(a, b)] *= k;
            }
        }
        q * inner * q.transpose()
    }
}

/// `D^{-1/2} L D^{-1/2}` with a per-block pseudo-inverse square root.
pub fn normalize(l: &BlockSparseMatrix, diag: &BlockSparseMatrix, rel_tol: f64) -> Result<BlockSparseMatrix, LaplacianError> {
    normalize_with(l, diag, NormalizeOptions { rel_tol, eps: 0.0 })
}

pub fn normalize_with(
    l: &BlockSparseMatrix,
    diag: &BlockSparseMatrix,
    opts: NormalizeOptions,
) -> Result<BlockSparseMatrix, LaplacianError> {
    let d = l.block_dim();
    if (diag.n_blocks(), diag.block_dim()) != (l.n_blocks(), d) {
        return Err(LaplacianError::DimensionMismatch { expected: l.dim(), found: diag.dim() });
    }
    let mut scale: Vec<Option<DMatrix<f64>>> = vec![None; l.n_blocks()];
    for (r, c, block) in diag.entries() {
        if r != c {
            return Err(LaplacianError::NotBlockDiagonal { row: *r, col: *c });
        }
        let asym = (block - block.transpose()).amax();
        if asym > 1e-12 * block.amax().max(1.0) {
            return Err(LaplacianError::NonSymmetricBlock { block: *r, asymmetry: asym });
        }
        scale[*r] = Some(InvSqrt::new(block, opts).matrix);
    }
    if opts.eps > 0.0 {
        let shifted = InvSqrt::new(&DMatrix::zeros(d, d), opts).matrix;
        for s in scale.iter_mut().filter(|s| s.is_none()) {
            *s = Some(shifted.clone());
        }
    }
    let entries = l
        .entries()
        .iter()
        .filter_map(|(r, c, m)| match (&scale[*r], &scale[*c]) {
            (Some(sr), Some(sc)) => Some((*r, *c, sr * m * sc)),
            _ => None,
        })
        .collect();
    Ok(BlockSparseMatrix::from_triplets(l.n_blocks(), d, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge_normalizes_to_unit_laplacian() {
        let one = |x: f64| DMatrix::from_element(1, 1, x);
        let l = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 0, one(2.0)), (0, 1, one(-2.0)), (1, 0, one(-2.0)), (1, 1, one(2.0))]);
        let n = normalize(&l, &l.diagonal(), DEFAULT_PINV_REL_TOL).unwrap();
        assert!((n.to_dense() - DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])).amax() < 1e-15);
        let eig = SymmetricEigen::new(n.to_dense()).eigenvalues;
        let mut ev: Vec<f64> = eig.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-14 && (ev[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_stays_zero() {
        let l = BlockSparseMatrix::zeros(3, 2);
        let n = normalize(&l, &l.diagonal(), DEFAULT_PINV_REL_TOL).unwrap();
        assert_eq!(n.to_dense(), DMatrix::zeros(6, 6));
    }

    #[test]
    fn singular_block_uses_pseudo_inverse() {
        let d = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0]);
        let s = InvSqrt::new(&d, NormalizeOptions::default()).matrix;
        assert!((s - DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])).amax() < 1e-15);
        let shifted = InvSqrt::new(&d, NormalizeOptions { rel_tol: 1e-8, eps: 1.0 }).matrix;
        assert!((shifted[(1, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_symmetric_block_rejected() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let l = BlockSparseMatrix::from_triplets(1, 2, vec![(0, 0, b)]);
        assert!(matches!(
            normalize(&l, &l.diagonal(), DEFAULT_PINV_REL_TOL),
            Err(LaplacianError::NonSymmetricBlock { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 1.0]);
        let g = DMatrix::from_row_slice(3, 3, &[0.4, -1.0, 0.2, 0.7, 0.1, -0.3, 0.5, 0.9, -0.6]);
        let loss = |m: &DMatrix<f64>| InvSqrt::new(m, NormalizeOptions::default()).matrix.component_mul(&g).sum();
        let analytic = InvSqrt::new(&a, NormalizeOptions::default()).backward(&g);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                // Symmetric perturbation E_ij + E_ji (single diagonal entry when i == j).
                let mut e = DMatrix::zeros(3, 3);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                let fd = (loss(&(&a + &e * h)) - loss(&(&a - &e * h))) / (2.0 * h);
                let an = (analytic.clone().component_mul(&e)).sum();
                assert!((fd - an).abs() < 1e-7, "({i},{j}): fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn backward_with_repeated_eigenvalues() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 2.0]);
        let analytic = InvSqrt::new(&a, NormalizeOptions::default()).backward(&g);
        // f(D) = D^{-1/2} at a scalar multiple of I: derivative is -1/2 lambda^{-3/2} * sym(G).
        let expected = (&g + g.transpose()) * 0.5 * (-0.5 * 2f64.powf(-1.5));
        assert!((analytic - expected).amax() < 1e-14);
    }
}
