use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BlockSparseMatrix, Cochain, LaplacianError};

/// Flat dimensions up to this size use a dense eigensolver.
pub const DENSE_LIMIT: usize = 2000;
pub const SPECTRUM_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub dense_limit: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { dense_limit: DENSE_LIMIT, tol: SPECTRUM_TOL, max_iter: 600 }
    }
}

/// The `count` smallest or largest eigenvalues, ascending.
pub fn spectrum(m: &BlockSparseMatrix, count: usize, which: Extreme) -> Result<Vec<f64>, LaplacianError> {
    spectrum_with(m, count, which, SpectrumOptions::default())
}

/// Like [`spectrum`] with explicit solver settings. The iterative path (Lanczos with full
/// reorthogonalization from a single start vector) resolves distinct eigenvalues only, so a
/// repeated extreme eigenvalue is reported once.
pub fn spectrum_with(
    m: &BlockSparseMatrix,
    count: usize,
    which: Extreme,
    opts: SpectrumOptions,
) -> Result<Vec<f64>, LaplacianError> {
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(LaplacianError::NotSymmetric { asymmetry: asym });
    }
    let n = m.dim();
    let count = count.min(n);
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut values = if n <= opts.dense_limit {
        all_eigenvalues_dense(&m.to_dense())
    } else {
        lanczos(m, count, which, opts)?
    };
    values.sort_by(f64::total_cmp);
    let out = match which {
        Extreme::Smallest => values[..count.min(values.len())].to_vec(),
        Extreme::Largest => values[values.len() - count.min(values.len())..].to_vec(),
    };
    Ok(out)
}

fn all_eigenvalues_dense(a: &DMatrix<f64>) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
}

fn lanczos(m: &BlockSparseMatrix, count: usize, which: Extreme, opts: SpectrumOptions) -> Result<Vec<f64>, LaplacianError> {
    let n = m.dim();
    let (offsets, cols, vals) = m.to_csr();
    let matvec = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |r, _| (offsets[r]..offsets[r + 1]).map(|k| vals[k] * x[cols[k]]).sum())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    q /= q.norm();
    let mut basis: Vec<DVector<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let max_steps = opts.max_iter.min(n);

    for step in 0..max_steps {
        let mut w = matvec(&basis[step]);
        let alpha = basis[step].dot(&w);
        alphas.push(alpha);
        // Two passes of Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let beta = w.norm();

        let j = alphas.len();
        let converged_or_done = beta < 1e-12 || j == max_steps || (j >= count && j.is_multiple_of(5));
        if converged_or_done {
            let mut t = DMatrix::zeros(j, j);
            for i in 0..j {
                t[(i, i)] = alphas[i];
                if i + 1 < j {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..j).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let picked: Vec<usize> = match which {
                Extreme::Smallest => order.iter().take(count).copied().collect(),
                Extreme::Largest => order.iter().rev().take(count).copied().collect(),
            };
            let scale = eig.eigenvalues.amax().max(1.0);
            let residual_ok =
                picked.iter().all(|&p| (beta * eig.eigenvectors[(j - 1, p)]).abs() <= opts.tol * scale);
            if beta < 1e-12 || residual_ok {
                return Ok(picked.iter().map(|&p| eig.eigenvalues[p]).collect());
            }
            if j == max_steps {
                return Err(LaplacianError::NotConverged { iterations: j });
            }
        }
        betas.push(beta);
        basis.push(w / beta);
    }
    Err(LaplacianError::NotConverged { iterations: max_steps })
}

/// `x^T L x`, summed over channels.
pub fn dirichlet_energy(l: &BlockSparseMatrix, x: &Cochain) -> Result<f64, LaplacianError> {
    if x.block_dim() != l.block_dim() || x.values().nrows() != l.dim() {
        return Err(LaplacianError::DimensionMismatch { expected: l.dim(), found: x.values().nrows() });
    }
    let lx = l.mul_dense(x.values());
    Ok(x.values().component_mul(&lx).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize) -> BlockSparseMatrix {
        let one = |x: f64| DMatrix::from_element(1, 1, x);
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.push((i, i, one(1.0)));
            t.push((i + 1, i + 1, one(1.0)));
            t.push((i, i + 1, one(-1.0)));
            t.push((i + 1, i, one(-1.0)));
        }
        BlockSparseMatrix::from_triplets(n, 1, t)
    }

    #[test]
    fn single_edge_normalized() {
        let one = |x: f64| DMatrix::from_element(1, 1, x);
        let m = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 0, one(1.0)), (0, 1, one(-1.0)), (1, 0, one(-1.0)), (1, 1, one(1.0))]);
        let ev = spectrum(&m, 2, Extreme::Smallest).unwrap();
        assert!(ev[0].abs() < 1e-12 && (ev[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        let m = BlockSparseMatrix::zeros(4, 2);
        assert_eq!(spectrum(&m, 3, Extreme::Largest).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn asymmetric_rejected() {
        let m = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 1, DMatrix::from_element(1, 1, 1.0))]);
        assert!(matches!(spectrum(&m, 1, Extreme::Smallest), Err(LaplacianError::NotSymmetric { .. })));
    }

    #[test]
    fn lanczos_matches_dense_on_a_path() {
        // Path Laplacian eigenvalues 2 - 2 cos(pi k / n) are distinct.
        let n = 150;
        let m = path_laplacian(n);
        let forced = SpectrumOptions { dense_limit: 0, ..SpectrumOptions::default() };
        for which in [Extreme::Smallest, Extreme::Largest] {
            let dense = spectrum(&m, 3, which).unwrap();
            let iterative = spectrum_with(&m, 3, which, forced).unwrap();
            for (a, b) in dense.iter().zip(&iterative) {
                assert!((a - b).abs() < 1e-8, "{which:?}: {a} vs {b}");
            }
        }
        let exact_max = 2.0 - 2.0 * (std::f64::consts::PI * (n - 1) as f64 / n as f64).cos();
        let top = spectrum_with(&m, 1, Extreme::Largest, forced).unwrap()[0];
        assert!((top - exact_max).abs() < 1e-8);
    }

    #[test]
    fn energy() {
        let one = |x: f64| DMatrix::from_element(1, 1, x);
        let m = BlockSparseMatrix::from_triplets(2, 1, vec![(0, 0, one(2.0)), (0, 1, one(-2.0)), (1, 0, one(-2.0)), (1, 1, one(2.0))]);
        assert_eq!(dirichlet_energy(&m, &Cochain::constant(2, &[3.0])).unwrap(), 0.0);
        let e0 = Cochain::from_vector(1, DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(dirichlet_energy(&m, &e0).unwrap(), 2.0);
        assert!(dirichlet_energy(&m, &Cochain::constant(3, &[1.0])).is_err());
    }
}
