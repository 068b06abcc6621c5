//! Spatially smoothed, temporally averaged sample covariance and the
//! eigenspace machinery shared by MV and EIBMV.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Covariance estimation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovConfig {
    /// Subarray length in elements.
    pub subarray_len: usize,
    /// Temporal half-window; `2K + 1` samples are averaged.
    pub half_window: usize,
    /// Diagonal loading as a fraction of the covariance trace.
    pub loading: f64,
    /// Eigenvalues above `sigma * lambda_max` span the signal subspace.
    pub sigma: f64,
}

impl CovConfig {
    /// `L = M/2`, `K = 5`, `loading = 1/(10 L)`, `sigma = 0.7`.
    pub fn simulation(m: usize) -> Self {
        let l = (m / 2).max(1);
        Self { subarray_len: l, half_window: 5, loading: 1.0 / (10.0 * l as f64), sigma: 0.7 }
    }

    /// `L = M/3`, `K = 0`, `loading = 1/(10 L)`, `sigma = 0.8`.
    pub fn experiment(m: usize) -> Self {
        let l = (m / 3).max(1);
        Self { subarray_len: l, half_window: 0, loading: 1.0 / (10.0 * l as f64), sigma: 0.8 }
    }

    pub fn rows(&self) -> usize {
        2 * self.half_window + 1
    }

    /// Checks the configuration against an `m`-element aperture.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.subarray_len == 0 || self.subarray_len > m / 2 {
            return Err(Error::Config(format!(
                "subarray length must be in 1..={} for M = {m}, got {}",
                m / 2,
                self.subarray_len
            )));
        }
        if !(self.loading >= 0.0 && self.loading.is_finite()) {
            return Err(Error::Config(format!("diagonal loading must be >= 0, got {}", self.loading)));
        }
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(Error::Config(format!("sigma must be in [0, 1), got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvector
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

/// Sample covariance of a `(2K+1) x M` window (row-major, one row per time
/// offset), averaged over all `M - L + 1` length-`L` subarrays and all rows.
///
/// Rows clamped at the recorded window's edge are zero and still count in
/// the `(2K+1)(M-L+1)` divisor.
pub fn estimate_covariance(window: &[f64], m: usize, subarray_len: usize) -> Result<Matrix> {
    let l = subarray_len;
    if l == 0 || l > m {
        return Err(Error::Config(format!("subarray length {l} not in 1..={m}")));
    }
    if m == 0 || window.len() % m != 0 {
        return Err(Error::Config(format!("window length {} is not a multiple of M = {m}", window.len())));
    }
    let rows = window.len() / m;
    let p = m - l + 1;
    let mut r = Matrix::zeros(l);
    let acc = r.as_mut_slice();
    let mut first = vec![0.0; l];
    for x in window.chunks_exact(m) {
        if x.iter().all(|&v| v == 0.0) {
            continue;
        }
        // S(a, b) = sum_l x[l + a] x[l + b]; slide down each diagonal with
        // S(a+1, b+1) = S(a, b) - x[a] x[b] + x[a + p] x[b + p].
        for (b, f) in first.iter_mut().enumerate() {
            *f = linalg::dot(&x[..p], &x[b..b + p]);
        }
        for (offset, &s0) in first.iter().enumerate() {
            let mut s = s0;
            acc[offset] += s;
            for a in 1..l - offset {
                let b = a + offset;
                s += x[a - 1 + p] * x[b - 1 + p] - x[a - 1] * x[b - 1];
                acc[a * l + b] += s;
            }
        }
    }
    let norm = 1.0 / (rows * p) as f64;
    for a in 0..l {
        for b in a..l {
            let v = acc[a * l + b] * norm;
            acc[a * l + b] = v;
            acc[b * l + a] = v;
        }
    }
    Ok(r)
}

/// `R + loading * trace(R) * I`.
pub fn diagonal_load(r: &Matrix, loading: f64) -> Matrix {
    let mut out = r.clone();
    let add = loading * r.trace();
    for i in 0..out.n() {
        out.set(i, i, out.get(i, i) + add);
    }
    out
}

pub fn eig_sym(r: &Matrix) -> Result<EigPair> {
    let (eigenvalues, eigenvectors) = linalg::symmetric_eigen(r)?;
    Ok(EigPair { eigenvalues, eigenvectors })
}

/// Number of eigenvalues strictly above `sigma * lambda_1`, at least one.
pub fn subspace_dim(eigenvalues: &[f64], sigma: f64) -> usize {
    let Some(&top) = eigenvalues.first() else { return 0 };
    let threshold = sigma * top;
    eigenvalues.iter().filter(|&&v| v > threshold).count().max(1)
}

/// Signal subspace basis `E_s` as a list of columns.
pub fn signal_subspace(eig: &EigPair, sigma: f64) -> Vec<Vec<f64>> {
    let num = subspace_dim(&eig.eigenvalues, sigma);
    (0..num).map(|j| eig.eigenvectors.column(j)).collect()
}

/// Signal subspace straight from the matrix, without forming the full
/// eigenvector basis when only a few columns are kept.
pub fn signal_subspace_of(r: &Matrix, sigma: f64) -> Result<Vec<Vec<f64>>> {
    let (_, basis) = linalg::top_eigenvectors(r, |vals| subspace_dim(vals, sigma))?;
    Ok(basis)
}

/// `E_s E_s^T w`.
pub fn project(basis: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for u in basis {
        let c = linalg::dot(u, w);
        out.iter_mut().zip(u).for_each(|(o, ui)| *o += c * ui);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_cov(window: &[f64], m: usize, l: usize) -> Vec<f64> {
        let rows = window.len() / m;
        let p = m - l + 1;
        let mut r = vec![0.0; l * l];
        for n in 0..rows {
            for s in 0..p {
                for a in 0..l {
                    for b in 0..l {
                        r[a * l + b] += window[n * m + s + a] * window[n * m + s + b];
                    }
                }
            }
        }
        r.iter().map(|v| v / (rows * p) as f64).collect()
    }

    #[test]
    fn single_subarray_single_sample_is_outer_product() {
        let x = [1.0, -2.0, 0.5, 3.0];
        let r = estimate_covariance(&x, 4, 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(r.get(a, b), x[a] * x[b]);
            }
        }
    }

    #[test]
    fn all_ones_gives_all_ones() {
        for l in 1..=6 {
            let r = estimate_covariance(&[1.0; 12], 12, l).unwrap();
            assert!(r.as_slice().iter().all(|&v| v == 1.0), "l={l}");
        }
    }

    #[test]
    fn matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, l, k) in [(8, 4, 1), (16, 8, 5), (128, 64, 2), (9, 1, 0)] {
            let w: Vec<f64> = (0..(2 * k + 1) * m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = estimate_covariance(&w, m, l).unwrap();
            let oracle = brute_force_cov(&w, m, l);
            let scale = oracle.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (x, y) in r.as_slice().iter().zip(&oracle) {
                assert!((x - y).abs() <= 1e-12 * scale, "m={m} l={l}");
            }
            assert!(r.is_symmetric());
        }
    }

    #[test]
    fn rejects_oversized_subarray() {
        assert!(matches!(estimate_covariance(&[1.0; 4], 4, 5), Err(Error::Config(_))));
    }

    #[test]
    fn loading_adds_trace_fraction() {
        let r = diagonal_load(&Matrix::identity(2), 1.0 / 20.0);
        assert_eq!(r.as_slice(), &[1.1, 0.0, 0.0, 1.1]);
        let r0 = Matrix::from_row_major(2, vec![2.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(diagonal_load(&r0, 0.0), r0);
    }

    #[test]
    fn subspace_dimension_rule() {
        assert_eq!(subspace_dim(&[10.0, 5.0, 1.0], 0.4), 2);
        assert_eq!(subspace_dim(&[10.0, 5.0, 1.0], 0.0), 3);
        assert_eq!(subspace_dim(&[10.0, 9.99, 1.0], 0.999), 1);
        assert_eq!(subspace_dim(&[0.0, 0.0], 0.5), 1);
    }

    #[test]
    fn eig_sym_diagonal_and_identity() {
        let e = eig_sym(&Matrix::identity(4)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 4]);
        let d = Matrix::from_fn(3, |i, j| if i == j { [5.0, 2.0, 1.0][i] } else { 0.0 });
        let e = eig_sym(&d).unwrap();
        assert_eq!(e.eigenvalues, vec![5.0, 2.0, 1.0]);
        assert_eq!(e.eigenvectors, Matrix::identity(3));
    }

    #[test]
    fn eig_sym_rejects_nan() {
        let mut m = Matrix::identity(3);
        m.set(1, 1, f64::NAN);
        assert!(matches!(eig_sym(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn config_bounds() {
        assert!(CovConfig::simulation(128).validate(128).is_ok());
        assert_eq!(CovConfig::simulation(128).subarray_len, 64);
        assert_eq!(CovConfig::experiment(128).subarray_len, 42);
        let mut c = CovConfig::simulation(128);
        c.subarray_len = 65;
        assert!(c.validate(128).is_err());
        c.subarray_len = 0;
        assert!(c.validate(128).is_err());
        let mut c = CovConfig::simulation(128);
        c.sigma = 1.0;
        assert!(c.validate(128).is_err());
    }
}
