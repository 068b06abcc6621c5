//! Minimum-variance family: MV, EIBMV and the two-stage EIBMV-DMAS.

use super::{BeamformerConfig, PixelWindow};
use crate::cov::{self, CovConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};

/// Weights produced for one pixel window.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveWeights {
    /// Constrained minimum-variance solution (length L, sums to one).
    pub distortionless: Vec<f64>,
    /// Subarray weights actually applied; projected onto the signal
    /// subspace for EIBMV, equal to `distortionless` for MV.
    pub subarray: Vec<f64>,
    /// Full-aperture equivalent of `subarray` (length M).
    pub full: Vec<f64>,
}

/// `R^-1 a / (a^T R^-1 a)`.
pub fn mv_weights(r_loaded: &Matrix, steering: &[f64]) -> Result<Vec<f64>> {
    if steering.len() != r_loaded.n() {
        return Err(Error::Config("steering vector length does not match covariance".into()));
    }
    let rinv_a = linalg::cholesky_solve(r_loaded, steering)?;
    let denom = linalg::dot(steering, &rinv_a);
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Numerical(format!("degenerate MV normalisation a^T R^-1 a = {denom:e}")));
    }
    Ok(rinv_a.into_iter().map(|v| v / denom).collect())
}

/// `E_s E_s^T w_opt` with `E_s` the eigenvectors of `r_loaded` whose
/// eigenvalues exceed `sigma` times the largest.
pub fn eibmv_weights(r_loaded: &Matrix, w_opt: &[f64], sigma: f64) -> Result<Vec<f64>> {
    let basis = cov::signal_subspace_of(r_loaded, sigma)?;
    Ok(cov::project(&basis, w_opt))
}

/// Spreads length-L subarray weights over an M-element aperture so that
/// `full . x == (1/(M-L+1)) sum_l w . x[l..l+L]` for every `x`.
pub fn full_aperture_weights(w: &[f64], m: usize) -> Vec<f64> {
    let l = w.len();
    let p = m - l + 1;
    let mut full = vec![0.0; m];
    for start in 0..p {
        full[start..start + l].iter_mut().zip(w).for_each(|(f, wi)| *f += wi);
    }
    let inv = 1.0 / p as f64;
    full.iter_mut().for_each(|f| *f *= inv);
    full
}

/// Covariance, loading, MV solve and (optionally) eigenspace projection for
/// one window, with the all-ones steering vector.
pub fn adaptive_weights(win: &PixelWindow, cfg: &CovConfig, eigenspace: bool) -> Result<AdaptiveWeights> {
    let l = cfg.subarray_len;
    let r = cov::estimate_covariance(win.as_slice(), win.m(), l)?;
    let loaded = cov::diagonal_load(&r, cfg.loading);
    let distortionless = mv_weights(&loaded, &vec![1.0; l])?;
    let subarray = if eigenspace {
        eibmv_weights(&loaded, &distortionless, cfg.sigma)?
    } else {
        distortionless.clone()
    };
    let full = full_aperture_weights(&subarray, win.m());
    Ok(AdaptiveWeights { distortionless, subarray, full })
}

fn uniform(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

fn weighted_output(win: &PixelWindow, cfg: &BeamformerConfig, eigenspace: bool) -> Result<f64> {
    if win.is_zero() {
        return Ok(0.0);
    }
    let full = if cfg.uniform_weight_debug {
        uniform(win.m())
    } else {
        adaptive_weights(win, &cfg.cov, eigenspace)?.full
    };
    Ok(linalg::dot(&full, win.center()))
}

/// Minimum-variance output, averaged over subarrays.
pub fn mv_pixel(win: &PixelWindow, cfg: &BeamformerConfig) -> Result<f64> {
    weighted_output(win, cfg, false)
}

/// Eigenspace-based minimum-variance output.
pub fn eibmv_pixel(win: &PixelWindow, cfg: &BeamformerConfig) -> Result<f64> {
    weighted_output(win, cfg, true)
}

/// Two-stage EIBMV inside the expanded DMAS algebra.
///
/// Stage one derives full-aperture EIBMV weights `w` from the (optionally
/// signed-sqrt compressed) window. Each row then yields the term vector
/// `t_i = x_i (sum_j w_j x_j) - w_i x_i^2`, and a second EIBMV pass with
/// all-ones steering combines the focal row of terms.
pub fn eibmv_dmas_pixel(win: &PixelWindow, cfg: &BeamformerConfig) -> Result<f64> {
    let x = if cfg.signed_sqrt_inputs { win.signed_sqrt() } else { win.clone() };
    if x.is_zero() {
        return Ok(0.0);
    }
    let m = x.m();
    let inner = if cfg.uniform_weight_debug { uniform(m) } else { adaptive_weights(&x, &cfg.cov, true)?.full };

    let mut terms = Vec::with_capacity(x.as_slice().len());
    for r in 0..x.rows() {
        let row = x.row(r);
        let s = linalg::dot(&inner, row);
        terms.extend(row.iter().zip(&inner).map(|(&xi, &wi)| xi * s - wi * xi * xi));
    }
    let terms = PixelWindow::new(x.rows(), m, terms)?;
    if terms.is_zero() {
        return Ok(0.0);
    }
    let outer = if cfg.uniform_weight_debug { uniform(m) } else { adaptive_weights(&terms, &cfg.cov, true)?.full };
    Ok(linalg::dot(&outer, terms.center()))
}
