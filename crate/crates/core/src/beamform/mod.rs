//! Per-pixel beamformers and the image driver.
//!
//! Every beamformer maps one pixel's delayed data to one scalar. DAS and
//! DMAS look only at the focal row of the pixel window; the adaptive
//! methods also use the `2K` neighbouring rows for covariance estimation.

mod adaptive;
mod image;

use std::fmt;
use std::str::FromStr;

pub use adaptive::{
    adaptive_weights, eibmv_dmas_pixel, eibmv_pixel, eibmv_weights, full_aperture_weights, mv_pixel, mv_weights,
    AdaptiveWeights,
};
pub use image::{beamform_image, BeamformedImage};

use crate::cov::CovConfig;
use crate::error::{Error, Result};
use crate::geometry::{signed_sqrt, RfFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Das,
    Dmas,
    Mv,
    Eibmv,
    EibmvDmas,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Das, Method::Dmas, Method::Mv, Method::Eibmv, Method::EibmvDmas];

    pub fn name(self) -> &'static str {
        match self {
            Method::Das => "DAS",
            Method::Dmas => "DMAS",
            Method::Mv => "MV",
            Method::Eibmv => "EIBMV",
            Method::EibmvDmas => "EIBMV-DMAS",
        }
    }

    /// File-name friendly tag.
    pub fn slug(self) -> &'static str {
        match self {
            Method::Das => "das",
            Method::Dmas => "dmas",
            Method::Mv => "mv",
            Method::Eibmv => "eibmv",
            Method::EibmvDmas => "eibmv_dmas",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, Method::Mv | Method::Eibmv | Method::EibmvDmas)
    }

    /// Methods whose output is built from products of channel samples.
    pub fn is_dmas_family(self) -> bool {
        matches!(self, Method::Dmas | Method::EibmvDmas)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.trim().to_ascii_uppercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match norm.as_str() {
            "DAS" => Ok(Method::Das),
            "DMAS" => Ok(Method::Dmas),
            "MV" => Ok(Method::Mv),
            "EIBMV" => Ok(Method::Eibmv),
            "EIBMVDMAS" => Ok(Method::EibmvDmas),
            _ => Err(Error::Config(format!("unknown beamformer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamformerConfig {
    pub method: Method,
    pub cov: CovConfig,
    /// Signed-sqrt compress delayed samples before any product (DMAS family).
    pub signed_sqrt_inputs: bool,
    /// Replace every adaptive weight by `1/M`; used for algebraic checks.
    pub uniform_weight_debug: bool,
}

impl BeamformerConfig {
    pub fn new(method: Method, cov: CovConfig) -> Self {
        Self { method, cov, signed_sqrt_inputs: true, uniform_weight_debug: false }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if m < 2 {
            return Err(Error::Config("beamforming needs at least two elements".into()));
        }
        if self.method.is_adaptive() {
            self.cov.validate(m)?;
        }
        if self.method == Method::EibmvDmas && m < 4 {
            return Err(Error::Config("EIBMV-DMAS needs at least four elements".into()));
        }
        Ok(())
    }

    /// Temporal rows the pixel window must hold for this method.
    pub fn window_rows(&self) -> usize {
        if self.method.is_adaptive() { self.cov.rows() } else { 1 }
    }
}

/// `(2K+1) x M` delayed samples centred on the pixel's focal time,
/// row-major. Out-of-window samples are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelWindow {
    rows: usize,
    m: usize,
    data: Vec<f64>,
}

impl PixelWindow {
    pub fn new(rows: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if rows % 2 == 0 || m == 0 || data.len() != rows * m {
            return Err(Error::Config(format!("pixel window needs an odd row count and {rows}x{m} values")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("pixel window values must be finite".into()));
        }
        Ok(Self { rows, m, data })
    }

    /// Gathers rows at offsets `-K..=K` samples around `delays`.
    pub fn gather(frame: &RfFrame, delays: &[f64], half_window: usize) -> Self {
        let rows = 2 * half_window + 1;
        let m = delays.len();
        let mut data = Vec::with_capacity(rows * m);
        let shift = -frame.t0() * frame.fs();
        for r in 0..rows {
            let offset = r as f64 - half_window as f64 + shift;
            data.extend(delays.iter().enumerate().map(|(i, &d)| frame.sample_at(i, d + offset).unwrap_or(0.0)));
        }
        Self { rows, m, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn half_window(&self) -> usize {
        self.rows / 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.m..(r + 1) * self.m]
    }

    pub fn center(&self) -> &[f64] {
        self.row(self.rows / 2)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn signed_sqrt(&self) -> Self {
        Self { rows: self.rows, m: self.m, data: self.data.iter().map(|&v| signed_sqrt(v)).collect() }
    }

    /// Keeps only the `2k+1` rows around the centre.
    pub fn narrowed(&self, k: usize) -> Self {
        let k = k.min(self.half_window());
        let start = self.half_window() - k;
        let rows = 2 * k + 1;
        Self { rows, m: self.m, data: self.data[start * self.m..(start + rows) * self.m].to_vec() }
    }
}

/// Delay-and-sum.
pub fn das(x: &[f64]) -> f64 {
    x.iter().sum()
}

/// Sum of all pairwise products `x_i x_j`, `i < j`, in O(M).
///
/// Accumulates `x_j * (x_0 + ... + x_{j-1})`, which equals
/// `((sum x)^2 - sum x^2) / 2` without the cancellation between the two
/// squared terms.
pub fn pairwise_product_sum(x: &[f64]) -> f64 {
    let mut prefix = 0.0;
    let mut acc = 0.0;
    for &v in x {
        acc += v * prefix;
        prefix += v;
    }
    acc
}

/// Delay-multiply-and-sum with signed-sqrt compression of every sample.
pub fn dmas(x: &[f64]) -> f64 {
    let compressed: Vec<f64> = x.iter().map(|&v| signed_sqrt(v)).collect();
    pairwise_product_sum(&compressed)
}

/// Modified DMAS: every ordered cross-product, i.e. twice [`dmas`].
pub fn mdmas(x: &[f64]) -> f64 {
    2.0 * dmas(x)
}

/// One pixel, dispatched on `cfg.method`.
pub fn pixel_value(win: &PixelWindow, cfg: &BeamformerConfig) -> Result<f64> {
    match cfg.method {
        Method::Das => Ok(das(win.center())),
        Method::Dmas => {
            if cfg.signed_sqrt_inputs {
                Ok(dmas(win.center()))
            } else {
                Ok(pairwise_product_sum(win.center()))
            }
        }
        Method::Mv => mv_pixel(win, cfg),
        Method::Eibmv => eibmv_pixel(win, cfg),
        Method::EibmvDmas => eibmv_dmas_pixel(win, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_dmas(x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let p = x[i] * x[j];
                s += p.signum() * p.abs().sqrt();
            }
        }
        s
    }

    #[test]
    fn das_examples() {
        assert_eq!(das(&[0.0; 5]), 0.0);
        assert_eq!(das(&[1.0, 2.0, 3.0]), 6.0);
        assert_eq!(das(&[3.0, 1.0, 2.0]), 6.0);
    }

    #[test]
    fn dmas_examples() {
        assert_eq!(dmas(&[4.0, 9.0]), 6.0);
        assert_eq!(dmas(&[0.0, 0.0, 5.0, 0.0]), 0.0);
        assert_eq!(mdmas(&[4.0, 9.0]), 12.0);
    }

    #[test]
    fn mdmas_matches_ordered_pairs() {
        let x = [0.3, -1.2, 2.5, 0.0, -0.7, 4.1];
        let mut oracle = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    let p: f64 = x[i] * x[j];
                    oracle += p.signum() * p.abs().sqrt();
                }
            }
        }
        assert!((mdmas(&x) - oracle).abs() <= 1e-12 * oracle.abs());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(m.slug().parse::<Method>().unwrap(), m);
        }
        assert!("capon".parse::<Method>().is_err());
    }

    #[test]
    fn window_narrowing_keeps_centre() {
        let w = PixelWindow::new(5, 2, (0..10).map(f64::from).collect()).unwrap();
        assert_eq!(w.center(), &[4.0, 5.0]);
        let n = w.narrowed(1);
        assert_eq!(n.rows(), 3);
        assert_eq!(n.center(), &[4.0, 5.0]);
        assert!(PixelWindow::new(2, 2, vec![0.0; 4]).is_err());
    }

    proptest! {
        #[test]
        fn dmas_matches_pairwise(x in proptest::collection::vec(-100f64..100.0, 2..33)) {
            let fast = dmas(&x);
            let slow = brute_dmas(&x);
            let xh: Vec<f64> = x.iter().map(|&v| signed_sqrt(v)).collect();
            let magnitude = pairwise_product_sum(&xh.iter().map(|v| v.abs()).collect::<Vec<_>>());
            prop_assert!((fast - slow).abs() <= 1e-12 * magnitude.max(1e-300));
        }

        #[test]
        fn mdmas_is_twice_dmas(x in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            prop_assert_eq!(mdmas(&x), 2.0 * dmas(&x));
        }

        #[test]
        fn das_scales(x in proptest::collection::vec(-10f64..10.0, 2..16), a in -5f64..5.0) {
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            prop_assert!((das(&scaled) - a * das(&x)).abs() <= 1e-12 * (1.0 + das(&x).abs() * a.abs() + x.len() as f64 * 50.0));
        }

        #[test]
        fn dmas_degree_one_homogeneous(x in proptest::collection::vec(-10f64..10.0, 2..16), a in -5f64..5.0) {
            let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
            let bound: f64 = x.iter().map(|v| v.abs().sqrt()).sum::<f64>().powi(2) * a.abs();
            prop_assert!((dmas(&scaled) - a.abs() * dmas(&x)).abs() <= 1e-12 * bound.max(1e-300));
        }
    }
}
