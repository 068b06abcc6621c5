//! Scanline post-processing: Tukey band-pass, envelope, log compression.
//!
//! A scanline is one lateral column of the beamformed image. Its sampling
//! rate is `c / dz` because the axial pixel pitch maps to one-way time of
//! flight.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::beamform::{BeamformedImage, Method};
use crate::error::{Error, Result};
use crate::geometry::ImagingGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct BandpassSpec {
    pub f_lo: f64,
    pub f_hi: f64,
    /// Tukey taper fraction.
    pub alpha: f64,
    pub apply_to: Vec<Method>,
}

impl BandpassSpec {
    /// 6-15 MHz for a 4 MHz pulse, scaled with `f0`; Tukey 0.5; DMAS family.
    pub fn for_pulse(f0: f64) -> Self {
        let s = f0 / 4e6;
        Self { f_lo: 6e6 * s, f_hi: 15e6 * s, alpha: 0.5, apply_to: vec![Method::Dmas, Method::EibmvDmas] }
    }

    pub fn validate(&self, fs: f64) -> Result<()> {
        if !(self.f_lo > 0.0 && self.f_lo < self.f_hi && self.f_hi < fs / 2.0) {
            return Err(Error::Config(format!(
                "band-pass needs 0 < f_lo < f_hi < fs/2 ({} Hz), got {}..{} Hz",
                fs / 2.0,
                self.f_lo,
                self.f_hi
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("Tukey alpha must be in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn applies_to(&self, method: Method) -> bool {
        self.apply_to.contains(&method)
    }

    /// Spectral gain at frequency `f` (Hz, either sign).
    pub fn gain(&self, f: f64) -> f64 {
        let u = (f.abs() - self.f_lo) / (self.f_hi - self.f_lo);
        if !(0.0..=1.0).contains(&u) {
            return 0.0;
        }
        let a = self.alpha;
        if a > 0.0 && u < a / 2.0 {
            0.5 * (1.0 - (2.0 * PI * u / a).cos())
        } else if a > 0.0 && u > 1.0 - a / 2.0 {
            0.5 * (1.0 - (2.0 * PI * (1.0 - u) / a).cos())
        } else {
            1.0
        }
    }
}

/// Real image, scanline-major like [`BeamformedImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub nx: usize,
    pub nz: usize,
    pub values: Vec<f64>,
}

impl Image {
    pub fn get(&self, ix: usize, iz: usize) -> f64 {
        self.values[ix * self.nz + iz]
    }

    pub fn scanline(&self, ix: usize) -> &[f64] {
        &self.values[ix * self.nz..(ix + 1) * self.nz]
    }
}

/// Log-compressed image in dB, maximum at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DbImage {
    pub nx: usize,
    pub nz: usize,
    pub values: Vec<f64>,
    pub dynamic_range: f64,
}

impl DbImage {
    pub fn get(&self, ix: usize, iz: usize) -> f64 {
        self.values[ix * self.nz + iz]
    }

    /// Values at fixed depth row `iz`, one per lateral position.
    pub fn row(&self, iz: usize) -> Vec<f64> {
        (0..self.nx).map(|ix| self.get(ix, iz)).collect()
    }
}

fn check_len(x: &[f64]) -> Result<()> {
    if x.len() < 8 {
        return Err(Error::Config(format!("scanline needs at least 8 samples, got {}", x.len())));
    }
    Ok(())
}

/// Multiplies the spectrum by the Tukey band (mirrored to negative
/// frequencies) after zero-padding to twice the length.
pub fn bandpass(scanline: &[f64], fs: f64, spec: &BandpassSpec) -> Result<Vec<f64>> {
    check_len(scanline)?;
    spec.validate(fs)?;
    let n = scanline.len();
    let nfft = 2 * n;
    let mut buf: Vec<Complex<f64>> =
        scanline.iter().map(|&v| Complex::new(v, 0.0)).chain(std::iter::repeat_n(Complex::new(0.0, 0.0), n)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(nfft).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let bin = if k <= nfft / 2 { k as f64 } else { k as f64 - nfft as f64 };
        *b *= spec.gain(bin * fs / nfft as f64);
    }
    planner.plan_fft_inverse(nfft).process(&mut buf);
    let inv = 1.0 / nfft as f64;
    Ok(buf[..n].iter().map(|c| c.re * inv).collect())
}

/// Magnitude of the analytic signal (N-point spectrum, negative
/// frequencies zeroed, positive ones doubled).
pub fn envelope(scanline: &[f64]) -> Result<Vec<f64>> {
    check_len(scanline)?;
    let n = scanline.len();
    let mut buf: Vec<Complex<f64>> = scanline.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let h = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *b *= h;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let inv = 1.0 / n as f64;
    Ok(buf.iter().map(|c| c.norm() * inv).collect())
}

/// `20 log10(|v| / max)`, clipped at `-dynamic_range`.
pub fn log_compress(values: &[f64], nx: usize, nz: usize, dynamic_range: f64) -> Result<DbImage> {
    if values.len() != nx * nz {
        return Err(Error::Config("image dimensions do not match value count".into()));
    }
    if !(dynamic_range > 0.0) {
        return Err(Error::Config(format!("dynamic range must be positive, got {dynamic_range}")));
    }
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::ZeroSignal("cannot log-compress an image without a positive maximum".into()));
    }
    let db = values
        .iter()
        .map(|v| {
            let r = v.abs() / max;
            if r == 0.0 { -dynamic_range } else { (20.0 * r.log10()).max(-dynamic_range) }
        })
        .collect();
    Ok(DbImage { nx, nz, values: db, dynamic_range })
}

/// Sampling rate of a scanline on `grid`.
pub fn scanline_rate(grid: &ImagingGrid, c: f64) -> Result<f64> {
    let dz = grid.dz();
    if !(dz > 0.0) {
        return Err(Error::Grid("need at least two axial pixels to form scanlines".into()));
    }
    Ok(c / dz)
}

/// Band-pass (when configured for the method) and envelope of every
/// scanline.
pub fn envelope_image(raw: &BeamformedImage, grid: &ImagingGrid, c: f64, band: Option<&BandpassSpec>) -> Result<Image> {
    let fs = scanline_rate(grid, c)?;
    let filter = band.filter(|b| b.applies_to(raw.method));
    let mut values = Vec::with_capacity(raw.values.len());
    for ix in 0..raw.nx {
        let line = raw.scanline(ix);
        let env = match filter {
            Some(b) => envelope(&bandpass(line, fs, b)?)?,
            None => envelope(line)?,
        };
        values.extend(env);
    }
    Ok(Image { nx: raw.nx, nz: raw.nz, values })
}
