//! Array geometry, RF frames, imaging grids and delayed-sample extraction.
//!
//! Delays are one-way times of flight (pixel to element) expressed in
//! samples. Every beamformer sees one pixel through the samples picked at
//! those delays, so the time index of a pixel is folded into its delays.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    element_x: Vec<f64>,
    element_z: Vec<f64>,
    pitch: f64,
    fs: f64,
    c: f64,
}

impl ArrayGeometry {
    pub fn new(element_x: Vec<f64>, element_z: Vec<f64>, pitch: f64, fs: f64, c: f64) -> Result<Self> {
        if element_x.len() < 2 {
            return Err(Error::Geometry(format!("need at least 2 elements, got {}", element_x.len())));
        }
        if element_x.len() != element_z.len() {
            return Err(Error::Geometry("element_x and element_z lengths differ".into()));
        }
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::Geometry(format!("sampling rate must be positive, got {fs}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Geometry(format!("speed of sound must be positive, got {c}")));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::Geometry(format!("pitch must be positive, got {pitch}")));
        }
        if element_x.iter().chain(&element_z).any(|v| !v.is_finite()) {
            return Err(Error::Geometry("element positions must be finite".into()));
        }
        if element_x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Geometry("element x positions must be strictly increasing".into()));
        }
        Ok(Self { element_x, element_z, pitch, fs, c })
    }

    /// Uniform linear array of `m` elements at z = 0, centred on x = 0.
    pub fn linear(m: usize, pitch: f64, fs: f64, c: f64) -> Result<Self> {
        let centre = (m as f64 - 1.0) / 2.0;
        let xs = (0..m).map(|i| (i as f64 - centre) * pitch).collect();
        Self::new(xs, vec![0.0; m], pitch, fs, c)
    }

    pub fn m_elements(&self) -> usize {
        self.element_x.len()
    }

    pub fn element_x(&self) -> &[f64] {
        &self.element_x
    }

    pub fn element_z(&self) -> &[f64] {
        &self.element_z
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Distance in metres from `(x, z)` to element `i`.
    pub fn distance(&self, i: usize, x: f64, z: f64) -> f64 {
        (x - self.element_x[i]).hypot(z - self.element_z[i])
    }
}

/// M channels by T samples of real RF data, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RfFrame {
    samples: Vec<f64>,
    n_channels: usize,
    n_samples: usize,
    fs: f64,
    t0: f64,
}

impl RfFrame {
    pub fn new(samples: Vec<f64>, n_channels: usize, n_samples: usize, fs: f64, t0: f64) -> Result<Self> {
        if n_samples == 0 || n_channels == 0 {
            return Err(Error::Frame("frame needs at least one channel and one sample".into()));
        }
        if samples.len() != n_channels * n_samples {
            return Err(Error::Frame(format!(
                "sample buffer has {} values, expected {n_channels}x{n_samples}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Frame("samples must be finite".into()));
        }
        if !(fs > 0.0 && fs.is_finite()) || !t0.is_finite() {
            return Err(Error::Frame("fs must be positive and t0 finite".into()));
        }
        Ok(Self { samples, n_channels, n_samples, fs, t0 })
    }

    pub fn zeros(n_channels: usize, n_samples: usize, fs: f64) -> Result<Self> {
        Self::new(vec![0.0; n_channels * n_samples], n_channels, n_samples, fs, 0.0)
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.samples[i * self.n_samples..(i + 1) * self.n_samples]
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Linearly interpolated value of channel `i` at fractional sample
    /// position `pos`, or `None` outside `[0, T-1]`.
    #[inline]
    pub fn sample_at(&self, i: usize, pos: f64) -> Option<f64> {
        let last = (self.n_samples - 1) as f64;
        if !(pos >= 0.0 && pos <= last) {
            return None;
        }
        let ch = self.channel(i);
        let i0 = pos.floor() as usize;
        if i0 + 1 >= self.n_samples {
            return Some(ch[self.n_samples - 1]);
        }
        let frac = pos - i0 as f64;
        if frac == 0.0 {
            Some(ch[i0])
        } else {
            Some(ch[i0] + frac * (ch[i0 + 1] - ch[i0]))
        }
    }
}

/// Rectangular lateral x axial pixel lattice. Pixel centres include both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagingGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nx: usize,
    pub nz: usize,
}

impl ImagingGrid {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64, nx: usize, nz: usize) -> Result<Self> {
        let grid = Self { x_min, x_max, z_min, z_max, nx, nz };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.nz == 0 {
            return Err(Error::Grid("nx and nz must be at least 1".into()));
        }
        let finite = [self.x_min, self.x_max, self.z_min, self.z_max].iter().all(|v| v.is_finite());
        if !finite || self.x_min >= self.x_max || self.z_min >= self.z_max {
            return Err(Error::Grid("need finite bounds with x_min < x_max and z_min < z_max".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        if self.nx > 1 { (self.x_max - self.x_min) / (self.nx - 1) as f64 } else { 0.0 }
    }

    pub fn dz(&self) -> f64 {
        if self.nz > 1 { (self.z_max - self.z_min) / (self.nz - 1) as f64 } else { 0.0 }
    }

    pub fn x(&self, ix: usize) -> f64 {
        self.x_min + ix as f64 * self.dx()
    }

    pub fn z(&self, iz: usize) -> f64 {
        self.z_min + iz as f64 * self.dz()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Aligned samples for one pixel at one time offset.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayedSamples {
    pub values: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

/// One-way time of flight from `pixel` to each element, in samples.
pub fn compute_delays(pixel: (f64, f64), geom: &ArrayGeometry) -> Vec<f64> {
    let scale = geom.fs() / geom.c();
    (0..geom.m_elements()).map(|i| geom.distance(i, pixel.0, pixel.1) * scale).collect()
}

/// Picks channel `i` at `delays[i] + offset` samples (after removing the
/// frame's start time). Out-of-window positions give 0 and a cleared mask bit.
pub fn extract_delayed(frame: &RfFrame, delays: &[f64], offset: isize) -> DelayedSamples {
    let shift = offset as f64 - frame.t0() * frame.fs();
    let mut values = Vec::with_capacity(delays.len());
    let mut valid_mask = Vec::with_capacity(delays.len());
    for (i, &d) in delays.iter().enumerate() {
        match frame.sample_at(i, d + shift) {
            Some(v) => {
                values.push(v);
                valid_mask.push(true);
            }
            None => {
                values.push(0.0);
                valid_mask.push(false);
            }
        }
    }
    DelayedSamples { values, valid_mask }
}

/// `sign(x) * sqrt(|x|)`, with `sign(0) = 0`.
#[inline]
pub fn signed_sqrt(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().sqrt()
    }
}
