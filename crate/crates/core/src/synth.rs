//! Analytic point-source photoacoustic forward model and noise injection.
//!
//! Each absorber emits a Gaussian-modulated cosine pulse that reaches
//! element `i` after `r_i / c` with `1 / r_i` spherical spreading.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, RfFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Absorber {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Phantom {
    pub absorbers: Vec<Absorber>,
}

impl Phantom {
    pub fn new(absorbers: Vec<Absorber>) -> Result<Self> {
        let p = Self { absorbers };
        p.validate()?;
        Ok(p)
    }

    /// `count` unit absorbers on the array axis, 5 mm apart from 25 mm.
    pub fn on_axis(count: usize) -> Self {
        let absorbers = (0..count).map(|k| Absorber { x: 0.0, z: 25e-3 + 5e-3 * k as f64, amplitude: 1.0 }).collect();
        Self { absorbers }
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.absorbers {
            if !(a.x.is_finite() && a.z.is_finite()) {
                return Err(Error::Phantom("absorber positions must be finite".into()));
            }
            if !(a.amplitude > 0.0 && a.amplitude.is_finite()) {
                return Err(Error::Phantom(format!("absorber amplitude must be positive, got {}", a.amplitude)));
            }
        }
        Ok(())
    }

    pub fn depths(&self) -> Vec<f64> {
        self.absorbers.iter().map(|a| a.z).collect()
    }
}

/// Five on-axis absorbers at 25, 30, 35, 40 and 45 mm.
pub fn default_phantom() -> Phantom {
    Phantom::on_axis(5)
}

/// Gaussian-modulated cosine with a given -6 dB fractional bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub f0: f64,
    pub fractional_bandwidth: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self { f0: 4e6, fractional_bandwidth: 0.77 }
    }
}

impl PulseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.f0.is_finite()) {
            return Err(Error::Config(format!("pulse centre frequency must be positive, got {}", self.f0)));
        }
        if !(self.fractional_bandwidth > 0.0 && self.fractional_bandwidth < 2.0) {
            return Err(Error::Config(format!(
                "fractional bandwidth must be in (0, 2), got {}",
                self.fractional_bandwidth
            )));
        }
        Ok(())
    }

    /// Envelope standard deviation in seconds.
    ///
    /// The amplitude spectrum `exp(-2 pi^2 tau^2 (f - f0)^2)` falls to one
    /// half at `f0 +- B f0 / 2` when `tau = sqrt(2 ln 2) / (pi B f0)`.
    pub fn tau(&self) -> f64 {
        (2.0 * std::f64::consts::LN_2).sqrt() / (std::f64::consts::PI * self.fractional_bandwidth * self.f0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let tau = self.tau();
        (-0.5 * (t / tau).powi(2)).exp() * (2.0 * std::f64::consts::PI * self.f0 * t).cos()
    }

    /// Half-width beyond which the pulse is treated as zero.
    pub fn support(&self) -> f64 {
        8.0 * self.tau()
    }
}

/// Noiseless RF frame of `t_samples` samples per channel, starting at t = 0.
pub fn simulate_rf(phantom: &Phantom, geom: &ArrayGeometry, pulse: &PulseSpec, t_samples: usize) -> Result<RfFrame> {
    phantom.validate()?;
    pulse.validate()?;
    let m = geom.m_elements();
    let fs = geom.fs();
    let mut frame = RfFrame::zeros(m, t_samples, fs)?;
    let support = pulse.support();
    for i in 0..m {
        let ch = frame.channel_mut(i);
        for a in &phantom.absorbers {
            let r = geom.distance(i, a.x, a.z);
            if r == 0.0 {
                return Err(Error::Phantom(format!("absorber at ({}, {}) sits on element {i}", a.x, a.z)));
            }
            let arrival = r / geom.c();
            let gain = a.amplitude / r;
            let first = ((arrival - support) * fs).ceil().max(0.0) as usize;
            let last = (((arrival + support) * fs).floor().max(-1.0) + 1.0) as usize;
            for (n, v) in ch.iter_mut().enumerate().take(last.min(t_samples)).skip(first) {
                *v += gain * pulse.eval(n as f64 / fs - arrival);
            }
        }
    }
    Ok(frame)
}

/// Adds white Gaussian noise with `std = rms(frame) / 10^(snr_db / 20)`.
/// An infinite `snr_db` returns the frame unchanged.
pub fn add_noise(frame: &RfFrame, snr_db: f64, seed: u64) -> Result<RfFrame> {
    if snr_db == f64::INFINITY {
        return Ok(frame.clone());
    }
    if !snr_db.is_finite() {
        return Err(Error::Config(format!("invalid SNR {snr_db} dB")));
    }
    let s = frame.samples();
    let rms = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::ZeroSignal("cannot set an SNR relative to an all-zero frame".into()));
    }
    let std = rms / 10f64.powf(snr_db / 20.0);
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = frame.clone();
    for v in out.samples_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}
