use rayon::prelude::*;

use super::{pixel_value, BeamformerConfig, Method, PixelWindow};
use crate::error::{Error, Result};
use crate::geometry::{compute_delays, ArrayGeometry, ImagingGrid, RfFrame};

/// Raw beamformer output. Scanlines (one per lateral position) are stored
/// contiguously: `values[ix * nz + iz]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformedImage {
    pub method: Method,
    pub nx: usize,
    pub nz: usize,
    pub values: Vec<f64>,
    /// Pixels whose covariance pipeline failed; they hold 0.
    pub failures: usize,
}

impl BeamformedImage {
    pub fn scanline(&self, ix: usize) -> &[f64] {
        &self.values[ix * self.nz..(ix + 1) * self.nz]
    }

    pub fn get(&self, ix: usize, iz: usize) -> f64 {
        self.values[ix * self.nz + iz]
    }
}

/// Beamforms every pixel of `grid`.
///
/// Each scanline is computed sequentially by a single worker, so the output
/// is bit-identical for any `threads` value.
pub fn beamform_image(
    frame: &RfFrame,
    grid: &ImagingGrid,
    geom: &ArrayGeometry,
    cfg: &BeamformerConfig,
    threads: usize,
) -> Result<BeamformedImage> {
    grid.validate()?;
    let m = geom.m_elements();
    cfg.validate(m)?;
    if frame.n_channels() != m {
        return Err(Error::Frame(format!("frame has {} channels, geometry has {m} elements", frame.n_channels())));
    }
    if (frame.fs() - geom.fs()).abs() > 1e-9 * geom.fs() {
        return Err(Error::Frame("frame and geometry sampling rates differ".into()));
    }
    let half_window = cfg.window_rows() / 2;
    let nz = grid.nz;

    let scanline = |ix: usize, out: &mut [f64]| -> usize {
        let x = grid.x(ix);
        let mut failures = 0;
        for (iz, v) in out.iter_mut().enumerate() {
            let delays = compute_delays((x, grid.z(iz)), geom);
            let win = PixelWindow::gather(frame, &delays, half_window);
            *v = match pixel_value(&win, cfg) {
                Ok(val) if val.is_finite() => val,
                _ => {
                    failures += 1;
                    0.0
                }
            };
        }
        failures
    };

    let mut values = vec![0.0; grid.nx * nz];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let failures = pool.install(|| {
        values.par_chunks_mut(nz).enumerate().map(|(ix, col)| scanline(ix, col)).sum::<usize>()
    });
    Ok(BeamformedImage { method: cfg.method, nx: grid.nx, nz, values, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov::CovConfig;

    fn setup() -> (ArrayGeometry, ImagingGrid) {
        let geom = ArrayGeometry::linear(16, 0.3e-3, 50e6, 1540.0).unwrap();
        let grid = ImagingGrid::new(-2e-3, 2e-3, 5e-3, 7e-3, 9, 21).unwrap();
        (geom, grid)
    }

    #[test]
    fn zero_frame_gives_zero_image() {
        let (geom, grid) = setup();
        let frame = RfFrame::zeros(16, 512, 50e6).unwrap();
        for method in Method::ALL {
            let cfg = BeamformerConfig::new(method, CovConfig { subarray_len: 8, half_window: 2, loading: 0.0125, sigma: 0.7 });
            let img = beamform_image(&frame, &grid, &geom, &cfg, 2).unwrap();
            assert!(img.values.iter().all(|&v| v == 0.0));
            assert_eq!(img.failures, 0);
        }
    }

    #[test]
    fn rejects_mismatched_frame() {
        let (geom, grid) = setup();
        let frame = RfFrame::zeros(8, 512, 50e6).unwrap();
        let cfg = BeamformerConfig::new(Method::Das, CovConfig::simulation(16));
        assert!(beamform_image(&frame, &grid, &geom, &cfg, 1).is_err());
    }
}
