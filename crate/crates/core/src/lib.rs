//! Linear-array photoacoustic beamforming.
//!
//! Delay-and-sum (DAS), delay-multiply-and-sum (DMAS), minimum variance
//! (MV), eigenspace-based minimum variance (EIBMV) and the combined
//! EIBMV-DMAS beamformer, together with a point-source forward model, the
//! scanline post-processing chain, image metrics and file formats.
//!
//! ```no_run
//! use pa_beamform::config::{Preset, RunConfig};
//! use pa_beamform::pipeline::{reconstruct, synthesize};
//! use pa_beamform::Method;
//!
//! let cfg = RunConfig::preset(Preset::Sim);
//! let (frame, geom) = synthesize(&cfg).unwrap();
//! let img = reconstruct(&frame, &geom, &cfg, Method::EibmvDmas, 4).unwrap();
//! println!("{} x {} pixels", img.db.nx, img.db.nz);
//! ```

pub mod beamform;
pub mod config;
pub mod cov;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod post;
pub mod synth;

pub use beamform::{BeamformerConfig, Method};
pub use error::{Error, ErrorKind, Result};
pub use geometry::{ArrayGeometry, ImagingGrid, RfFrame};
