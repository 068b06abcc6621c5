//! End-to-end stages behind the command-line tool.
//!
//! Output directory layout:
//!
//! ```text
//! config.txt                  resolved parameters
//! rf.parf                     synthetic RF frame
//! grid.txt                    imaging grid of the images below
//! <method>.pgm                log-compressed image
//! <method>_db.txt             log-compressed image, raw dB values
//! <method>_envelope.txt       envelope before log compression
//! <method>_profile_<z>mm.csv  lateral profile at depth z
//! metrics.csv                 one row per method and target
//! table.csv                   one row per depth, SNR and FWHM per method
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::beamform::{beamform_image, BeamformedImage, Method};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ImagingGrid, RfFrame};
use crate::io;
use crate::metrics::{evaluate_targets, lateral_profile, MetricRow};
use crate::post::{envelope_image, log_compress, DbImage, Image};
use crate::synth::{add_noise, simulate_rf};

pub const RF_FILE: &str = "rf.parf";
pub const CONFIG_FILE: &str = "config.txt";
pub const GRID_FILE: &str = "grid.txt";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TABLE_FILE: &str = "table.csv";

/// Beamformed, enveloped and log-compressed image of one method.
#[derive(Debug, Clone)]
pub struct MethodImages {
    pub raw: BeamformedImage,
    pub envelope: Image,
    pub db: DbImage,
}

/// Noisy RF frame for `cfg`.
pub fn synthesize(cfg: &RunConfig) -> Result<(RfFrame, ArrayGeometry)> {
    let geom = cfg.geometry()?;
    let clean = simulate_rf(&cfg.phantom, &geom, &cfg.pulse, cfg.samples)?;
    Ok((add_noise(&clean, cfg.snr_db, cfg.seed)?, geom))
}

pub fn reconstruct(
    frame: &RfFrame,
    geom: &ArrayGeometry,
    cfg: &RunConfig,
    method: Method,
    threads: usize,
) -> Result<MethodImages> {
    let raw = beamform_image(frame, &cfg.grid, geom, &cfg.beamformer(method), threads)?;
    let envelope = envelope_image(&raw, &cfg.grid, cfg.c, Some(&cfg.bandpass))?;
    let db = log_compress(&envelope.values, envelope.nx, envelope.nz, cfg.dynamic_range)?;
    Ok(MethodImages { raw, envelope, db })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_config(cfg: &RunConfig, out: &Path) -> Result<()> {
    write_text(&out.join(CONFIG_FILE), &cfg.echo())
}

fn grid_text(g: &ImagingGrid) -> String {
    format!("{} {} {} {} {} {}\n", g.x_min, g.x_max, g.z_min, g.z_max, g.nx, g.nz)
}

fn envelope_path(dir: &Path, m: Method) -> PathBuf {
    dir.join(format!("{}_envelope.txt", m.slug()))
}

fn write_envelope(img: &Image, path: &Path) -> Result<()> {
    let mut s = format!("{} {}\n", img.nx, img.nz);
    for ix in 0..img.nx {
        let line: Vec<String> = img.scanline(ix).iter().map(f64::to_string).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

fn read_envelope(path: &Path) -> Result<Image> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |msg: &str| Error::Malformed { path: path.into(), msg: msg.into() };
    let mut tokens = text.split_whitespace();
    let nx: usize = tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| malformed("bad nx"))?;
    let nz: usize = tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| malformed("bad nz"))?;
    let values: Vec<f64> = tokens.map(|t| t.parse().map_err(|_| malformed("bad value"))).collect::<Result<_>>()?;
    if values.len() != nx * nz {
        return Err(malformed("value count does not match dimensions"));
    }
    Ok(Image { nx, nz, values })
}

/// Writes `rf.parf` and `config.txt` into `cfg.out_dir`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    ensure_dir(&cfg.out_dir)?;
    write_config(cfg, &cfg.out_dir)?;
    let (frame, geom) = synthesize(cfg)?;
    let path = cfg.out_dir.join(RF_FILE);
    io::write_rf(&frame, &geom, &path)?;
    Ok(path)
}

/// Per-method count of pixels that fell back to zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeamformReport {
    pub failures: Vec<(Method, usize)>,
}

/// Beamforms `rf` with every configured method and writes images and
/// profiles into `cfg.out_dir`.
pub fn cmd_beamform(rf: &Path, cfg: &RunConfig, threads: usize) -> Result<BeamformReport> {
    let (frame, geom) = io::read_rf(rf)?;
    if geom.m_elements() != cfg.elements || (geom.fs() - cfg.fs).abs() > 1e-6 * cfg.fs {
        return Err(Error::Config(format!(
            "{} holds {} channels at {} Hz; config expects {} at {} Hz",
            rf.display(),
            geom.m_elements(),
            geom.fs(),
            cfg.elements,
            cfg.fs
        )));
    }
    let out = &cfg.out_dir;
    ensure_dir(out)?;
    write_config(cfg, out)?;
    write_text(&out.join(GRID_FILE), &grid_text(&cfg.grid))?;
    let mut failures = Vec::new();
    for &m in &cfg.methods {
        let imgs = reconstruct(&frame, &geom, cfg, m, threads)?;
        io::write_pgm(&imgs.db, &out.join(format!("{}.pgm", m.slug())))?;
        io::write_db_matrix(&imgs.db, &out.join(format!("{}_db.txt", m.slug())))?;
        write_envelope(&imgs.envelope, &envelope_path(out, m))?;
        let wide = log_compress(&imgs.envelope.values, imgs.envelope.nx, imgs.envelope.nz, cfg.metrics.profile_dynamic_range)?;
        for &d in &cfg.profile_depths_mm {
            let profile = lateral_profile(&wide, d, &cfg.grid)?;
            io::write_csv_profile(&profile, &out.join(format!("{}_profile_{d}mm.csv", m.slug())))?;
        }
        failures.push((m, imgs.raw.failures));
    }
    Ok(BeamformReport { failures })
}

/// Computes metrics from the envelopes in `image_dir`; writes
/// `metrics.csv` and `table.csv` into `cfg.out_dir`.
pub fn cmd_metrics(image_dir: &Path, cfg: &RunConfig) -> Result<Vec<MetricRow>> {
    let grid_path = image_dir.join(GRID_FILE);
    let stored = fs::read_to_string(&grid_path).map_err(|e| Error::io(&grid_path, e))?;
    if stored != grid_text(&cfg.grid) {
        return Err(Error::Config(format!(
            "{} describes grid `{}`, config describes `{}`",
            grid_path.display(),
            stored.trim(),
            grid_text(&cfg.grid).trim()
        )));
    }
    let missing: Vec<&str> =
        cfg.methods.iter().filter(|&&m| !envelope_path(image_dir, m).is_file()).map(|m| m.name()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingMethods(missing.join(", ")));
    }
    let targets = cfg.targets();
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        let env = read_envelope(&envelope_path(image_dir, m))?;
        if env.nx != cfg.grid.nx || env.nz != cfg.grid.nz {
            return Err(Error::Config(format!("{} image size differs from the configured grid", m.name())));
        }
        rows.extend(evaluate_targets(m, &env, &cfg.grid, &targets, &cfg.metrics)?);
    }
    ensure_dir(&cfg.out_dir)?;
    io::write_csv_metrics(&rows, &cfg.out_dir.join(METRICS_FILE))?;
    io::write_csv_table(&rows, &cfg.methods, &cfg.out_dir.join(TABLE_FILE))?;
    Ok(rows)
}

/// Synthesis, beamforming and metrics, all in `cfg.out_dir`.
pub fn cmd_pipeline(cfg: &RunConfig, threads: usize) -> Result<(BeamformReport, Vec<MetricRow>)> {
    let rf = cmd_synth(cfg)?;
    let report = cmd_beamform(&rf, cfg, threads)?;
    let rows = cmd_metrics(&cfg.out_dir, cfg)?;
    Ok((report, rows))
}
