//! File formats: PARF RF frames, 16-bit PGM images, CSV profiles and
//! metrics.
//!
//! PARF layout (little-endian): `b"PARF"`, `u32` version, `u32` channels,
//! `u32` samples per channel, `f64` fs, `f64` c, `f64` pitch, then
//! channel-major `f32` samples.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::beamform::Method;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, RfFrame};
use crate::metrics::{LateralProfile, MetricRow};
use crate::post::DbImage;

pub const RF_MAGIC: &[u8; 4] = b"PARF";
pub const RF_VERSION: u32 = 1;
const RF_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 3 * 8;

pub const PROFILE_HEADER: &str = "x_mm,value_db";
pub const METRICS_HEADER: &str = "method,depth_mm,fwhm_mm,snr_db,psl_db";

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Samples are stored as `f32`; frames holding `f32`-representable values
/// round-trip bit-exactly.
pub fn write_rf(frame: &RfFrame, geom: &ArrayGeometry, path: &Path) -> Result<()> {
    if frame.n_channels() != geom.m_elements() {
        return Err(Error::Frame("frame channel count differs from the geometry".into()));
    }
    let m = u32::try_from(frame.n_channels()).map_err(|_| Error::Frame("too many channels".into()))?;
    let t = u32::try_from(frame.n_samples()).map_err(|_| Error::Frame("too many samples".into()))?;
    let mut buf = Vec::with_capacity(RF_HEADER_LEN + 4 * frame.samples().len());
    buf.extend_from_slice(RF_MAGIC);
    buf.extend_from_slice(&RF_VERSION.to_le_bytes());
    buf.extend_from_slice(&m.to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in [frame.fs(), geom.c(), geom.pitch()] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &s in frame.samples() {
        buf.extend_from_slice(&(s as f32).to_le_bytes());
    }
    write_bytes(path, &buf)
}

/// Reads a PARF file; the geometry is a centred linear array.
pub fn read_rf(path: &Path) -> Result<(RfFrame, ArrayGeometry)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 4 || &bytes[..4] != RF_MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    if bytes.len() < RF_HEADER_LEN {
        return Err(Error::Malformed { path: path.into(), msg: "header is truncated".into() });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != RF_VERSION {
        return Err(Error::VersionMismatch { path: path.into(), found: version, expected: RF_VERSION });
    }
    let (m, t) = (u32_at(8) as usize, u32_at(12) as usize);
    let (fs_hz, c, pitch) = (f64_at(16), f64_at(24), f64_at(32));
    let expected = 4 * m as u64 * t as u64;
    let actual = (bytes.len() - RF_HEADER_LEN) as u64;
    if actual != expected {
        return Err(Error::PayloadLength { path: path.into(), expected, actual });
    }
    let samples = bytes[RF_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let malformed = |e: Error| Error::Malformed { path: path.into(), msg: e.to_string() };
    let geom = ArrayGeometry::linear(m, pitch, fs_hz, c).map_err(malformed)?;
    let frame = RfFrame::new(samples, m, t, fs_hz, 0.0).map_err(malformed)?;
    Ok((frame, geom))
}

/// `gray = round(65535 (v + DR) / DR)`.
pub fn db_to_gray(v: f64, dynamic_range: f64) -> u16 {
    (65535.0 * (v + dynamic_range) / dynamic_range).round().clamp(0.0, 65535.0) as u16
}

/// 16-bit binary PGM, depth down the rows and lateral position across.
pub fn write_pgm(img: &DbImage, path: &Path) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n65535\n", img.nx, img.nz).into_bytes();
    buf.reserve(2 * img.nx * img.nz);
    for iz in 0..img.nz {
        for ix in 0..img.nx {
            buf.extend_from_slice(&db_to_gray(img.get(ix, iz), img.dynamic_range).to_be_bytes());
        }
    }
    write_bytes(path, &buf)
}

/// Reads a file written by [`write_pgm`] back into gray levels
/// (`nx`, `nz`, row-major by depth).
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let malformed = |msg: &str| Error::Malformed { path: path.into(), msg: msg.into() };
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(malformed("expected a 16-bit binary PGM"));
    }
    let nx: usize = fields[1].parse().map_err(|_| malformed("bad width"))?;
    let nz: usize = fields[2].parse().map_err(|_| malformed("bad height"))?;
    let data = bytes.get(pos..).unwrap_or_default();
    if data.len() != 2 * nx * nz {
        return Err(Error::PayloadLength { path: path.into(), expected: 2 * (nx * nz) as u64, actual: data.len() as u64 });
    }
    Ok((nx, nz, data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect()))
}

/// Raw dB matrix as text: a `nx nz dynamic_range` line, then one line per
/// scanline.
pub fn write_db_matrix(img: &DbImage, path: &Path) -> Result<()> {
    let mut s = format!("{} {} {}\n", img.nx, img.nz, img.dynamic_range);
    for ix in 0..img.nx {
        let line: Vec<String> = (0..img.nz).map(|iz| img.get(ix, iz).to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

pub fn read_db_matrix(path: &Path) -> Result<DbImage> {
    let text = read_text(path)?;
    let malformed = |msg: String| Error::Malformed { path: path.into(), msg };
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap_or_default().split_whitespace().collect();
    if head.len() != 3 {
        return Err(malformed("expected `nx nz dynamic_range` header".into()));
    }
    let nx: usize = head[0].parse().map_err(|_| malformed("bad nx".into()))?;
    let nz: usize = head[1].parse().map_err(|_| malformed("bad nz".into()))?;
    let dynamic_range: f64 = head[2].parse().map_err(|_| malformed("bad dynamic range".into()))?;
    let mut values = Vec::with_capacity(nx * nz);
    for (k, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| malformed(format!("bad value on scanline {k}")))?);
        }
    }
    if values.len() != nx * nz {
        return Err(malformed(format!("expected {} values, found {}", nx * nz, values.len())));
    }
    Ok(DbImage { nx, nz, values, dynamic_range })
}

/// Numbers use the shortest representation that parses back exactly.
pub fn write_csv_profile(profile: &LateralProfile, path: &Path) -> Result<()> {
    let mut s = String::from(PROFILE_HEADER);
    s.push('\n');
    for (x, v) in profile.positions_mm.iter().zip(&profile.values_db) {
        s.push_str(&format!("{x},{v}\n"));
    }
    write_bytes(path, s.as_bytes())
}

pub fn read_csv_profile(path: &Path) -> Result<LateralProfile> {
    let rows = read_csv(path, PROFILE_HEADER)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut vs = Vec::with_capacity(rows.len());
    for (line, r) in rows {
        if r.len() != 2 {
            return Err(Error::Malformed { path: path.into(), msg: format!("line {line}: expected 2 columns") });
        }
        xs.push(parse_num(path, line, &r[0])?);
        vs.push(parse_num(path, line, &r[1])?);
    }
    LateralProfile::new(xs, vs).map_err(|e| Error::Malformed { path: path.into(), msg: e.to_string() })
}

pub fn write_csv_metrics(rows: &[MetricRow], path: &Path) -> Result<()> {
    let mut f = Vec::new();
    writeln!(f, "{METRICS_HEADER}").expect("write to Vec");
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.method.name(), r.depth_mm, r.fwhm_mm, r.snr_db, r.psl_db).expect("write to Vec");
    }
    write_bytes(path, &f)
}

pub fn read_csv_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    read_csv(path, METRICS_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            if r.len() != 5 {
                return Err(Error::Malformed { path: path.into(), msg: format!("line {line}: expected 5 columns") });
            }
            let method: Method = r[0]
                .parse()
                .map_err(|_| Error::Malformed { path: path.into(), msg: format!("line {line}: unknown method") })?;
            Ok(MetricRow {
                method,
                depth_mm: parse_num(path, line, &r[1])?,
                fwhm_mm: parse_num(path, line, &r[2])?,
                snr_db: parse_num(path, line, &r[3])?,
                psl_db: parse_num(path, line, &r[4])?,
            })
        })
        .collect()
}

/// Table with one row per depth: `depth_mm`, then `snr_db` and `fwhm_mm`
/// for each method in `methods`.
pub fn write_csv_table(rows: &[MetricRow], methods: &[Method], path: &Path) -> Result<()> {
    let mut depths: Vec<f64> = rows.iter().map(|r| r.depth_mm).collect();
    depths.sort_by(f64::total_cmp);
    depths.dedup();
    let mut s = String::from("depth_mm");
    for m in methods {
        s.push_str(&format!(",{0}_snr_db,{0}_fwhm_mm", m.slug()));
    }
    s.push('\n');
    for d in depths {
        s.push_str(&d.to_string());
        for &m in methods {
            match rows.iter().find(|r| r.method == m && r.depth_mm == d) {
                Some(r) => s.push_str(&format!(",{},{}", r.snr_db, r.fwhm_mm)),
                None => s.push_str(",,"),
            }
        }
        s.push('\n');
    }
    write_bytes(path, s.as_bytes())
}

fn read_csv(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(Error::Malformed { path: path.into(), msg: format!("expected header `{header}`") }),
    }
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(|c| c.trim().to_string()).collect()))
        .collect())
}

fn parse_num(path: &Path, line: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Malformed { path: path.into(), msg: format!("line {line}: `{s}` is not a number") })
}
