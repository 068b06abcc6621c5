//! Line-oriented `key = value` run configuration.
//!
//! A config either names a preset (`preset = sim` or `preset = exp`, or the
//! caller passes one) and overrides some keys, or lists every key. Adaptive
//! settings can be overridden for one method with a `<method>.` prefix,
//! e.g. `eibmv_dmas.sigma = 0.5`. Lengths are in mm, frequencies in MHz.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::beamform::{BeamformerConfig, Method};
use crate::cov::CovConfig;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ImagingGrid};
use crate::metrics::{MetricsConfig, RoiSpec};
use crate::post::BandpassSpec;
use crate::synth::{Absorber, Phantom, PulseSpec};

const KEYS: &[&str] = &[
    "preset",
    "targets",
    "elements",
    "pitch_mm",
    "fs_mhz",
    "c",
    "f0_mhz",
    "bandwidth",
    "samples",
    "snr_db",
    "seed",
    "x_min_mm",
    "x_max_mm",
    "z_min_mm",
    "z_max_mm",
    "nx",
    "nz",
    "methods",
    "subarray_len",
    "half_window",
    "loading",
    "sigma",
    "signed_sqrt",
    "bandpass_lo_mhz",
    "bandpass_hi_mhz",
    "bandpass_alpha",
    "bandpass_methods",
    "dynamic_range_db",
    "roi_size_mm",
    "noise_offset_mm",
    "profile_dynamic_range_db",
    "profile_depths_mm",
    "out_dir",
];

const METHOD_KEYS: &[&str] = &["subarray_len", "half_window", "loading", "sigma", "signed_sqrt"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Synthetic phantom: `L = M/2`, `K = 5`, `sigma = 0.7`, 60 dB display.
    Sim,
    /// Experimental settings: `L = M/3`, `K = 0`, `sigma = 0.8`, 80 dB display.
    Exp,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sim" => Ok(Preset::Sim),
            "exp" => Ok(Preset::Exp),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected `sim` or `exp`)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Sim => "sim",
            Preset::Exp => "exp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub phantom: Phantom,
    pub elements: usize,
    pub pitch: f64,
    pub fs: f64,
    pub c: f64,
    pub pulse: PulseSpec,
    pub samples: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub grid: ImagingGrid,
    pub methods: Vec<Method>,
    pub beamformers: BTreeMap<Method, BeamformerConfig>,
    pub bandpass: BandpassSpec,
    pub dynamic_range: f64,
    pub metrics: MetricsConfig,
    pub profile_depths_mm: Vec<f64>,
    pub out_dir: PathBuf,
    /// Every resolved key, in a stable order.
    resolved: Vec<(String, String)>,
}

fn preset_defaults(preset: Preset, m: usize) -> BTreeMap<&'static str, String> {
    let (l, k, sigma, dr) = match preset {
        Preset::Sim => (m / 2, 5, 0.7, 60.0),
        Preset::Exp => (m / 3, 0, 0.8, 80.0),
    };
    let l = l.max(1);
    BTreeMap::from([
        ("targets", "0:25, 0:30, 0:35, 0:40, 0:45".to_string()),
        ("elements", "128".to_string()),
        ("pitch_mm", "0.15625".to_string()),
        ("fs_mhz", "50".to_string()),
        ("c", "1540".to_string()),
        ("f0_mhz", "4".to_string()),
        ("bandwidth", "0.77".to_string()),
        ("samples", "2048".to_string()),
        ("snr_db", "50".to_string()),
        ("seed", "1".to_string()),
        ("x_min_mm", "-10".to_string()),
        ("x_max_mm", "10".to_string()),
        ("z_min_mm", "22".to_string()),
        ("z_max_mm", "48".to_string()),
        ("nx", "128".to_string()),
        ("nz", "845".to_string()),
        ("methods", "DAS, DMAS, EIBMV, EIBMV-DMAS".to_string()),
        ("subarray_len", l.to_string()),
        ("half_window", k.to_string()),
        ("loading", (1.0 / (10.0 * l as f64)).to_string()),
        ("sigma", sigma.to_string()),
        ("signed_sqrt", "true".to_string()),
        ("bandpass_alpha", "0.5".to_string()),
        ("bandpass_methods", "DMAS, EIBMV-DMAS".to_string()),
        ("dynamic_range_db", dr.to_string()),
        ("roi_size_mm", "3".to_string()),
        ("noise_offset_mm", "6".to_string()),
        ("profile_dynamic_range_db", "300".to_string()),
        ("out_dir", "out".to_string()),
    ])
}

/// Raw entries of a config file, keyed by name, with their line numbers.
fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| Error::ConfigLine { line, msg: format!("expected `key = value`, got `{body}`") })?;
        let key = k.trim().to_ascii_lowercase();
        let known = KEYS.contains(&key.as_str())
            || key.split_once('.').is_some_and(|(m, rest)| m.parse::<Method>().is_ok() && METHOD_KEYS.contains(&rest));
        if !known {
            return Err(Error::ConfigLine { line, msg: format!("unknown key `{}`", k.trim()) });
        }
        if out.insert(key.clone(), (v.trim().to_string(), line)).is_some() {
            return Err(Error::ConfigLine { line, msg: format!("duplicate key `{key}`") });
        }
    }
    Ok(out)
}

struct Resolver {
    file: BTreeMap<String, (String, usize)>,
    defaults: BTreeMap<&'static str, String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    fn raw(&mut self, key: &str, fallback: Option<String>) -> Result<(String, usize)> {
        let (v, line) = match self.file.get(key) {
            Some((v, l)) => (v.clone(), *l),
            None => match self.defaults.get(key).cloned().or(fallback) {
                Some(v) => (v, 0),
                None => return Err(Error::MissingKey(key.to_string())),
            },
        };
        self.resolved.push((key.to_string(), v.clone()));
        Ok((v, line))
    }

    fn get<T: FromStr>(&mut self, key: &str, fallback: Option<String>) -> Result<T> {
        let (v, line) = self.raw(key, fallback)?;
        v.parse().map_err(|_| bad(line, key, &v))
    }

    fn list<T>(&mut self, key: &str, fallback: Option<String>, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
        let (v, line) = self.raw(key, fallback)?;
        if v.eq_ignore_ascii_case("none") {
            return Ok(Vec::new());
        }
        v.split([',', ' ', '\t']).filter(|t| !t.is_empty()).map(|t| f(t).ok_or_else(|| bad(line, key, t))).collect()
    }
}

fn bad(line: usize, key: &str, v: &str) -> Error {
    let msg = format!("invalid value `{v}` for `{key}`");
    if line > 0 { Error::ConfigLine { line, msg } } else { Error::Config(msg) }
}

fn parse_target(t: &str) -> Option<Absorber> {
    let parts: Vec<f64> = t.split(':').map(|p| p.parse().ok()).collect::<Option<_>>()?;
    match parts[..] {
        [x, z] => Some(Absorber { x: x * 1e-3, z: z * 1e-3, amplitude: 1.0 }),
        [x, z, a] => Some(Absorber { x: x * 1e-3, z: z * 1e-3, amplitude: a }),
        _ => None,
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    /// Parses `text`; `preset` overrides any `preset` key in the text.
    pub fn parse(text: &str, preset: Option<Preset>) -> Result<Self> {
        let file = tokenize(text)?;
        let preset = match (preset, file.get("preset")) {
            (Some(p), _) => Some(p),
            (None, Some((v, line))) => Some(v.parse().map_err(|_| bad(*line, "preset", v))?),
            (None, None) => None,
        };
        let mut r = Resolver { file, defaults: BTreeMap::new(), resolved: Vec::new() };
        if let Some(p) = preset {
            r.resolved.push(("preset".into(), p.to_string()));
            r.defaults = preset_defaults(p, 128);
        }
        let elements: usize = r.get("elements", None)?;
        if let Some(p) = preset {
            r.defaults = preset_defaults(p, elements);
        }

        let phantom = Phantom::new(r.list("targets", None, parse_target)?)?;
        let pitch = r.get::<f64>("pitch_mm", None)? * 1e-3;
        let fs = r.get::<f64>("fs_mhz", None)? * 1e6;
        let c: f64 = r.get("c", None)?;
        let pulse = PulseSpec { f0: r.get::<f64>("f0_mhz", None)? * 1e6, fractional_bandwidth: r.get("bandwidth", None)? };
        pulse.validate()?;
        let samples: usize = r.get("samples", None)?;
        let snr_db: f64 = r.get("snr_db", None)?;
        let seed: u64 = r.get("seed", None)?;
        let grid = ImagingGrid::new(
            r.get::<f64>("x_min_mm", None)? * 1e-3,
            r.get::<f64>("x_max_mm", None)? * 1e-3,
            r.get::<f64>("z_min_mm", None)? * 1e-3,
            r.get::<f64>("z_max_mm", None)? * 1e-3,
            r.get("nx", None)?,
            r.get("nz", None)?,
        )?;
        let methods = r.list("methods", None, |t| t.parse::<Method>().ok())?;
        if methods.is_empty() {
            return Err(Error::Config("`methods` must name at least one beamformer".into()));
        }

        let base_l: usize = r.get("subarray_len", None)?;
        let base_k: usize = r.get("half_window", None)?;
        let base_loading: f64 = r.get("loading", None)?;
        let base_sigma: f64 = r.get("sigma", None)?;
        let base_sqrt = r.list("signed_sqrt", None, parse_bool)?;
        let base_sqrt = match base_sqrt[..] {
            [b] => b,
            _ => return Err(Error::Config("`signed_sqrt` takes one boolean".into())),
        };
        let mut beamformers = BTreeMap::new();
        for &m in &methods {
            let slug = m.slug();
            let key = |k: &str| format!("{slug}.{k}");
            let has = |r: &Resolver, k: &str| r.file.contains_key(&key(k));
            let cov = CovConfig {
                subarray_len: if has(&r, "subarray_len") { r.get(&key("subarray_len"), None)? } else { base_l },
                half_window: if has(&r, "half_window") { r.get(&key("half_window"), None)? } else { base_k },
                loading: if has(&r, "loading") { r.get(&key("loading"), None)? } else { base_loading },
                sigma: if has(&r, "sigma") { r.get(&key("sigma"), None)? } else { base_sigma },
            };
            let mut bf = BeamformerConfig::new(m, cov);
            bf.signed_sqrt_inputs = if has(&r, "signed_sqrt") {
                let (v, line) = r.raw(&key("signed_sqrt"), None)?;
                parse_bool(&v).ok_or_else(|| bad(line, &key("signed_sqrt"), &v))?
            } else {
                base_sqrt
            };
            bf.validate(elements)?;
            beamformers.insert(m, bf);
        }
        for k in r.file.keys() {
            if let Some((slug, _)) = k.split_once('.') {
                let m: Method = slug.parse()?;
                if !methods.contains(&m) {
                    return Err(Error::ConfigLine {
                        line: r.file[k].1,
                        msg: format!("`{k}` refers to a method not listed in `methods`"),
                    });
                }
            }
        }

        let bandpass = BandpassSpec {
            f_lo: r.get::<f64>("bandpass_lo_mhz", Some((1.5 * pulse.f0 / 1e6).to_string()))? * 1e6,
            f_hi: r.get::<f64>("bandpass_hi_mhz", Some((3.75 * pulse.f0 / 1e6).to_string()))? * 1e6,
            alpha: r.get("bandpass_alpha", None)?,
            apply_to: r.list("bandpass_methods", None, |t| t.parse::<Method>().ok())?,
        };
        let dynamic_range: f64 = r.get("dynamic_range_db", None)?;
        let metrics = MetricsConfig {
            roi: RoiSpec {
                size: r.get::<f64>("roi_size_mm", None)? * 1e-3,
                noise_offset: r.get::<f64>("noise_offset_mm", None)? * 1e-3,
            },
            profile_dynamic_range: r.get("profile_dynamic_range_db", None)?,
        };
        // rounded to micrometres so file names stay short
        let depths_default =
            phantom.depths().iter().map(|z| ((z * 1e6).round() / 1e3).to_string()).collect::<Vec<_>>().join(", ");
        let profile_depths_mm = r.list("profile_depths_mm", Some(depths_default), |t| t.parse::<f64>().ok())?;
        let out_dir = PathBuf::from(r.raw("out_dir", None)?.0);

        let cfg = RunConfig {
            phantom,
            elements,
            pitch,
            fs,
            c,
            pulse,
            samples,
            snr_db,
            seed,
            grid,
            methods,
            beamformers,
            bandpass,
            dynamic_range,
            metrics,
            profile_depths_mm,
            out_dir,
            resolved: r.resolved,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn preset(preset: Preset) -> Self {
        Self::parse("", Some(preset)).expect("built-in presets are valid")
    }

    fn validate(&self) -> Result<()> {
        self.geometry()?;
        if self.samples < 2 {
            return Err(Error::Config("`samples` must be at least 2".into()));
        }
        if !(self.dynamic_range > 0.0) || !(self.metrics.profile_dynamic_range > 0.0) {
            return Err(Error::Config("dynamic ranges must be positive".into()));
        }
        if !(self.metrics.roi.size > 0.0) {
            return Err(Error::Config("`roi_size_mm` must be positive".into()));
        }
        if self.grid.nz < 8 {
            return Err(Error::Config("`nz` must be at least 8 to form scanlines".into()));
        }
        if self.methods.iter().any(|&m| self.bandpass.applies_to(m)) {
            let rate = self.c / self.grid.dz();
            self.bandpass.validate(rate).map_err(|e| {
                Error::Config(format!("{e}; the axial pixel pitch sets the scanline rate c/dz = {:.3} MHz", rate / 1e6))
            })?;
        }
        Ok(())
    }

    /// Redirects all outputs, keeping the echoed parameters in sync.
    pub fn set_out_dir(&mut self, dir: impl Into<PathBuf>) {
        self.out_dir = dir.into();
        let v = self.out_dir.display().to_string();
        match self.resolved.iter_mut().find(|(k, _)| k == "out_dir") {
            Some(entry) => entry.1 = v,
            None => self.resolved.push(("out_dir".into(), v)),
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::linear(self.elements, self.pitch, self.fs, self.c)
    }

    pub fn beamformer(&self, m: Method) -> BeamformerConfig {
        self.beamformers.get(&m).copied().unwrap_or_else(|| BeamformerConfig::new(m, CovConfig::simulation(self.elements)))
    }

    /// Target positions `(x, z)` in metres.
    pub fn targets(&self) -> Vec<(f64, f64)> {
        self.phantom.absorbers.iter().map(|a| (a.x, a.z)).collect()
    }

    /// Every parameter as `key = value` lines; parses back to `self`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.resolved {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_preset_values() {
        let c = RunConfig::preset(Preset::Sim);
        assert_eq!(c.elements, 128);
        assert_eq!(c.fs, 50e6);
        let bf = c.beamformer(Method::EibmvDmas);
        assert_eq!(bf.cov.subarray_len, 64);
        assert_eq!(bf.cov.half_window, 5);
        assert_eq!(bf.cov.sigma, 0.7);
        assert!((bf.cov.loading - 1.0 / 640.0).abs() < 1e-15);
        assert_eq!(c.dynamic_range, 60.0);
        assert_eq!(c.phantom.absorbers.len(), 5);
        assert_eq!(c.methods, vec![Method::Das, Method::Dmas, Method::Eibmv, Method::EibmvDmas]);
        assert_eq!(c.profile_depths_mm, vec![25.0, 30.0, 35.0, 40.0, 45.0]);
        assert!((c.bandpass.f_lo - 6e6).abs() < 1e-6 && (c.bandpass.f_hi - 15e6).abs() < 1e-6);
    }

    #[test]
    fn exp_preset_values() {
        let c = RunConfig::preset(Preset::Exp);
        let bf = c.beamformer(Method::Eibmv);
        assert_eq!(bf.cov.subarray_len, 42);
        assert_eq!(bf.cov.half_window, 0);
        assert_eq!(bf.cov.sigma, 0.8);
        assert_eq!(c.dynamic_range, 80.0);
    }

    #[test]
    fn overrides_and_derived_defaults() {
        let c = RunConfig::parse("preset = sim\nelements = 64\neibmv.sigma = 0.5\n# comment\n\nnx = 11", None).unwrap();
        assert_eq!(c.beamformer(Method::EibmvDmas).cov.subarray_len, 32);
        assert_eq!(c.beamformer(Method::Eibmv).cov.sigma, 0.5);
        assert_eq!(c.beamformer(Method::EibmvDmas).cov.sigma, 0.7);
        assert_eq!(c.grid.nx, 11);
    }

    #[test]
    fn echo_round_trips() {
        let c = RunConfig::parse("preset = exp\nf0_mhz = 3\nsnr_db = inf\nmethods = DAS, MV\nmv.half_window = 2", None).unwrap();
        let again = RunConfig::parse(&c.echo(), None).unwrap();
        assert_eq!(again, c);
        assert!((c.bandpass.f_lo - 4.5e6).abs() < 1e-6);
    }

    #[test]
    fn errors_name_lines_and_keys() {
        let e = RunConfig::parse("preset = sim\n\nbogus = 3", None).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 3, .. }), "{e}");
        let e = RunConfig::parse("preset = sim\nnx = twelve", None).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 2, .. }), "{e}");
        let e = RunConfig::parse("preset = sim\nnx = 3\nnx = 4", None).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 3, .. }), "{e}");
        let e = RunConfig::parse("elements = 8", None).unwrap_err();
        assert!(matches!(e, Error::MissingKey(ref k) if k == "targets"), "{e}");
        let e = RunConfig::parse("preset = sim\nno equals sign", None).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 2, .. }));
        let e = RunConfig::parse("preset = sim\nmethods = DAS\neibmv.sigma = 0.2", None).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 3, .. }));
    }

    #[test]
    fn coarse_axial_grid_rejected_for_filtered_methods() {
        assert!(RunConfig::parse("preset = sim\nnz = 64", None).is_err());
        assert!(RunConfig::parse("preset = sim\nnz = 64\nmethods = DAS, EIBMV", None).is_ok());
        assert!(RunConfig::parse("preset = sim\nnz = 64\nbandpass_methods = none", None).is_ok());
    }
}
