use std::fs;
use std::path::Path;

use pa_beamform::beamform::Method;
use pa_beamform::config::RunConfig;
use pa_beamform::io::{read_csv_metrics, read_db_matrix, read_pgm, read_rf, write_rf};
use pa_beamform::pipeline::{cmd_beamform, cmd_metrics, cmd_pipeline, cmd_synth, reconstruct, synthesize};
use pa_beamform::{Error, ErrorKind};

const SMALL: &str = "\
preset = sim
elements = 32
pitch_mm = 0.625
targets = 0:30, 2:36
samples = 1536
x_min_mm = -10
x_max_mm = 10
nx = 41
z_min_mm = 28
z_max_mm = 38
nz = 325
methods = das, dmas, eibmv
";

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::parse(SMALL, None).unwrap();
    cfg.set_out_dir(out);
    cfg
}

#[test]
fn synthesis_is_reproducible() {
    let cfg = small(Path::new("unused"));
    let (a, _) = synthesize(&cfg).unwrap();
    let (b, _) = synthesize(&cfg).unwrap();
    assert_eq!(a.samples(), b.samples());

    let mut other = cfg.clone();
    other.seed += 1;
    let (c, _) = synthesize(&other).unwrap();
    assert_ne!(a.samples(), c.samples());
}

#[test]
fn das_peak_sits_on_the_target() {
    let cfg = small(Path::new("unused"));
    let (frame, geom) = synthesize(&cfg).unwrap();
    let imgs = reconstruct(&frame, &geom, &cfg, Method::Das, 1).unwrap();
    let g = &cfg.grid;
    // strongest pixel in the upper half belongs to the 30 mm target
    let mut best = (0.0, 0, 0);
    for ix in 0..g.nx {
        for iz in 0..g.nz {
            let v = imgs.envelope.get(ix, iz);
            if g.z(iz) < 33e-3 && v > best.0 {
                best = (v, ix, iz);
            }
        }
    }
    assert!(g.x(best.1).abs() <= g.dx(), "x = {}", g.x(best.1));
    assert!((g.z(best.2) - 30e-3).abs() < 0.2e-3, "z = {}", g.z(best.2));
}

#[test]
fn pipeline_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let (report, rows) = cmd_pipeline(&cfg, 2).unwrap();
    assert_eq!(report.failures.len(), 3);
    assert_eq!(rows.len(), 6);
    for m in &cfg.methods {
        let s = m.slug();
        let (nx, nz, px) = read_pgm(&tmp.path().join(format!("{s}.pgm"))).unwrap();
        assert_eq!((nx, nz, px.len()), (41, 325, 41 * 325));
        let db = read_db_matrix(&tmp.path().join(format!("{s}_db.txt"))).unwrap();
        assert_eq!(db.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 0.0);
        for d in ["30", "36"] {
            assert!(tmp.path().join(format!("{s}_profile_{d}mm.csv")).is_file());
        }
    }
    let back = read_csv_metrics(&tmp.path().join("metrics.csv")).unwrap();
    assert_eq!(back, rows);
    let table = fs::read_to_string(tmp.path().join("table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);

    // the echoed config reproduces the run
    let echoed = RunConfig::parse(&fs::read_to_string(tmp.path().join("config.txt")).unwrap(), None).unwrap();
    assert_eq!(echoed.echo(), cfg.echo());
}

#[test]
fn metrics_reject_a_different_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let rf = cmd_synth(&cfg).unwrap();
    cmd_beamform(&rf, &cfg, 1).unwrap();
    let mut other = cfg.clone();
    other.grid.nx = 17;
    let err = cmd_metrics(tmp.path(), &other).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn metrics_name_missing_methods() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let rf = cmd_synth(&cfg).unwrap();
    cmd_beamform(&rf, &cfg, 1).unwrap();
    fs::remove_file(tmp.path().join("dmas_envelope.txt")).unwrap();
    match cmd_metrics(tmp.path(), &cfg) {
        Err(Error::MissingMethods(s)) => assert_eq!(s, "DMAS"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn beamform_rejects_foreign_rf() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let rf = cmd_synth(&cfg).unwrap();
    let mut other = cfg.clone();
    other.elements = 64;
    assert_eq!(cmd_beamform(&rf, &other, 1).unwrap_err().kind(), ErrorKind::Config);
}

#[test]
fn rf_file_round_trip_and_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let (frame, geom) = synthesize(&cfg).unwrap();
    let path = tmp.path().join("x.parf");
    write_rf(&frame, &geom, &path).unwrap();
    let (back, g2) = read_rf(&path).unwrap();
    assert_eq!(back.n_channels(), 32);
    assert_eq!(g2.pitch(), geom.pitch());
    for (a, b) in frame.samples().iter().zip(back.samples()) {
        assert_eq!(*b, *a as f32 as f64);
    }

    let bytes = fs::read(&path).unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    fs::write(&path, &bad).unwrap();
    assert!(matches!(read_rf(&path), Err(Error::BadMagic { .. })));

    let mut bad = bytes.clone();
    bad[4] = 9;
    fs::write(&path, &bad).unwrap();
    assert!(matches!(read_rf(&path), Err(Error::VersionMismatch { found: 9, .. })));

    fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
    assert!(matches!(read_rf(&path), Err(Error::PayloadLength { .. })));
}
