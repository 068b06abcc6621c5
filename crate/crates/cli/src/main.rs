//! `pabf`: synthesize, beamform and evaluate photoacoustic point-target
//! images from a `key = value` config.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 I/O failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pa_beamform::config::{Preset, RunConfig};
use pa_beamform::pipeline::{cmd_beamform, cmd_metrics, cmd_pipeline, cmd_synth, BeamformReport};
use pa_beamform::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "pabf", version, about = "Linear-array photoacoustic beamforming pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set (`sim` or `exp`); overrides `preset` in the config.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for beamforming. Does not change any output.
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the phantom and write `rf.parf`.
    Synth(Common),
    /// Beamform an RF file with every configured method.
    Beamform {
        /// PARF file to reconstruct.
        rf: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compute FWHM, SNR and sidelobe metrics from a beamform output directory.
    Metrics {
        /// Directory written by `beamform`.
        images: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run synth, beamform and metrics in sequence.
    Pipeline(Common),
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load(common: &Common) -> Result<RunConfig> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?,
        None => String::new(),
    };
    let preset = common.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    if common.config.is_none() && preset.is_none() {
        return Err(Error::Config("give --config, --preset, or both".into()));
    }
    let mut cfg = RunConfig::parse(&text, preset)?;
    if let Some(out) = &common.out {
        cfg.set_out_dir(out);
    }
    Ok(cfg)
}

fn report(r: &BeamformReport) {
    for (m, n) in &r.failures {
        if *n > 0 {
            eprintln!("{m}: {n} pixel(s) failed and were set to zero");
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(common) => {
            let cfg = load(&common)?;
            let path = cmd_synth(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Beamform { rf, common } => {
            let cfg = load(&common)?;
            report(&cmd_beamform(&rf, &cfg, common.threads)?);
            println!("wrote images to {}", cfg.out_dir.display());
        }
        Command::Metrics { images, common } => {
            let cfg = load(&common)?;
            let rows = cmd_metrics(&images, &cfg)?;
            println!("wrote {} metric rows to {}", rows.len(), cfg.out_dir.display());
        }
        Command::Pipeline(common) => {
            let cfg = load(&common)?;
            let (r, rows) = cmd_pipeline(&cfg, common.threads)?;
            report(&r);
            println!("wrote {} metric rows to {}", rows.len(), cfg.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Numerical => 2,
                ErrorKind::Io => 3,
            })
        }
    }
}
