use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sktsim::config::{preset, ExperimentConfig, SystemKind, PRESET_NAMES};
use sktsim::runner::{emit_plot_data, run, MANIFEST_FILE};
use sktsim::{Error, Result};

/// Particle and PDE simulations of multi-species cross-diffusion.
#[derive(Parser)]
#[command(name = "sktsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every pipeline listed in a config or preset.
    Run(RunArgs),
    /// Strong-error and W2 convergence study over kernel radii.
    Study(StudyArgs),
    /// List the presets, or print one as TOML.
    Presets {
        name: Option<String>,
        #[arg(long)]
        desk_scale: bool,
    },
    /// Write one CSV per figure panel from a finished run.
    EmitPlots {
        /// Run directory holding manifest.json.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace particle and run counts by the small CI profile.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated kernel radii.
    #[arg(long, value_delimiter = ',')]
    etas: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated explicit particle counts, one per radius.
    #[arg(long, value_delimiter = ',')]
    particles: Option<Vec<u64>>,
}

fn load(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => return Err(Error::Config("pass --config PATH or --preset NAME".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if args.desk_scale {
        cfg.apply_desk_scale();
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(&cfg.name))
}

fn execute(cfg: ExperimentConfig) -> Result<()> {
    let dir = out_dir(&cfg);
    let manifest = run(&cfg, &dir)?;
    println!(
        "{}",
        json!({
            "manifest": dir.join(MANIFEST_FILE),
            "config_hash": manifest.config_hash,
            "outputs": manifest.outputs.len(),
            "wall_time_seconds": manifest.wall_time_seconds,
        })
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => execute(load(&args)?),
        Command::Study(args) => {
            let mut cfg = load(&args.run)?;
            let mut study = cfg.study_or_default();
            if let Some(etas) = args.etas {
                study.etas = etas;
            }
            if let Some(delta) = args.delta {
                study.delta = delta;
            }
            if args.particles.is_some() {
                study.particles = args.particles;
            }
            cfg.study = Some(study);
            cfg.systems = vec![SystemKind::EtaSweep];
            execute(cfg)
        }
        Command::Presets { name, desk_scale } => {
            match name {
                None => {
                    for n in PRESET_NAMES {
                        println!("{n}");
                    }
                }
                Some(n) => {
                    let mut cfg = preset(&n)?;
                    if desk_scale {
                        cfg.apply_desk_scale();
                    }
                    print!("{}", cfg.to_toml()?);
                }
            }
            Ok(())
        }
        Command::EmitPlots { out } => {
            let files = emit_plot_data(&out.join(MANIFEST_FILE))?;
            println!("{}", json!({ "files": files }));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut body = json!({ "kind": e.kind(), "message": e.to_string() });
            if let Error::Pipeline { pipeline, source, .. } = &e {
                body["pipeline"] = json!(pipeline);
                body["cause"] = json!(source.kind());
            }
            eprintln!("{}", json!({ "error": body }));
            ExitCode::FAILURE
        }
    }
}
