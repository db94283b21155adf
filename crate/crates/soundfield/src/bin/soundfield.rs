//! Command line front end: scene simulation, estimator fitting, scoring
//! and CSV export, all backed by the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use soundfield::error::{Error, Result};
use soundfield::harness::{
    self, evaluate_estimates, export_estimate_heatmaps, run_experiment, save_estimates,
    write_results, ExperimentConfig,
};
use soundfield::sim::SceneSpec;

#[derive(Parser)]
#[command(
    name = "soundfield",
    version,
    about = "Sound field estimation from microphone arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scene or experiment configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for outputs (and inputs of evaluate/export)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Size of the worker thread pool; defaults to the number of cores
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scene and write one observation file per frequency
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit estimators and write the predicted field per frequency
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Restrict the run to the estimator with this name
        #[arg(long)]
        estimator: Option<String>,
    },
    /// Score previously written field estimates against the simulated truth
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Restrict scoring to the estimator with this name
        #[arg(long)]
        estimator: Option<String>,
    },
    /// Run the full experiment: fit, score and write every CSV
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Write heatmap slices for previously written field estimates
    Export {
        #[command(flatten)]
        common: Common,
        /// Restrict the export to the estimator with this name
        #[arg(long)]
        estimator: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Simulate { common }
        | Command::Estimate { common, .. }
        | Command::Evaluate { common, .. }
        | Command::Sweep { common }
        | Command::Export { common, .. } => common,
    };
    if let Some(n) = common.threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if let Err(err) = pool {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config { .. } | Error::Io(_) | Error::Domain(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::Simulate { common } => simulate(common),
        Command::Estimate { common, estimator } => estimate(common, estimator.as_deref()),
        Command::Evaluate { common, estimator } => evaluate(common, estimator.as_deref()),
        Command::Sweep { common } => sweep(common),
        Command::Export { common, estimator } => export(common, estimator.as_deref()),
    }
}

fn simulate(common: &Common) -> Result<()> {
    let mut scene = SceneSpec::load(&common.config)?;
    if let Some(seed) = common.seed {
        scene.seed = seed;
    }
    let sets = scene.simulate()?;
    std::fs::create_dir_all(&common.out)?;
    for (f, obs) in scene.frequencies_hz.iter().zip(&sets) {
        obs.save(&common.out.join(format!("observations_{f}hz.json")))?;
    }
    println!(
        "wrote {} observation files to {}",
        sets.len(),
        common.out.display()
    );
    Ok(())
}

fn load_experiment(common: &Common, estimator: Option<&str>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(name) = estimator {
        cfg.estimators.retain(|e| e.label() == name);
        if cfg.estimators.is_empty() {
            return Err(Error::Config {
                path: common.config.display().to_string(),
                message: format!("no estimator named `{name}` in the configuration"),
            });
        }
    }
    Ok(cfg)
}

fn estimate(common: &Common, estimator: Option<&str>) -> Result<()> {
    let cfg = load_experiment(common, estimator)?;
    let results = run_experiment(&cfg)?;
    let written = save_estimates(&results, &common.out)?;
    let expected = results.fields.len() * cfg.estimators.len();
    if written < expected {
        log::warn!("{} of {expected} estimates failed to fit", expected - written);
    }
    println!("wrote {written} estimate files to {}", common.out.display());
    Ok(())
}

fn evaluate(common: &Common, estimator: Option<&str>) -> Result<()> {
    let cfg = load_experiment(common, estimator)?;
    let rows = evaluate_estimates(&cfg, &common.out)?;
    let path = common.out.join("results.csv");
    std::fs::write(&path, harness::results_table(&rows))?;
    println!("scored {} estimates into {}", rows.len(), path.display());
    Ok(())
}

fn sweep(common: &Common) -> Result<()> {
    let cfg = load_experiment(common, None)?;
    let results = run_experiment(&cfg)?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| common.out.clone());
    write_results(&results, &out)?;
    println!(
        "wrote {} result rows and {} field grids to {}",
        results.rows.len(),
        results.fields.len(),
        out.display()
    );
    Ok(())
}

fn export(common: &Common, estimator: Option<&str>) -> Result<()> {
    let cfg = load_experiment(common, estimator)?;
    let written = export_estimate_heatmaps(&cfg, &common.out, &common.out)?;
    println!("wrote {written} heatmap files to {}", common.out.display());
    Ok(())
}
