use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poselift::error::{Error, ErrorClass};
use poselift::pipeline::{
    run_build_dictionary, run_compare, run_noise_sweep, run_reconstruct, sweep_csv,
    BuildDictConfig, Overrides, PipelineConfig,
};
use poselift::temporal::FilterKind;

/// Lift 2D pose sequences to 3D, smooth them, and evaluate the result.
#[derive(Parser)]
#[command(name = "poselift", version)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lift a 2D sequence and write the unsmoothed and smoothed 3D results.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// 2D sequence (CSV or JSON).
        #[arg(long)]
        input: PathBuf,
    },
    /// Score every variant against ground truth as a percentage table.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Ground-truth 3D sequence (CSV or JSON).
        #[arg(long)]
        gt: PathBuf,
    },
    /// Mean error versus SNR over repeated noisy trials.
    NoiseSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Build a dictionary from a grouped 3D corpus.
    BuildDict {
        /// JSON with corpus_dir, manifest, bases_per_group, topology, out.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// JSON object mapping group names to corpus files.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        bases: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Window for every filter.
    #[arg(long)]
    window: Option<usize>,
    /// Filters to run, e.g. `mma` or `sma,ema`; replaces the configured list.
    #[arg(long, value_delimiter = ',')]
    filter: Option<Vec<String>>,
    /// Input noise in dB (one value), or the sweep points for noise-sweep.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let filters = self
            .filter
            .as_ref()
            .map(|names| names.iter().map(|n| n.parse::<FilterKind>()).collect())
            .transpose()?;
        cfg.apply(&Overrides {
            filters,
            window: self.window,
            snr: self.snr.clone(),
            seed: self.seed,
            out: self.out.clone(),
        })?;
        Ok(cfg)
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Reconstruct { common, input } => {
            let cfg = common.resolve()?;
            let out = run_reconstruct(&cfg, &input)?;
            let frames = &out.manifest.frames;
            let mean = frames.iter().map(|f| f.residual).sum::<f64>() / frames.len() as f64;
            let invalid = frames.iter().filter(|f| !f.valid).count();
            println!(
                "lifted {} frames (mean residual {mean:.3e}, {invalid} failing the limits gate)",
                frames.len()
            );
            for path in &out.manifest.outputs {
                println!("wrote {}", path.display());
            }
        }
        Command::Compare { common, gt } => {
            let cfg = common.resolve()?;
            let out = run_compare(&cfg, &gt)?;
            print!("{}", out.report.table.to_csv());
            println!("wrote {}", cfg.out.join("report.csv").display());
        }
        Command::NoiseSweep { common, gt } => {
            let cfg = common.resolve()?;
            let rows = run_noise_sweep(&cfg, &gt)?;
            print!("{}", sweep_csv(&rows));
            println!("wrote {}", cfg.out.join("report.csv").display());
        }
        Command::BuildDict {
            config,
            corpus,
            manifest,
            bases,
            out,
        } => {
            let mut cfg = match config {
                Some(path) => BuildDictConfig::load(&path)?,
                None => BuildDictConfig::default(),
            };
            if let Some(c) = corpus {
                cfg.corpus_dir = c;
            }
            if let Some(m) = manifest {
                cfg.manifest = m;
            }
            if let Some(b) = bases {
                cfg.bases_per_group = b;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            let result = run_build_dictionary(&cfg)?;
            for (path, reason) in &result.skipped {
                eprintln!("skipped {}: {reason}", path.display());
            }
            for w in &result.build.warnings {
                eprintln!("warning: {w}");
            }
            println!("M = {}", result.build.dictionary.len());
            for (group, columns) in &result.build.columns_per_group {
                println!("{group}: {columns}");
            }
            println!("wrote {}", cfg.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Debug
        } else {
            log::LevelFilter::Warn
        })
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
