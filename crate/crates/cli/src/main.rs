use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use imnet::harness::{self, DetectorKind, ExperimentConfig};
use imnet::imreconet::Variant;
use imnet::{Error, Result};

/// Index-modulation MIMO experiments: data generation, training, evaluation
/// and benchmarks.
#[derive(Parser, Debug)]
#[command(name = "imnet", version, about)]
struct Cli {
    /// Worker threads for generation and evaluation (falls back to
    /// IMNET_THREADS, then to the number of cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Experiment configuration (key = value lines)
    #[arg(long)]
    config: PathBuf,

    /// Overrides the seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train/validation/test datasets for every SNR point
    GenData {
        #[command(flatten)]
        common: Common,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one AAPD/SE checkpoint pair per SNR point
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory written by gen-data
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
        /// Checkpoint directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate detectors on the test split; writes <out>.csv and <out>.json
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Comma-separated subset of ml, somp, imreconet
        #[arg(long)]
        detectors: Option<String>,
        /// Output prefix; CSV goes to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter counts, FLOPs per frame and median single-frame latency
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = BenchVariant::Both)]
        variant: BenchVariant,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long)]
        detectors: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// BER against CSI error variance at the sweep SNR
    SweepCsiError {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long)]
        detectors: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Real,
    Complex,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Real => Variant::Real,
            VariantArg::Complex => Variant::Complex,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BenchVariant {
    Real,
    Complex,
    Both,
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(w) = cfg.ml_warning() {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn apply_detectors(cfg: &mut ExperimentConfig, list: &Option<String>) -> Result<()> {
    if let Some(l) = list {
        cfg.detectors = DetectorKind::parse_list(l)?;
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, ext: Option<&str>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            let path = match ext {
                Some(e) => p.with_extension(e),
                None => p.clone(),
            };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(&path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    let n = match threads {
        Some(n) => Some(n),
        None => match std::env::var("IMNET_THREADS") {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Config(format!("IMNET_THREADS=`{v}` is not a count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::State(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::GenData { common, out } => {
            let cfg = load_config(&common)?;
            for p in harness::generate_all(&cfg, &out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Train { common, data, variant, out } => {
            let mut cfg = load_config(&common)?;
            if let Some(v) = variant {
                cfg.train.variant = v.into();
            }
            for (snr, pair) in harness::train_all(&cfg, &data, &out)? {
                eprintln!(
                    "snr {snr} dB: aapd best epoch {} (val bce {:.4}), se best epoch {} (val mse {:.4})",
                    pair.aapd.best_epoch, pair.aapd.best_val_loss, pair.se.best_epoch, pair.se.best_val_loss
                );
            }
        }
        Command::Eval { common, data, checkpoints, detectors, out } => {
            let mut cfg = load_config(&common)?;
            apply_detectors(&mut cfg, &detectors)?;
            let rows = harness::evaluate(&cfg, &cfg.detectors, &data, checkpoints.as_deref())?;
            emit(&out, Some("csv"), &harness::rows_to_csv(&rows))?;
            if out.is_some() {
                emit(&out, Some("json"), &harness::rows_to_json(&rows)?)?;
            }
        }
        Command::Bench { common, variant, checkpoints, detectors, out } => {
            let mut cfg = load_config(&common)?;
            apply_detectors(&mut cfg, &detectors)?;
            let variants = match variant {
                BenchVariant::Real => vec![Variant::Real],
                BenchVariant::Complex => vec![Variant::Complex],
                BenchVariant::Both => vec![Variant::Complex, Variant::Real],
            };
            let rows = harness::bench(&cfg, &variants, checkpoints.as_deref())?;
            emit(&out, None, &harness::bench_to_csv(&rows))?;
        }
        Command::SweepCsiError { common, checkpoints, detectors, out } => {
            let mut cfg = load_config(&common)?;
            apply_detectors(&mut cfg, &detectors)?;
            let rows = harness::sweep(&cfg, &cfg.detectors, checkpoints.as_deref())?;
            emit(&out, None, &harness::sweep_to_csv(&rows))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
