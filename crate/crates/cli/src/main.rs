mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use seqlayout::PositionMode;

use config::PipelineConfig;

#[derive(Parser)]
#[command(name = "seqlayout", version)]
#[command(about = "Scene-graph to layout sequence tools: ingest, encode, augment, decode, evaluate")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file, JSON or `key = value` lines
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random choice (augmentation)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; 0 uses all cores
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// IoU threshold for evaluation; repeat for several reports
    #[arg(long = "t-iou", global = true)]
    t_iou: Vec<f64>,

    #[arg(long, global = true)]
    grid_max: Option<u32>,

    #[arg(long, global = true)]
    mode: Option<PositionMode>,

    /// Prepend the image aspect-ratio token to every BACS line
    #[arg(long, global = true)]
    imgar: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a corpus and split it by manifests
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        /// NAME=MANIFEST, one sample id per manifest line
        #[arg(long = "split", required = true)]
        splits: Vec<String>,
        /// Directory for NAME.json outputs
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write PREFIX.sf, PREFIX.nodes, PREFIX.bacs and PREFIX.ids
    Encode {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Like encode, with subset/reorder variants per sample
    Augment {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restore layouts from a predicted .bacs file (one JSON per line)
    Decode {
        #[arg(long)]
        bacs: PathBuf,
        #[arg(long)]
        nodes: PathBuf,
        /// Optional .sf file checked for line alignment
        #[arg(long)]
        sf: Option<PathBuf>,
        /// Output file; standard output if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against a reference corpus
    Evaluate {
        /// Predicted .bacs file, or layout JSON lines from `decode`
        #[arg(long)]
        pred: PathBuf,
        /// Reference corpus; repeat for multiple references per sample
        #[arg(long = "reference", required = true)]
        references: Vec<PathBuf>,
        /// Sample ids of the prediction lines, checked against the reference
        #[arg(long)]
        ids: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistical SF to BACS translator
    #[command(subcommand)]
    Baseline(BaselineCommand),
}

#[derive(Subcommand)]
enum BaselineCommand {
    Train {
        #[arg(long)]
        sf: PathBuf,
        #[arg(long)]
        bacs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    Predict {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        sf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve_config(common: &CommonArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !common.t_iou.is_empty() {
        cfg.t_iou = common.t_iou.clone();
    }
    if let Some(g) = common.grid_max {
        cfg.grid_max = g;
    }
    if let Some(m) = common.mode {
        cfg.mode = m;
    }
    if common.imgar {
        cfg.include_imgar = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = resolve_config(&cli.common)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs)
        .build_global()?;
    match cli.command {
        Command::Ingest { corpus, splits, out_dir } => commands::ingest(&cfg, &corpus, &splits, &out_dir),
        Command::Encode { corpus, out } => commands::encode(&cfg, &corpus, &out),
        Command::Augment { corpus, out } => commands::augment(&cfg, &corpus, &out),
        Command::Decode { bacs, nodes, sf, out } => {
            commands::decode(&cfg, &bacs, &nodes, sf.as_deref(), out.as_deref())
        }
        Command::Evaluate { pred, references, ids, out } => {
            commands::evaluate(&cfg, &pred, &references, ids.as_deref(), out.as_deref())
        }
        Command::Baseline(BaselineCommand::Train { sf, bacs, out }) => {
            commands::baseline_train(&cfg, &sf, &bacs, &out)
        }
        Command::Baseline(BaselineCommand::Predict { table, sf, out }) => {
            commands::baseline_predict(&cfg, &table, &sf, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
