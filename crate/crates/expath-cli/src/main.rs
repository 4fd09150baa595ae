mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{AttackMethod, AttackOptions};
use config::{FileConfig, MinerFlags, ModelFlags};
use expath_core::scorer::AblationFlags;

/// Explains link predictions of knowledge-graph embedding models by mining
/// prediction-local rules, ranks the supporting training facts, and verifies
/// explanations by deleting them and retraining.
#[derive(Parser)]
#[command(name = "expath", version, about)]
struct Cli {
    /// JSON config file with defaults for the flags below
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master RNG seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (results print to stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset directory with train.txt/valid.txt/test.txt (or set EXPATH_DATA)
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph with planted rules
    Synth {
        #[arg(long, default_value_t = 1000)]
        entities: usize,
        #[arg(long, default_value_t = 6)]
        relations: usize,
        /// Planted rule like "r0 <- r1, r2" (repeatable; default r0 <- r1, r2)
        #[arg(long = "rule")]
        rules: Vec<String>,
        /// Probability that a body pair also gets the head fact
        #[arg(long, default_value_t = 0.9)]
        prob: f64,
        /// Background facts per entity on unused relations
        #[arg(long, default_value_t = 1.0)]
        density: f64,
        #[arg(long, default_value_t = 8)]
        sources: usize,
        #[arg(long, default_value_t = 3)]
        dests: usize,
    },
    /// Train an embedding model and write a checkpoint plus metrics
    Train {
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Evaluate rule strings against the training split
    Rules {
        /// Rule like "r0 <- r1, r2'" or "r0(X, e5) <- r1(X, e7')" (repeatable)
        #[arg(long = "rule", required = true)]
        rules: Vec<String>,
        #[command(flatten)]
        miner: MinerFlags,
    },
    /// Explain predictions from a trained checkpoint
    Explain {
        /// Checkpoint prefix (expects <prefix>.meta.json and <prefix>.emb.bin)
        #[arg(long)]
        checkpoint: PathBuf,
        /// Prediction "head,relation,tail" by label (repeatable)
        #[arg(long = "prediction", required = true)]
        predictions: Vec<String>,
        /// Explanation size (1..=8)
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Fact filter: auto, all, head, or tail
        #[arg(long)]
        policy: Option<String>,
        /// Drop closed-path rules
        #[arg(long)]
        no_cp: bool,
        /// Drop property-transition rules
        #[arg(long)]
        no_pt: bool,
        /// Re-score remaining facts after each pick
        #[arg(long)]
        greedy: bool,
        /// Also write Graphviz .dot files next to the JSON
        #[arg(long)]
        dot: bool,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        miner: MinerFlags,
    },
    /// Train, pick confident targets, delete explanations, retrain, compare
    Attack {
        /// How many targets to attack
        #[arg(long, default_value_t = 20)]
        targets: usize,
        /// expath, sparse, random, or import:<exchange.json>
        #[arg(long, default_value = "expath")]
        method: String,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Independent repetitions (seeds seed, seed+1, ...)
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        no_cp: bool,
        #[arg(long)]
        no_pt: bool,
        #[arg(long)]
        greedy: bool,
        /// Retrain once per target instead of once for the union
        #[arg(long)]
        per_target: bool,
        /// Write the removal sets as exchange JSON (first run only)
        #[arg(long)]
        export: Option<PathBuf>,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        miner: MinerFlags,
    },
    /// Combine two attack reports per target, keeping the stronger removal
    Fuse {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
    },
    /// Print a plain-text table from attack report files
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = FileConfig::load(cli.config.as_ref())?;
    let seed = cli.seed.or(file.seed);
    let jobs = cli.jobs.or(file.jobs);
    let out = cli.out.or_else(|| file.out.clone());

    match cli.command {
        Command::Synth { entities, relations, rules, prob, density, sources, dests } => {
            commands::cmd_synth(entities, relations, &rules, prob, density, sources, dests, seed, out.as_ref())
        }
        Command::Train { model } => {
            let data = config::resolve_data(cli.data.as_ref(), &file)?;
            let model = model.resolve(&file, cli.seed)?;
            commands::cmd_train(&data, &model, out.as_ref())
        }
        Command::Rules { rules, miner } => {
            let data = config::resolve_data(cli.data.as_ref(), &file)?;
            commands::cmd_rules(&data, &rules, &miner.resolve(&file), out.as_ref())
        }
        Command::Explain {
            checkpoint,
            predictions,
            k,
            policy,
            no_cp,
            no_pt,
            greedy,
            dot,
            model: _,
            miner,
        } => {
            let data = config::resolve_data(cli.data.as_ref(), &file)?;
            let k = file.k.map_or(k, |fk| if k == 4 { fk } else { k });
            commands::cmd_explain(
                &data,
                &checkpoint,
                &predictions,
                k,
                config::resolve_policy(policy.as_deref(), &file)?,
                AblationFlags { use_cp: !no_cp, use_pt: !no_pt },
                greedy,
                &miner.resolve(&file),
                dot,
                jobs,
                out.as_ref(),
            )
        }
        Command::Attack {
            targets,
            method,
            k,
            runs,
            policy,
            no_cp,
            no_pt,
            greedy,
            per_target,
            export,
            model,
            miner,
        } => {
            let data = config::resolve_data(cli.data.as_ref(), &file)?;
            let model = model.resolve(&file, cli.seed)?;
            let opts = AttackOptions {
                targets: file.targets.map_or(targets, |ft| if targets == 20 { ft } else { targets }),
                method: AttackMethod::parse(&method)?,
                k: file.k.map_or(k, |fk| if k == 4 { fk } else { k }),
                runs,
                policy: config::resolve_policy(policy.as_deref(), &file)?,
                flags: AblationFlags { use_cp: !no_cp, use_pt: !no_pt },
                greedy,
                per_target,
                export,
                jobs,
            };
            commands::cmd_attack(&data, &model, &miner.resolve(&file), &opts, out.as_ref())
        }
        Command::Fuse { x, y } => {
            let data = config::resolve_data(cli.data.as_ref(), &file)?;
            commands::cmd_fuse(&data, &x, &y, out.as_ref())
        }
        Command::Report { reports } => commands::cmd_report(&reports),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
