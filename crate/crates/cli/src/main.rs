use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hinimp::experiment::{self, keys_help, RunConfig};

#[derive(Parser)]
#[command(name = "hinimp", version, about = "Node importance estimation on heterogeneous graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` config file
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic dataset as TSV files
    #[command(after_help = keys_help())]
    Generate(Common),
    /// Build (or reuse) the knowledge bank cache
    #[command(after_help = keys_help())]
    Preprocess(Common),
    /// Cross-validated training; writes metrics.csv, checkpoints and result.json
    #[command(after_help = keys_help())]
    Train(Common),
    /// Score one split of a trained fold
    #[command(after_help = keys_help())]
    Evaluate(Common),
    /// Score nodes with a trained fold
    #[command(after_help = keys_help())]
    Predict(Common),
    /// Sweep knowledge-disable fractions; writes ablation.csv and ablation.svg
    #[command(after_help = keys_help())]
    Ablate(Common),
}

fn load(c: &Common) -> hinimp::Result<RunConfig> {
    let mut overrides = Vec::new();
    if let Some(s) = c.seed {
        overrides.push(("seed", s.to_string()));
    }
    if let Some(o) = &c.out {
        overrides.push(("output", o.display().to_string()));
    }
    RunConfig::load(&c.config, &overrides)
}

fn fmt_metrics(m: &hinimp::metrics::MetricSet) -> String {
    format!(
        "mae {:.6}  rmse {:.6}  nrmse {:.6}  ndcg {:.6}  spearman {:.6}",
        m.mae, m.rmse, m.nrmse, m.ndcg, m.spearman
    )
}

fn run(cmd: Command) -> hinimp::Result<()> {
    match cmd {
        Command::Generate(c) => {
            for p in experiment::cmd_generate(&load(&c)?)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Preprocess(c) => {
            let s = experiment::cmd_preprocess(&load(&c)?)?;
            println!("cache {}: {}", if s.cache_hit { "hit" } else { "built" }, s.cache_file.display());
            for (p, n) in s.metapaths.iter().zip(&s.members) {
                println!("  {p}: {n} members x {} slots", s.slots_per_member);
            }
        }
        Command::Train(c) => {
            let cfg = load(&c)?;
            let r = experiment::cmd_train(&cfg)?;
            for f in &r.folds {
                println!("fold {} (best epoch {}): {}", f.fold, f.best_epoch, fmt_metrics(&f.test.micro));
            }
            println!("mean: {}", fmt_metrics(&r.aggregate));
            println!("wrote {}", cfg.output.display());
        }
        Command::Evaluate(c) => {
            let cfg = load(&c)?;
            let r = experiment::cmd_evaluate(&cfg)?;
            for (t, m) in &r.per_type {
                println!("{t}: {}", fmt_metrics(m));
            }
            println!("all: {}", fmt_metrics(&r.micro));
        }
        Command::Predict(c) => {
            for (id, s) in experiment::cmd_predict(&load(&c)?)? {
                println!("{id}\t{s}");
            }
        }
        Command::Ablate(c) => {
            let cfg = load(&c)?;
            for row in experiment::cmd_ablate(&cfg)? {
                println!("fraction {}: {}", row.fraction, fmt_metrics(&row.metrics));
            }
            println!("wrote {}", cfg.output.join("ablation.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
