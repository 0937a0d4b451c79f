//! Command-line front end over the `dct` harness.
//!
//! Every subcommand writes deterministic JSON or CSV into `--out`. Failures print
//! `{"error": {"kind": ..., "message": ...}}` to stderr and exit with status 1.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use dct::gradcheck::run_gradcheck;
use dct::harness::{
    ablation_grid, export_embeddings, leave_one_domain_out, margin_sweep, motivate, train_model, write_ablation_csv,
    write_embeddings_csv, write_sweep_csv, TrainConfig,
};
use dct::{DctError, Result};

#[derive(Parser)]
#[command(name = "dct", version, about = "Domain-class triplet training on synthetic multi-domain data")]
struct Cli {
    /// TOML file with TrainConfig fields; omitted fields take defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One training run; writes report.json
    Train,
    /// Leave-one-domain-out over all domains and trial seeds; writes lodo.json
    Lodo,
    /// Component and normalization ablations; writes ablation.csv and ablation.json
    Ablate,
    /// Margin sweep over `margins`; writes sweep.csv and sweep.json
    Sweep,
    /// Domain dominance and untrained-encoder dispersion; writes motivate.json
    Motivate,
    /// Finite-difference checks of every differentiable op; writes gradcheck.json
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
    /// Trains, then writes dataset.csv, embeddings.csv and report.json
    Export,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    let out = &cli.out;
    fs::create_dir_all(out)?;

    match cli.command {
        Command::Train => {
            let run = train_model(&cfg)?;
            write_json(&out.join("report.json"), &run.report)?;
        }
        Command::Lodo => {
            let summary = leave_one_domain_out(&cfg)?;
            write_json(&out.join("lodo.json"), &summary)?;
        }
        Command::Ablate => {
            let rows = ablation_grid(&cfg)?;
            write_ablation_csv(BufWriter::new(File::create(out.join("ablation.csv"))?), &rows)?;
            write_json(&out.join("ablation.json"), &rows)?;
        }
        Command::Sweep => {
            let rows = margin_sweep(&cfg, &cfg.margins)?;
            write_sweep_csv(BufWriter::new(File::create(out.join("sweep.csv"))?), &rows)?;
            write_json(&out.join("sweep.json"), &rows)?;
        }
        Command::Motivate => {
            write_json(&out.join("motivate.json"), &motivate(&cfg)?)?;
        }
        Command::Gradcheck { cases } => {
            let report = run_gradcheck(cfg.seed, cases)?;
            write_json(&out.join("gradcheck.json"), &report)?;
            if !report.all_passed() {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.op.as_str()).collect();
                return Err(DctError::GradientCheckFailed(failed.join(", ")));
            }
        }
        Command::Export => {
            let run = train_model(&cfg)?;
            run.dataset.save(out.join("dataset.csv"))?;
            let emb = export_embeddings(&run.model, &cfg.loss, &run.dataset)?;
            write_embeddings_csv(BufWriter::new(File::create(out.join("embeddings.csv"))?), &emb)?;
            write_json(&out.join("report.json"), &run.report)?;
        }
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
