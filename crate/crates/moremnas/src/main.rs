//! Command line driver: run and resume searches, report on checkpoints,
//! and inspect the operator space.

use std::path::{Path, PathBuf};

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use moremnas::error::{Error, Result};
use moremnas::eval::surrogate::{SurrogateBackend, SurrogateConfig};
use moremnas::eval::{evaluate_batch, EvalCache, EvalOutcome};
use moremnas::pipeline::checkpoint::{load_checkpoint, save_checkpoint};
use moremnas::pipeline::{hv_series, report, SearchConfig, SearchState};
use moremnas::space::{decode_operator, Genome, SpaceConfig, NUM_OPERATORS};

#[derive(Parser)]
#[command(name = "moremnas", version, about = "multi-objective reinforced architecture search")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a search described by a JSON config file.
    Search {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the checkpoint and report files.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Continue a checkpointed search to its configured generation count.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Print a report derived from a checkpoint.
    Report {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        /// Render as SVG instead of CSV.
        #[arg(long)]
        svg: bool,
    },
    /// Evaluate one genome with the surrogate and print the result.
    EvalOne {
        /// Comma-separated operator indices.
        #[arg(long)]
        genome: String,
    },
    /// Inspect the operator space.
    #[command(group(ArgGroup::new("mode").required(true).args(["describe", "list"])))]
    Space {
        /// Describe one operator index.
        #[arg(long)]
        describe: Option<u16>,
        /// List every operator label.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Front,
    History,
    Hv,
}

/// Prints to stdout, exiting quietly when the reader has gone away, so
/// piping into `head` and friends never trips a write panic.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if out.write_all(text.as_bytes()).is_err() || out.flush().is_err() {
        std::process::exit(0);
    }
}

fn env_override_u64(name: &str) -> Result<Option<u64>> {
    match std::env::var(name) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{name} must be an unsigned integer, got {text:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::Config(format!("{name}: {e}"))),
    }
}

fn write_reports(state: &SearchState, dir: &Path) -> Result<()> {
    let write = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    let series = hv_series(&state.archive, &state.cfg.bounds)?;
    write("front.csv", report::front_csv(&state.archive)?)?;
    write("front.json", report::front_json(&state.archive)?)?;
    write("front.svg", report::front_svg(&state.archive)?)?;
    write("history.csv", report::history_csv(&state.history))?;
    write("hv.csv", report::hv_csv(&series))?;
    write("hv.svg", report::hv_svg(&series))?;
    Ok(())
}

fn cmd_search(config: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).map_err(|e| Error::io(config, e))?;
    let mut cfg: SearchConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("invalid config {}: {e}", config.display())))?;
    if let Some(seed) = env_override_u64("MOREMNAS_SEED")? {
        cfg.seed = seed;
    }
    if let Some(workers) = env_override_u64("MOREMNAS_WORKERS")? {
        cfg.workers = workers as usize;
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let checkpoint = out.join("checkpoint.json");
    // Checkpoint after every completed generation, so an abort mid-search
    // leaves a resumable file at the last finished generation.
    let mut state = SearchState::new(cfg)?;
    save_checkpoint(&state, &checkpoint)?;
    while state.generation < state.cfg.generations {
        state.step()?;
        save_checkpoint(&state, &checkpoint)?;
    }
    write_reports(&state, out)?;
    emit(&format!(
        "search complete: generation {}, {} evaluations, {} archived, checkpoint {}\n",
        state.generation,
        state.counters.evaluations,
        state.archive.len(),
        checkpoint.display()
    ));
    Ok(())
}

fn cmd_resume(checkpoint: &Path) -> Result<()> {
    let workers = env_override_u64("MOREMNAS_WORKERS")?.map(|w| w as usize);
    let mut state = load_checkpoint(checkpoint, workers)?;
    if state.generation >= state.cfg.generations {
        emit(&format!(
            "checkpoint already complete at generation {} of {}\n",
            state.generation, state.cfg.generations
        ));
        return Ok(());
    }
    while state.generation < state.cfg.generations {
        state.step()?;
        save_checkpoint(&state, checkpoint)?;
    }
    let dir = checkpoint.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    write_reports(&state, &dir)?;
    emit(&format!(
        "resume complete: generation {} of {}, checkpoint {}\n",
        state.generation,
        state.cfg.generations,
        checkpoint.display()
    ));
    Ok(())
}

fn cmd_report(checkpoint: &Path, what: What, svg: bool) -> Result<()> {
    let state = load_checkpoint(checkpoint, None)?;
    let text = match (what, svg) {
        (What::Front, false) => report::front_csv(&state.archive)?,
        (What::Front, true) => report::front_svg(&state.archive)?,
        (What::History, false) => report::history_csv(&state.history),
        (What::History, true) => {
            return Err(Error::Config("history has no SVG rendering".into()));
        }
        (What::Hv, false) => report::hv_csv(&hv_series(&state.archive, &state.cfg.bounds)?),
        (What::Hv, true) => report::hv_svg(&hv_series(&state.archive, &state.cfg.bounds)?),
    };
    emit(&text);
    Ok(())
}

fn cmd_eval_one(genome_text: &str) -> Result<()> {
    let genome: Genome = genome_text.parse()?;
    let space = SpaceConfig { n: genome.len(), ..SpaceConfig::default() };
    let backend = SurrogateBackend::new(SurrogateConfig::default(), space.clone());
    let mut cache = EvalCache::new();
    let batch = evaluate_batch(&[genome.clone()], &space, 1, &backend, &mut cache)?;
    match &batch.outcomes[0] {
        EvalOutcome::Done(res) => {
            let text = serde_json::to_string_pretty(&serde_json::json!({
                "genome": genome.cells(),
                "arch": genome.arch_string(),
                "params": res.params,
                "multi_adds": res.multi_adds,
                "psnr": res.psnr,
                "mse": res.mse,
            }))?;
            emit(&format!("{text}\n"));
            Ok(())
        }
        EvalOutcome::TimedOut => Err(Error::EvalTimeout { genome: genome.to_string() }),
    }
}

fn cmd_space(describe: Option<u16>, list: bool) -> Result<()> {
    if let Some(index) = describe {
        let op = decode_operator(index)?;
        let text = serde_json::to_string_pretty(&serde_json::json!({
            "index": index,
            "label": op.label(),
            "conv_type": op.conv_type.label(),
            "kernel": op.kernel,
            "filters": op.filters,
            "skip": op.skip,
            "repeats": op.repeats,
        }))?;
        emit(&format!("{text}\n"));
    } else if list {
        let mut text = String::new();
        for i in 0..NUM_OPERATORS {
            text.push_str(&format!("{i}\t{}\n", decode_operator(i)?.label()));
        }
        emit(&text);
    }
    Ok(())
}

fn exit_code(err: &Error) -> i32 {
    use Error::*;
    match err {
        // Bad inputs: configs, genomes, descriptor fields, arity misuse.
        OperatorIndex { .. }
        | DescriptorField { .. }
        | GroupDivision { .. }
        | EmptyGenome
        | GenomeLength { .. }
        | GenomeParse { .. }
        | Config(_)
        | ObjectiveArity { .. }
        | HypervolumeArity(_)
        | HypervolumeReference { .. } => 2,
        // Evaluation and search runtime failures.
        NonFinite { .. }
        | EmptyPopulation
        | Unranked
        | EmptyBatch
        | Protocol(_)
        | PsnrMseMismatch { .. }
        | EvalTimeout { .. }
        | Worker(_) => 3,
        // Storage problems.
        CheckpointIntegrity { .. }
        | CheckpointVersion { .. }
        | CheckpointField { .. }
        | Io { .. }
        | Json(_) => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Search { config, out } => cmd_search(&config, &out),
        Cmd::Resume { checkpoint } => cmd_resume(&checkpoint),
        Cmd::Report { checkpoint, what, svg } => cmd_report(&checkpoint, what, svg),
        Cmd::EvalOne { genome } => cmd_eval_one(&genome),
        Cmd::Space { describe, list } => cmd_space(describe, list),
    }
}

fn main() {
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
