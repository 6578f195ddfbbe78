//! `tokscope`: one entry point for every analysis pipeline.
//!
//! Each subcommand writes its outputs plus `<stem>.manifest.json` into
//! `--out`. Failures print one JSON line on stderr and exit with 2 (usage),
//! 3 (invalid input) or 70 (internal invariant).

mod cmd;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use tokscope::synth::KvSpec;

use cmd::Ctx;
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(
    name = "tokscope",
    version,
    about = "Token-level diagnostics for masked language models",
    arg_required_else_help = true,
    args_override_self = true
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "TOKSCOPE_THREADS")]
    threads: Option<usize>,
    /// `key=value` file of default flags; `sub.key` entries apply to one
    /// subcommand. Flags on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Accuracy per token, group curve and top-APT summary.
    Apt(cmd::apt::AptArgs),
    /// Confusion triplets from an events file.
    Confuse(cmd::confusion::ConfuseArgs),
    /// Most-confused partners of every retained token.
    Topk(cmd::confusion::TopkArgs),
    /// Percolation clusters from a confusion or adjacency file.
    Clusters(cmd::confusion::ClustersArgs),
    /// Embedding cosine similarity: histogram, Top-q clusters, Top-K lists.
    Cossim(cmd::cossim::CossimArgs),
    /// Per-bin classification confidence.
    Confidence(cmd::confidence::ConfidenceArgs),
    /// Diagonal cluster statistics of single-unit field matrices.
    Snp(cmd::snp::SnpArgs),
    /// Seeded synthetic data with ground truth.
    Synth(cmd::synth::SynthArgs),
    /// Markdown report stitched from a directory of earlier outputs.
    Report(cmd::report::ReportArgs),
}

const VALUE_FLAGS: [&str; 3] = ["--threads", "--config", "--out"];

/// Splices flags from the `--config` file in right after the subcommand name
/// so that anything given on the command line overrides them.
fn expand_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else if a == "--config" {
            config = argv.get(i + 1).cloned();
            i += 1;
        } else if VALUE_FLAGS.contains(&a.as_str()) {
            i += 1;
        } else if !a.starts_with('-') && sub.is_none() {
            sub = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(sub)) = (config, sub) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::input("io", format!("{path}: {e}")))?;
    let kv = KvSpec::parse(&text).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{path}: {}", err.message);
        err
    })?;
    let name = argv[sub].clone();
    let mut extra = Vec::new();
    for (k, v) in kv.entries() {
        let key = match k.split_once('.') {
            Some((section, key)) if section == name => key,
            Some(_) => continue,
            None => k,
        };
        if key == "config" {
            continue;
        }
        match v {
            "true" => extra.push(format!("--{key}")),
            "false" => {}
            _ => {
                extra.push(format!("--{key}"));
                extra.push(v.to_string());
            }
        }
    }
    let mut out = argv[..=sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub + 1..]);
    Ok(out)
}

fn setup_threads(threads: Option<usize>) -> CliResult<()> {
    match threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::internal("thread-pool", e.to_string())),
        #[cfg(not(feature = "parallel"))]
        Some(n) => {
            log::debug!("sequential build ignores --threads {n}");
            Ok(())
        }
        None => Ok(()),
    }
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                let _ = e.print();
                return Ok(());
            }
            ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                let _ = e.print();
                return Err(CliError::usage("missing subcommand"));
            }
            _ => {
                let text = e.render().to_string();
                log::debug!("{text}");
                let first = text.lines().next().unwrap_or("invalid arguments");
                let first = first.strip_prefix("error: ").unwrap_or(first);
                return Err(CliError::usage(first));
            }
        },
    };
    setup_threads(cli.threads)?;
    let ctx = Ctx { out: cli.out };
    let started = std::time::Instant::now();
    match &cli.command {
        Command::Apt(a) => cmd::apt::run(a, &ctx),
        Command::Confuse(a) => cmd::confusion::run_confuse(a, &ctx),
        Command::Topk(a) => cmd::confusion::run_topk(a, &ctx),
        Command::Clusters(a) => cmd::confusion::run_clusters(a, &ctx),
        Command::Cossim(a) => cmd::cossim::run(a, &ctx),
        Command::Confidence(a) => cmd::confidence::run(a, &ctx),
        Command::Snp(a) => cmd::snp::run(a, &ctx),
        Command::Synth(a) => cmd::synth::run(a, &ctx),
        Command::Report(a) => cmd::report::run(a, &ctx),
    }?;
    log::info!("done in {:.2?}", started.elapsed());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::info!("{e}");
            eprintln!("{}", e.json_line());
            ExitCode::from(e.code as u8)
        }
    }
}
