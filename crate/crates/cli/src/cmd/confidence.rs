use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use tokscope::confidence::{self, BinSpec, ConfidenceAxis};
use tokscope::io;

use super::Ctx;
use crate::error::{CliError, CliResult};
use crate::output::{fixed, json_num, load, Run, Table};

#[derive(Args, Debug)]
pub struct ConfidenceArgs {
    /// Classified-inputs file.
    #[arg(long)]
    pub inputs: PathBuf,
    /// APT table written by `apt`.
    #[arg(long)]
    pub apt: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// `apt-ave` (linear bins) or `freq-ave` (logarithmic bins).
    #[arg(long, default_value = "apt-ave")]
    pub axis: ConfidenceAxis,
    /// Number of bins.
    #[arg(long, conflicts_with = "bin_width")]
    pub bins: Option<usize>,
    /// Bin width on the APT axis.
    #[arg(long)]
    pub bin_width: Option<f64>,
}

pub fn run(a: &ConfidenceArgs, ctx: &Ctx) -> CliResult<()> {
    let mut run = Run::new("confidence", "confidence", &ctx.out)?;
    let vocab = load(&a.vocab, io::read_vocab)?;
    let t = vocab.t_number();
    let apt = load(&a.apt, |p| io::read_apt_table(p, t))?;
    let inputs = load(&a.inputs, |p| io::read_inputs(p, t))?;
    run.input("vocab", &a.vocab)?;
    run.input("apt", &a.apt)?;
    run.input("inputs", &a.inputs)?;

    let spec = match (a.bins, a.bin_width) {
        (Some(n), _) => BinSpec::Count(n),
        (None, Some(w)) if a.axis == ConfidenceAxis::AptAve => BinSpec::Width(w),
        (None, Some(_)) => {
            return Err(CliError::input(
                "invalid-parameter",
                "--bin-width applies to the apt-ave axis",
            ))
        }
        (None, None) => BinSpec::default_for(a.axis),
    };
    run.param("axis", a.axis);
    match spec {
        BinSpec::Count(n) => run.param("bins", n),
        BinSpec::Width(w) => run.param("bin_width", w),
    }
    run.param(
        "binning",
        match a.axis {
            ConfidenceAxis::AptAve => "linear, half-open, top edge closed",
            ConfidenceAxis::FreqAve => "logarithmic, half-open, top edge closed",
        },
    );
    run.param("missing_apt", "skipped");

    let bins = confidence::confidence_bins(&inputs, &apt, &vocab, a.axis, spec)?;
    let mut table = Table::new(["lower", "upper", "n_correct", "n_incorrect", "confidence"]);
    for b in &bins.bins {
        table.row([
            format!("{:.6}", b.lower),
            format!("{:.6}", b.upper),
            b.n_correct.to_string(),
            b.n_incorrect.to_string(),
            fixed(b.confidence(), 4),
        ]);
    }
    run.write_table("confidence.tsv", &table)?;
    run.write_plot(
        "confidence_plot.tsv",
        bins.bins.iter().filter_map(|b| {
            b.confidence()
                .map(|c| (format!("{:.6}", 0.5 * (b.lower + b.upper)), c))
        }),
    )?;
    run.write_summary(
        "confidence.summary.json",
        &json!({
            "axis": a.axis.as_str(),
            "inputs": inputs.len(),
            "binned": bins.n_binned(),
            "unbinned": bins.unbinned,
            "n_correct": bins.n_correct(),
            "global_confidence": json_num(bins.global_confidence()),
        }),
    )?;
    run.finish()?;
    print!("{}", table.render());
    Ok(())
}
