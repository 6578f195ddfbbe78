use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use tokscope::apt::EventFilter;
use tokscope::confusion::{self, ThresholdConfig};
use tokscope::percolation::{percolate, size_distribution, ClusterSizeDistribution};
use tokscope::{io, ConfusionMatrix, TokenId, Vocab};

use super::Ctx;
use crate::error::{CliError, CliResult};
use crate::output::{fixed, load, Role, Run, Table};

const EXCLUSION_RULE: &str = "diagonal>0 and diagonal>=every off-diagonal";

#[derive(Args, Debug)]
pub struct ConfuseArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Vocabulary file; fixes the matrix dimension and range-checks ids.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Matrix dimension when no vocabulary is given.
    #[arg(long)]
    pub t_number: Option<usize>,
    #[arg(long)]
    pub masked_only: bool,
    /// Drop off-diagonal cells counted fewer than this many times.
    #[arg(long, default_value_t = 0)]
    pub min_count: u64,
}

#[derive(Args, Debug)]
pub struct TopkArgs {
    #[arg(long)]
    pub confusion: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Vocabulary file for token texts.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub min_count: u64,
}

#[derive(Args, Debug)]
pub struct ClustersArgs {
    /// Adjacency file from a previous run.
    #[arg(long, conflicts_with_all = ["confusion", "th"])]
    pub adjacency: Option<PathBuf>,
    /// Confusion file; runs normalize, threshold, mutuality and percolation.
    #[arg(long, required_unless_present = "adjacency")]
    pub confusion: Option<PathBuf>,
    /// Binarization threshold (strict).
    #[arg(long)]
    pub th: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub min_count: u64,
    /// Vocabulary file for token texts.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Bins of the off-diagonal value histogram over [0, 1].
    #[arg(long, default_value_t = 100)]
    pub hist_bins: usize,
}

fn read_vocab_opt(run: &mut Run, path: Option<&Path>) -> CliResult<Option<Vocab>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let v = load(p, io::read_vocab)?;
            run.input("vocab", p)?;
            Ok(Some(v))
        }
    }
}

fn check_dim(vocab: Option<&Vocab>, t_number: usize) -> CliResult<()> {
    match vocab {
        Some(v) if v.t_number() != t_number => Err(CliError::input(
            "length-mismatch",
            format!(
                "vocabulary has {} tokens but the matrix has {t_number}",
                v.t_number()
            ),
        )),
        _ => Ok(()),
    }
}

fn read_confusion(run: &mut Run, path: &Path, min_count: u64) -> CliResult<ConfusionMatrix> {
    let m = load(path, io::read_confusion)?;
    run.input("confusion", path)?;
    run.param("min_count", min_count);
    Ok(if min_count > 0 {
        m.filter_min_count(min_count)
    } else {
        m
    })
}

fn text(vocab: Option<&Vocab>, t: TokenId) -> String {
    vocab.map_or_else(|| t.to_string(), |v| v.text(t).to_string())
}

pub fn run_confuse(a: &ConfuseArgs, ctx: &Ctx) -> CliResult<()> {
    let mut run = Run::new("confuse", "confuse", &ctx.out)?;
    let vocab = read_vocab_opt(&mut run, a.vocab.as_deref())?;
    let bound = vocab.as_ref().map(Vocab::t_number).or(a.t_number);
    let events = load(&a.events, |p| io::read_events(p, bound))?;
    run.input("events", &a.events)?;
    let t_number = match bound {
        Some(t) => t,
        None => events
            .iter()
            .map(|e| e.true_token.max(e.predicted) as usize + 1)
            .max()
            .unwrap_or(0),
    };
    let filter = if a.masked_only {
        EventFilter::MaskedOnly
    } else {
        EventFilter::All
    };
    run.param("filter", if a.masked_only { "masked-only" } else { "all" });
    run.param("t_number", t_number);
    run.param("min_count", a.min_count);

    let mut m = confusion::build_confusion_filtered(&events, t_number, filter)?;
    if a.min_count > 0 {
        m = m.filter_min_count(a.min_count);
    }
    io::write_confusion(&run.path("confusion.tsv"), &m)?;
    run.record("confusion.tsv", Role::Data)?;

    let diagonal: u64 = (0..t_number as TokenId).map(|r| m.diagonal(r)).sum();
    let total: u64 = m.triplets().map(|(_, _, n)| n).sum();
    let mut t = Table::new(["events", "t_number", "cells", "diagonal", "off_diagonal"]);
    t.row([
        events.len().to_string(),
        t_number.to_string(),
        m.nnz().to_string(),
        diagonal.to_string(),
        (total - diagonal).to_string(),
    ]);
    run.write_table("confuse_summary.tsv", &t)?;
    run.write_summary(
        "confuse.summary.json",
        &json!({
            "events": events.len(),
            "t_number": t_number,
            "cells": m.nnz(),
            "diagonal": diagonal,
            "off_diagonal": total - diagonal,
        }),
    )?;
    run.finish()?;
    print!("{}", t.render());
    Ok(())
}

pub fn run_topk(a: &TopkArgs, ctx: &Ctx) -> CliResult<()> {
    let mut run = Run::new("topk", "topk", &ctx.out)?;
    let vocab = read_vocab_opt(&mut run, a.vocab.as_deref())?;
    let m = read_confusion(&mut run, &a.confusion, a.min_count)?;
    check_dim(vocab.as_ref(), m.t_number())?;
    run.param("k", a.k);
    run.param("exclusion_rule", EXCLUSION_RULE);

    let n = confusion::normalize_confusion(&m)?;
    let top = confusion::top_k(&n, a.k)?;
    let mut t = Table::new(["token", "text", "most confused (normalized)"]);
    for (r, list) in &top.rows {
        let mut cells = vec![r.to_string(), text(vocab.as_ref(), *r)];
        cells.extend(
            list.iter()
                .map(|&(c, v)| format!("{} ({v:.3})", text(vocab.as_ref(), c))),
        );
        t.row(cells);
    }
    run.write_table("topk.tsv", &t)?;
    run.write_summary(
        "topk.summary.json",
        &json!({
            "k": a.k,
            "retained_rows": top.rows.len(),
            "excluded_rows": n.excluded_rows().len(),
        }),
    )?;
    run.finish()?;
    Ok(())
}

pub fn distribution_table(d: &ClusterSizeDistribution) -> Table {
    let mut t = Table::new(["size", "clusters"]);
    for &(size, count) in &d.rows {
        t.row([size.to_string(), count.to_string()]);
    }
    t
}

pub fn run_clusters(a: &ClustersArgs, ctx: &Ctx) -> CliResult<()> {
    let mut run = Run::new("clusters", "clusters", &ctx.out)?;
    let vocab = read_vocab_opt(&mut run, a.vocab.as_deref())?;
    let mut summary = serde_json::Map::new();

    let (adj, participants) = match (&a.adjacency, &a.confusion) {
        (Some(path), _) => {
            let r = load(path, io::read_adjacency)?;
            run.input("adjacency", path)?;
            r
        }
        (None, Some(path)) => {
            let m = read_confusion(&mut run, path, a.min_count)?;
            let cfg = match a.th {
                Some(th) => ThresholdConfig::new(th)?,
                None => ThresholdConfig::default(),
            };
            run.param("th", cfg.th());
            run.param("comparison", "strict-greater");
            run.param("exclusion_rule", EXCLUSION_RULE);
            run.param("hist_bins", a.hist_bins);

            let n = confusion::normalize_confusion(&m)?;
            let b = confusion::binarize_threshold(&n, cfg);
            let adj = confusion::adjacency(&b);
            let participants = n.retained_rows();
            io::write_adjacency(&run.path("adjacency.tsv"), &adj, &participants)?;
            run.record("adjacency.tsv", Role::Data)?;
            let h = confusion::offdiag_histogram(&n, 0.0, 1.0, a.hist_bins.max(1));
            run.write_plot(
                "offdiag_hist.tsv",
                (0..h.bins()).map(|k| (h.center(k), h.counts[k])),
            )?;
            summary.insert("excluded_rows".into(), n.excluded_rows().len().into());
            summary.insert("binary_edges".into(), b.n_edges().into());
            (adj, participants)
        }
        (None, None) => unreachable!("clap requires one input"),
    };
    check_dim(vocab.as_ref(), adj.t_number())?;

    let clusters = percolate(&adj, &participants)?;
    let dist = size_distribution(&clusters);
    io::write_clusters(&run.path("clusters.tsv"), &clusters, vocab.as_ref())?;
    run.record("clusters.tsv", Role::Data)?;
    let table = distribution_table(&dist);
    run.write_table("distribution.tsv", &table)?;

    summary.insert("participants".into(), participants.len().into());
    summary.insert("edges".into(), adj.edges().len().into());
    summary.insert("clusters".into(), clusters.clusters().len().into());
    summary.insert("unity_clusters".into(), dist.count_of(1).into());
    summary.insert("max_cluster_size".into(), dist.max_size().into());
    let unity_fraction =
        (!participants.is_empty()).then(|| dist.count_of(1) as f64 / participants.len() as f64);
    summary.insert("unity_fraction".into(), fixed(unity_fraction, 6).into());
    run.write_summary("clusters.summary.json", &summary.into())?;
    run.finish()?;
    print!("{}", table.render());
    Ok(())
}
