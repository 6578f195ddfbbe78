use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use tokscope::apt::{self, EventFilter};
use tokscope::io;

use super::Ctx;
use crate::error::CliResult;
use crate::output::{fixed, json_num, load, Role, Run, Table};

#[derive(Args, Debug)]
pub struct AptArgs {
    /// Events file (text or binary container).
    #[arg(long)]
    pub events: PathBuf,
    /// Vocabulary file.
    #[arg(long)]
    pub vocab: PathBuf,
    /// Number of frequency-ordered groups in the group curve.
    #[arg(long, default_value_t = 200)]
    pub groups: usize,
    /// Number of highest-APT tokens averaged in the summary.
    #[arg(long, default_value_t = 50)]
    pub top_k: usize,
    /// Count MASKED events only.
    #[arg(long)]
    pub masked_only: bool,
    /// Clusters file; adds the unity versus multi-token cluster split.
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Histogram bins for the cluster split.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

pub fn run(a: &AptArgs, ctx: &Ctx) -> CliResult<()> {
    let mut run = Run::new("apt", "apt", &ctx.out)?;
    let vocab = load(&a.vocab, io::read_vocab)?;
    let events = load(&a.events, |p| io::read_events(p, Some(vocab.t_number())))?;
    run.input("vocab", &a.vocab)?;
    run.input("events", &a.events)?;

    let filter = if a.masked_only {
        EventFilter::MaskedOnly
    } else {
        EventFilter::All
    };
    run.param("filter", if a.masked_only { "masked-only" } else { "all" });
    run.param("groups", a.groups);
    run.param("top_k", a.top_k);
    run.param("mean_over", "selected-tokens");
    run.param("group_weighting", "unweighted");
    run.param("group_order", "corpus-frequency-desc");

    let table = apt::compute_apt_filtered(&events, &vocab, filter)?;
    let groups = apt::group_apt(&table, &vocab, a.groups)?;
    let top = apt::top_apt(&table, a.top_k)?;
    let mean = table.mean_apt();
    log::info!(
        "{} events, {} covered tokens, <APT> {mean:.4}",
        events.len(),
        table.covered_tokens()
    );

    io::write_apt_table(&run.path("apt.tsv"), &table, &vocab)?;
    run.record("apt.tsv", Role::Data)?;
    run.write_plot("groups.tsv", groups.iter().map(|&(g, m)| (g, m)))?;

    let mut t1 = Table::new(["<APT>".to_string(), format!("APT({})", a.top_k)]);
    t1.row([fixed(Some(mean), 3), fixed(Some(top), 3)]);
    run.write_table("apt_summary.tsv", &t1)?;

    let mut summary = json!({
        "events": events.len(),
        "t_number": vocab.t_number(),
        "covered_tokens": table.covered_tokens(),
        "mean_apt": mean,
        "top_k": a.top_k,
        "top_k_mean_apt": top,
        "groups": groups.len(),
    });

    if let Some(path) = &a.clusters {
        let clusters = load(path, |p| io::read_clusters(p, vocab.t_number()))?;
        run.input("clusters", path)?;
        run.param("bins", a.bins);
        let split = apt::apt_by_cluster(&table, &clusters, a.bins)?;
        let mut t = Table::new(["clusters", "tokens", "mean_apt"]);
        t.row([
            "unity".to_string(),
            split.n_unity.to_string(),
            fixed(split.unity_mean, 3),
        ]);
        t.row([
            "multi".to_string(),
            split.n_multi.to_string(),
            fixed(split.multi_mean, 3),
        ]);
        run.write_table("unity.tsv", &t)?;
        for (name, h) in [
            ("unity_hist.tsv", &split.unity_hist),
            ("multi_hist.tsv", &split.multi_hist),
        ] {
            run.write_plot(name, (0..h.bins()).map(|k| (h.center(k), h.counts[k])))?;
        }
        summary["unity_mean_apt"] = json_num(split.unity_mean);
        summary["multi_mean_apt"] = json_num(split.multi_mean);
        summary["unity_tokens"] = split.n_unity.into();
        summary["multi_tokens"] = split.n_multi.into();
    }

    run.write_summary("apt.summary.json", &summary)?;
    run.finish()?;
    print!("{}", t1.render());
    Ok(())
}
