use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use tokscope::confusion::adjacency;
use tokscope::percolation::{percolate, size_distribution};
use tokscope::similarity::{self, AbttConfig, CosineIndex, CslsConfig, CslsScorer, RowScorer};
use tokscope::{io, TokenId, Vocab};

use super::confusion::distribution_table;
use super::Ctx;
use crate::error::{CliError, CliResult};
use crate::output::{load, Role, Run, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hist,
    Topq,
    Topk,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Hist => "hist",
            Mode::Topq => "topq",
            Mode::Topk => "topk",
        }
    }
}

#[derive(Args, Debug)]
pub struct CossimArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Partners kept per row before the mutuality step.
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    /// Partners listed per token in topk mode.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Remove the mean and this many principal components first.
    #[arg(long)]
    pub abtt_r: Option<usize>,
    /// Score with CSLS over this many nearest neighbours.
    #[arg(long)]
    pub csls_n: Option<usize>,
    /// Histogram bins over [-1, 1].
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Vocabulary file for token texts.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

pub fn run(a: &CossimArgs, ctx: &Ctx) -> CliResult<()> {
    let stem = format!("cossim-{}", a.mode.as_str());
    let mut run = Run::new("cossim", &stem, &ctx.out)?;
    let mut e = load(&a.embedding, io::read_embedding)?;
    run.input("embedding", &a.embedding)?;
    let vocab = match &a.vocab {
        Some(p) => {
            let v = load(p, io::read_vocab)?;
            run.input("vocab", p)?;
            if v.t_number() != e.t_number() {
                return Err(CliError::input(
                    "length-mismatch",
                    format!(
                        "vocabulary has {} tokens but the embedding has {} rows",
                        v.t_number(),
                        e.t_number()
                    ),
                ));
            }
            Some(v)
        }
        None => None,
    };
    run.param("mode", a.mode.as_str());
    if let Some(r) = a.abtt_r {
        run.param("abtt_r", r);
        e = similarity::abtt(&e, AbttConfig { r })?;
    }
    if a.mode == Mode::Hist && a.csls_n.is_some() {
        return Err(CliError::input(
            "invalid-parameter",
            "--csls-n applies to topq and topk modes",
        ));
    }

    match a.mode {
        Mode::Hist => {
            run.param("bins", a.bins);
            run.param("pairs", "ordered, diagonal included");
            let h = similarity::similarity_histogram(&e, a.bins)?;
            let name = format!("{stem}.tsv");
            run.write_plot(&name, (0..h.bins()).map(|k| (h.center(k), h.counts[k])))?;
            run.write_summary(
                &format!("{stem}.summary.json"),
                &json!({
                    "t_number": e.t_number(),
                    "e_length": e.e_length(),
                    "bins": a.bins,
                    "pairs": h.total(),
                }),
            )?;
        }
        Mode::Topq | Mode::Topk => match a.csls_n {
            Some(n) => {
                run.param("scorer", "csls");
                run.param("csls_n", n);
                let s = CslsScorer::new(&e, CslsConfig { neighborhood: n })?;
                scored(a, &s, vocab.as_ref(), &mut run)?;
            }
            None => {
                run.param("scorer", "cosine");
                scored(a, &CosineIndex::new(&e), vocab.as_ref(), &mut run)?;
            }
        },
    }
    run.finish()?;
    Ok(())
}

fn scored<S: RowScorer>(
    a: &CossimArgs,
    scorer: &S,
    vocab: Option<&Vocab>,
    run: &mut Run,
) -> CliResult<()> {
    let stem = run.stem().to_string();
    let text = |t: TokenId| vocab.map_or_else(|| t.to_string(), |v| v.text(t).to_string());
    if a.mode == Mode::Topq {
        run.param("q", a.q);
        let b = similarity::top_q_binarize_with(scorer, a.q)?;
        let adj = adjacency(&b);
        let all: Vec<TokenId> = (0..scorer.t_number() as TokenId).collect();
        let clusters = percolate(&adj, &all)?;
        let dist = size_distribution(&clusters);
        let cname = format!("{stem}_clusters.tsv");
        io::write_clusters(&run.path(&cname), &clusters, vocab)?;
        run.record(&cname, Role::Data)?;
        let table = distribution_table(&dist);
        run.write_table(&format!("{stem}_distribution.tsv"), &table)?;
        run.write_summary(
            &format!("{stem}.summary.json"),
            &json!({
                "q": a.q,
                "directed_edges": b.n_edges(),
                "mutual_edges": adj.edges().len(),
                "clusters": clusters.clusters().len(),
                "unity_clusters": dist.count_of(1),
                "max_cluster_size": dist.max_size(),
            }),
        )?;
        print!("{}", table.render());
    } else {
        run.param("k", a.k);
        let top = similarity::top_k_similar(scorer, a.k)?;
        let mut t = Table::new(["token", "text", "most similar"]);
        for (i, list) in top.rows.iter().enumerate() {
            let mut cells = vec![i.to_string(), text(i as TokenId)];
            cells.extend(list.iter().map(|&(j, v)| format!("{} ({v:.4})", text(j))));
            t.row(cells);
        }
        run.write_table(&format!("{stem}.tsv"), &t)?;
    }
    Ok(())
}
