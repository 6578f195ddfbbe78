use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use tokscope::snp::{self, SnpStats};
use tokscope::{io, par};

use super::Ctx;
use crate::error::{CliError, CliResult};
use crate::output::{fixed, json_num, load, Role, Run, Table};

#[derive(Args, Debug)]
pub struct SnpArgs {
    /// Field-matrix container.
    #[arg(long)]
    pub fields: PathBuf,
    /// Clipping threshold (strict) applied after normalization.
    #[arg(long, default_value_t = snp::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Expected label count; checked against the file.
    #[arg(long)]
    pub labels: Option<usize>,
    /// Per-label accuracy file (`label<TAB>accuracy`).
    #[arg(long)]
    pub accuracy: Option<PathBuf>,
}

fn join(labels: &[u32], sep: &str) -> String {
    labels
        .iter()
        .map(u32::to_string)
        .collect::<Vec<_>>()
        .join(sep)
}

pub fn run(a: &SnpArgs, ctx: &Ctx) -> CliResult<()> {
    let mut run = Run::new("snp", "snp", &ctx.out)?;
    let fields = load(&a.fields, io::read_fields)?;
    run.input("fields", &a.fields)?;
    let n_labels = match (fields.first(), a.labels) {
        (None, _) => return Err(CliError::input("empty-matrix", "fields file has no units")),
        (Some(f), Some(l)) if f.n_labels != l => {
            return Err(CliError::input(
                "label-count-mismatch",
                format!("--labels {l} but the file holds {} labels", f.n_labels),
            ))
        }
        (Some(f), _) => f.n_labels,
    };
    if !(a.threshold.is_finite()) {
        return Err(CliError::input(
            "invalid-parameter",
            "threshold must be finite",
        ));
    }
    run.param("threshold", a.threshold);
    run.param("comparison", "strict-greater");
    run.param("labels", n_labels);
    run.param("normalization", "divide-by-max");
    run.param("noise", "above-threshold outside every cluster block");

    let stats: Vec<SnpStats> = par::map_range(fields.len(), |u| {
        snp::normalize_fields(&fields[u]).and_then(|m| snp::diagonalize_fields(&m, a.threshold))
    })
    .into_iter()
    .collect::<tokscope::Result<_>>()?;
    for s in &stats {
        let expected = (s.n_c > 0).then(|| s.diag as f64 / s.n_c as f64);
        let sizes: usize = s.clusters.iter().map(Vec::len).sum();
        if s.c_s != expected || sizes != s.diag || s.clusters.len() != s.n_c {
            return Err(CliError::internal(
                "invariant",
                format!("unit {}: Diag, N_C and C_S disagree", s.unit_index),
            ));
        }
    }
    let agg = snp::aggregate(&stats, n_labels)?;

    let mut units = Table::new(["unit", "index", "N_C", "C_S", "Diag", "n"]);
    for (f, s) in fields.iter().zip(&stats) {
        units.row([
            f.unit.as_str().to_string(),
            s.unit_index.to_string(),
            s.n_c.to_string(),
            fixed(s.c_s, 2),
            s.diag.to_string(),
            s.noise.to_string(),
        ]);
    }
    units.row([
        "Ave".to_string(),
        "-".to_string(),
        fixed(Some(agg.mean_n_c), 2),
        fixed(agg.mean_c_s, 2),
        fixed(Some(agg.mean_diag), 2),
        fixed(Some(agg.mean_noise), 2),
    ]);
    run.write_table("snp_units.tsv", &units)?;

    let mut row = Table::new(["units", "N_C", "C_S", "Diag", "n", "SNR"]);
    row.row([
        agg.n_units.to_string(),
        fixed(Some(agg.mean_n_c), 2),
        fixed(agg.mean_c_s, 2),
        fixed(Some(agg.mean_diag), 2),
        fixed(Some(agg.mean_noise), 2),
        fixed(Some(agg.snr), 2),
    ]);
    run.write_table("snp_aggregate.tsv", &row)?;

    run.write_with("snp_clusters.tsv", Role::Data, |w| {
        writeln!(w, "# index\tclusters\tpermutation")?;
        for s in &stats {
            let clusters: Vec<String> = s.clusters.iter().map(|c| join(c, ",")).collect();
            writeln!(
                w,
                "{}\t{}\t{}",
                s.unit_index,
                clusters.join(";"),
                join(&s.permutation, ",")
            )?;
        }
        Ok(())
    })?;

    let accuracy = match &a.accuracy {
        Some(p) => {
            let acc = load(p, io::read_label_accuracy)?;
            run.input("accuracy", p)?;
            Some(acc)
        }
        None => None,
    };
    let app = snp::label_appearance(&stats, n_labels, accuracy.as_deref())?;
    run.write_plot("appearance.tsv", app.histogram())?;
    if let Some(acc) = &app.accuracy {
        run.write_plot(
            "accuracy_scatter.tsv",
            app.appearances.iter().zip(acc).map(|(&n, &v)| (n, v)),
        )?;
    }

    run.write_summary(
        "snp.summary.json",
        &json!({
            "units": agg.n_units,
            "labels": n_labels,
            "mean_diag": agg.mean_diag,
            "mean_n_c": agg.mean_n_c,
            "mean_c_s": json_num(agg.mean_c_s),
            "mean_noise": agg.mean_noise,
            "snr": json_num(Some(agg.snr)),
            "snr_infinite": agg.snr.is_infinite(),
            "pearson": json_num(app.pearson),
        }),
    )?;
    run.finish()?;
    print!("{}", row.render());
    Ok(())
}
