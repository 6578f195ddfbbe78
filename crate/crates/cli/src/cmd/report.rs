use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::Args;

use super::Ctx;
use crate::error::{CliError, CliResult};
use crate::output::{sha256_file, Role, Run, RunManifest, MANIFEST_SUFFIX};

const REPORT: &str = "report.md";
const ORDER: [&str; 8] = [
    "synth",
    "apt",
    "confuse",
    "topk",
    "clusters",
    "cossim",
    "confidence",
    "snp",
];

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory holding the outputs and manifests of earlier runs.
    pub dir: PathBuf,
}

struct Section {
    stem: String,
    manifest: RunManifest,
}

fn read_sections(a: &ReportArgs) -> CliResult<Vec<Section>> {
    let entries = fs::read_dir(&a.dir)
        .map_err(|e| CliError::input("missing-inputs", format!("{}: {e}", a.dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();

    let mut sections = Vec::new();
    for name in &names {
        let Some(stem) = name.strip_suffix(MANIFEST_SUFFIX) else {
            continue;
        };
        if stem == "report" {
            continue;
        }
        let text = fs::read_to_string(a.dir.join(name))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::input("bad-manifest", format!("{name}: {e}")))?;
        sections.push(Section {
            stem: stem.to_string(),
            manifest,
        });
    }
    if sections.is_empty() {
        return Err(CliError::input(
            "missing-inputs",
            format!("no run manifests in {}", a.dir.display()),
        ));
    }

    let mut claimed = BTreeSet::new();
    for s in &sections {
        for (file, entry) in &s.manifest.outputs {
            let path = a.dir.join(file);
            let digest = sha256_file(&path).map_err(|_| {
                CliError::input(
                    "missing-output",
                    format!("{file} listed in {}{MANIFEST_SUFFIX} is missing", s.stem),
                )
            })?;
            if digest != entry.sha256 {
                return Err(CliError::input(
                    "digest-mismatch",
                    format!(
                        "{file} changed since {}{MANIFEST_SUFFIX} was written",
                        s.stem
                    ),
                ));
            }
            claimed.insert(file.clone());
        }
    }
    let own = [REPORT.to_string(), format!("report{MANIFEST_SUFFIX}")];
    if let Some(stray) = names.iter().find(|n| {
        !n.starts_with('.')
            && !n.ends_with(MANIFEST_SUFFIX)
            && !claimed.contains(*n)
            && !own.contains(n)
    }) {
        return Err(CliError::input(
            "missing-manifest",
            format!("{stray} is not listed in any manifest"),
        ));
    }

    let rank = |s: &Section| {
        ORDER
            .iter()
            .position(|&o| o == s.manifest.subcommand)
            .unwrap_or(ORDER.len())
    };
    sections.sort_by(|x, y| rank(x).cmp(&rank(y)).then(x.stem.cmp(&y.stem)));
    Ok(sections)
}

pub fn run(a: &ReportArgs, ctx: &Ctx) -> CliResult<()> {
    let sections = read_sections(a)?;
    let mut run = Run::new("report", "report", &ctx.out)?;
    let mut doc = String::from("# tokscope report\n\n");
    for s in &sections {
        let m = &s.manifest;
        run.input_as(
            &s.stem,
            &format!("{}{MANIFEST_SUFFIX}", s.stem),
            &a.dir.join(format!("{}{MANIFEST_SUFFIX}", s.stem)),
        )?;
        let _ = write!(doc, "## {}\n\n", s.stem);
        let _ = writeln!(doc, "Produced by `{}`.\n", m.tool_version);
        if !m.parameters.is_empty() {
            doc.push_str("| parameter | value |\n|---|---|\n");
            for (k, v) in &m.parameters {
                let _ = writeln!(doc, "| {k} | {} |", v.replace('|', "\\|"));
            }
            doc.push('\n');
        }
        if !m.input_digests.is_empty() {
            doc.push_str("| input | path | sha256 |\n|---|---|---|\n");
            for (k, d) in &m.input_digests {
                let _ = writeln!(doc, "| {k} | `{}` | `{}` |", d.path, d.sha256);
            }
            doc.push('\n');
        }
        for role in [Role::Table, Role::Summary] {
            for (file, _) in m.outputs.iter().filter(|(_, e)| e.role == role) {
                let text = fs::read_to_string(a.dir.join(file))?;
                let _ = write!(doc, "### {file}\n\n```text\n{text}");
                if !text.ends_with('\n') {
                    doc.push('\n');
                }
                doc.push_str("```\n\n");
            }
        }
        let plots: Vec<&String> = m
            .outputs
            .iter()
            .filter(|(_, e)| e.role == Role::Plot)
            .map(|(f, _)| f)
            .collect();
        if !plots.is_empty() {
            doc.push_str("Plot data (`x<TAB>y`):\n\n");
            for f in plots {
                let _ = writeln!(doc, "- `{f}`");
            }
            doc.push('\n');
        }
        let data: Vec<&String> = m
            .outputs
            .iter()
            .filter(|(_, e)| e.role == Role::Data)
            .map(|(f, _)| f)
            .collect();
        if !data.is_empty() {
            doc.push_str("Data files:\n\n");
            for f in data {
                let _ = writeln!(doc, "- `{f}`");
            }
            doc.push('\n');
        }
    }
    while doc.ends_with("\n\n") {
        doc.pop();
    }
    run.write_with(REPORT, Role::Data, |w| w.write_all(doc.as_bytes()))?;
    run.param("sections", sections.len());
    run.finish()?;
    Ok(())
}
