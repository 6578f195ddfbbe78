//! Output directory bookkeeping: every file a subcommand writes is digested
//! and listed in a `<stem>.manifest.json` next to it.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Text table with a `#` header line.
    Table,
    /// Headerless `x<TAB>y` rows.
    Plot,
    /// One JSON object.
    Summary,
    /// Machine-readable data consumed by other subcommands.
    Data,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub role: Role,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub parameters: BTreeMap<String, String>,
    pub input_digests: BTreeMap<String, InputDigest>,
    pub outputs: BTreeMap<String, OutputEntry>,
    pub tool_version: String,
    pub timestamp: u64,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut f = File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the wall clock.
pub fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// Attaches the path to errors from a reader.
pub fn load<T>(path: &Path, f: impl FnOnce(&Path) -> tokscope::Result<T>) -> CliResult<T> {
    f(path).map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

pub struct Run {
    subcommand: String,
    stem: String,
    dir: PathBuf,
    parameters: BTreeMap<String, String>,
    inputs: BTreeMap<String, InputDigest>,
    outputs: BTreeMap<String, OutputEntry>,
}

impl Run {
    pub fn new(subcommand: &str, stem: &str, dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::input("io", format!("cannot create {}: {e}", dir.display())))?;
        Ok(Run {
            subcommand: subcommand.to_string(),
            stem: stem.to_string(),
            dir: dir.to_path_buf(),
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn param(&mut self, key: &str, value: impl Display) {
        self.parameters.insert(key.to_string(), value.to_string());
    }

    pub fn input(&mut self, flag: &str, path: &Path) -> CliResult<()> {
        self.input_as(flag, &path.display().to_string(), path)
    }

    /// Like `input`, recording `shown` instead of the path.
    pub fn input_as(&mut self, key: &str, shown: &str, path: &Path) -> CliResult<()> {
        let sha256 = sha256_file(path)
            .map_err(|e| CliError::input("io", format!("{}: {e}", path.display())))?;
        self.inputs.insert(
            key.to_string(),
            InputDigest {
                path: shown.to_string(),
                sha256,
            },
        );
        Ok(())
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Records a file already written to `self.path(name)`.
    pub fn record(&mut self, name: &str, role: Role) -> CliResult<()> {
        let sha256 = sha256_file(&self.path(name))?;
        self.outputs
            .insert(name.to_string(), OutputEntry { role, sha256 });
        Ok(())
    }

    /// Writes a file through a buffered writer and records it.
    pub fn write_with(
        &mut self,
        name: &str,
        role: Role,
        f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> CliResult<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        f(&mut w)?;
        w.flush()?;
        drop(w);
        self.record(name, role)
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> CliResult<()> {
        let text = table.render();
        self.write_with(name, Role::Table, |w| w.write_all(text.as_bytes()))
    }

    pub fn write_plot<X: Display, Y: Display>(
        &mut self,
        name: &str,
        points: impl IntoIterator<Item = (X, Y)>,
    ) -> CliResult<()> {
        self.write_with(name, Role::Plot, |w| {
            for (x, y) in points {
                writeln!(w, "{x}\t{y}")?;
            }
            Ok(())
        })
    }

    pub fn write_summary(&mut self, name: &str, value: &serde_json::Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_with(name, Role::Summary, |w| writeln!(w, "{text}"))
    }

    pub fn finish(self) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            subcommand: self.subcommand,
            parameters: self.parameters,
            input_digests: self.inputs,
            outputs: self.outputs,
            tool_version: format!("tokscope {}", env!("CARGO_PKG_VERSION")),
            timestamp: timestamp(),
        };
        let path = self.dir.join(format!("{}{MANIFEST_SUFFIX}", self.stem));
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, format!("{text}\n"))?;
        log::info!("wrote {}", path.display());
        Ok(manifest)
    }
}

/// Tab-separated table with a `#`-prefixed header line.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {}\n", self.header.join("\t"));
        for r in &self.rows {
            out.push_str(&r.join("\t"));
            out.push('\n');
        }
        out
    }
}

/// Fixed-decimal rendering with `-` for undefined and `inf` for infinite.
pub fn fixed(v: Option<f64>, decimals: usize) -> String {
    match v {
        None => "-".to_string(),
        Some(x) if x.is_infinite() => "inf".to_string(),
        Some(x) => format!("{x:.decimals$}"),
    }
}

/// JSON number, or `null` for undefined and non-finite values.
pub fn json_num(v: Option<f64>) -> serde_json::Value {
    v.filter(|x| x.is_finite())
        .map_or(serde_json::Value::Null, serde_json::Value::from)
}
