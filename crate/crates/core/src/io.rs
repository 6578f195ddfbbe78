//! File formats for every artifact the toolkit reads or writes.
//!
//! Text formats (UTF-8, `\n` line endings):
//!
//! * vocab: `id<TAB>text<TAB>frequency`, ids ascending
//! * events: `input,position,kind,true,pred`, kind one of `MASKED|REPLACED|UNCHANGED`
//! * classified inputs: `input-id,true-label,pred-label,tok tok tok ...`
//! * confusion: header `#TPLB<TAB>CONFUSION<TAB>1<TAB><t_number>`, then
//!   `row<TAB>col<TAB>count`, rows ascending then cols ascending
//! * adjacency: header `#TPLB<TAB>ADJACENCY<TAB>1<TAB><t_number>`, then
//!   `e<TAB>a<TAB>b` edges (`a < b`) and `x<TAB>id` for non-participants
//! * clusters: `index<TAB>size<TAB>id,id,...<TAB>text text ...`
//! * APT table: header `# token<TAB>text<TAB>frequency<TAB>selected<TAB>correct<TAB>apt`
//! * label accuracy: `label<TAB>accuracy`
//!
//! Binary container: magic `TPLB`, `u32` version, `u32` payload kind, then the
//! payload. All integers and floats are little-endian; floats are IEEE-754
//! `f32` on disk and widened to `f64` in memory.
//!
//! * EMBEDDING: `u32 rows, u32 cols`, then `rows * cols` floats row-major
//! * FIELDS: repeated records `u32 unit (0 node, 1 head), u32 unit_index,
//!   u32 n_labels`, then `n_labels^2` floats row-major
//! * EVENTS: repeated records `u64 input, u32 position, u32 kind, u32 true, u32 pred`

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::apt::AptTable;
use crate::error::{Error, Result};
use crate::types::{
    check_token, AdjacencyMatrix, ClassifiedInput, ClusterSet, ConfusionMatrix, EmbeddingMatrix,
    LabelFieldMatrix, MaskEvent, ModKind, TokenId, Unit, Vocab,
};

pub const MAGIC: &[u8; 4] = b"TPLB";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Events = 1,
    Confusion = 2,
    Embedding = 3,
    Fields = 4,
    Labels = 5,
    Clusters = 6,
    Report = 7,
}

impl PayloadKind {
    fn from_u32(v: u32) -> Option<Self> {
        use PayloadKind::*;
        [
            Events, Confusion, Embedding, Fields, Labels, Clusters, Report,
        ]
        .into_iter()
        .find(|k| *k as u32 == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub version: u32,
    pub kind: PayloadKind,
}

fn write_header(w: &mut impl Write, kind: PayloadKind) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(kind as u32).to_le_bytes())?;
    Ok(())
}

/// Parses and checks the 12-byte container header.
pub fn parse_header(bytes: &[u8], expected: PayloadKind) -> Result<FileHeader> {
    if bytes.len() < 12 {
        return Err(Error::BadHeader(format!("{} bytes, need 12", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadHeader("magic is not TPLB".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::BadHeader(format!("unsupported version {version}")));
    }
    let raw = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let kind = PayloadKind::from_u32(raw)
        .ok_or_else(|| Error::BadHeader(format!("unknown payload kind {raw}")))?;
    if kind != expected {
        return Err(Error::BadHeader(format!(
            "payload kind {kind:?}, expected {expected:?}"
        )));
    }
    Ok(FileHeader { version, kind })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn at_line(path: &Path, line: usize) -> String {
    format!("{}:{}", path.display(), line)
}

fn parse_field<T: std::str::FromStr>(
    s: Option<&str>,
    what: &str,
    loc: &dyn Fn() -> String,
) -> Result<T> {
    let s = s.ok_or_else(|| Error::malformed(loc(), format!("missing {what}")))?;
    s.trim()
        .parse()
        .map_err(|_| Error::malformed(loc(), format!("bad {what} {s:?}")))
}

/// Iterates non-empty lines with 1-based line numbers; skips `#` comments.
fn text_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>>> {
    let reader = BufReader::new(File::open(path)?);
    Ok(reader
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Ok(l) if l.trim().is_empty() || l.starts_with('#') => None,
            Ok(l) => Some(Ok((i + 1, l))),
            Err(e) => Some(Err(Error::Io(e))),
        }))
}

// ---------------------------------------------------------------- vocab

pub fn read_vocab(path: &Path) -> Result<Vocab> {
    let mut raw = Vec::new();
    let mut prev: Option<u64> = None;
    for item in text_lines(path)? {
        let (n, line) = item?;
        let loc = || at_line(path, n);
        let mut parts = line.split('\t');
        let id: u64 = parse_field(parts.next(), "id", &loc)?;
        let text = parts
            .next()
            .ok_or_else(|| Error::malformed(loc(), "missing text"))?
            .to_string();
        let freq: i64 = parse_field(parts.next(), "frequency", &loc)?;
        if parts.next().is_some() {
            return Err(Error::malformed(loc(), "extra columns"));
        }
        if let Some(p) = prev {
            if id < p {
                return Err(Error::malformed(loc(), "ids not ascending"));
            }
        }
        prev = Some(id);
        raw.push((id, text, freq));
    }
    Vocab::validate(raw)
}

pub fn write_vocab(path: &Path, vocab: &Vocab) -> Result<()> {
    let mut w = create(path)?;
    for e in vocab.entries() {
        writeln!(w, "{}\t{}\t{}", e.id, e.text, e.frequency)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- events

/// Streaming reader over an events file (text or binary container).
pub struct EventStream {
    inner: EventSource,
    t_number: Option<usize>,
    count: u64,
    done: bool,
}

enum EventSource {
    Text {
        reader: BufReader<File>,
        line: usize,
        buf: String,
        label: String,
    },
    Binary {
        reader: BufReader<File>,
        offset: u64,
    },
}

const EVENT_RECORD: usize = 24;

/// Opens an events file. Binary files are recognised by the `TPLB` magic;
/// anything else is parsed as text. When `t_number` is given, every token id
/// is range-checked.
pub fn open_events(path: &Path, t_number: Option<usize>) -> Result<EventStream> {
    let mut reader = BufReader::new(File::open(path)?);
    let head = reader.fill_buf()?;
    let inner = if head.len() >= 4 && &head[..4] == MAGIC {
        let mut header = [0u8; 12];
        reader
            .read_exact(&mut header)
            .map_err(|_| Error::BadHeader("short header".into()))?;
        parse_header(&header, PayloadKind::Events)?;
        EventSource::Binary { reader, offset: 12 }
    } else {
        EventSource::Text {
            reader,
            line: 0,
            buf: String::new(),
            label: path.display().to_string(),
        }
    };
    Ok(EventStream {
        inner,
        t_number,
        count: 0,
        done: false,
    })
}

impl EventStream {
    /// Events yielded so far.
    pub fn count(&self) -> u64 {
        self.count
    }

    fn check(&self, token: u64) -> Result<TokenId> {
        match self.t_number {
            Some(t) => check_token(token, t),
            None => TokenId::try_from(token).map_err(|_| Error::TokenOutOfRange {
                token,
                t_number: TokenId::MAX as usize,
            }),
        }
    }

    fn next_event(&mut self) -> Result<Option<MaskEvent>> {
        match &mut self.inner {
            EventSource::Text {
                reader,
                line,
                buf,
                label,
            } => loop {
                buf.clear();
                if reader.read_line(buf)? == 0 {
                    return Ok(None);
                }
                *line += 1;
                let text = buf.trim_end_matches(['\n', '\r']);
                if text.is_empty() || text.starts_with('#') {
                    continue;
                }
                let loc = format!("{}:{}", label, line);
                let raw = parse_event_line(text).map_err(|reason| Error::malformed(loc, reason))?;
                return self.finish(raw).map(Some);
            },
            EventSource::Binary { reader, offset } => {
                let mut rec = [0u8; EVENT_RECORD];
                let mut filled = 0;
                while filled < EVENT_RECORD {
                    let n = reader.read(&mut rec[filled..])?;
                    if n == 0 {
                        break;
                    }
                    filled += n;
                }
                if filled == 0 {
                    return Ok(None);
                }
                if filled < EVENT_RECORD {
                    return Err(Error::Truncated {
                        expected: *offset + EVENT_RECORD as u64,
                        found: *offset + filled as u64,
                    });
                }
                let at = *offset;
                *offset += EVENT_RECORD as u64;
                let u32_at = |k: usize| u32::from_le_bytes(rec[k..k + 4].try_into().unwrap());
                let kind = ModKind::from_code(u32_at(12)).ok_or_else(|| {
                    Error::malformed(format!("byte offset {at}"), "unknown kind code")
                })?;
                let raw = RawEvent {
                    input: u64::from_le_bytes(rec[0..8].try_into().unwrap()),
                    position: u32_at(8),
                    kind,
                    true_token: u32_at(16) as u64,
                    predicted: u32_at(20) as u64,
                };
                self.finish(raw).map(Some)
            }
        }
    }

    fn finish(&mut self, raw: RawEvent) -> Result<MaskEvent> {
        let ev = MaskEvent {
            input: raw.input,
            position: raw.position,
            kind: raw.kind,
            true_token: self.check(raw.true_token)?,
            predicted: self.check(raw.predicted)?,
        };
        self.count += 1;
        Ok(ev)
    }
}

impl Iterator for EventStream {
    type Item = Result<MaskEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_event() {
            Ok(Some(ev)) => Some(Ok(ev)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

struct RawEvent {
    input: u64,
    position: u32,
    kind: ModKind,
    true_token: u64,
    predicted: u64,
}

fn parse_event_line(line: &str) -> std::result::Result<RawEvent, String> {
    let mut parts = line.split(',');
    let mut next = |what: &str| parts.next().map(str::trim).ok_or(format!("missing {what}"));
    let input = next("input")?;
    let position = next("position")?;
    let kind = next("kind")?;
    let true_token = next("true token")?;
    let predicted = next("predicted token")?;
    if parts.next().is_some() {
        return Err("extra fields".into());
    }
    Ok(RawEvent {
        input: input
            .parse()
            .map_err(|_| format!("bad input id {input:?}"))?,
        position: position
            .parse()
            .map_err(|_| format!("bad position {position:?}"))?,
        kind: kind.parse()?,
        true_token: true_token
            .parse()
            .map_err(|_| format!("bad true token {true_token:?}"))?,
        predicted: predicted
            .parse()
            .map_err(|_| format!("bad predicted token {predicted:?}"))?,
    })
}

/// Reads a whole events file into memory.
pub fn read_events(path: &Path, t_number: Option<usize>) -> Result<Vec<MaskEvent>> {
    open_events(path, t_number)?.collect()
}

pub fn write_events_text(path: &Path, events: &[MaskEvent]) -> Result<()> {
    let mut w = create(path)?;
    for e in events {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.input, e.position, e.kind, e.true_token, e.predicted
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events_binary(path: &Path, events: &[MaskEvent]) -> Result<()> {
    let mut w = create(path)?;
    write_header(&mut w, PayloadKind::Events)?;
    for e in events {
        w.write_all(&e.input.to_le_bytes())?;
        w.write_all(&e.position.to_le_bytes())?;
        w.write_all(&e.kind.code().to_le_bytes())?;
        w.write_all(&e.true_token.to_le_bytes())?;
        w.write_all(&e.predicted.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- confusion

fn text_header(line: &str, kind: &str, loc: &str) -> Result<usize> {
    let parts: Vec<&str> = line.trim_end().split('\t').collect();
    match parts.as_slice() {
        ["#TPLB", k, v, t] if *k == kind => {
            if *v != FORMAT_VERSION.to_string() {
                return Err(Error::BadHeader(format!("{loc}: unsupported version {v}")));
            }
            t.parse()
                .map_err(|_| Error::BadHeader(format!("{loc}: bad t_number {t:?}")))
        }
        _ => Err(Error::BadHeader(format!(
            "{loc}: expected #TPLB {kind} header"
        ))),
    }
}

pub fn write_confusion(path: &Path, m: &ConfusionMatrix) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "#TPLB\tCONFUSION\t{}\t{}", FORMAT_VERSION, m.t_number())?;
    for (r, c, n) in m.triplets() {
        writeln!(w, "{r}\t{c}\t{n}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_confusion(path: &Path) -> Result<ConfusionMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::BadHeader(format!("{}: empty file", path.display())))?;
    let t_number = text_header(&first?, "CONFUSION", &at_line(path, 1))?;
    let mut triplets = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || at_line(path, i + 1);
        let mut parts = line.split('\t');
        let r: u64 = parse_field(parts.next(), "row", &loc)?;
        let c: u64 = parse_field(parts.next(), "col", &loc)?;
        let n: u64 = parse_field(parts.next(), "count", &loc)?;
        if parts.next().is_some() {
            return Err(Error::malformed(loc(), "extra columns"));
        }
        triplets.push((check_token(r, t_number)?, check_token(c, t_number)?, n));
    }
    ConfusionMatrix::from_sorted_triplets(t_number, triplets)
}

// ---------------------------------------------------------------- adjacency

pub fn write_adjacency(path: &Path, adj: &AdjacencyMatrix, participants: &[TokenId]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(
        w,
        "#TPLB\tADJACENCY\t{}\t{}",
        FORMAT_VERSION,
        adj.t_number()
    )?;
    for &(a, b) in adj.edges() {
        writeln!(w, "e\t{a}\t{b}")?;
    }
    let mut is_participant = vec![false; adj.t_number()];
    for &p in participants {
        is_participant[p as usize] = true;
    }
    for (t, _) in is_participant.iter().enumerate().filter(|(_, p)| !**p) {
        writeln!(w, "x\t{t}")?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the graph and its participant list (all tokens not marked `x`).
pub fn read_adjacency(path: &Path) -> Result<(AdjacencyMatrix, Vec<TokenId>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::BadHeader(format!("{}: empty file", path.display())))?;
    let t_number = text_header(&first?, "ADJACENCY", &at_line(path, 1))?;
    let mut edges = Vec::new();
    let mut participant = vec![true; t_number];
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || at_line(path, i + 1);
        let mut parts = line.split('\t');
        match parts.next() {
            Some("e") => {
                let a: u64 = parse_field(parts.next(), "a", &loc)?;
                let b: u64 = parse_field(parts.next(), "b", &loc)?;
                edges.push((check_token(a, t_number)?, check_token(b, t_number)?));
            }
            Some("x") => {
                let t: u64 = parse_field(parts.next(), "token", &loc)?;
                participant[check_token(t, t_number)? as usize] = false;
            }
            _ => return Err(Error::malformed(loc(), "expected 'e' or 'x' record")),
        }
        if parts.next().is_some() {
            return Err(Error::malformed(loc(), "extra columns"));
        }
    }
    let adj = AdjacencyMatrix::from_pairs(t_number, edges)?;
    let participants = (0..t_number as TokenId)
        .filter(|&t| participant[t as usize])
        .collect();
    Ok((adj, participants))
}

// ---------------------------------------------------------------- clusters

pub fn write_clusters(path: &Path, clusters: &ClusterSet, vocab: Option<&Vocab>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# index\tsize\tids\ttokens")?;
    for (k, c) in clusters.clusters().iter().enumerate() {
        let ids: Vec<String> = c.iter().map(u32::to_string).collect();
        let texts: Vec<String> = c
            .iter()
            .map(|&t| match vocab {
                Some(v) => v.text(t).to_string(),
                None => t.to_string(),
            })
            .collect();
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            k,
            c.len(),
            ids.join(","),
            texts.join(" ")
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_clusters(path: &Path, t_number: usize) -> Result<ClusterSet> {
    let mut clusters = Vec::new();
    for item in text_lines(path)? {
        let (n, line) = item?;
        let loc = || at_line(path, n);
        let mut parts = line.split('\t');
        let _index: usize = parse_field(parts.next(), "index", &loc)?;
        let size: usize = parse_field(parts.next(), "size", &loc)?;
        let ids = parts
            .next()
            .ok_or_else(|| Error::malformed(loc(), "missing ids"))?;
        let members = ids
            .split(',')
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| Error::malformed(loc(), format!("bad id {s:?}")))
                    .and_then(|t| check_token(t, t_number))
            })
            .collect::<Result<Vec<_>>>()?;
        if members.len() != size {
            return Err(Error::malformed(loc(), "size does not match member count"));
        }
        clusters.push(members);
    }
    ClusterSet::from_clusters(t_number, clusters)
}

// ---------------------------------------------------------------- APT table

pub fn write_apt_table(path: &Path, apt: &AptTable, vocab: &Vocab) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# token\ttext\tfrequency\tselected\tcorrect\tapt")?;
    for t in 0..apt.t_number() as TokenId {
        let s = apt.selected(t);
        if s == 0 {
            continue;
        }
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            t,
            vocab.text(t),
            vocab.frequency(t),
            s,
            apt.correct(t),
            apt.apt(t).unwrap()
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Re-reads an APT table; ratios are recomputed from the counts.
pub fn read_apt_table(path: &Path, t_number: usize) -> Result<AptTable> {
    let mut selected = vec![0u64; t_number];
    let mut correct = vec![0u64; t_number];
    for item in text_lines(path)? {
        let (n, line) = item?;
        let loc = || at_line(path, n);
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 6 {
            return Err(Error::malformed(loc(), "expected 6 columns"));
        }
        let t: u64 = parse_field(Some(parts[0]), "token", &loc)?;
        let t = check_token(t, t_number)? as usize;
        selected[t] = parse_field(Some(parts[3]), "selected", &loc)?;
        correct[t] = parse_field(Some(parts[4]), "correct", &loc)?;
        if correct[t] > selected[t] {
            return Err(Error::malformed(loc(), "correct exceeds selected"));
        }
    }
    AptTable::from_counts(selected, correct)
}

// ---------------------------------------------------------------- classified inputs

pub fn read_inputs(path: &Path, t_number: usize) -> Result<Vec<ClassifiedInput>> {
    let mut out = Vec::new();
    for item in text_lines(path)? {
        let (n, line) = item?;
        let loc = || at_line(path, n);
        let mut parts = line.splitn(4, ',');
        let input_id: u64 = parse_field(parts.next(), "input id", &loc)?;
        let true_label: u32 = parse_field(parts.next(), "true label", &loc)?;
        let predicted_label: u32 = parse_field(parts.next(), "predicted label", &loc)?;
        let tokens = parts
            .next()
            .ok_or_else(|| Error::malformed(loc(), "missing tokens"))?
            .split_whitespace()
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| Error::malformed(loc(), format!("bad token {s:?}")))
                    .and_then(|t| check_token(t, t_number))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(ClassifiedInput {
            input_id,
            tokens,
            true_label,
            predicted_label,
        });
    }
    Ok(out)
}

pub fn write_inputs(path: &Path, inputs: &[ClassifiedInput]) -> Result<()> {
    let mut w = create(path)?;
    for inp in inputs {
        let toks: Vec<String> = inp.tokens.iter().map(u32::to_string).collect();
        writeln!(
            w,
            "{},{},{},{}",
            inp.input_id,
            inp.true_label,
            inp.predicted_label,
            toks.join(" ")
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Per-label accuracy file, labels `0..n` in order.
pub fn read_label_accuracy(path: &Path) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text_lines(path)? {
        let (n, line) = item?;
        let loc = || at_line(path, n);
        let mut parts = line.split('\t');
        let label: usize = parse_field(parts.next(), "label", &loc)?;
        let acc: f64 = parse_field(parts.next(), "accuracy", &loc)?;
        if label != out.len() {
            return Err(Error::malformed(loc(), "labels must be 0..n in order"));
        }
        out.push(acc);
    }
    Ok(out)
}

pub fn write_label_accuracy(path: &Path, accuracy: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    for (l, a) in accuracy.iter().enumerate() {
        writeln!(w, "{l}\t{a}")?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- embedding

pub fn write_embedding(path: &Path, e: &EmbeddingMatrix) -> Result<()> {
    let mut w = create(path)?;
    write_header(&mut w, PayloadKind::Embedding)?;
    w.write_all(&(e.t_number() as u32).to_le_bytes())?;
    w.write_all(&(e.e_length() as u32).to_le_bytes())?;
    for &x in e.as_slice() {
        w.write_all(&(x as f32).to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embedding(path: &Path) -> Result<EmbeddingMatrix> {
    let bytes = std::fs::read(path)?;
    decode_embedding(&bytes)
}

pub fn decode_embedding(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    parse_header(bytes, PayloadKind::Embedding)?;
    if bytes.len() < 20 {
        return Err(Error::Truncated {
            expected: 20,
            found: bytes.len() as u64,
        });
    }
    let rows = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let expected = 20 + (rows as u64) * (cols as u64) * 4;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::TrailingBytes(found - expected));
    }
    let data = bytes[20..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    EmbeddingMatrix::new(rows, cols, data)
}

// ---------------------------------------------------------------- fields

pub fn write_fields(path: &Path, fields: &[LabelFieldMatrix]) -> Result<()> {
    let mut w = create(path)?;
    write_header(&mut w, PayloadKind::Fields)?;
    for m in fields {
        w.write_all(&m.unit.code().to_le_bytes())?;
        w.write_all(&m.unit_index.to_le_bytes())?;
        w.write_all(&(m.n_labels as u32).to_le_bytes())?;
        for &x in m.values() {
            w.write_all(&(x as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_fields(path: &Path) -> Result<Vec<LabelFieldMatrix>> {
    let bytes = std::fs::read(path)?;
    decode_fields(&bytes)
}

pub fn decode_fields(bytes: &[u8]) -> Result<Vec<LabelFieldMatrix>> {
    parse_header(bytes, PayloadKind::Fields)?;
    let mut at = 12usize;
    let mut out: Vec<LabelFieldMatrix> = Vec::new();
    let total = bytes.len();
    let truncated = |expected: usize| Error::Truncated {
        expected: expected as u64,
        found: total as u64,
    };
    while at < total {
        if total - at < 12 {
            return Err(truncated(at + 12));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[at + k..at + k + 4].try_into().unwrap());
        let unit = Unit::from_code(word(0))
            .ok_or_else(|| Error::malformed(format!("byte offset {at}"), "unknown unit code"))?;
        let unit_index = word(4);
        let n_labels = word(8) as usize;
        if let Some(first) = out.first() {
            if first.n_labels != n_labels {
                return Err(Error::LabelCountMismatch {
                    expected: first.n_labels,
                    found: n_labels,
                });
            }
        }
        let body = n_labels * n_labels * 4;
        let start = at + 12;
        if total - start < body {
            return Err(truncated(start + body));
        }
        let values = bytes[start..start + body]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        out.push(LabelFieldMatrix::new(unit, unit_index, n_labels, values)?);
        at = start + body;
    }
    Ok(out)
}
