use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde_json::json;
use tokscope::io;
use tokscope::rng::CounterRng;
use tokscope::snp;
use tokscope::synth::{self, FrequencyProfile, KvSpec};

use super::Ctx;
use crate::error::{CliError, CliResult};
use crate::output::{json_num, load, Role, Run};

/// Stream of the synthetic per-label accuracy written next to field files.
const STREAM_ACCURACY: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Events,
    Embedding,
    Fields,
    Inputs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EventFormat {
    Text,
    Binary,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    /// `key=value` generator spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides a `seed` entry of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Encoding of generated events.
    #[arg(long, value_enum, default_value = "text")]
    pub format: EventFormat,
}

fn known_keys(kind: Kind) -> Vec<&'static str> {
    let mut keys = match kind {
        Kind::Events => synth::EVENT_SPEC_KEYS.to_vec(),
        Kind::Embedding => synth::EMBEDDING_SPEC_KEYS.to_vec(),
        Kind::Fields => synth::FIELDS_SPEC_KEYS.to_vec(),
        Kind::Inputs => synth::INPUTS_SPEC_KEYS.to_vec(),
    };
    keys.push("seed");
    keys
}

pub fn run(a: &SynthArgs, ctx: &Ctx) -> CliResult<()> {
    let kind = a.kind.to_possible_value().expect("no skipped variants");
    let kind_name = kind.get_name();
    let mut run = Run::new("synth", &format!("synth-{kind_name}"), &ctx.out)?;
    let kv = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::input("io", format!("{}: {e}", p.display())))?;
            run.input("spec", p)?;
            load(p, |_| KvSpec::parse(&text))?
        }
        None => KvSpec::default(),
    };
    kv.check_keys(&known_keys(a.kind))?;
    let seed = match a.seed {
        Some(s) => s,
        None => kv.get("seed", 0u64)?,
    };
    run.param("kind", kind_name);
    run.param("seed", seed);
    for (k, v) in kv.entries().filter(|(k, _)| *k != "seed") {
        run.param(&format!("spec.{k}"), v);
    }

    match a.kind {
        Kind::Events => events(a, &kv, seed, &mut run)?,
        Kind::Embedding => embedding(&kv, seed, &mut run)?,
        Kind::Fields => fields(&kv, seed, &mut run)?,
        Kind::Inputs => inputs(&kv, seed, &mut run)?,
    }
    run.finish()?;
    Ok(())
}

fn events(a: &SynthArgs, kv: &KvSpec, seed: u64, run: &mut Run) -> CliResult<()> {
    let spec = synth::PlantedSpec::from_kv(kv, seed)?;
    let n_events: u64 = kv.get("n_events", 100_000)?;
    let seq_len: u32 = kv.get("seq_len", 128)?;
    let events = synth::gen_events(&spec, n_events, seq_len)?;
    let vocab = synth::synth_vocab(&spec.frequency)?;
    io::write_vocab(&run.path("vocab.tsv"), &vocab)?;
    run.record("vocab.tsv", Role::Data)?;
    let name = match a.format {
        EventFormat::Text => {
            io::write_events_text(&run.path("events.txt"), &events)?;
            "events.txt"
        }
        EventFormat::Binary => {
            io::write_events_binary(&run.path("events.bin"), &events)?;
            "events.bin"
        }
    };
    run.record(name, Role::Data)?;
    run.param("format", name.rsplit('.').next().unwrap_or(""));
    let truth = json!({
        "seed": seed,
        "t_number": spec.t_number,
        "n_events": n_events,
        "seq_len": seq_len,
        "p_within": spec.p_within,
        "mask_split": spec.mask_split,
        "clusters": spec.clusters,
        "p_correct": spec.p_correct,
    });
    run.write_with("events.truth.json", Role::Data, |w| {
        serde_json::to_writer(&mut *w, &truth)?;
        writeln!(w)
    })
}

fn embedding(kv: &KvSpec, seed: u64, run: &mut Run) -> CliResult<()> {
    let spec = synth::EmbeddingSpec::from_kv(kv, seed)?;
    let e = synth::gen_embedding(&spec)?;
    io::write_embedding(&run.path("embedding.bin"), &e)?;
    run.record("embedding.bin", Role::Data)?;
    let vocab = synth::synth_vocab(&FrequencyProfile::Uniform.weights(spec.t_number))?;
    io::write_vocab(&run.path("vocab.tsv"), &vocab)?;
    run.record("vocab.tsv", Role::Data)?;
    let truth = json!({
        "seed": seed,
        "t_number": spec.t_number,
        "e_length": spec.e_length,
        "within_cos": spec.within_cos,
        "between_cos_max": spec.between_cos_max,
        "clusters": spec.clusters,
    });
    run.write_with("embedding.truth.json", Role::Data, |w| {
        serde_json::to_writer(&mut *w, &truth)?;
        writeln!(w)
    })
}

fn fields(kv: &KvSpec, seed: u64, run: &mut Run) -> CliResult<()> {
    let spec = synth::FieldsSpec::from_kv(kv, seed)?;
    let (fields, truth) = synth::gen_fields(&spec)?;
    io::write_fields(&run.path("fields.bin"), &fields)?;
    run.record("fields.bin", Role::Data)?;

    // Accuracy rising with how often a label sits in a planted block.
    let mut appearances = vec![0usize; spec.n_labels];
    for t in &truth {
        for &l in t.blocks.iter().flatten() {
            appearances[l as usize] += 1;
        }
    }
    let top = appearances.iter().copied().max().unwrap_or(0).max(1) as f64;
    let root = CounterRng::new(seed).split(STREAM_ACCURACY);
    let accuracy: Vec<f64> = appearances
        .iter()
        .enumerate()
        .map(|(l, &n)| {
            let mut rng = root.split(l as u64);
            (0.4 + 0.4 * n as f64 / top + 0.1 * (rng.uniform() - 0.5)).clamp(0.0, 1.0)
        })
        .collect();
    io::write_label_accuracy(&run.path("accuracy.tsv"), &accuracy)?;
    run.record("accuracy.tsv", Role::Data)?;

    let mean = |f: &dyn Fn(&synth::FieldTruth) -> usize| {
        truth.iter().map(|t| f(t) as f64).sum::<f64>() / truth.len().max(1) as f64
    };
    let (diag, n_c, noise) = (mean(&|t| t.diag), mean(&|t| t.n_c), mean(&|t| t.noise));
    let units: Vec<_> = truth
        .iter()
        .map(|t| {
            json!({
                "unit_index": t.unit_index,
                "blocks": t.blocks,
                "diag": t.diag,
                "n_c": t.n_c,
                "noise": t.noise,
            })
        })
        .collect();
    let doc = json!({
        "seed": seed,
        "unit": spec.unit.as_str(),
        "n_units": spec.n_units,
        "n_labels": spec.n_labels,
        "noise_rate": spec.noise_rate,
        "threshold": snp::DEFAULT_THRESHOLD,
        "mean_diag": diag,
        "mean_n_c": n_c,
        "mean_noise": noise,
        "snr": json_num(Some(snp::snr(spec.n_labels, diag, noise))),
        "units": units,
    });
    run.write_with("fields.truth.json", Role::Data, |w| {
        serde_json::to_writer(&mut *w, &doc)?;
        writeln!(w)
    })
}

fn inputs(kv: &KvSpec, seed: u64, run: &mut Run) -> CliResult<()> {
    let spec = synth::InputsSpec::from_kv(kv, seed)?;
    let inputs = synth::gen_inputs(&spec)?;
    io::write_inputs(&run.path("inputs.txt"), &inputs)?;
    run.record("inputs.txt", Role::Data)?;
    let vocab = synth::synth_vocab(&spec.profile.weights(spec.t_number))?;
    io::write_vocab(&run.path("vocab.tsv"), &vocab)?;
    run.record("vocab.tsv", Role::Data)?;
    let correct = inputs.iter().filter(|i| i.is_correct()).count();
    let doc = json!({
        "seed": seed,
        "t_number": spec.t_number,
        "n_inputs": spec.n_inputs,
        "n_labels": spec.n_labels,
        "accuracy": spec.accuracy,
        "n_correct": correct,
    });
    run.write_with("inputs.truth.json", Role::Data, |w| {
        serde_json::to_writer(&mut *w, &doc)?;
        writeln!(w)
    })
}
