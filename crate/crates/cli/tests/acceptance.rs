//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{bfs_components, binomial_sigma, brute_diag_noise, rand_index, TestRng};
use tokscope::confidence::{self, BinSpec, ConfidenceAxis};
use tokscope::confusion::{self, ThresholdConfig};
use tokscope::synth::{self, EmbeddingSpec, InputsSpec, KvSpec, PlantedSpec};
use tokscope::{
    apt, io, percolation, similarity, snp, AdjacencyMatrix, BinaryMatrix, BinaryProvenance,
    EmbeddingMatrix, LabelFieldMatrix, TokenId, Unit,
};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let took = start.elapsed();
    check(
        took < limit,
        format!("{detail}; {:.2?} (limit {limit:?})", took),
    )
}

fn rounding(printed: &str) -> (f64, f64) {
    let v: f64 = printed.parse().unwrap();
    let decimals = printed.split('.').nth(1).map_or(0, str::len);
    let h = if printed.contains('.') {
        0.5 * 10f64.powi(-(decimals as i32))
    } else {
        0.0
    };
    (v - h, v + h)
}

fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

// ---------------------------------------------------------------- published tables

/// 64-label blocks 6..1: (Diag, N_C, C_S, n, SNR).
const SIXTY_FOUR: [(&str, &str, &str, &str, &str); 6] = [
    ("1.49", "1.34", "1.11", "12.5", "7.63"),
    ("1.57", "1.32", "1.19", "16.7", "6.01"),
    ("1.96", "1.40", "1.41", "30.9", "4.05"),
    ("2.49", "1.55", "1.61", "53.7", "2.97"),
    ("2.62", "1.53", "1.71", "70.7", "2.38"),
    ("3.46", "1.59", "2.17", "151.2", "1.46"),
];

/// 14-label blocks 6..1: (Diag, N_C, C_S).
const FOURTEEN: [(&str, &str, &str); 6] = [
    ("1.3", "1.2", "1.1"),
    ("1.4", "1.2", "1.2"),
    ("1.5", "1.2", "1.2"),
    ("1.7", "1.2", "1.4"),
    ("1.8", "1.2", "1.5"),
    ("2.3", "1.3", "1.8"),
];

/// Twelve heads: (Diag, N_C, C_S, n).
const HEADS: [(&str, &str, &str, usize); 12] = [
    ("23", "23", "1.00", 3),
    ("29", "28", "1.04", 4),
    ("12", "10", "1.20", 16),
    ("33", "32", "1.03", 10),
    ("21", "21", "1.00", 3),
    ("22", "22", "1.00", 4),
    ("23", "23", "1.00", 2),
    ("25", "25", "1.00", 0),
    ("15", "14", "1.07", 3),
    ("11", "10", "1.10", 22),
    ("7", "7", "1.00", 1),
    ("27", "26", "1.04", 3),
];

fn snr_table_consistency() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut ok = true;
    for (block, (d, _, _, n, s)) in (1..=6).rev().zip(SIXTY_FOUR) {
        let (dl, dh) = rounding(d);
        let (nl, nh) = rounding(n);
        let point = snp::snr(64, d.parse().unwrap(), n.parse().unwrap());
        let range = (snp::snr(64, dl, nh), snp::snr(64, dh, nl));
        let hit = overlaps(range, rounding(s));
        ok &= hit;
        notes.push(format!("b{block} {point:.3}/{s}"));
    }
    let exact = snp::snr(64, 1.49, 12.5);
    ok &= (exact - 7.6288).abs() < 1e-12;
    within(
        Duration::from_secs(1),
        start,
        format!("{} ", notes.join(", ")),
    )
    .and_then(|d| check(ok, d))
}

fn head_stats() -> Vec<snp::SnpStats> {
    HEADS
        .iter()
        .enumerate()
        .map(|(k, &(d, c, _, n))| {
            let (diag, n_c): (usize, usize) = (d.parse().unwrap(), c.parse().unwrap());
            snp::SnpStats {
                unit_index: k as u32,
                diag,
                n_c,
                c_s: Some(diag as f64 / n_c as f64),
                noise: n,
                permutation: Vec::new(),
                clusters: Vec::new(),
            }
        })
        .collect()
}

fn twelve_head_aggregation() -> Outcome {
    let start = Instant::now();
    let agg = snp::aggregate(&head_stats(), 64).map_err(|e| e.to_string())?;
    let got = (
        format!("{:.1}", agg.mean_diag),
        format!("{:.1}", agg.mean_n_c),
        format!("{:.2}", agg.mean_c_s.unwrap_or(f64::NAN)),
        format!("{:.2}", agg.mean_noise),
    );
    let want = ("20.7".into(), "20.1".into(), "1.04".into(), "5.92".into());
    let detail = format!("Ave Diag {} N_C {} C_S {} n {}", got.0, got.1, got.2, got.3);
    within(Duration::from_secs(1), start, detail).and_then(|d| check(got == want, d))
}

fn identity_holds(s: &snp::SnpStats) -> bool {
    let sizes: usize = s.clusters.iter().map(Vec::len).sum();
    let ratio = match s.c_s {
        Some(c) => s.n_c > 0 && c == s.diag as f64 / s.n_c as f64,
        None => s.diag == 0 && s.n_c == 0,
    };
    ratio && sizes == s.diag && s.clusters.len() == s.n_c
}

fn diag_identity() -> Outcome {
    // every diagonalize output, exactly
    let mut rng = TestRng::new(41);
    let mut units = 0;
    let mut broken = 0;
    for _ in 0..2000 {
        let n = 1 + rng.below(40);
        let th = 0.3 + 0.6 * rng.uniform();
        let v: Vec<f64> = (0..n * n).map(|_| rng.uniform()).collect();
        let m = LabelFieldMatrix::new(Unit::Node, 0, n, v).unwrap();
        let s = snp::diagonalize_fields(&m, th).map_err(|e| e.to_string())?;
        units += 1;
        broken += usize::from(!identity_holds(&s));
    }
    let mut kv = KvSpec::default();
    kv.set("n_units", "768");
    kv.set("blocks", "1..20");
    let spec = synth::FieldsSpec::from_kv(&kv, 3).map_err(|e| e.to_string())?;
    let (fields, _) = synth::gen_fields(&spec).map_err(|e| e.to_string())?;
    for f in &fields {
        let s = snp::diagonalize_fields(f, 0.6).map_err(|e| e.to_string())?;
        units += 1;
        broken += usize::from(!identity_holds(&s));
    }

    // published rows, within printed rounding
    let product_matches = |d: &str, c: &str, s: &str| {
        let (cl, ch) = rounding(c);
        let (sl, sh) = rounding(s);
        overlaps((cl * sl, ch * sh), rounding(d))
    };
    let mut rows = 0;
    let mut off = Vec::new();
    for (d, c, s, _, _) in SIXTY_FOUR {
        rows += 1;
        if !product_matches(d, c, s) {
            off.push(format!("{c}x{s} vs {d}"));
        }
    }
    for (d, c, s) in FOURTEEN {
        rows += 1;
        if !product_matches(d, c, s) {
            off.push(format!("{c}x{s} vs {d}"));
        }
    }
    for (d, c, s, _) in HEADS {
        rows += 1;
        if !product_matches(d, c, s) {
            off.push(format!("{c}x{s} vs {d}"));
        }
    }
    // the average row averages per-head ratios, so its C_S is not Diag / N_C
    let ave_row = product_matches("20.7", "20.1", "1.04");
    let detail = format!(
        "{units} units, {broken} violations; {rows} block/head rows, {} off{}; \
         average-of-ratios row {} (its C_S 1.04 is reproduced exactly by aggregation)",
        off.len(),
        if off.is_empty() {
            String::new()
        } else {
            format!(" [{}]", off.join("; "))
        },
        if ave_row {
            "also consistent"
        } else {
            "not a product row, excluded"
        },
    );
    check(broken == 0 && off.is_empty(), detail)
}

fn to_binary(b: &[Vec<bool>]) -> BinaryMatrix {
    let rows = b
        .iter()
        .map(|r| (0..r.len() as u32).filter(|&j| r[j as usize]).collect())
        .collect();
    BinaryMatrix::from_rows(b.len(), rows, BinaryProvenance::Threshold(0.5)).unwrap()
}

fn diagonalize_oracle() -> Outcome {
    let mut rng = TestRng::new(7);
    let trials = 600;
    let mut mismatches = 0;
    for k in 0..trials {
        let n = 1 + k % 6;
        let density = rng.uniform();
        let b: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..n).map(|_| rng.uniform() < density).collect())
            .collect();
        let s = snp::diagonalize(&to_binary(&b)).map_err(|e| e.to_string())?;
        mismatches += usize::from((s.diag, s.noise) != brute_diag_noise(&b));
    }
    check(
        mismatches == 0,
        format!("{trials} matrices, L <= 6, {mismatches} mismatches"),
    )
}

fn percolation_oracle() -> Outcome {
    let mut rng = TestRng::new(8);
    let trials = 150;
    let mut mismatches = 0;
    let mut largest = 0;
    for _ in 0..trials {
        let n = 1 + rng.below(500);
        let participants: Vec<TokenId> =
            (0..n as TokenId).filter(|_| rng.uniform() < 0.8).collect();
        let mut edges = Vec::new();
        if participants.len() > 1 {
            let m = (rng.uniform() * 1.5 * participants.len() as f64) as usize;
            for _ in 0..m {
                let a = participants[rng.below(participants.len())];
                let b = participants[rng.below(participants.len())];
                if a != b {
                    edges.push((a.min(b), a.max(b)));
                }
            }
        }
        let adj = AdjacencyMatrix::from_pairs(n, edges.iter().copied()).unwrap();
        let got = percolation::percolate(&adj, &participants).map_err(|e| e.to_string())?;
        let want = bfs_components(&participants, &edges);
        largest = largest.max(want.first().map_or(0, Vec::len));
        mismatches += usize::from(got.clusters() != want.as_slice());
    }
    check(
        mismatches == 0,
        format!("{trials} graphs up to 500 nodes (largest component {largest}), {mismatches} mismatches"),
    )
}

fn planted_recovery() -> Outcome {
    let start = Instant::now();
    let trials = 20;
    let mut exact = 0;
    let mut worst = 1.0f64;
    for seed in 0..trials {
        let mut kv = KvSpec::default();
        kv.set("t_number", "1000");
        kv.set("n_clusters", "60");
        kv.set("cluster_size", "3..10");
        kv.set("p_correct", "0.5");
        kv.set("p_within", "1");
        kv.set("profile", "uniform");
        let spec = PlantedSpec::from_kv(&kv, seed).map_err(|e| e.to_string())?;
        let events = synth::gen_events(&spec, 100_000, 128).map_err(|e| e.to_string())?;
        let m = confusion::build_confusion(&events, 1000).map_err(|e| e.to_string())?;
        let n = confusion::normalize_confusion(&m).map_err(|e| e.to_string())?;
        let adj = confusion::adjacency(&confusion::binarize_threshold(
            &n,
            ThresholdConfig::default(),
        ));
        let got = percolation::percolate(&adj, &n.retained_rows()).map_err(|e| e.to_string())?;
        let truth = tokscope::ClusterSet::from_clusters(1000, {
            let mut all = spec.clusters.clone();
            let idx = spec.cluster_index();
            all.extend(
                (0..1000)
                    .filter(|&t| idx[t as usize].is_none())
                    .map(|t| vec![t]),
            );
            all
        })
        .unwrap();
        let labels = |s: &tokscope::ClusterSet| -> Vec<usize> {
            (0..1000)
                .map(|t| s.cluster_of(t).unwrap_or(usize::MAX - t as usize))
                .collect()
        };
        let ri = rand_index(&labels(&got), &labels(&truth));
        worst = worst.min(ri);
        exact += usize::from(ri == 1.0);
    }
    let detail = format!(
        "{exact}/{trials} trials with Rand index 1.0 (worst {worst:.6}); 1000 tokens, 1e5 events, p_correct 0.5, p_within 1"
    );
    within(Duration::from_secs(30), start, detail)
        .and_then(|d| check(exact * 100 >= 95 * trials as usize, d))
}

fn top_q_recovery() -> Outcome {
    let partition = |e: &EmbeddingMatrix, q: usize| -> Vec<Vec<TokenId>> {
        let b = similarity::top_q_binarize(e, q).unwrap();
        let all: Vec<TokenId> = (0..e.t_number() as TokenId).collect();
        percolation::percolate(&confusion::adjacency(&b), &all)
            .unwrap()
            .clusters()
            .to_vec()
    };
    let want: Vec<Vec<TokenId>> = (0..3).map(|k| (k * 10..k * 10 + 10).collect()).collect();
    let mut recovered = 0;
    let mut runs = 0;
    for seed in 0..5 {
        for d in [9, 64, 768] {
            let spec = EmbeddingSpec {
                seed,
                t_number: 30,
                e_length: d,
                clusters: want.clone(),
                within_cos: 0.9,
                between_cos_max: 0.2,
            };
            let e = synth::gen_embedding(&spec).map_err(|e| e.to_string())?;
            for q in [2, 3] {
                runs += 1;
                recovered += usize::from(partition(&e, q) == want);
            }
        }
    }
    let mut rng = TestRng::new(19);
    let mut refined = 0;
    for _ in 0..50 {
        let n = 20 + rng.below(60);
        let d = 2 + rng.below(12);
        let e = EmbeddingMatrix::new(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap();
        let parts: Vec<_> = (1..6).map(|q| partition(&e, q)).collect();
        let ok = parts.windows(2).all(|w| {
            let mut owner = vec![usize::MAX; n];
            for (k, c) in w[1].iter().enumerate() {
                c.iter().for_each(|&t| owner[t as usize] = k);
            }
            w[0].iter()
                .all(|c| c.iter().all(|&t| owner[t as usize] == owner[c[0] as usize]))
        });
        refined += usize::from(ok);
    }
    check(
        recovered == runs && refined == 50,
        format!("{recovered}/{runs} planted recoveries at q = 2, 3; refinement on {refined}/50 matrices"),
    )
}

fn apt_calibration() -> Outcome {
    let mut kv = KvSpec::default();
    kv.set("t_number", "1000");
    kv.set("n_clusters", "60");
    kv.set("p_correct", "0.05..0.95");
    kv.set("profile", "uniform");
    let spec = PlantedSpec::from_kv(&kv, 23).map_err(|e| e.to_string())?;
    let events = synth::gen_events(&spec, 100_000, 128).map_err(|e| e.to_string())?;
    let vocab = synth::synth_vocab(&spec.frequency).map_err(|e| e.to_string())?;
    let table = apt::compute_apt(&events, &vocab).map_err(|e| e.to_string())?;
    let mut inside = 0;
    let mut covered = 0;
    for t in 0..1000u32 {
        let n = table.selected(t);
        if n == 0 {
            continue;
        }
        covered += 1;
        let p = spec.p_correct[t as usize];
        inside += usize::from(
            (table.correct(t) as f64 - n as f64 * p).abs() <= 3.0 * binomial_sigma(n, p),
        );
    }
    kv.set("p_correct", "1");
    let perfect = PlantedSpec::from_kv(&kv, 24).map_err(|e| e.to_string())?;
    let events = synth::gen_events(&perfect, 100_000, 128).map_err(|e| e.to_string())?;
    let mean = apt::compute_apt(&events, &vocab)
        .map_err(|e| e.to_string())?
        .mean_apt();
    let frac = inside as f64 / covered as f64;
    check(
        frac >= 0.99 && mean == 1.0,
        format!(
            "{inside}/{covered} tokens inside 3 sigma ({:.2}%); perfect stream <APT> = {mean}",
            100.0 * frac
        ),
    )
}

fn confidence_conservation() -> Outcome {
    let mut rng = TestRng::new(31);
    let t_number = 1000;
    let selected: Vec<u64> = (0..t_number).map(|_| 1 + rng.below(200) as u64).collect();
    let correct: Vec<u64> = selected
        .iter()
        .map(|&s| rng.below(s as usize + 1) as u64)
        .collect();
    let table = apt::AptTable::from_counts(selected, correct).map_err(|e| e.to_string())?;
    let vocab = synth::synth_vocab(&vec![1.0; t_number]).map_err(|e| e.to_string())?;
    let mut kv = KvSpec::default();
    kv.set("t_number", t_number.to_string());
    kv.set("n_inputs", "10000");
    kv.set("accuracy", "0.8");
    let inputs = synth::gen_inputs(&InputsSpec::from_kv(&kv, 32).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let bins = confidence::confidence_bins(
        &inputs,
        &table,
        &vocab,
        ConfidenceAxis::AptAve,
        BinSpec::Width(0.05),
    )
    .map_err(|e| e.to_string())?;
    let n_correct = inputs.iter().filter(|i| i.is_correct()).count() as u64;
    let conserved = bins.n_binned() == inputs.len() as u64 && bins.unbinned == 0;
    let global = bins.global_confidence();
    let exact = global == Some(n_correct as f64 / inputs.len() as f64);
    let p = global.unwrap_or(f64::NAN);
    let used: Vec<_> = bins.bins.iter().filter(|b| b.total() > 0).collect();
    let flat = used
        .iter()
        .filter(|b| {
            (b.n_correct as f64 - b.total() as f64 * p).abs() <= 3.0 * binomial_sigma(b.total(), p)
        })
        .count();
    check(
        conserved && exact && flat == used.len(),
        format!(
            "{} of 10000 inputs binned, global {:.4} = overall accuracy: {exact}; {flat}/{} occupied bins within 3 sigma",
            bins.n_binned(),
            p,
            used.len()
        ),
    )
}

// ---------------------------------------------------------------- CLI runs

fn tokscope(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tokscope"))
        .current_dir(dir)
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env_remove("TOKSCOPE_THREADS")
        .env_remove("RUST_LOG")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "tokscope {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn write_spec(dir: &Path, name: &str, body: &str) -> Result<(), String> {
    fs::write(dir.join(name), body).map_err(|e| e.to_string())
}

/// Runs every subcommand on synthetic data under `root` with the given
/// thread count.
fn full_suite(root: &Path, threads: &str) -> Result<(), String> {
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    write_spec(
        root,
        "fields.spec",
        "n_units=48\nunit=HEAD\nblocks=1..6\nblock_size=1..3\n",
    )?;
    write_spec(root, "embedding.spec", "t_number=300\ne_length=768\n")?;
    let t = ["--threads", threads];
    let run = |args: &[&str]| {
        let mut all: Vec<&str> = args.to_vec();
        all.extend(t);
        tokscope(root, &all)
    };
    run(&["synth", "--kind", "events", "--seed", "1", "--out", "ev"])?;
    run(&[
        "synth", "--kind", "events", "--seed", "1", "--format", "binary", "--out", "evb",
    ])?;
    run(&[
        "synth",
        "--kind",
        "embedding",
        "--spec",
        "embedding.spec",
        "--seed",
        "2",
        "--out",
        "emb",
    ])?;
    run(&[
        "synth",
        "--kind",
        "fields",
        "--spec",
        "fields.spec",
        "--seed",
        "3",
        "--out",
        "fld",
    ])?;
    run(&["synth", "--kind", "inputs", "--seed", "4", "--out", "inp"])?;
    let o = ["--out", "out"];
    let with_out = |args: &[&str]| {
        let mut all: Vec<&str> = args.to_vec();
        all.extend(o);
        run(&all)
    };
    with_out(&[
        "confuse",
        "--events",
        "evb/events.bin",
        "--vocab",
        "ev/vocab.tsv",
    ])?;
    with_out(&[
        "topk",
        "--confusion",
        "out/confusion.tsv",
        "--vocab",
        "ev/vocab.tsv",
    ])?;
    with_out(&[
        "clusters",
        "--confusion",
        "out/confusion.tsv",
        "--vocab",
        "ev/vocab.tsv",
    ])?;
    with_out(&[
        "apt",
        "--events",
        "ev/events.txt",
        "--vocab",
        "ev/vocab.tsv",
        "--clusters",
        "out/clusters.tsv",
    ])?;
    with_out(&[
        "cossim",
        "--embedding",
        "emb/embedding.bin",
        "--mode",
        "hist",
    ])?;
    with_out(&[
        "cossim",
        "--embedding",
        "emb/embedding.bin",
        "--mode",
        "topq",
        "--abtt-r",
        "3",
    ])?;
    with_out(&[
        "cossim",
        "--embedding",
        "emb/embedding.bin",
        "--mode",
        "topk",
        "--csls-n",
        "5",
    ])?;
    with_out(&[
        "confidence",
        "--inputs",
        "inp/inputs.txt",
        "--apt",
        "out/apt.tsv",
        "--vocab",
        "inp/vocab.tsv",
    ])?;
    with_out(&[
        "snp",
        "--fields",
        "fld/fields.bin",
        "--accuracy",
        "fld/accuracy.tsv",
    ])?;
    with_out(&["report", "out"])?;
    Ok(())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn determinism(scratch: &Path) -> Outcome {
    let one = scratch.join("threads1");
    let eight = scratch.join("threads8");
    full_suite(&one, "1")?;
    full_suite(&eight, "8")?;
    let a = tree(&one);
    let b = tree(&eight);
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    let subcommands: std::collections::BTreeSet<String> = a
        .keys()
        .filter_map(|k| {
            let name = k.file_name()?.to_str()?;
            let stem = name.strip_suffix(".manifest.json")?;
            Some(stem.split('-').next().unwrap().to_string())
        })
        .collect();
    check(
        differing.is_empty() && subcommands.len() == 9,
        format!(
            "{} files from {} subcommands compared, {} differ{}",
            a.len(),
            subcommands.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(": {}", differing.join(", "))
            }
        ),
    )
}

fn performance(scratch: &Path) -> Outcome {
    let dir = scratch.join("perf");
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    write_spec(
        &dir,
        "events.spec",
        "t_number=30522\nn_clusters=2000\nn_events=10000000\n",
    )?;
    tokscope(
        &dir,
        &[
            "synth",
            "--kind",
            "events",
            "--spec",
            "events.spec",
            "--seed",
            "5",
            "--format",
            "binary",
            "--out",
            "ev",
        ],
    )?;
    let start = Instant::now();
    tokscope(
        &dir,
        &[
            "confuse",
            "--events",
            "ev/events.bin",
            "--vocab",
            "ev/vocab.tsv",
            "--out",
            "out",
        ],
    )?;
    tokscope(
        &dir,
        &[
            "clusters",
            "--confusion",
            "out/confusion.tsv",
            "--vocab",
            "ev/vocab.tsv",
            "--out",
            "out",
        ],
    )?;
    let pipeline = start.elapsed();

    let mut rng = TestRng::new(6);
    let (n, d) = (30_522, 768);
    let e = EmbeddingMatrix::new(n, d, (0..n * d).map(|_| rng.normal()).collect()).unwrap();
    io::write_embedding(&dir.join("embedding.bin"), &e).map_err(|e| e.to_string())?;
    drop(e);
    let start = Instant::now();
    tokscope(
        &dir,
        &[
            "cossim",
            "--embedding",
            "embedding.bin",
            "--mode",
            "hist",
            "--out",
            "out",
        ],
    )?;
    let hist = start.elapsed();

    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    check(
        pipeline < Duration::from_secs(60) && hist < Duration::from_secs(120),
        format!(
            "1e7 events x 30522 tokens confusion-to-clusters {pipeline:.2?} (limit 60s); \
             30522 x 768 similarity histogram {hist:.2?} (limit 120s); {cores} core(s)"
        ),
    )
}

fn main() {
    let scratch = tempfile::tempdir().expect("scratch directory");
    let criteria: Vec<Criterion> = vec![
        ("snr-table-consistency", Box::new(snr_table_consistency)),
        ("twelve-head-aggregation", Box::new(twelve_head_aggregation)),
        ("diag-identity", Box::new(diag_identity)),
        ("diagonalize-oracle", Box::new(diagonalize_oracle)),
        ("percolation-oracle", Box::new(percolation_oracle)),
        ("planted-confusion-recovery", Box::new(planted_recovery)),
        ("top-q-recovery", Box::new(top_q_recovery)),
        ("apt-calibration", Box::new(apt_calibration)),
        ("confidence-conservation", Box::new(confidence_conservation)),
        (
            "thread-determinism",
            Box::new(|| determinism(scratch.path())),
        ),
        ("performance", Box::new(|| performance(scratch.path()))),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, run) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
