mod common;

use common::{brute_diag_noise, TestRng};
use proptest::prelude::*;
use tokscope::snp::{self, SnpStats};
use tokscope::synth::{self, FieldsSpec, KvSpec};
use tokscope::{BinaryMatrix, BinaryProvenance, LabelFieldMatrix, Unit};

fn boolean(b: &[Vec<bool>]) -> BinaryMatrix {
    let rows = b
        .iter()
        .map(|r| (0..r.len() as u32).filter(|&j| r[j as usize]).collect())
        .collect();
    BinaryMatrix::from_rows(b.len(), rows, BinaryProvenance::Threshold(0.5)).unwrap()
}

fn field(n: usize, values: Vec<f64>) -> LabelFieldMatrix {
    LabelFieldMatrix::new(Unit::Node, 0, n, values).unwrap()
}

fn check_identity(s: &SnpStats) {
    let sizes: usize = s.clusters.iter().map(Vec::len).sum();
    assert_eq!(sizes, s.diag);
    assert_eq!(s.clusters.len(), s.n_c);
    match s.c_s {
        Some(c) => assert_eq!(c * s.n_c as f64, s.diag as f64),
        None => assert_eq!(s.diag, 0),
    }
}

#[test]
fn diagonalize_matches_exhaustive_permutations() {
    let mut rng = TestRng::new(11);
    let mut mismatches = 0;
    for trial in 0..600 {
        let n = 1 + trial % 6;
        let density = rng.uniform();
        let b: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..n).map(|_| rng.uniform() < density).collect())
            .collect();
        let s = snp::diagonalize(&boolean(&b)).unwrap();
        check_identity(&s);
        if (s.diag, s.noise) != brute_diag_noise(&b) {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn permutation_is_a_bijection_placing_diag_ones() {
    let mut rng = TestRng::new(5);
    for _ in 0..200 {
        let n = 2 + rng.below(10);
        let b: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..n).map(|_| rng.uniform() < 0.3).collect())
            .collect();
        let s = snp::diagonalize(&boolean(&b)).unwrap();
        let mut seen = vec![false; n];
        for &c in &s.permutation {
            assert!(!std::mem::replace(&mut seen[c as usize], true));
        }
        let on_diag = (0..n).filter(|&d| b[d][s.permutation[d] as usize]).count();
        assert_eq!(on_diag, s.diag);
    }
}

#[test]
fn clip_is_strict_elementwise_comparison() {
    let mut rng = TestRng::new(9);
    let n = 9;
    let values: Vec<f64> = (0..n * n).map(|_| rng.uniform()).collect();
    let m = field(n, values.clone());
    let b = snp::clip(&m, 0.6);
    for i in 0..n {
        for j in 0..n {
            assert_eq!(b.contains(i as u32, j as u32), values[i * n + j] > 0.6);
        }
    }
    let edge = field(2, vec![0.6, 0.61, 0.0, 1.0]);
    let b = snp::clip(&edge, 0.6);
    assert!(!b.contains(0, 0));
    assert!(b.contains(0, 1));
}

#[test]
fn negative_fields_pass_through_normalization() {
    let m = field(2, vec![-2.0, 1.0, 0.5, 4.0]);
    let n = snp::normalize_fields(&m).unwrap();
    assert_eq!(n.values(), &[-0.5, 0.25, 0.125, 1.0]);
    assert!(snp::normalize_fields(&field(2, vec![0.0; 4])).is_err());
    assert!(snp::normalize_fields(&field(2, vec![-1.0; 4])).is_err());
}

#[test]
fn raising_the_threshold_can_add_noise() {
    // (1,0) drops out at 0.68, leaving row 0 with two ones but room for only
    // one of them on the diagonal.
    let m = field(2, vec![0.7, 1.0, 0.65, 0.0]);
    let low = snp::diagonalize_fields(&m, 0.6).unwrap();
    let high = snp::diagonalize_fields(&m, 0.68).unwrap();
    assert_eq!((low.diag, low.noise), (2, 0));
    assert_eq!((high.diag, high.noise), (1, 1));
}

fn relabel(m: &LabelFieldMatrix, sigma: &[usize]) -> LabelFieldMatrix {
    let n = m.n_labels;
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[sigma[i] * n + sigma[j]] = m.get(i, j);
        }
    }
    field(n, v)
}

fn distinct_field() -> impl Strategy<Value = (LabelFieldMatrix, Vec<usize>, f64)> {
    (2usize..14, 0.3f64..0.9).prop_flat_map(|(n, th)| {
        (
            proptest::collection::vec(0u32..1_000_000, n * n),
            Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            Just(th),
        )
            .prop_map(move |(raw, sigma, th)| {
                // distinct values: the rank of each raw draw breaks ties by position
                let mut idx: Vec<usize> = (0..raw.len()).collect();
                idx.sort_by_key(|&k| (raw[k], k));
                let mut v = vec![0.0; raw.len()];
                for (rank, &k) in idx.iter().enumerate() {
                    v[k] = (rank + 1) as f64 / raw.len() as f64;
                }
                (field(n, v), sigma, th)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn relabeling_preserves_statistics((m, sigma, th) in distinct_field()) {
        let a = snp::diagonalize_fields(&m, th).unwrap();
        let b = snp::diagonalize_fields(&relabel(&m, &sigma), th).unwrap();
        prop_assert_eq!((a.diag, a.n_c, a.c_s, a.noise), (b.diag, b.n_c, b.c_s, b.noise));
        let mapped: Vec<Vec<u32>> = a
            .clusters
            .iter()
            .map(|c| {
                let mut c: Vec<u32> = c.iter().map(|&l| sigma[l as usize] as u32).collect();
                c.sort_unstable();
                c
            })
            .collect();
        let mut left = mapped;
        left.sort();
        let mut right = b.clusters.clone();
        right.sort();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn raising_threshold_never_raises_diag((m, _sigma, th) in distinct_field(), dt in 0.0f64..0.3) {
        let lo = snp::diagonalize_fields(&m, th).unwrap();
        let hi = snp::diagonalize_fields(&m, th + dt).unwrap();
        prop_assert!(hi.diag <= lo.diag);
        let ones = |t: f64| snp::clip(&m, t).n_edges();
        prop_assert!(ones(th + dt) <= ones(th));
        check_identity(&lo);
        check_identity(&hi);
    }
}

fn head_stats(rows: &[(usize, usize, usize)]) -> Vec<SnpStats> {
    rows.iter()
        .enumerate()
        .map(|(k, &(diag, n_c, noise))| SnpStats {
            unit_index: k as u32,
            diag,
            n_c,
            c_s: Some(diag as f64 / n_c as f64),
            noise,
            permutation: Vec::new(),
            clusters: Vec::new(),
        })
        .collect()
}

#[test]
fn twelve_heads_average_to_the_published_row() {
    // (Diag, N_C, n) per head
    let rows = [
        (23, 23, 3),
        (29, 28, 4),
        (12, 10, 16),
        (33, 32, 10),
        (21, 21, 3),
        (22, 22, 4),
        (23, 23, 2),
        (25, 25, 0),
        (15, 14, 3),
        (11, 10, 22),
        (7, 7, 1),
        (27, 26, 3),
    ];
    let agg = snp::aggregate(&head_stats(&rows), 64).unwrap();
    assert_eq!(format!("{:.1}", agg.mean_diag), "20.7");
    assert_eq!(format!("{:.1}", agg.mean_n_c), "20.1");
    assert_eq!(format!("{:.2}", agg.mean_c_s.unwrap()), "1.04");
    assert_eq!(format!("{:.2}", agg.mean_noise), "5.92");
}

#[test]
fn snr_examples() {
    assert!((snp::snr(64, 1.49, 12.5) - 7.6288).abs() < 1e-12);
    assert_eq!(format!("{:.2}", snp::snr(64, 1.57, 16.7)), "6.02");
    assert!(snp::snr(64, 2.0, 0.0).is_infinite());
}

/// Interval of `n_labels * diag / n` over the rounding intervals of the
/// printed operands.
fn snr_interval(n_labels: usize, diag: (f64, f64), noise: (f64, f64)) -> (f64, f64) {
    (
        snp::snr(n_labels, diag.0, noise.1),
        snp::snr(n_labels, diag.1, noise.0),
    )
}

fn rounding(printed: &str) -> (f64, f64) {
    let v: f64 = printed.parse().unwrap();
    let decimals = printed.split('.').nth(1).map_or(0, str::len);
    let h = 0.5 * 10f64.powi(-(decimals as i32));
    (v - h, v + h)
}

fn printed_snr_consistent(n_labels: usize, d: &str, n: &str, s: &str) -> bool {
    let (lo, hi) = snr_interval(n_labels, rounding(d), rounding(n));
    let (plo, phi) = rounding(s);
    lo < phi && plo < hi
}

#[test]
fn sixty_four_label_rows_satisfy_snr_within_rounding() {
    let rows = [
        ("1.49", "12.5", "7.63"),
        ("1.57", "16.7", "6.01"),
        ("1.96", "30.9", "4.05"),
        ("2.49", "53.7", "2.97"),
        ("2.62", "70.7", "2.38"),
        ("3.46", "151.2", "1.46"),
    ];
    for (d, n, s) in rows {
        assert!(printed_snr_consistent(64, d, n, s), "{d} {n} {s}");
    }
}

#[test]
fn fourteen_label_rows_mostly_sit_below_the_snr_formula() {
    // Printed (Diag, n, SNR) triples; only the first is reachable from its
    // rounded means, the rest print a smaller SNR than the means imply.
    let rows = [
        ("1.3", "2.56", "6.86", true),
        ("1.4", "4.19", "4.44", false),
        ("1.5", "6.24", "3.20", false),
        ("1.7", "9.70", "2.26", false),
        ("1.8", "11.7", "2.03", false),
        ("2.3", "20.6", "1.45", false),
    ];
    for (d, n, s, consistent) in rows {
        assert_eq!(
            printed_snr_consistent(14, d, n, s),
            consistent,
            "{d} {n} {s}"
        );
        if !consistent {
            let (lo, _) = snr_interval(14, rounding(d), rounding(n));
            assert!(rounding(s).1 <= lo);
        }
    }
}

#[test]
fn planted_fields_are_recovered_exactly() {
    let mut kv = KvSpec::default();
    kv.set("n_units", "768");
    let spec = FieldsSpec::from_kv(&kv, 21).unwrap();
    let (fields, truth) = synth::gen_fields(&spec).unwrap();
    let stats: Vec<SnpStats> = fields
        .iter()
        .map(|f| snp::diagonalize_fields(&snp::normalize_fields(f).unwrap(), 0.6).unwrap())
        .collect();
    for (s, t) in stats.iter().zip(&truth) {
        assert_eq!((s.diag, s.n_c, s.noise), (t.diag, t.n_c, t.noise));
        let mut planted = t.blocks.clone();
        planted.iter_mut().for_each(|b| b.sort_unstable());
        planted.sort();
        let mut got = s.clusters.clone();
        got.sort();
        assert_eq!(got, planted);
    }
    let agg = snp::aggregate(&stats, 64).unwrap();
    // one block of 1 or 2 labels, 20% of the ~62.5 free columns noisy
    let expected = 64.0 * 1.5 / (0.2 * 62.5);
    assert!(
        (agg.snr - expected).abs() / expected < 0.05,
        "snr {}",
        agg.snr
    );
    assert!((agg.snr - 7.6).abs() < 0.5);
}

#[test]
fn noise_free_fields_give_infinite_snr() {
    let mut kv = KvSpec::default();
    kv.set("n_units", "10");
    kv.set("noise_rate", "0");
    let spec = FieldsSpec::from_kv(&kv, 3).unwrap();
    let (fields, _) = synth::gen_fields(&spec).unwrap();
    let stats: Vec<SnpStats> = fields
        .iter()
        .map(|f| snp::diagonalize_fields(f, 0.6).unwrap())
        .collect();
    let agg = snp::aggregate(&stats, 64).unwrap();
    assert_eq!(agg.mean_noise, 0.0);
    assert!(agg.snr.is_infinite());
}

#[test]
fn accuracy_tracks_appearances() {
    let mut kv = KvSpec::default();
    kv.set("n_units", "300");
    kv.set("blocks", "1..3");
    kv.set("block_size", "1..3");
    let spec = FieldsSpec::from_kv(&kv, 8).unwrap();
    let (fields, _) = synth::gen_fields(&spec).unwrap();
    let stats: Vec<SnpStats> = fields
        .iter()
        .map(|f| snp::diagonalize_fields(f, 0.6).unwrap())
        .collect();
    let bare = snp::label_appearance(&stats, 64, None).unwrap();
    let mut rng = TestRng::new(2);
    let acc: Vec<f64> = bare
        .appearances
        .iter()
        .map(|&a| 0.3 + 0.02 * a as f64 + 0.05 * rng.normal())
        .collect();
    let app = snp::label_appearance(&stats, 64, Some(&acc)).unwrap();
    let r = app.pearson.unwrap();
    // Fisher z against zero correlation
    let z = r.atanh() * (64.0f64 - 3.0).sqrt();
    assert!(z > 3.0, "r = {r}");
    let total: u64 = app.appearances.iter().sum();
    let members: usize = stats.iter().map(|s| s.diag).sum();
    assert_eq!(total as usize, members);
    assert!(snp::label_appearance(&stats, 64, Some(&acc[..10])).is_err());
}
