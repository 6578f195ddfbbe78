mod common;

use std::collections::BTreeMap;

use common::{binomial_sigma, TestRng};
use proptest::prelude::*;
use tokscope::confusion::{self, ThresholdConfig};
use tokscope::synth::{self, KvSpec, PlantedSpec};
use tokscope::{MaskEvent, ModKind, TokenId};

fn arb_events(t_number: u32) -> impl Strategy<Value = Vec<MaskEvent>> {
    proptest::collection::vec((0..t_number, 0..t_number, 0u32..4), 1..600).prop_map(|raw| {
        raw.into_iter()
            .map(|(t, p, bias)| MaskEvent {
                input: 0,
                position: 0,
                kind: ModKind::Masked,
                true_token: t,
                // lean towards correct predictions so most rows are retained
                predicted: if bias > 0 { t } else { p },
            })
            .collect()
    })
}

fn counts(events: &[MaskEvent]) -> BTreeMap<(TokenId, TokenId), u64> {
    let mut m = BTreeMap::new();
    for e in events {
        *m.entry((e.true_token, e.predicted)).or_insert(0) += 1;
    }
    m
}

proptest! {
    #[test]
    fn triplets_are_the_pair_counts(events in arb_events(25)) {
        let m = confusion::build_confusion(&events, 25).unwrap();
        let want: Vec<(TokenId, TokenId, u64)> =
            counts(&events).into_iter().map(|((r, c), n)| (r, c, n)).collect();
        let got: Vec<_> = m.triplets().collect();
        prop_assert_eq!(got, want);
        let total: u64 = (0..25).map(|r| m.row_total(r)).sum();
        prop_assert_eq!(total, events.len() as u64);
    }

    #[test]
    fn normalization_and_exclusion_follow_the_row_rule(events in arb_events(25)) {
        let m = confusion::build_confusion(&events, 25).unwrap();
        let c = counts(&events);
        let retained: Vec<bool> = (0..25u32)
            .map(|r| {
                let d = c.get(&(r, r)).copied().unwrap_or(0);
                d > 0 && (0..25u32).all(|j| c.get(&(r, j)).copied().unwrap_or(0) <= d)
            })
            .collect();
        let Ok(n) = confusion::normalize_confusion(&m) else {
            prop_assert!(retained.iter().all(|&r| !r));
            return Ok(());
        };
        for r in 0..25u32 {
            prop_assert_eq!(n.is_retained(r), retained[r as usize]);
            if !retained[r as usize] {
                continue;
            }
            let d = c[&(r, r)] as f64;
            prop_assert_eq!(n.get(r, r), 1.0);
            for j in 0..25u32 {
                let want = c.get(&(r, j)).copied().unwrap_or(0) as f64 / d;
                prop_assert_eq!(n.get(r, j), want);
                prop_assert!(n.get(r, j) <= 1.0);
            }
        }
    }

    #[test]
    fn adjacency_is_mutual_thresholding(events in arb_events(20), th in 0.01f64..1.0) {
        let m = confusion::build_confusion(&events, 20).unwrap();
        let Ok(n) = confusion::normalize_confusion(&m) else { return Ok(()) };
        let b = confusion::binarize_threshold(&n, ThresholdConfig::new(th).unwrap());
        let adj = confusion::adjacency(&b);
        let edge = |i: u32, j: u32| n.is_retained(i) && (i == j || n.get(i, j) > th);
        for i in 0..20u32 {
            for j in 0..20u32 {
                prop_assert_eq!(b.contains(i, j), edge(i, j));
                let mutual = i != j && edge(i, j) && edge(j, i);
                prop_assert_eq!(adj.contains(i, j), mutual);
            }
        }
    }

    #[test]
    fn raising_the_threshold_removes_edges(events in arb_events(20), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let m = confusion::build_confusion(&events, 20).unwrap();
        let Ok(n) = confusion::normalize_confusion(&m) else { return Ok(()) };
        let bl = confusion::binarize_threshold(&n, ThresholdConfig::new(lo).unwrap());
        let bh = confusion::binarize_threshold(&n, ThresholdConfig::new(hi).unwrap());
        for (i, j) in bh.edges() {
            prop_assert!(bl.contains(i, j));
        }
        let al = confusion::adjacency(&bl);
        for &(i, j) in confusion::adjacency(&bh).edges() {
            prop_assert!(al.contains(i, j));
        }
    }

    #[test]
    fn shorter_top_lists_are_prefixes(events in arb_events(20), k in 1usize..8) {
        let m = confusion::build_confusion(&events, 20).unwrap();
        let Ok(n) = confusion::normalize_confusion(&m) else { return Ok(()) };
        let short = confusion::top_k(&n, k).unwrap();
        let long = confusion::top_k(&n, k + 3).unwrap();
        for (r, list) in &long.rows {
            let s = short.get(*r).unwrap();
            prop_assert_eq!(s, &list[..s.len()]);
            prop_assert!(list.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));
            prop_assert!(list.iter().all(|&(c, v)| c != *r && v > 0.0));
        }
    }
}

#[test]
fn threshold_must_lie_in_unit_interval() {
    assert!(ThresholdConfig::new(0.0).is_err());
    assert!(ThresholdConfig::new(1.0).is_ok());
    assert!(ThresholdConfig::new(1.5).is_err());
    assert!(ThresholdConfig::new(f64::NAN).is_err());
    assert_eq!(ThresholdConfig::default().th(), 0.05);
}

#[test]
fn tied_off_diagonal_keeps_the_row() {
    let ev = |t, p| MaskEvent {
        input: 0,
        position: 0,
        kind: ModKind::Masked,
        true_token: t,
        predicted: p,
    };
    let m = confusion::build_confusion(&[ev(0, 0), ev(0, 1), ev(1, 0), ev(1, 0)], 2).unwrap();
    let n = confusion::normalize_confusion(&m).unwrap();
    assert!(n.is_retained(0));
    assert!(!n.is_retained(1));
    assert_eq!(n.excluded_rows(), vec![1]);
    let only_wrong = confusion::build_confusion(&[ev(0, 1)], 2).unwrap();
    assert!(confusion::normalize_confusion(&only_wrong).is_err());
}

#[test]
fn rows_follow_the_generating_distribution() {
    let mut kv = KvSpec::default();
    kv.set("t_number", "40");
    kv.set("n_clusters", "6");
    kv.set("cluster_size", "2..5");
    kv.set("profile", "uniform");
    kv.set("p_correct", "0.3..0.8");
    let spec = PlantedSpec::from_kv(&kv, 29).unwrap();
    let events = synth::gen_events(&spec, 200_000, 32).unwrap();
    let m = confusion::build_confusion(&events, 40).unwrap();
    let mut cells = 0;
    let mut inside = 0;
    for t in 0..40u32 {
        let n = m.row_total(t);
        for (j, p) in spec.prediction_distribution(t) {
            cells += 1;
            let dev = (m.get(t, j) as f64 - n as f64 * p).abs();
            inside += (dev <= 3.0 * binomial_sigma(n, p) + 1e-9) as usize;
        }
    }
    // 3 sigma covers about 99.7% of cells; allow for the binomial tails
    assert!(inside as f64 >= 0.99 * cells as f64, "{inside}/{cells}");
}

#[test]
fn offdiag_histogram_counts_nonzero_offdiagonal_entries() {
    let mut rng = TestRng::new(3);
    let events: Vec<MaskEvent> = (0..3000)
        .map(|_| {
            let t = rng.below(30) as u32;
            let p = if rng.uniform() < 0.7 {
                t
            } else {
                rng.below(30) as u32
            };
            MaskEvent {
                input: 0,
                position: 0,
                kind: ModKind::Masked,
                true_token: t,
                predicted: p,
            }
        })
        .collect();
    let m = confusion::build_confusion(&events, 30).unwrap();
    let n = confusion::normalize_confusion(&m).unwrap();
    let h = confusion::offdiag_histogram(&n, 0.0, 1.0, 20);
    let want: usize = n
        .retained_rows()
        .iter()
        .map(|&r| n.row(r).0.iter().filter(|&&c| c != r).count())
        .sum();
    assert_eq!(h.total() as usize, want);
}
