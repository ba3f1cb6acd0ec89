mod common;

use kldetect::evaluate::{self, ConfusionMatrix, Metrics};
use kldetect::featsel::{self, CutRule, FeatureRanking, SelectionMethod};
use kldetect::flowdata::{self, FlowTable, SplitSpec};
use kldetect::resample::{self, SmoteConfig};
use kldetect::{Learner, ModelConfig, ModelKind};
use proptest::prelude::*;
use rand::SeedableRng;

fn labelled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..2, n).prop_map(|mut l| {
                l[0] = 0;
                l[1] = 1;
                l
            }),
            // quantized so that ties are common
            prop::collection::vec((0u32..20).prop_map(|v| v as f64 / 19.0), n),
        )
    })
}

fn table(max_rows: usize, max_cols: usize) -> impl Strategy<Value = FlowTable> {
    (any::<u64>(), 6usize..max_rows, 1usize..max_cols)
        .prop_map(|(seed, n, m)| common::random_table(&mut common::rng(seed), n, m))
}

proptest! {
    #[test]
    fn auc_equals_pair_counting((labels, scores) in labelled_scores()) {
        let (_, auc) = evaluate::roc_auc(&labels, &scores).unwrap();
        prop_assert!((auc - common::pair_count_auc(&labels, &scores)).abs() < 1e-12);
        prop_assert!((auc - evaluate::mann_whitney_auc(&labels, &scores).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn roc_is_a_monotone_staircase((labels, scores) in labelled_scores()) {
        let (pts, _) = evaluate::roc_auc(&labels, &scores).unwrap();
        prop_assert_eq!(pts[0], [0.0, 0.0]);
        prop_assert_eq!(*pts.last().unwrap(), [1.0, 1.0]);
        for w in pts.windows(2) {
            prop_assert!(w[1][0] >= w[0][0] && w[1][1] >= w[0][1]);
        }
    }

    #[test]
    fn a_negative_below_every_positive_never_lowers_auc((labels, scores) in labelled_scores(), s in 0.0f64..1.0) {
        let (_, before) = evaluate::roc_auc(&labels, &scores).unwrap();
        let min_pos = labels.iter().zip(&scores).filter(|(l, _)| **l == 1).map(|(_, s)| *s).fold(f64::INFINITY, f64::min);
        let s = s * min_pos - 1e-9;
        let mut l2 = labels.clone();
        let mut s2 = scores.clone();
        l2.push(0);
        s2.push(s);
        let (_, after) = evaluate::roc_auc(&l2, &s2).unwrap();
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn metric_identities(tp in 0usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let cm = ConfusionMatrix { tp, fp, tn, fn_ };
        let m = Metrics::from_confusion(&cm);
        prop_assert!((m.accuracy - (tp + tn) as f64 / (tp + fp + tn + fn_) as f64).abs() < 1e-15);
        if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
            prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
        }
        prop_assert_eq!(m.precision.is_none(), tp + fp == 0);
        prop_assert_eq!(m.recall.is_none(), tp + fn_ == 0);
        prop_assert_eq!(m.specificity.is_none(), tn + fp == 0);
    }

    #[test]
    fn minmax_inverse_recovers_rows(t in table(30, 6)) {
        let p = flowdata::fit_minmax(&t).unwrap();
        let scaled = flowdata::apply_minmax(&t, &p).unwrap();
        for i in 0..t.n_rows() {
            prop_assert!(scaled.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
            let mut back = scaled.row(i).to_vec();
            p.inverse_row(&mut back);
            for (a, b) in back.iter().zip(t.row(i)) {
                // constant columns map to 0 and back to their value
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_stratified(seed in any::<u64>(), n in 10usize..300, frac in 0.5f64..0.9) {
        let labels: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
        let (tr, te) = flowdata::split_indices(&labels, &SplitSpec { train_fraction: frac, seed, stratified: true }).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for c in 0..2u8 {
            let total = labels.iter().filter(|&&l| l == c).count() as f64;
            let in_train = tr.iter().filter(|&&i| labels[i] == c).count() as f64;
            prop_assert!((in_train - frac * total).abs() <= 1.0);
        }
    }

    #[test]
    fn fisher_is_affine_invariant(t in table(40, 5), a in 0.1f64..50.0, b in -10.0f64..10.0) {
        let m = t.n_features();
        let moved: Vec<f64> = t.features().iter().map(|x| a * x + b).collect();
        let t2 = FlowTable::new(t.feature_names().to_vec(), moved, t.labels().to_vec()).unwrap();
        let s1 = featsel::fisher_scores(&t).unwrap();
        let s2 = featsel::fisher_scores(&t2).unwrap();
        for j in 0..m {
            prop_assert!((s1[j] - s2[j]).abs() <= 1e-6 * (1.0 + s1[j].abs()), "{} vs {}", s1[j], s2[j]);
        }
    }

    #[test]
    fn info_gain_is_bounded_and_duplicates_tie(t in table(40, 4)) {
        let m = t.n_features();
        let mut rows: Vec<Vec<f64>> = t.rows().map(|r| r.to_vec()).collect();
        for r in &mut rows {
            r.push(r[0]);
        }
        let dup = FlowTable::from_rows(&rows, t.labels()).unwrap();
        let r = featsel::information_gain(&dup, 10).unwrap();
        let [n0, n1] = t.class_counts();
        let h = |p: f64| if p <= 0.0 || p >= 1.0 { 0.0 } else { -p * p.log2() - (1.0 - p) * (1.0 - p).log2() };
        let hy = h(n1 as f64 / (n0 + n1) as f64);
        for s in &r.scores {
            prop_assert!(*s >= 0.0 && *s <= hy + 1e-12);
        }
        prop_assert_eq!(r.scores[0], r.scores[m]);
        for j in 0..m {
            prop_assert!((r.scores[j] - common::brute_info_gain(&dup, j, 10)).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_selection_keeps_row_order(t in table(30, 6), mask in prop::collection::vec(any::<bool>(), 6)) {
        let m = t.n_features();
        let selected: Vec<usize> = (0..m).filter(|&j| mask[j]).collect();
        prop_assume!(!selected.is_empty());
        let ranking = FeatureRanking {
            method: SelectionMethod::FisherScore,
            scores: vec![0.0; m],
            selected: selected.clone(),
            rule: CutRule::TopK { k: selected.len() },
            feature_names: vec![],
        };
        let out = featsel::apply_selection(&t, &ranking).unwrap();
        prop_assert_eq!(out.labels(), t.labels());
        for i in 0..t.n_rows() {
            let expect: Vec<f64> = selected.iter().map(|&j| t.row(i)[j]).collect();
            prop_assert_eq!(out.row(i), expect.as_slice());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn smote_keeps_the_majority_and_balances(seed in any::<u64>(), n_min in 3usize..15, n_maj in 20usize..60, k in 1usize..6) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_table(&mut r, n_min + n_maj, 3);
        let labels: Vec<u8> = (0..n_min + n_maj).map(|i| (i < n_min) as u8).collect();
        let t = FlowTable::new(t.feature_names().to_vec(), t.features().to_vec(), labels).unwrap();
        let out = resample::smote(&t, &SmoteConfig { k_neighbors: k, target_ratio: 1.0, seed }).unwrap();
        prop_assert_eq!(out.class_counts(), [n_maj, n_maj]);
        // originals come first and unchanged
        for i in 0..t.n_rows() {
            prop_assert_eq!(out.row(i), t.row(i));
            prop_assert_eq!(out.labels()[i], t.labels()[i]);
        }
        prop_assert!(out.labels()[t.n_rows()..].iter().all(|&l| l == 1));
    }
}

fn cheap(kind: ModelKind, seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::default_for(kind, seed);
    let json = serde_json::to_value(&cfg).unwrap();
    // shrink the round and tree counts so the property stays fast
    let shrink = |mut v: serde_json::Value| {
        fn walk(v: &mut serde_json::Value) {
            match v {
                serde_json::Value::Object(map) => {
                    for (k, x) in map.iter_mut() {
                        if matches!(k.as_str(), "n_trees" | "n_rounds" | "n_estimators") {
                            *x = serde_json::json!(5);
                        } else {
                            walk(x);
                        }
                    }
                }
                serde_json::Value::Array(a) => a.iter_mut().for_each(walk),
                _ => {}
            }
        }
        walk(&mut v);
        v
    };
    cfg = serde_json::from_value(shrink(json)).unwrap();
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn every_learner_predicts_by_thresholding_its_probability(seed in any::<u64>()) {
        let t = common::random_table(&mut common::rng(seed), 80, 4);
        for kind in ModelKind::ALL {
            let model = cheap(kind, seed).fit(&t).unwrap();
            for i in 0..t.n_rows() {
                let p = model.predict_proba_row(t.row(i));
                prop_assert!((0.0..=1.0).contains(&p), "{} gave {}", kind, p);
                prop_assert_eq!(model.predict_row(t.row(i)), (p > 0.5) as u8, "{}", kind);
            }
        }
    }
}
