//! Metric and similarity-graph properties against brute-force references.

use std::collections::BTreeMap;

use dualpath_core::knn::{build_knn_graph, pairwise_distance, KnnConfig, Metric, Weighting};
use dualpath_core::metrics::{auc, average_precision, f1_score, recall_at_k, ScoredLabels};
use dualpath_core::Matrix;
use proptest::prelude::*;

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// AP from distinct score thresholds, highest first.
fn brute_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let total = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let picked: Vec<bool> = scores.iter().zip(labels).filter(|(s, _)| **s >= t).map(|(_, l)| *l).collect();
        let tp = picked.iter().filter(|&&l| l).count() as f64;
        let recall = tp / total;
        ap += (recall - prev_recall) * tp / picked.len() as f64;
        prev_recall = recall;
    }
    ap
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    // coarse scores so that ties are common
    proptest::collection::vec((0u8..8, any::<bool>()), 2..60)
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 8.0, l)).unzip())
        .prop_filter("both classes", |(_, l): &(Vec<f64>, Vec<bool>)| l.iter().any(|&b| b) && l.iter().any(|&b| !b))
}

proptest! {
    #[test]
    fn auc_and_ap_match_brute_force((scores, labels) in scored()) {
        let s = ScoredLabels::new(scores.clone(), labels.clone()).unwrap();
        prop_assert!((auc(&s).unwrap() - brute_auc(&scores, &labels)).abs() < 1e-12);
        prop_assert!((average_precision(&s).unwrap() - brute_ap(&scores, &labels)).abs() < 1e-12);
    }

    #[test]
    fn strictly_increasing_transform_preserves_ranking_metrics((scores, labels) in scored()) {
        let s = ScoredLabels::new(scores.clone(), labels.clone()).unwrap();
        let mapped: Vec<f64> = scores.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        let t = ScoredLabels::new(mapped, labels).unwrap();
        prop_assert_eq!(auc(&s).unwrap(), auc(&t).unwrap());
        prop_assert_eq!(average_precision(&s).unwrap(), average_precision(&t).unwrap());
    }

    #[test]
    fn negated_scores_give_complementary_auc((scores, labels) in scored()) {
        let s = ScoredLabels::new(scores.clone(), labels.clone()).unwrap();
        let flipped = ScoredLabels::new(scores.iter().map(|v| -v).collect(), labels).unwrap();
        prop_assert!((auc(&s).unwrap() + auc(&flipped).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recall_at_k_is_monotone_and_reaches_one((scores, labels) in scored()) {
        let s = ScoredLabels::new(scores, labels).unwrap();
        let mut prev = 0.0;
        for k in 1..=s.len() {
            let r = recall_at_k(&s, k).unwrap();
            prop_assert!(r >= prev && r <= 1.0);
            prev = r;
        }
        prop_assert_eq!(prev, 1.0);
    }

    #[test]
    fn f1_stays_in_unit_interval((scores, labels) in scored(), t in 0.0f64..1.0) {
        let s = ScoredLabels::new(scores, labels).unwrap();
        let f = f1_score(&s, t);
        prop_assert!((0.0..=1.0).contains(&f));
    }
}

fn edge_map(g: &dualpath_core::Graph) -> BTreeMap<(usize, usize), f64> {
    g.edges().map(|(i, j, w)| ((i, j), w)).collect()
}

fn features() -> impl Strategy<Value = (Matrix, Vec<usize>)> {
    (6usize..30).prop_flat_map(|n| {
        (
            proptest::collection::vec(-3.0f64..3.0, n * 3).prop_map(move |v| Matrix::from_vec(n, 3, v).unwrap()),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_graph_is_permutation_equivariant((x, perm) in features(), k in 1usize..5, cosine in any::<bool>(), union in any::<bool>()) {
        let cfg = KnnConfig {
            k,
            metric: if cosine { Metric::Cosine } else { Metric::Euclidean },
            weighting: Weighting::InverseDistance,
            symmetrize: union,
        };
        // index tie-breaking is label dependent, so only tie-free inputs qualify
        let dist = pairwise_distance(&x, cfg.metric);
        let mut all: Vec<f64> = (0..x.rows()).flat_map(|i| (i + 1..x.rows()).map(move |j| (i, j))).map(|(i, j)| dist.get(i, j)).collect();
        all.sort_by(f64::total_cmp);
        prop_assume!(all.windows(2).all(|w| w[1] - w[0] > 1e-9));
        // row r of the permuted matrix is row perm[r] of x
        let permuted = x.select_rows(&perm);
        let a = edge_map(&build_knn_graph(&x, &cfg).unwrap());
        let b = edge_map(&build_knn_graph(&permuted, &cfg).unwrap());
        let mapped: BTreeMap<(usize, usize), f64> = b.into_iter().map(|((i, j), w)| ((perm[i].min(perm[j]), perm[i].max(perm[j])), w)).collect();
        prop_assert_eq!(a.len(), mapped.len());
        for (key, w) in &a {
            let other = mapped.get(key);
            prop_assert!(other.is_some_and(|v| (v - w).abs() < 1e-12), "edge {:?}", key);
        }
    }

    #[test]
    fn union_graph_gives_every_node_at_least_k_neighbors((x, _) in features(), k in 1usize..5) {
        let cfg = KnnConfig { k, ..KnnConfig::default() };
        let g = build_knn_graph(&x, &cfg).unwrap();
        prop_assert!(!g.has_self_loops());
        for i in 0..x.rows() {
            prop_assert!(g.neighbors(i).count() >= k);
        }
        let mutual = build_knn_graph(&x, &KnnConfig { symmetrize: false, ..cfg }).unwrap();
        prop_assert!(mutual.num_arcs() <= g.num_arcs());
    }
}
