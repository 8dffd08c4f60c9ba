//! Property tests for the invariants every module promises.

use std::io::Write;

use lfbb_core::corpus::{
    load_dictionary, load_embeddings, normalize_rows, write_embeddings, FrequencyTable, PosTable,
};
use lfbb_core::eval::{per_pos_accuracy, precision_at_1, spearman};
use lfbb_core::features::{featurize_pair, FeatureContext, POS_CAND, POS_SRC};
use lfbb_core::ltr::{
    average_precision, compute_lambdas, delta_ap, fit_tree, rank_order, ranked_labels, Node,
};
use lfbb_core::{
    EmbeddingSpace, FeatureMask, GbdtParams, RankingGroup, Upos, Vocabulary, NUM_FEATURES,
};
use ndarray::Array2;
use proptest::prelude::*;

fn space(rows: Vec<Vec<f64>>) -> EmbeddingSpace {
    let (n, d) = (rows.len(), rows[0].len());
    let m = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).unwrap();
    let vocab = Vocabulary::from_words((0..n).map(|i| format!("w{i}"))).unwrap();
    EmbeddingSpace::new(vocab, m).unwrap()
}

fn matrix(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), n)
}

fn group(src: usize, labels: Vec<u8>, scores: &[f64]) -> RankingGroup {
    let n = labels.len();
    RankingGroup {
        src,
        candidates: (0..n).collect(),
        labels,
        features: Array2::zeros((n, NUM_FEATURES)),
        csls: scores.to_vec(),
        gold_missed: false,
    }
}

fn labels_with_scores(max: usize) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (1..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..=1, n),
            prop::collection::vec((-64i32..64).prop_map(|v| v as f64 / 8.0), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_is_idempotent(rows in matrix(8, 5)) {
        let (once, _) = normalize_rows(space(rows));
        let (twice, _) = normalize_rows(EmbeddingSpace::new(once.vocab.clone(), once.matrix.clone()).unwrap());
        for (a, b) in once.matrix.iter().zip(twice.matrix.iter()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
        for row in once.matrix.rows() {
            let norm = row.dot(&row).sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn embeddings_round_trip_bitwise(rows in matrix(6, 4)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.vec");
        let s = space(rows);
        write_embeddings(&s, &path).unwrap();
        let (back, report) = load_embeddings(&path, None).unwrap();
        prop_assert_eq!(report.rows_read, 6);
        prop_assert_eq!(&back.vocab, &s.vocab);
        for (a, b) in back.matrix.iter().zip(s.matrix.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn dictionary_ignores_line_order(
        pairs in prop::collection::vec((0usize..6, 0usize..6), 1..20),
        perm in Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let src = Vocabulary::from_words((0..6).map(|i| format!("s{i}"))).unwrap();
        let tgt = Vocabulary::from_words((0..6).map(|i| format!("t{i}"))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let write = |name: &str, lines: &[(usize, usize)]| {
            let path = dir.path().join(name);
            let mut f = std::fs::File::create(&path).unwrap();
            for (s, t) in lines {
                writeln!(f, "s{s}\tt{t}").unwrap();
            }
            path
        };
        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(perm));
        let (a, _) = load_dictionary(&write("a.tsv", &pairs), &src, &tgt).unwrap();
        let (b, _) = load_dictionary(&write("b.tsv", &shuffled), &src, &tgt).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn zipf_is_monotone_in_count(counts in prop::collection::vec(1u64..1_000_000, 2..30)) {
        let listed: Vec<Option<u64>> = counts.iter().map(|&c| Some(c)).collect();
        let table = FrequencyTable::from_counts(&listed, counts.iter().sum()).unwrap();
        for i in 0..counts.len() {
            for j in 0..counts.len() {
                if counts[i] < counts[j] {
                    prop_assert!(table.zipf(i) <= table.zipf(j));
                    prop_assert!(table.rank(i) > table.rank(j));
                }
            }
        }
    }

    #[test]
    fn featurize_is_pure_with_one_hot_blocks(
        ts in 0usize..18, tc in 0usize..18, csls in -2.0f64..2.0,
        ext in prop::option::of(-5.0f64..5.0), no_pos: bool, no_freq: bool,
    ) {
        let freq = FrequencyTable::from_counts(&[Some(50), Some(5)], 55).unwrap();
        let pos_s = PosTable::new(vec![Upos::ALL[ts], Upos::X]);
        let pos_t = PosTable::new(vec![Upos::X, Upos::ALL[tc]]);
        let mask = FeatureMask { no_pos, no_freq };
        let ctx = FeatureContext { freq_src: &freq, freq_tgt: &freq, pos_src: &pos_s, pos_tgt: &pos_t, ext: None, mask };
        let a = featurize_pair(0, 1, csls, ext, &ctx);
        let b = featurize_pair(0, 1, csls, ext, &ctx);
        prop_assert_eq!(a.len(), NUM_FEATURES);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        let hot_src: f64 = a[POS_SRC..POS_CAND].iter().sum();
        let hot_cand: f64 = a[POS_CAND..].iter().sum();
        let want = if no_pos { 0.0 } else { 1.0 };
        prop_assert_eq!(hot_src, want);
        prop_assert_eq!(hot_cand, want);
        for c in mask.masked_columns() {
            prop_assert_eq!(a[c], 0.0);
        }
    }

    #[test]
    fn ap_is_bounded_and_affine_invariant((labels, scores) in labels_with_scores(12), shift in -4i32..4) {
        let ap = average_precision(&ranked_labels(&labels, &scores));
        prop_assert!((0.0..=1.0).contains(&ap));
        let moved: Vec<f64> = scores.iter().map(|s| 2.0 * s + shift as f64).collect();
        prop_assert_eq!(ap, average_precision(&ranked_labels(&labels, &moved)));
    }

    #[test]
    fn lambdas_sum_to_zero((labels, scores) in labels_with_scores(16), sigma in 0.1f64..3.0) {
        let (g, h) = compute_lambdas(&scores, &labels, sigma);
        prop_assert!(g.iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(h.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn delta_ap_swapping_back_negates((labels, scores) in labels_with_scores(10), i in 0usize..10, j in 0usize..10) {
        let n = labels.len();
        let (i, j) = (i % n, j % n);
        let ranking = rank_order(&scores);
        let d = delta_ap(&labels, &ranking, i, j);
        let mut swapped = ranking.clone();
        swapped.swap(i, j);
        let back = delta_ap(&labels, &swapped, i, j);
        prop_assert!((d + back).abs() < 1e-12);
        let before = average_precision(&ranking.iter().map(|&k| labels[k]).collect::<Vec<_>>());
        let after = average_precision(&swapped.iter().map(|&k| labels[k]).collect::<Vec<_>>());
        prop_assert!((after - before - d).abs() < 1e-12);
    }

    #[test]
    fn tree_routing_is_consistent(
        xs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 4..40),
        gs in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let n = xs.len();
        let mut x = Array2::zeros((n, NUM_FEATURES));
        for (r, row) in xs.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                x[[r, c]] = *v;
            }
        }
        let g = &gs[..n];
        let h = vec![1.0; n];
        let params = GbdtParams { min_child_weight: 1.0, ..GbdtParams::default() };
        let tree = fit_tree(x.view(), g, &h, &params).unwrap();
        prop_assert!(tree.depth() <= params.max_depth);
        tree.validate(NUM_FEATURES, params.max_depth).unwrap();
        for r in 0..n {
            let leaf = tree.leaf_index(x.row(r));
            let Node::Leaf { value } = tree.nodes[leaf] else { panic!("not a leaf") };
            prop_assert_eq!(value, tree.predict(x.row(r)));
        }

        // scaling a column by a power of two moves thresholds but not routing
        let mut scaled = x.clone();
        scaled.column_mut(0).mapv_inplace(|v| v * 4.0);
        let tree2 = fit_tree(scaled.view(), g, &h, &params).unwrap();
        for r in 0..n {
            prop_assert_eq!(tree.predict(x.row(r)).to_bits(), tree2.predict(scaled.row(r)).to_bits());
        }
    }

    #[test]
    fn p_at_1_is_affine_invariant(
        groups in prop::collection::vec(labels_with_scores(8), 1..12),
        scale in 1i32..4, shift in -3i32..3,
    ) {
        let gs: Vec<RankingGroup> = groups.iter().enumerate().map(|(i, (l, s))| group(i, l.clone(), s)).collect();
        let scores: Vec<Vec<f64>> = groups.iter().map(|(_, s)| s.clone()).collect();
        let moved: Vec<Vec<f64>> = scores.iter().map(|s| s.iter().map(|v| v * (1 << scale) as f64 + shift as f64).collect()).collect();
        prop_assert_eq!(precision_at_1(&gs, &scores), precision_at_1(&gs, &moved));
    }

    #[test]
    fn per_pos_accuracy_averages_to_p_at_1(
        groups in prop::collection::vec(labels_with_scores(6), 1..20),
        tags in prop::collection::vec(0usize..4, 20),
    ) {
        let gs: Vec<RankingGroup> = groups.iter().enumerate().map(|(i, (l, s))| group(i, l.clone(), s)).collect();
        let scores: Vec<Vec<f64>> = groups.iter().map(|(_, s)| s.clone()).collect();
        let pos = PosTable::new(tags.iter().map(|&t| Upos::ALL[t]).collect());
        let per = per_pos_accuracy(&gs, &scores, &pos);
        let n: usize = per.values().map(|a| a.n).sum();
        let weighted: f64 = per.values().map(|a| a.accuracy * a.n as f64).sum::<f64>() / n as f64;
        prop_assert_eq!(n, gs.len());
        prop_assert!((weighted - precision_at_1(&gs, &scores).p_at_1).abs() < 1e-12);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec(((-20i32..20), (-20i32..20)), 3..40),
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let ex: Vec<f64> = x.iter().map(|v| (v / 4.0).exp() + 3.0).collect();
        prop_assert_eq!(spearman(&x, &y), spearman(&ex, &y));
    }
}
