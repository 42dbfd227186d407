use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::global::{assemble_global, Direction, GraphStats};
use crate::primitives::B256;

fn sample(x: &[f64], label: Label) -> LabeledSample<f64> {
    let mut v = x.to_vec();
    v.resize(FEATURE_DIM, 0.0);
    LabeledSample { tx_hash: B256::ZERO, features: FeatureVector::try_from(v).unwrap(), label }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let (u1, u2): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two unit-variance blobs in 4 dimensions, centres 12 apart.
fn blobs(n_per: usize, seed: u64) -> Vec<LabeledSample<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (centre, label) in [(-6.0, Label::Normal), (6.0, Label::AttackTgt)] {
        for _ in 0..n_per {
            let x: Vec<f64> = (0..4).map(|_| centre + gaussian(&mut rng)).collect();
            out.push(sample(&x, label));
        }
    }
    out
}

fn labels_of(s: &[LabeledSample<f64>]) -> Vec<Label> {
    s.iter().map(|x| x.label).collect()
}

#[test]
fn concat_layout() {
    let g = assemble_global(&[0.5f64; 16], &GraphStats { n_vertices: 6, n_edges: 5, n_logs: 2, density: 1.0 / 3.0 }, Direction::Deposit).unwrap();
    let mut l = crate::motif::LocalFeature::default();
    l.counts[15] = 9;
    let f = concat_features(&g, &l);
    assert_eq!(f.as_slice().len(), 37);
    assert_eq!(f.global_part(), &g.to_array()[..]);
    assert_eq!(f.local_part()[15], 9.0);
    assert_eq!(f.embedding_part(), &[0.5; 16]);

    let zero = concat_features(&GlobalFeature::<f64>::from_values(&[0.0; 21], &GLOBAL_LAYOUT).unwrap(), &Default::default());
    assert!(zero.as_slice().iter().all(|v| *v == 0.0));
}

use crate::global::GLOBAL_LAYOUT;

#[test]
fn feature_vector_rejects_bad_width_and_nan() {
    assert_eq!(
        FeatureVector::<f64>::from_slice(&[0.0; 36]),
        Err(FeatureError::DimensionMismatch { expected: 37, got: 36 })
    );
    let mut v = [0.0; 37];
    v[3] = f64::NAN;
    assert_eq!(FeatureVector::<f64>::from_slice(&v), Err(FeatureError::NonFinite(3)));
    let json = serde_json::to_string(&vec![1.0f64; 36]).unwrap();
    assert!(serde_json::from_str::<FeatureVector<f64>>(&json).is_err());
}

#[test]
fn stratified_split_counts() {
    let labels: Vec<Label> = (0..100).map(|i| if i < 90 { Label::Normal } else { Label::AttackSrc }).collect();
    let (train, test) = split_dataset(&labels, 0.7, true, 3).unwrap();
    let count = |idx: &[usize], l: Label| idx.iter().filter(|&&i| labels[i] == l).count();
    assert_eq!((count(&train, Label::Normal), count(&train, Label::AttackSrc)), (63, 7));
    assert_eq!((count(&test, Label::Normal), count(&test, Label::AttackSrc)), (27, 3));

    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..100).collect::<Vec<_>>());

    assert_eq!(split_dataset(&labels, 0.7, true, 3).unwrap(), (train.clone(), test));
    assert_ne!(split_dataset(&labels, 0.7, true, 4).unwrap().0, train);
}

#[test]
fn split_validation() {
    let labels = vec![Label::Normal; 10];
    assert_eq!(split_dataset(&labels, 1.0, true, 0), Err(ClassifyError::InvalidRatio(1.0)));
    assert_eq!(split_dataset(&labels, 0.0, false, 0), Err(ClassifyError::InvalidRatio(0.0)));
    let mut one = labels.clone();
    one.push(Label::AttackTgt);
    assert_eq!(split_dataset(&one, 0.7, true, 0), Err(ClassifyError::ClassTooSmall(Label::AttackTgt)));
    assert!(split_dataset(&one, 0.7, false, 0).is_ok());
}

#[test]
fn knn_errors() {
    let s = blobs(3, 1);
    assert_eq!(knn_train::<f64>(&[], 5, 0).unwrap_err(), ClassifyError::EmptyTrainingSet);
    assert_eq!(knn_train(&s, 7, 0).unwrap_err(), ClassifyError::KTooLarge { k: 7, n: 6 });
    assert_eq!(knn_train(&s, 4, 0).unwrap_err(), ClassifyError::InvalidK(4));
    assert_eq!(knn_train(&s, 0, 0).unwrap_err(), ClassifyError::InvalidK(0));
}

#[test]
fn knn_identity_k1() {
    let s = blobs(20, 2);
    let m = knn_train(&s, 1, 0).unwrap();
    for x in &s {
        assert_eq!(knn_predict(&m, &x.features).label, x.label);
    }
}

#[test]
fn knn_separates_blobs() {
    let train = blobs(50, 10);
    let test = blobs(50, 11);
    let m = knn_train(&train, 5, 0).unwrap();
    for t in &test {
        let p = knn_predict(&m, &t.features);
        assert_eq!(p.label, t.label);
        // Exhaustive oracle: majority of the five smallest standardized distances.
        let q = m.standardizer.transform(t.features.as_slice());
        let mut d: Vec<(f64, Label)> = train
            .iter()
            .map(|s| {
                let z = m.standardizer.transform(s.features.as_slice());
                (z.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), s.label)
            })
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let n_tgt = d[..5].iter().filter(|x| x.1 == Label::AttackTgt).count();
        assert_eq!(p.label, if n_tgt >= 3 { Label::AttackTgt } else { Label::Normal });
        assert_eq!(p.distribution[Label::AttackTgt.index()], n_tgt as f64 / 5.0);
    }
}

#[test]
fn knn_full_k_is_majority() {
    let mut s = blobs(10, 4);
    s.truncate(17); // 10 Normal, 7 AttackTgt
    let m = knn_train(&s, 17, 0).unwrap();
    for q in blobs(5, 5) {
        assert_eq!(knn_predict(&m, &q.features).label, Label::Normal);
    }
}

#[test]
fn knn_tie_breaks() {
    // k=3 with one vote each: nearest summed distance wins.
    let s = vec![sample(&[0.0], Label::AttackTgt), sample(&[2.0], Label::Normal), sample(&[-3.0], Label::AttackSrc)];
    let m = knn_train(&s, 3, 0).unwrap();
    assert_eq!(knn_predict(&m, &sample(&[0.4], Label::Normal).features).label, Label::AttackTgt);
    assert_eq!(knn_predict(&m, &sample(&[1.6], Label::Normal).features).label, Label::Normal);
    // Equal votes and equal summed distance: class order decides.
    // Training mean is exactly 0 so the two distances are bit-identical.
    let s = vec![
        sample(&[-1.0], Label::AttackTgt),
        sample(&[1.0], Label::AttackSrc),
        sample(&[-10.0], Label::Normal),
        sample(&[10.0], Label::Normal),
    ];
    let q = sample(&[0.0], Label::Normal).features;
    let m = knn_train(&s, 1, 0).unwrap();
    assert_eq!(knn_predict(&m, &q).label, Label::AttackTgt, "equidistant neighbours taken in training order");
    let m = knn_train(&s, 3, 0).unwrap();
    let p = knn_predict(&m, &q);
    assert_eq!(p.distribution, [1.0 / 3.0; 3]);
    assert_eq!(p.label, Label::AttackSrc);
}

#[test]
fn standardizer_ignores_test_data() {
    let train = blobs(20, 6);
    let a = knn_train(&train, 3, 0).unwrap();
    let b = knn_train(&train, 3, 0).unwrap();
    assert_eq!(a, b);
    let mut with_test = train.clone();
    with_test.extend(blobs(20, 7).into_iter().map(|mut s| {
        let v: Vec<f64> = s.features.as_slice().iter().map(|x| x * 100.0).collect();
        s.features = FeatureVector::try_from(v).unwrap();
        s
    }));
    let c = knn_train(&with_test[..train.len()], 3, 0).unwrap();
    assert_eq!(a.standardizer, c.standardizer);

    let st = Standardizer::fit([&[1.0f64, 5.0][..], &[3.0, 5.0][..]]);
    assert_eq!(st.mean, vec![2.0, 5.0]);
    assert_eq!(st.std, vec![1.0, 1.0]);
    assert_eq!(st.transform(&[4.0, 7.0]), vec![2.0, 2.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn knn_affine_invariance(seed in 0u64..1000, scale in prop::collection::vec(0.01f64..100.0, 4), shift in prop::collection::vec(-50.0f64..50.0, 4)) {
        let train = blobs(15, seed);
        let test = blobs(5, seed + 1);
        let remap = |s: &LabeledSample<f64>| {
            let mut v = s.features.as_slice().to_vec();
            for d in 0..4 {
                v[d] = v[d] * scale[d] + shift[d];
            }
            LabeledSample { features: FeatureVector::try_from(v).unwrap(), ..s.clone() }
        };
        let a = knn_train(&train, 5, 0).unwrap();
        let b = knn_train(&train.iter().map(remap).collect::<Vec<_>>(), 5, 0).unwrap();
        for t in &test {
            prop_assert_eq!(knn_predict(&a, &t.features).label, knn_predict(&b, &remap(t).features).label);
        }
    }

    #[test]
    fn micro_metrics_identity(cells in prop::collection::vec(0u64..50, 9)) {
        let mut conf = [[0u64; 3]; 3];
        for (i, c) in cells.iter().enumerate() {
            conf[i / 3][i % 3] = *c;
        }
        let m = Metrics::from_confusion(conf);
        prop_assert_eq!(m.micro_precision, m.accuracy);
        prop_assert_eq!(m.micro_recall, m.accuracy);
        for c in &m.per_class {
            let h = if c.precision + c.recall == 0.0 { 0.0 } else { 2.0 * c.precision * c.recall / (c.precision + c.recall) };
            prop_assert!((c.f1 - h).abs() <= 1e-12);
        }
    }
}

#[test]
fn dtree_pure_leaf() {
    let s: Vec<_> = (0..10).map(|i| sample(&[i as f64], Label::AttackSrc)).collect();
    let t = dtree_train(&s, &TreeParams::default(), 0).unwrap();
    assert_eq!(t.nodes.len(), 1);
    assert_eq!(dtree_predict(&t, &sample(&[-100.0], Label::Normal).features).label, Label::AttackSrc);
    assert_eq!(dtree_train::<f64>(&[], &TreeParams::default(), 0).unwrap_err(), ClassifyError::EmptyTrainingSet);
}

#[test]
fn dtree_depth_one_split() {
    let s: Vec<_> = (1..=10)
        .flat_map(|i| [sample(&[-(i as f64)], Label::Normal), sample(&[i as f64], Label::AttackTgt)])
        .collect();
    let t = dtree_train(&s, &TreeParams::default(), 0).unwrap();
    assert_eq!(t.depth(), 1);
    assert!(matches!(t.nodes[0], TreeNode::Split { dim: 0, threshold, .. } if threshold == 0.0));
    for x in &s {
        assert_eq!(dtree_predict(&t, &x.features).label, x.label);
    }
}

#[test]
fn dtree_tie_rule_lowest_dim_and_threshold() {
    // Dimensions 0 and 1 both separate perfectly; dimension 0 wins.
    let s = vec![
        sample(&[0.0, 0.0], Label::Normal),
        sample(&[1.0, 1.0], Label::Normal),
        sample(&[2.0, 2.0], Label::AttackSrc),
        sample(&[3.0, 3.0], Label::AttackSrc),
    ];
    let t = dtree_train(&s, &TreeParams::default(), 0).unwrap();
    assert!(matches!(t.nodes[0], TreeNode::Split { dim: 0, threshold, .. } if threshold == 1.5));
    // Two equally good thresholds on one dimension: the lower is chosen.
    let s = vec![sample(&[0.0], Label::Normal), sample(&[1.0], Label::AttackSrc), sample(&[2.0], Label::Normal)];
    let t = dtree_train(&s, &TreeParams { max_depth: 1, ..Default::default() }, 0).unwrap();
    assert!(matches!(t.nodes[0], TreeNode::Split { dim: 0, threshold, .. } if threshold == 0.5));
}

fn weighted_gini(idx: &[usize], s: &[LabeledSample<f64>]) -> (f64, f64) {
    let mut w = [0.0; 3];
    idx.iter().for_each(|&i| w[s[i].label.index()] += 1.0);
    let n: f64 = w.iter().sum();
    (n, 1.0 - w.iter().map(|x| (x / n).powi(2)).sum::<f64>())
}

#[test]
fn dtree_every_split_reduces_impurity() {
    let mut s = blobs(40, 21);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for x in s.iter_mut().step_by(7) {
        x.label = Label::ALL[rng.gen_range(0..3)];
    }
    let t = dtree_train(&s, &TreeParams::default(), 0).unwrap();
    fn walk(t: &DecisionTree<f64>, node: usize, idx: Vec<usize>, s: &[LabeledSample<f64>]) {
        if let TreeNode::Split { dim, threshold, left, right } = &t.nodes[node] {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| s[i].features.as_slice()[*dim] <= *threshold);
            let (n, g) = weighted_gini(&idx, s);
            let (nl, gl) = weighted_gini(&l, s);
            let (nr, gr) = weighted_gini(&r, s);
            assert!(nl > 0.0 && nr > 0.0);
            assert!(nl / n * gl + nr / n * gr < g);
            walk(t, *left, l, s);
            walk(t, *right, r, s);
        }
    }
    walk(&t, 0, (0..s.len()).collect(), &s);
}

#[test]
fn dtree_min_samples_leaf_and_depth() {
    let s = blobs(30, 8);
    let t = dtree_train(&s, &TreeParams { max_depth: 0, ..Default::default() }, 0).unwrap();
    assert_eq!(t.nodes.len(), 1);
    let mut noisy = blobs(30, 9);
    noisy.iter_mut().step_by(5).for_each(|x| x.label = Label::AttackSrc);
    let t = dtree_train(&noisy, &TreeParams { min_samples_leaf: 10, ..Default::default() }, 0).unwrap();
    fn leaf_sizes(t: &DecisionTree<f64>, node: usize, idx: Vec<usize>, s: &[LabeledSample<f64>], out: &mut Vec<usize>) {
        match &t.nodes[node] {
            TreeNode::Leaf { .. } => out.push(idx.len()),
            TreeNode::Split { dim, threshold, left, right } => {
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| s[i].features.as_slice()[*dim] <= *threshold);
                leaf_sizes(t, *left, l, s, out);
                leaf_sizes(t, *right, r, s, out);
            }
        }
    }
    let mut sizes = Vec::new();
    leaf_sizes(&t, 0, (0..noisy.len()).collect(), &noisy, &mut sizes);
    assert!(sizes.iter().all(|n| *n >= 10), "{sizes:?}");
}

#[test]
fn dtree_monotone_transform_invariance() {
    // Values on an integer grid so every test value also occurs in training.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mk = |rng: &mut ChaCha8Rng| {
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0..8) as f64).collect();
        let label = if x[0] + x[1] > 8.0 { Label::AttackTgt } else if x[2] > 5.0 { Label::AttackSrc } else { Label::Normal };
        sample(&x, label)
    };
    let train: Vec<_> = (0..200).map(|_| mk(&mut rng)).collect();
    let test: Vec<_> = (0..100).map(|_| mk(&mut rng)).collect();
    let warp = |s: &LabeledSample<f64>| {
        let mut v = s.features.as_slice().to_vec();
        v[1] = v[1].powi(3) + 2.0 * v[1];
        LabeledSample { features: FeatureVector::try_from(v).unwrap(), ..s.clone() }
    };
    let a = dtree_train(&train, &TreeParams::default(), 0).unwrap();
    let b = dtree_train(&train.iter().map(warp).collect::<Vec<_>>(), &TreeParams::default(), 0).unwrap();
    for t in &test {
        assert_eq!(dtree_predict(&a, &t.features).label, dtree_predict(&b, &warp(t).features).label);
    }
}

#[test]
fn dtree_train_accuracy_not_below_test_on_average() {
    let (mut train_acc, mut test_acc) = (0.0, 0.0);
    for seed in 0..10 {
        let mut data = blobs(40, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in data.iter_mut() {
            if rng.gen_bool(0.15) {
                x.label = if x.label == Label::Normal { Label::AttackTgt } else { Label::Normal };
            }
        }
        let (tr, te) = split_dataset(&labels_of(&data), 0.7, true, seed).unwrap();
        let train: Vec<_> = tr.iter().map(|&i| data[i].clone()).collect();
        let t = dtree_train(&train, &TreeParams::default(), seed).unwrap();
        let acc = |idx: &[usize]| {
            let p: Vec<Label> = idx.iter().map(|&i| dtree_predict(&t, &data[i].features).label).collect();
            let y: Vec<Label> = idx.iter().map(|&i| data[i].label).collect();
            evaluate(&p, &y).unwrap().accuracy
        };
        train_acc += acc(&tr);
        test_acc += acc(&te);
    }
    assert!(train_acc >= test_acc, "{train_acc} < {test_acc}");
}

#[test]
fn dtree_balanced_weights_favour_minority() {
    let mut s: Vec<_> = (0..95).map(|i| sample(&[(i % 10) as f64], Label::Normal)).collect();
    s.extend((0..5).map(|_| sample(&[9.0], Label::AttackSrc)));
    let plain = dtree_train(&s, &TreeParams { max_depth: 1, ..Default::default() }, 0).unwrap();
    let balanced = dtree_train(&s, &TreeParams { max_depth: 1, balanced: true, ..Default::default() }, 0).unwrap();
    let q = sample(&[9.0], Label::Normal).features;
    let pp = dtree_predict(&plain, &q);
    let pb = dtree_predict(&balanced, &q);
    assert!(pb.distribution[Label::AttackSrc.index()] > pp.distribution[Label::AttackSrc.index()]);
    assert_eq!(pb.label, Label::AttackSrc);
}

#[test]
fn metrics_formula() {
    // Normal: TP 8, FP 2, FN 2.
    let mut conf = [[0u64; 3]; 3];
    conf[0][0] = 8;
    conf[1][0] = 2;
    conf[0][2] = 2;
    conf[1][1] = 5;
    let m = Metrics::from_confusion(conf);
    let n = m.class(Label::Normal);
    assert!((n.precision - 0.8).abs() < 1e-15 && (n.recall - 0.8).abs() < 1e-15 && (n.f1 - 0.8).abs() < 1e-15);
    assert_eq!(n.support, 10);
    // AttackTgt never occurs and is predicted twice.
    assert_eq!(m.class(Label::AttackTgt).precision, 0.0);
    assert_eq!(m.class(Label::AttackTgt).support, 0);
    // Binary: attack rows {1}, predicted {1,2}: TP 5, FP 2, FN 2.
    assert_eq!((m.attack.support, m.attack.precision), (7, 5.0 / 7.0));
}

#[test]
fn metrics_perfect_and_absent() {
    let y = vec![Label::Normal, Label::AttackSrc, Label::AttackTgt, Label::Normal];
    let m = evaluate(&y, &y).unwrap();
    assert!(m.per_class.iter().all(|c| c.precision == 1.0 && c.recall == 1.0 && c.f1 == 1.0));
    assert_eq!((m.accuracy, m.macro_f1, m.attack.f1), (1.0, 1.0, 1.0));

    let p = vec![Label::Normal; 4];
    let m = evaluate(&p, &y).unwrap();
    assert_eq!(m.class(Label::AttackSrc).precision, 0.0);
    assert_eq!(m.class(Label::AttackSrc).recall, 0.0);
    assert_eq!(m.class(Label::AttackSrc).f1, 0.0);
    assert_eq!(m.confusion, [[2, 0, 0], [1, 0, 0], [1, 0, 0]]);

    assert_eq!(evaluate(&p[..3], &y).unwrap_err(), ClassifyError::LengthMismatch { predictions: 3, labels: 4 });
    assert_eq!(evaluate(&[], &[]).unwrap_err(), ClassifyError::EmptyEvaluation);
}

#[test]
fn repeated_eval_single_run_and_determinism() {
    let data = blobs(30, 12);
    let cfg = ClassifierConfig::Knn { k: 3 };
    let one = repeated_eval(&data, 1, &cfg, 7).unwrap();
    assert_eq!(one.accuracy.mean, one.run_metrics[0].accuracy);
    assert_eq!(one.accuracy.std, 0.0);
    assert_eq!(one.attack.f1.std, 0.0);

    let a = repeated_eval(&data, 4, &cfg, 7).unwrap();
    let b = repeated_eval(&data, 4, &cfg, 7).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.run_metrics[0], one.run_metrics[0]);
    assert!(a.to_table().contains("AttackTgt"));
}

#[test]
fn repeated_eval_one_class() {
    let data: Vec<_> = (0..20).map(|i| sample(&[i as f64], Label::Normal)).collect();
    for cfg in [ClassifierConfig::Knn { k: 5 }, ClassifierConfig::DecisionTree(TreeParams::default())] {
        let s = repeated_eval(&data, 3, &cfg, 0).unwrap();
        assert!(s.run_metrics.iter().all(|m| m.class(Label::Normal).recall == 1.0));
    }
}

#[test]
fn mean_std_population() {
    let m = MeanStd::of([1.0, 3.0]);
    assert_eq!((m.mean, m.std), (2.0, 1.0));
}

#[test]
fn classifier_json_roundtrip() {
    let data = blobs(10, 3);
    for cfg in [ClassifierConfig::Knn { k: 3 }, ClassifierConfig::DecisionTree(TreeParams::default())] {
        let c = Classifier::train(&cfg, &data, 1).unwrap();
        let back: Classifier<f64> = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let cfg_back: ClassifierConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg_back, cfg);
    }
}
