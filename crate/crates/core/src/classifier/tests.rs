use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space(n: usize) -> LabelSpace {
    LabelSpace::new((0..n).map(|i| format!("L{i}"))).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, labels: usize, dim: usize) -> SoftmaxModel {
    let w = (0..labels * dim).map(|_| rng.random_range(-2.0..2.0)).collect();
    let b = (0..labels).map(|_| rng.random_range(-1.0..1.0)).collect();
    SoftmaxModel::from_parts(space(labels), dim, w, b, 0).unwrap()
}

/// Two blobs at ±(3, 3), singleton labels.
fn separable(n: usize, seed: u64) -> Vec<PartialExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let y = i % 2;
            let c = if y == 0 { 3.0 } else { -3.0 };
            let x = vec![c + rng.random_range(-1.0..1.0), c + rng.random_range(-1.0..1.0)];
            PartialExample::new(x, vec![y], (i % 3) as u32)
        })
        .collect()
}

fn as_test(ex: &[PartialExample]) -> Vec<LabeledFace> {
    ex.iter()
        .map(|e| LabeledFace {
            x: e.x.clone(),
            label: e.original[0],
        })
        .collect()
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let model = random_model(&mut rng, 4, 3);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ex = PartialExample::new(x, vec![1, 3], 0);
        for kind in [LossKind::AveCe, LossKind::HardEm] {
            let (_, g) = gradient(&model, &ex, kind);
            let h = 1e-6;
            for i in 0..model.weights().len() {
                let mut plus = model.clone();
                plus.weights_mut()[i] += h;
                let mut minus = model.clone();
                minus.weights_mut()[i] -= h;
                let fd = (loss(&plus, &ex, kind) - loss(&minus, &ex, kind)) / (2.0 * h);
                assert!((fd - g.weights[i]).abs() < 1e-6, "{kind:?} w{i}: {fd} vs {}", g.weights[i]);
            }
        }
    }
}

#[test]
fn separable_singletons_fit_perfectly() {
    let data = separable(200, 3);
    for schedule in [Schedule::AllAtOnce, Schedule::Incremental] {
        let cfg = TrainConfig {
            schedule,
            relabel: false,
            ..Default::default()
        };
        let trained = train(&space(2), &data, &cfg).unwrap();
        let report = evaluate_accuracy(&trained.model, &as_test(&data));
        assert_eq!(report.micro_accuracy, 1.0);
    }
}

#[test]
fn incremental_visits_episodes_in_order() {
    let data = separable(90, 4);
    let cfg = TrainConfig {
        relabel: true,
        ..Default::default()
    };
    let t = train(&space(2), &data, &cfg).unwrap();
    let eps: Vec<_> = t.log.iter().map(|m| m.episode).collect();
    assert_eq!(eps, [Some(0), Some(1), Some(2), None]);
    let sizes: Vec<_> = t.log.iter().map(|m| m.examples).collect();
    assert_eq!(sizes, [30, 60, 90, 90]);
}

#[test]
fn single_stage_relabel_runs_configured_rounds() {
    let data: Vec<_> = separable(40, 5)
        .into_iter()
        .map(|mut e| {
            e.episode = 0;
            e
        })
        .collect();
    let cfg = TrainConfig {
        relabel: true,
        relabel_iterations: 4,
        ..Default::default()
    };
    let t = train(&space(2), &data, &cfg).unwrap();
    assert_eq!(t.log.len(), 5);
    assert!(t.log[..4].iter().all(|m| m.examples == 40 && m.relabeled == 40));
    let no_relabel = TrainConfig {
        relabel: false,
        ..cfg
    };
    assert_eq!(train(&space(2), &data, &no_relabel).unwrap().log.len(), 1);
}

#[test]
fn training_is_deterministic() {
    let data = separable(100, 6);
    let cfg = TrainConfig {
        seed: 99,
        ..Default::default()
    };
    let a = train(&space(2), &data, &cfg).unwrap().model;
    let b = train(&space(2), &data, &cfg).unwrap().model;
    let bits = |m: &SoftmaxModel| m.weights().iter().chain(m.biases()).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
    let c = train(&space(2), &data, &TrainConfig { seed: 100, ..cfg }).unwrap().model;
    assert_ne!(bits(&a), bits(&c));
}

#[test]
fn singleton_losses_train_identically() {
    let data = separable(64, 7);
    let ave = TrainConfig {
        loss: LossKind::AveCe,
        relabel: false,
        ..Default::default()
    };
    let hard = TrainConfig {
        loss: LossKind::HardEm,
        ..ave
    };
    let a = train(&space(2), &data, &ave).unwrap().model;
    let b = train(&space(2), &data, &hard).unwrap().model;
    assert_eq!(a.weights(), b.weights());
    assert_eq!(a.biases(), b.biases());
}

#[test]
fn train_rejects_bad_input() {
    let cfg = TrainConfig::default();
    assert!(matches!(train(&space(2), &[], &cfg), Err(crate::Error::NoExamples)));
    let bad_dim = vec![
        PartialExample::new(vec![1.0, 2.0], vec![0], 0),
        PartialExample::new(vec![1.0], vec![0], 0),
    ];
    assert!(matches!(train(&space(2), &bad_dim, &cfg), Err(crate::Error::InvalidExample { index: 1, .. })));
    let bad_label = vec![PartialExample::new(vec![1.0], vec![5], 0)];
    assert!(train(&space(2), &bad_label, &cfg).is_err());
    let empty = vec![PartialExample::new(vec![1.0], vec![], 0)];
    assert!(train(&space(2), &empty, &cfg).is_err());
    for bad in [
        TrainConfig { learning_rate: 0.0, ..cfg },
        TrainConfig { epochs_per_stage: 0, ..cfg },
        TrainConfig { batch_size: 0, ..cfg },
    ] {
        assert!(matches!(
            train(&space(2), &separable(4, 1), &bad),
            Err(crate::Error::InvalidTrainConfig(_))
        ));
    }
}

#[test]
fn divergence_is_reported() {
    let data = vec![
        PartialExample::new(vec![1e200, -1e200], vec![0], 0),
        PartialExample::new(vec![-1e200, 1e200], vec![1], 0),
    ];
    let cfg = TrainConfig {
        learning_rate: 1e10,
        relabel: false,
        ..Default::default()
    };
    assert!(matches!(train(&space(2), &data, &cfg), Err(crate::Error::Diverged { .. })));
}

/// Brute-force prototype relabel written directly from the definition.
fn relabel_oracle(model: &SoftmaxModel, ex: &[PartialExample]) -> Vec<Vec<usize>> {
    let n = model.label_space().len();
    let assigned: Vec<usize> = ex
        .iter()
        .map(|e| {
            let p = model.predict(&e.x).unwrap();
            *e.original
                .iter()
                .max_by(|&&a, &&b| p[a].partial_cmp(&p[b]).unwrap().then(b.cmp(&a)))
                .unwrap()
        })
        .collect();
    let protos: Vec<Option<Vec<f64>>> = (0..n)
        .map(|c| {
            let members: Vec<&PartialExample> = ex.iter().zip(&assigned).filter(|(_, &a)| a == c).map(|(e, _)| e).collect();
            if members.is_empty() {
                return None;
            }
            let d = members[0].x.len();
            Some((0..d).map(|j| members.iter().map(|m| m.x[j]).sum::<f64>() / members.len() as f64).collect())
        })
        .collect();
    ex.iter()
        .map(|e| {
            let mut cands: Vec<(f64, usize)> = e
                .original
                .iter()
                .filter_map(|&c| {
                    protos[c].as_ref().map(|p| {
                        (p.iter().zip(&e.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), c)
                    })
                })
                .collect();
            cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            match cands.first() {
                Some(&(_, c)) => vec![c],
                None => e.candidates.clone(),
            }
        })
        .collect()
}

#[test]
fn relabel_two_clusters_matches_brute_force() {
    // 20 points: 12 around (4,0) truly A, 8 around (-4,0) truly B; all {A,B}.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let ex: Vec<PartialExample> = (0..20)
        .map(|i| {
            let cx = if i < 12 { 4.0 } else { -4.0 };
            PartialExample::new(
                vec![cx + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                vec![0, 1],
                0,
            )
        })
        .collect();
    // a model that already leans the right way: logit_A = x0, logit_B = -x0
    let model = SoftmaxModel::from_parts(space(2), 2, vec![1.0, 0.0, -1.0, 0.0], vec![0.0, 0.0], 0).unwrap();
    let out = prototype_relabel(&model, &ex);
    let got: Vec<Vec<usize>> = out.examples.iter().map(|e| e.candidates.clone()).collect();
    assert_eq!(got, relabel_oracle(&model, &ex));
    for (i, e) in out.examples.iter().enumerate() {
        assert_eq!(e.candidates, vec![if i < 12 { 0 } else { 1 }]);
        assert_eq!(e.original, vec![0, 1]);
    }
    assert!(out.unchanged.is_empty());
}

#[test]
fn relabel_keeps_singletons() {
    let ex = separable(10, 2);
    let model = SoftmaxModel::zeros(space(2), 2, 0);
    let out = prototype_relabel(&model, &ex);
    for (a, b) in out.examples.iter().zip(&ex) {
        assert_eq!(a.candidates, b.candidates);
    }
}

#[test]
fn relabel_distance_tie_goes_to_lower_label() {
    // label 0's prototype sits far away at 50; labels 1 and 2 sit at +2 and
    // -2, so the probe at 0 is equidistant from both.
    let ex = vec![
        PartialExample::new(vec![100.0], vec![0], 0),
        PartialExample::new(vec![2.0], vec![1], 0),
        PartialExample::new(vec![-2.0], vec![2], 0),
        PartialExample::new(vec![0.0], vec![0, 1, 2], 0),
    ];
    let model = SoftmaxModel::from_parts(space(3), 1, vec![0.0; 3], vec![10.0, 0.0, 0.0], 0).unwrap();
    let out = prototype_relabel(&model, &ex);
    assert_eq!(out.prototypes[0], Some(vec![50.0]));
    assert_eq!(out.examples[3].candidates, vec![1]);
    assert_eq!(out.examples[3].candidates, relabel_oracle(&model, &ex)[3]);
}

#[test]
fn relabel_probability_tie_goes_to_lower_label() {
    // zero model: every candidate is equally likely, so the probe joins
    // label 0 and pulls its prototype to 1.0.
    let ex = vec![
        PartialExample::new(vec![2.0], vec![0], 0),
        PartialExample::new(vec![-2.0], vec![1], 0),
        PartialExample::new(vec![0.0], vec![0, 1], 0),
    ];
    let model = SoftmaxModel::zeros(space(2), 1, 0);
    let out = prototype_relabel(&model, &ex);
    assert_eq!(out.prototypes[0], Some(vec![1.0]));
    assert_eq!(out.prototypes[1], Some(vec![-2.0]));
    assert_eq!(out.examples[2].candidates, vec![0]);
}

#[test]
fn kmeans_single_cluster_is_majority() {
    let train: Vec<_> = (0..10)
        .map(|i| PartialExample::new(vec![i as f64], vec![usize::from(i >= 7)], 0))
        .collect();
    let test: Vec<_> = (0..10)
        .map(|i| LabeledFace {
            x: vec![i as f64],
            label: usize::from(i >= 6),
        })
        .collect();
    let acc = kmeans_baseline(&space(2), &train, &test, &KMeansConfig::new(1, 0)).unwrap();
    assert_eq!(acc, 0.6);
}

#[test]
fn kmeans_separated_clusters_are_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let centers = [[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for i in 0..90 {
        let c = i % 3;
        let x = vec![centers[c][0] + rng.random_range(-1.0..1.0), centers[c][1] + rng.random_range(-1.0..1.0)];
        if i < 60 {
            train.push(PartialExample::new(x, vec![c], 0));
        } else {
            test.push(LabeledFace { x, label: c });
        }
    }
    let acc = kmeans_baseline(&space(3), &train, &test, &KMeansConfig::new(3, 1)).unwrap();
    assert_eq!(acc, 1.0);
}

/// Straightforward Lloyd's algorithm, written independently of the library.
fn lloyd_oracle(points: &[Vec<f64>], mut cents: Vec<Vec<f64>>, iters: usize) -> Vec<usize> {
    let assign = |cents: &Vec<Vec<f64>>| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                let d: Vec<f64> = cents
                    .iter()
                    .map(|c| c.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum())
                    .collect();
                let mut best = 0;
                for j in 1..d.len() {
                    if d[j] < d[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    };
    for _ in 0..iters {
        let a = assign(&cents);
        for (j, c) in cents.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&a).filter(|(_, &x)| x == j).map(|(p, _)| p).collect();
            if !members.is_empty() {
                for d in 0..c.len() {
                    c[d] = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
                }
            }
        }
    }
    assign(&cents)
}

#[test]
fn lloyd_matches_independent_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let points: Vec<Vec<f64>> = (0..30)
        .map(|i| {
            let c = (i % 3) as f64 * 4.0;
            vec![c + rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]
        })
        .collect();
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    let mut seed_rng = ChaCha8Rng::seed_from_u64(2);
    let init = kmeans_plus_plus(&refs, 3, &mut seed_rng);
    let fit = lloyd(&refs, init.clone(), 300, 1e-6);
    assert_eq!(fit.assignments, lloyd_oracle(&points, init, 300));
    assert!(fit.iterations < 300);
}

#[test]
fn lloyd_reseeds_empty_cluster() {
    let points: Vec<Vec<f64>> = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.1]];
    let refs: Vec<&[f64]> = points.iter().map(Vec::as_slice).collect();
    // second centroid is far from everything and starts empty
    let fit = lloyd(&refs, vec![vec![5.0], vec![1000.0]], 300, 1e-6);
    let mut a = fit.assignments.clone();
    a.dedup();
    assert_eq!(a.len(), 2);
}

#[test]
fn naive_baseline_starts_uniform_and_learns_clean_labels() {
    let data = separable(100, 9);
    let cfg = TrainConfig {
        epochs_per_stage: 1,
        learning_rate: 1e-300,
        ..Default::default()
    };
    let m = naive_multilabel_baseline(&space(2), &data, &cfg).unwrap();
    for p in m.probabilities(&[1.0, -1.0]) {
        assert!((p - 0.5).abs() < 1e-12);
    }
    let cfg = TrainConfig::default();
    let naive = naive_multilabel_baseline(&space(2), &data, &cfg).unwrap();
    let soft = train(&space(2), &data, &TrainConfig { relabel: false, ..cfg }).unwrap().model;
    let test = as_test(&separable(100, 10));
    assert_eq!(evaluate_accuracy(&naive, &test).micro_accuracy, 1.0);
    assert_eq!(evaluate_accuracy(&soft, &test).micro_accuracy, 1.0);
}

struct Lookup(LabelSpace, Vec<usize>);

impl Classifier for Lookup {
    fn label_space(&self) -> &LabelSpace {
        &self.0
    }
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.0.len()];
        s[self.1[x[0] as usize]] = 1.0;
        s
    }
}

#[test]
fn accuracy_report_hand_fixture() {
    // label 0: 2 faces, 1 right; label 1: 3 faces, 1 right; label 2: 5 faces, 4 right
    let truth = [0, 0, 1, 1, 1, 2, 2, 2, 2, 2];
    let preds = vec![0, 1, 1, 0, 2, 2, 2, 2, 2, 0];
    let test: Vec<_> = truth
        .iter()
        .enumerate()
        .map(|(i, &y)| LabeledFace { x: vec![i as f64], label: y })
        .collect();
    let r = evaluate_accuracy(&Lookup(space(3), preds), &test);
    assert_eq!(r.micro_accuracy, 0.6);
    assert_eq!(r.per_label["L1"].correct, 1);
    // r over (2, 0.5), (3, 1/3), (5, 0.8)
    let want = 0.768_957_814_901_081_3;
    assert!((r.frequency_accuracy_r.unwrap() - want).abs() < 1e-12);
}

#[test]
fn accuracy_report_edge_cases() {
    let test: Vec<_> = [0, 0, 1, 2].iter().enumerate().map(|(i, &y)| LabeledFace { x: vec![i as f64], label: y }).collect();
    let perfect = evaluate_accuracy(&Lookup(space(3), vec![0, 0, 1, 2]), &test);
    assert_eq!(perfect.micro_accuracy, 1.0);
    assert!(perfect.per_label.values().all(|l| l.accuracy == 1.0));
    // constant accuracy -> correlation undefined
    assert_eq!(perfect.frequency_accuracy_r, None);
    let constant = evaluate_accuracy(&Lookup(space(3), vec![0, 0, 0, 0]), &test);
    assert_eq!(constant.micro_accuracy, 0.5);
    let one_label = evaluate_accuracy(&Lookup(space(3), vec![0, 0]), &test[..2]);
    assert_eq!(one_label.frequency_accuracy_r, None);
}

proptest! {
    #[test]
    fn probabilities_are_a_distribution(seed in any::<u64>(), labels in 1usize..6, dim in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, labels, dim);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let p = m.predict(&x).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn hard_em_never_exceeds_ave_ce(seed in any::<u64>(), labels in 2usize..6, dim in 1usize..8, mask in 1u32..32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, labels, dim);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut cands: Vec<usize> = (0..labels).filter(|i| mask & (1 << i) != 0).collect();
        if cands.is_empty() { cands.push(0); }
        let ex = PartialExample::new(x, cands, 0);
        prop_assert!(loss_hard_em(&m, &ex) <= loss_ave_ce(&m, &ex) + 1e-12);
    }

    #[test]
    fn relabel_stays_inside_original(seed in any::<u64>(), n in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_model(&mut rng, 4, 3);
        let ex: Vec<_> = (0..n).map(|_| {
            let x = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut c: Vec<usize> = (0..4).filter(|_| rng.random_bool(0.5)).collect();
            if c.is_empty() { c.push(rng.random_range(0..4)); }
            PartialExample::new(x, c, 0)
        }).collect();
        let out = prototype_relabel(&m, &ex);
        for (a, b) in out.examples.iter().zip(&ex) {
            prop_assert!(a.candidates.iter().all(|c| b.original.contains(c)));
            prop_assert_eq!(&a.original, &b.original);
        }
    }
}
