use std::collections::BTreeSet;

use biobench_core::datagen::{generate_reference, plant_clusters, DirectionMode, ReferenceProfile};
use biobench_core::eval::{matched_accuracy, pattern_score};
use biobench_core::hydra::{co_assignment, polytope_assign, Hyperplane, Polytope};
use biobench_core::sustain::{
    expected_z, mcmc_sample, sequence_loglik, EventSet, Sequence, SubtypeModel,
};
use biobench_core::{rng, Matrix, SynthConfig};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn config(k: usize, per: usize, overlap: usize, mode: DirectionMode, seed: u64) -> SynthConfig {
    let n_variables = overlap + k * (per - overlap) + 3;
    SynthConfig {
        n_controls: 20,
        n_patients: 12 * k,
        n_variables,
        n_clusters: k,
        cluster_sizes: vec![12; k],
        direction_mode: mode,
        sigma: 0.5,
        alpha: 0.4,
        vars_per_cluster: per,
        overlap_count: overlap,
        reference_profile: ReferenceProfile::UnitNormal,
        seed,
        fixed_severity: None,
    }
}

fn planted(cfg: &SynthConfig) -> (Matrix, biobench_core::LabeledDataset) {
    let prof = &cfg.reference_profile;
    let c = generate_reference(prof, cfg.n_controls, cfg.n_variables, cfg.seed).unwrap();
    let p = generate_reference(prof, cfg.n_patients, cfg.n_variables, cfg.seed + 1).unwrap();
    let ds = plant_clusters(&c, &p, cfg).unwrap();
    (p.values().clone(), ds)
}

fn mode() -> impl Strategy<Value = DirectionMode> {
    prop_oneof![
        Just(DirectionMode::Increase),
        Just(DirectionMode::Decrease),
        Just(DirectionMode::Mixed),
    ]
}

fn brute_hits(pred: &[usize], truth: &[usize], k: usize) -> usize {
    fn go(
        pos: usize,
        k: usize,
        sigma: &mut Vec<usize>,
        used: &mut [bool],
        conf: &[Vec<usize>],
    ) -> usize {
        if pos == k {
            return (0..k).map(|p| conf[p][sigma[p]]).sum();
        }
        let mut best = 0;
        for t in 0..k {
            if !used[t] {
                used[t] = true;
                sigma.push(t);
                best = best.max(go(pos + 1, k, sigma, used, conf));
                sigma.pop();
                used[t] = false;
            }
        }
        best
    }
    let mut conf = vec![vec![0; k]; k];
    for (p, t) in pred.iter().zip(truth) {
        conf[p - 1][t - 1] += 1;
    }
    go(0, k, &mut Vec::new(), &mut vec![false; k], &conf)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn planting_respects_layout_and_direction(
        k in 1usize..=4,
        per in 2usize..=6,
        overlap_frac in 0.0f64..1.0,
        mode in mode(),
        seed in any::<u64>(),
    ) {
        let overlap = ((per as f64 * overlap_frac) as usize).min(per - 1);
        let cfg = config(k, per, overlap, mode, seed);
        let (base, ds) = planted(&cfg);
        let truth = ds.truth().unwrap();
        let pat = ds.patients();

        for a in &truth.affected {
            prop_assert_eq!(a.len(), per);
        }
        for i in 0..k {
            for j in i + 1..k {
                let a: BTreeSet<_> = truth.affected[i].iter().collect();
                let shared = truth.affected[j].iter().filter(|v| a.contains(v)).count();
                prop_assert_eq!(shared, overlap);
            }
        }
        for s in truth.severity.iter().flatten() {
            prop_assert!((0.0..=1.0).contains(s));
        }
        for (i, &l) in truth.labels.iter().enumerate() {
            let hit: BTreeSet<usize> = truth.affected[l - 1].iter().copied().collect();
            for j in 0..cfg.n_variables {
                let (v, tv) = (base.get(i, j), pat.get(i, j));
                if !hit.contains(&j) {
                    prop_assert_eq!(v.to_bits(), tv.to_bits());
                }
            }
            for (&j, &d) in truth.affected[l - 1].iter().zip(&truth.directions[l - 1]) {
                let (v, tv) = (base.get(i, j), pat.get(i, j));
                // unit-normal reference values are positive, so the sign of the change is the direction
                prop_assume!(v > 0.0);
                match mode {
                    DirectionMode::Increase => prop_assert!(tv >= v),
                    DirectionMode::Decrease => prop_assert!(tv <= v),
                    DirectionMode::Mixed => prop_assert!(f64::from(d) * (tv - v) >= 0.0),
                }
            }
        }
    }

    #[test]
    fn seeds_decide_the_dataset(seed in any::<u64>()) {
        let cfg = config(2, 4, 1, DirectionMode::Mixed, seed);
        let (_, a) = planted(&cfg);
        let (_, b) = planted(&cfg);
        prop_assert!(a == b);
        let other = SynthConfig { seed: seed.wrapping_add(1), ..cfg };
        let (_, c) = planted(&other);
        prop_assert_ne!(&a.truth().unwrap().severity, &c.truth().unwrap().severity);
    }

    #[test]
    fn face_rescaling_keeps_assignments(
        k in 1usize..=4,
        d in 1usize..=5,
        scale in 0.01f64..100.0,
        seed in any::<u64>(),
    ) {
        let mut r = rng::stream(seed, "faces", 0);
        let faces: Vec<Hyperplane> = (0..k)
            .map(|_| Hyperplane {
                w: (0..d).map(|_| r.random_range(-1.0..1.0)).collect(),
                b: r.random_range(-1.0..1.0),
            })
            .collect();
        let x = Matrix::from_vec(30, d, (0..30 * d).map(|_| r.random_range(-3.0..3.0)).collect())
            .unwrap();
        let scaled = Polytope {
            faces: faces
                .iter()
                .map(|f| Hyperplane {
                    w: f.w.iter().map(|v| v * scale).collect(),
                    b: f.b * scale,
                })
                .collect(),
        };
        let p = Polytope { faces };
        prop_assert_eq!(polytope_assign(&p, &x).unwrap(), polytope_assign(&scaled, &x).unwrap());
    }

    #[test]
    fn co_assignment_is_a_similarity(
        runs in prop::collection::vec(prop::collection::vec(1usize..=4, 15), 1..6),
    ) {
        let m = co_assignment(&runs).unwrap();
        for i in 0..15 {
            prop_assert_eq!(m.get(i, i), 1.0);
            for j in 0..15 {
                prop_assert_eq!(m.get(i, j), m.get(j, i));
                prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
            }
        }
    }

    #[test]
    fn loglik_ignores_subject_order(seed in any::<u64>(), n_vars in 1usize..=4) {
        let set = EventSet::default_for(n_vars);
        let mut r = rng::stream(seed, "ll", 0);
        let seq = Sequence::random(&set, &mut r);
        let n = 25;
        let z = Matrix::from_vec(n, n_vars, (0..n * n_vars).map(|_| r.random_range(-1.0..6.0)).collect())
            .unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.reverse();
        order.rotate_left((seed % n as u64) as usize);
        let noise = vec![1.0; n_vars];
        let a = sequence_loglik(&z, &seq, &set, &noise).unwrap();
        let b = sequence_loglik(&z.select_rows(&order), &seq, &set, &noise).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn expected_profile_never_falls(seed in any::<u64>(), n_vars in 1usize..=5) {
        let set = EventSet::default_for(n_vars);
        let seq = Sequence::random(&set, &mut rng::stream(seed, "ez", 0));
        let mut prev = expected_z(&seq, 0, &set).unwrap();
        for stage in 1..=set.n_events() {
            let cur = expected_z(&seq, stage, &set).unwrap();
            for (a, b) in prev.iter().zip(&cur) {
                prop_assert!(b >= a);
            }
            prev = cur;
        }
    }

    #[test]
    fn matching_is_label_symmetric_and_exhaustive(
        k in 1usize..=8,
        seed in any::<u64>(),
        n in 1usize..=30,
    ) {
        let mut r = rng::stream(seed, "ma", 0);
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(1..=k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(1..=k)).collect();
        let acc = matched_accuracy(&pred, &truth).unwrap().accuracy;
        prop_assert_eq!(acc, brute_hits(&pred, &truth, k) as f64 / n as f64);

        let shift = |v: &[usize], by: usize| -> Vec<usize> { v.iter().map(|l| (l - 1 + by) % k + 1).collect() };
        let by = r.random_range(0..k);
        prop_assert_eq!(acc, matched_accuracy(&shift(&pred, by), &truth).unwrap().accuracy);
        prop_assert_eq!(acc, matched_accuracy(&pred, &shift(&truth, by)).unwrap().accuracy);
        prop_assert_eq!(acc, matched_accuracy(&truth, &pred).unwrap().accuracy);
    }

    #[test]
    fn pattern_score_ignores_order_and_scale(
        k in 1usize..=4,
        seed in any::<u64>(),
        scale in 0.01f64..100.0,
    ) {
        let mut r = rng::stream(seed, "ps", 0);
        let mut vecs = |n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|_| (0..6).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
        };
        let rec = vecs(k);
        let truth = vecs(k);
        let base = pattern_score(&rec, &truth).unwrap();
        let mut rotated = rec.clone();
        rotated.rotate_left(1);
        let scaled: Vec<Vec<f64>> = truth.iter().map(|t| t.iter().map(|v| v * scale).collect()).collect();
        prop_assert!((pattern_score(&rotated, &truth).unwrap() - base).abs() < 1e-12);
        prop_assert!((pattern_score(&rec, &scaled).unwrap() - base).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mcmc_keeps_threshold_order(seed in any::<u64>(), n_vars in 2usize..=4) {
        let set = EventSet::default_for(n_vars);
        let mut r = rng::stream(seed, "mc", 0);
        let model = SubtypeModel {
            events: set.clone(),
            sequences: vec![Sequence::random(&set, &mut r), Sequence::random(&set, &mut r)],
            fractions: vec![0.5, 0.5],
            noise: vec![1.0; n_vars],
        };
        let z = Matrix::from_vec(20, n_vars, (0..20 * n_vars).map(|_| r.random_range(0.0..5.0)).collect())
            .unwrap();
        let out = mcmc_sample(&z, &model, 200, seed).unwrap();
        for chain in &out.samples {
            for s in chain {
                prop_assert!(s.validate(&set).is_ok());
            }
        }
    }
}

/// Mean relative change of one affected variable against a direct simulation
/// of `alpha * s * max(eta, 0)`.
#[test]
fn mean_perturbation_matches_scalar_product() {
    let n = 4000;
    let cfg = SynthConfig {
        n_controls: 10,
        n_patients: n,
        n_variables: 4,
        n_clusters: 1,
        cluster_sizes: vec![n],
        direction_mode: DirectionMode::Increase,
        sigma: 0.8,
        alpha: 0.3,
        vars_per_cluster: 2,
        overlap_count: 0,
        reference_profile: ReferenceProfile::UnitNormal,
        seed: 21,
        fixed_severity: None,
    };
    let (base, ds) = planted(&cfg);
    let j = ds.truth().unwrap().affected[0][0];
    let pat = ds.patients();
    let rel: Vec<f64> = (0..n)
        .map(|i| (pat.get(i, j) - base.get(i, j)) / base.get(i, j))
        .collect();
    let mean = rel.iter().sum::<f64>() / n as f64;
    let var = rel.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();

    let mut r = rng::stream(5, "oracle", 0);
    let eta = Normal::new(1.0, cfg.sigma).unwrap();
    let m = 400_000;
    let oracle = (0..m)
        .map(|_| cfg.alpha * r.random::<f64>() * eta.sample(&mut r).max(0.0))
        .sum::<f64>()
        / m as f64;
    assert!(
        (mean - oracle).abs() <= 3.0 * se,
        "{mean} vs {oracle} (se {se})"
    );
}
