use biobench_core::datagen::{generate_reference, plant_clusters, DirectionMode, ReferenceProfile};
use biobench_core::eval::matched_accuracy;
use biobench_core::hydra::{fit_hydra, HydraConfig, HydraFit};
use biobench_core::{rng, CohortMatrix, LabeledDataset, Role, SynthConfig};
use rand::seq::SliceRandom;

/// Two clusters of 60 on 12 variables, 4 affected each, with a modest shift.
fn cohort(seed: u64) -> LabeledDataset {
    let cfg = SynthConfig {
        n_controls: 80,
        n_patients: 120,
        n_variables: 12,
        n_clusters: 2,
        cluster_sizes: vec![60, 60],
        direction_mode: DirectionMode::Decrease,
        sigma: 0.1,
        alpha: 0.25,
        vars_per_cluster: 4,
        overlap_count: 0,
        reference_profile: ReferenceProfile::UnitNormal,
        seed,
        fixed_severity: None,
    };
    let c = generate_reference(&cfg.reference_profile, 80, 12, rng::derive(seed, "c", 0)).unwrap();
    let p = generate_reference(&cfg.reference_profile, 120, 12, rng::derive(seed, "p", 0)).unwrap();
    plant_clusters(&c, &p, &cfg).unwrap()
}

fn cfg() -> HydraConfig {
    HydraConfig {
        k: 2,
        n_init: 6,
        seed: 3,
        ..Default::default()
    }
}

fn accuracy(fit: &HydraFit, truth: &[usize]) -> f64 {
    matched_accuracy(&fit.labels, truth).unwrap().accuracy
}

#[test]
fn objective_never_drops_within_an_initialization() {
    let fit = fit_hydra(&cohort(1), &cfg()).unwrap();
    let tol = cfg().tol;
    for init in &fit.report.inits {
        for w in init.objective.windows(2) {
            assert!(
                w[1] >= w[0] - tol * w[0].abs().max(1.0),
                "{:?}",
                init.objective
            );
        }
    }
}

#[test]
fn thread_count_does_not_change_the_fit() {
    let ds = cohort(2);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit_hydra(&ds, &cfg()).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.polytope, b.polytope);
    assert_eq!(a.report, b.report);
}

#[test]
fn accuracy_ignores_truth_names_and_row_order() {
    let ds = cohort(4);
    let truth = ds.truth().unwrap().labels.clone();
    let fit = fit_hydra(&ds, &cfg()).unwrap();
    let acc = accuracy(&fit, &truth);
    assert!(acc > 0.8, "accuracy {acc}");

    let renamed: Vec<usize> = truth.iter().map(|l| 3 - l).collect();
    assert_eq!(acc, accuracy(&fit, &renamed));

    // shuffle the patient rows and carry the truth labels along
    let n_c = ds.n_controls();
    let mut perm: Vec<usize> = (0..ds.n_patients()).collect();
    perm.shuffle(&mut rng::stream(9, "rows", 0));
    let mut rows: Vec<usize> = (0..n_c).collect();
    rows.extend(perm.iter().map(|&i| n_c + i));
    let mut t = ds.truth.clone().unwrap();
    t.labels = perm.iter().map(|&i| truth[i]).collect();
    t.severity = perm.iter().map(|&i| t.severity[i]).collect();
    let shuffled = LabeledDataset::new(
        rows.iter()
            .map(|&i| ds.participant_ids[i].clone())
            .collect(),
        CohortMatrix::new(
            ds.data.variable_names().to_vec(),
            ds.data.values().select_rows(&rows),
            ds.data.families().to_vec(),
        )
        .unwrap(),
        rows.iter().map(|&i| ds.roles[i]).collect::<Vec<Role>>(),
        Some(t.clone()),
        ds.provenance.clone(),
    )
    .unwrap();
    let refit = fit_hydra(&shuffled, &cfg()).unwrap();
    assert_eq!(acc, accuracy(&refit, &t.labels));
    let carried: Vec<usize> = perm.iter().map(|&i| fit.labels[i]).collect();
    assert_eq!(refit.labels, carried);
}
