use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{
    CohortMatrix, DirectionMode, GroundTruth, LabeledDataset, Provenance, Role, SynthConfig,
    SCHEMA_VERSION,
};
use crate::{rng, Error, Result};

/// Transform `base_patients` into `cfg.n_clusters` planted clusters and join
/// them with the untouched `controls`.
pub fn plant_clusters(
    controls: &CohortMatrix,
    base_patients: &CohortMatrix,
    cfg: &SynthConfig,
) -> Result<LabeledDataset> {
    cfg.validate()?;
    if base_patients.n_rows() != cfg.n_patients {
        return Err(Error::Config(format!(
            "{} base patient rows, config expects {}",
            base_patients.n_rows(),
            cfg.n_patients
        )));
    }
    if base_patients.n_vars() != cfg.n_variables || controls.n_vars() != cfg.n_variables {
        return Err(Error::Config("variable count differs from config".into()));
    }
    if controls.variable_names() != base_patients.variable_names() {
        return Err(Error::Config(
            "controls and patients use different variables".into(),
        ));
    }

    let k = cfg.n_clusters;
    let (affected, directions) = layout(cfg);

    let mut labels: Vec<usize> = cfg
        .cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c + 1, n))
        .collect();
    labels.shuffle(&mut rng::stream(cfg.seed, "labels", 0));

    let eta_dist = Normal::new(1.0, cfg.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let families = base_patients.families();
    let mut values = base_patients.values().clone();
    let mut severity = Vec::with_capacity(cfg.n_patients);
    for (i, &label) in labels.iter().enumerate() {
        let mut r = rng::stream(cfg.seed, "patient", i as u64);
        let s = match cfg.fixed_severity {
            Some(v) => [v; 3],
            None => [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()],
        };
        let c = label - 1;
        let row = values.row_mut(i);
        for (&j, &d) in affected[c].iter().zip(&directions[c]) {
            let eta = eta_dist.sample(&mut r).max(0.0);
            let v = row[j];
            row[j] = v + f64::from(d) * v * s[families[j].severity_component()] * eta * cfg.alpha;
        }
        severity.push(s);
    }
    debug_assert_eq!(affected.len(), k);

    let all = controls.values().vstack(&values)?;
    let data = CohortMatrix::new(controls.variable_names().to_vec(), all, families.to_vec())?;
    let n_c = controls.n_rows();
    let mut ids: Vec<String> = (1..=n_c).map(|i| format!("C{i:04}")).collect();
    ids.extend((1..=cfg.n_patients).map(|i| format!("P{i:04}")));
    let mut roles = vec![Role::Control; n_c];
    roles.extend(std::iter::repeat_n(Role::Patient, cfg.n_patients));

    LabeledDataset::new(
        ids,
        data,
        roles,
        Some(GroundTruth {
            labels,
            affected,
            directions,
            severity,
        }),
        Provenance {
            preset: "custom".into(),
            config: Some(cfg.clone()),
            schema_version: SCHEMA_VERSION,
            note: None,
        },
    )
}

/// Affected sets: a pool of `overlap_count` variables shared by every cluster
/// plus disjoint per-cluster remainders. Signs are fixed per (cluster, variable).
fn layout(cfg: &SynthConfig) -> (Vec<Vec<usize>>, Vec<Vec<i8>>) {
    let mut order: Vec<usize> = (0..cfg.n_variables).collect();
    order.shuffle(&mut rng::stream(cfg.seed, "layout", 0));
    let shared = &order[..cfg.overlap_count];
    let unique = cfg.vars_per_cluster - cfg.overlap_count;
    let mut affected = Vec::with_capacity(cfg.n_clusters);
    let mut directions = Vec::with_capacity(cfg.n_clusters);
    for c in 0..cfg.n_clusters {
        let start = cfg.overlap_count + c * unique;
        let mut set: Vec<usize> = shared.to_vec();
        set.extend_from_slice(&order[start..start + unique]);
        set.sort_unstable();
        let mut r = rng::stream(cfg.seed, "direction", c as u64);
        let signs = set
            .iter()
            .map(|_| match cfg.direction_mode {
                DirectionMode::Increase => 1,
                DirectionMode::Decrease => -1,
                DirectionMode::Mixed => {
                    if r.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
            })
            .collect();
        affected.push(set);
        directions.push(signs);
    }
    (affected, directions)
}
