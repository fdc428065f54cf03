//! Adversarially trained pattern models: categorical mappings and continuous R-indices.

mod checkpoint;
mod gradcheck;
mod nets;
mod params;
mod smile;
mod surreal;

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Matrix, Result};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{grad_check, Differentiable};
pub use params::{frobenius_norms, project_frobenius, Block, Momentum, Params};
pub use smile::{
    fit_smile, fit_smile_within, smile_assign, SmileAssignment, SmileBatch, SmileModel,
};
pub use surreal::{
    fit_surreal, fit_surreal_within, r_index_labels, r_indices, SurrealBatch, SurrealModel,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    /// Discriminator learning rate as a multiple of `lr`.
    pub disc_lr_scale: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub n_steps: usize,
    /// Width of the discriminator's hidden layer.
    pub hidden: usize,
    pub lambda_adv: f64,
    pub lambda_change: f64,
    pub lambda_cluster: f64,
    pub lambda_sparse: f64,
    pub lambda_mono: f64,
    pub lambda_orth: f64,
    pub lambda_recon: f64,
    /// Frobenius radius for every mapping matrix.
    pub l_bound: f64,
    /// Share of controls held out for pattern directions.
    pub holdout_frac: f64,
    /// Training-curve sampling interval in steps.
    pub log_every: usize,
    /// Scale of the patient-seeded starting offsets; 0 keeps the small random start.
    pub seed_offset_scale: f64,
    /// Independent trainings; the one whose mapped modes best cover the patients is kept.
    pub n_repeats: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.02,
            disc_lr_scale: 0.05,
            momentum: 0.9,
            batch_size: 64,
            n_steps: 3000,
            hidden: 32,
            lambda_adv: 1.0,
            lambda_change: 0.002,
            lambda_cluster: 1.0,
            lambda_sparse: 0.001,
            lambda_mono: 1.0,
            lambda_orth: 0.5,
            lambda_recon: 1.0,
            l_bound: 1.0,
            holdout_frac: 0.2,
            log_every: 50,
            n_repeats: 3,
            seed_offset_scale: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults tuned for the categorical mapping model.
    pub fn smile() -> Self {
        TrainConfig {
            n_steps: 1000,
            disc_lr_scale: 0.05,
            ..Default::default()
        }
    }

    /// Defaults tuned for the R-index model. Longer runs let the adversarial
    /// term blend the patterns together.
    pub fn surreal() -> Self {
        TrainConfig {
            n_steps: 600,
            disc_lr_scale: 0.3,
            lambda_recon: 0.1,
            lambda_orth: 2.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("lr", self.lr),
            ("disc_lr_scale", self.disc_lr_scale),
            ("momentum", self.momentum),
            ("lambda_adv", self.lambda_adv),
            ("lambda_change", self.lambda_change),
            ("lambda_cluster", self.lambda_cluster),
            ("lambda_sparse", self.lambda_sparse),
            ("lambda_mono", self.lambda_mono),
            ("lambda_orth", self.lambda_orth),
            ("lambda_recon", self.lambda_recon),
            ("l_bound", self.l_bound),
            ("seed_offset_scale", self.seed_offset_scale),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "{name} must be finite and nonnegative"
                )));
            }
        }
        if self.n_steps == 0
            || self.batch_size == 0
            || self.hidden == 0
            || self.log_every == 0
            || self.n_repeats == 0
        {
            return Err(Error::Config(
                "n_steps, batch_size, hidden, log_every and n_repeats must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.holdout_frac) {
            return Err(Error::Config("holdout_frac must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Loss components sampled during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrainingCurve {
    fn new(columns: &[&str]) -> Self {
        TrainingCurve {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn check_data(controls: &Matrix, patients: &Matrix) -> Result<()> {
    if controls.cols() != patients.cols() || controls.cols() == 0 {
        return Err(Error::Input(
            "controls and patients must share a nonzero column count".into(),
        ));
    }
    if controls.rows() < 2 || patients.rows() == 0 {
        return Err(Error::Input(
            "need at least 2 controls and 1 patient".into(),
        ));
    }
    if !controls.all_finite() || !patients.all_finite() {
        return Err(Error::Input("inputs contain non-finite values".into()));
    }
    Ok(())
}

/// Split controls into training rows and the mean of a held-out subset.
fn split_controls(controls: &Matrix, frac: f64, seed: u64) -> (Matrix, Vec<f64>) {
    let n = controls.rows();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, "holdout", 0));
    let n_hold = ((n as f64 * frac).round() as usize).min(n - 1);
    let (hold, train) = idx.split_at(n_hold);
    let mut train = train.to_vec();
    train.sort_unstable();
    let held = if hold.is_empty() {
        controls.column_means()
    } else {
        controls.select_rows(hold).column_means()
    };
    (controls.select_rows(&train), held)
}

fn unit(v: Vec<f64>) -> Result<Vec<f64>> {
    let n = crate::matrix::norm(&v);
    if !(n > 0.0) {
        return Err(Error::Degenerate("pattern direction has zero norm".into()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// Starting offsets: k-means centroids of the patient rows, scaled by `scale`.
fn seeded_offsets(patients: &Matrix, k: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let centers = match crate::eval::kmeans(patients, k, rng::derive(seed, "offset-seeds", 0), 4) {
        Ok(res) => res.centroids,
        Err(_) => {
            crate::eval::kmeans::plus_plus(patients, k, &mut rng::stream(seed, "offset-seeds", 0))
        }
    };
    centers
        .iter_rows()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect()
}

/// Mean squared distance from each patient to its nearest generated mode.
fn coverage(centers: &[Vec<f64>], patients: &Matrix) -> f64 {
    let total: f64 = patients
        .iter_rows()
        .map(|z| {
            centers
                .iter()
                .map(|c| crate::matrix::sq_dist(z, c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / patients.rows().max(1) as f64
}

/// Argmax with smallest-index tie-break, 1-based.
fn argmax1(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best + 1
}
