use serde::{Deserialize, Serialize};

use super::{expected_z_table, EventSet, Sequence};
use crate::matrix::log_sum_exp;
use crate::{Error, Matrix, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mixture of event sequences with per-variable observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeModel {
    pub events: EventSet,
    pub sequences: Vec<Sequence>,
    pub fractions: Vec<f64>,
    /// Observation SD per variable, in z units.
    pub noise: Vec<f64>,
}

impl SubtypeModel {
    pub fn validate(&self) -> Result<()> {
        if self.sequences.is_empty() || self.sequences.len() != self.fractions.len() {
            return Err(Error::Input(
                "one fraction per subtype sequence required".into(),
            ));
        }
        for s in &self.sequences {
            s.validate(&self.events)?;
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.fractions.iter().any(|f| *f < 0.0) {
            return Err(Error::Input(format!(
                "fractions must form a simplex (sum {sum})"
            )));
        }
        if self.noise.len() != self.events.n_vars() || self.noise.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Input(
                "noise must be positive, one per variable".into(),
            ));
        }
        Ok(())
    }

    pub fn n_subtypes(&self) -> usize {
        self.sequences.len()
    }
}

/// `log p(z_i | seq)` per subject, marginalized over a uniform stage prior.
pub fn subject_logliks(z: &Matrix, seq: &Sequence, set: &EventSet, noise: &[f64]) -> Vec<f64> {
    let table = expected_z_table(seq, set);
    subject_logliks_from_table(z, &table, noise)
}

pub(crate) fn subject_logliks_from_table(z: &Matrix, table: &Matrix, noise: &[f64]) -> Vec<f64> {
    let stages = table.rows();
    let inv_var: Vec<f64> = noise.iter().map(|s| 1.0 / (s * s)).collect();
    let norm_const: f64 =
        -noise.iter().map(|s| s.ln()).sum::<f64>() - 0.5 * LN_2PI * noise.len() as f64;
    let log_prior = -(stages as f64).ln();
    let mut per_stage = vec![0.0; stages];
    z.iter_rows()
        .map(|row| {
            for (s, slot) in per_stage.iter_mut().enumerate() {
                let mu = table.row(s);
                let mut q = 0.0;
                for ((x, m), w) in row.iter().zip(mu).zip(&inv_var) {
                    let d = x - m;
                    q += d * d * w;
                }
                *slot = -0.5 * q;
            }
            norm_const + log_prior + log_sum_exp(&per_stage)
        })
        .collect()
}

/// Per-subject, per-stage log joint `log p(z_i, stage | seq)` (rows subjects).
pub(crate) fn stage_logliks(z: &Matrix, seq: &Sequence, set: &EventSet, noise: &[f64]) -> Matrix {
    let table = expected_z_table(seq, set);
    let stages = table.rows();
    let norm_const: f64 =
        -noise.iter().map(|s| s.ln()).sum::<f64>() - 0.5 * LN_2PI * noise.len() as f64;
    let log_prior = -(stages as f64).ln();
    let mut out = Matrix::zeros(z.rows(), stages);
    for (i, row) in z.iter_rows().enumerate() {
        for s in 0..stages {
            let q: f64 = row
                .iter()
                .zip(table.row(s))
                .zip(noise)
                .map(|((x, m), sd)| ((x - m) / sd).powi(2))
                .sum();
            out.set(i, s, norm_const + log_prior - 0.5 * q);
        }
    }
    out
}

/// Total log-likelihood of a single sequence over all subjects.
pub fn sequence_loglik(z: &Matrix, seq: &Sequence, set: &EventSet, noise: &[f64]) -> Result<f64> {
    if z.cols() != set.n_vars() || noise.len() != set.n_vars() {
        return Err(Error::Input(format!(
            "z has {} columns, event set {} variables, noise {} entries",
            z.cols(),
            set.n_vars(),
            noise.len()
        )));
    }
    if !z.all_finite() {
        return Err(Error::Input("z contains non-finite values".into()));
    }
    seq.validate(set)?;
    Ok(subject_logliks(z, seq, set, noise).iter().sum())
}

/// Posterior over (subtype, stage) for every subject.
#[derive(Debug, Clone, PartialEq)]
pub struct StagePosterior {
    pub n_subtypes: usize,
    pub n_stages: usize,
    /// Row `i` holds subtype-major probabilities `[c * n_stages + stage]`.
    pub probs: Matrix,
    /// 1-based argmax subtype of the stage-marginalized posterior.
    pub labels: Vec<usize>,
    /// Most probable stage within the assigned subtype.
    pub stages: Vec<usize>,
}

impl StagePosterior {
    pub fn get(&self, subject: usize, subtype: usize, stage: usize) -> f64 {
        self.probs.get(subject, subtype * self.n_stages + stage)
    }

    pub fn subtype_probs(&self, subject: usize) -> Vec<f64> {
        (0..self.n_subtypes)
            .map(|c| (0..self.n_stages).map(|s| self.get(subject, c, s)).sum())
            .collect()
    }
}

pub fn stage_and_assign(model: &SubtypeModel, z: &Matrix) -> Result<StagePosterior> {
    model.validate()?;
    if z.cols() != model.events.n_vars() {
        return Err(Error::Input("z column count differs from the model".into()));
    }
    let c_n = model.n_subtypes();
    let stages = model.events.n_events() + 1;
    let per: Vec<Matrix> = model
        .sequences
        .iter()
        .map(|s| stage_logliks(z, s, &model.events, &model.noise))
        .collect();
    let mut probs = Matrix::zeros(z.rows(), c_n * stages);
    let mut labels = Vec::with_capacity(z.rows());
    let mut best_stages = Vec::with_capacity(z.rows());
    let mut buf = vec![0.0; c_n * stages];
    for i in 0..z.rows() {
        for c in 0..c_n {
            let lf = model.fractions[c].ln();
            for s in 0..stages {
                buf[c * stages + s] = lf + per[c].get(i, s);
            }
        }
        let lse = log_sum_exp(&buf);
        let row = probs.row_mut(i);
        for (p, l) in row.iter_mut().zip(&buf) {
            *p = (l - lse).exp();
        }
        let mut best_c = 0;
        let mut best_m = f64::NEG_INFINITY;
        for c in 0..c_n {
            let m: f64 = row[c * stages..(c + 1) * stages].iter().sum();
            if m > best_m {
                best_m = m;
                best_c = c;
            }
        }
        let seg = &row[best_c * stages..(best_c + 1) * stages];
        let st = seg
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (s, &p)| if p > acc.1 { (s, p) } else { acc },
            )
            .0;
        labels.push(best_c + 1);
        best_stages.push(st);
    }
    Ok(StagePosterior {
        n_subtypes: c_n,
        n_stages: stages,
        probs,
        labels,
        stages: best_stages,
    })
}
