use std::io::Write;
use std::path::Path;
use std::time::Duration;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::fit::timed_single_run;
use super::{expected_z_table, EventSet, Sequence, SustainConfig};
use crate::{rng, Deadline, Error, Matrix, Result};

/// `log10(E! / (t!)^n)` with `E = n * t`: interleavings of `n` monotone chains of length `t`.
pub fn ordering_space_log10(n_vars: usize, thresholds_per_var: usize) -> f64 {
    let ln_fact = |k: usize| (2..=k).map(|i| (i as f64).ln()).sum::<f64>();
    let e = n_vars * thresholds_per_var;
    (ln_fact(e) - n_vars as f64 * ln_fact(thresholds_per_var)) / std::f64::consts::LN_10
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub z: Matrix,
    /// 1-based subtype per subject.
    pub labels: Vec<usize>,
    pub stages: Vec<usize>,
}

/// Subjects drawn along the given sequences at stages uniform on `1..=E`, plus Gaussian noise.
pub fn simulate_subjects(
    seqs: &[Sequence],
    fractions: &[f64],
    set: &EventSet,
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Simulated> {
    if seqs.is_empty() || seqs.len() != fractions.len() {
        return Err(Error::Config("one fraction per sequence required".into()));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::Config("noise_sd must be nonnegative".into()));
    }
    for s in seqs {
        s.validate(set)?;
    }
    let tables: Vec<Matrix> = seqs.iter().map(|s| expected_z_table(s, set)).collect();
    let total: f64 = fractions.iter().sum();
    let normal = Normal::new(0.0, noise_sd.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut z = Matrix::zeros(n, set.n_vars());
    let mut labels = Vec::with_capacity(n);
    let mut stages = Vec::with_capacity(n);
    for i in 0..n {
        let mut r = rng::stream(seed, "sustain-subject", i as u64);
        let u: f64 = r.random::<f64>() * total;
        let mut acc = 0.0;
        let mut c = seqs.len() - 1;
        for (k, f) in fractions.iter().enumerate() {
            acc += f;
            if u < acc {
                c = k;
                break;
            }
        }
        let stage = r.random_range(1..=set.n_events());
        for (j, v) in z.row_mut(i).iter_mut().enumerate() {
            *v = tables[c].get(stage, j) + normal.sample(&mut r);
        }
        labels.push(c + 1);
        stages.push(stage);
    }
    Ok(Simulated { z, labels, stages })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeStatus {
    Completed,
    Timeout,
}

impl ProbeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeStatus::Completed => "completed",
            ProbeStatus::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub n_vars: usize,
    pub log10_orderings: f64,
    /// Mean wall time of the completed EM iterations, if any completed.
    pub iter_ms: Option<f64>,
    pub status: ProbeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub n_subjects: usize,
    pub thresholds_per_var: usize,
    pub subtypes: usize,
    pub max_em_iter: usize,
    /// Budget applied to each variable count separately.
    pub budget: Duration,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            n_subjects: 200,
            thresholds_per_var: 3,
            subtypes: 1,
            max_em_iter: 3,
            budget: Duration::from_secs(60),
            seed: 0,
        }
    }
}

/// Time one EM fit per variable count on data simulated from a random sequence.
pub fn scaling_probe(var_counts: &[usize], cfg: &ProbeConfig) -> Result<Vec<ProbeRow>> {
    if var_counts.is_empty() || var_counts.contains(&0) {
        return Err(Error::Config(
            "variable counts must be a nonempty list of positive values".into(),
        ));
    }
    if cfg.thresholds_per_var == 0 || cfg.thresholds_per_var > 8 {
        return Err(Error::Config(
            "thresholds_per_var must be between 1 and 8".into(),
        ));
    }
    let thresholds: Vec<f64> = (1..=cfg.thresholds_per_var).map(|t| t as f64).collect();
    let z_max = cfg.thresholds_per_var as f64 + 2.0;
    let mut rows = Vec::with_capacity(var_counts.len());
    for (idx, &n_vars) in var_counts.iter().enumerate() {
        let set = EventSet::uniform(n_vars, &thresholds, z_max)?;
        let log10 = ordering_space_log10(n_vars, cfg.thresholds_per_var);
        let deadline = Deadline::after(cfg.budget);
        let mut times = Vec::new();
        let status = if deadline.expired() {
            ProbeStatus::Timeout
        } else {
            let seed = rng::derive(cfg.seed, "probe", idx as u64);
            let truth = Sequence::random(&set, &mut rng::stream(seed, "probe-truth", 0));
            let sim = simulate_subjects(&[truth], &[1.0], &set, cfg.n_subjects, 1.0, seed)?;
            let fit_cfg = SustainConfig {
                n_restarts: 1,
                max_em_iter: cfg.max_em_iter,
                seed,
                tol: f64::NEG_INFINITY,
                ..Default::default()
            };
            let c = cfg.subtypes.max(1);
            match timed_single_run(&sim.z, c, &set, &fit_cfg, &deadline, &mut times) {
                Ok(_) => ProbeStatus::Completed,
                Err(Error::Timeout) => ProbeStatus::Timeout,
                Err(e) => return Err(e),
            }
        };
        let iter_ms = (!times.is_empty()).then(|| {
            times.iter().map(Duration::as_secs_f64).sum::<f64>() * 1e3 / times.len() as f64
        });
        rows.push(ProbeRow {
            n_vars,
            log10_orderings: log10,
            iter_ms,
            status,
        });
    }
    Ok(rows)
}

/// Power-law fit `iter_ms = a * n_vars^b` over completed rows, by least squares in log-log space.
pub fn extrapolate_iter_ms(rows: &[ProbeRow]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            r.iter_ms
                .filter(|t| *t > 0.0)
                .map(|t| ((r.n_vars as f64).ln(), t.ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let b = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(((my - b * mx).exp(), b))
}

pub fn write_probe_csv(rows: &[ProbeRow], path: &Path) -> Result<()> {
    let mut out = String::from("n_vars,log10_orderings,iter_ms,status\n");
    for r in rows {
        let ms = r.iter_ms.map(|t| format!("{t:.3}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.6},{},{}\n",
            r.n_vars,
            r.log10_orderings,
            ms,
            r.status.as_str()
        ));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}
