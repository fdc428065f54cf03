use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::subject_logliks_from_table;
use super::probe::ordering_space_log10;
use super::{expected_z_table, EventSet, Sequence, SubtypeModel};
use crate::matrix::log_sum_exp;
use crate::{rng, Deadline, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SustainConfig {
    pub n_restarts: usize,
    pub max_em_iter: usize,
    pub greedy_passes: usize,
    /// Stop when the total log-likelihood gains less than this; `-inf` runs every iteration.
    pub tol: f64,
    pub seed: u64,
    /// Observation SD per variable; `None` means 1 for every variable.
    pub noise: Option<Vec<f64>>,
}

impl Default for SustainConfig {
    fn default() -> Self {
        SustainConfig {
            n_restarts: 8,
            max_em_iter: 30,
            greedy_passes: 1,
            tol: 1e-6,
            seed: 0,
            noise: None,
        }
    }
}

impl SustainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 || self.max_em_iter == 0 || self.greedy_passes == 0 {
            return Err(Error::Config(
                "n_restarts, max_em_iter and greedy_passes must be at least 1".into(),
            ));
        }
        if self.tol.is_nan() {
            return Err(Error::Config("tol must be a number".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SustainFit {
    pub model: SubtypeModel,
    pub loglik: f64,
    /// Total log-likelihood after each EM iteration of the winning restart.
    pub trace: Vec<f64>,
    /// Final log-likelihood of every restart, in restart order.
    pub restart_logliks: Vec<f64>,
    /// Wall time per EM iteration of the winning restart.
    pub iter_ms: Vec<f64>,
}

pub fn fit_sustain(
    z: &Matrix,
    c: usize,
    set: &EventSet,
    cfg: &SustainConfig,
) -> Result<SustainFit> {
    fit_sustain_within(z, c, set, cfg, &Deadline::none())
}

pub fn fit_sustain_within(
    z: &Matrix,
    c: usize,
    set: &EventSet,
    cfg: &SustainConfig,
    deadline: &Deadline,
) -> Result<SustainFit> {
    let noise = check_inputs(z, c, set, cfg)?;
    let runs: Vec<Result<EmRun>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut times = Vec::new();
            em_run(z, c, set, &noise, cfg, r, deadline, &mut times)
        })
        .collect();
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let restart_logliks: Vec<f64> = runs.iter().map(|r| r.loglik).collect();
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.loglik > runs[best].loglik {
            best = i;
        }
    }
    let win = runs.swap_remove(best);
    Ok(SustainFit {
        model: win.model,
        loglik: win.loglik,
        trace: win.trace,
        restart_logliks,
        iter_ms: win.iter_ms,
    })
}

/// One EM restart, recording each completed iteration's duration even on timeout.
pub(crate) fn timed_single_run(
    z: &Matrix,
    c: usize,
    set: &EventSet,
    cfg: &SustainConfig,
    deadline: &Deadline,
    times: &mut Vec<Duration>,
) -> Result<f64> {
    let noise = check_inputs(z, c, set, cfg)?;
    em_run(z, c, set, &noise, cfg, 0, deadline, times).map(|r| r.loglik)
}

fn check_inputs(z: &Matrix, c: usize, set: &EventSet, cfg: &SustainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if c == 0 {
        return Err(Error::Config(
            "number of subtypes must be at least 1".into(),
        ));
    }
    let t_max = set.thresholds.iter().map(Vec::len).max().unwrap_or(0);
    let uniform = set.thresholds.iter().all(|t| t.len() == t_max);
    if uniform && ordering_space_log10(set.n_vars(), t_max) < (c as f64).log10() - 1e-12 {
        return Err(Error::Config(format!(
            "{c} subtypes exceed the number of distinct event orderings"
        )));
    }
    if z.cols() != set.n_vars() {
        return Err(Error::Input(format!(
            "z has {} columns but the event set has {} variables",
            z.cols(),
            set.n_vars()
        )));
    }
    if !z.all_finite() {
        return Err(Error::Input("z contains non-finite values".into()));
    }
    let noise = cfg.noise.clone().unwrap_or_else(|| vec![1.0; set.n_vars()]);
    if noise.len() != set.n_vars() || noise.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config(
            "noise must be positive, one per variable".into(),
        ));
    }
    Ok(noise)
}

struct EmRun {
    model: SubtypeModel,
    loglik: f64,
    trace: Vec<f64>,
    iter_ms: Vec<f64>,
}

/// Events ordered by how many subjects already exceed their threshold.
fn data_driven_sequence(z: &Matrix, set: &EventSet) -> Sequence {
    let n = z.rows().max(1) as f64;
    let mut scored: Vec<(f64, usize, usize)> = set
        .events()
        .into_iter()
        .map(|e| {
            let thr = set.thresholds[e.var][e.level];
            let frac = z.iter_rows().filter(|r| r[e.var] > thr).count() as f64 / n;
            (frac, e.var, e.level)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let vars: Vec<usize> = scored.iter().map(|s| s.1).collect();
    Sequence::from_vars(&vars)
}

fn mixture_loglik(per: &[Vec<f64>], fractions: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let n = per.first().map_or(0, Vec::len);
    let mut resp = vec![vec![0.0; per.len()]; n];
    let mut total = 0.0;
    let mut buf = vec![0.0; per.len()];
    for i in 0..n {
        for (c, slot) in buf.iter_mut().enumerate() {
            *slot = fractions[c].ln() + per[c][i];
        }
        let lse = log_sum_exp(&buf);
        total += lse;
        for (c, r) in resp[i].iter_mut().enumerate() {
            *r = (buf[c] - lse).exp();
        }
    }
    (total, resp)
}

#[allow(clippy::too_many_arguments)]
fn em_run(
    z: &Matrix,
    c: usize,
    set: &EventSet,
    noise: &[f64],
    cfg: &SustainConfig,
    restart: usize,
    deadline: &Deadline,
    times: &mut Vec<Duration>,
) -> Result<EmRun> {
    let mut rng = rng::stream(cfg.seed, "sustain-restart", restart as u64);
    let mut seqs: Vec<Sequence> = (0..c)
        .map(|k| {
            if restart == 0 && k == 0 {
                data_driven_sequence(z, set)
            } else {
                Sequence::random(set, &mut rng)
            }
        })
        .collect();
    let mut fractions = vec![1.0 / c as f64; c];
    let loglik_of = |s: &Sequence| subject_logliks_from_table(z, &expected_z_table(s, set), noise);
    let mut per: Vec<Vec<f64>> = seqs.iter().map(loglik_of).collect();
    let (mut total, mut resp) = mixture_loglik(&per, &fractions);
    let mut trace = Vec::new();
    for _ in 0..cfg.max_em_iter {
        deadline.check()?;
        let started = Instant::now();
        for k in 0..c {
            let weights: Vec<f64> = resp.iter().map(|r| r[k]).collect();
            for _ in 0..cfg.greedy_passes {
                let (s, l) = greedy_pass(
                    z, set, noise, &seqs[k], &per[k], &weights, &mut rng, deadline,
                )?;
                seqs[k] = s;
                per[k] = l;
            }
        }
        if z.rows() > 0 {
            for (k, f) in fractions.iter_mut().enumerate() {
                *f = resp.iter().map(|r| r[k]).sum::<f64>() / z.rows() as f64;
            }
        }
        let (next, next_resp) = mixture_loglik(&per, &fractions);
        times.push(started.elapsed());
        trace.push(next);
        let gain = next - total;
        total = next;
        resp = next_resp;
        if gain < cfg.tol {
            break;
        }
    }
    let iter_ms = times.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    Ok(EmRun {
        model: SubtypeModel {
            events: set.clone(),
            sequences: seqs,
            fractions,
            noise: noise.to_vec(),
        },
        loglik: total,
        trace,
        iter_ms,
    })
}

fn weighted(l: &[f64], w: &[f64]) -> f64 {
    l.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Move each event, in random order, to its best admissible position.
#[allow(clippy::too_many_arguments)]
fn greedy_pass<R: Rng>(
    z: &Matrix,
    set: &EventSet,
    noise: &[f64],
    seq: &Sequence,
    current_ll: &[f64],
    weights: &[f64],
    rng: &mut R,
    deadline: &Deadline,
) -> Result<(Sequence, Vec<f64>)> {
    use rand::seq::SliceRandom;
    let mut seq = seq.clone();
    let mut best_ll = current_ll.to_vec();
    let mut best_score = weighted(&best_ll, weights);
    let mut order = set.events();
    order.shuffle(rng);
    for ev in order {
        deadline.check()?;
        let p = seq
            .events
            .iter()
            .position(|e| *e == ev)
            .expect("event present");
        let mut rest = seq.events.clone();
        rest.remove(p);
        // admissible slots lie strictly between the neighbouring levels of this variable
        let lo = rest
            .iter()
            .position(|e| e.var == ev.var && e.level + 1 == ev.level)
            .map_or(0, |i| i + 1);
        let hi = rest
            .iter()
            .position(|e| e.var == ev.var && e.level == ev.level + 1)
            .unwrap_or(rest.len());
        let mut choice: Option<(Sequence, Vec<f64>, f64)> = None;
        for slot in lo..=hi {
            if slot == p {
                continue;
            }
            let mut events = rest.clone();
            events.insert(slot, ev);
            let cand = Sequence { events };
            let ll = subject_logliks_from_table(z, &expected_z_table(&cand, set), noise);
            let score = weighted(&ll, weights);
            let beats = choice.as_ref().map_or(best_score, |c| c.2);
            if score > beats {
                choice = Some((cand, ll, score));
            }
        }
        if let Some((cand, ll, score)) = choice {
            seq = cand;
            best_ll = ll;
            best_score = score;
        }
    }
    Ok((seq, best_ll))
}
