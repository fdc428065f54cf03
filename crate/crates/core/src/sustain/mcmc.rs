use rand::Rng;
use rayon::prelude::*;

use super::model::subject_logliks_from_table;
use super::{expected_z_table, Sequence, SubtypeModel};
use crate::{rng, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct McmcResult {
    /// Per subtype, the sequence held after each iteration.
    pub samples: Vec<Vec<Sequence>>,
    /// Per subtype, accepted proposals over proposals made.
    pub acceptance_rate: Vec<f64>,
    /// Per subtype, events (canonical order) by positions (0-based) visit frequencies.
    pub position_freq: Vec<Matrix>,
}

/// Metropolis-Hastings over each subtype's sequence with the others held at the model.
///
/// Proposals swap two positions; swaps that break a variable's threshold
/// order are rejected outright.
pub fn mcmc_sample(
    z: &Matrix,
    model: &SubtypeModel,
    n_iter: usize,
    seed: u64,
) -> Result<McmcResult> {
    model.validate()?;
    if n_iter == 0 {
        return Err(Error::Config("n_iter must be at least 1".into()));
    }
    if z.cols() != model.events.n_vars() || !z.all_finite() {
        return Err(Error::Input(
            "z must be finite with one column per model variable".into(),
        ));
    }
    let set = &model.events;
    let per: Vec<Vec<f64>> = model
        .sequences
        .iter()
        .map(|s| subject_logliks_from_table(z, &expected_z_table(s, set), &model.noise))
        .collect();
    let chains: Vec<(Vec<Sequence>, f64, Matrix)> = (0..model.n_subtypes())
        .into_par_iter()
        .map(|c| {
            // log of the mixture mass contributed by the other subtypes, per subject
            let others: Vec<f64> = (0..z.rows())
                .map(|i| {
                    let terms: Vec<f64> = (0..model.n_subtypes())
                        .filter(|&k| k != c)
                        .map(|k| model.fractions[k].ln() + per[k][i])
                        .collect();
                    crate::matrix::log_sum_exp(&terms)
                })
                .collect();
            let lf = model.fractions[c].ln();
            let score = |ll: &[f64]| -> f64 {
                ll.iter()
                    .zip(&others)
                    .map(|(l, o)| {
                        let a = lf + l;
                        if *o == f64::NEG_INFINITY {
                            a
                        } else {
                            let m = a.max(*o);
                            m + ((a - m).exp() + (o - m).exp()).ln()
                        }
                    })
                    .sum()
            };
            let mut rng = rng::stream(seed, "sustain-mcmc", c as u64);
            let mut cur = model.sequences[c].clone();
            let mut cur_score = score(&per[c]);
            let e_n = set.n_events();
            let mut freq = Matrix::zeros(e_n, e_n);
            let mut samples = Vec::with_capacity(n_iter);
            let mut accepted = 0usize;
            for _ in 0..n_iter {
                if e_n >= 2 {
                    let a = rng.random_range(0..e_n);
                    let mut b = rng.random_range(0..e_n - 1);
                    if b >= a {
                        b += 1;
                    }
                    let mut prop = cur.clone();
                    prop.events.swap(a, b);
                    if prop.is_valid(set) {
                        let ll = subject_logliks_from_table(
                            z,
                            &expected_z_table(&prop, set),
                            &model.noise,
                        );
                        let s = score(&ll);
                        let u: f64 = rng.random();
                        if u.ln() < s - cur_score {
                            cur = prop;
                            cur_score = s;
                            accepted += 1;
                        }
                    }
                }
                for (p, e) in cur.events.iter().enumerate() {
                    let id = set.event_id(*e);
                    freq.set(id, p, freq.get(id, p) + 1.0);
                }
                samples.push(cur.clone());
            }
            for v in freq.as_mut_slice() {
                *v /= n_iter as f64;
            }
            (samples, accepted as f64 / n_iter as f64, freq)
        })
        .collect();
    let mut out = McmcResult {
        samples: Vec::new(),
        acceptance_rate: Vec::new(),
        position_freq: Vec::new(),
    };
    for (s, a, f) in chains {
        out.samples.push(s);
        out.acceptance_rate.push(a);
        out.position_freq.push(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sustain::{simulate_subjects, EventSet};

    fn single(set: &EventSet, seq: Sequence) -> SubtypeModel {
        SubtypeModel {
            events: set.clone(),
            sequences: vec![seq],
            fractions: vec![1.0],
            noise: vec![1.0; set.n_vars()],
        }
    }

    #[test]
    fn one_iteration_one_sample() {
        let set = EventSet::default_for(2);
        let z = Matrix::zeros(5, 2);
        let r = mcmc_sample(
            &z,
            &single(&set, Sequence::from_vars(&[0, 0, 0, 1, 1, 1])),
            1,
            3,
        )
        .unwrap();
        assert_eq!(r.samples[0].len(), 1);
    }

    #[test]
    fn symmetric_posterior_balanced() {
        let set = EventSet::uniform(2, &[1.0], 5.0).unwrap();
        let mut rows = Vec::new();
        for i in 0..40 {
            let a = (i % 7) as f64 * 0.4;
            let b = (i % 5) as f64 * 0.5;
            rows.push(vec![a, b]);
            rows.push(vec![b, a]);
        }
        let z = Matrix::from_rows(&rows).unwrap();
        let n = 2000;
        let r = mcmc_sample(&z, &single(&set, Sequence::from_vars(&[0, 1])), n, 8).unwrap();
        let first = r.samples[0].iter().filter(|s| s.events[0].var == 0).count() as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((first - 0.5).abs() <= 3.0 * se, "{first}");
    }

    #[test]
    fn concentrates_on_planted_order() {
        let set = EventSet::default_for(3);
        let truth = Sequence::from_vars(&[0, 1, 0, 2, 1, 2, 0, 1, 2]);
        let sim = simulate_subjects(std::slice::from_ref(&truth), &[1.0], &set, 300, 0.5, 2).unwrap();
        let mut model = single(&set, truth.clone());
        model.noise = vec![0.5; 3];
        let r = mcmc_sample(&sim.z, &model, 2000, 4).unwrap();
        let f = &r.position_freq[0];
        let mass: f64 = truth
            .events
            .iter()
            .enumerate()
            .map(|(p, e)| f.get(set.event_id(*e), p))
            .sum::<f64>()
            / set.n_events() as f64;
        assert!(mass >= 0.9, "{mass}");
        assert!(r.samples[0].iter().all(|s| s.is_valid(&set)));
        for row in f.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
