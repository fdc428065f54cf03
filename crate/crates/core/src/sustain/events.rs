use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// One z-score threshold crossing: variable `var` reaching its `level`-th threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub var: usize,
    pub level: usize,
}

/// Per-variable increasing z thresholds and the terminal z value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSet {
    pub thresholds: Vec<Vec<f64>>,
    pub z_max: Vec<f64>,
}

impl EventSet {
    pub fn new(thresholds: Vec<Vec<f64>>, z_max: Vec<f64>) -> Result<Self> {
        if thresholds.len() != z_max.len() || thresholds.is_empty() {
            return Err(Error::Config(
                "one threshold list and z_max per variable required".into(),
            ));
        }
        for (j, (t, zm)) in thresholds.iter().zip(&z_max).enumerate() {
            if t.is_empty() || t.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!(
                    "thresholds of variable {j} must be non-empty and strictly increasing"
                )));
            }
            if t.iter().any(|v| !(v < zm)) || t[0] <= 0.0 {
                return Err(Error::Config(format!(
                    "thresholds of variable {j} must lie in (0, z_max)"
                )));
            }
        }
        Ok(EventSet { thresholds, z_max })
    }

    /// Same thresholds for every variable.
    pub fn uniform(n_vars: usize, thresholds: &[f64], z_max: f64) -> Result<Self> {
        EventSet::new(vec![thresholds.to_vec(); n_vars], vec![z_max; n_vars])
    }

    /// Thresholds {1, 2, 3} and z_max 5.
    pub fn default_for(n_vars: usize) -> Self {
        EventSet::uniform(n_vars, &[1.0, 2.0, 3.0], 5.0).expect("valid defaults")
    }

    pub fn n_vars(&self) -> usize {
        self.thresholds.len()
    }

    pub fn n_events(&self) -> usize {
        self.thresholds.iter().map(Vec::len).sum()
    }

    /// Events in canonical (variable-major) order; the index is the event id.
    pub fn events(&self) -> Vec<Event> {
        self.thresholds
            .iter()
            .enumerate()
            .flat_map(|(var, t)| (0..t.len()).map(move |level| Event { var, level }))
            .collect()
    }

    pub fn event_id(&self, e: Event) -> usize {
        self.thresholds[..e.var].iter().map(Vec::len).sum::<usize>() + e.level
    }
}

/// An ordering of every event; position `p` (0-based) is reached at stage `p + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sequence {
    pub events: Vec<Event>,
}

impl Sequence {
    pub fn validate(&self, set: &EventSet) -> Result<()> {
        if self.events.len() != set.n_events() {
            return Err(Error::Input(format!(
                "sequence has {} events, event set has {}",
                self.events.len(),
                set.n_events()
            )));
        }
        let mut next_level = vec![0usize; set.n_vars()];
        for e in &self.events {
            if e.var >= set.n_vars() || e.level != next_level[e.var] {
                return Err(Error::Input(format!(
                    "event ({}, {}) out of order or unknown",
                    e.var, e.level
                )));
            }
            next_level[e.var] += 1;
        }
        Ok(())
    }

    pub fn is_valid(&self, set: &EventSet) -> bool {
        self.validate(set).is_ok()
    }

    /// Uniformly random valid interleaving of the per-variable chains.
    pub fn random<R: Rng>(set: &EventSet, rng: &mut R) -> Self {
        let mut vars: Vec<usize> = set
            .thresholds
            .iter()
            .enumerate()
            .flat_map(|(j, t)| std::iter::repeat_n(j, t.len()))
            .collect();
        vars.shuffle(rng);
        Sequence::from_vars(&vars)
    }

    /// Build from the variable visited at each position; levels follow visit order.
    pub fn from_vars(vars: &[usize]) -> Self {
        let n = vars.iter().max().map_or(0, |m| m + 1);
        let mut level = vec![0usize; n];
        let events = vars
            .iter()
            .map(|&var| {
                let e = Event {
                    var,
                    level: level[var],
                };
                level[var] += 1;
                e
            })
            .collect();
        Sequence { events }
    }

    /// 1-based stage at which each event occurs, indexed by `(var, level)`.
    pub fn positions(&self, set: &EventSet) -> Vec<Vec<usize>> {
        let mut pos: Vec<Vec<usize>> = set.thresholds.iter().map(|t| vec![0; t.len()]).collect();
        for (p, e) in self.events.iter().enumerate() {
            pos[e.var][e.level] = p + 1;
        }
        pos
    }
}

/// Piecewise-linear expected z for every stage `0..=E` (rows) and variable (columns).
///
/// Variable `j` rises from 0 at stage 0 through threshold `t` at the stage of
/// its `(j, t)` event, then linearly to `z_max` at stage `E`.
pub fn expected_z_table(seq: &Sequence, set: &EventSet) -> Matrix {
    let e_total = set.n_events();
    let pos = seq.positions(set);
    let mut table = Matrix::zeros(e_total + 1, set.n_vars());
    for (j, thr) in set.thresholds.iter().enumerate() {
        let mut knots: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        for (l, &t) in thr.iter().enumerate() {
            knots.push((pos[j][l] as f64, t));
        }
        let last = *knots.last().expect("non-empty");
        if (last.0 as usize) < e_total {
            knots.push((e_total as f64, set.z_max[j]));
        }
        let mut seg = 0;
        for s in 0..=e_total {
            let x = s as f64;
            while seg + 1 < knots.len() - 1 && x > knots[seg + 1].0 {
                seg += 1;
            }
            let (x0, y0) = knots[seg];
            let (x1, y1) = knots[(seg + 1).min(knots.len() - 1)];
            let z = if x1 > x0 {
                y0 + (y1 - y0) * ((x - x0) / (x1 - x0)).min(1.0)
            } else {
                y1
            };
            table.set(s, j, z);
        }
    }
    table
}

/// Expected z of every variable at one stage.
pub fn expected_z(seq: &Sequence, stage: usize, set: &EventSet) -> Result<Vec<f64>> {
    if stage > set.n_events() {
        return Err(Error::Input(format!(
            "stage {stage} beyond the last stage {}",
            set.n_events()
        )));
    }
    Ok(expected_z_table(seq, set).row(stage).to_vec())
}
