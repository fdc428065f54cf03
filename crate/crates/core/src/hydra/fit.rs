use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svm::{
    check_both_classes, hinge, primal_objective, recover_plane, solve_dual, DenseGram,
};
use super::{consensus_aggregate, dpp_select, Hyperplane, Polytope};
use crate::datagen::{ControlStats, LabeledDataset};
use crate::matrix::{norm, sq_dist};
use crate::{rng, Deadline, Error, Matrix, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HydraConfig {
    pub k: usize,
    /// Margin-violation penalty.
    pub c: f64,
    pub n_init: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for HydraConfig {
    fn default() -> Self {
        HydraConfig {
            k: 2,
            c: 1.0,
            n_init: 20,
            max_iter: 50,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl HydraConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0
            || self.n_init == 0
            || self.max_iter == 0
            || !(self.c > 0.0)
            || !(self.tol > 0.0)
        {
            return Err(Error::Config(
                "HYDRA parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReseedEvent {
    pub iteration: usize,
    /// 1-based face index.
    pub face: usize,
    /// Patient row (0-based among patients) that seeded the face.
    pub patient: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitTrace {
    pub seeds: Vec<usize>,
    /// Negated polytope loss after each alternation step; non-decreasing.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeds: Vec<ReseedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraReport {
    pub inits: Vec<InitTrace>,
    pub final_objective: f64,
    pub final_reseeds: Vec<ReseedEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydraFit {
    /// 1-based subtype label per patient row.
    pub labels: Vec<usize>,
    pub polytope: Polytope,
    pub report: HydraReport,
}

/// Shared problem data: standardized features, Gram matrix and row roles.
struct Problem {
    x: Matrix,
    gram: DenseGram,
    controls: Vec<usize>,
    patients: Vec<usize>,
    c: f64,
    tol: f64,
}

impl Problem {
    /// Controls `-1`, the given patients `+1`.
    fn train_face(&self, face_patients: &[usize]) -> Result<(Hyperplane, f64)> {
        let mut members = self.controls.clone();
        members.extend(face_patients.iter().map(|&p| self.patients[p]));
        let mut y = vec![-1.0; self.controls.len()];
        y.extend(std::iter::repeat_n(1.0, face_patients.len()));
        check_both_classes(y.iter().map(|&v| v as i8))?;
        let ub = vec![self.c; members.len()];
        let sol = solve_dual(&self.gram, &members, &y, &ub, self.tol);
        let plane = recover_plane(&self.x, &members, &y, &sol);
        let obj = primal_objective(&plane, &self.x, &members, &y, &ub);
        Ok((plane, obj))
    }

    fn assign(&self, p: &Polytope) -> Vec<usize> {
        self.patients
            .iter()
            .map(|&row| p.best_face(self.x.row(row)).0)
            .collect()
    }

    /// Regularized hinge loss of the whole polytope under hard assignments.
    fn loss(&self, p: &Polytope, labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for face in &p.faces {
            total += 0.5 * norm(&face.w).powi(2);
            for &row in &self.controls {
                total += self.c * hinge(-face.score(self.x.row(row)));
            }
        }
        for (i, &l) in labels.iter().enumerate() {
            total += self.c * hinge(p.faces[l].score(self.x.row(self.patients[i])));
        }
        total
    }

    /// Patient lying farthest on the control side of every face, among faces
    /// that can spare a member.
    fn reseed_candidate(&self, p: &Polytope, labels: &[usize], counts: &[usize]) -> Option<usize> {
        let norms: Vec<f64> = p.faces.iter().map(|f| norm(&f.w).max(1e-12)).collect();
        (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| {
                let x = self.x.row(self.patients[i]);
                let reach = p
                    .faces
                    .iter()
                    .zip(&norms)
                    .map(|(f, n)| f.score(x) / n)
                    .fold(f64::NEG_INFINITY, f64::max);
                (i, reach)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    }

    /// Train all faces, reseeding any face left without patients.
    fn train_polytope(
        &self,
        labels: &mut [usize],
        k: usize,
        prev: Option<&Polytope>,
        iteration: usize,
        reseeds: &mut Vec<ReseedEvent>,
    ) -> Result<(Polytope, f64)> {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for face in 0..k {
            if counts[face] == 0 {
                let pick = match prev {
                    Some(p) => self.reseed_candidate(p, labels, &counts),
                    None => (0..labels.len()).find(|&i| counts[labels[i]] > 1),
                }
                .ok_or_else(|| {
                    Error::Degenerate("not enough patients to fill every face".into())
                })?;
                counts[labels[pick]] -= 1;
                labels[pick] = face;
                counts[face] = 1;
                reseeds.push(ReseedEvent {
                    iteration,
                    face: face + 1,
                    patient: pick,
                });
            }
        }
        let mut faces = Vec::with_capacity(k);
        for face in 0..k {
            let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == face).collect();
            faces.push(self.train_face(&members)?.0);
        }
        let p = Polytope { faces };
        let loss = self.loss(&p, labels);
        Ok((p, loss))
    }
}

/// Fit HYDRA: `n_init` DPP-initialized alternations between per-face
/// max-margin training and polytope reassignment, merged by consensus.
pub fn fit_hydra(ds: &LabeledDataset, cfg: &HydraConfig) -> Result<HydraFit> {
    fit_hydra_within(ds, cfg, &Deadline::none())
}

pub fn fit_hydra_within(
    ds: &LabeledDataset,
    cfg: &HydraConfig,
    deadline: &Deadline,
) -> Result<HydraFit> {
    cfg.validate()?;
    let controls = ds.control_indices();
    let patients = ds.patient_indices();
    if controls.is_empty() || patients.is_empty() {
        return Err(Error::Input(
            "HYDRA needs both control and patient rows".into(),
        ));
    }
    if patients.len() < cfg.k {
        return Err(Error::Input(format!(
            "{} patients cannot fill {} faces",
            patients.len(),
            cfg.k
        )));
    }
    deadline.check()?;
    // Work in content order so the fit does not depend on how rows are listed.
    let raw = ds.data.values();
    let mut ordinal = vec![usize::MAX; raw.rows()];
    for (i, &row) in patients.iter().enumerate() {
        ordinal[row] = i;
    }
    let controls = content_order(raw, controls);
    let patients = content_order(raw, patients);
    ControlStats::fit(ds)?;
    let canon = raw.select_rows(&controls);
    let stats = ControlStats {
        mean: canon.column_means(),
        sd: canon.column_sds(),
    };
    let x = stats.apply(raw);
    let gram = DenseGram::new(&x);
    let prob = Problem {
        x,
        gram,
        controls,
        patients,
        c: cfg.c,
        tol: cfg.tol,
    };
    let to_input = |i: usize| ordinal[prob.patients[i]];
    let k = cfg.k;

    let runs: Vec<(Vec<usize>, InitTrace)> = if k == 1 {
        Vec::new()
    } else {
        (0..cfg.n_init)
            .into_par_iter()
            .map(|r| run_init(&prob, cfg, r as u64, deadline))
            .collect::<Result<Vec<_>>>()?
    };
    deadline.check()?;

    let mut labels: Vec<usize> = if k == 1 {
        vec![0; prob.patients.len()]
    } else {
        let all: Vec<Vec<usize>> = runs.iter().map(|r| r.0.clone()).collect();
        consensus_aggregate(&all, k, rng::derive(cfg.seed, "hydra-consensus", 0))?
            .into_iter()
            .map(|l| l - 1)
            .collect()
    };
    let mut final_reseeds = Vec::new();
    let (polytope, loss) = prob.train_polytope(&mut labels, k, None, 0, &mut final_reseeds)?;

    let mut out = vec![0; labels.len()];
    for (i, l) in labels.into_iter().enumerate() {
        out[to_input(i)] = l + 1;
    }
    let remap = |events: &mut Vec<ReseedEvent>| {
        for e in events {
            e.patient = to_input(e.patient);
        }
    };
    let inits = runs
        .into_iter()
        .map(|(_, mut t)| {
            t.seeds.iter_mut().for_each(|s| *s = to_input(*s));
            remap(&mut t.reseeds);
            t
        })
        .collect();
    remap(&mut final_reseeds);
    Ok(HydraFit {
        labels: out,
        polytope,
        report: HydraReport {
            inits,
            final_objective: -loss,
            final_reseeds,
        },
    })
}

/// `rows` sorted lexicographically by their values, index as the last tie-break.
fn content_order(x: &Matrix, mut rows: Vec<usize>) -> Vec<usize> {
    rows.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    rows
}

fn run_init(
    prob: &Problem,
    cfg: &HydraConfig,
    r: u64,
    deadline: &Deadline,
) -> Result<(Vec<usize>, InitTrace)> {
    let k = cfg.k;
    let n_pat = prob.patients.len();
    let mut rr = rng::stream(cfg.seed, "hydra-init", r);
    // DPP over a random half of the patients so initializations differ
    let m = (n_pat / 2).max(k).min(n_pat);
    let mut subset = index::sample(&mut rr, n_pat, m).into_vec();
    subset.sort_unstable();
    let pts = prob
        .x
        .select_rows(&subset.iter().map(|&i| prob.patients[i]).collect::<Vec<_>>());
    let seeds: Vec<usize> = dpp_select(&pts, k, rng::derive(cfg.seed, "hydra-dpp", r))?
        .into_iter()
        .map(|i| subset[i])
        .collect();
    let mut labels: Vec<usize> = prob
        .patients
        .iter()
        .map(|&row| {
            let x = prob.x.row(row);
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (c, &s) in seeds.iter().enumerate() {
                let d = sq_dist(x, prob.x.row(prob.patients[s]));
                if d < bd {
                    bd = d;
                    best = c;
                }
            }
            best
        })
        .collect();

    let mut trace = InitTrace {
        seeds,
        objective: Vec::new(),
        iterations: 0,
        converged: false,
        reseeds: Vec::new(),
    };
    let mut prev: Option<Polytope> = None;
    for it in 0..cfg.max_iter {
        deadline.check()?;
        let (p, loss) =
            prob.train_polytope(&mut labels, k, prev.as_ref(), it, &mut trace.reseeds)?;
        trace.objective.push(-loss);
        trace.iterations = it + 1;
        let next = prob.assign(&p);
        let stable = next == labels;
        labels = next;
        trace.objective.push(-prob.loss(&p, &labels));
        prev = Some(p);
        if stable {
            trace.converged = true;
            break;
        }
    }
    Ok((labels, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{make_preset, Preset};
    use crate::eval::matched_accuracy;

    #[test]
    fn k1_all_one() {
        let ds = make_preset(&Preset::syn1(), 1).unwrap();
        let fit = fit_hydra(
            &ds,
            &HydraConfig {
                k: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.labels.iter().all(|&l| l == 1));
        assert!(fit.report.inits.is_empty());
        assert_eq!(fit.polytope.k(), 1);
    }

    #[test]
    fn syn1_recovers_clusters() {
        let ds = make_preset(&Preset::syn1(), 1).unwrap();
        let cfg = HydraConfig {
            k: 3,
            seed: 3,
            ..Default::default()
        };
        let fit = fit_hydra(&ds, &cfg).unwrap();
        let acc = matched_accuracy(&fit.labels, &ds.truth().unwrap().labels).unwrap();
        assert!(acc.accuracy >= 0.95, "accuracy {}", acc.accuracy);
    }
}
