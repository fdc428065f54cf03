//! Weighted linear max-margin classifier solved in the dual by SMO with
//! second-order working-set selection.

use serde::{Deserialize, Serialize};

use crate::matrix::dot;
use crate::{Error, Matrix, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub w: Vec<f64>,
    pub b: f64,
}

impl Hyperplane {
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.w, x) + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub plane: Hyperplane,
    /// Primal objective `0.5 |w|^2 + C sum_i weight_i hinge(y_i (w.x_i + b))`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Symmetric kernel access for the dual solver.
pub(crate) trait Gram {
    fn k(&self, i: usize, j: usize) -> f64;
}

/// Precomputed linear-kernel Gram matrix.
pub(crate) struct DenseGram {
    n: usize,
    data: Vec<f64>,
}

impl DenseGram {
    pub fn new(x: &Matrix) -> Self {
        use rayon::prelude::*;
        let n = x.rows();
        let data: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| dot(x.row(i), x.row(j))))
            .collect();
        DenseGram { n, data }
    }
}

impl Gram for DenseGram {
    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// `members[t]` indexes the Gram; `y[t]` in {-1, +1}; `ub[t] = C * weight > 0`.
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    pub b: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn solve_dual<G: Gram>(
    gram: &G,
    members: &[usize],
    y: &[f64],
    ub: &[f64],
    tol: f64,
) -> DualSolution {
    let n = members.len();
    let kk = |a: usize, b: usize| gram.k(members[a], members[b]);
    let qd: Vec<f64> = (0..n).map(|t| kk(t, t)).collect();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let max_iter = 10_000_000usize.min(100 * n + 100_000);
    let mut iterations = 0;
    let mut converged = false;

    let is_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < ub[t]) || (y[t] < 0.0 && a[t] > 0.0);
    let is_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < ub[t]);

    while iterations < max_iter {
        // i: maximal violating index in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(t, &alpha) {
                let v = -y[t] * g[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i != usize::MAX {
            for t in 0..n {
                if is_low(t, &alpha) {
                    let v = -y[t] * g[t];
                    if v < gmin {
                        gmin = v;
                    }
                    let bdiff = gmax - v;
                    if bdiff > 0.0 {
                        let a = qd[i] + qd[t] - 2.0 * kk(i, t);
                        let a = if a > 0.0 { a } else { TAU };
                        let o = -(bdiff * bdiff) / a;
                        if o <= obj_min {
                            obj_min = o;
                            j = t;
                        }
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (ci, cj) = (ub[i], ub[j]);
        let (oi, oj) = (alpha[i], alpha[j]);
        let kij = kk(i, j);
        if y[i] != y[j] {
            let quad = (qd[i] + qd[j] + 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - oi, alpha[j] - oj);
        for t in 0..n {
            g[t] += y[t] * (y[i] * kk(i, t) * di + y[j] * kk(j, t) * dj);
        }
    }

    // bias from free multipliers, or the midpoint of the feasible interval
    let mut ubound = f64::INFINITY;
    let mut lbound = f64::NEG_INFINITY;
    let mut sum_free = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * g[t];
        let at_ub = alpha[t] >= ub[t];
        let at_lb = alpha[t] <= 0.0;
        if at_ub {
            if y[t] < 0.0 {
                ubound = ubound.min(yg);
            } else {
                lbound = lbound.max(yg);
            }
        } else if at_lb {
            if y[t] > 0.0 {
                ubound = ubound.min(yg);
            } else {
                lbound = lbound.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ubound + lbound) / 2.0
    };
    DualSolution {
        alpha,
        b: -rho,
        iterations,
        converged,
    }
}

pub(crate) fn hinge(m: f64) -> f64 {
    (1.0 - m).max(0.0)
}

/// Train one weighted linear max-margin classifier.
///
/// `y` holds `+1`/`-1`. Samples with zero weight are ignored; every class must
/// keep at least one positively weighted sample.
pub fn train_hyperplane(
    x: &Matrix,
    y: &[i8],
    sample_weights: &[f64],
    c: f64,
    tol: f64,
) -> Result<SvmFit> {
    if y.len() != x.rows() || sample_weights.len() != x.rows() {
        return Err(Error::Input(
            "labels/weights do not match sample count".into(),
        ));
    }
    if !x.all_finite() || sample_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Input(
            "non-finite features or invalid weights".into(),
        ));
    }
    if !(c > 0.0) || !(tol > 0.0) {
        return Err(Error::Config("C and tol must be positive".into()));
    }
    let members: Vec<usize> = (0..x.rows()).filter(|&i| sample_weights[i] > 0.0).collect();
    check_both_classes(members.iter().map(|&i| y[i]))?;
    let yy: Vec<f64> = members.iter().map(|&i| f64::from(y[i])).collect();
    let ub: Vec<f64> = members.iter().map(|&i| c * sample_weights[i]).collect();
    let sub = x.select_rows(&members);
    let gram = DenseGram::new(&sub);
    let local: Vec<usize> = (0..members.len()).collect();
    let sol = solve_dual(&gram, &local, &yy, &ub, tol);
    let plane = recover_plane(&sub, &local, &yy, &sol);
    let objective = primal_objective(&plane, &sub, &local, &yy, &ub);
    Ok(SvmFit {
        plane,
        objective,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

pub(crate) fn check_both_classes(labels: impl Iterator<Item = i8>) -> Result<()> {
    let (mut pos, mut neg) = (false, false);
    for l in labels {
        match l {
            1 => pos = true,
            -1 => neg = true,
            other => return Err(Error::Input(format!("label {other} is not +1/-1"))),
        }
    }
    if !(pos && neg) {
        return Err(Error::Degenerate(
            "max-margin training needs a positively weighted sample of each class".into(),
        ));
    }
    Ok(())
}

pub(crate) fn recover_plane(
    x: &Matrix,
    members: &[usize],
    y: &[f64],
    sol: &DualSolution,
) -> Hyperplane {
    let mut w = vec![0.0; x.cols()];
    for (t, &i) in members.iter().enumerate() {
        let a = sol.alpha[t] * y[t];
        if a != 0.0 {
            for (wv, xv) in w.iter_mut().zip(x.row(i)) {
                *wv += a * xv;
            }
        }
    }
    Hyperplane { w, b: sol.b }
}

pub(crate) fn primal_objective(
    plane: &Hyperplane,
    x: &Matrix,
    members: &[usize],
    y: &[f64],
    ub: &[f64],
) -> f64 {
    let reg = 0.5 * dot(&plane.w, &plane.w);
    let loss: f64 = members
        .iter()
        .enumerate()
        .map(|(t, &i)| ub[t] * hinge(y[t] * plane.score(x.row(i))))
        .sum();
    reg + loss
}
