//! Label matching: Hungarian assignment, matched accuracy, pattern score.

use serde::{Deserialize, Serialize};

use crate::matrix::{dot, norm};
use crate::{Error, Result};

/// Minimum-cost assignment of rows to columns for an `n x m` cost matrix.
///
/// Returns, for each row, the assigned column. Requires `n <= m`; callers
/// transpose otherwise. Shortest augmenting path with potentials, O(n^2 m).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(
        n <= m,
        "hungarian: rows ({n}) must not exceed columns ({m})"
    );
    // 1-based arrays; index 0 is a virtual column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Maximum-weight matching of a rectangular score matrix. Returns `(row, col)` pairs.
pub fn max_weight_matching(score: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = score.len();
    if n == 0 {
        return Vec::new();
    }
    let m = score[0].len();
    if n <= m {
        let cost: Vec<Vec<f64>> = score
            .iter()
            .map(|r| r.iter().map(|x| -x).collect())
            .collect();
        hungarian(&cost).into_iter().enumerate().collect()
    } else {
        let cost: Vec<Vec<f64>> = (0..m)
            .map(|j| (0..n).map(|i| -score[i][j]).collect())
            .collect();
        hungarian(&cost)
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub accuracy: f64,
    /// `(predicted label, truth label)` pairs of the optimal bijection.
    pub permutation: Vec<(usize, usize)>,
    /// Rows follow `pred_labels`, columns follow `truth_labels`.
    pub confusion: Vec<Vec<usize>>,
    pub pred_labels: Vec<usize>,
    pub truth_labels: Vec<usize>,
}

impl MatchResult {
    /// Truth label matched to a predicted label, if any.
    pub fn map(&self, pred: usize) -> Option<usize> {
        self.permutation.iter().find(|p| p.0 == pred).map(|p| p.1)
    }
}

fn distinct(labels: &[usize]) -> Vec<usize> {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Confusion matrix between two labelings plus the distinct label lists.
pub fn confusion(pred: &[usize], truth: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let pl = distinct(pred);
    let tl = distinct(truth);
    let mut c = vec![vec![0usize; tl.len()]; pl.len()];
    for (p, t) in pred.iter().zip(truth) {
        let i = pl.binary_search(p).expect("label present");
        let j = tl.binary_search(t).expect("label present");
        c[i][j] += 1;
    }
    (c, pl, tl)
}

/// Accuracy maximized over bijections between predicted and true labels.
pub fn matched_accuracy(pred: &[usize], truth: &[usize]) -> Result<MatchResult> {
    if pred.is_empty() || truth.is_empty() {
        return Err(Error::Input("matched accuracy of an empty labeling".into()));
    }
    if pred.len() != truth.len() {
        return Err(Error::Input(format!(
            "label lengths differ: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let (conf, pl, tl) = confusion(pred, truth);
    let score: Vec<Vec<f64>> = conf
        .iter()
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    let pairs = max_weight_matching(&score);
    let hits: usize = pairs.iter().map(|&(i, j)| conf[i][j]).sum();
    Ok(MatchResult {
        accuracy: hits as f64 / pred.len() as f64,
        permutation: pairs.iter().map(|&(i, j)| (pl[i], tl[j])).collect(),
        confusion: conf,
        pred_labels: pl,
        truth_labels: tl,
    })
}

/// Mean cosine similarity between recovered directions and truth vectors
/// under the optimal one-to-one matching.
pub fn pattern_score(recovered: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if recovered.len() != truth.len() || truth.is_empty() {
        return Err(Error::Input(format!(
            "{} recovered directions for {} truth vectors",
            recovered.len(),
            truth.len()
        )));
    }
    for (c, t) in truth.iter().enumerate() {
        if !(norm(t) > 0.0) {
            return Err(Error::Degenerate(format!(
                "truth vector {} has zero norm",
                c + 1
            )));
        }
    }
    let cos: Vec<Vec<f64>> = recovered
        .iter()
        .map(|r| {
            let rn = norm(r);
            truth
                .iter()
                .map(|t| {
                    if rn > 0.0 {
                        dot(r, t) / (rn * norm(t))
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let pairs = max_weight_matching(&cos);
    Ok(pairs.iter().map(|&(i, j)| cos[i][j]).sum::<f64>() / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relabeling() {
        let r = matched_accuracy(&[1, 1, 2, 2], &[2, 2, 1, 1]).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.map(1), Some(2));
    }

    #[test]
    fn more_predicted_than_true() {
        let r = matched_accuracy(&[1, 2, 3], &[1, 2, 2]).unwrap();
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.permutation.len(), 2);
    }

    #[test]
    fn empty_rejected() {
        assert!(matched_accuracy(&[], &[]).is_err());
        assert!(matched_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn hungarian_small() {
        let c = vec![
            vec![4.0, 1.0, 3.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 2.0, 2.0],
        ];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn pattern_score_cases() {
        let t = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 2.0, 0.0],
            vec![0.0, 0.0, 3.0],
        ];
        let perm = vec![t[2].clone(), t[0].clone(), t[1].clone()];
        assert!((pattern_score(&perm, &t).unwrap() - 1.0).abs() < 1e-12);
        let orth = vec![vec![0.0, 0.0, 0.0, 1.0]; 3];
        let t4: Vec<Vec<f64>> = t.iter().map(|v| [v.as_slice(), &[0.0]].concat()).collect();
        assert_eq!(pattern_score(&orth, &t4).unwrap(), 0.0);
        assert!(pattern_score(&t, &[vec![0.0; 3], t[1].clone(), t[2].clone()]).is_err());
    }
}
