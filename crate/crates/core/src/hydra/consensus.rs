//! Consensus of several clusterings through their co-assignment structure.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::eval::kmeans;
use crate::{Error, Matrix, Result};

/// `M[i][j]` = fraction of runs placing `i` and `j` in the same cluster.
pub fn co_assignment(assignments: &[Vec<usize>]) -> Result<Matrix> {
    let n = check(assignments)?;
    let r = assignments.len() as f64;
    let mut m = Matrix::zeros(n, n);
    for a in assignments {
        for i in 0..n {
            for j in 0..n {
                if a[i] == a[j] {
                    m.set(i, j, m.get(i, j) + 1.0);
                }
            }
        }
    }
    m.as_mut_slice().iter_mut().for_each(|v| *v /= r);
    Ok(m)
}

fn check(assignments: &[Vec<usize>]) -> Result<usize> {
    let n = assignments
        .first()
        .ok_or_else(|| Error::Input("consensus needs at least one assignment".into()))?
        .len();
    if assignments.iter().any(|a| a.len() != n) {
        return Err(Error::Input("assignments differ in length".into()));
    }
    Ok(n)
}

/// One-hot indicator matrix `F` (n x sum of per-run label counts), so that the
/// co-assignment matrix equals `F F^T / runs`.
fn indicators(assignments: &[Vec<usize>], n: usize) -> DMatrix<f64> {
    let mut offsets = Vec::with_capacity(assignments.len());
    let mut total = 0;
    let mut codes: Vec<Vec<usize>> = Vec::with_capacity(assignments.len());
    for a in assignments {
        let mut labels = a.clone();
        labels.sort_unstable();
        labels.dedup();
        offsets.push(total);
        total += labels.len();
        codes.push(
            a.iter()
                .map(|l| labels.binary_search(l).expect("label"))
                .collect(),
        );
    }
    let mut f = DMatrix::<f64>::zeros(n, total);
    for (r, code) in codes.iter().enumerate() {
        for (i, &c) in code.iter().enumerate() {
            f[(i, offsets[r] + c)] = 1.0;
        }
    }
    f
}

/// Spectral partition of the co-assignment matrix into `k` groups.
///
/// The top-`k` eigenvectors of `M = F F^T / R` are obtained from the small
/// Gram matrix `F^T F`; rows of `F V_k` (eigenvectors scaled by singular
/// values) are clustered with k-means. Returns 1-based labels.
pub fn consensus_aggregate(assignments: &[Vec<usize>], k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = check(assignments)?;
    if k == 0 || k > n {
        return Err(Error::Input(format!("k = {k} for {n} items")));
    }
    if k == 1 {
        return Ok(vec![1; n]);
    }
    let f = indicators(assignments, n);
    let gram = f.transpose() * &f;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let dims = k.min(order.len());
    let mut emb = Matrix::zeros(n, dims);
    for (c, &e) in order.iter().take(dims).enumerate() {
        let v = eig.eigenvectors.column(e);
        // fix the sign so the embedding is independent of solver conventions
        let col = &f * v;
        let sign = col
            .iter()
            .copied()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, f64::signum);
        for i in 0..n {
            emb.set(i, c, sign * col[i] / (assignments.len() as f64).sqrt());
        }
    }
    let res = kmeans(&emb, k, seed, 10)?;
    Ok(res.labels.iter().map(|l| l + 1).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::matched_accuracy;

    #[test]
    fn identical_runs() {
        let a = vec![1, 1, 2, 2, 3, 3, 1];
        let out = consensus_aggregate(&vec![a.clone(); 4], 3, 0).unwrap();
        assert_eq!(matched_accuracy(&out, &a).unwrap().accuracy, 1.0);
    }

    #[test]
    fn permuted_runs() {
        let a = vec![1, 1, 2, 2, 3, 3];
        let b = vec![2, 2, 3, 3, 1, 1];
        let m = co_assignment(&[a.clone(), b.clone()]).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        let out = consensus_aggregate(&[a.clone(), b], 3, 1).unwrap();
        assert_eq!(matched_accuracy(&out, &a).unwrap().accuracy, 1.0);
    }

    #[test]
    fn co_assignment_shape() {
        let m = co_assignment(&[vec![1, 2, 1], vec![1, 1, 2]]).unwrap();
        for i in 0..3 {
            assert_eq!(m.get(i, i), 1.0);
            for j in 0..3 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert_eq!(m.get(0, 1), 0.5);
    }

    #[test]
    fn bad_inputs() {
        assert!(consensus_aggregate(&[], 2, 0).is_err());
        assert!(consensus_aggregate(&[vec![1, 2], vec![1]], 2, 0).is_err());
    }
}
