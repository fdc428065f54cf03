//! Greedy MAP selection of a diverse subset under an RBF L-ensemble.

use rand::seq::SliceRandom;

use crate::matrix::sq_dist;
use crate::{rng, Error, Matrix, Result};

/// RBF kernel with bandwidth equal to the median pairwise distance.
pub fn rbf_kernel(points: &Matrix) -> Matrix {
    let n = points.rows();
    let mut d2 = Matrix::zeros(n, n);
    let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(points.row(i), points.row(j));
            d2.set(i, j, d);
            d2.set(j, i, d);
            dists.push(d.sqrt());
        }
    }
    let ell = if dists.is_empty() {
        1.0
    } else {
        let mid = dists.len() / 2;
        let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
        if *m > 0.0 {
            *m
        } else {
            1.0
        }
    };
    let two_l2 = 2.0 * ell * ell;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            l.set(i, j, (-d2.get(i, j) / two_l2).exp());
        }
    }
    l
}

/// Greedy completion from a fixed first item. Returns the picks and
/// `log det L_S` (incremental Cholesky).
fn greedy_from(l: &Matrix, first: usize, k: usize) -> (Vec<usize>, f64) {
    let n = l.rows();
    let mut d2: Vec<f64> = (0..n).map(|i| l.get(i, i)).collect();
    let mut cis: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut picked = vec![false; n];
    let mut sel = Vec::with_capacity(k);
    let mut logdet = 0.0;
    let mut j = first;
    loop {
        sel.push(j);
        picked[j] = true;
        logdet += d2[j].max(f64::MIN_POSITIVE).ln();
        if sel.len() == k {
            break;
        }
        let dj = d2[j].max(0.0).sqrt();
        let cj = cis[j].clone();
        let mut next = usize::MAX;
        let mut best = f64::NEG_INFINITY;
        for i in 0..n {
            if picked[i] {
                continue;
            }
            let e = if dj > 0.0 {
                (l.get(j, i) - cj.iter().zip(&cis[i]).map(|(a, b)| a * b).sum::<f64>()) / dj
            } else {
                0.0
            };
            cis[i].push(e);
            d2[i] -= e * e;
            if d2[i] > best {
                best = d2[i];
                next = i;
            }
        }
        j = next;
    }
    (sel, logdet)
}

/// Select `k` diverse rows of `points`.
///
/// The first item is the kernel-diagonal maximizer. The RBF diagonal is
/// constant, so every point ties; the tie is resolved by completing the
/// greedy MAP path from each tied candidate and keeping the largest
/// determinant. Candidates are visited in a seed-shuffled order and exact
/// determinant ties keep the earliest visited.
pub fn dpp_select(points: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = points.rows();
    if k > n {
        return Err(Error::Input(format!("cannot select {k} of {n} points")));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if k == n {
        return Ok((0..n).collect());
    }
    let l = rbf_kernel(points);
    let top = (0..n)
        .map(|i| l.get(i, i))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut starts: Vec<usize> = (0..n).filter(|&i| l.get(i, i) >= top - 1e-12).collect();
    starts.shuffle(&mut rng::stream(seed, "dpp-ties", 0));
    let mut best: Option<(Vec<usize>, f64)> = None;
    for s in starts {
        let (sel, ld) = greedy_from(&l, s, k);
        if best.as_ref().is_none_or(|b| ld > b.1 + 1e-12) {
            best = Some((sel, ld));
        }
    }
    Ok(best.expect("non-empty start set").0)
}
