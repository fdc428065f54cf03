use rand::Rng;

use crate::matrix::sq_dist;
use crate::{rng, Error, Matrix, Result};

const MAX_LLOYD_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// 0-based cluster index per point.
    pub labels: Vec<usize>,
    pub centroids: Matrix,
    pub wcss: f64,
    /// WCSS after every assignment step of the winning run.
    pub trace: Vec<f64>,
}

/// Lloyd's algorithm with greedy k-means++ seeding, best of `n_init` runs by
/// within-cluster sum of squares.
pub fn kmeans(points: &Matrix, k: usize, seed: u64, n_init: usize) -> Result<KMeansResult> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Input(format!("k = {k} with {n} points")));
    }
    let mut best: Option<KMeansResult> = None;
    for run in 0..n_init.max(1) {
        let mut r = rng::stream(seed, "kmeans", run as u64);
        let res = lloyd(points, plus_plus(points, k, &mut r));
        if best.as_ref().is_none_or(|b| res.wcss < b.wcss) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one run"))
}

fn nearest(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut bi = 0;
    let mut bd = f64::INFINITY;
    for (c, row) in centroids.iter_rows().enumerate() {
        let d = sq_dist(p, row);
        if d < bd {
            bd = d;
            bi = c;
        }
    }
    (bi, bd)
}

/// Greedy k-means++: at each step draw `2 + ln k` D^2-weighted candidates and
/// keep the one that lowers the potential most.
pub(crate) fn plus_plus<R: Rng>(points: &Matrix, k: usize, r: &mut R) -> Matrix {
    let n = points.rows();
    let mut centroids = Matrix::zeros(k, points.cols());
    let first = r.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points
        .iter_rows()
        .map(|p| sq_dist(p, points.row(first)))
        .collect();
    let trials = 2 + (k as f64).ln().floor() as usize;
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let mut best_idx = 0;
        let mut best_pot = f64::INFINITY;
        for _ in 0..trials {
            let idx = if total > 0.0 {
                let mut target = r.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if target < d {
                        pick = i;
                        break;
                    }
                    target -= d;
                }
                pick
            } else {
                r.random_range(0..n)
            };
            let pot: f64 = points
                .iter_rows()
                .zip(&d2)
                .map(|(p, &d)| d.min(sq_dist(p, points.row(idx))))
                .sum();
            if pot < best_pot {
                best_pot = pot;
                best_idx = idx;
            }
        }
        centroids.row_mut(c).copy_from_slice(points.row(best_idx));
        for (d, p) in d2.iter_mut().zip(points.iter_rows()) {
            *d = d.min(sq_dist(p, points.row(best_idx)));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, mut centroids: Matrix) -> KMeansResult {
    let n = points.rows();
    let k = centroids.rows();
    let d = points.cols();
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITER {
        let mut changed = false;
        for (i, p) in points.iter_rows().enumerate() {
            let (c, dd) = nearest(p, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            dist[i] = dd;
        }
        // empty clusters take the point farthest from its centroid
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(i) = far.filter(|&i| dist[i] > 0.0) {
                    counts[labels[i]] -= 1;
                    labels[i] = c;
                    counts[c] = 1;
                    dist[i] = 0.0;
                    centroids.row_mut(c).copy_from_slice(points.row(i));
                    changed = true;
                }
            }
        }
        trace.push(dist.iter().sum());
        if !changed && trace.len() > 1 {
            break;
        }
        let mut sums = Matrix::zeros(k, d);
        for (p, &l) in points.iter_rows().zip(&labels) {
            for (s, x) in sums.row_mut(l).iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s / counts[c] as f64;
                }
            }
        }
    }
    let wcss = points
        .iter_rows()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum();
    KMeansResult {
        labels,
        centroids,
        wcss,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn two_blobs() {
        let mut r = rng::stream(1, "t", 0);
        let mut rows = Vec::new();
        for i in 0..40 {
            let c = if i % 2 == 0 { 10.0 } else { -10.0 };
            rows.push(vec![
                c + r.random_range(-0.1..0.1),
                r.random_range(-0.1..0.1),
            ]);
        }
        let m = Matrix::from_rows(&rows).unwrap();
        let res = kmeans(&m, 2, 3, 4).unwrap();
        for i in 0..40 {
            assert_eq!(res.labels[i] == res.labels[0], i % 2 == 0);
        }
    }

    #[test]
    fn identical_points_share_label() {
        let m = Matrix::from_rows(&vec![vec![1.0, 2.0]; 10]).unwrap();
        let res = kmeans(&m, 2, 0, 3).unwrap();
        assert!(res.labels.iter().all(|&l| l == res.labels[0]));
    }

    #[test]
    fn k_too_large() {
        let m = Matrix::zeros(2, 1);
        assert!(kmeans(&m, 3, 0, 1).is_err());
    }

    #[test]
    fn wcss_non_increasing() {
        let mut r = rng::stream(5, "t", 0);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..3).map(|_| r.random::<f64>()).collect())
            .collect();
        let m = Matrix::from_rows(&rows).unwrap();
        for seed in 0..5 {
            let res = kmeans(&m, 5, seed, 1).unwrap();
            for w in res.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{:?}", res.trace);
            }
        }
    }
}
