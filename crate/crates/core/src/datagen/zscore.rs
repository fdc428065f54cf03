use super::LabeledDataset;
use crate::{Error, Matrix, Result};

/// Per-variable mean and unbiased SD of the control rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlStats {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ControlStats {
    pub fn fit(ds: &LabeledDataset) -> Result<Self> {
        let controls = ds.controls();
        if controls.rows() < 2 {
            return Err(Error::Input(format!(
                "z-transform needs at least 2 control rows, found {}",
                controls.rows()
            )));
        }
        let mean = controls.column_means();
        let sd = controls.column_sds();
        if let Some(j) = sd.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::ZeroVariance(ds.data.variable_names()[j].clone()));
        }
        Ok(ControlStats { mean, sd })
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for i in 0..out.rows() {
            for ((x, mu), sd) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.sd) {
                *x = (*x - mu) / sd;
            }
        }
        out
    }
}

/// Patient rows standardized by the control group.
pub fn z_transform(ds: &LabeledDataset) -> Result<Matrix> {
    let stats = ControlStats::fit(ds)?;
    Ok(stats.apply(&ds.patients()))
}

/// Per planted cluster, the mean z-deviation of its patients restricted to the
/// cluster's affected variables (zero elsewhere). Used as the truth side of the
/// pattern score.
pub fn planted_deviation_vectors(ds: &LabeledDataset) -> Result<Vec<Vec<f64>>> {
    let truth = ds.truth()?;
    let z = z_transform(ds)?;
    let k = truth.n_clusters();
    let d = z.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in truth.labels.iter().enumerate() {
        counts[l - 1] += 1;
        for (s, x) in sums[l - 1].iter_mut().zip(z.row(i)) {
            *s += x;
        }
    }
    let mut out = Vec::with_capacity(k);
    for c in 0..k {
        let mut v = vec![0.0; d];
        if counts[c] > 0 {
            for &j in &truth.affected[c] {
                v[j] = sums[c][j] / counts[c] as f64;
            }
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{CohortMatrix, Family, Provenance, Role};

    fn ds(controls: &[f64], patients: &[f64]) -> LabeledDataset {
        let mut rows: Vec<Vec<f64>> = controls.iter().map(|&v| vec![v]).collect();
        rows.extend(patients.iter().map(|&v| vec![v]));
        let n = rows.len();
        let mut roles = vec![Role::Control; controls.len()];
        roles.extend(vec![Role::Patient; patients.len()]);
        LabeledDataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            CohortMatrix::new(
                vec!["x".into()],
                Matrix::from_rows(&rows).unwrap(),
                vec![Family::Generic],
            )
            .unwrap(),
            roles,
            None,
            Provenance::external("test"),
        )
        .unwrap()
    }

    #[test]
    fn two_controls() {
        let z = z_transform(&ds(&[0.0, 2.0], &[3.0, 1.0])).unwrap();
        assert!((z.get(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(z.get(1, 0), 0.0);
    }

    #[test]
    fn zero_variance_names_column() {
        let e = z_transform(&ds(&[1.0, 1.0], &[3.0])).unwrap_err();
        assert!(matches!(e, Error::ZeroVariance(ref n) if n == "x"));
    }

    #[test]
    fn one_control_rejected() {
        assert!(z_transform(&ds(&[1.0], &[3.0])).is_err());
    }
}
