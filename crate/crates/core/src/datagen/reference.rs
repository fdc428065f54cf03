use rand_distr::{Distribution, Normal};

use super::{CohortMatrix, Family, ReferenceProfile};
use crate::{rng, Error, Matrix, Result};

const SURROGATE_TABLE: &str = include_str!("../../data/surrogate_morphometry.csv");
pub const SURROGATE_VARS: usize = 150;

/// One row of the bundled surrogate morphometry table.
#[derive(Debug, Clone, PartialEq)]
pub struct MorphometryParam {
    pub name: String,
    pub family: Family,
    pub mean: f64,
    pub sd: f64,
}

/// Per-variable `(name, family, mean, sd)` used by the surrogate profile.
pub fn surrogate_table() -> Vec<MorphometryParam> {
    let mut out = Vec::with_capacity(SURROGATE_VARS);
    for line in SURROGATE_TABLE
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
    {
        let f: Vec<&str> = line.split(',').collect();
        // bundled at compile time; a malformed row is a build defect
        out.push(MorphometryParam {
            name: f[0].to_string(),
            family: Family::parse(f[1]).expect("bundled family tag"),
            mean: f[2].parse().expect("bundled mean"),
            sd: f[3].parse().expect("bundled sd"),
        });
    }
    out
}

/// Draw a healthy reference cohort.
///
/// Each row owns its own random stream, so the result does not depend on how
/// rows are scheduled.
pub fn generate_reference(
    profile: &ReferenceProfile,
    n_rows: usize,
    n_vars: usize,
    seed: u64,
) -> Result<CohortMatrix> {
    if n_rows == 0 || n_vars == 0 {
        return Err(Error::Config(format!(
            "reference cohort needs n_rows >= 1 and n_vars >= 1, got {n_rows}x{n_vars}"
        )));
    }
    match profile {
        ReferenceProfile::UnitNormal => {
            let names = (1..=n_vars).map(|j| format!("v{j:03}")).collect();
            let dist = Normal::new(1.0, 0.1).expect("valid normal");
            let values = draw_rows(n_rows, n_vars, seed, |_, r| dist.sample(r));
            CohortMatrix::new(names, values, vec![Family::Generic; n_vars])
        }
        ReferenceProfile::SurrogateMorphometry => {
            if n_vars != SURROGATE_VARS {
                return Err(Error::Config(format!(
                    "surrogate morphometry profile has {SURROGATE_VARS} variables, requested {n_vars}"
                )));
            }
            let table = surrogate_table();
            let dists: Vec<Normal<f64>> = table
                .iter()
                .map(|p| Normal::new(p.mean, p.sd).expect("valid normal"))
                .collect();
            let values = draw_rows(n_rows, n_vars, seed, |j, r| dists[j].sample(r));
            CohortMatrix::new(
                table.iter().map(|p| p.name.clone()).collect(),
                values,
                table.iter().map(|p| p.family).collect(),
            )
        }
        ReferenceProfile::ExternalCsv { path } => {
            let cohort = super::io::load_reference_csv(path)?;
            if cohort.n_vars() != n_vars {
                return Err(Error::Config(format!(
                    "{} has {} variables, requested {n_vars}",
                    path.display(),
                    cohort.n_vars()
                )));
            }
            if cohort.n_rows() < n_rows {
                return Err(Error::Config(format!(
                    "{} has {} rows, requested {n_rows}",
                    path.display(),
                    cohort.n_rows()
                )));
            }
            let (names, values, fams) = cohort.into_parts();
            let idx: Vec<usize> = (0..n_rows).collect();
            CohortMatrix::new(names, values.select_rows(&idx), fams)
        }
    }
}

fn draw_rows<F>(n_rows: usize, n_vars: usize, seed: u64, mut draw: F) -> Matrix
where
    F: FnMut(usize, &mut rand_chacha::ChaCha8Rng) -> f64,
{
    let mut m = Matrix::zeros(n_rows, n_vars);
    for i in 0..n_rows {
        let mut r = rng::stream(seed, "reference-row", i as u64);
        for (j, v) in m.row_mut(i).iter_mut().enumerate() {
            *v = draw(j, &mut r);
        }
    }
    m
}
