//! Reference cohorts and pseudo-patient datasets with planted clusters.
//!
//! Patients of cluster `k` have every affected variable `j` transformed as
//! `tv = v + d_kj * v * s_i[family(j)] * eta * alpha`, where `s_i` is the
//! patient's severity 3-vector and `eta ~ max(0, Normal(1, sigma))`.

mod io;
mod plant;
mod presets;
mod reference;
mod zscore;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

pub use io::{load_dataset, save_dataset, sidecar_path};
pub use plant::plant_clusters;
pub use presets::{make_preset, unequal_sizes, Preset, SizeMode, SynFamily, Variant};
pub use reference::{generate_reference, surrogate_table, MorphometryParam};
pub use zscore::{planted_deviation_vectors, z_transform, ControlStats};

pub const SCHEMA_VERSION: u32 = 1;

/// Measure family of a variable; selects the severity component applied to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Volume,
    Thickness,
    Area,
    Generic,
}

impl Family {
    /// Index into the patient severity vector. Generic variables use the first component.
    pub fn severity_component(self) -> usize {
        match self {
            Family::Volume | Family::Generic => 0,
            Family::Thickness => 1,
            Family::Area => 2,
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "volume" => Some(Family::Volume),
            "thickness" => Some(Family::Thickness),
            "area" => Some(Family::Area),
            "generic" => Some(Family::Generic),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Volume => "volume",
            Family::Thickness => "thickness",
            Family::Area => "area",
            Family::Generic => "generic",
        }
    }
}

/// Participants x named variables.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortMatrix {
    variable_names: Vec<String>,
    values: Matrix,
    families: Vec<Family>,
}

impl CohortMatrix {
    pub fn new(variable_names: Vec<String>, values: Matrix, families: Vec<Family>) -> Result<Self> {
        if variable_names.len() != values.cols() {
            return Err(Error::Input(format!(
                "{} variable names for {} columns",
                variable_names.len(),
                values.cols()
            )));
        }
        if families.len() != values.cols() {
            return Err(Error::Input(format!(
                "{} family tags for {} columns",
                families.len(),
                values.cols()
            )));
        }
        let mut seen = HashSet::new();
        for n in &variable_names {
            if !seen.insert(n.as_str()) {
                return Err(Error::DuplicateVariable(n.clone()));
            }
        }
        if !values.all_finite() {
            return Err(Error::Input("cohort contains non-finite values".into()));
        }
        Ok(CohortMatrix {
            variable_names,
            values,
            families,
        })
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn families(&self) -> &[Family] {
        &self.families
    }

    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.cols()
    }

    pub(crate) fn into_parts(self) -> (Vec<String>, Matrix, Vec<Family>) {
        (self.variable_names, self.values, self.families)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Control,
    Patient,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Control => "control",
            Role::Patient => "patient",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionMode {
    Increase,
    Decrease,
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReferenceProfile {
    UnitNormal,
    SurrogateMorphometry,
    ExternalCsv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_controls: usize,
    pub n_patients: usize,
    pub n_variables: usize,
    pub n_clusters: usize,
    pub cluster_sizes: Vec<usize>,
    pub direction_mode: DirectionMode,
    pub sigma: f64,
    pub alpha: f64,
    pub vars_per_cluster: usize,
    pub overlap_count: usize,
    pub reference_profile: ReferenceProfile,
    pub seed: u64,
    /// When set, every severity component equals this value instead of U[0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_severity: Option<f64>,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.n_clusters;
        if !(1..=6).contains(&k) {
            return Err(Error::Config(format!(
                "n_clusters must be in 1..=6, got {k}"
            )));
        }
        if self.cluster_sizes.len() != k {
            return Err(Error::Config(format!(
                "{} cluster sizes for {k} clusters",
                self.cluster_sizes.len()
            )));
        }
        let total: usize = self.cluster_sizes.iter().sum();
        if total != self.n_patients {
            return Err(Error::Config(format!(
                "cluster sizes sum to {total}, expected n_patients = {}",
                self.n_patients
            )));
        }
        if self.vars_per_cluster > self.n_variables {
            return Err(Error::Config(format!(
                "vars_per_cluster {} exceeds n_variables {}",
                self.vars_per_cluster, self.n_variables
            )));
        }
        if self.overlap_count > self.vars_per_cluster {
            return Err(Error::Config(format!(
                "overlap_count {} exceeds vars_per_cluster {}",
                self.overlap_count, self.vars_per_cluster
            )));
        }
        let needed = self.overlap_count + k * (self.vars_per_cluster - self.overlap_count);
        if needed > self.n_variables {
            return Err(Error::Config(format!(
                "overlap layout needs {needed} variables but only {} exist",
                self.n_variables
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!(
                "alpha must be >= 0, got {}",
                self.alpha
            )));
        }
        if let Some(s) = self.fixed_severity {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Config(format!("fixed severity {s} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Planted structure of the patient rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Cluster label per patient, 1-based.
    pub labels: Vec<usize>,
    /// Sorted affected variable indices per cluster (index 0 is cluster 1).
    pub affected: Vec<Vec<usize>>,
    /// Direction sign per cluster, aligned with `affected`.
    pub directions: Vec<Vec<i8>>,
    pub severity: Vec<[f64; 3]>,
}

impl GroundTruth {
    pub fn n_clusters(&self) -> usize {
        self.affected.len()
    }

    /// Labels shifted to 0-based indices.
    pub fn zero_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l - 1).collect()
    }

    pub fn validate(&self, n_vars: usize) -> Result<()> {
        let k = self.affected.len();
        if self.directions.len() != k {
            return Err(Error::Input(
                "direction table does not match cluster count".into(),
            ));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l == 0 || l > k) {
            return Err(Error::Input(format!("label {l} outside 1..={k}")));
        }
        for (a, d) in self.affected.iter().zip(&self.directions) {
            if a.len() != d.len() {
                return Err(Error::Input(
                    "directions not defined on the affected set".into(),
                ));
            }
            if a.iter().any(|&j| j >= n_vars) {
                return Err(Error::Input("affected variable index out of range".into()));
            }
            if d.iter().any(|&s| s != 1 && s != -1) {
                return Err(Error::Input("direction signs must be +1 or -1".into()));
            }
        }
        if self.labels.len() != self.severity.len() {
            return Err(Error::Input(
                "severity count does not match label count".into(),
            ));
        }
        if self
            .severity
            .iter()
            .flatten()
            .any(|s| !(0.0..=1.0).contains(s))
        {
            return Err(Error::Input("severity component outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub preset: String,
    pub config: Option<SynthConfig>,
    pub schema_version: u32,
    pub note: Option<String>,
}

impl Provenance {
    pub fn external(preset: impl Into<String>) -> Self {
        Provenance {
            preset: preset.into(),
            config: None,
            schema_version: SCHEMA_VERSION,
            note: None,
        }
    }
}

/// Cohort with roles, optional planted truth and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub participant_ids: Vec<String>,
    pub data: CohortMatrix,
    pub roles: Vec<Role>,
    pub truth: Option<GroundTruth>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(
        participant_ids: Vec<String>,
        data: CohortMatrix,
        roles: Vec<Role>,
        truth: Option<GroundTruth>,
        provenance: Provenance,
    ) -> Result<Self> {
        if participant_ids.len() != data.n_rows() || roles.len() != data.n_rows() {
            return Err(Error::Input(format!(
                "{} ids and {} roles for {} rows",
                participant_ids.len(),
                roles.len(),
                data.n_rows()
            )));
        }
        let ds = LabeledDataset {
            participant_ids,
            data,
            roles,
            truth,
            provenance,
        };
        if let Some(t) = &ds.truth {
            let n_pat = ds.n_patients();
            if t.labels.len() != n_pat {
                return Err(Error::Input(format!(
                    "{} truth labels for {n_pat} patient rows",
                    t.labels.len()
                )));
            }
            t.validate(ds.data.n_vars())?;
        }
        Ok(ds)
    }

    pub fn control_indices(&self) -> Vec<usize> {
        self.indices_of(Role::Control)
    }

    pub fn patient_indices(&self) -> Vec<usize> {
        self.indices_of(Role::Patient)
    }

    fn indices_of(&self, role: Role) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn n_controls(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Control).count()
    }

    pub fn n_patients(&self) -> usize {
        self.roles.iter().filter(|r| **r == Role::Patient).count()
    }

    pub fn controls(&self) -> Matrix {
        self.data.values().select_rows(&self.control_indices())
    }

    pub fn patients(&self) -> Matrix {
        self.data.values().select_rows(&self.patient_indices())
    }

    pub fn truth(&self) -> Result<&GroundTruth> {
        self.truth
            .as_ref()
            .ok_or_else(|| Error::Input("dataset carries no ground truth".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let m = Matrix::zeros(1, 2);
        let err = CohortMatrix::new(vec!["a".into(), "a".into()], m, vec![Family::Generic; 2])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateVariable(ref n) if n == "a"));
    }

    #[test]
    fn non_finite_rejected() {
        let m = Matrix::from_rows(&[[f64::NAN]]).unwrap();
        assert!(CohortMatrix::new(vec!["a".into()], m, vec![Family::Generic]).is_err());
    }

    #[test]
    fn infeasible_overlap_rejected() {
        let cfg = SynthConfig {
            n_controls: 1,
            n_patients: 4,
            n_variables: 10,
            n_clusters: 2,
            cluster_sizes: vec![2, 2],
            direction_mode: DirectionMode::Increase,
            sigma: 0.0,
            alpha: 0.1,
            vars_per_cluster: 6,
            overlap_count: 1,
            reference_profile: ReferenceProfile::UnitNormal,
            seed: 0,
            fixed_severity: None,
        };
        assert!(cfg.validate().is_err());
        let ok = SynthConfig {
            overlap_count: 2,
            ..cfg.clone()
        };
        ok.validate().unwrap();
        let bad_sizes = SynthConfig {
            cluster_sizes: vec![1, 2],
            ..ok
        };
        assert!(bad_sizes.validate().is_err());
    }
}
