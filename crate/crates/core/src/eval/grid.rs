use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{matched_accuracy, pattern_score};
use crate::datagen::{make_preset, planted_deviation_vectors, ControlStats, LabeledDataset};
use crate::hydra::{fit_hydra_within, HydraConfig, HydraFit};
use crate::patterngan::{
    fit_smile_within, fit_surreal_within, r_index_labels, r_indices, smile_assign, SmileModel,
    SurrealModel, TrainConfig, TrainingCurve,
};
use crate::sustain::{fit_sustain_within, stage_and_assign, EventSet, SustainConfig, SustainFit};
use crate::{rng, Deadline, Error, Preset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Hydra,
    Smilegan,
    Surrealgan,
    Sustain,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Hydra,
        Algorithm::Smilegan,
        Algorithm::Surrealgan,
        Algorithm::Sustain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Hydra => "hydra",
            Algorithm::Smilegan => "smilegan",
            Algorithm::Surrealgan => "surrealgan",
            Algorithm::Sustain => "sustain",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Per-algorithm settings. Seeds inside are ignored by the grid, which derives
/// its own from the cell seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModuleConfigs {
    pub hydra: HydraConfig,
    pub smilegan: TrainConfig,
    pub surrealgan: TrainConfig,
    pub sustain: SustainConfig,
}

impl Default for ModuleConfigs {
    fn default() -> Self {
        ModuleConfigs {
            hydra: HydraConfig::default(),
            smilegan: TrainConfig::smile(),
            surrealgan: TrainConfig::surreal(),
            sustain: SustainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Hydra(HydraFit),
    Smile(SmileModel, TrainingCurve),
    Surreal(SurrealModel, TrainingCurve),
    Sustain(SustainFit),
}

/// Labels (1-based, patient rows) and, for pattern models, unit directions.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmOutput {
    pub labels: Vec<usize>,
    pub directions: Option<Vec<Vec<f64>>>,
    pub model: FittedModel,
}

/// Fit one algorithm with `k` subtypes on a labeled dataset.
///
/// Inputs are z-scored against the controls. SuStaIn sees absolute z so that
/// either deviation direction counts as abnormal.
pub fn fit_algorithm(
    alg: Algorithm,
    ds: &LabeledDataset,
    k: usize,
    seed: u64,
    cfgs: &ModuleConfigs,
    deadline: &Deadline,
) -> Result<AlgorithmOutput> {
    deadline.check()?;
    let fit_seed = rng::derive(seed, alg.as_str(), 0);
    match alg {
        Algorithm::Hydra => {
            let cfg = HydraConfig {
                k,
                seed: fit_seed,
                ..cfgs.hydra.clone()
            };
            let fit = fit_hydra_within(ds, &cfg, deadline)?;
            Ok(AlgorithmOutput {
                labels: fit.labels.clone(),
                directions: None,
                model: FittedModel::Hydra(fit),
            })
        }
        Algorithm::Smilegan | Algorithm::Surrealgan => {
            let stats = ControlStats::fit(ds)?;
            let zc = stats.apply(&ds.controls());
            let zp = stats.apply(&ds.patients());
            if alg == Algorithm::Smilegan {
                let cfg = TrainConfig {
                    seed: fit_seed,
                    ..cfgs.smilegan.clone()
                };
                let (model, curve) = fit_smile_within(&zc, &zp, k, &cfg, deadline)?;
                Ok(AlgorithmOutput {
                    labels: smile_assign(&model, &zp)?.labels,
                    directions: Some(model.pattern_directions()?),
                    model: FittedModel::Smile(model, curve),
                })
            } else {
                let cfg = TrainConfig {
                    seed: fit_seed,
                    ..cfgs.surrealgan.clone()
                };
                let (model, curve) = fit_surreal_within(&zc, &zp, k, &cfg, deadline)?;
                Ok(AlgorithmOutput {
                    labels: r_index_labels(&r_indices(&model, &zp)?),
                    directions: Some(model.pattern_directions()?),
                    model: FittedModel::Surreal(model, curve),
                })
            }
        }
        Algorithm::Sustain => {
            let stats = ControlStats::fit(ds)?;
            let mut z = stats.apply(&ds.patients());
            z.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
            let set = EventSet::default_for(z.cols());
            let cfg = SustainConfig {
                seed: fit_seed,
                ..cfgs.sustain.clone()
            };
            let fit = fit_sustain_within(&z, k, &set, &cfg, deadline)?;
            Ok(AlgorithmOutput {
                labels: stage_and_assign(&fit.model, &z)?.labels,
                directions: None,
                model: FittedModel::Sustain(fit),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub algorithms: Vec<Algorithm>,
    pub presets: Vec<Preset>,
    pub seeds: Vec<u64>,
    /// Wall-clock budget per cell.
    pub budget_secs: f64,
    pub workers: usize,
    /// Record wall time and peak memory. Off makes the CSV byte-reproducible.
    pub timing: bool,
    #[serde(flatten)]
    pub modules: ModuleConfigs,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            algorithms: vec![Algorithm::Hydra],
            presets: vec![Preset::syn1()],
            seeds: vec![0],
            budget_secs: 600.0,
            workers: 1,
            timing: true,
            modules: ModuleConfigs::default(),
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.presets.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "grid needs at least one algorithm, preset and seed".into(),
            ));
        }
        if !(self.budget_secs >= 0.0) || !self.budget_secs.is_finite() {
            return Err(Error::Config(format!(
                "budget must be a finite nonnegative number of seconds, got {}",
                self.budget_secs
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        self.modules.hydra.validate()?;
        self.modules.smilegan.validate()?;
        self.modules.surrealgan.validate()?;
        self.modules.sustain.validate()
    }

    /// Cells in deterministic order: algorithm, then preset, then seed.
    pub fn cells(&self) -> Vec<(Algorithm, Preset, u64)> {
        let mut out = Vec::new();
        for &a in &self.algorithms {
            for &p in &self.presets {
                for &s in &self.seeds {
                    out.push((a, p, s));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Timeout,
    Failed,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Timeout => "timeout",
            RecordStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub algorithm: Algorithm,
    /// Dataset family, e.g. `syn3`.
    pub preset: String,
    /// `base` for syn1/syn2, otherwise e.g. `noise-unequal`.
    pub variant: String,
    pub k: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub pattern_score: Option<f64>,
    pub wall_ms: Option<f64>,
    pub peak_mem_bytes: Option<u64>,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl BenchmarkRecord {
    /// Radar axis label `preset/variant/K`.
    pub fn axis(&self) -> String {
        format!("{}/{}/K{}", self.preset, self.variant, self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.status == RecordStatus::Ok && self.accuracy.is_none() {
            return Err(Error::Input("ok record without accuracy".into()));
        }
        if self.wall_ms.is_some_and(|w| !(w >= 0.0)) {
            return Err(Error::Input("negative wall time".into()));
        }
        Ok(())
    }
}

/// Process high-water resident set size, from `/proc/self/status` where available.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn score_cell(
    alg: Algorithm,
    preset: Preset,
    seed: u64,
    cfgs: &ModuleConfigs,
    deadline: &Deadline,
) -> Result<(f64, Option<f64>)> {
    let ds = make_preset(&preset, seed)?;
    let out = fit_algorithm(alg, &ds, preset.k, seed, cfgs, deadline)?;
    let truth = ds.truth()?;
    let acc = matched_accuracy(&out.labels, &truth.labels)?.accuracy;
    let ps = match &out.directions {
        Some(dirs) => Some(pattern_score(dirs, &planted_deviation_vectors(&ds)?)?),
        None => None,
    };
    Ok((acc, ps))
}

/// Run one cell; errors and panics become failed records.
pub fn run_cell(alg: Algorithm, preset: Preset, seed: u64, cfg: &GridConfig) -> BenchmarkRecord {
    let start = Instant::now();
    let deadline = Deadline::after(Duration::from_secs_f64(cfg.budget_secs));
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        score_cell(alg, preset, seed, &cfg.modules, &deadline)
    }));
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let mut rec = BenchmarkRecord {
        algorithm: alg,
        preset: preset.family.as_str().to_string(),
        variant: preset.variant_label(),
        k: preset.k,
        seed,
        accuracy: None,
        pattern_score: None,
        wall_ms: cfg.timing.then_some(wall),
        peak_mem_bytes: if cfg.timing { peak_rss_bytes() } else { None },
        status: RecordStatus::Ok,
        message: None,
    };
    match outcome {
        Ok(Ok((acc, ps))) => {
            rec.accuracy = Some(acc);
            rec.pattern_score = ps;
        }
        Ok(Err(Error::Timeout)) => rec.status = RecordStatus::Timeout,
        Ok(Err(e)) => {
            rec.status = RecordStatus::Failed;
            rec.message = Some(e.to_string());
        }
        Err(panic) => {
            rec.status = RecordStatus::Failed;
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            rec.message = Some(msg);
        }
    }
    rec
}

/// Run every cell on a pool of `cfg.workers` threads. Records come back in
/// [`GridConfig::cells`] order whatever the scheduling.
pub fn run_grid(cfg: &GridConfig) -> Result<Vec<BenchmarkRecord>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, p, s)| run_cell(a, p, s, cfg))
            .collect()
    }))
}
