use std::collections::HashMap;
use std::fs;
use std::path::Path;

use biobench_core::datagen::{load_dataset, make_preset, planted_deviation_vectors, save_dataset};
use biobench_core::eval::{
    emit_report, fit_algorithm, matched_accuracy, pattern_score, read_jsonl, run_grid, FittedModel,
    GridConfig, ModuleConfigs, ReportFiles,
};
use biobench_core::patterngan::{load_checkpoint, save_checkpoint, Checkpoint};
use biobench_core::sustain::{
    extrapolate_iter_ms, save_model, scaling_probe, write_probe_csv, ProbeConfig,
};
use biobench_core::{Algorithm, Deadline, LabeledDataset, Preset};
use serde_json::json;

use crate::config::{
    ensure_dir, input, load_config, parse_budget, require_seed, resolve_workers, write_manifest,
    CliError,
};

fn runtime(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| runtime(path, e))?;
    fs::write(path, text + "\n").map_err(|e| runtime(path, e))
}

fn log_report(files: &ReportFiles) {
    eprintln!("wrote {}", files.csv.display());
    eprintln!("wrote {}", files.jsonl.display());
    for r in &files.radars {
        eprintln!("wrote {} ({} axes)", r.path.display(), r.axes.len());
    }
}

pub fn gen(preset: &str, seed: Option<u64>, out: &Path, argv: &[String]) -> Result<(), CliError> {
    let seed = require_seed(seed)?;
    let preset: Preset = preset.parse()?;
    let ds = make_preset(&preset, seed)?;
    ensure_dir(out)?;
    let path = out.join(format!("{preset}.csv"));
    save_dataset(&ds, &path)?;
    eprintln!(
        "wrote {} ({} controls, {} patients, {} variables)",
        path.display(),
        ds.n_controls(),
        ds.n_patients(),
        ds.data.n_vars()
    );
    let cfg = json!({ "preset": preset, "seed": seed, "synth": preset.config(seed) });
    write_manifest(out, "gen", argv, &[seed], &cfg)
}

pub struct FitArgs<'a> {
    pub algorithm: &'a str,
    pub data: &'a Path,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub out: &'a Path,
    pub config: Option<&'a Path>,
    pub budget: Option<&'a str>,
    pub argv: &'a [String],
}

fn planted_k(ds: &LabeledDataset) -> Result<usize, CliError> {
    ds.truth()
        .map(|t| t.n_clusters())
        .map_err(|_| CliError::Config("--k is required for data without ground truth".into()))
}

pub fn fit(a: FitArgs<'_>) -> Result<(), CliError> {
    let seed = require_seed(a.seed)?;
    let alg: Algorithm = a.algorithm.parse()?;
    let modules: ModuleConfigs = match a.config {
        Some(p) => load_config(p)?.0,
        None => ModuleConfigs::default(),
    };
    let deadline = match a.budget {
        Some(b) => Deadline::after(parse_budget(b)?),
        None => Deadline::none(),
    };
    let ds = input(load_dataset(a.data))?;
    let k = match a.k {
        Some(k) => k,
        None => planted_k(&ds)?,
    };
    ensure_dir(a.out)?;
    let fitted = fit_algorithm(alg, &ds, k, seed, &modules, &deadline)?;

    let assign = a.out.join("assignment.csv");
    let mut text = String::from("participant_id,label\n");
    for (row, label) in ds.patient_indices().into_iter().zip(&fitted.labels) {
        text.push_str(&format!("{},{label}\n", ds.participant_ids[row]));
    }
    fs::write(&assign, text).map_err(|e| runtime(&assign, e))?;

    let model_path = a.out.join("model.json");
    match &fitted.model {
        FittedModel::Hydra(fit) => write_json(
            &model_path,
            &json!({ "polytope": fit.polytope, "report": fit.report }),
        )?,
        FittedModel::Smile(m, curve) => {
            save_checkpoint(&Checkpoint::Smile(m.clone()), &model_path)?;
            curve.write_csv(&a.out.join("training_curve.csv"))?;
        }
        FittedModel::Surreal(m, curve) => {
            save_checkpoint(&Checkpoint::Surreal(m.clone()), &model_path)?;
            curve.write_csv(&a.out.join("training_curve.csv"))?;
        }
        FittedModel::Sustain(fit) => {
            save_model(&fit.model, &model_path)?;
            write_json(
                &a.out.join("sustain_trace.json"),
                &json!({ "loglik": fit.loglik, "trace": fit.trace, "restart_logliks": fit.restart_logliks }),
            )?;
        }
    }
    eprintln!(
        "{alg}: {} patients assigned to {k} subtypes",
        fitted.labels.len()
    );
    let cfg = json!({
        "algorithm": alg,
        "data": a.data,
        "k": k,
        "seed": seed,
        "budget": a.budget,
        "modules": modules,
    });
    write_manifest(a.out, "fit", a.argv, &[seed], &cfg)
}

fn read_assignment(path: &Path) -> Result<HashMap<String, usize>, CliError> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let label = rec
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| {
                CliError::Config(format!("{}: bad label row {rec:?}", path.display()))
            })?;
        out.insert(rec.get(0).unwrap_or_default().to_string(), label);
    }
    Ok(out)
}

pub fn score(
    data: &Path,
    assignment: &Path,
    model: Option<&Path>,
    out: &Path,
    argv: &[String],
) -> Result<(), CliError> {
    let ds = input(load_dataset(data))?;
    let truth = input(ds.truth())?;
    let assigned = read_assignment(assignment)?;
    let mut pred = Vec::new();
    for row in ds.patient_indices() {
        let id = &ds.participant_ids[row];
        pred.push(*assigned.get(id).ok_or_else(|| {
            CliError::Config(format!(
                "patient `{id}` missing from {}",
                assignment.display()
            ))
        })?);
    }
    let matched = matched_accuracy(&pred, &truth.labels)?;
    let ps = match model {
        Some(p) => {
            let dirs = match input(load_checkpoint(p))? {
                Checkpoint::Smile(m) => m.pattern_directions()?,
                Checkpoint::Surreal(m) => m.pattern_directions()?,
            };
            Some(pattern_score(&dirs, &planted_deviation_vectors(&ds)?)?)
        }
        None => None,
    };
    ensure_dir(out)?;
    let result = json!({ "accuracy": matched.accuracy, "pattern_score": ps, "match": matched });
    write_json(&out.join("score.json"), &result)?;
    match ps {
        Some(p) => println!("accuracy {:.4} pattern_score {p:.4}", matched.accuracy),
        None => println!("accuracy {:.4}", matched.accuracy),
    }
    let cfg = json!({ "data": data, "assignment": assignment, "model": model });
    write_manifest(out, "score", argv, &[], &cfg)
}

pub fn bench(
    config: &Path,
    out: &Path,
    workers: Option<usize>,
    argv: &[String],
) -> Result<(), CliError> {
    let (mut grid, raw): (GridConfig, _) = load_config(config)?;
    if raw.get("seeds").is_none() {
        return Err(CliError::Config(format!(
            "{}: `seeds` must be listed explicitly",
            config.display()
        )));
    }
    grid.workers = resolve_workers(workers, grid.workers)?;
    grid.validate()?;
    eprintln!(
        "running {} cells on {} worker(s)",
        grid.cells().len(),
        grid.workers
    );
    let records = run_grid(&grid)?;
    for r in &records {
        eprintln!(
            "{} {} {} seed {}: {}{}",
            r.algorithm,
            r.axis(),
            r.status.as_str(),
            r.seed,
            r.accuracy
                .map(|a| format!("accuracy {a:.3}"))
                .unwrap_or_default(),
            r.message
                .as_deref()
                .map(|m| format!(" ({m})"))
                .unwrap_or_default()
        );
    }
    ensure_dir(out)?;
    let files = emit_report(&records, out)?;
    log_report(&files);
    write_manifest(out, "bench", argv, &grid.seeds, &grid)
}

pub fn probe_sustain(
    vars: &[usize],
    budget: &str,
    seed: Option<u64>,
    subjects: usize,
    thresholds: usize,
    out: &Path,
    argv: &[String],
) -> Result<(), CliError> {
    let seed = require_seed(seed)?;
    let cfg = ProbeConfig {
        n_subjects: subjects,
        thresholds_per_var: thresholds,
        budget: parse_budget(budget)?,
        seed,
        ..ProbeConfig::default()
    };
    if vars.is_empty() || vars.contains(&0) {
        return Err(CliError::Config("--vars must list positive counts".into()));
    }
    let rows = scaling_probe(vars, &cfg)?;
    ensure_dir(out)?;
    let path = out.join("probe.csv");
    write_probe_csv(&rows, &path)?;
    for r in &rows {
        eprintln!(
            "{} vars: log10 orderings {:.2}, {} ({})",
            r.n_vars,
            r.log10_orderings,
            r.iter_ms
                .map(|t| format!("{t:.2} ms/iter"))
                .unwrap_or_else(|| "no iteration".into()),
            r.status.as_str()
        );
    }
    let fit = extrapolate_iter_ms(&rows);
    if let Some((a, b)) = fit {
        eprintln!("power-law fit: iter_ms ~ {a:.3e} * n_vars^{b:.2}");
    }
    let manifest_cfg = json!({
        "vars": vars,
        "probe": cfg,
        "extrapolation": fit.map(|(a, b)| json!({ "a": a, "b": b })),
    });
    write_manifest(out, "probe-sustain", argv, &[seed], &manifest_cfg)
}

pub fn report(results: &Path, out: &Path, argv: &[String]) -> Result<(), CliError> {
    let records = input(read_jsonl(results))?;
    ensure_dir(out)?;
    let files = emit_report(&records, out)?;
    log_report(&files);
    write_manifest(out, "report", argv, &[], &json!({ "results": results }))
}
