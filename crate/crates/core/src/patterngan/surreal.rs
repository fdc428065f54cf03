use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nets::{
    disc_backward, disc_forward, disc_loss, init_disc, matvec_add, matvec_t_add, outer_add,
    sigmoid, sign,
};
use super::params::{frobenius_norms, project_frobenius, Block, Momentum, Params};
use super::{
    argmax1, check_data, coverage, seeded_offsets, split_controls, unit, Differentiable,
    TrainConfig, TrainingCurve,
};
use crate::{rng, Deadline, Error, Matrix, Result};

/// Step used by the monotonicity penalty.
const MONO_DELTA: f64 = 0.1;

/// `f(x, r) = x + Σ r_m (W_m x + b_m)` with an inverse network returning `(r̂, x̂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrealModel {
    pub d: usize,
    pub m: usize,
    /// Blocks `W` `[m, d, d]`, `b` `[m, d]`, `P` `[m, d]`, `p` `[m]`, `T` `[d, d]`, `t` `[d]`.
    pub gen: Params,
    pub disc: Params,
    pub l_bound: f64,
    pub holdout_mean: Vec<f64>,
}

/// Controls with two independent R-index draws each, plus real patient rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrealBatch {
    pub controls: Matrix,
    pub r: Matrix,
    pub r2: Matrix,
    pub patients: Matrix,
}

impl SurrealBatch {
    pub fn sample<R: Rng>(
        controls: &Matrix,
        patients: &Matrix,
        m: usize,
        size: usize,
        rng: &mut R,
    ) -> Self {
        let ci: Vec<usize> = (0..size)
            .map(|_| rng.random_range(0..controls.rows()))
            .collect();
        let r = (0..size * m).map(|_| rng.random::<f64>()).collect();
        let r2 = (0..size * m).map(|_| rng.random::<f64>()).collect();
        let pi: Vec<usize> = (0..size)
            .map(|_| rng.random_range(0..patients.rows()))
            .collect();
        SurrealBatch {
            controls: controls.select_rows(&ci),
            r: Matrix::from_vec(size, m, r).expect("shape"),
            r2: Matrix::from_vec(size, m, r2).expect("shape"),
            patients: patients.select_rows(&pi),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GenParts {
    total: f64,
    adv: f64,
    change: f64,
    mono: f64,
    orth: f64,
    sparse: f64,
    recon: f64,
}

const W: usize = 0;
const B: usize = 1;
const P: usize = 2;
const PB: usize = 3;
const T: usize = 4;
const TB: usize = 5;

impl SurrealModel {
    pub fn init<R: Rng>(d: usize, m: usize, cfg: &TrainConfig, rng: &mut R) -> Self {
        let mut b = Block::zeros("b", &[m, d]);
        for v in &mut b.data {
            let mag: f64 = rng.random_range(0.05..0.15);
            *v = if rng.random::<bool>() { mag } else { -mag };
        }
        let gen = Params::new(vec![
            Block::zeros("W", &[m, d, d]),
            b,
            Block::normal("P", &[m, d], 1.0 / (d as f64).sqrt(), rng),
            Block::zeros("p", &[m]),
            Block::zeros("T", &[d, d]),
            Block::zeros("t", &[d]),
        ]);
        SurrealModel {
            d,
            m,
            gen,
            disc: init_disc(d, cfg.hidden, rng),
            l_bound: cfg.l_bound,
            holdout_mean: vec![0.0; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d, m) = (self.d, self.m);
        let g = &self.gen.blocks;
        let shapes_ok = g.len() == 6
            && g[W].shape == [m, d, d]
            && g[B].shape == [m, d]
            && g[P].shape == [m, d]
            && g[PB].shape == [m]
            && g[T].shape == [d, d]
            && g[TB].shape == [d]
            && self.disc.blocks.len() == 4
            && self.disc.blocks[0].shape.get(1) == Some(&d)
            && self.holdout_mean.len() == d;
        if !shapes_ok {
            return Err(Error::Input(
                "parameter blocks do not match the model dimensions".into(),
            ));
        }
        if !self.gen.all_finite() || !self.disc.all_finite() {
            return Err(Error::Input("model parameters are not finite".into()));
        }
        if frobenius_norms(&g[W].data, d * d)
            .iter()
            .any(|n| *n > self.l_bound * (1.0 + 1e-9))
        {
            return Err(Error::Input(
                "pattern matrix exceeds the Lipschitz bound".into(),
            ));
        }
        Ok(())
    }

    /// Every `g_m(x) = W_m x + b_m`.
    fn patterns(gen: &Params, d: usize, m: usize, x: &[f64]) -> Vec<Vec<f64>> {
        let dd = d * d;
        (0..m)
            .map(|k| {
                let mut g = gen.blocks[B].data[k * d..(k + 1) * d].to_vec();
                matvec_add(&gen.blocks[W].data[k * dd..(k + 1) * dd], x, &mut g);
                g
            })
            .collect()
    }

    pub fn generate(&self, x: &[f64], r: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for (g, rm) in Self::patterns(&self.gen, self.d, self.m, x).iter().zip(r) {
            for (a, b) in y.iter_mut().zip(g) {
                *a += rm * b;
            }
        }
        y
    }

    fn infer(gen: &Params, y: &[f64]) -> Vec<f64> {
        let mut pre = gen.blocks[PB].data.clone();
        matvec_add(&gen.blocks[P].data, y, &mut pre);
        pre.into_iter().map(sigmoid).collect()
    }

    fn gen_parts(
        &self,
        gen: &Params,
        batch: &SurrealBatch,
        cfg: &TrainConfig,
    ) -> (GenParts, Params) {
        let (d, m, dd) = (self.d, self.m, self.d * self.d);
        let mut grad = gen.zeros_like();
        let mut parts = GenParts::default();
        let n_base = batch.controls.rows();
        if n_base > 0 {
            let s = 1.0 / (2 * n_base) as f64;
            // patterns depend on x only, so both draws share them and their gradient
            let all_g: Vec<Vec<Vec<f64>>> = batch
                .controls
                .iter_rows()
                .map(|x| Self::patterns(gen, d, m, x))
                .collect();
            let dprofile = orthogonality(&all_g, d, m, cfg.lambda_orth, &mut parts.orth);
            let inv_b = 1.0 / n_base as f64;
            let rows = batch
                .controls
                .iter_rows()
                .zip(batch.r.iter_rows().zip(batch.r2.iter_rows()))
                .zip(&all_g);
            for ((x, (r1, r2)), g) in rows {
                let mut dg: Vec<Vec<f64>> = g
                    .iter()
                    .zip(&dprofile)
                    .map(|(gm, dp)| {
                        gm.iter()
                            .zip(dp)
                            .map(|(v, w)| inv_b * sign(*v) * w)
                            .collect()
                    })
                    .collect();
                for r in [r1, r2] {
                    let mut u = vec![0.0; d];
                    for (gm, rm) in g.iter().zip(r) {
                        for (a, b) in u.iter_mut().zip(gm) {
                            *a += rm * b;
                        }
                    }
                    let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
                    let mut dy = vec![0.0; d];

                    let pass = disc_forward(&self.disc, &y);
                    parts.adv += s * (pass.out - 1.0).powi(2);
                    let dout = cfg.lambda_adv * 2.0 * s * (pass.out - 1.0);
                    disc_backward(&self.disc, &y, &pass, dout, None, Some(&mut dy));
                    parts.change += s * u.iter().map(|v| v.abs()).sum::<f64>();
                    for (g, v) in dy.iter_mut().zip(&u) {
                        *g += cfg.lambda_change * s * sign(*v);
                    }

                    // inverse consistency: recover r and x from the pseudo-patient
                    let rhat = Self::infer(gen, &y);
                    let mut xhat: Vec<f64> = y
                        .iter()
                        .zip(&gen.blocks[TB].data)
                        .map(|(a, b)| a + b)
                        .collect();
                    matvec_add(&gen.blocks[T].data, &y, &mut xhat);
                    let mut rec = 0.0;
                    let dpre: Vec<f64> = rhat
                        .iter()
                        .zip(r)
                        .map(|(h, t)| {
                            rec += (h - t).powi(2);
                            cfg.lambda_recon * s * 2.0 * (h - t) * h * (1.0 - h)
                        })
                        .collect();
                    let dxhat: Vec<f64> = xhat
                        .iter()
                        .zip(x)
                        .map(|(h, t)| {
                            rec += (h - t).powi(2);
                            cfg.lambda_recon * s * 2.0 * (h - t)
                        })
                        .collect();
                    parts.recon += s * rec;
                    outer_add(&mut grad.blocks[P].data, &dpre, &y);
                    for (a, b) in grad.blocks[PB].data.iter_mut().zip(&dpre) {
                        *a += b;
                    }
                    matvec_t_add(&gen.blocks[P].data, &dpre, &mut dy);
                    outer_add(&mut grad.blocks[T].data, &dxhat, &y);
                    for (a, b) in grad.blocks[TB].data.iter_mut().zip(&dxhat) {
                        *a += b;
                    }
                    matvec_t_add(&gen.blocks[T].data, &dxhat, &mut dy);
                    for (a, b) in dy.iter_mut().zip(&dxhat) {
                        *a += b;
                    }

                    let mut du = dy;
                    let a = crate::matrix::norm(&u);
                    for k in 0..m {
                        let up: Vec<f64> = u
                            .iter()
                            .zip(&g[k])
                            .map(|(a, b)| a + MONO_DELTA * b)
                            .collect();
                        let ap = crate::matrix::norm(&up);
                        let v = a - ap;
                        if v > 0.0 && ap > 0.0 {
                            parts.mono += s * v;
                            let c = cfg.lambda_mono * s;
                            for j in 0..d {
                                du[j] += c * (u[j] / a - up[j] / ap);
                                dg[k][j] -= c * MONO_DELTA * up[j] / ap;
                            }
                        }
                    }
                    for (k, rm) in r.iter().enumerate() {
                        for (a, b) in dg[k].iter_mut().zip(&du) {
                            *a += rm * b;
                        }
                    }
                }
                for k in 0..m {
                    outer_add(&mut grad.blocks[W].data[k * dd..(k + 1) * dd], &dg[k], x);
                    for (a, b) in grad.blocks[B].data[k * d..(k + 1) * d]
                        .iter_mut()
                        .zip(&dg[k])
                    {
                        *a += b;
                    }
                }
            }
        }
        parts.sparse = gen.blocks[W].l1();
        for (g, a) in grad.blocks[W].data.iter_mut().zip(&gen.blocks[W].data) {
            *g += cfg.lambda_sparse * sign(*a);
        }
        parts.total = cfg.lambda_adv * parts.adv
            + cfg.lambda_change * parts.change
            + cfg.lambda_mono * parts.mono
            + cfg.lambda_orth * parts.orth
            + cfg.lambda_sparse * parts.sparse
            + cfg.lambda_recon * parts.recon;
        (parts, grad)
    }

    fn fakes(&self, batch: &SurrealBatch) -> Vec<Vec<f64>> {
        batch
            .controls
            .iter_rows()
            .zip(batch.r.iter_rows())
            .chain(batch.controls.iter_rows().zip(batch.r2.iter_rows()))
            .map(|(x, r)| self.generate(x, r))
            .collect()
    }

    /// Unit mean `g_m(x)` over held-out controls, one per pattern.
    pub fn pattern_directions(&self) -> Result<Vec<Vec<f64>>> {
        Self::patterns(&self.gen, self.d, self.m, &self.holdout_mean)
            .into_iter()
            .map(unit)
            .collect()
    }
}

/// Squared cosines between the patterns' batch-mean absolute change profiles.
///
/// Absolute profiles cannot be made orthogonal by cancelling signs, so two
/// patterns only decouple by moving different variables. Returns the gradient
/// with respect to each profile, already scaled by `weight`.
fn orthogonality(
    all_g: &[Vec<Vec<f64>>],
    d: usize,
    m: usize,
    weight: f64,
    loss: &mut f64,
) -> Vec<Vec<f64>> {
    let n = all_g.len().max(1) as f64;
    let mut prof = vec![vec![0.0; d]; m];
    for g in all_g {
        for (p, gm) in prof.iter_mut().zip(g) {
            for (a, v) in p.iter_mut().zip(gm) {
                *a += v.abs() / n;
            }
        }
    }
    let norms: Vec<f64> = prof.iter().map(|p| crate::matrix::norm(p)).collect();
    let mut dprof = vec![vec![0.0; d]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j || norms[i] == 0.0 || norms[j] == 0.0 {
                continue;
            }
            let c = crate::matrix::dot(&prof[i], &prof[j]) / (norms[i] * norms[j]);
            *loss += c * c;
            for (ga, gb) in [(i, j), (j, i)] {
                for t in 0..d {
                    let dc = prof[gb][t] / (norms[ga] * norms[gb])
                        - c * prof[ga][t] / (norms[ga] * norms[ga]);
                    dprof[ga][t] += weight * 2.0 * c * dc;
                }
            }
        }
    }
    dprof
}

impl Differentiable for SurrealModel {
    type Batch = SurrealBatch;

    fn gen_params(&self) -> &Params {
        &self.gen
    }

    fn disc_params(&self) -> &Params {
        &self.disc
    }

    fn gen_loss(&self, gen: &Params, batch: &SurrealBatch, cfg: &TrainConfig) -> (f64, Params) {
        let (p, g) = self.gen_parts(gen, batch, cfg);
        (p.total, g)
    }

    fn disc_loss(&self, disc: &Params, batch: &SurrealBatch) -> (f64, Params) {
        let real: Vec<&[f64]> = batch.patients.iter_rows().collect();
        disc_loss(disc, &real, &self.fakes(batch))
    }
}

pub fn fit_surreal(
    controls: &Matrix,
    patients: &Matrix,
    m: usize,
    cfg: &TrainConfig,
) -> Result<(SurrealModel, TrainingCurve)> {
    fit_surreal_within(controls, patients, m, cfg, &Deadline::none())
}

pub fn fit_surreal_within(
    controls: &Matrix,
    patients: &Matrix,
    m: usize,
    cfg: &TrainConfig,
    deadline: &Deadline,
) -> Result<(SurrealModel, TrainingCurve)> {
    cfg.validate()?;
    check_data(controls, patients)?;
    if m == 0 {
        return Err(Error::Config("SurrealGAN needs at least 1 pattern".into()));
    }
    let (train, held) = split_controls(controls, cfg.holdout_frac, cfg.seed);
    let mut best: Option<(f64, SurrealModel, TrainingCurve)> = None;
    for rep in 0..cfg.n_repeats {
        let seed = rng::derive(cfg.seed, "surreal-repeat", rep as u64);
        let (mut model, curve) = train_once(&train, patients, m, cfg, seed, deadline)?;
        model.holdout_mean = held.clone();
        let centers: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                let mut r = vec![0.0; m];
                r[j] = 1.0;
                model.generate(&held, &r)
            })
            .collect();
        let score = coverage(&centers, patients);
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, model, curve));
        }
    }
    let (_, model, curve) = best.expect("at least one repeat");
    Ok((model, curve))
}

fn train_once(
    train: &Matrix,
    patients: &Matrix,
    m: usize,
    cfg: &TrainConfig,
    seed: u64,
    deadline: &Deadline,
) -> Result<(SurrealModel, TrainingCurve)> {
    let d = train.cols();
    let mut model = SurrealModel::init(d, m, cfg, &mut rng::stream(seed, "surreal-init", 0));
    if cfg.seed_offset_scale > 0.0 && patients.rows() >= m {
        let offs = seeded_offsets(patients, m, cfg.seed_offset_scale, seed);
        for (j, o) in offs.iter().enumerate() {
            model.gen.blocks[B].data[j * d..(j + 1) * d].copy_from_slice(o);
        }
    }
    let mut opt_g = Momentum::new(&model.gen, cfg.lr, cfg.momentum);
    let mut opt_d = Momentum::new(&model.disc, cfg.lr * cfg.disc_lr_scale, cfg.momentum);
    let mut batches = rng::stream(seed, "surreal-train", 0);
    let mut curve = TrainingCurve::new(&[
        "step",
        "loss_total",
        "loss_adv",
        "loss_change",
        "loss_mono",
        "loss_orth",
        "loss_sparse",
        "loss_recon",
        "loss_disc",
    ]);
    let dd = d * d;
    for step in 0..cfg.n_steps {
        deadline.check()?;
        let batch = SurrealBatch::sample(train, patients, m, cfg.batch_size, &mut batches);
        let (ld, gd) = model.disc_loss(&model.disc, &batch);
        let mut disc = model.disc.clone();
        opt_d.step(&mut disc, &gd);
        model.disc = disc;
        let (parts, gg) = model.gen_parts(&model.gen, &batch, cfg);
        if !parts.total.is_finite() || !ld.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        opt_g.step(&mut model.gen, &gg);
        project_frobenius(&mut model.gen.blocks[W].data, dd, cfg.l_bound);
        if step % cfg.log_every == 0 || step + 1 == cfg.n_steps {
            curve.rows.push(vec![
                step as f64,
                parts.total,
                parts.adv,
                parts.change,
                parts.mono,
                parts.orth,
                parts.sparse,
                parts.recon,
                ld,
            ]);
        }
    }
    if !model.gen.all_finite() || !model.disc.all_finite() {
        return Err(Error::NonFiniteLoss { step: cfg.n_steps });
    }
    Ok((model, curve))
}

/// Inverse-network R-indices clamped to `[0, 1]`, one row per patient.
pub fn r_indices(model: &SurrealModel, z: &Matrix) -> Result<Matrix> {
    if z.cols() != model.d {
        return Err(Error::Input(format!(
            "expected {} columns, got {}",
            model.d,
            z.cols()
        )));
    }
    let mut out = Matrix::zeros(z.rows(), model.m);
    for (i, row) in z.iter_rows().enumerate() {
        let r = SurrealModel::infer(&model.gen, row);
        for (o, v) in out.row_mut(i).iter_mut().zip(r) {
            *o = v.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Hard labels from the largest R-index, 1-based.
pub fn r_index_labels(r: &Matrix) -> Vec<usize> {
    r.iter_rows().map(argmax1).collect()
}
