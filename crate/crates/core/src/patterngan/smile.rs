use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nets::{
    disc_backward, disc_forward, disc_loss, init_disc, matvec_add, matvec_t_add, outer_add, sign,
};
use super::params::{frobenius_norms, project_frobenius, Block, Momentum, Params};
use super::{
    argmax1, check_data, coverage, seeded_offsets, split_controls, unit, Differentiable,
    TrainConfig, TrainingCurve,
};
use crate::{rng, Deadline, Error, Matrix, Result};

/// K affine maps `f_k(x) = x + A_k x + c_k`, a discriminator and a softmax cluster head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileModel {
    pub d: usize,
    pub k: usize,
    /// Blocks `A` `[k, d, d]`, `c` `[k, d]`, `Wq` `[k, d]`, `bq` `[k]`.
    pub gen: Params,
    pub disc: Params,
    pub l_bound: f64,
    /// Mean of the controls held out from training.
    pub holdout_mean: Vec<f64>,
}

/// Controls with their sampled mapping index (0-based) and real patient rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SmileBatch {
    pub controls: Matrix,
    pub ks: Vec<usize>,
    pub patients: Matrix,
}

impl SmileBatch {
    pub fn sample<R: Rng>(
        controls: &Matrix,
        patients: &Matrix,
        k: usize,
        size: usize,
        rng: &mut R,
    ) -> Self {
        let ci: Vec<usize> = (0..size)
            .map(|_| rng.random_range(0..controls.rows()))
            .collect();
        let ks: Vec<usize> = (0..size).map(|_| rng.random_range(0..k)).collect();
        let pi: Vec<usize> = (0..size)
            .map(|_| rng.random_range(0..patients.rows()))
            .collect();
        SmileBatch {
            controls: controls.select_rows(&ci),
            ks,
            patients: patients.select_rows(&pi),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GenParts {
    total: f64,
    adv: f64,
    change: f64,
    cluster: f64,
    sparse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileAssignment {
    /// Row-wise cluster probabilities.
    pub probs: Matrix,
    /// 1-based argmax labels.
    pub labels: Vec<usize>,
}

impl SmileModel {
    pub fn init<R: Rng>(d: usize, k: usize, cfg: &TrainConfig, rng: &mut R) -> Self {
        // offsets start small but away from zero so the change loss is differentiable
        let mut c = Block::zeros("c", &[k, d]);
        for v in &mut c.data {
            let mag: f64 = rng.random_range(0.05..0.15);
            *v = if rng.random::<bool>() { mag } else { -mag };
        }
        let gen = Params::new(vec![
            Block::zeros("A", &[k, d, d]),
            c,
            Block::normal("Wq", &[k, d], 0.1 / (d as f64).sqrt(), rng),
            Block::zeros("bq", &[k]),
        ]);
        SmileModel {
            d,
            k,
            gen,
            disc: init_disc(d, cfg.hidden, rng),
            l_bound: cfg.l_bound,
            holdout_mean: vec![0.0; d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shapes_ok = self.gen.blocks.len() == 4
            && self.gen.blocks[0].shape == [self.k, self.d, self.d]
            && self.gen.blocks[1].shape == [self.k, self.d]
            && self.gen.blocks[2].shape == [self.k, self.d]
            && self.gen.blocks[3].shape == [self.k]
            && self.disc.blocks.len() == 4
            && self.disc.blocks[0].shape.get(1) == Some(&self.d)
            && self.holdout_mean.len() == self.d;
        if !shapes_ok {
            return Err(Error::Input(
                "parameter blocks do not match the model dimensions".into(),
            ));
        }
        if !self.gen.all_finite() || !self.disc.all_finite() {
            return Err(Error::Input("model parameters are not finite".into()));
        }
        let dd = self.d * self.d;
        if frobenius_norms(&self.gen.blocks[0].data, dd)
            .iter()
            .any(|n| *n > self.l_bound * (1.0 + 1e-9))
        {
            return Err(Error::Input(
                "mapping matrix exceeds the Lipschitz bound".into(),
            ));
        }
        Ok(())
    }

    /// `f_k(x) - x` evaluated with explicit generator parameters.
    fn delta(gen: &Params, d: usize, k: usize, x: &[f64]) -> Vec<f64> {
        let dd = d * d;
        let mut u = gen.blocks[1].data[k * d..(k + 1) * d].to_vec();
        matvec_add(&gen.blocks[0].data[k * dd..(k + 1) * dd], x, &mut u);
        u
    }

    pub fn map(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut u = Self::delta(&self.gen, self.d, k, x);
        for (a, b) in u.iter_mut().zip(x) {
            *a += b;
        }
        u
    }

    fn softmax(gen: &Params, k: usize, y: &[f64]) -> Vec<f64> {
        let mut logits = gen.blocks[3].data.clone();
        matvec_add(&gen.blocks[2].data, y, &mut logits);
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for l in &mut logits {
            *l = (*l - m).exp();
            s += *l;
        }
        debug_assert_eq!(logits.len(), k);
        logits.iter().map(|v| v / s).collect()
    }

    fn gen_parts(&self, gen: &Params, batch: &SmileBatch, cfg: &TrainConfig) -> (GenParts, Params) {
        let (d, dd) = (self.d, self.d * self.d);
        let mut grad = gen.zeros_like();
        let mut parts = GenParts::default();
        let n = batch.controls.rows();
        if n > 0 {
            let s = 1.0 / n as f64;
            for (x, &k) in batch.controls.iter_rows().zip(&batch.ks) {
                let u = Self::delta(gen, d, k, x);
                let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + b).collect();
                let mut dy = vec![0.0; d];

                let pass = disc_forward(&self.disc, &y);
                parts.adv += s * (pass.out - 1.0).powi(2);
                let dout = cfg.lambda_adv * 2.0 * s * (pass.out - 1.0);
                disc_backward(&self.disc, &y, &pass, dout, None, Some(&mut dy));

                let p = Self::softmax(gen, self.k, &y);
                parts.cluster -= s * p[k].max(f64::MIN_POSITIVE).ln();
                let dl: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(j, pj)| cfg.lambda_cluster * s * (pj - if j == k { 1.0 } else { 0.0 }))
                    .collect();
                outer_add(&mut grad.blocks[2].data, &dl, &y);
                for (g, v) in grad.blocks[3].data.iter_mut().zip(&dl) {
                    *g += v;
                }
                matvec_t_add(&gen.blocks[2].data, &dl, &mut dy);

                parts.change += s * u.iter().map(|v| v.abs()).sum::<f64>();
                for (g, v) in dy.iter_mut().zip(&u) {
                    *g += cfg.lambda_change * s * sign(*v);
                }
                outer_add(&mut grad.blocks[0].data[k * dd..(k + 1) * dd], &dy, x);
                for (g, v) in grad.blocks[1].data[k * d..(k + 1) * d].iter_mut().zip(&dy) {
                    *g += v;
                }
            }
        }
        parts.sparse = gen.blocks[0].l1();
        for (g, a) in grad.blocks[0].data.iter_mut().zip(&gen.blocks[0].data) {
            *g += cfg.lambda_sparse * sign(*a);
        }
        parts.total = cfg.lambda_adv * parts.adv
            + cfg.lambda_change * parts.change
            + cfg.lambda_cluster * parts.cluster
            + cfg.lambda_sparse * parts.sparse;
        (parts, grad)
    }

    fn fakes(&self, batch: &SmileBatch) -> Vec<Vec<f64>> {
        batch
            .controls
            .iter_rows()
            .zip(&batch.ks)
            .map(|(x, &k)| self.map(k, x))
            .collect()
    }

    /// Unit mean displacement `f_k(x) - x` over held-out controls, one per mapping.
    pub fn pattern_directions(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.k)
            .map(|k| unit(Self::delta(&self.gen, self.d, k, &self.holdout_mean)))
            .collect()
    }
}

impl Differentiable for SmileModel {
    type Batch = SmileBatch;

    fn gen_params(&self) -> &Params {
        &self.gen
    }

    fn disc_params(&self) -> &Params {
        &self.disc
    }

    fn gen_loss(&self, gen: &Params, batch: &SmileBatch, cfg: &TrainConfig) -> (f64, Params) {
        let (p, g) = self.gen_parts(gen, batch, cfg);
        (p.total, g)
    }

    fn disc_loss(&self, disc: &Params, batch: &SmileBatch) -> (f64, Params) {
        let real: Vec<&[f64]> = batch.patients.iter_rows().collect();
        disc_loss(disc, &real, &self.fakes(batch))
    }
}

pub fn fit_smile(
    controls: &Matrix,
    patients: &Matrix,
    k: usize,
    cfg: &TrainConfig,
) -> Result<(SmileModel, TrainingCurve)> {
    fit_smile_within(controls, patients, k, cfg, &Deadline::none())
}

pub fn fit_smile_within(
    controls: &Matrix,
    patients: &Matrix,
    k: usize,
    cfg: &TrainConfig,
    deadline: &Deadline,
) -> Result<(SmileModel, TrainingCurve)> {
    cfg.validate()?;
    check_data(controls, patients)?;
    if k < 2 {
        return Err(Error::Config("SmileGAN needs at least 2 clusters".into()));
    }
    let (train, held) = split_controls(controls, cfg.holdout_frac, cfg.seed);
    let mut best: Option<(f64, SmileModel, TrainingCurve)> = None;
    for rep in 0..cfg.n_repeats {
        let seed = rng::derive(cfg.seed, "smile-repeat", rep as u64);
        let (mut model, curve) = train_once(&train, patients, k, cfg, seed, deadline)?;
        model.holdout_mean = held.clone();
        let centers: Vec<Vec<f64>> = (0..k).map(|j| model.map(j, &held)).collect();
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
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
    deadline: &Deadline,
) -> Result<(SmileModel, TrainingCurve)> {
    let d = train.cols();
    let mut model = SmileModel::init(d, k, cfg, &mut rng::stream(seed, "smile-init", 0));
    if cfg.seed_offset_scale > 0.0 && patients.rows() >= k {
        let offs = seeded_offsets(patients, k, cfg.seed_offset_scale, seed);
        for (j, o) in offs.iter().enumerate() {
            model.gen.blocks[1].data[j * d..(j + 1) * d].copy_from_slice(o);
        }
    }
    let mut opt_g = Momentum::new(&model.gen, cfg.lr, cfg.momentum);
    let mut opt_d = Momentum::new(&model.disc, cfg.lr * cfg.disc_lr_scale, cfg.momentum);
    let mut batches = rng::stream(seed, "smile-train", 0);
    let mut curve = TrainingCurve::new(&[
        "step",
        "loss_total",
        "loss_adv",
        "loss_change",
        "loss_cluster",
        "loss_sparse",
        "loss_disc",
    ]);
    let dd = d * d;
    for step in 0..cfg.n_steps {
        deadline.check()?;
        let batch = SmileBatch::sample(train, patients, k, cfg.batch_size, &mut batches);
        let (ld, gd) = model.disc_loss(&model.disc, &batch);
        let mut disc = model.disc.clone();
        opt_d.step(&mut disc, &gd);
        model.disc = disc;
        let (parts, gg) = model.gen_parts(&model.gen, &batch, cfg);
        if !parts.total.is_finite() || !ld.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        opt_g.step(&mut model.gen, &gg);
        project_frobenius(&mut model.gen.blocks[0].data, dd, cfg.l_bound);
        project_frobenius(&mut model.gen.blocks[2].data, d, cfg.l_bound);
        if step % cfg.log_every == 0 || step + 1 == cfg.n_steps {
            curve.rows.push(vec![
                step as f64,
                parts.total,
                parts.adv,
                parts.change,
                parts.cluster,
                parts.sparse,
                ld,
            ]);
        }
    }
    if !model.gen.all_finite() || !model.disc.all_finite() {
        return Err(Error::NonFiniteLoss { step: cfg.n_steps });
    }
    Ok((model, curve))
}

pub fn smile_assign(model: &SmileModel, z: &Matrix) -> Result<SmileAssignment> {
    if z.cols() != model.d {
        return Err(Error::Input(format!(
            "expected {} columns, got {}",
            model.d,
            z.cols()
        )));
    }
    let mut probs = Matrix::zeros(z.rows(), model.k);
    let mut labels = Vec::with_capacity(z.rows());
    for (i, row) in z.iter_rows().enumerate() {
        let p = SmileModel::softmax(&model.gen, model.k, row);
        labels.push(argmax1(&p));
        probs.row_mut(i).copy_from_slice(&p);
    }
    Ok(SmileAssignment { probs, labels })
}
