use super::{Params, TrainConfig};

/// Losses whose parameter gradients are computed analytically.
pub trait Differentiable {
    type Batch;
    /// Generator-side parameters: mappings plus the inverse network.
    fn gen_params(&self) -> &Params;
    fn disc_params(&self) -> &Params;
    /// Total generator loss and its gradient, evaluated at `gen`.
    fn gen_loss(&self, gen: &Params, batch: &Self::Batch, cfg: &TrainConfig) -> (f64, Params);
    /// Discriminator loss and its gradient, evaluated at `disc`.
    fn disc_loss(&self, disc: &Params, batch: &Self::Batch) -> (f64, Params);
}

/// Entries checked per block; larger blocks are visited at an even stride.
const MAX_ENTRIES_PER_BLOCK: usize = 4000;

/// Largest relative error between analytic and central-difference gradients.
///
/// Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<M: Differentiable>(
    model: &M,
    batch: &M::Batch,
    cfg: &TrainConfig,
    eps: f64,
) -> f64 {
    assert!(eps > 0.0, "eps must be positive");
    let (_, g_gen) = model.gen_loss(model.gen_params(), batch, cfg);
    let e_gen = compare(model.gen_params(), &g_gen, eps, |p| {
        model.gen_loss(p, batch, cfg).0
    });
    let (_, g_disc) = model.disc_loss(model.disc_params(), batch);
    let e_disc = compare(model.disc_params(), &g_disc, eps, |p| {
        model.disc_loss(p, batch).0
    });
    e_gen.max(e_disc)
}

fn compare(params: &Params, analytic: &Params, eps: f64, f: impl Fn(&Params) -> f64) -> f64 {
    let mut p = params.clone();
    let mut worst: f64 = 0.0;
    for b in 0..p.blocks.len() {
        let len = p.blocks[b].len();
        let stride = len.div_ceil(MAX_ENTRIES_PER_BLOCK).max(1);
        for i in (0..len).step_by(stride) {
            let orig = p.blocks[b].data[i];
            p.blocks[b].data[i] = orig + eps;
            let up = f(&p);
            p.blocks[b].data[i] = orig - eps;
            let down = f(&p);
            p.blocks[b].data[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.blocks[b].data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
