//! One-hidden-layer discriminator and the small dense helpers shared by both models.

use rand::Rng;

use super::params::{Block, Params};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `out += M v` for row-major `M` of shape `[rows, v.len()]`.
pub(crate) fn matvec_add(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(n)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Mᵀ u`.
pub(crate) fn matvec_t_add(m: &[f64], u: &[f64], out: &mut [f64]) {
    let n = out.len();
    for (uv, row) in u.iter().zip(m.chunks_exact(n)) {
        if *uv != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += uv * a;
            }
        }
    }
}

/// `g += u vᵀ`.
pub(crate) fn outer_add(g: &mut [f64], u: &[f64], v: &[f64]) {
    let n = v.len();
    for (uv, row) in u.iter().zip(g.chunks_exact_mut(n)) {
        if *uv != 0.0 {
            for (o, b) in row.iter_mut().zip(v) {
                *o += uv * b;
            }
        }
    }
}

pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn init_disc<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> Params {
    Params::new(vec![
        Block::normal("W1", &[hidden, d], 1.0 / (d as f64).sqrt(), rng),
        Block::zeros("b1", &[hidden]),
        Block::normal("w2", &[hidden], 1.0 / (hidden as f64).sqrt(), rng),
        Block::zeros("b2", &[1]),
    ])
}

pub(crate) struct DiscPass {
    pub h: Vec<f64>,
    pub out: f64,
}

pub(crate) fn disc_forward(disc: &Params, y: &[f64]) -> DiscPass {
    let w1 = &disc.blocks[0].data;
    let b1 = &disc.blocks[1].data;
    let w2 = &disc.blocks[2].data;
    let b2 = disc.blocks[3].data[0];
    let mut h = b1.clone();
    matvec_add(w1, y, &mut h);
    for v in &mut h {
        *v = v.tanh();
    }
    let o = b2 + h.iter().zip(w2).map(|(a, b)| a * b).sum::<f64>();
    DiscPass { h, out: sigmoid(o) }
}

/// Backpropagate `dL/dout` into parameter gradients and/or the input.
pub(crate) fn disc_backward(
    disc: &Params,
    y: &[f64],
    pass: &DiscPass,
    dout: f64,
    grad: Option<&mut Params>,
    dy: Option<&mut [f64]>,
) {
    let w1 = &disc.blocks[0].data;
    let w2 = &disc.blocks[2].data;
    let d_o = dout * pass.out * (1.0 - pass.out);
    let da: Vec<f64> = pass
        .h
        .iter()
        .zip(w2)
        .map(|(h, w)| d_o * w * (1.0 - h * h))
        .collect();
    if let Some(g) = grad {
        outer_add(&mut g.blocks[0].data, &da, y);
        for (gb, a) in g.blocks[1].data.iter_mut().zip(&da) {
            *gb += a;
        }
        for (gw, h) in g.blocks[2].data.iter_mut().zip(&pass.h) {
            *gw += d_o * h;
        }
        g.blocks[3].data[0] += d_o;
    }
    if let Some(dy) = dy {
        matvec_t_add(w1, &da, dy);
    }
}

/// Least-squares discriminator loss and its gradient: real toward 1, fake toward 0.
pub(crate) fn disc_loss(disc: &Params, real: &[&[f64]], fake: &[Vec<f64>]) -> (f64, Params) {
    let mut grad = disc.zeros_like();
    let mut loss = 0.0;
    if !real.is_empty() {
        let s = 1.0 / real.len() as f64;
        for y in real {
            let p = disc_forward(disc, y);
            loss += s * (p.out - 1.0).powi(2);
            disc_backward(disc, y, &p, 2.0 * s * (p.out - 1.0), Some(&mut grad), None);
        }
    }
    if !fake.is_empty() {
        let s = 1.0 / fake.len() as f64;
        for y in fake {
            let p = disc_forward(disc, y);
            loss += s * p.out * p.out;
            disc_backward(disc, y, &p, 2.0 * s * p.out, Some(&mut grad), None);
        }
    }
    (loss, grad)
}
