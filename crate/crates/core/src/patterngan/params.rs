use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A named dense tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(name: &str, shape: &[usize]) -> Self {
        Block {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn normal<R: Rng>(name: &str, shape: &[usize], sd: f64, rng: &mut R) -> Self {
        let mut b = Block::zeros(name, shape);
        let dist = Normal::new(0.0, sd).expect("finite sd");
        for v in &mut b.data {
            *v = dist.sample(rng);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct EncodedBlock {
    name: String,
    shape: Vec<usize>,
    /// Little-endian f64 bytes, base64.
    data: String,
}

impl Serialize for Block {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut bytes = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        EncodedBlock {
            name: self.name.clone(),
            shape: self.shape.clone(),
            data: STANDARD.encode(bytes),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let e = EncodedBlock::deserialize(d)?;
        let bytes = STANDARD
            .decode(e.data.as_bytes())
            .map_err(D::Error::custom)?;
        let expected: usize = e.shape.iter().product();
        if bytes.len() != expected * 8 {
            return Err(D::Error::custom(format!(
                "block {} holds {} bytes, shape needs {}",
                e.name,
                bytes.len(),
                expected * 8
            )));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Block {
            name: e.name,
            shape: e.shape,
            data,
        })
    }
}

/// Ordered collection of blocks; gradients share the layout of their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub blocks: Vec<Block>,
}

impl Params {
    pub fn new(blocks: Vec<Block>) -> Self {
        Params { blocks }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block::zeros(&b.name, &b.shape))
                .collect(),
        }
    }

    pub fn index(&self, name: &str) -> usize {
        self.blocks
            .iter()
            .position(|b| b.name == name)
            .unwrap_or_else(|| panic!("no parameter block named {name}"))
    }

    pub fn get(&self, name: &str) -> &[f64] {
        &self.blocks[self.index(name)].data
    }

    pub fn get_mut(&mut self, name: &str) -> &mut [f64] {
        let i = self.index(name);
        &mut self.blocks[i].data
    }

    pub fn all_finite(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| b.data.iter().all(|v| v.is_finite()))
    }

    /// Check names and shapes against a template.
    pub fn same_layout(&self, other: &Params) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }
}

/// SGD with heavy-ball momentum.
#[derive(Debug, Clone)]
pub struct Momentum {
    velocity: Params,
    lr: f64,
    beta: f64,
}

impl Momentum {
    pub fn new(like: &Params, lr: f64, beta: f64) -> Self {
        Momentum {
            velocity: like.zeros_like(),
            lr,
            beta,
        }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        for ((p, g), v) in params
            .blocks
            .iter_mut()
            .zip(&grads.blocks)
            .zip(&mut self.velocity.blocks)
        {
            for ((pv, gv), vv) in p.data.iter_mut().zip(&g.data).zip(&mut v.data) {
                *vv = self.beta * *vv - self.lr * gv;
                *pv += *vv;
            }
        }
    }
}

/// Rescale each `[d, d]` slice of a `[n, d, d]` tensor onto the Frobenius ball.
pub fn project_frobenius(data: &mut [f64], slice_len: usize, radius: f64) {
    for chunk in data.chunks_mut(slice_len) {
        let norm = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            let s = radius / norm;
            for v in chunk {
                *v *= s;
            }
        }
    }
}

pub fn frobenius_norms(data: &[f64], slice_len: usize) -> Vec<f64> {
    data.chunks(slice_len)
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn block_json_round_trip_is_bit_exact() {
        let b = Block::normal("W", &[3, 4], 1.0, &mut rng::stream(1, "t", 0));
        let mut odd = b.clone();
        odd.data[0] = -0.0;
        odd.data[1] = f64::MIN_POSITIVE;
        let text = serde_json::to_string(&odd).unwrap();
        assert!(text.contains("\"shape\":[3,4]"));
        let back: Block = serde_json::from_str(&text).unwrap();
        for (a, b) in back.data.iter().zip(&odd.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let text = r#"{"name":"x","shape":[2],"data":"AAAAAAAAAAA="}"#;
        assert!(serde_json::from_str::<Block>(text).is_err());
    }

    #[test]
    fn projection_caps_norm() {
        let mut d = vec![3.0, 4.0, 0.3, 0.4];
        project_frobenius(&mut d, 2, 1.0);
        let n = frobenius_norms(&d, 2);
        assert!((n[0] - 1.0).abs() < 1e-12);
        assert!((n[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = Params::new(vec![Block::zeros("a", &[1])]);
        let mut g = p.zeros_like();
        g.blocks[0].data[0] = 1.0;
        let mut opt = Momentum::new(&p, 0.1, 0.9);
        opt.step(&mut p, &g);
        opt.step(&mut p, &g);
        assert!((p.blocks[0].data[0] + 0.1 + 0.19).abs() < 1e-12);
    }
}
