use serde::{Deserialize, Serialize};

use super::Hyperplane;
use crate::{Error, Matrix, Result};

/// Intersection of `K` half-spaces; face `k` separates controls from subtype `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    pub faces: Vec<Hyperplane>,
}

impl Polytope {
    pub fn k(&self) -> usize {
        self.faces.len()
    }

    /// Largest face score and its 0-based face index (ties to the smallest index).
    pub fn best_face(&self, x: &[f64]) -> (usize, f64) {
        let mut bi = 0;
        let mut bs = f64::NEG_INFINITY;
        for (k, f) in self.faces.iter().enumerate() {
            let s = f.score(x);
            if s > bs {
                bs = s;
                bi = k;
            }
        }
        (bi, bs)
    }
}

/// Label each row with `1 + argmax_k (w_k . x + b_k)`.
pub fn polytope_assign(p: &Polytope, x: &Matrix) -> Result<Vec<usize>> {
    if p.faces.is_empty() {
        return Err(Error::Input("polytope has no faces".into()));
    }
    if let Some(f) = p.faces.iter().find(|f| f.w.len() != x.cols()) {
        return Err(Error::Input(format!(
            "face dimension {} differs from data dimension {}",
            f.w.len(),
            x.cols()
        )));
    }
    Ok(x.iter_rows().map(|r| p.best_face(r).0 + 1).collect())
}
