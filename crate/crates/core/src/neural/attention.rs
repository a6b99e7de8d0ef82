//! Bilinear ("general") attention: `score_i = q^T W k_i`, softmax over the
//! unmasked keys, output is the weighted sum of keys.

use rand::Rng;

use super::tensor::{axpy, dot, softmax, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub query_dim: usize,
    pub key_dim: usize,
    /// `[query_dim, key_dim]`
    pub w: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub weights: Vec<f64>,
    /// `W^T q`
    projected: Vec<f64>,
}

impl Attention {
    pub fn new(query_dim: usize, key_dim: usize, rng: &mut impl Rng) -> Attention {
        Attention {
            query_dim,
            key_dim,
            w: Tensor::xavier(&[query_dim, key_dim], query_dim, key_dim, rng),
        }
    }

    pub fn zeros_like(&self) -> Attention {
        Attention {
            query_dim: self.query_dim,
            key_dim: self.key_dim,
            w: Tensor::zeros(&self.w.shape),
        }
    }

    fn project(&self, query: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.key_dim];
        for (r, &q) in query.iter().enumerate() {
            if q != 0.0 {
                axpy(q, self.w.row(r), &mut u);
            }
        }
        u
    }

    /// `mask[i] == true` marks key `i` as padding.
    pub fn forward(&self, query: &[f64], keys: &[&[f64]], mask: &[bool]) -> Result<(Vec<f64>, AttentionCache)> {
        if query.len() != self.query_dim {
            return Err(Error::dim("attention query", self.query_dim, query.len()));
        }
        if mask.len() != keys.len() {
            return Err(Error::dim("attention mask", keys.len(), mask.len()));
        }
        if mask.iter().all(|&m| m) {
            return Err(Error::Data("attention over keys that are all masked".into()));
        }
        let projected = self.project(query);
        let mut scores = Vec::with_capacity(keys.len());
        for (k, &masked) in keys.iter().zip(mask) {
            if k.len() != self.key_dim {
                return Err(Error::dim("attention key", self.key_dim, k.len()));
            }
            scores.push(if masked { f64::NEG_INFINITY } else { dot(&projected, k) });
        }
        let weights = softmax(&scores);
        let mut out = vec![0.0; self.key_dim];
        for (k, &a) in keys.iter().zip(&weights) {
            if a != 0.0 {
                axpy(a, k, &mut out);
            }
        }
        Ok((out, AttentionCache { weights, projected }))
    }

    /// Returns `(d_query, d_keys)` and accumulates `dW` into `grads`.
    pub fn backward(
        &self,
        query: &[f64],
        keys: &[&[f64]],
        cache: &AttentionCache,
        d_out: &[f64],
        grads: &mut Attention,
    ) -> (Vec<f64>, Vec<Vec<f64>>) {
        let a = &cache.weights;
        let d_a: Vec<f64> = keys.iter().map(|k| dot(d_out, k)).collect();
        let mean: f64 = a.iter().zip(&d_a).map(|(x, y)| x * y).sum();
        let d_s: Vec<f64> = a.iter().zip(&d_a).map(|(&ai, &dai)| ai * (dai - mean)).collect();

        // Σ d_s_i k_i feeds both dW = q ⊗ m and d_q = W m.
        let mut m = vec![0.0; self.key_dim];
        let mut d_keys = Vec::with_capacity(keys.len());
        for ((k, &ai), &dsi) in keys.iter().zip(a).zip(&d_s) {
            let mut dk = vec![0.0; self.key_dim];
            if ai != 0.0 {
                axpy(ai, d_out, &mut dk);
            }
            if dsi != 0.0 {
                axpy(dsi, &cache.projected, &mut dk);
                axpy(dsi, k, &mut m);
            }
            d_keys.push(dk);
        }
        let mut d_query = vec![0.0; self.query_dim];
        for (r, (&q, dq)) in query.iter().zip(d_query.iter_mut()).enumerate() {
            if q != 0.0 {
                axpy(q, &m, grads.w.row_mut(r));
            }
            *dq = dot(self.w.row(r), &m);
        }
        (d_query, d_keys)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn att(q: usize, k: usize) -> Attention {
        Attention::new(q, k, &mut ChaCha8Rng::seed_from_u64(5))
    }

    #[test]
    fn single_key_is_identity() {
        let a = att(2, 3);
        let v = [0.3, -4.0, 1.25];
        let (out, cache) = a.forward(&[1.0, 2.0], &[&v], &[false]).unwrap();
        assert_eq!(out, v);
        assert_eq!(cache.weights, [1.0]);
    }

    #[test]
    fn masked_keys_get_zero_weight() {
        let a = att(2, 2);
        let keys: [&[f64]; 3] = [&[1.0, 0.0], &[5.0, 5.0], &[0.0, 1.0]];
        let (_, cache) = a.forward(&[0.4, 0.1], &keys, &[false, true, false]).unwrap();
        assert_eq!(cache.weights[1], 0.0);
        assert!((cache.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.forward(&[0.4, 0.1], &keys, &[true, true, true]).is_err());
    }

    /// Scores, softmax and the weighted sum computed by hand.
    #[test]
    fn three_keys_hand_oracle() {
        let mut a = att(2, 2);
        a.w.data = vec![1.0, 0.5, -0.25, 2.0];
        let q = [0.5, -1.0];
        let keys: [&[f64]; 3] = [&[1.0, 2.0], &[-1.0, 0.5], &[0.25, 0.25]];
        // W^T q = [1*0.5 + -0.25*-1, 0.5*0.5 + 2*-1] = [0.75, -1.75]
        let s = [0.75 - 3.5, -0.75 - 0.875, 0.1875 - 0.4375];
        let e: Vec<f64> = s.iter().map(|x: &f64| x.exp()).collect();
        let z: f64 = e.iter().sum();
        let w: Vec<f64> = e.iter().map(|x| x / z).collect();
        let expected = [
            w[0] * 1.0 + w[1] * -1.0 + w[2] * 0.25,
            w[0] * 2.0 + w[1] * 0.5 + w[2] * 0.25,
        ];
        let (out, _) = a.forward(&q, &keys, &[false; 3]).unwrap();
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12);
        }
    }
}
