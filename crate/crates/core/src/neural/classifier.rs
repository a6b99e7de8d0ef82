use rand::Rng;

use super::tensor::{softmax, Tensor};
use crate::error::{Error, Result};

pub const N_CLASSES: usize = 3;

/// Softmax layer over the three argument component classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub input_dim: usize,
    /// `[input_dim, 3]`
    pub w: Tensor,
    /// `[3]`
    pub b: Tensor,
}

impl Classifier {
    pub fn new(input_dim: usize, rng: &mut impl Rng) -> Classifier {
        Classifier {
            input_dim,
            w: Tensor::xavier(&[input_dim, N_CLASSES], input_dim, N_CLASSES, rng),
            b: Tensor::zeros(&[N_CLASSES]),
        }
    }

    pub fn zeros_like(&self) -> Classifier {
        Classifier {
            input_dim: self.input_dim,
            w: Tensor::zeros(&self.w.shape),
            b: Tensor::zeros(&self.b.shape),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Result<[f64; N_CLASSES]> {
        if x.len() != self.input_dim {
            return Err(Error::dim("classifier input", self.input_dim, x.len()));
        }
        let mut z = [self.b.data[0], self.b.data[1], self.b.data[2]];
        for (row, &xi) in self.w.data.chunks_exact(N_CLASSES).zip(x) {
            if xi != 0.0 {
                z[0] += xi * row[0];
                z[1] += xi * row[1];
                z[2] += xi * row[2];
            }
        }
        Ok(z)
    }

    pub fn classify(&self, x: &[f64]) -> Result<[f64; N_CLASSES]> {
        let p = softmax(&self.logits(x)?);
        Ok([p[0], p[1], p[2]])
    }

    /// Accumulates gradients for `d_logits` and returns `d_x`.
    pub fn backward(&self, x: &[f64], d_logits: &[f64; N_CLASSES], grads: &mut Classifier) -> Vec<f64> {
        for (k, d) in d_logits.iter().enumerate() {
            grads.b.data[k] += d;
        }
        let mut dx = Vec::with_capacity(x.len());
        for ((row, grow), &xi) in self
            .w
            .data
            .chunks_exact(N_CLASSES)
            .zip(grads.w.data.chunks_exact_mut(N_CLASSES))
            .zip(x)
        {
            if xi != 0.0 {
                grow[0] += xi * d_logits[0];
                grow[1] += xi * d_logits[1];
                grow[2] += xi * d_logits[2];
            }
            dx.push(row[0] * d_logits[0] + row[1] * d_logits[1] + row[2] * d_logits[2]);
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn clf(n: usize) -> Classifier {
        Classifier::new(n, &mut ChaCha8Rng::seed_from_u64(2))
    }

    #[test]
    fn zero_params_are_uniform() {
        let mut c = clf(4);
        c.w.fill(0.0);
        let p = c.classify(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p, [1.0 / 3.0; 3]);
    }

    #[test]
    fn closed_form_softmax() {
        let mut c = clf(1);
        c.w.fill(0.0);
        c.b.data = vec![2f64.ln(), 0.0, 0.0];
        let p = c.classify(&[0.0]).unwrap();
        for (a, e) in p.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance_and_normalization() {
        let c = clf(3);
        let x = [0.3, -2.0, 1.5];
        let p = c.classify(&x).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut shifted = c.clone();
        shifted.b.data.iter_mut().for_each(|b| *b += 17.5);
        let q = shifted.classify(&x).unwrap();
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(c.classify(&[1.0]).is_err());
    }
}
