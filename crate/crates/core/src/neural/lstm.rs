//! Single-layer LSTM that folds a variable-length sequence into its final
//! hidden state.

use rand::Rng;

use super::tensor::{axpy, dot, sigmoid, Tensor};
use crate::error::{Error, Result};

/// Hidden size of the speaker-context aggregator.
pub const LSTM_HIDDEN_DIM: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `[4H, D + H]`, gate blocks in order input, forget, output, candidate.
    pub w: Tensor,
    /// `[4H]`
    pub b: Tensor,
    /// Returned for empty sequences. `[H]`, starts at zero.
    pub empty: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Per step: concatenated `[x_t; h_{t-1}]`.
    xh: Vec<Vec<f64>>,
    /// Per step: activated gates `[i, f, o, g]`.
    gates: Vec<Vec<f64>>,
    /// Cell states `c_0..c_T` (c_0 = 0).
    cells: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Lstm {
        let h = hidden_dim;
        Lstm {
            input_dim,
            hidden_dim,
            w: Tensor::xavier(&[4 * h, input_dim + h], input_dim + h, h, rng),
            b: Tensor::zeros(&[4 * h]),
            empty: Tensor::zeros(&[h]),
        }
    }

    pub fn zeros_like(&self) -> Lstm {
        Lstm {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            w: Tensor::zeros(&self.w.shape),
            b: Tensor::zeros(&self.b.shape),
            empty: Tensor::zeros(&self.empty.shape),
        }
    }

    pub fn forward(&self, seq: &[&[f64]]) -> Result<(Vec<f64>, LstmCache)> {
        let h_dim = self.hidden_dim;
        let mut cache = LstmCache {
            xh: Vec::with_capacity(seq.len()),
            gates: Vec::with_capacity(seq.len()),
            cells: vec![vec![0.0; h_dim]],
        };
        if seq.is_empty() {
            return Ok((self.empty.data.clone(), cache));
        }
        let mut h = vec![0.0; h_dim];
        for x in seq {
            if x.len() != self.input_dim {
                return Err(Error::dim("LSTM input", self.input_dim, x.len()));
            }
            let mut xh = Vec::with_capacity(self.input_dim + h_dim);
            xh.extend_from_slice(x);
            xh.extend_from_slice(&h);
            let mut gates = vec![0.0; 4 * h_dim];
            for (r, g) in gates.iter_mut().enumerate() {
                let z = self.b.data[r] + dot(self.w.row(r), &xh);
                *g = if r < 3 * h_dim { sigmoid(z) } else { z.tanh() };
            }
            let c_prev = cache.cells.last().unwrap();
            let mut c = vec![0.0; h_dim];
            for j in 0..h_dim {
                let (i, f, o, g) = (gates[j], gates[h_dim + j], gates[2 * h_dim + j], gates[3 * h_dim + j]);
                c[j] = f * c_prev[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            cache.xh.push(xh);
            cache.gates.push(gates);
            cache.cells.push(c);
        }
        Ok((h, cache))
    }

    /// Backpropagation through time. Accumulates into `grads` and returns the
    /// gradient for each input step.
    pub fn backward(&self, cache: &LstmCache, d_h_final: &[f64], grads: &mut Lstm) -> Vec<Vec<f64>> {
        let h_dim = self.hidden_dim;
        let steps = cache.gates.len();
        if steps == 0 {
            axpy(1.0, d_h_final, &mut grads.empty.data);
            return Vec::new();
        }
        let mut d_inputs = vec![Vec::new(); steps];
        let mut d_h = d_h_final.to_vec();
        let mut d_c = vec![0.0; h_dim];
        let mut d_z = vec![0.0; 4 * h_dim];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t];
            let c = &cache.cells[t + 1];
            let c_prev = &cache.cells[t];
            for j in 0..h_dim {
                let (i, f, o, g) = (gates[j], gates[h_dim + j], gates[2 * h_dim + j], gates[3 * h_dim + j]);
                let tc = c[j].tanh();
                let dc = d_c[j] + d_h[j] * o * (1.0 - tc * tc);
                d_z[j] = dc * g * i * (1.0 - i);
                d_z[h_dim + j] = dc * c_prev[j] * f * (1.0 - f);
                d_z[2 * h_dim + j] = d_h[j] * tc * o * (1.0 - o);
                d_z[3 * h_dim + j] = dc * i * (1.0 - g * g);
                d_c[j] = dc * f;
            }
            let xh = &cache.xh[t];
            let mut d_xh = vec![0.0; xh.len()];
            for (r, &dz) in d_z.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                axpy(dz, xh, grads.w.row_mut(r));
                grads.b.data[r] += dz;
                axpy(dz, self.w.row(r), &mut d_xh);
            }
            d_h.copy_from_slice(&d_xh[self.input_dim..]);
            d_xh.truncate(self.input_dim);
            d_inputs[t] = d_xh;
        }
        d_inputs
    }
}
