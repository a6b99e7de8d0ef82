//! Convolutional ADU encoder: one bank of filters per width, ReLU, then 1-max
//! pooling over positions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvConfig {
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub input_dim: usize,
}

impl ConvConfig {
    pub fn output_dim(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }

    pub fn max_width(&self) -> usize {
        self.filter_widths.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.filter_widths.is_empty() || self.filter_widths.contains(&0) {
            return Err(Error::Config("filter widths must be a non-empty list of positive integers".into()));
        }
        if self.filters_per_width == 0 || self.input_dim == 0 {
            return Err(Error::Config("filters_per_width and input_dim must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvEncoder {
    pub config: ConvConfig,
    /// Per width: `[filters, width * input_dim]`.
    pub weights: Vec<Tensor>,
    /// Per width: `[filters]`.
    pub biases: Vec<Tensor>,
}

/// Winning position per output unit; `None` when the unit's ReLU was inactive.
#[derive(Debug, Clone)]
pub struct ConvCache {
    pub winners: Vec<Option<usize>>,
}

impl ConvEncoder {
    pub fn new(config: ConvConfig, rng: &mut impl Rng) -> Result<ConvEncoder> {
        config.validate()?;
        let f = config.filters_per_width;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for &w in &config.filter_widths {
            let fan_in = w * config.input_dim;
            weights.push(Tensor::xavier(&[f, fan_in], fan_in, f, rng));
            biases.push(Tensor::zeros(&[f]));
        }
        Ok(ConvEncoder {
            config,
            weights,
            biases,
        })
    }

    pub fn zeros_like(&self) -> ConvEncoder {
        ConvEncoder {
            config: self.config.clone(),
            weights: self.weights.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
            biases: self.biases.iter().map(|t| Tensor::zeros(&t.shape)).collect(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    /// Row-major `n x input_dim` token matrix, zero-padded at the end up to
    /// the widest filter.
    fn padded<'a>(&self, tokens: &'a [f64]) -> Result<std::borrow::Cow<'a, [f64]>> {
        let d = self.config.input_dim;
        if tokens.is_empty() {
            return Err(Error::Data("conv_encode on an empty token sequence".into()));
        }
        if tokens.len() % d != 0 {
            return Err(Error::dim("conv token matrix width", d, tokens.len() % d));
        }
        let n = tokens.len() / d;
        let need = self.config.max_width();
        Ok(if n < need {
            let mut v = tokens.to_vec();
            v.resize(need * d, 0.0);
            std::borrow::Cow::Owned(v)
        } else {
            std::borrow::Cow::Borrowed(tokens)
        })
    }

    pub fn forward(&self, tokens: &[f64]) -> Result<(Vec<f64>, ConvCache)> {
        let x = self.padded(tokens)?;
        let d = self.config.input_dim;
        let n = x.len() / d;
        let f = self.config.filters_per_width;
        let mut out = Vec::with_capacity(self.output_dim());
        let mut winners = Vec::with_capacity(self.output_dim());
        for (wi, &w) in self.config.filter_widths.iter().enumerate() {
            let positions = n + 1 - w;
            let weights = &self.weights[wi];
            let bias = &self.biases[wi].data;
            for fi in 0..f {
                let row = weights.row(fi);
                let mut best = 0.0;
                let mut arg = None;
                for p in 0..positions {
                    let pre = bias[fi] + dot(row, &x[p * d..(p + w) * d]);
                    // ReLU then first-occurrence max; inactive units pool to 0.
                    if pre > best {
                        best = pre;
                        arg = Some(p);
                    }
                }
                out.push(best);
                winners.push(arg);
            }
        }
        Ok((out, ConvCache { winners }))
    }

    /// Accumulates parameter gradients for `d_out` into `grads`.
    pub fn backward(&self, tokens: &[f64], cache: &ConvCache, d_out: &[f64], grads: &mut ConvEncoder) -> Result<()> {
        let x = self.padded(tokens)?;
        let d = self.config.input_dim;
        let f = self.config.filters_per_width;
        for (wi, &w) in self.config.filter_widths.iter().enumerate() {
            for fi in 0..f {
                let k = wi * f + fi;
                let (Some(p), g) = (cache.winners[k], d_out[k]) else { continue };
                if g == 0.0 {
                    continue;
                }
                axpy(g, &x[p * d..(p + w) * d], grads.weights[wi].row_mut(fi));
                grads.biases[wi].data[fi] += g;
            }
        }
        Ok(())
    }
}
