//! Mini-batch Adam training with early stopping on dev macro-F.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Resources};
use super::data::{build_examples, build_store, fit_features, FeatureState, Observe, Partition, Phase};
use super::metrics::{ConfusionMatrix, FoldMetrics};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::neural::{optimizer_step, AdamConfig, AdamState, AduStore, Checkpoint, Example, Model, N_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub train_loss: f64,
    pub dev_kappa: Option<f64>,
    pub dev_f_score: Option<f64>,
    pub dev_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    pub adam: AdamState,
    pub features: FeatureState,
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initial model.
    pub best_epoch: usize,
    pub seed: u64,
}

impl TrainedModel {
    pub fn checkpoint(&self, config: &ExperimentConfig) -> Checkpoint {
        Checkpoint {
            model: self.model.clone(),
            adam: Some(self.adam.clone()),
            extra: serde_json::json!({
                "experiment": config,
                "seed": self.seed,
                "best_epoch": self.best_epoch,
                "training_log": self.log,
                "features": self.features,
            }),
        }
    }
}

/// SplitMix64 finaliser over a base seed and a stream id.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn inverse_frequency_weights(examples: &[Example]) -> [f64; N_CLASSES] {
    let mut counts = [0usize; N_CLASSES];
    for e in examples {
        if let Some(l) = e.label {
            counts[l.index()] += 1;
        }
    }
    let n: usize = counts.iter().sum();
    let mut w = [1.0; N_CLASSES];
    for (wk, &c) in w.iter_mut().zip(&counts) {
        if c > 0 {
            *wk = n as f64 / (N_CLASSES as f64 * c as f64);
        }
    }
    w
}

pub fn evaluate(model: &Model, store: &AduStore, examples: &[Example]) -> Result<(ConfusionMatrix, Vec<Label>)> {
    let refs: Vec<&Example> = examples.iter().collect();
    let pred = model.predict(store, &refs)?;
    let mut m = ConfusionMatrix::default();
    for (e, p) in examples.iter().zip(&pred) {
        let gold = e.label.ok_or_else(|| Error::Data("evaluation example without a label".into()))?;
        m.add(gold, *p);
    }
    Ok((m, pred))
}

/// Trains one model. `dev` may be empty, in which case the final epoch is kept.
pub fn train(
    config: &ExperimentConfig,
    res: &Resources,
    train_part: &Partition,
    dev_part: &Partition,
    seed: u64,
    obs: Observe,
) -> Result<TrainedModel> {
    config.validate()?;
    if train_part.is_empty() {
        return Err(Error::Data("training partition has no labeled ADUs".into()));
    }
    let (features, train_store) = fit_features(train_part, res, config.pipeline, obs)?;
    let train_ex = build_examples(train_part, &config.context)?;
    let (dev_store, dev_ex) = if dev_part.is_empty() {
        (AduStore::default(), Vec::new())
    } else {
        (
            build_store(dev_part, res, &features, Phase::Dev, obs)?,
            build_examples(dev_part, &config.context)?,
        )
    };

    let model_cfg = config.model_config(res.input_dim(config.pipeline)?);
    let mut model = Model::new(model_cfg, derive_seed(seed, 0))?;
    let mut adam = AdamState::new(&model);
    let adam_cfg = AdamConfig {
        learning_rate: config.training.learning_rate,
        ..AdamConfig::default()
    };
    let weights = config.training.class_weights.then(|| inverse_frequency_weights(&train_ex));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut order: Vec<usize> = (0..train_ex.len()).collect();

    let mut best = (model.clone(), adam.clone(), 0usize);
    let mut best_f = f64::NEG_INFINITY;
    let mut since_best = 0;
    let mut log = Vec::new();
    for epoch in 1..=config.training.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.training.batch_size) {
            let refs: Vec<&Example> = batch.iter().map(|&i| &train_ex[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&train_store, &refs, weights.as_ref())?;
            optimizer_step(&mut model, &grads, &mut adam, &adam_cfg)?;
            loss_sum += loss * batch.len() as f64;
        }
        let mut rec = EpochRecord {
            epoch,
            train_loss: loss_sum / train_ex.len() as f64,
            dev_kappa: None,
            dev_f_score: None,
            dev_accuracy: None,
        };
        if dev_ex.is_empty() {
            best = (model.clone(), adam.clone(), epoch);
        } else {
            let (m, _) = evaluate(&model, &dev_store, &dev_ex)?;
            let fm = FoldMetrics::from_confusion(0, m)?;
            rec.dev_kappa = Some(fm.kappa);
            rec.dev_f_score = Some(fm.f_score);
            rec.dev_accuracy = Some(fm.accuracy);
            if fm.f_score > best_f {
                best_f = fm.f_score;
                best = (model.clone(), adam.clone(), epoch);
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        log::debug!("epoch {epoch}: loss {:.5} dev F {:?}", rec.train_loss, rec.dev_f_score);
        log.push(rec);
        if since_best >= config.training.early_stop_patience {
            break;
        }
    }
    let (model, adam, best_epoch) = best;
    Ok(TrainedModel {
        model,
        adam,
        features,
        log,
        best_epoch,
        seed,
    })
}

/// Splits training discussions into (train, dev): dev is the last
/// `ceil(dev_fraction · n)` of them, and empty when fewer than two remain.
pub fn carve_dev<'c>(train: Partition<'c>, dev_fraction: f64) -> (Partition<'c>, Partition<'c>) {
    let n = train.parts.len();
    let n_dev = (dev_fraction * n as f64).ceil() as usize;
    if n < 2 || n_dev == 0 || n_dev >= n {
        return (train, Partition::default());
    }
    let mut parts = train.parts;
    let dev = parts.split_off(n - n_dev);
    (Partition { parts }, Partition { parts: dev })
}

/// ADU-level counterpart of [`carve_dev`]: the last share of member ADUs in
/// corpus order.
pub fn carve_dev_adus<'c>(train: Partition<'c>, dev_fraction: f64) -> (Partition<'c>, Partition<'c>) {
    let total: usize = train.parts.iter().map(|(_, i)| i.len()).sum();
    let mut n_dev = (dev_fraction * total as f64).ceil() as usize;
    if total < 2 || n_dev == 0 || n_dev >= total {
        return (train, Partition::default());
    }
    let mut keep = Vec::new();
    let mut dev = Vec::new();
    for (d, idx) in train.parts.into_iter().rev() {
        let take = n_dev.min(idx.len());
        n_dev -= take;
        let split = idx.len() - take;
        if take > 0 {
            dev.push((d, idx[split..].to_vec()));
        }
        if split > 0 {
            keep.push((d, idx[..split].to_vec()));
        }
    }
    keep.reverse();
    dev.reverse();
    (Partition { parts: keep }, Partition { parts: dev })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
