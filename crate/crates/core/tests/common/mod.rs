#![allow(dead_code)]

use argctx::context::{plan_example, ContextSpec};
use argctx::corpus::{Adu, Discussion, Label};
use argctx::neural::{AduInput, AduStore, EncoderConfig, Example, Model, ModelConfig, Pipeline};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TABLE1: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../resources/fixtures/table1.csv");
pub const LEXICONS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../resources/lexicons");

/// Small hybrid/pooled config suitable for finite-difference checks.
pub fn tiny_config(pipeline: Pipeline, context: ContextSpec) -> ModelConfig {
    let mut cfg = match pipeline {
        Pipeline::Hybrid => ModelConfig::hybrid(context),
        Pipeline::PooledEmbedding => ModelConfig::pooled(context),
    };
    cfg.encoder = EncoderConfig {
        filter_widths: vec![1, 2, 3],
        filters_per_width: 3,
        speaker_filters_per_width: 2,
    };
    cfg.token_dim = if pipeline == Pipeline::Hybrid { 4 } else { 0 };
    cfg.fixed_dim = 5;
    cfg
}

/// Random discussions with random inputs and every ADU planned as an example.
pub fn random_problem(cfg: &ModelConfig, seed: u64, n_disc: usize, len: usize) -> (AduStore, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = AduStore::default();
    let mut examples = Vec::new();
    for d in 0..n_disc {
        let adus: Vec<Adu> = (0..len)
            .map(|i| Adu {
                discussion_id: format!("d{d}"),
                global_index: i,
                speaker_id: format!("s{}", rng.gen_range(0..3)),
                text: "x".into(),
                label: Label::from_index(rng.gen_range(0..3)),
            })
            .collect();
        let disc = Discussion { id: format!("d{d}"), adus };
        let inputs = disc
            .adus
            .iter()
            .map(|_| {
                let n_tok = rng.gen_range(1..6);
                AduInput {
                    fixed: (0..cfg.fixed_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    tokens: (0..n_tok * cfg.token_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                }
            })
            .collect();
        store.discussions.push(inputs);
        for adu in &disc.adus {
            examples.push(Example {
                discussion: d,
                plan: plan_example(&disc, adu.global_index, &cfg.context).unwrap(),
                label: adu.label,
            });
        }
    }
    (store, examples)
}

/// Gives every bias and the LSTM empty vector small random values so their
/// gradients are exercised away from zero.
pub fn perturb_zero_blocks(model: &mut Model, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for t in model.params_mut() {
        if t.data.iter().all(|&x| x == 0.0) {
            t.data.iter_mut().for_each(|x| *x = rng.gen_range(-0.2..0.2));
        }
    }
}

pub struct GradReport {
    pub block: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

/// Central finite differences against the analytic gradient on up to
/// `per_block` entries of every block.
pub fn gradient_check(
    model: &Model,
    store: &AduStore,
    examples: &[&Example],
    eps: f64,
    per_block: usize,
    seed: u64,
) -> Vec<GradReport> {
    let (_, grads) = model.loss_and_gradients(store, examples, None).unwrap();
    let analytic: Vec<(String, Vec<f64>)> =
        grads.params().into_iter().map(|(n, t)| (n, t.data.clone())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for (b, (name, g)) in analytic.iter().enumerate() {
        let idx: Vec<usize> = if g.len() <= per_block {
            (0..g.len()).collect()
        } else {
            (0..per_block).map(|_| rng.gen_range(0..g.len())).collect()
        };
        let mut max_rel: f64 = 0.0;
        for &i in &idx {
            let mut plus = model.clone();
            plus.params_mut()[b].data[i] += eps;
            let mut minus = model.clone();
            minus.params_mut()[b].data[i] -= eps;
            let lp = plus.loss(store, examples, None).unwrap();
            let lm = minus.loss(store, examples, None).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let a = g[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            max_rel = max_rel.max(rel);
        }
        reports.push(GradReport {
            block: name.clone(),
            checked: idx.len(),
            max_rel_err: max_rel,
        });
    }
    reports
}
