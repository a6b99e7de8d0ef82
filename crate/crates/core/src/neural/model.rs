//! The full classifier: per-ADU encoders, context aggregators and the softmax
//! layer, with a hand-written backward pass.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attention::{Attention, AttentionCache};
use super::classifier::{Classifier, N_CLASSES};
use super::conv::{ConvCache, ConvConfig, ConvEncoder};
use super::lstm::{Lstm, LstmCache, LSTM_HIDDEN_DIM};
use super::tensor::{axpy, Tensor};
use crate::context::{ContextSpec, ExamplePlan};
use crate::corpus::Label;
use crate::embeddings::CONTEXTUAL_EMBEDDING_DIM;
use crate::error::{Error, Result};
use crate::features::{HANDCRAFTED_DIM, WORD_VECTOR_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Handcrafted features concatenated with a trained CNN encoding.
    Hybrid,
    /// Average-pooled precomputed contextual token embeddings.
    PooledEmbedding,
}

impl Pipeline {
    pub fn as_str(self) -> &'static str {
        match self {
            Pipeline::Hybrid => "hybrid",
            Pipeline::PooledEmbedding => "pooled_embedding",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(Pipeline::Hybrid),
            "pooled_embedding" | "pooled" => Ok(Pipeline::PooledEmbedding),
            other => Err(Error::Config(format!("unknown pipeline {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub speaker_filters_per_width: usize,
}

impl Default for EncoderConfig {
    /// Four widths × 600 filters = 2,400 dims; × 50 filters = 200 dims for
    /// the speaker encoder.
    fn default() -> Self {
        EncoderConfig {
            filter_widths: vec![2, 3, 4, 5],
            filters_per_width: 600,
            speaker_filters_per_width: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub pipeline: Pipeline,
    pub context: ContextSpec,
    pub encoder: EncoderConfig,
    /// Token vector size fed to the CNNs (hybrid only).
    pub token_dim: usize,
    /// Size of the non-trainable per-ADU block: handcrafted features for the
    /// hybrid pipeline, the pooled embedding otherwise.
    pub fixed_dim: usize,
}

impl ModelConfig {
    pub fn hybrid(context: ContextSpec) -> ModelConfig {
        ModelConfig {
            pipeline: Pipeline::Hybrid,
            context,
            encoder: EncoderConfig::default(),
            token_dim: WORD_VECTOR_DIM,
            fixed_dim: HANDCRAFTED_DIM,
        }
    }

    pub fn pooled(context: ContextSpec) -> ModelConfig {
        ModelConfig {
            pipeline: Pipeline::PooledEmbedding,
            context,
            encoder: EncoderConfig::default(),
            token_dim: 0,
            fixed_dim: CONTEXTUAL_EMBEDDING_DIM,
        }
    }

    pub fn conv_config(&self) -> ConvConfig {
        ConvConfig {
            filter_widths: self.encoder.filter_widths.clone(),
            filters_per_width: self.encoder.filters_per_width,
            input_dim: self.token_dim,
        }
    }

    pub fn speaker_conv_config(&self) -> ConvConfig {
        ConvConfig {
            filters_per_width: self.encoder.speaker_filters_per_width,
            ..self.conv_config()
        }
    }

    /// Per-ADU vector used for the target and local context.
    pub fn adu_dim(&self) -> usize {
        match self.pipeline {
            Pipeline::Hybrid => self.fixed_dim + self.conv_config().output_dim(),
            Pipeline::PooledEmbedding => self.fixed_dim,
        }
    }

    /// Per-ADU vector fed to the speaker aggregator.
    pub fn speaker_adu_dim(&self) -> usize {
        match self.pipeline {
            Pipeline::Hybrid => self.speaker_conv_config().output_dim(),
            Pipeline::PooledEmbedding => self.fixed_dim,
        }
    }

    pub fn speaker_block_dim(&self) -> usize {
        if !self.context.has_speaker() {
            0
        } else if self.context.speaker_attention {
            self.speaker_adu_dim()
        } else {
            LSTM_HIDDEN_DIM
        }
    }

    pub fn local_block_dim(&self) -> usize {
        let c = &self.context;
        if !c.has_local() {
            0
        } else if c.local_attention {
            self.adu_dim()
        } else {
            let (p, n) = c.local_slots();
            (p + n) * (self.adu_dim() + 1)
        }
    }

    pub fn classifier_input_dim(&self) -> usize {
        self.adu_dim() + self.local_block_dim() + self.speaker_block_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.context.validate()?;
        if self.fixed_dim == 0 {
            return Err(Error::Config("fixed_dim must be positive".into()));
        }
        if self.pipeline == Pipeline::Hybrid {
            self.conv_config().validate()?;
            if self.context.has_speaker() {
                self.speaker_conv_config().validate()?;
            }
        }
        Ok(())
    }
}

/// Model inputs for one ADU. `tokens` is a row-major `n × token_dim` matrix
/// (empty for the pooled pipeline).
#[derive(Debug, Clone, PartialEq)]
pub struct AduInput {
    pub fixed: Vec<f64>,
    pub tokens: Vec<f64>,
}

/// Inputs for every ADU of a set of discussions, indexed `[discussion][adu]`.
#[derive(Debug, Clone, Default)]
pub struct AduStore {
    pub discussions: Vec<Vec<AduInput>>,
}

impl AduStore {
    pub fn get(&self, key: AduRef) -> &AduInput {
        &self.discussions[key.0][key.1]
    }
}

/// (discussion position in the store, ADU index)
pub type AduRef = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub discussion: usize,
    pub plan: ExamplePlan,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub conv: Option<ConvEncoder>,
    pub speaker_conv: Option<ConvEncoder>,
    pub lstm: Option<Lstm>,
    pub local_attention: Option<Attention>,
    pub speaker_attention: Option<Attention>,
    /// Speaker-attention output for a speaker with no earlier ADUs.
    pub speaker_attention_empty: Option<Tensor>,
    pub classifier: Classifier,
}

struct Encodings {
    main: BTreeMap<AduRef, (Vec<f64>, Option<ConvCache>)>,
    speaker: BTreeMap<AduRef, (Vec<f64>, Option<ConvCache>)>,
}

enum SpeakerCache {
    None,
    Lstm(LstmCache),
    Attention(AttentionCache),
    EmptyAttention,
}

struct ExampleForward {
    x: Vec<f64>,
    logits: [f64; N_CLASSES],
    local: Option<AttentionCache>,
    speaker: SpeakerCache,
}

fn log_softmax(z: &[f64; N_CLASSES]) -> [f64; N_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    [z[0] - lse, z[1] - lse, z[2] - lse]
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Model> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hybrid = config.pipeline == Pipeline::Hybrid;
        let ctx = config.context;
        let conv = if hybrid {
            Some(ConvEncoder::new(config.conv_config(), &mut rng)?)
        } else {
            None
        };
        let speaker_conv = if hybrid && ctx.has_speaker() {
            Some(ConvEncoder::new(config.speaker_conv_config(), &mut rng)?)
        } else {
            None
        };
        let lstm = (ctx.has_speaker() && !ctx.speaker_attention)
            .then(|| Lstm::new(config.speaker_adu_dim(), LSTM_HIDDEN_DIM, &mut rng));
        let local_attention = (ctx.has_local() && ctx.local_attention)
            .then(|| Attention::new(config.adu_dim(), config.adu_dim(), &mut rng));
        let speaker_attention = (ctx.has_speaker() && ctx.speaker_attention)
            .then(|| Attention::new(config.adu_dim(), config.speaker_adu_dim(), &mut rng));
        let speaker_attention_empty = speaker_attention
            .as_ref()
            .map(|_| Tensor::zeros(&[config.speaker_adu_dim()]));
        let classifier = Classifier::new(config.classifier_input_dim(), &mut rng);
        Ok(Model {
            config,
            conv,
            speaker_conv,
            lstm,
            local_attention,
            speaker_attention,
            speaker_attention_empty,
            classifier,
        })
    }

    pub fn zeros_like(&self) -> Model {
        Model {
            config: self.config.clone(),
            conv: self.conv.as_ref().map(ConvEncoder::zeros_like),
            speaker_conv: self.speaker_conv.as_ref().map(ConvEncoder::zeros_like),
            lstm: self.lstm.as_ref().map(Lstm::zeros_like),
            local_attention: self.local_attention.as_ref().map(Attention::zeros_like),
            speaker_attention: self.speaker_attention.as_ref().map(Attention::zeros_like),
            speaker_attention_empty: self.speaker_attention_empty.as_ref().map(|t| Tensor::zeros(&t.shape)),
            classifier: self.classifier.zeros_like(),
        }
    }

    /// Every trainable block with a stable name, in a fixed order.
    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (prefix, conv) in [("conv", &self.conv), ("speaker_conv", &self.speaker_conv)] {
            if let Some(c) = conv {
                for (i, w) in c.config.filter_widths.iter().enumerate() {
                    out.push((format!("{prefix}.w{w}"), &c.weights[i]));
                    out.push((format!("{prefix}.b{w}"), &c.biases[i]));
                }
            }
        }
        if let Some(l) = &self.lstm {
            out.push(("lstm.w".into(), &l.w));
            out.push(("lstm.b".into(), &l.b));
            out.push(("lstm.empty".into(), &l.empty));
        }
        if let Some(a) = &self.local_attention {
            out.push(("local_attention.w".into(), &a.w));
        }
        if let Some(a) = &self.speaker_attention {
            out.push(("speaker_attention.w".into(), &a.w));
        }
        if let Some(e) = &self.speaker_attention_empty {
            out.push(("speaker_attention.empty".into(), e));
        }
        out.push(("classifier.w".into(), &self.classifier.w));
        out.push(("classifier.b".into(), &self.classifier.b));
        out
    }

    /// Same order as [`Model::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for c in [&mut self.conv, &mut self.speaker_conv].into_iter().flatten() {
            for (w, b) in c.weights.iter_mut().zip(c.biases.iter_mut()) {
                out.push(w);
                out.push(b);
            }
        }
        if let Some(l) = &mut self.lstm {
            out.push(&mut l.w);
            out.push(&mut l.b);
            out.push(&mut l.empty);
        }
        if let Some(a) = &mut self.local_attention {
            out.push(&mut a.w);
        }
        if let Some(a) = &mut self.speaker_attention {
            out.push(&mut a.w);
        }
        if let Some(e) = &mut self.speaker_attention_empty {
            out.push(e);
        }
        out.push(&mut self.classifier.w);
        out.push(&mut self.classifier.b);
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_input(&self, input: &AduInput, key: AduRef) -> Result<()> {
        if input.fixed.len() != self.config.fixed_dim {
            return Err(Error::dim(format!("fixed features of ADU {key:?}"), self.config.fixed_dim, input.fixed.len()));
        }
        Ok(())
    }

    fn encode_main(&self, input: &AduInput, key: AduRef) -> Result<(Vec<f64>, Option<ConvCache>)> {
        self.check_input(input, key)?;
        match &self.conv {
            Some(conv) => {
                let (c, cache) = conv.forward(&input.tokens)?;
                let mut v = input.fixed.clone();
                v.extend_from_slice(&c);
                Ok((v, Some(cache)))
            }
            None => Ok((input.fixed.clone(), None)),
        }
    }

    fn encode_speaker(&self, input: &AduInput, key: AduRef) -> Result<(Vec<f64>, Option<ConvCache>)> {
        self.check_input(input, key)?;
        match &self.speaker_conv {
            Some(conv) => {
                let (c, cache) = conv.forward(&input.tokens)?;
                Ok((c, Some(cache)))
            }
            None => Ok((input.fixed.clone(), None)),
        }
    }

    /// Encodes each distinct ADU the batch touches exactly once.
    fn encode_batch(&self, store: &AduStore, examples: &[&Example]) -> Result<Encodings> {
        let mut enc = Encodings {
            main: BTreeMap::new(),
            speaker: BTreeMap::new(),
        };
        for ex in examples {
            let d = ex.discussion;
            let main_keys = std::iter::once(ex.plan.target).chain(ex.plan.local_slots.iter().flatten().copied());
            for i in main_keys {
                if !enc.main.contains_key(&(d, i)) {
                    let v = self.encode_main(store.get((d, i)), (d, i))?;
                    enc.main.insert((d, i), v);
                }
            }
            if self.config.context.has_speaker() {
                for &i in &ex.plan.speaker {
                    if !enc.speaker.contains_key(&(d, i)) {
                        let v = self.encode_speaker(store.get((d, i)), (d, i))?;
                        enc.speaker.insert((d, i), v);
                    }
                }
            }
        }
        Ok(enc)
    }

    fn example_forward(&self, enc: &Encodings, ex: &Example) -> Result<ExampleForward> {
        let d = ex.discussion;
        let cfg = &self.config;
        let dim = cfg.adu_dim();
        let target = &enc.main[&(d, ex.plan.target)].0;
        let mut x = Vec::with_capacity(cfg.classifier_input_dim());
        let mut local = None;

        if cfg.context.has_local() {
            if ex.plan.local_slots.len() != cfg.context.local_size {
                return Err(Error::dim("local slots", cfg.context.local_size, ex.plan.local_slots.len()));
            }
            if let Some(att) = &self.local_attention {
                x.extend_from_slice(target);
                let zero = vec![0.0; dim];
                let keys: Vec<&[f64]> = ex
                    .plan
                    .local_slots
                    .iter()
                    .map(|s| s.map_or(zero.as_slice(), |i| enc.main[&(d, i)].0.as_slice()))
                    .collect();
                let mask: Vec<bool> = ex.plan.local_slots.iter().map(Option::is_none).collect();
                if mask.iter().all(|&m| m) {
                    x.extend_from_slice(&zero);
                } else {
                    let (agg, cache) = att.forward(target, &keys, &mask)?;
                    x.extend_from_slice(&agg);
                    local = Some(cache);
                }
            } else {
                let np = ex.plan.n_prior_slots;
                let push_slot = |x: &mut Vec<f64>, s: &Option<usize>| match s {
                    Some(i) => x.extend_from_slice(&enc.main[&(d, *i)].0),
                    None => x.resize(x.len() + dim, 0.0),
                };
                for s in &ex.plan.local_slots[..np] {
                    push_slot(&mut x, s);
                }
                x.extend_from_slice(target);
                for s in &ex.plan.local_slots[np..] {
                    push_slot(&mut x, s);
                }
                x.extend(ex.plan.local_slots.iter().map(|s| if s.is_some() { 1.0 } else { 0.0 }));
            }
        } else {
            x.extend_from_slice(target);
        }

        let mut speaker = SpeakerCache::None;
        if cfg.context.has_speaker() {
            let seq: Vec<&[f64]> = ex.plan.speaker.iter().map(|&i| enc.speaker[&(d, i)].0.as_slice()).collect();
            if let Some(lstm) = &self.lstm {
                let (h, cache) = lstm.forward(&seq)?;
                x.extend_from_slice(&h);
                speaker = SpeakerCache::Lstm(cache);
            } else if let Some(att) = &self.speaker_attention {
                if seq.is_empty() {
                    x.extend_from_slice(&self.speaker_attention_empty.as_ref().unwrap().data);
                    speaker = SpeakerCache::EmptyAttention;
                } else {
                    let (agg, cache) = att.forward(target, &seq, &vec![false; seq.len()])?;
                    x.extend_from_slice(&agg);
                    speaker = SpeakerCache::Attention(cache);
                }
            }
        }
        let logits = self.classifier.logits(&x)?;
        Ok(ExampleForward { x, logits, local, speaker })
    }

    #[allow(clippy::too_many_arguments)]
    fn example_backward(
        &self,
        enc: &Encodings,
        ex: &Example,
        fwd: &ExampleForward,
        d_logits: &[f64; N_CLASSES],
        grads: &mut Model,
        d_main: &mut BTreeMap<AduRef, Vec<f64>>,
        d_speaker: &mut BTreeMap<AduRef, Vec<f64>>,
    ) {
        let d = ex.discussion;
        let cfg = &self.config;
        let dim = cfg.adu_dim();
        let dx = self.classifier.backward(&fwd.x, d_logits, &mut grads.classifier);
        let target = &enc.main[&(d, ex.plan.target)].0;
        let mut add_main = |i: usize, g: &[f64]| {
            let buf = d_main.entry((d, i)).or_insert_with(|| vec![0.0; dim]);
            axpy(1.0, g, buf);
        };

        let mut offset;
        if cfg.context.has_local() {
            if let Some(att) = &self.local_attention {
                add_main(ex.plan.target, &dx[..dim]);
                if let Some(cache) = &fwd.local {
                    let zero = vec![0.0; dim];
                    let keys: Vec<&[f64]> = ex
                        .plan
                        .local_slots
                        .iter()
                        .map(|s| s.map_or(zero.as_slice(), |i| enc.main[&(d, i)].0.as_slice()))
                        .collect();
                    let (dq, dk) = att.backward(
                        target,
                        &keys,
                        cache,
                        &dx[dim..2 * dim],
                        grads.local_attention.as_mut().unwrap(),
                    );
                    add_main(ex.plan.target, &dq);
                    for (s, g) in ex.plan.local_slots.iter().zip(&dk) {
                        if let Some(i) = s {
                            add_main(*i, g);
                        }
                    }
                }
                offset = 2 * dim;
            } else {
                let np = ex.plan.n_prior_slots;
                offset = 0;
                for s in &ex.plan.local_slots[..np] {
                    if let Some(i) = s {
                        add_main(*i, &dx[offset..offset + dim]);
                    }
                    offset += dim;
                }
                add_main(ex.plan.target, &dx[offset..offset + dim]);
                offset += dim;
                for s in &ex.plan.local_slots[np..] {
                    if let Some(i) = s {
                        add_main(*i, &dx[offset..offset + dim]);
                    }
                    offset += dim;
                }
                offset += ex.plan.local_slots.len();
            }
        } else {
            add_main(ex.plan.target, &dx[..dim]);
            offset = dim;
        }

        let d_spk = &dx[offset..];
        let sdim = cfg.speaker_adu_dim();
        let mut add_speaker = |i: usize, g: &[f64]| {
            let buf = d_speaker.entry((d, i)).or_insert_with(|| vec![0.0; sdim]);
            axpy(1.0, g, buf);
        };
        match &fwd.speaker {
            SpeakerCache::None => {}
            SpeakerCache::Lstm(cache) => {
                let lstm = self.lstm.as_ref().unwrap();
                let d_inputs = lstm.backward(cache, d_spk, grads.lstm.as_mut().unwrap());
                for (&i, g) in ex.plan.speaker.iter().zip(&d_inputs) {
                    add_speaker(i, g);
                }
            }
            SpeakerCache::EmptyAttention => {
                axpy(1.0, d_spk, &mut grads.speaker_attention_empty.as_mut().unwrap().data);
            }
            SpeakerCache::Attention(cache) => {
                let att = self.speaker_attention.as_ref().unwrap();
                let seq: Vec<&[f64]> = ex.plan.speaker.iter().map(|&i| enc.speaker[&(d, i)].0.as_slice()).collect();
                let (dq, dk) = att.backward(target, &seq, cache, d_spk, grads.speaker_attention.as_mut().unwrap());
                add_main(ex.plan.target, &dq);
                for (&i, g) in ex.plan.speaker.iter().zip(&dk) {
                    add_speaker(i, g);
                }
            }
        }
    }

    fn label_of(ex: &Example) -> Result<Label> {
        ex.label
            .ok_or_else(|| Error::Data(format!("training example {} has no label", ex.plan.target)))
    }

    /// Mean (optionally class-weighted) cross-entropy over the batch.
    pub fn loss(&self, store: &AduStore, examples: &[&Example], class_weights: Option<&[f64; N_CLASSES]>) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let enc = self.encode_batch(store, examples)?;
        let mut total = 0.0;
        for ex in examples {
            let y = Self::label_of(ex)?.index();
            let fwd = self.example_forward(&enc, ex)?;
            let w = class_weights.map_or(1.0, |cw| cw[y]);
            total -= w * log_softmax(&fwd.logits)[y];
        }
        Ok(total / examples.len() as f64)
    }

    /// Loss and a gradient for every trainable block (same layout as `self`).
    pub fn loss_and_gradients(
        &self,
        store: &AduStore,
        examples: &[&Example],
        class_weights: Option<&[f64; N_CLASSES]>,
    ) -> Result<(f64, Model)> {
        if examples.is_empty() {
            return Err(Error::Data("empty batch".into()));
        }
        let n = examples.len() as f64;
        let enc = self.encode_batch(store, examples)?;
        let mut grads = self.zeros_like();
        let mut d_main = BTreeMap::new();
        let mut d_speaker = BTreeMap::new();
        let mut total = 0.0;
        for ex in examples {
            let y = Self::label_of(ex)?.index();
            let fwd = self.example_forward(&enc, ex)?;
            let w = class_weights.map_or(1.0, |cw| cw[y]);
            let logp = log_softmax(&fwd.logits);
            total -= w * logp[y];
            let mut d_logits = [0.0; N_CLASSES];
            for (k, dl) in d_logits.iter_mut().enumerate() {
                let indicator = if k == y { 1.0 } else { 0.0 };
                *dl = w * (logp[k].exp() - indicator) / n;
            }
            self.example_backward(&enc, ex, &fwd, &d_logits, &mut grads, &mut d_main, &mut d_speaker);
        }
        if let (Some(conv), Some(g)) = (&self.conv, grads.conv.as_mut()) {
            let fd = self.config.fixed_dim;
            for (key, d_out) in &d_main {
                let cache = enc.main[key].1.as_ref().unwrap();
                conv.backward(&store.get(*key).tokens, cache, &d_out[fd..], g)?;
            }
        }
        if let (Some(conv), Some(g)) = (&self.speaker_conv, grads.speaker_conv.as_mut()) {
            for (key, d_out) in &d_speaker {
                let cache = enc.speaker[key].1.as_ref().unwrap();
                conv.backward(&store.get(*key).tokens, cache, d_out, g)?;
            }
        }
        let loss = total / n;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                block: "loss".into(),
                detail: format!("{loss}"),
            });
        }
        for (name, t) in grads.params() {
            if let Some(v) = t.data.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    block: name,
                    detail: format!("gradient entry {v}"),
                });
            }
        }
        Ok((loss, grads))
    }

    /// Class probabilities for each example.
    pub fn predict_proba(&self, store: &AduStore, examples: &[&Example]) -> Result<Vec<[f64; N_CLASSES]>> {
        let mut out = Vec::with_capacity(examples.len());
        for chunk in examples.chunks(256) {
            let enc = self.encode_batch(store, chunk)?;
            for ex in chunk {
                let fwd = self.example_forward(&enc, ex)?;
                let lp = log_softmax(&fwd.logits);
                out.push([lp[0].exp(), lp[1].exp(), lp[2].exp()]);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, store: &AduStore, examples: &[&Example]) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(store, examples)?
            .into_iter()
            .map(|p| {
                let mut best = 0;
                for k in 1..N_CLASSES {
                    if p[k] > p[best] {
                        best = k;
                    }
                }
                Label::from_index(best).unwrap()
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::LocalPosition;

    #[test]
    fn default_dimensions() {
        let base = ModelConfig::hybrid(ContextSpec::none());
        assert_eq!(base.adu_dim(), 2514);
        assert_eq!(base.classifier_input_dim(), 2514);
        let spk = ModelConfig::hybrid(ContextSpec::speaker(5));
        assert_eq!(spk.speaker_adu_dim(), 200);
        assert_eq!(spk.speaker_block_dim(), 100);
        let local = ModelConfig::hybrid(ContextSpec::local(4, LocalPosition::Both));
        assert_eq!(local.classifier_input_dim(), 2514 * 5 + 4);
        assert_eq!(ModelConfig::pooled(ContextSpec::none()).adu_dim(), 768);
    }

    #[test]
    fn zero_classifier_loss_is_ln3() {
        let mut cfg = ModelConfig::pooled(ContextSpec::none());
        cfg.fixed_dim = 4;
        let mut m = Model::new(cfg, 1).unwrap();
        m.classifier.w.fill(0.0);
        let store = AduStore {
            discussions: vec![vec![AduInput {
                fixed: vec![1.0, -1.0, 0.5, 2.0],
                tokens: vec![],
            }]],
        };
        let ex = Example {
            discussion: 0,
            plan: ExamplePlan {
                target: 0,
                n_prior_slots: 0,
                local_slots: vec![],
                speaker: vec![],
            },
            label: Some(Label::Warrant),
        };
        let (loss, g1) = m.loss_and_gradients(&store, &[&ex], None).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-15);
        let (_, g2) = m.loss_and_gradients(&store, &[&ex, &ex], None).unwrap();
        assert_eq!(g1, g2);
    }
}
