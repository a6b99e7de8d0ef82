//! Synthetic discussions whose labels depend on local and speaker context by
//! a controllable amount.
//!
//! Label of ADU `t`: with probability `local_signal_strength` it continues the
//! cycle claim → evidence → warrant → claim from ADU `t-1`; otherwise, with
//! probability `speaker_signal_strength`, it is the speaker's preferred label;
//! otherwise it is drawn from `base_label_distribution`. Each ADU carries one
//! marker word for its label, except that with probability `marker_dropout`
//! the marker is left out and the text is filler only.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Adu, AduKey, Corpus, CorpusFormat, Discussion, Label};
use crate::embeddings::{PrecomputedAduEmbeddings, WordVectorTable};
use crate::error::{Error, Result};
use crate::experiment::train::derive_seed;
use crate::features::{tokenize, WORD_VECTOR_DIM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_discussions: usize,
    pub speakers_per_discussion: usize,
    pub adus_per_discussion: usize,
    /// Number of filler words.
    pub vocab_size: usize,
    pub base_label_distribution: [f64; 3],
    pub local_signal_strength: f64,
    pub speaker_signal_strength: f64,
    pub seed: u64,
    pub marker_dropout: f64,
    pub markers_per_label: usize,
    pub min_words: usize,
    pub max_words: usize,
    /// When set, per-token contextual embeddings of this size are generated
    /// for the pooled pipeline.
    pub embedding_dim: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_discussions: 20,
            speakers_per_discussion: 5,
            adus_per_discussion: 150,
            vocab_size: 200,
            base_label_distribution: [0.653, 0.243, 0.104],
            local_signal_strength: 0.0,
            speaker_signal_strength: 0.0,
            seed: 0,
            marker_dropout: 0.5,
            markers_per_label: 3,
            min_words: 4,
            max_words: 10,
            embedding_dim: None,
        }
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_discussions", self.n_discussions),
            ("speakers_per_discussion", self.speakers_per_discussion),
            ("adus_per_discussion", self.adus_per_discussion),
            ("vocab_size", self.vocab_size),
            ("markers_per_label", self.markers_per_label),
            ("min_words", self.min_words),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_words < self.min_words {
            return Err(Error::Config("max_words must be at least min_words".into()));
        }
        if self.embedding_dim == Some(0) {
            return Err(Error::Config("embedding_dim must be positive".into()));
        }
        for &p in &self.base_label_distribution {
            unit("base label probability", p)?;
        }
        let sum: f64 = self.base_label_distribution.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("base_label_distribution sums to {sum}, not 1")));
        }
        unit("local_signal_strength", self.local_signal_strength)?;
        unit("speaker_signal_strength", self.speaker_signal_strength)?;
        unit("marker_dropout", self.marker_dropout)
    }

    pub fn from_json(text: &str) -> Result<SynthConfig> {
        let cfg: SynthConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("synth config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The label that follows `l` in the claim → evidence → warrant cycle.
pub fn chain_next(l: Label) -> Label {
    Label::from_index((l.index() + 1) % 3).unwrap()
}

pub fn marker(label: Label, j: usize) -> String {
    format!("{}mark{j}", label.as_str())
}

pub fn filler(i: usize) -> String {
    format!("w{i}")
}

fn discussion(cfg: &SynthConfig, d: usize) -> Discussion {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, d as u64));
    let id = format!("d{d:03}");
    // Zipf-like turn shares in a shuffled order, so speaker activity is skewed.
    let mut shares: Vec<f64> = (1..=cfg.speakers_per_discussion).map(|r| 1.0 / r as f64).collect();
    shares.shuffle(&mut rng);
    let speaker_pick = WeightedIndex::new(&shares).unwrap();
    let preferred: Vec<Label> = (0..cfg.speakers_per_discussion)
        .map(|_| Label::from_index(rng.gen_range(0..3)).unwrap())
        .collect();
    let base = WeightedIndex::new(cfg.base_label_distribution).unwrap();

    let mut adus = Vec::with_capacity(cfg.adus_per_discussion);
    let mut prev: Option<Label> = None;
    for t in 0..cfg.adus_per_discussion {
        let s = speaker_pick.sample(&mut rng);
        let label = match prev {
            Some(p) if rng.gen::<f64>() < cfg.local_signal_strength => chain_next(p),
            _ if rng.gen::<f64>() < cfg.speaker_signal_strength => preferred[s],
            _ => Label::from_index(base.sample(&mut rng)).unwrap(),
        };
        let n = rng.gen_range(cfg.min_words..=cfg.max_words);
        let mut words: Vec<String> = (0..n).map(|_| filler(rng.gen_range(0..cfg.vocab_size))).collect();
        if rng.gen::<f64>() >= cfg.marker_dropout {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, marker(label, rng.gen_range(0..cfg.markers_per_label)));
        }
        adus.push(Adu {
            discussion_id: id.clone(),
            global_index: t,
            speaker_id: format!("{id}s{s}"),
            text: words.join(" "),
            label: Some(label),
        });
        prev = Some(label);
    }
    Discussion { id, adus }
}

pub fn generate(cfg: &SynthConfig) -> Result<Corpus> {
    cfg.validate()?;
    let discussions = (0..cfg.n_discussions)
        .into_par_iter()
        .map(|d| discussion(cfg, d))
        .collect();
    Corpus::new(discussions)
}

fn vocabulary(cfg: &SynthConfig) -> Vec<String> {
    let mut v: Vec<String> = (0..cfg.vocab_size).map(filler).collect();
    for l in Label::ALL {
        v.extend((0..cfg.markers_per_label).map(|j| marker(l, j)));
    }
    v
}

fn random_table(cfg: &SynthConfig, dim: usize, stream: u64) -> Result<WordVectorTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stream));
    let mut table = WordVectorTable::new(dim);
    for w in vocabulary(cfg) {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        table.insert(&w, &v)?;
    }
    Ok(table)
}

/// Random 100-dim vectors for every filler and marker word.
pub fn word_vectors(cfg: &SynthConfig) -> Result<WordVectorTable> {
    cfg.validate()?;
    random_table(cfg, WORD_VECTOR_DIM, u64::MAX)
}

/// Stand-in contextual embeddings: a per-word random vector for each token.
pub fn contextual_embeddings(cfg: &SynthConfig, corpus: &Corpus) -> Result<Option<PrecomputedAduEmbeddings>> {
    let Some(dim) = cfg.embedding_dim else { return Ok(None) };
    let table = random_table(cfg, dim, u64::MAX - 1)?;
    let mut map: HashMap<AduKey, Vec<Vec<f64>>> = HashMap::new();
    for adu in corpus.adus() {
        let toks = tokenize(&adu.text);
        map.insert(adu.key(), toks.iter().map(|t| table.lookup(&t.lower).to_vec()).collect());
    }
    PrecomputedAduEmbeddings::from_map(dim, map).map(Some)
}

/// Writes `corpus.csv`, `vectors.txt`, `synth_config.json` and, when
/// configured, `embeddings.jsonl` into `dir`.
pub fn write_synth(cfg: &SynthConfig, dir: &Path) -> Result<Corpus> {
    let corpus = generate(cfg)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus.write(&dir.join("corpus.csv"), CorpusFormat::Csv)?;
    let vec_path = dir.join("vectors.txt");
    fs::write(&vec_path, word_vectors(cfg)?.to_text()).map_err(|e| Error::io(&vec_path, e))?;
    if let Some(emb) = contextual_embeddings(cfg, &corpus)? {
        let p = dir.join("embeddings.jsonl");
        fs::write(&p, emb.to_jsonl()).map_err(|e| Error::io(&p, e))?;
    }
    let p = dir.join("synth_config.json");
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap() + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(corpus)
}
