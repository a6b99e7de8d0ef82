use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::context::ContextSpec;
use crate::corpus::{Corpus, FoldUnit};
use crate::embeddings::{load_precomputed, load_word_vectors, PrecomputedAduEmbeddings, WordVectorTable};
use crate::error::{Error, Result};
use crate::features::{LexiconBundle, HANDCRAFTED_DIM};
use crate::neural::{EncoderConfig, ModelConfig, Pipeline};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Weight the loss by inverse training-label frequency.
    pub class_weights: bool,
    /// Share of training discussions held out, from the end, as the dev set.
    pub dev_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            early_stop_patience: 10,
            seed: 0,
            class_weights: false,
            dev_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub corpus: Option<PathBuf>,
    /// Directory with the lexicon files; empty lexicons when absent.
    pub lexicons: Option<PathBuf>,
    /// Word-vector text file (hybrid pipeline).
    pub vectors: Option<PathBuf>,
    /// Precomputed contextual token embeddings (pooled pipeline).
    pub embeddings: Option<PathBuf>,
}

impl DataPaths {
    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.corpus, &mut self.lexicons, &mut self.vectors, &mut self.embeddings]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub context: ContextSpec,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub fold_unit: FoldUnit,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default)]
    pub paths: DataPaths,
}

impl ExperimentConfig {
    pub fn new(pipeline: Pipeline, context: ContextSpec) -> ExperimentConfig {
        ExperimentConfig {
            pipeline,
            context,
            training: TrainingConfig::default(),
            folds: default_folds(),
            fold_unit: FoldUnit::Discussion,
            encoder: EncoderConfig::default(),
            paths: DataPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are taken relative to it.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::from_json(&text)?;
        cfg.paths.resolve(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.training;
        if t.batch_size == 0 || t.early_stop_patience == 0 {
            return Err(Error::Config("batch_size and early_stop_patience must be positive".into()));
        }
        if !(t.learning_rate.is_finite() && t.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", t.learning_rate)));
        }
        if !(0.0..1.0).contains(&t.dev_fraction) {
            return Err(Error::Config(format!("dev_fraction must lie in [0, 1), got {}", t.dev_fraction)));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {}", self.folds)));
        }
        self.context.validate()?;
        let mut probe = self.model_config(1);
        probe.token_dim = probe.token_dim.max(1);
        probe.validate()
    }

    /// `input_dim` is the word-vector size (hybrid) or the embedding size (pooled).
    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        let mut m = match self.pipeline {
            Pipeline::Hybrid => {
                let mut m = ModelConfig::hybrid(self.context);
                m.token_dim = input_dim;
                m.fixed_dim = HANDCRAFTED_DIM;
                m
            }
            Pipeline::PooledEmbedding => {
                let mut m = ModelConfig::pooled(self.context);
                m.fixed_dim = input_dim;
                m
            }
        };
        m.encoder = self.encoder.clone();
        m
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        let path = self
            .paths
            .corpus
            .as_ref()
            .ok_or_else(|| Error::Config("paths.corpus is required".into()))?;
        crate::corpus::parse_corpus(path, crate::corpus::CorpusFormat::from_path(path))
    }
}

/// Lexicons, vectors and embeddings shared by every fold.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub lexicons: LexiconBundle,
    pub word_vectors: Option<WordVectorTable>,
    pub embeddings: Option<PrecomputedAduEmbeddings>,
}

impl Resources {
    /// Loads every resource whose path is set and checks that the configured
    /// pipeline has what it needs.
    pub fn load(config: &ExperimentConfig, corpus: &Corpus) -> Result<Resources> {
        let lexicons = match &config.paths.lexicons {
            Some(dir) => LexiconBundle::load_dir(dir)?,
            None => LexiconBundle::default(),
        };
        let word_vectors = config.paths.vectors.as_deref().map(load_word_vectors).transpose()?;
        let embeddings = config
            .paths
            .embeddings
            .as_deref()
            .map(|p| load_precomputed(p, corpus, None))
            .transpose()?;
        let res = Resources {
            lexicons,
            word_vectors,
            embeddings,
        };
        res.input_dim(config.pipeline)?;
        Ok(res)
    }

    /// Token-vector size for the hybrid pipeline, embedding size otherwise.
    pub fn input_dim(&self, pipeline: Pipeline) -> Result<usize> {
        match pipeline {
            Pipeline::Hybrid => self
                .word_vectors
                .as_ref()
                .map(WordVectorTable::dim)
                .ok_or_else(|| Error::Config("hybrid pipeline needs word vectors".into())),
            Pipeline::PooledEmbedding => self
                .embeddings
                .as_ref()
                .map(PrecomputedAduEmbeddings::dim)
                .ok_or_else(|| Error::Config("pooled_embedding pipeline needs precomputed embeddings".into())),
        }
    }
}
