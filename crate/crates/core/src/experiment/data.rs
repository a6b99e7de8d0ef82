//! Per-fold feature preparation. IDF and standardization statistics are fit on
//! the training partition only and then applied to dev and test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::Resources;
use crate::context::{plan_example, ContextSpec};
use crate::corpus::{Adu, AduKey, Discussion};
use crate::error::{Error, Result};
use crate::features::{handcrafted, tokenize, IdfTable};
use crate::neural::{AduInput, AduStore, Example, Pipeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Train,
    Dev,
    Test,
}

/// Sees every ADU whose text or embedding is read while building inputs.
pub trait AccessObserver: Sync {
    fn touched(&self, fold: Option<usize>, phase: Phase, key: &AduKey);
}

pub struct NoObserver;

impl AccessObserver for NoObserver {
    fn touched(&self, _: Option<usize>, _: Phase, _: &AduKey) {}
}

#[derive(Clone, Copy)]
pub struct Observe<'a> {
    pub observer: &'a dyn AccessObserver,
    pub fold: Option<usize>,
}

impl Observe<'_> {
    pub fn none() -> Observe<'static> {
        Observe {
            observer: &NoObserver,
            fold: None,
        }
    }
}

/// Discussions plus the ADU indices of each that belong to this partition.
/// Context may still reach the other ADUs of a listed discussion.
#[derive(Debug, Clone, Default)]
pub struct Partition<'c> {
    pub parts: Vec<(&'c Discussion, Vec<usize>)>,
}

impl<'c> Partition<'c> {
    pub fn whole(discussions: impl IntoIterator<Item = &'c Discussion>) -> Partition<'c> {
        Partition {
            parts: discussions
                .into_iter()
                .map(|d| (d, (0..d.adus.len()).collect()))
                .collect(),
        }
    }

    pub fn members(&self) -> impl Iterator<Item = &'c Adu> + '_ {
        self.parts.iter().flat_map(|(d, idx)| idx.iter().map(move |&i| &d.adus[i]))
    }

    pub fn n_labeled(&self) -> usize {
        self.members().filter(|a| a.label.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.n_labeled() == 0
    }
}

/// Fitted feature statistics, kept with checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureState {
    pub pipeline: Pipeline,
    pub idf_doc_count: usize,
    pub idf_df: BTreeMap<String, usize>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureState {
    fn idf(&self) -> Result<Option<IdfTable>> {
        if self.pipeline != Pipeline::Hybrid {
            return Ok(None);
        }
        let df = self.idf_df.iter().map(|(k, v)| (k.clone(), *v)).collect();
        IdfTable::from_parts(self.idf_doc_count, df).map(Some)
    }
}

fn raw_input(adu: &Adu, res: &Resources, pipeline: Pipeline, idf: Option<&IdfTable>) -> Result<AduInput> {
    match pipeline {
        Pipeline::Hybrid => {
            let wv = res
                .word_vectors
                .as_ref()
                .ok_or_else(|| Error::Config("hybrid pipeline needs word vectors".into()))?;
            let idf = idf.ok_or_else(|| Error::Data("hybrid features need an IDF table".into()))?;
            let fixed = handcrafted(adu, &res.lexicons, idf, wv)?.0;
            let toks = tokenize(&adu.text);
            let (tokens, _) = wv.lookup_all(toks.iter().map(|t| t.lower.as_str()));
            Ok(AduInput { fixed, tokens })
        }
        Pipeline::PooledEmbedding => {
            let emb = res
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::Config("pooled_embedding pipeline needs precomputed embeddings".into()))?;
            Ok(AduInput {
                fixed: emb.pooled(&adu.key())?,
                tokens: Vec::new(),
            })
        }
    }
}

fn standardize(x: &mut [f64], mean: &[f64], scale: &[f64]) {
    for ((v, m), s) in x.iter_mut().zip(mean).zip(scale) {
        *v = (*v - m) / s;
    }
}

fn encode_partition(
    part: &Partition,
    res: &Resources,
    pipeline: Pipeline,
    idf: Option<&IdfTable>,
    phase: Phase,
    obs: Observe,
) -> Result<AduStore> {
    let mut store = AduStore::default();
    for (disc, _) in &part.parts {
        let mut inputs = Vec::with_capacity(disc.adus.len());
        for adu in &disc.adus {
            obs.observer.touched(obs.fold, phase, &adu.key());
            inputs.push(raw_input(adu, res, pipeline, idf)?);
        }
        store.discussions.push(inputs);
    }
    Ok(store)
}

/// Fits IDF and z-score statistics on the partition's member ADUs and returns
/// them together with the standardized training store. Statistics for the
/// pooled pipeline are the identity.
pub fn fit_features(part: &Partition, res: &Resources, pipeline: Pipeline, obs: Observe) -> Result<(FeatureState, AduStore)> {
    if part.members().next().is_none() {
        return Err(Error::Data("cannot fit features on an empty training partition".into()));
    }
    let idf = (pipeline == Pipeline::Hybrid).then(|| IdfTable::from_adus(part.members()));
    let mut store = encode_partition(part, res, pipeline, idf.as_ref(), Phase::Train, obs)?;
    let dim = store.discussions[0][0].fixed.len();
    let (mean, scale) = if pipeline == Pipeline::Hybrid {
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0.0;
        for (pi, (_, idx)) in part.parts.iter().enumerate() {
            for &i in idx {
                for (j, v) in store.discussions[pi][i].fixed.iter().enumerate() {
                    sum[j] += v;
                    sq[j] += v * v;
                }
                n += 1.0;
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / n - m * m).max(0.0).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        (mean, scale)
    } else {
        (vec![0.0; dim], vec![1.0; dim])
    };
    for d in &mut store.discussions {
        for a in d {
            standardize(&mut a.fixed, &mean, &scale);
        }
    }
    let state = FeatureState {
        pipeline,
        idf_doc_count: idf.as_ref().map_or(0, IdfTable::doc_count),
        idf_df: idf
            .as_ref()
            .map(|t| t.df().iter().map(|(k, v)| (k.clone(), *v)).collect())
            .unwrap_or_default(),
        mean,
        scale,
    };
    Ok((state, store))
}

/// Applies fitted statistics to a held-out partition.
pub fn build_store(part: &Partition, res: &Resources, state: &FeatureState, phase: Phase, obs: Observe) -> Result<AduStore> {
    let idf = state.idf()?;
    let mut store = encode_partition(part, res, state.pipeline, idf.as_ref(), phase, obs)?;
    for d in &mut store.discussions {
        for a in d {
            if a.fixed.len() != state.mean.len() {
                return Err(Error::dim("per-ADU feature vector", state.mean.len(), a.fixed.len()));
            }
            standardize(&mut a.fixed, &state.mean, &state.scale);
        }
    }
    Ok(store)
}

/// One example per labeled member ADU, indexed against the partition's store.
pub fn build_examples(part: &Partition, spec: &ContextSpec) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for (pi, (disc, idx)) in part.parts.iter().enumerate() {
        for &i in idx {
            let adu = &disc.adus[i];
            if adu.label.is_none() {
                continue;
            }
            out.push(Example {
                discussion: pi,
                plan: plan_example(disc, i, spec)?,
                label: adu.label,
            });
        }
    }
    Ok(out)
}

/// Keys of the partition's labeled members in example order.
pub fn example_keys(part: &Partition) -> Vec<AduKey> {
    part.members().filter(|a| a.label.is_some()).map(Adu::key).collect()
}
