//! k-fold cross-validation with per-fold feature fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Resources};
use super::data::{build_examples, build_store, example_keys, AccessObserver, Observe, Partition, Phase};
use super::metrics::{FoldMetrics, MetricsReport};
use super::train::{carve_dev, carve_dev_adus, derive_seed, evaluate, train, EpochRecord};
use crate::corpus::{make_adu_folds, make_folds, AduKey, Corpus, FoldPlan, FoldUnit, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub key: AduKey,
    pub fold: usize,
    pub gold: Label,
    pub predicted: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub metrics: FoldMetrics,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub seed: u64,
    pub report: MetricsReport,
    pub folds: Vec<FoldOutcome>,
}

/// The (train, test) partitions of fold `f`.
pub fn fold_partitions<'c>(corpus: &'c Corpus, plan: &FoldPlan, f: usize) -> (Partition<'c>, Partition<'c>) {
    let mut train = Partition::default();
    let mut test = Partition::default();
    for d in corpus.discussions() {
        let (mut tr, mut te) = (Vec::new(), Vec::new());
        for (i, a) in d.adus.iter().enumerate() {
            if plan.fold_of(a) == f {
                te.push(i);
            } else {
                tr.push(i);
            }
        }
        if !tr.is_empty() {
            train.parts.push((d, tr));
        }
        if !te.is_empty() {
            test.parts.push((d, te));
        }
    }
    (train, test)
}

pub fn fold_plan(config: &ExperimentConfig, corpus: &Corpus) -> Result<FoldPlan> {
    match config.fold_unit {
        FoldUnit::Discussion => make_folds(corpus, config.folds, config.training.seed),
        FoldUnit::Adu => make_adu_folds(corpus, config.folds, config.training.seed),
    }
}

pub fn run_fold(
    config: &ExperimentConfig,
    corpus: &Corpus,
    res: &Resources,
    plan: &FoldPlan,
    f: usize,
    observer: &dyn AccessObserver,
) -> Result<FoldOutcome> {
    let obs = Observe {
        observer,
        fold: Some(f),
    };
    let (train_all, test) = fold_partitions(corpus, plan, f);
    if test.is_empty() {
        return Err(Error::Data(format!("fold {f} has no labeled test ADUs")));
    }
    let (tr, dev) = match plan.unit {
        FoldUnit::Discussion => carve_dev(train_all, config.training.dev_fraction),
        FoldUnit::Adu => carve_dev_adus(train_all, config.training.dev_fraction),
    };
    let seed = derive_seed(config.training.seed, 100 + f as u64);
    let trained = train(config, res, &tr, &dev, seed, obs)?;
    let store = build_store(&test, res, &trained.features, Phase::Test, obs)?;
    let examples = build_examples(&test, &config.context)?;
    let (confusion, pred) = evaluate(&trained.model, &store, &examples)?;
    let predictions = example_keys(&test)
        .into_iter()
        .zip(examples.iter().zip(pred))
        .map(|(key, (e, p))| Prediction {
            key,
            fold: f,
            gold: e.label.unwrap(),
            predicted: p,
        })
        .collect();
    Ok(FoldOutcome {
        metrics: FoldMetrics::from_confusion(f, confusion)?,
        best_epoch: trained.best_epoch,
        log: trained.log,
        predictions,
    })
}

/// Runs every fold on the current rayon pool.
pub fn cross_validate_in_pool(
    config: &ExperimentConfig,
    corpus: &Corpus,
    res: &Resources,
    observer: &dyn AccessObserver,
) -> Result<CvOutcome> {
    config.validate()?;
    let plan = fold_plan(config, corpus)?;
    let folds = (0..plan.k)
        .into_par_iter()
        .map(|f| run_fold(config, corpus, res, &plan, f, observer))
        .collect::<Result<Vec<_>>>()?;
    let report = MetricsReport::from_folds(folds.iter().map(|f| f.metrics.clone()).collect())?;
    Ok(CvOutcome {
        seed: config.training.seed,
        report,
        folds,
    })
}

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Cross-validation with up to `jobs` folds in flight. Results do not depend
/// on `jobs`.
pub fn cross_validate(
    config: &ExperimentConfig,
    corpus: &Corpus,
    res: &Resources,
    jobs: usize,
    observer: &dyn AccessObserver,
) -> Result<CvOutcome> {
    thread_pool(jobs)?.install(|| cross_validate_in_pool(config, corpus, res, observer))
}
