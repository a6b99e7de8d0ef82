mod common;

use std::collections::{BTreeSet, HashSet};
use std::sync::Mutex;

use argctx::context::{ContextSpec, LocalPosition};
use argctx::corpus::{AduKey, Corpus, FoldUnit};
use argctx::experiment::cv::{fold_partitions, fold_plan};
use argctx::experiment::train::carve_dev;
use argctx::experiment::{
    cross_validate, render_report, sweep, train, AccessObserver, ExperimentConfig, NoObserver, Observe, Phase,
    Resources, SweepGrid,
};
use argctx::neural::{EncoderConfig, Pipeline};
use argctx::synth::{generate, word_vectors, SynthConfig};

fn synth(n_discussions: usize, adus: usize, dropout: f64) -> (SynthConfig, Corpus) {
    let cfg = SynthConfig {
        n_discussions,
        adus_per_discussion: adus,
        marker_dropout: dropout,
        vocab_size: 60,
        seed: 3,
        ..SynthConfig::default()
    };
    let corpus = generate(&cfg).unwrap();
    (cfg, corpus)
}

fn resources(cfg: &SynthConfig) -> Resources {
    Resources {
        word_vectors: Some(word_vectors(cfg).unwrap()),
        ..Resources::default()
    }
}

fn small_config(context: ContextSpec, folds: usize, epochs: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Pipeline::Hybrid, context);
    cfg.encoder = EncoderConfig {
        filter_widths: vec![1],
        filters_per_width: 6,
        speaker_filters_per_width: 3,
    };
    cfg.folds = folds;
    cfg.training.epochs = epochs;
    cfg.training.learning_rate = 5e-3;
    cfg.training.early_stop_patience = 100;
    cfg
}

#[derive(Default)]
struct Recorder(Mutex<Vec<(Option<usize>, Phase, AduKey)>>);

impl AccessObserver for Recorder {
    fn touched(&self, fold: Option<usize>, phase: Phase, key: &AduKey) {
        self.0.lock().unwrap().push((fold, phase, key.clone()));
    }
}

#[test]
fn leave_one_discussion_out() {
    let (scfg, corpus) = synth(3, 30, 0.5);
    let cfg = small_config(ContextSpec::none(), 3, 1);
    let out = cross_validate(&cfg, &corpus, &resources(&scfg), 2, &NoObserver).unwrap();
    assert_eq!(out.folds.len(), 3);
    let mut seen = BTreeSet::new();
    for (f, fold) in out.folds.iter().enumerate() {
        let ids: BTreeSet<&str> = fold.predictions.iter().map(|p| p.key.discussion_id.as_str()).collect();
        assert_eq!(ids.len(), 1, "fold {f} tests {ids:?}");
        assert_eq!(fold.predictions.len(), 30);
        seen.extend(ids);
    }
    assert_eq!(seen.len(), 3);
    assert_eq!(out.report.confusion.total(), 90);
}

#[test]
fn pooled_confusion_counts_every_labeled_adu_once() {
    let (scfg, corpus) = synth(5, 24, 0.5);
    let cfg = small_config(ContextSpec::local(1, LocalPosition::Prior), 5, 1);
    let out = cross_validate(&cfg, &corpus, &resources(&scfg), 3, &NoObserver).unwrap();
    assert_eq!(out.report.confusion.total() as usize, corpus.label_histogram().total());
    let keys: HashSet<&AduKey> = out.folds.iter().flat_map(|f| f.predictions.iter().map(|p| &p.key)).collect();
    assert_eq!(keys.len(), corpus.adu_count());
    let per_fold: u64 = out.report.per_fold.iter().map(|m| m.confusion.total()).sum();
    assert_eq!(per_fold, out.report.confusion.total());
}

#[test]
fn test_fold_text_never_reaches_training() {
    let (scfg, corpus) = synth(6, 20, 0.5);
    let mut cfg = small_config(ContextSpec::local(2, LocalPosition::Both).with_speaker(3), 3, 1);
    cfg.fold_unit = FoldUnit::Discussion;
    let rec = Recorder::default();
    cross_validate(&cfg, &corpus, &resources(&scfg), 2, &rec).unwrap();
    let plan = fold_plan(&cfg, &corpus).unwrap();
    let log = rec.0.into_inner().unwrap();
    assert!(!log.is_empty());
    for f in 0..3 {
        let (_, test) = fold_partitions(&corpus, &plan, f);
        let test_keys: HashSet<AduKey> = test.members().map(|a| a.key()).collect();
        for (fold, phase, key) in &log {
            if *fold == Some(f) && *phase != Phase::Test {
                assert!(!test_keys.contains(key), "fold {f} {phase:?} touched {key:?}");
            }
        }
        let tested: HashSet<&AduKey> =
            log.iter().filter(|(fo, ph, _)| *fo == Some(f) && *ph == Phase::Test).map(|(_, _, k)| k).collect();
        assert!(test_keys.iter().all(|k| tested.contains(k)));
    }
}

#[test]
fn separable_data_is_learned() {
    let (scfg, corpus) = synth(6, 60, 0.0);
    let res = resources(&scfg);
    let mut cfg = small_config(ContextSpec::none(), 2, 30);
    cfg.training.early_stop_patience = 30;
    let all = argctx::experiment::Partition::whole(corpus.discussions());
    let (tr, dev) = carve_dev(all, 0.2);
    let model = train(&cfg, &res, &tr, &dev, 1, Observe::none()).unwrap();
    assert!(model.log[0].train_loss < 3f64.ln(), "epoch 1 loss {}", model.log[0].train_loss);
    let best = model.log.iter().filter_map(|r| r.dev_f_score).fold(0.0, f64::max);
    assert!(best > 0.95, "best dev F {best}");
}

#[test]
fn untrained_model_is_near_chance() {
    let (scfg, corpus) = synth(4, 60, 0.0);
    let cfg = small_config(ContextSpec::none(), 4, 0);
    let out = cross_validate(&cfg, &corpus, &resources(&scfg), 2, &NoObserver).unwrap();
    assert!(out.report.kappa.abs() < 0.15, "kappa {}", out.report.kappa);
    assert!(out.folds.iter().all(|f| f.best_epoch == 0 && f.log.is_empty()));
}

#[test]
fn sweep_resumes_and_reports_deterministically() {
    let (scfg, corpus) = synth(4, 20, 0.5);
    let res = resources(&scfg);
    let base = small_config(ContextSpec::none(), 2, 1);
    let grid = SweepGrid {
        local_positions: vec![LocalPosition::Prior],
        local_sizes: vec![1, 2],
        speaker_sizes: vec![2],
        ..SweepGrid::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let first = sweep(&base, &grid, &corpus, &res, dir.path(), 2).unwrap();
    assert_eq!(first.resumed, 0);
    let n_cells = grid.cells(Pipeline::Hybrid).unwrap().len();
    assert_eq!(n_cells, 4);
    assert_eq!(first.rows.len(), n_cells * 3);
    let results = std::fs::read(&first.results).unwrap();

    let cells: Vec<_> = std::fs::read_dir(dir.path().join("cells")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(cells.len(), n_cells);
    std::fs::remove_file(&cells[0]).unwrap();
    std::fs::remove_file(&first.results).unwrap();
    let second = sweep(&base, &grid, &corpus, &res, dir.path(), 1).unwrap();
    assert_eq!(second.resumed, n_cells - 1);
    assert_eq!(std::fs::read(&second.results).unwrap(), results);

    let a = render_report(&second.rows).unwrap();
    let b = render_report(&second.rows).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("speaker"));
}
