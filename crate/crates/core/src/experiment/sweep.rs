//! Context grid sweeps: one cross-validation per cell, a results CSV with
//! per-fold and aggregate rows, and per-panel curve files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Resources};
use super::cv::{cross_validate_in_pool, thread_pool, CvOutcome};
use super::data::NoObserver;
use crate::context::{ContextSpec, LocalPosition, MAX_LOCAL_SIZE, MAX_SPEAKER_SIZE};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::neural::Pipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombinedCell {
    pub local_size: usize,
    pub local_position: LocalPosition,
    pub speaker_size: usize,
}

/// Every list may be empty; the baseline cell is always run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    /// Defaults to the base config's pipeline.
    pub pipelines: Vec<Pipeline>,
    pub local_positions: Vec<LocalPosition>,
    pub local_sizes: Vec<usize>,
    pub speaker_sizes: Vec<usize>,
    pub combined: Vec<CombinedCell>,
    /// Adds the attention-over-local-context cell (size 6, both sides).
    pub local_attention: bool,
    /// Adds the attention-over-speaker-context cell (size 40).
    pub speaker_attention: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub pipeline: Pipeline,
    pub context: ContextSpec,
}

impl Cell {
    pub fn local_position_label(&self) -> &'static str {
        if self.context.local_size == 0 {
            "none"
        } else {
            self.context.local_position.as_str()
        }
    }

    /// File-name-safe identifier.
    pub fn id(&self) -> String {
        let c = &self.context;
        format!(
            "{}_{}{}_s{}_la{}_sa{}",
            self.pipeline.as_str(),
            self.local_position_label(),
            c.local_size,
            c.speaker_size,
            c.local_attention as u8,
            c.speaker_attention as u8
        )
    }
}

impl SweepGrid {
    pub fn from_json(text: &str) -> Result<SweepGrid> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("sweep grid: {e}")))
    }

    pub fn load(path: &Path) -> Result<SweepGrid> {
        SweepGrid::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Cells in canonical order: per pipeline, baseline, local sweep
    /// (position-major), speaker sweep, combined, then attention cells.
    pub fn cells(&self, default_pipeline: Pipeline) -> Result<Vec<Cell>> {
        for &s in &self.local_sizes {
            if !(1..=MAX_LOCAL_SIZE).contains(&s) {
                return Err(Error::Config(format!("local size {s} outside 1..={MAX_LOCAL_SIZE}")));
            }
        }
        for &s in &self.speaker_sizes {
            if !(1..=MAX_SPEAKER_SIZE).contains(&s) {
                return Err(Error::Config(format!("speaker size {s} outside 1..={MAX_SPEAKER_SIZE}")));
            }
        }
        if !self.local_sizes.is_empty() && self.local_positions.is_empty() {
            return Err(Error::Config("local_sizes given without local_positions".into()));
        }
        let pipelines = if self.pipelines.is_empty() {
            vec![default_pipeline]
        } else {
            self.pipelines.clone()
        };
        let mut specs = vec![ContextSpec::none()];
        for &pos in &self.local_positions {
            for &size in &self.local_sizes {
                specs.push(ContextSpec::local(size, pos));
            }
        }
        for &k in &self.speaker_sizes {
            specs.push(ContextSpec::speaker(k));
        }
        for c in &self.combined {
            specs.push(ContextSpec::local(c.local_size, c.local_position).with_speaker(c.speaker_size));
        }
        if self.local_attention {
            specs.push(ContextSpec::local_attention());
        }
        if self.speaker_attention {
            specs.push(ContextSpec::speaker_attention());
        }
        let mut cells: Vec<Cell> = Vec::new();
        for &pipeline in &pipelines {
            for &context in &specs {
                context.validate()?;
                let cell = Cell { pipeline, context };
                if !cells.contains(&cell) {
                    cells.push(cell);
                }
            }
        }
        Ok(cells)
    }
}

/// One line of the results CSV; `fold = -1` marks the pooled aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pipeline: String,
    pub local_position: String,
    pub local_size: usize,
    pub speaker_size: usize,
    pub local_attention: bool,
    pub speaker_attention: bool,
    pub fold: i64,
    pub kappa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn is_aggregate(&self) -> bool {
        self.fold < 0
    }

    pub fn same_cell(&self, other: &ResultRow) -> bool {
        self.pipeline == other.pipeline
            && self.local_position == other.local_position
            && self.local_size == other.local_size
            && self.speaker_size == other.speaker_size
            && self.local_attention == other.local_attention
            && self.speaker_attention == other.speaker_attention
    }
}

/// Per-fold rows followed by the aggregate row.
pub fn cell_rows(cell: &Cell, outcome: &CvOutcome) -> Vec<ResultRow> {
    let row = |fold: i64, kappa, precision, recall, f_score| ResultRow {
        pipeline: cell.pipeline.as_str().to_string(),
        local_position: cell.local_position_label().to_string(),
        local_size: cell.context.local_size,
        speaker_size: cell.context.speaker_size,
        local_attention: cell.context.local_attention,
        speaker_attention: cell.context.speaker_attention,
        fold,
        kappa,
        precision,
        recall,
        f_score,
        seed: outcome.seed,
    };
    let mut rows: Vec<ResultRow> = outcome
        .report
        .per_fold
        .iter()
        .map(|m| row(m.fold as i64, m.kappa, m.precision, m.recall, m.f_score))
        .collect();
    let r = &outcome.report;
    rows.push(row(-1, r.kappa, r.precision, r.recall, r.f_score));
    rows
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(format!("writing results: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("writing results: {e}")))?;
    // Write-then-rename so an interrupted sweep never leaves a truncated cell.
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::parse(i + 2, format!("{}: {e}", path.display()))))
        .collect()
}

/// One row per x value; columns mirror the metric axes of the curve panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub series: String,
    pub context_size: usize,
    pub kappa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub seed: u64,
}

fn point(series: &str, x: usize, r: &ResultRow) -> CurvePoint {
    CurvePoint {
        series: series.to_string(),
        context_size: x,
        kappa: r.kappa,
        precision: r.precision,
        recall: r.recall,
        f_score: r.f_score,
        seed: r.seed,
    }
}

/// Local panel: one series per position against local size. Speaker panel:
/// speaker-only and local+speaker series against speaker size. Both carry
/// the baseline at size 0.
pub fn curves(aggregates: &[ResultRow], pipeline: &str) -> (Vec<CurvePoint>, Vec<CurvePoint>) {
    let rows: Vec<&ResultRow> = aggregates.iter().filter(|r| r.pipeline == pipeline).collect();
    let mut local = Vec::new();
    let mut speaker = Vec::new();
    for r in &rows {
        if r.local_attention || r.speaker_attention {
            continue;
        }
        match (r.local_size, r.speaker_size) {
            (0, 0) => {
                local.push(point("baseline", 0, r));
                speaker.push(point("baseline", 0, r));
            }
            (l, 0) => local.push(point(&r.local_position, l, r)),
            (0, k) => speaker.push(point("speaker", k, r)),
            (l, k) => speaker.push(point(&format!("{}{l}+speaker", r.local_position), k, r)),
        }
    }
    (local, speaker)
}

fn write_curve(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for p in points {
        w.serialize(p).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub results: PathBuf,
    pub rows: Vec<ResultRow>,
    /// Cells reused from an earlier, interrupted run.
    pub resumed: usize,
}

impl Cell {
    pub fn matches(&self, r: &ResultRow) -> bool {
        r.pipeline == self.pipeline.as_str()
            && r.local_position == self.local_position_label()
            && r.local_size == self.context.local_size
            && r.speaker_size == self.context.speaker_size
            && r.local_attention == self.context.local_attention
            && r.speaker_attention == self.context.speaker_attention
    }
}

fn load_finished(path: &Path, cell: &Cell, config: &ExperimentConfig) -> Option<Vec<ResultRow>> {
    let rows = read_rows(path).ok()?;
    let ok = rows.len() == config.folds + 1
        && rows.iter().all(|r| cell.matches(r) && r.seed == config.training.seed)
        && rows.last().is_some_and(ResultRow::is_aggregate);
    ok.then_some(rows)
}

/// Runs the grid with up to `jobs` cross-validation folds in flight. Each
/// finished cell is written under `out_dir/cells/` and reused on restart;
/// `results.csv` is assembled in canonical cell order at the end.
pub fn sweep(
    base: &ExperimentConfig,
    grid: &SweepGrid,
    corpus: &Corpus,
    res: &Resources,
    out_dir: &Path,
    jobs: usize,
) -> Result<SweepOutput> {
    base.validate()?;
    let cells = grid.cells(base.pipeline)?;
    for c in &cells {
        res.input_dim(c.pipeline)?;
    }
    let cell_dir = out_dir.join("cells");
    fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
    let echo = serde_json::json!({"base": base, "grid": grid, "seed": base.training.seed});
    let echo_path = out_dir.join("sweep_config.json");
    fs::write(&echo_path, serde_json::to_string_pretty(&echo).unwrap() + "\n").map_err(|e| Error::io(&echo_path, e))?;

    let pool = thread_pool(jobs)?;
    let per_cell: Vec<(Vec<ResultRow>, bool)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let path = cell_dir.join(format!("{}.csv", cell.id()));
                if let Some(rows) = load_finished(&path, cell, base) {
                    log::info!("reusing finished cell {}", cell.id());
                    return Ok((rows, true));
                }
                let mut cfg = base.clone();
                cfg.pipeline = cell.pipeline;
                cfg.context = cell.context;
                let outcome = cross_validate_in_pool(&cfg, corpus, res, &NoObserver)?;
                let rows = cell_rows(cell, &outcome);
                write_rows(&path, &rows)?;
                log::info!("cell {} kappa {:.4}", cell.id(), outcome.report.kappa);
                Ok((rows, false))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let resumed = per_cell.iter().filter(|(_, r)| *r).count();
    let rows: Vec<ResultRow> = per_cell.into_iter().flat_map(|(r, _)| r).collect();
    let results = out_dir.join("results.csv");
    write_rows(&results, &rows)?;

    let aggregates: Vec<ResultRow> = rows.iter().filter(|r| r.is_aggregate()).cloned().collect();
    let mut pipelines: Vec<Pipeline> = Vec::new();
    for c in &cells {
        if !pipelines.contains(&c.pipeline) {
            pipelines.push(c.pipeline);
        }
    }
    for p in pipelines {
        let (local, speaker) = curves(&aggregates, p.as_str());
        write_curve(&out_dir.join(format!("curves_{}_local.csv", p.as_str())), &local)?;
        write_curve(&out_dir.join(format!("curves_{}_speaker.csv", p.as_str())), &speaker)?;
    }
    Ok(SweepOutput { results, rows, resumed })
}
