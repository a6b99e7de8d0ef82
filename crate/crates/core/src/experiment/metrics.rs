//! Confusion matrices, Cohen's kappa and macro precision/recall/F1.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Rows are gold labels, columns predictions, both in [`Label::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 3]; 3]);

impl ConfusionMatrix {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a Label, &'a Label)>) -> ConfusionMatrix {
        let mut m = ConfusionMatrix::default();
        for (gold, pred) in pairs {
            m.add(*gold, *pred);
        }
        m
    }

    pub fn add(&mut self, gold: Label, predicted: Label) {
        self.0[gold.index()][predicted.index()] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for r in 0..3 {
            for c in 0..3 {
                self.0[r][c] += other.0[r][c];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.0[i][i]).sum()
    }

    pub fn row_sum(&self, r: usize) -> u64 {
        self.0[r].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..3).map(|r| self.0[r][c]).sum()
    }
}

/// `(p_o - p_e) / (1 - p_e)`; 1 for the degenerate case `p_e = p_o = 1`.
pub fn cohen_kappa(m: &ConfusionMatrix) -> Result<f64> {
    let n = m.total();
    if n == 0 {
        return Err(Error::Data("kappa of an empty confusion matrix".into()));
    }
    let n = n as f64;
    let p_o = m.trace() as f64 / n;
    let p_e = (0..3)
        .map(|i| m.row_sum(i) as f64 * m.col_sum(i) as f64)
        .sum::<f64>()
        / (n * n);
    if p_e == 1.0 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class (precision, recall, F1); zero denominators give 0.
pub fn per_class(m: &ConfusionMatrix) -> [(f64, f64, f64); 3] {
    let mut out = [(0.0, 0.0, 0.0); 3];
    for (k, slot) in out.iter_mut().enumerate() {
        let p = ratio(m.0[k][k], m.col_sum(k));
        let r = ratio(m.0[k][k], m.row_sum(k));
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        *slot = (p, r, f);
    }
    out
}

/// Macro-averaged (precision, recall, F1).
pub fn prf(m: &ConfusionMatrix) -> (f64, f64, f64) {
    let pc = per_class(m);
    let mean = |f: fn(&(f64, f64, f64)) -> f64| pc.iter().map(f).sum::<f64>() / 3.0;
    (mean(|x| x.0), mean(|x| x.1), mean(|x| x.2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub kappa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
}

impl FoldMetrics {
    pub fn from_confusion(fold: usize, confusion: ConfusionMatrix) -> Result<FoldMetrics> {
        let (precision, recall, f_score) = prf(&confusion);
        Ok(FoldMetrics {
            fold,
            kappa: cohen_kappa(&confusion)?,
            precision,
            recall,
            f_score,
            accuracy: confusion.trace() as f64 / confusion.total() as f64,
            confusion,
        })
    }
}

/// Headline numbers come from the confusion matrix pooled over folds;
/// per-fold metrics are kept for significance testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub kappa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    /// Micro-averaged P = R = F1 for single-label data.
    pub accuracy: f64,
    pub per_fold: Vec<FoldMetrics>,
}

impl MetricsReport {
    pub fn from_folds(per_fold: Vec<FoldMetrics>) -> Result<MetricsReport> {
        let mut pooled = ConfusionMatrix::default();
        for f in &per_fold {
            pooled.merge(&f.confusion);
        }
        let agg = FoldMetrics::from_confusion(0, pooled)?;
        Ok(MetricsReport {
            confusion: pooled,
            kappa: agg.kappa,
            precision: agg.precision,
            recall: agg.recall,
            f_score: agg.f_score,
            accuracy: agg.accuracy,
            per_fold,
        })
    }

    pub fn fold_kappas(&self) -> Vec<f64> {
        self.per_fold.iter().map(|f| f.kappa).collect()
    }

    pub fn fold_f_scores(&self) -> Vec<f64> {
        self.per_fold.iter().map(|f| f.f_score).collect()
    }
}
