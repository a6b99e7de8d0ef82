//! Python bindings over the `argctx` library.

use std::collections::BTreeMap;
use std::path::PathBuf;

use argctx::context::{local_context, speaker_context, LocalPosition};
use argctx::corpus::{make_folds, parse_corpus, parse_csv_bytes, validate_corpus, CorpusFormat, Discussion};
use argctx::embeddings::average_pool as pool;
use argctx::experiment::{cross_validate as run_cv, ExperimentConfig, NoObserver, Resources};
use argctx::features::tokenize as tok;
use argctx::synth::SynthConfig;
use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

fn err(e: argctx::Error) -> PyErr {
    match e {
        argctx::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py(py: Python<'_>, obj: Option<&Bound<'_, PyAny>>) -> PyResult<String> {
    match obj {
        None => Ok("{}".into()),
        Some(o) => py.import("json")?.call_method1("dumps", (o,))?.extract(),
    }
}

fn position(name: &str) -> PyResult<LocalPosition> {
    LocalPosition::ALL
        .into_iter()
        .find(|p| p.as_str() == name)
        .ok_or_else(|| PyValueError::new_err(format!("unknown local position {name:?}")))
}

/// A parsed corpus of discussions.
#[pyclass(name = "Corpus", frozen)]
struct PyCorpus {
    inner: argctx::corpus::Corpus,
}

impl PyCorpus {
    fn discussion(&self, id: &str) -> PyResult<&Discussion> {
        self.inner
            .discussion(id)
            .ok_or_else(|| PyKeyError::new_err(format!("no discussion {id:?}")))
    }
}

#[pymethods]
impl PyCorpus {
    /// Reads a CSV or JSONL corpus file; the format follows the extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PyCorpus> {
        let inner = parse_corpus(&path, CorpusFormat::from_path(&path)).map_err(err)?;
        Ok(PyCorpus { inner })
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<PyCorpus> {
        Ok(PyCorpus {
            inner: parse_csv_bytes(text.as_bytes()).map_err(err)?,
        })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __len__(&self) -> usize {
        self.inner.adu_count()
    }

    fn discussion_ids(&self) -> Vec<String> {
        self.inner.discussions().iter().map(|d| d.id.clone()).collect()
    }

    /// `(global_index, speaker_id, text, label)` for each ADU of a discussion.
    fn adus(&self, discussion_id: &str) -> PyResult<Vec<(usize, String, String, Option<String>)>> {
        Ok(self
            .discussion(discussion_id)?
            .adus
            .iter()
            .map(|a| {
                (
                    a.global_index,
                    a.speaker_id.clone(),
                    a.text.clone(),
                    a.label.map(|l| l.as_str().to_string()),
                )
            })
            .collect())
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &validate_corpus(&self.inner))
    }

    /// Discussion id to fold index.
    fn folds(&self, k: usize, seed: u64) -> PyResult<BTreeMap<String, usize>> {
        Ok(make_folds(&self.inner, k, seed).map_err(err)?.assignments)
    }

    /// Indices of the local context of one ADU, in discussion order.
    #[pyo3(signature = (discussion_id, index, size, position = "prior"))]
    fn local_context(&self, discussion_id: &str, index: usize, size: usize, position: &str) -> PyResult<Vec<usize>> {
        let d = self.discussion(discussion_id)?;
        Ok(local_context(d, index, size, self::position(position)?).map_err(err)?.indices())
    }

    /// Indices of the speaker's most recent earlier ADUs, oldest first.
    fn speaker_context(&self, discussion_id: &str, index: usize, k: usize) -> PyResult<Vec<usize>> {
        let d = self.discussion(discussion_id)?;
        Ok(speaker_context(d, index, k).map_err(err)?.iter().map(|a| a.global_index).collect())
    }
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    tok(text).into_iter().map(|t| t.surface).collect()
}

#[pyfunction]
fn average_pool(vectors: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    pool(&vectors).map_err(err)
}

/// Cohen's kappa of a 3×3 confusion matrix (rows gold, columns predicted).
#[pyfunction]
fn cohen_kappa(matrix: [[u64; 3]; 3]) -> PyResult<f64> {
    argctx::experiment::cohen_kappa(&argctx::experiment::ConfusionMatrix(matrix)).map_err(err)
}

/// Macro-averaged (precision, recall, F-score).
#[pyfunction]
fn prf(matrix: [[u64; 3]; 3]) -> (f64, f64, f64) {
    argctx::experiment::prf(&argctx::experiment::ConfusionMatrix(matrix))
}

/// Exact two-sided paired sign-flip p-value.
#[pyfunction]
fn significance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    argctx::experiment::significance(&a, &b).map_err(err)
}

/// Generates a synthetic corpus from a dict of generator settings.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn synth(py: Python<'_>, config: Option<&Bound<'_, PyAny>>) -> PyResult<PyCorpus> {
    let cfg = SynthConfig::from_json(&from_py(py, config)?).map_err(err)?;
    Ok(PyCorpus {
        inner: argctx::synth::generate(&cfg).map_err(err)?,
    })
}

/// Cross-validates the experiment described by a config file and returns the
/// metrics report.
#[pyfunction]
#[pyo3(signature = (config_path, jobs = 1))]
fn cross_validate<'py>(py: Python<'py>, config_path: PathBuf, jobs: usize) -> PyResult<Bound<'py, PyAny>> {
    let report = py
        .detach(|| {
            let cfg = ExperimentConfig::load(&config_path)?;
            let corpus = cfg.load_corpus()?;
            let res = Resources::load(&cfg, &corpus)?;
            run_cv(&cfg, &corpus, &res, jobs, &NoObserver)
        })
        .map_err(err)?;
    to_py(py, &report.report)
}

#[pymodule]
fn argctx_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(average_pool, m)?)?;
    m.add_function(wrap_pyfunction!(cohen_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(prf, m)?)?;
    m.add_function(wrap_pyfunction!(significance, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    Ok(())
}
