//! Python bindings: corpora, training, evaluation and cross-validation.

use std::fs::File;
use std::io::BufReader;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use topicforge::evaluation::cv::MeanStd;
use topicforge::{EngineKind, Hyperparams, ScheduleMode, TopicError, TopicModel, TrainConfig};

fn to_py(e: TopicError) -> PyErr {
    match e {
        TopicError::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn rows(flat: &[f64], k: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(k).map(<[f64]>::to_vec).collect()
}

/// Flattens a list of equal-length rows; returns the row width.
fn flatten(matrix: &[Vec<f64>]) -> PyResult<(usize, Vec<f64>)> {
    let k = matrix.first().map_or(0, Vec::len);
    if k == 0 || matrix.iter().any(|r| r.len() != k) {
        return Err(PyValueError::new_err("matrix rows must be non-empty and of equal length"));
    }
    Ok((k, matrix.concat()))
}

fn engine(name: &str) -> PyResult<EngineKind> {
    name.parse().map_err(to_py)
}

/// A sparse document-word count matrix.
#[pyclass(name = "Corpus", module = "topicforge", frozen)]
struct PyCorpus {
    inner: topicforge::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Reads a UCI docword file and an optional vocabulary file.
    #[staticmethod]
    #[pyo3(signature = (path, vocab = None))]
    fn from_docword(path: &str, vocab: Option<&str>) -> PyResult<Self> {
        let open = |p: &str| File::open(p).map(BufReader::new).map_err(|e| to_py(e.into()));
        let docword = open(path)?;
        let vocab = vocab.map(open).transpose()?;
        let inner = topicforge::Corpus::parse_docword(docword, vocab).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Builds a corpus from 0-based `(doc, word, count)` triples.
    #[staticmethod]
    fn from_triples(num_docs: usize, vocab_size: usize, triples: Vec<(usize, usize, u32)>) -> PyResult<Self> {
        let inner = topicforge::Corpus::from_triples(num_docs, vocab_size, triples).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (num_docs = 200, vocab_size = 500, true_topics = 10, tokens_per_doc = 100, seed = 0))]
    fn synthesize(
        num_docs: usize,
        vocab_size: usize,
        true_topics: usize,
        tokens_per_doc: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let inner =
            topicforge::synthesize_corpus(num_docs, vocab_size, true_topics, tokens_per_doc, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn num_docs(&self) -> usize {
        self.inner.num_docs()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    #[getter]
    fn num_entries(&self) -> usize {
        self.inner.num_entries()
    }

    #[getter]
    fn total_tokens(&self) -> u64 {
        self.inner.total_tokens()
    }

    #[getter]
    fn vocab(&self) -> Vec<String> {
        (0..self.inner.vocab_size()).map(|w| self.inner.word_name(w)).collect()
    }

    /// 0-based `(doc, word, count)` triples in storage order.
    fn triples(&self) -> Vec<(usize, usize, u32)> {
        self.inner.entries().iter().map(|e| (e.doc, e.word, e.count)).collect()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats().map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("num_docs", s.num_docs)?;
        d.set_item("vocab_size", s.vocab_size)?;
        d.set_item("mean_tokens_per_doc", s.mean_tokens_per_doc)?;
        d.set_item("mean_distinct_words_per_doc", s.mean_distinct_words_per_doc)?;
        Ok(d)
    }

    /// `(fold_id, train_doc_ids, test_doc_ids)` for each fold.
    fn split_folds(&self, n_folds: usize, seed: u64) -> PyResult<Vec<(usize, Vec<usize>, Vec<usize>)>> {
        let folds = self.inner.split_folds(n_folds, seed).map_err(to_py)?;
        Ok(folds
            .into_iter()
            .map(|f| (f.fold_id, f.train_doc_ids, f.test_doc_ids))
            .collect())
    }

    fn subset(&self, doc_ids: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.subset(&doc_ids).map_err(to_py)?,
        })
    }

    fn write_docword(&self, path: &str) -> PyResult<()> {
        let f = File::create(path)?;
        self.inner.write_docword(std::io::BufWriter::new(f))?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Corpus(num_docs={}, vocab_size={}, num_entries={})",
            self.inner.num_docs(),
            self.inner.vocab_size(),
            self.inner.num_entries()
        )
    }
}

/// Outcome of one training run.
#[pyclass(name = "TrainResult", module = "topicforge", frozen)]
struct PyTrainResult {
    inner: topicforge::TrainResult,
}

#[pymethods]
impl PyTrainResult {
    #[getter]
    fn engine(&self) -> &'static str {
        self.inner.engine.name()
    }

    #[getter]
    fn converged_at(&self) -> Option<usize> {
        self.inner.converged_at
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn num_topics(&self) -> usize {
        self.inner.final_model.num_topics
    }

    /// `(iteration, elapsed_seconds, perplexity)` per evaluation.
    #[getter]
    fn trace(&self) -> Vec<(usize, f64, f64)> {
        self.inner
            .trace
            .iter()
            .map(|p| (p.iteration, p.elapsed_seconds, p.perplexity))
            .collect()
    }

    #[getter]
    fn final_perplexity(&self) -> Option<f64> {
        self.inner.final_perplexity()
    }

    #[getter]
    fn train_seconds(&self) -> f64 {
        self.inner.train_seconds
    }

    /// `D x K` document-topic proportions.
    #[getter]
    fn theta(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.final_model.theta, self.inner.final_model.num_topics)
    }

    /// `W x K` word-topic probabilities.
    #[getter]
    fn phi(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.final_model.phi, self.inner.final_model.num_topics)
    }

    /// `(iteration, sum, max, argmax_unit)` residual summaries (residual BP only).
    #[getter]
    fn residuals(&self) -> Vec<(usize, f64, f64, usize)> {
        self.inner
            .residuals
            .iter()
            .map(|(t, r)| (*t, r.sum, r.max, r.argmax))
            .collect()
    }

    #[pyo3(signature = (vocab, n = 10))]
    fn top_words(&self, vocab: Vec<String>, n: usize) -> Vec<Vec<(String, f64)>> {
        let m = &self.inner.final_model;
        topicforge::top_words(&m.phi, m.num_topics, &vocab, n).topics
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainResult(engine={}, converged_at={:?}, iterations={})",
            self.inner.engine, self.inner.converged_at, self.inner.iterations
        )
    }
}

#[allow(clippy::too_many_arguments)]
fn config(
    topics: usize,
    alpha: f64,
    beta: f64,
    max_iters: usize,
    threshold: f64,
    seed: u64,
    schedule: &str,
    eval_every: usize,
) -> PyResult<TrainConfig> {
    let mut c = TrainConfig::new(topics);
    c.hyper = Hyperparams::new(topics, alpha, beta).map_err(to_py)?;
    c.max_iters = max_iters;
    c.convergence_threshold = threshold;
    c.seed = seed;
    c.schedule_mode = schedule.parse::<ScheduleMode>().map_err(to_py)?;
    c.eval_every = eval_every;
    c.validate().map_err(to_py)?;
    Ok(c)
}

/// Trains one engine (`sbp`, `rbp`, `gs` or `vb`) until convergence or `max_iters`.
#[pyfunction]
#[pyo3(signature = (
    corpus, engine = "rbp", topics = 10, alpha = 0.01, beta = 0.01, max_iters = 1000,
    threshold = 1.0, seed = 0, schedule = "word", eval_every = 1
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    corpus: &PyCorpus,
    engine: &str,
    topics: usize,
    alpha: f64,
    beta: f64,
    max_iters: usize,
    threshold: f64,
    seed: u64,
    schedule: &str,
    eval_every: usize,
) -> PyResult<PyTrainResult> {
    let kind = self::engine(engine)?;
    let cfg = config(topics, alpha, beta, max_iters, threshold, seed, schedule, eval_every)?;
    let inner = py
        .detach(|| topicforge::train(kind, &corpus.inner, &cfg))
        .map_err(to_py)?;
    Ok(PyTrainResult { inner })
}

/// Training perplexity of a `D x K` theta and `W x K` phi on `corpus`.
#[pyfunction]
fn perplexity(corpus: &PyCorpus, theta: Vec<Vec<f64>>, phi: Vec<Vec<f64>>) -> PyResult<f64> {
    let (k, theta) = flatten(&theta)?;
    let (k2, phi) = flatten(&phi)?;
    if k != k2 {
        return Err(PyValueError::new_err(format!("theta has {k} topics, phi has {k2}")));
    }
    let model = TopicModel {
        num_topics: k,
        theta,
        phi,
    };
    topicforge::perplexity(&model, &corpus.inner).map_err(to_py)
}

/// Fold-in predictive perplexity of `test` documents under a fixed `W x K` phi.
#[pyfunction]
#[pyo3(signature = (phi, test, alpha = 0.01, beta = 0.01, seed = 0))]
fn predictive_perplexity<'py>(
    py: Python<'py>,
    phi: Vec<Vec<f64>>,
    test: &PyCorpus,
    alpha: f64,
    beta: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let (k, phi) = flatten(&phi)?;
    let hyper = Hyperparams::new(k, alpha, beta).map_err(to_py)?;
    let r = topicforge::predictive_perplexity(&phi, &test.inner, &hyper, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("perplexity", r.perplexity)?;
    d.set_item("skipped_docs", r.skipped_docs)?;
    d.set_item("held_out_tokens", r.held_out_tokens)?;
    Ok(d)
}

/// The `n` most probable words of each topic of a `W x K` phi.
#[pyfunction]
#[pyo3(signature = (phi, vocab, n = 10))]
fn top_words(phi: Vec<Vec<f64>>, vocab: Vec<String>, n: usize) -> PyResult<Vec<Vec<(String, f64)>>> {
    let (k, phi) = flatten(&phi)?;
    Ok(topicforge::top_words(&phi, k, &vocab, n).topics)
}

fn mean_std<'py>(py: Python<'py>, m: MeanStd) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean", m.mean)?;
    d.set_item("std", m.std)?;
    Ok(d)
}

/// N-fold cross-validation of one engine by predictive perplexity.
#[pyfunction]
#[pyo3(signature = (
    corpus, engine = "rbp", folds = 10, topics = 10, alpha = 0.01, beta = 0.01,
    max_iters = 1000, threshold = 1.0, seed = 0, jobs = 1
))]
#[allow(clippy::too_many_arguments)]
fn cross_validate<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    engine: &str,
    folds: usize,
    topics: usize,
    alpha: f64,
    beta: f64,
    max_iters: usize,
    threshold: f64,
    seed: u64,
    jobs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let kind = self::engine(engine)?;
    let cfg = config(topics, alpha, beta, max_iters, threshold, seed, "word", 1)?;
    let report = py
        .detach(|| topicforge::cross_validate(&corpus.inner, kind, &cfg, folds, jobs))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("engine", kind.name())?;
    d.set_item("predictive_perplexity", mean_std(py, report.predictive_perplexity())?)?;
    d.set_item("converged_at", mean_std(py, report.converged_at())?)?;
    d.set_item("failed_folds", report.failed_folds())?;
    let mut per_fold = Vec::new();
    for row in &report.rows {
        let r = PyDict::new(py);
        r.set_item("fold", row.fold_id)?;
        match &row.outcome {
            Ok(m) => {
                r.set_item("predictive_perplexity", m.predictive_perplexity)?;
                r.set_item("converged_at", m.converged_at)?;
                r.set_item("train_seconds", m.train_seconds)?;
            }
            Err(msg) => r.set_item("error", msg)?,
        }
        per_fold.push(r);
    }
    d.set_item("folds", per_fold)?;
    Ok(d)
}

#[pyfunction]
fn digamma(x: f64) -> f64 {
    topicforge::math::digamma(x)
}

#[pymodule]
#[pyo3(name = "topicforge")]
pub fn topicforge_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(perplexity, m)?)?;
    m.add_function(wrap_pyfunction!(predictive_perplexity, m)?)?;
    m.add_function(wrap_pyfunction!(top_words, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(digamma, m)?)?;
    m.add("ENGINES", EngineKind::ALL.map(EngineKind::name).to_vec())?;
    Ok(())
}
