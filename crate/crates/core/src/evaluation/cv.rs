use rayon::prelude::*;

use crate::corpus::{Corpus, FoldSplit};
use crate::engines::{seed_offset, train, EngineKind, TrainConfig};
use crate::error::{Result, TopicError};
use crate::evaluation::perplexity::predictive_perplexity;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub predictive_perplexity: f64,
    pub converged_at: Option<usize>,
    pub train_seconds: f64,
    pub skipped_docs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldRow {
    pub fold_id: usize,
    /// `Err` carries the failure message of a fold that could not be trained or scored.
    pub outcome: std::result::Result<FoldMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for fewer than two values.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub engine: EngineKind,
    pub rows: Vec<FoldRow>,
}

impl CvReport {
    fn metrics(&self) -> impl Iterator<Item = &FoldMetrics> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failed_folds(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn predictive_perplexity(&self) -> MeanStd {
        MeanStd::of(&self.metrics().map(|m| m.predictive_perplexity).collect::<Vec<_>>())
    }

    /// Over the folds that converged.
    pub fn converged_at(&self) -> MeanStd {
        MeanStd::of(
            &self
                .metrics()
                .filter_map(|m| m.converged_at.map(|c| c as f64))
                .collect::<Vec<_>>(),
        )
    }

    pub fn train_seconds(&self) -> MeanStd {
        MeanStd::of(&self.metrics().map(|m| m.train_seconds).collect::<Vec<_>>())
    }
}

fn run_fold(corpus: &Corpus, engine: EngineKind, config: &TrainConfig, fold: &FoldSplit) -> Result<FoldMetrics> {
    let train_docs = corpus.subset(&fold.train_doc_ids)?;
    let test_docs = corpus.subset(&fold.test_doc_ids)?;
    let result = train(engine, &train_docs, config)?;
    let report = predictive_perplexity(
        &result.final_model.phi,
        &test_docs,
        &config.hyper,
        config.seed + seed_offset::HOLDOUT,
    )?;
    Ok(FoldMetrics {
        predictive_perplexity: report.perplexity,
        converged_at: result.converged_at,
        train_seconds: result.train_seconds,
        skipped_docs: report.skipped_docs,
    })
}

/// Trains on each fold's training documents and scores its test documents.
/// Folds are drawn with `config.seed`, run independently (on up to `jobs`
/// threads), and reported in fold order.
pub fn cross_validate(
    corpus: &Corpus,
    engine: EngineKind,
    config: &TrainConfig,
    n_folds: usize,
    jobs: usize,
) -> Result<CvReport> {
    config.validate()?;
    let folds = corpus.split_folds(n_folds, config.seed + seed_offset::FOLDS)?;
    let run = |fold: &FoldSplit| FoldRow {
        fold_id: fold.fold_id,
        outcome: run_fold(corpus, engine, config, fold).map_err(|e| e.to_string()),
    };
    let rows = if jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TopicError::InvalidConfig(e.to_string()))?
            .install(|| folds.par_iter().map(run).collect())
    } else {
        folds.iter().map(run).collect()
    };
    Ok(CvReport { engine, rows })
}
