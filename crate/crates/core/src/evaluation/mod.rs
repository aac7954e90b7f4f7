//! Perplexity metrics, cross-validation, synthetic corpora and topic tables.

pub mod cv;
pub mod perplexity;
pub mod synth;
pub mod topics;

pub use cv::{cross_validate, CvReport, FoldMetrics, FoldRow, MeanStd};
pub use perplexity::{fold_in, perplexity, predictive_perplexity, split_tokens, PredictiveReport};
pub use synth::synthesize_corpus;
pub use topics::{top_words, TopicTable};
