//! Latent Dirichlet allocation trained by message passing.
//!
//! Four interchangeable engines share one corpus representation and one
//! convergence loop:
//!
//! * synchronous belief propagation (`sbp`),
//! * residual belief propagation with a dynamic word, document or entry
//!   schedule (`rbp`),
//! * collapsed Gibbs sampling (`gs`),
//! * variational Bayes with digamma updates (`vb`).
//!
//! ```
//! use topicforge::{synthesize_corpus, train, EngineKind, TrainConfig};
//!
//! let corpus = synthesize_corpus(40, 60, 3, 30, 7).unwrap();
//! let mut config = TrainConfig::new(3);
//! config.max_iters = 50;
//! let result = train(EngineKind::Rbp, &corpus, &config).unwrap();
//! assert!(result.final_perplexity().unwrap() < 60.0);
//! ```

pub mod cli;
pub mod corpus;
pub mod engines;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod math;
pub mod messages;
pub mod scheduler;

pub use corpus::{Corpus, CorpusStats, Entry, FoldSplit};
pub use engines::{train, EngineKind, FinalState, GsAssignments, TracePoint, TrainConfig, TrainResult, Trainer};
pub use error::{Result, TopicError};
pub use evaluation::{
    cross_validate, perplexity, predictive_perplexity, synthesize_corpus, top_words, CvReport, TopicTable,
};
pub use messages::{Hyperparams, MessageState, TopicModel};
pub use scheduler::{entry_residual, ResidualTable, ScheduleMode};
