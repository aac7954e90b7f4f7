//! Inference backends and the shared convergence loop.
//!
//! All four engines run one full sweep per iteration over the same corpus.
//! The belief-propagation style engines (SBP, RBP, VB) operate on a
//! [`MessageState`]; collapsed Gibbs sampling keeps discrete labels in
//! [`GsAssignments`]. [`train`] evaluates training perplexity after each
//! iteration and stops once two consecutive evaluations differ by less than
//! the convergence threshold.

pub mod bp;
pub mod gibbs;
pub mod vb;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Result, TopicError};
use crate::evaluation::perplexity;
use crate::messages::{Hyperparams, MessageState, TopicModel};
use crate::scheduler::{ResidualSummary, ResidualTable, ScheduleMode};

pub use bp::{bp_update_entry, rbp_iteration, sbp_iteration, SweepTiming};
pub use gibbs::GsAssignments;
pub use vb::{vb_iteration, vb_update_entry};

/// Sub-seed offsets derived from the run seed.
pub mod seed_offset {
    pub const MESSAGES: u64 = 0;
    pub const SCHEDULE: u64 = 1;
    pub const GIBBS: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const HOLDOUT: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Sbp,
    Rbp,
    Gs,
    Vb,
}

impl EngineKind {
    pub const ALL: [EngineKind; 4] = [EngineKind::Sbp, EngineKind::Rbp, EngineKind::Gs, EngineKind::Vb];

    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Sbp => "sbp",
            EngineKind::Rbp => "rbp",
            EngineKind::Gs => "gs",
            EngineKind::Vb => "vb",
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, EngineKind::Gs)
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sbp" => Ok(EngineKind::Sbp),
            "rbp" => Ok(EngineKind::Rbp),
            "gs" => Ok(EngineKind::Gs),
            "vb" => Ok(EngineKind::Vb),
            _ => Err(TopicError::UnknownEngine(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hyper: Hyperparams,
    pub max_iters: usize,
    pub convergence_threshold: f64,
    pub seed: u64,
    /// Only read by RBP.
    pub schedule_mode: ScheduleMode,
    pub eval_every: usize,
}

impl TrainConfig {
    /// α = β = 0.01, threshold 1, at most 1000 iterations, word schedule,
    /// perplexity after every iteration.
    pub fn new(num_topics: usize) -> Self {
        Self {
            hyper: Hyperparams {
                num_topics,
                alpha: 0.01,
                beta: 0.01,
            },
            max_iters: 1000,
            convergence_threshold: 1.0,
            seed: 0,
            schedule_mode: ScheduleMode::ByWord,
            eval_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.max_iters < 1 {
            return Err(TopicError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.convergence_threshold > 0.0) {
            return Err(TopicError::InvalidConfig(format!(
                "convergence threshold must be positive, got {}",
                self.convergence_threshold
            )));
        }
        if self.eval_every < 1 {
            return Err(TopicError::InvalidConfig("eval_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    /// Cumulative training time, excluding perplexity evaluation.
    pub elapsed_seconds: f64,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FinalState {
    Messages(MessageState),
    Gibbs(GsAssignments),
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub engine: EngineKind,
    pub trace: Vec<TracePoint>,
    pub converged_at: Option<usize>,
    pub iterations: usize,
    pub final_state: FinalState,
    pub final_model: TopicModel,
    pub train_seconds: f64,
    pub eval_seconds: f64,
    /// RBP only: time split between message updates and scheduling.
    pub sweep_timing: SweepTiming,
    /// RBP only: residual summary per iteration.
    pub residuals: Vec<(usize, ResidualSummary)>,
}

impl TrainResult {
    pub fn final_perplexity(&self) -> Option<f64> {
        self.trace.last().map(|p| p.perplexity)
    }
}

enum Backend {
    Sync {
        state: MessageState,
        next: Vec<f64>,
    },
    Residual {
        state: MessageState,
        table: ResidualTable,
    },
    Gibbs {
        labels: GsAssignments,
        rng: ChaCha8Rng,
    },
}

/// A single engine run that advances one iteration at a time.
pub struct Trainer<'c> {
    corpus: &'c Corpus,
    kind: EngineKind,
    config: TrainConfig,
    backend: Backend,
    iteration: usize,
}

impl<'c> Trainer<'c> {
    pub fn new(kind: EngineKind, corpus: &'c Corpus, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let hyper = &config.hyper;
        let backend = match kind {
            EngineKind::Sbp | EngineKind::Vb => Backend::Sync {
                state: MessageState::init_random(corpus, hyper, config.seed + seed_offset::MESSAGES),
                next: Vec::new(),
            },
            EngineKind::Rbp => Backend::Residual {
                state: MessageState::init_random(corpus, hyper, config.seed + seed_offset::MESSAGES),
                table: ResidualTable::new_random(
                    config.schedule_mode,
                    corpus,
                    config.seed + seed_offset::SCHEDULE,
                ),
            },
            EngineKind::Gs => {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed + seed_offset::GIBBS);
                let labels = GsAssignments::init_uniform(corpus, hyper.num_topics, &mut rng);
                Backend::Gibbs { labels, rng }
            }
        };
        Ok(Self {
            corpus,
            kind,
            config,
            backend,
            iteration: 0,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    /// Runs one iteration. Returns the RBP sweep timing (zero for other engines).
    pub fn step(&mut self) -> Result<SweepTiming> {
        let hyper = &self.config.hyper;
        let mut timing = SweepTiming::default();
        match &mut self.backend {
            Backend::Sync { state, next } => {
                let start = Instant::now();
                if self.kind == EngineKind::Vb {
                    vb_iteration(state, self.corpus, hyper, next)?;
                } else {
                    sbp_iteration(state, self.corpus, hyper, next)?;
                }
                timing.update = start.elapsed();
            }
            Backend::Residual { state, table } => {
                timing = rbp_iteration(state, self.corpus, hyper, table)?;
            }
            Backend::Gibbs { labels, rng } => {
                let start = Instant::now();
                labels.sweep(self.corpus, hyper, rng)?;
                timing.update = start.elapsed();
            }
        }
        self.iteration += 1;
        Ok(timing)
    }

    pub fn model(&self) -> TopicModel {
        let hyper = &self.config.hyper;
        match &self.backend {
            Backend::Sync { state, .. } | Backend::Residual { state, .. } => state.topic_model(hyper),
            Backend::Gibbs { labels, .. } => labels.topic_model(hyper),
        }
    }

    pub fn message_state(&self) -> Option<&MessageState> {
        match &self.backend {
            Backend::Sync { state, .. } | Backend::Residual { state, .. } => Some(state),
            Backend::Gibbs { .. } => None,
        }
    }

    pub fn gibbs_state(&self) -> Option<&GsAssignments> {
        match &self.backend {
            Backend::Gibbs { labels, .. } => Some(labels),
            _ => None,
        }
    }

    pub fn residual_table(&self) -> Option<&ResidualTable> {
        match &self.backend {
            Backend::Residual { table, .. } => Some(table),
            _ => None,
        }
    }

    pub fn into_final_state(self) -> FinalState {
        match self.backend {
            Backend::Sync { state, .. } | Backend::Residual { state, .. } => FinalState::Messages(state),
            Backend::Gibbs { labels, .. } => FinalState::Gibbs(labels),
        }
    }
}

/// Convergence rule on two consecutive perplexity evaluations.
pub fn has_converged(previous: f64, current: f64, threshold: f64) -> bool {
    (current - previous).abs() < threshold
}

/// Trains until two consecutive perplexity evaluations differ by less than
/// `config.convergence_threshold`, or `config.max_iters` iterations.
pub fn train(kind: EngineKind, corpus: &Corpus, config: &TrainConfig) -> Result<TrainResult> {
    if corpus.total_tokens() == 0 {
        return Err(TopicError::UndefinedMetric);
    }
    let mut trainer = Trainer::new(kind, corpus, config.clone())?;
    let mut trace = Vec::new();
    let mut residuals = Vec::new();
    let mut train_time = Duration::ZERO;
    let mut eval_time = Duration::ZERO;
    let mut sweep_timing = SweepTiming::default();
    let mut converged_at = None;
    let mut previous: Option<f64> = None;

    for t in 1..=config.max_iters {
        let start = Instant::now();
        let timing = trainer.step()?;
        train_time += start.elapsed();
        sweep_timing += timing;
        if let Some(table) = trainer.residual_table() {
            residuals.push((t, table.summary()));
        }

        if t % config.eval_every != 0 && t != config.max_iters {
            continue;
        }
        let eval_start = Instant::now();
        let perp = perplexity(&trainer.model(), corpus)?;
        eval_time += eval_start.elapsed();
        if !perp.is_finite() {
            return Err(TopicError::NumericalFailure { iteration: t });
        }
        trace.push(TracePoint {
            iteration: t,
            elapsed_seconds: train_time.as_secs_f64(),
            perplexity: perp,
        });
        log::debug!("{kind} iteration {t}: perplexity {perp:.4}");
        if previous.is_some_and(|prev| has_converged(prev, perp, config.convergence_threshold)) {
            converged_at = Some(t);
            break;
        }
        previous = Some(perp);
    }

    let iterations = trainer.iteration();
    let final_model = trainer.model();
    Ok(TrainResult {
        engine: kind,
        trace,
        converged_at,
        iterations,
        final_state: trainer.into_final_state(),
        final_model,
        train_seconds: train_time.as_secs_f64(),
        eval_seconds: eval_time.as_secs_f64(),
        sweep_timing,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_names_round_trip() {
        for kind in EngineKind::ALL {
            assert_eq!(kind.name().parse::<EngineKind>().unwrap(), kind);
        }
        assert!(matches!("cvb0".parse::<EngineKind>(), Err(TopicError::UnknownEngine(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::new(5);
        assert!(c.validate().is_ok());
        c.max_iters = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::new(5);
        c.convergence_threshold = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn defaults_follow_protocol() {
        let c = TrainConfig::new(10);
        assert_eq!((c.hyper.alpha, c.hyper.beta), (0.01, 0.01));
        assert_eq!(c.convergence_threshold, 1.0);
        assert_eq!(c.max_iters, 1000);
        assert_eq!(c.schedule_mode, ScheduleMode::ByWord);
        assert_eq!(c.eval_every, 1);
    }

    #[test]
    fn threshold_rule() {
        assert!(has_converged(1500.4, 1499.5, 1.0));
        assert!(!has_converged(1500.4, 1499.3, 1.0));
    }

    #[test]
    fn single_topic_converges_at_two() {
        let c = Corpus::from_triples(3, 4, [(0, 0, 3), (0, 2, 1), (1, 1, 2), (2, 3, 5), (2, 0, 1)]).unwrap();
        for kind in EngineKind::ALL {
            let r = train(kind, &c, &TrainConfig::new(1)).unwrap();
            assert_eq!(r.converged_at, Some(2), "{kind}");
            assert_eq!(r.trace[0].perplexity, r.trace[1].perplexity, "{kind}");
        }
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let c = Corpus::from_triples(2, 2, []).unwrap();
        assert!(train(EngineKind::Sbp, &c, &TrainConfig::new(2)).is_err());
    }
}
