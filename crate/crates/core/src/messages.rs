//! Per-entry topic messages and the cached topic accumulators.
//!
//! For every nonzero cell `(w, d)` the state holds a normalized K-vector
//! `mu[w,d]`. Three accumulators make the neighborhood sums O(K) per entry:
//!
//! * `doc_topic[d][k]  = sum_w x[w,d] * mu[w,d][k]`
//! * `word_topic[w][k] = sum_d x[w,d] * mu[w,d][k]`
//! * `topic_total[k]   = sum_w word_topic[w][k]`
//!
//! Message storage follows corpus entry order (word-major), so the messages of
//! one word are contiguous.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Result, TopicError};

/// Tolerance for a message to count as normalized.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Exclusion counts below zero by less than this are rounding drift and clamp to 0.
pub const CLAMP_TOL: f64 = 1e-9;

/// Accumulators are rebuilt from the messages at this iteration cadence.
pub const REBUILD_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(num_topics: usize, alpha: f64, beta: f64) -> Result<Self> {
        let h = Self {
            num_topics,
            alpha,
            beta,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_topics < 1 {
            return Err(TopicError::InvalidHyperparams("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(TopicError::InvalidHyperparams(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(TopicError::InvalidHyperparams(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// The three exclusion vectors around one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// `doc_topic[d] - x * mu[w,d]`
    pub doc_excl: Vec<f64>,
    /// `word_topic[w] - x * mu[w,d]`
    pub word_excl: Vec<f64>,
    /// `topic_total - x * mu[w,d]`
    pub word_excl_totals: Vec<f64>,
}

impl Neighborhood {
    pub fn zeros(k: usize) -> Self {
        Self {
            doc_excl: vec![0.0; k],
            word_excl: vec![0.0; k],
            word_excl_totals: vec![0.0; k],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    num_topics: usize,
    messages: Vec<f64>,
    doc_topic: Vec<f64>,
    word_topic: Vec<f64>,
    topic_total: Vec<f64>,
    /// Completed iterations.
    pub iteration: usize,
}

fn clamp_excl(v: f64, what: &str) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -CLAMP_TOL {
        Ok(0.0)
    } else {
        Err(TopicError::Consistency(format!(
            "{what} exclusion count is {v:e}"
        )))
    }
}

impl MessageState {
    /// Draws every message i.i.d. uniform(0,1) per component, normalizes it,
    /// and builds the accumulators.
    pub fn init_random(corpus: &Corpus, hyper: &Hyperparams, seed: u64) -> Self {
        let k = hyper.num_topics;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut messages = vec![0.0; corpus.num_entries() * k];
        for msg in messages.chunks_exact_mut(k) {
            for m in msg.iter_mut() {
                *m = rng.random::<f64>();
            }
            let sum: f64 = msg.iter().sum();
            if sum > 0.0 {
                msg.iter_mut().for_each(|m| *m /= sum);
            } else {
                msg.iter_mut().for_each(|m| *m = 1.0 / k as f64);
            }
        }
        Self::from_messages(corpus, k, messages)
    }

    /// Wraps explicit messages (entry-major, `K` per entry) and builds accumulators.
    pub fn from_messages(corpus: &Corpus, num_topics: usize, messages: Vec<f64>) -> Self {
        assert_eq!(messages.len(), corpus.num_entries() * num_topics);
        let mut state = Self {
            num_topics,
            messages,
            doc_topic: vec![0.0; corpus.num_docs() * num_topics],
            word_topic: vec![0.0; corpus.vocab_size() * num_topics],
            topic_total: vec![0.0; num_topics],
            iteration: 0,
        };
        state.rebuild_accumulators(corpus);
        state
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn message(&self, entry: usize) -> &[f64] {
        let k = self.num_topics;
        &self.messages[entry * k..(entry + 1) * k]
    }

    pub fn messages(&self) -> &[f64] {
        &self.messages
    }

    pub fn doc_topic(&self) -> &[f64] {
        &self.doc_topic
    }

    pub fn word_topic(&self) -> &[f64] {
        &self.word_topic
    }

    pub fn topic_total(&self) -> &[f64] {
        &self.topic_total
    }

    /// Recomputes all accumulators from the messages.
    pub fn rebuild_accumulators(&mut self, corpus: &Corpus) {
        let (doc_topic, word_topic, topic_total) = self.recompute_accumulators(corpus);
        self.doc_topic = doc_topic;
        self.word_topic = word_topic;
        self.topic_total = topic_total;
    }

    /// From-scratch accumulators `(doc_topic, word_topic, topic_total)`.
    pub fn recompute_accumulators(&self, corpus: &Corpus) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.num_topics;
        let mut doc_topic = vec![0.0; corpus.num_docs() * k];
        let mut word_topic = vec![0.0; corpus.vocab_size() * k];
        let mut topic_total = vec![0.0; k];
        for (e, msg) in corpus.entries().iter().zip(self.messages.chunks_exact(k)) {
            let x = e.count as f64;
            let dt = &mut doc_topic[e.doc * k..(e.doc + 1) * k];
            let wt = &mut word_topic[e.word * k..(e.word + 1) * k];
            for t in 0..k {
                dt[t] += x * msg[t];
                wt[t] += x * msg[t];
            }
        }
        for row in word_topic.chunks_exact(k) {
            for t in 0..k {
                topic_total[t] += row[t];
            }
        }
        (doc_topic, word_topic, topic_total)
    }

    /// Largest absolute per-cell gap between the cached and recomputed accumulators.
    pub fn accumulator_drift(&self, corpus: &Corpus) -> f64 {
        let (dt, wt, tt) = self.recompute_accumulators(corpus);
        let gap = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        gap(&dt, &self.doc_topic)
            .max(gap(&wt, &self.word_topic))
            .max(gap(&tt, &self.topic_total))
    }

    /// Fills `out` with the exclusion vectors of entry `idx`.
    pub fn neighborhood_into(
        &self,
        corpus: &Corpus,
        idx: usize,
        out: &mut Neighborhood,
    ) -> Result<()> {
        let e = corpus.entry(idx).ok_or(TopicError::UnknownEntry(idx))?;
        let k = self.num_topics;
        let x = e.count as f64;
        let msg = self.message(idx);
        let dt = &self.doc_topic[e.doc * k..(e.doc + 1) * k];
        let wt = &self.word_topic[e.word * k..(e.word + 1) * k];
        for t in 0..k {
            let own = x * msg[t];
            out.doc_excl[t] = clamp_excl(dt[t] - own, "document")?;
            out.word_excl[t] = clamp_excl(wt[t] - own, "word")?;
            out.word_excl_totals[t] = clamp_excl(self.topic_total[t] - own, "topic total")?;
        }
        Ok(())
    }

    pub fn neighborhood(&self, corpus: &Corpus, idx: usize) -> Result<Neighborhood> {
        let mut out = Neighborhood::zeros(self.num_topics);
        self.neighborhood_into(corpus, idx, &mut out)?;
        Ok(out)
    }

    /// Replaces the message of entry `idx`, adjusting every accumulator by
    /// `x * (new - old)`. The replaced message is written to `old_out`.
    pub fn apply_message_into(
        &mut self,
        corpus: &Corpus,
        idx: usize,
        new_msg: &[f64],
        old_out: &mut [f64],
    ) -> Result<()> {
        let k = self.num_topics;
        let e = *corpus.entry(idx).ok_or(TopicError::UnknownEntry(idx))?;
        if new_msg.len() != k {
            return Err(TopicError::Contract(format!(
                "message has length {}, expected {k}",
                new_msg.len()
            )));
        }
        let sum: f64 = new_msg.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(TopicError::Contract(format!(
                "message for entry {idx} sums to {sum}"
            )));
        }
        let x = e.count as f64;
        let msg = &mut self.messages[idx * k..(idx + 1) * k];
        old_out.copy_from_slice(msg);
        msg.copy_from_slice(new_msg);
        let dt = &mut self.doc_topic[e.doc * k..(e.doc + 1) * k];
        let wt = &mut self.word_topic[e.word * k..(e.word + 1) * k];
        for t in 0..k {
            let delta = x * (new_msg[t] - old_out[t]);
            dt[t] += delta;
            wt[t] += delta;
            self.topic_total[t] += delta;
        }
        Ok(())
    }

    /// Replaces the message of entry `idx` like
    /// [`apply_message_into`](Self::apply_message_into) and returns the
    /// entry's residual `x * ||new - old||_1`, computed in the same pass.
    pub fn apply_message_residual(&mut self, corpus: &Corpus, idx: usize, new_msg: &[f64]) -> Result<f64> {
        let k = self.num_topics;
        let e = *corpus.entry(idx).ok_or(TopicError::UnknownEntry(idx))?;
        if new_msg.len() != k {
            return Err(TopicError::Contract(format!(
                "message has length {}, expected {k}",
                new_msg.len()
            )));
        }
        let sum: f64 = new_msg.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(TopicError::Contract(format!(
                "message for entry {idx} sums to {sum}"
            )));
        }
        let x = e.count as f64;
        let msg = &mut self.messages[idx * k..(idx + 1) * k];
        let dt = &mut self.doc_topic[e.doc * k..(e.doc + 1) * k];
        let wt = &mut self.word_topic[e.word * k..(e.word + 1) * k];
        let mut l1 = 0.0;
        for t in 0..k {
            let diff = new_msg[t] - msg[t];
            l1 += diff.abs();
            let delta = x * diff;
            dt[t] += delta;
            wt[t] += delta;
            self.topic_total[t] += delta;
            msg[t] = new_msg[t];
        }
        Ok(x * l1)
    }

    /// Like [`apply_message_into`](Self::apply_message_into), returning the old message.
    pub fn apply_message(&mut self, corpus: &Corpus, idx: usize, new_msg: &[f64]) -> Result<Vec<f64>> {
        let mut old = vec![0.0; self.num_topics];
        self.apply_message_into(corpus, idx, new_msg, &mut old)?;
        Ok(old)
    }

    /// Swaps in a complete message buffer (synchronous engines) and rebuilds.
    pub(crate) fn replace_all(&mut self, corpus: &Corpus, messages: &mut Vec<f64>) {
        debug_assert_eq!(messages.len(), self.messages.len());
        std::mem::swap(&mut self.messages, messages);
        self.rebuild_accumulators(corpus);
    }

    pub fn estimate_theta(&self, hyper: &Hyperparams) -> Vec<f64> {
        estimate_theta(self.num_topics, &self.doc_topic, hyper.alpha)
    }

    pub fn estimate_phi(&self, hyper: &Hyperparams) -> Vec<f64> {
        estimate_phi(self.num_topics, &self.word_topic, hyper.beta)
    }

    pub fn topic_model(&self, hyper: &Hyperparams) -> TopicModel {
        TopicModel {
            num_topics: self.num_topics,
            theta: self.estimate_theta(hyper),
            phi: self.estimate_phi(hyper),
        }
    }
}

/// `theta[d][k] = (doc_topic[d][k] + alpha) / sum_k (doc_topic[d][k] + alpha)`
pub fn estimate_theta(k: usize, doc_topic: &[f64], alpha: f64) -> Vec<f64> {
    let mut theta = Vec::with_capacity(doc_topic.len());
    for row in doc_topic.chunks_exact(k) {
        let norm: f64 = row.iter().map(|v| v + alpha).sum();
        theta.extend(row.iter().map(|v| (v + alpha) / norm));
    }
    theta
}

/// `phi[w][k] = (word_topic[w][k] + beta) / sum_w (word_topic[w][k] + beta)`
pub fn estimate_phi(k: usize, word_topic: &[f64], beta: f64) -> Vec<f64> {
    let mut norm = vec![0.0; k];
    for row in word_topic.chunks_exact(k) {
        for t in 0..k {
            norm[t] += row[t] + beta;
        }
    }
    let mut phi = Vec::with_capacity(word_topic.len());
    for row in word_topic.chunks_exact(k) {
        phi.extend((0..k).map(|t| (row[t] + beta) / norm[t]));
    }
    phi
}

/// Document-topic and word-topic multinomials, both stored row-major with `K` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub num_topics: usize,
    /// `D x K`, rows sum to 1.
    pub theta: Vec<f64>,
    /// `W x K`, columns sum to 1.
    pub phi: Vec<f64>,
}

impl TopicModel {
    pub fn from_accumulators(
        num_topics: usize,
        doc_topic: &[f64],
        word_topic: &[f64],
        hyper: &Hyperparams,
    ) -> Self {
        Self {
            num_topics,
            theta: estimate_theta(num_topics, doc_topic, hyper.alpha),
            phi: estimate_phi(num_topics, word_topic, hyper.beta),
        }
    }

    pub fn uniform(num_docs: usize, vocab_size: usize, num_topics: usize) -> Self {
        Self {
            num_topics,
            theta: vec![1.0 / num_topics as f64; num_docs * num_topics],
            phi: vec![1.0 / vocab_size as f64; vocab_size * num_topics],
        }
    }

    pub fn num_docs(&self) -> usize {
        self.theta.len() / self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.len() / self.num_topics
    }

    pub fn theta_row(&self, doc: usize) -> &[f64] {
        &self.theta[doc * self.num_topics..(doc + 1) * self.num_topics]
    }

    pub fn phi_row(&self, word: usize) -> &[f64] {
        &self.phi[word * self.num_topics..(word + 1) * self.num_topics]
    }

    /// Largest deviation from 1 over theta row sums and phi column sums.
    pub fn normalization_error(&self) -> f64 {
        let k = self.num_topics;
        let rows = self
            .theta
            .chunks_exact(k)
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        let mut cols = vec![0.0; k];
        for r in self.phi.chunks_exact(k) {
            for t in 0..k {
                cols[t] += r[t];
            }
        }
        cols.iter().map(|c| (c - 1.0).abs()).fold(rows, f64::max)
    }
}
