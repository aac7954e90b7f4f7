//! Collapsed Gibbs sampling over per-token topic labels.

use rand::Rng;

use crate::corpus::Corpus;
use crate::error::{Result, TopicError};
use crate::messages::{Hyperparams, TopicModel};

/// Topic labels for every token occurrence plus the derived count tables.
///
/// Tokens are laid out in corpus entry order, each entry expanded to `x[w,d]`
/// consecutive tokens. Labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct GsAssignments {
    num_topics: usize,
    labels: Vec<u32>,
    doc_topic: Vec<u32>,
    word_topic: Vec<u32>,
    topic_total: Vec<u32>,
}

impl GsAssignments {
    /// Labels drawn uniformly from `0..K`.
    pub fn init_uniform<R: Rng>(corpus: &Corpus, num_topics: usize, rng: &mut R) -> Self {
        let labels = (0..corpus.total_tokens())
            .map(|_| rng.random_range(0..num_topics as u32))
            .collect();
        Self::from_labels(corpus, num_topics, labels).expect("labels drawn in range")
    }

    pub fn from_labels(corpus: &Corpus, num_topics: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() as u64 != corpus.total_tokens() {
            return Err(TopicError::Contract(format!(
                "{} labels for {} tokens",
                labels.len(),
                corpus.total_tokens()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&z| z as usize >= num_topics) {
            return Err(TopicError::Contract(format!("label {bad} outside 0..{num_topics}")));
        }
        let mut out = Self {
            num_topics,
            labels,
            doc_topic: Vec::new(),
            word_topic: Vec::new(),
            topic_total: Vec::new(),
        };
        let (d, w, t) = out.recount(corpus);
        out.doc_topic = d;
        out.word_topic = w;
        out.topic_total = t;
        Ok(out)
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn doc_topic(&self) -> &[u32] {
        &self.doc_topic
    }

    pub fn word_topic(&self) -> &[u32] {
        &self.word_topic
    }

    pub fn topic_total(&self) -> &[u32] {
        &self.topic_total
    }

    /// Count tables tallied from the labels.
    pub fn recount(&self, corpus: &Corpus) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
        let k = self.num_topics;
        let mut dt = vec![0u32; corpus.num_docs() * k];
        let mut wt = vec![0u32; corpus.vocab_size() * k];
        let mut tt = vec![0u32; k];
        let mut tok = 0;
        for e in corpus.entries() {
            for &z in &self.labels[tok..tok + e.count as usize] {
                let z = z as usize;
                dt[e.doc * k + z] += 1;
                wt[e.word * k + z] += 1;
                tt[z] += 1;
            }
            tok += e.count as usize;
        }
        (dt, wt, tt)
    }

    pub fn counts_consistent(&self, corpus: &Corpus) -> bool {
        let (d, w, t) = self.recount(corpus);
        d == self.doc_topic && w == self.word_topic && t == self.topic_total
    }

    pub fn topic_model(&self, hyper: &Hyperparams) -> TopicModel {
        let f = |v: &[u32]| v.iter().map(|&c| c as f64).collect::<Vec<_>>();
        TopicModel::from_accumulators(self.num_topics, &f(&self.doc_topic), &f(&self.word_topic), hyper)
    }

    /// One sweep over all tokens in corpus order. Each token's counts are
    /// removed, a label is drawn from
    /// `p(k) ∝ (n_dk + alpha) (n_wk + beta) / (n_k + W beta)`, and the counts
    /// are restored under the new label.
    pub fn sweep<R: Rng>(&mut self, corpus: &Corpus, hyper: &Hyperparams, rng: &mut R) -> Result<()> {
        let k = self.num_topics;
        let w_beta = corpus.vocab_size() as f64 * hyper.beta;
        let mut cumulative = vec![0.0; k];
        let mut tok = 0;
        for e in corpus.entries() {
            let d_off = e.doc * k;
            let w_off = e.word * k;
            for _ in 0..e.count {
                let old = self.labels[tok] as usize;
                for counts in [
                    &mut self.doc_topic[d_off + old],
                    &mut self.word_topic[w_off + old],
                    &mut self.topic_total[old],
                ] {
                    *counts = counts.checked_sub(1).ok_or_else(|| {
                        TopicError::Consistency(format!("negative topic count at token {tok}"))
                    })?;
                }

                let mut acc = 0.0;
                for t in 0..k {
                    acc += (self.doc_topic[d_off + t] as f64 + hyper.alpha)
                        * (self.word_topic[w_off + t] as f64 + hyper.beta)
                        / (self.topic_total[t] as f64 + w_beta);
                    cumulative[t] = acc;
                }
                let u = rng.random::<f64>() * acc;
                let new = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.labels[tok] = new as u32;
                self.doc_topic[d_off + new] += 1;
                self.word_topic[w_off + new] += 1;
                self.topic_total[new] += 1;
                tok += 1;
            }
        }
        Ok(())
    }
}
