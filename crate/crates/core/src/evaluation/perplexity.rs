use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Result, TopicError};
use crate::messages::{Hyperparams, TopicModel};

/// Share of each test document's tokens used to infer its topic proportions.
pub const OBSERVED_FRACTION: f64 = 0.8;
pub const FOLD_IN_MAX_ITERS: usize = 100;
pub const FOLD_IN_TOL: f64 = 1e-4;

#[inline]
fn token_prob(theta: &[f64], phi: &[f64]) -> f64 {
    theta.iter().zip(phi).map(|(t, p)| t * p).sum()
}

/// `exp(-sum x[w,d] ln(sum_k theta[d][k] phi[w][k]) / sum x[w,d])`
pub fn perplexity(model: &TopicModel, corpus: &Corpus) -> Result<f64> {
    if model.num_docs() != corpus.num_docs() || model.vocab_size() != corpus.vocab_size() {
        return Err(TopicError::Contract(format!(
            "model is {}x{} but corpus is {}x{}",
            model.num_docs(),
            model.vocab_size(),
            corpus.num_docs(),
            corpus.vocab_size()
        )));
    }
    if corpus.total_tokens() == 0 {
        return Err(TopicError::UndefinedMetric);
    }
    let mut log_lik = 0.0;
    for e in corpus.entries() {
        let p = token_prob(model.theta_row(e.doc), model.phi_row(e.word));
        if !(p > 0.0) {
            return Err(TopicError::Numerical(format!(
                "token probability {p} for doc {}, word {}",
                e.doc + 1,
                e.word + 1
            )));
        }
        log_lik += e.count as f64 * p.ln();
    }
    Ok((-log_lik / corpus.total_tokens() as f64).exp())
}

/// One test document divided into observed and held-out counts per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DocSplit {
    /// `(word, count)` pairs used for fold-in.
    pub observed: Vec<(usize, u32)>,
    /// `(word, count)` pairs scored.
    pub held_out: Vec<(usize, u32)>,
}

/// Assigns each token of every document to the observed part with probability
/// [`OBSERVED_FRACTION`].
pub fn split_tokens(corpus: &Corpus, seed: u64) -> Vec<DocSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..corpus.num_docs())
        .map(|d| {
            let mut split = DocSplit {
                observed: Vec::new(),
                held_out: Vec::new(),
            };
            for e in corpus.doc_iter(d) {
                let kept = (0..e.count).filter(|_| rng.random::<f64>() < OBSERVED_FRACTION).count() as u32;
                if kept > 0 {
                    split.observed.push((e.word, kept));
                }
                if e.count > kept {
                    split.held_out.push((e.word, e.count - kept));
                }
            }
            split
        })
        .collect()
}

/// Infers a document's topic proportions with the word-topic matrix held
/// fixed: per-entry messages `mu[k] ∝ (doc_excl[k] + alpha) phi[w][k]`,
/// updated in place until theta moves less than [`FOLD_IN_TOL`] or
/// [`FOLD_IN_MAX_ITERS`] sweeps.
pub fn fold_in(observed: &[(usize, u32)], phi: &[f64], hyper: &Hyperparams) -> Vec<f64> {
    let k = hyper.num_topics;
    let alpha = hyper.alpha;
    let uniform = 1.0 / k as f64;
    let mut messages = vec![uniform; observed.len() * k];
    let mut doc_topic = vec![0.0; k];
    for &(_, c) in observed {
        doc_topic.iter_mut().for_each(|v| *v += c as f64 * uniform);
    }
    let theta_of = |dt: &[f64]| {
        let norm: f64 = dt.iter().map(|v| v + alpha).sum();
        dt.iter().map(|v| (v + alpha) / norm).collect::<Vec<_>>()
    };
    let mut theta = theta_of(&doc_topic);
    let mut fresh = vec![0.0; k];
    for _ in 0..FOLD_IN_MAX_ITERS {
        for (msg, &(w, c)) in messages.chunks_exact_mut(k).zip(observed) {
            let x = c as f64;
            let phi_w = &phi[w * k..(w + 1) * k];
            for t in 0..k {
                let excl = (doc_topic[t] - x * msg[t]).max(0.0);
                fresh[t] = (excl + alpha) * phi_w[t];
            }
            let sum: f64 = fresh.iter().sum();
            for t in 0..k {
                let v = fresh[t] / sum;
                doc_topic[t] += x * (v - msg[t]);
                msg[t] = v;
            }
        }
        let next = theta_of(&doc_topic);
        let change = next.iter().zip(&theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        theta = next;
        if change < FOLD_IN_TOL {
            break;
        }
    }
    theta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveReport {
    pub perplexity: f64,
    /// Documents left out because their held-out part was empty.
    pub skipped_docs: usize,
    pub held_out_tokens: u64,
}

/// Predictive perplexity of `test_docs` under a trained `W x K` word-topic
/// matrix: each document's tokens are split observed/held-out, theta is
/// folded in on the observed part, and perplexity is taken on the held-out part.
pub fn predictive_perplexity(
    phi: &[f64],
    test_docs: &Corpus,
    hyper: &Hyperparams,
    seed: u64,
) -> Result<PredictiveReport> {
    let k = hyper.num_topics;
    if phi.len() != test_docs.vocab_size() * k {
        return Err(TopicError::Contract(format!(
            "phi has {} values, expected {} x {k}",
            phi.len(),
            test_docs.vocab_size()
        )));
    }
    let mut log_lik = 0.0;
    let mut tokens = 0u64;
    let mut skipped = 0;
    for split in split_tokens(test_docs, seed) {
        if split.held_out.is_empty() {
            skipped += 1;
            continue;
        }
        let theta = fold_in(&split.observed, phi, hyper);
        for &(w, c) in &split.held_out {
            let p = token_prob(&theta, &phi[w * k..(w + 1) * k]);
            if !(p > 0.0) {
                return Err(TopicError::Numerical(format!("held-out token probability {p}")));
            }
            log_lik += c as f64 * p.ln();
            tokens += c as u64;
        }
    }
    if tokens == 0 {
        return Err(TopicError::UndefinedMetric);
    }
    if skipped > 0 {
        log::info!("predictive perplexity skipped {skipped} documents with no held-out tokens");
    }
    Ok(PredictiveReport {
        perplexity: (-log_lik / tokens as f64).exp(),
        skipped_docs: skipped,
        held_out_tokens: tokens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn corpus() -> Corpus {
        Corpus::from_triples(3, 5, [(0, 0, 3), (0, 4, 1), (1, 1, 2), (1, 2, 2), (2, 3, 1), (2, 0, 1)]).unwrap()
    }

    #[test]
    fn uniform_model_gives_vocab_size() {
        let c = corpus();
        let m = TopicModel::uniform(3, 5, 4);
        assert_relative_eq!(perplexity(&m, &c).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_certainty() {
        let c = Corpus::from_triples(1, 1, [(0, 0, 7)]).unwrap();
        let m = TopicModel::uniform(1, 1, 1);
        assert_eq!(perplexity(&m, &c).unwrap(), 1.0);
    }

    #[test]
    fn matches_token_by_token_sum() {
        let c = corpus();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = 3;
        let mut m = TopicModel::uniform(3, 5, k);
        m.theta.iter_mut().chain(m.phi.iter_mut()).for_each(|v| *v = rng.random::<f64>());
        // Brute force: expand every entry into single tokens.
        let mut log_sum = 0.0;
        let mut n = 0;
        for e in c.entries() {
            for _ in 0..e.count {
                let p: f64 = (0..k).map(|t| m.theta[e.doc * k + t] * m.phi[e.word * k + t]).sum();
                log_sum += p.ln();
                n += 1;
            }
        }
        let expected = (-log_sum / n as f64).exp();
        assert_relative_eq!(perplexity(&m, &c).unwrap(), expected, max_relative = 1e-9);
    }

    #[test]
    fn errors() {
        let empty = Corpus::from_triples(2, 5, []).unwrap();
        assert!(matches!(perplexity(&TopicModel::uniform(2, 5, 2), &empty), Err(TopicError::UndefinedMetric)));
        assert!(matches!(perplexity(&TopicModel::uniform(2, 5, 2), &corpus()), Err(TopicError::Contract(_))));
    }

    #[test]
    fn split_partitions_counts() {
        let c = corpus();
        for (d, split) in split_tokens(&c, 9).iter().enumerate() {
            let total: u64 = split.observed.iter().chain(&split.held_out).map(|&(_, n)| n as u64).sum();
            assert_eq!(total, c.doc_tokens(d));
        }
        assert_eq!(split_tokens(&c, 9), split_tokens(&c, 9));
    }

    #[test]
    fn uniform_phi_predicts_vocab_size() {
        let c = Corpus::from_triples(4, 6, (0..4).flat_map(|d| (0..6).map(move |w| (d, w, 3)))).unwrap();
        let h = Hyperparams::new(3, 0.01, 0.01).unwrap();
        let phi = vec![1.0 / 6.0; 18];
        let r = predictive_perplexity(&phi, &c, &h, 1).unwrap();
        assert_relative_eq!(r.perplexity, 6.0, max_relative = 1e-12);
    }

    #[test]
    fn fold_in_recovers_pure_topic() {
        // Two topics over disjoint halves of a 4-word vocabulary.
        let phi = vec![0.5, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.5];
        let h = Hyperparams::new(2, 0.01, 0.01).unwrap();
        let theta = fold_in(&[(0, 5), (1, 5)], &phi, &h);
        assert_abs_diff_eq!(theta[0], 10.01 / 10.02, epsilon = 1e-6);
    }

    #[test]
    fn empty_held_out_is_skipped() {
        // Ten one-token documents plus one long one.
        let mut triples: Vec<_> = (0..10).map(|d| (d, 0, 1)).collect();
        triples.extend([(10, 0, 20), (10, 1, 20)]);
        let c = Corpus::from_triples(11, 2, triples).unwrap();
        let h = Hyperparams::new(2, 0.01, 0.01).unwrap();
        let phi = vec![0.5; 4];
        let r = predictive_perplexity(&phi, &c, &h, 3).unwrap();
        let expected = split_tokens(&c, 3).iter().filter(|s| s.held_out.is_empty()).count();
        assert!(expected > 0);
        assert_eq!(r.skipped_docs, expected);
    }
}
