use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Gamma;

use crate::corpus::Corpus;
use crate::error::{Result, TopicError};

/// Concentration of the per-document topic proportions.
pub const DOC_TOPIC_CONCENTRATION: f64 = 0.1;
/// Concentration of the per-topic word distributions.
pub const TOPIC_WORD_CONCENTRATION: f64 = 0.05;

fn dirichlet<R: Rng>(rng: &mut R, gamma: &Gamma<f64>, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = v.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        v.iter_mut().for_each(|x| *x /= sum);
    } else {
        // Every gamma draw underflowed; fall back to a single vertex.
        v.iter_mut().for_each(|x| *x = 0.0);
        v[rng.random_range(0..dim)] = 1.0;
    }
    v
}

/// Samples a corpus from the LDA generative process: per-document topic
/// proportions from a symmetric Dirichlet(0.1), per-topic word distributions
/// from a symmetric Dirichlet(0.05), then `tokens_per_doc` tokens per document.
/// Words are named `w1..wW`.
pub fn synthesize_corpus(
    num_docs: usize,
    vocab_size: usize,
    true_topics: usize,
    tokens_per_doc: usize,
    seed: u64,
) -> Result<Corpus> {
    if num_docs == 0 || vocab_size == 0 || true_topics == 0 || tokens_per_doc == 0 {
        return Err(TopicError::InvalidConfig(
            "synthetic corpus dimensions must all be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word_gamma = Gamma::new(TOPIC_WORD_CONCENTRATION, 1.0).expect("positive shape");
    let doc_gamma = Gamma::new(DOC_TOPIC_CONCENTRATION, 1.0).expect("positive shape");

    let topics: Vec<WeightedIndex<f64>> = (0..true_topics)
        .map(|_| {
            let phi = dirichlet(&mut rng, &word_gamma, vocab_size);
            WeightedIndex::new(&phi).expect("normalized weights")
        })
        .collect();

    let mut triples = Vec::new();
    let mut counts = vec![0u32; vocab_size];
    for d in 0..num_docs {
        let theta = dirichlet(&mut rng, &doc_gamma, true_topics);
        let pick_topic = WeightedIndex::new(&theta).expect("normalized weights");
        counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..tokens_per_doc {
            let z = pick_topic.sample(&mut rng);
            counts[topics[z].sample(&mut rng)] += 1;
        }
        triples.extend(
            counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(w, &c)| (d, w, c)),
        );
    }
    let vocab = (1..=vocab_size).map(|i| format!("w{i}")).collect();
    Corpus::from_triples(num_docs, vocab_size, triples)?.with_vocab(vocab)
}
