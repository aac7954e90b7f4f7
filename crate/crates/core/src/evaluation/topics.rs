use std::fmt;

/// Top words per topic with their probabilities, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicTable {
    pub topics: Vec<Vec<(String, f64)>>,
    /// Set when fewer words than requested were available.
    pub truncated: bool,
}

/// For each column of the `W x K` matrix `phi`, the `n` words with the largest
/// probability, ties by ascending word id. `n` is capped at `W`.
pub fn top_words(phi: &[f64], num_topics: usize, vocab: &[String], n: usize) -> TopicTable {
    let vocab_size = phi.len() / num_topics;
    let take = n.min(vocab_size);
    if take < n {
        log::warn!("requested {n} top words but the vocabulary has only {vocab_size}");
    }
    let name = |w: usize| vocab.get(w).cloned().unwrap_or_else(|| format!("w{}", w + 1));
    let topics = (0..num_topics)
        .map(|t| {
            let mut ids: Vec<usize> = (0..vocab_size).collect();
            let col = |w: usize| phi[w * num_topics + t];
            ids.sort_by(|&a, &b| col(b).total_cmp(&col(a)).then(a.cmp(&b)));
            ids.into_iter().take(take).map(|w| (name(w), col(w))).collect()
        })
        .collect();
    TopicTable {
        topics,
        truncated: take < n,
    }
}

impl fmt::Display for TopicTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, words) in self.topics.iter().enumerate() {
            if t > 0 {
                writeln!(f)?;
            }
            writeln!(f, "Topic {}", t + 1)?;
            for (w, p) in words {
                writeln!(f, "{w}\t{p:.6}")?;
            }
        }
        Ok(())
    }
}
