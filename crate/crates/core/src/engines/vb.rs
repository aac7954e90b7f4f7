use crate::corpus::Corpus;
use crate::error::Result;
use crate::math::digamma;
use crate::messages::{Hyperparams, MessageState, Neighborhood};

/// Variational update of one entry, computed in the log domain:
///
/// ```text
/// log mu[k] = psi(doc_excl[k] + alpha) + psi(word_excl[k] + beta) - psi(word_excl_totals[k] + W * beta)
/// ```
pub fn vb_update_entry_into(
    state: &MessageState,
    corpus: &Corpus,
    idx: usize,
    hyper: &Hyperparams,
    nb: &mut Neighborhood,
    out: &mut [f64],
) -> Result<()> {
    state.neighborhood_into(corpus, idx, nb)?;
    let w_beta = corpus.vocab_size() as f64 * hyper.beta;
    let mut max = f64::NEG_INFINITY;
    for (t, o) in out.iter_mut().enumerate() {
        *o = digamma(nb.doc_excl[t] + hyper.alpha) + digamma(nb.word_excl[t] + hyper.beta)
            - digamma(nb.word_excl_totals[t] + w_beta);
        max = max.max(*o);
    }
    let mut sum = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    Ok(())
}

pub fn vb_update_entry(
    state: &MessageState,
    corpus: &Corpus,
    idx: usize,
    hyper: &Hyperparams,
) -> Result<Vec<f64>> {
    let k = state.num_topics();
    let mut nb = Neighborhood::zeros(k);
    let mut out = vec![0.0; k];
    vb_update_entry_into(state, corpus, idx, hyper, &mut nb, &mut out)?;
    Ok(out)
}

/// One synchronous variational sweep from the frozen previous state.
pub fn vb_iteration(
    state: &mut MessageState,
    corpus: &Corpus,
    hyper: &Hyperparams,
    next: &mut Vec<f64>,
) -> Result<()> {
    let k = state.num_topics();
    next.resize(corpus.num_entries() * k, 0.0);
    let mut nb = Neighborhood::zeros(k);
    for (idx, out) in next.chunks_exact_mut(k).enumerate() {
        vb_update_entry_into(state, corpus, idx, hyper, &mut nb, out)?;
    }
    state.replace_all(corpus, next);
    state.iteration += 1;
    Ok(())
}
