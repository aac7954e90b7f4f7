//! Belief propagation: the per-entry message update, the synchronous sweep,
//! and the residual-scheduled asynchronous sweep.

use std::time::{Duration, Instant};

use crate::corpus::Corpus;
use crate::error::{Result, TopicError};
use crate::math::normalize;
use crate::messages::{Hyperparams, MessageState, Neighborhood, REBUILD_EVERY};
use crate::scheduler::{ResidualTable, ScheduleMode};

/// Writes the updated message of entry `idx` into `out`:
///
/// ```text
/// mu[w,d][k] ∝ (doc_excl[k] + alpha) * (word_excl[k] + beta) / (word_excl_totals[k] + W * beta)
/// ```
///
/// The document factor's denominator is constant in `k` and cancels under
/// normalization.
pub fn bp_update_entry_into(
    state: &MessageState,
    corpus: &Corpus,
    idx: usize,
    hyper: &Hyperparams,
    nb: &mut Neighborhood,
    out: &mut [f64],
) -> Result<()> {
    state.neighborhood_into(corpus, idx, nb)?;
    let w_beta = corpus.vocab_size() as f64 * hyper.beta;
    for (t, o) in out.iter_mut().enumerate() {
        *o = (nb.doc_excl[t] + hyper.alpha) * (nb.word_excl[t] + hyper.beta)
            / (nb.word_excl_totals[t] + w_beta);
    }
    let sum = normalize(out);
    assert!(sum > 0.0 && sum.is_finite(), "degenerate BP product for entry {idx}");
    Ok(())
}

pub fn bp_update_entry(
    state: &MessageState,
    corpus: &Corpus,
    idx: usize,
    hyper: &Hyperparams,
) -> Result<Vec<f64>> {
    let k = state.num_topics();
    let mut nb = Neighborhood::zeros(k);
    let mut out = vec![0.0; k];
    bp_update_entry_into(state, corpus, idx, hyper, &mut nb, &mut out)?;
    Ok(out)
}

/// One synchronous sweep: every message is recomputed from the frozen
/// previous state, then all are swapped in and the accumulators rebuilt.
pub fn sbp_iteration(
    state: &mut MessageState,
    corpus: &Corpus,
    hyper: &Hyperparams,
    next: &mut Vec<f64>,
) -> Result<()> {
    let k = state.num_topics();
    next.resize(corpus.num_entries() * k, 0.0);
    let mut nb = Neighborhood::zeros(k);
    for (idx, out) in next.chunks_exact_mut(k).enumerate() {
        bp_update_entry_into(state, corpus, idx, hyper, &mut nb, out)?;
    }
    state.replace_all(corpus, next);
    state.iteration += 1;
    Ok(())
}

/// Time spent in one residual-BP sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepTiming {
    /// Message computation, application and the per-entry residual.
    pub update: Duration,
    /// Residual accumulation into unit buckets and the schedule sort.
    pub schedule: Duration,
}

impl SweepTiming {
    pub fn schedule_fraction(&self) -> f64 {
        let total = (self.update + self.schedule).as_secs_f64();
        if total > 0.0 {
            self.schedule.as_secs_f64() / total
        } else {
            0.0
        }
    }
}

impl std::ops::AddAssign for SweepTiming {
    fn add_assign(&mut self, rhs: Self) {
        self.update += rhs.update;
        self.schedule += rhs.schedule;
    }
}

// Entries are updated in blocks of roughly this size. Each residual is taken
// while its message is applied; the residuals of a block are added to their
// unit buckets right after it, which keeps the bookkeeping separately timed.
const BLOCK_ENTRIES: usize = 64;

fn unit_entries<'c>(corpus: &'c Corpus, mode: ScheduleMode, unit: usize) -> UnitEntries<'c> {
    match mode {
        ScheduleMode::ByWord => UnitEntries::Range(corpus.word_range(unit)),
        ScheduleMode::ByDoc => UnitEntries::List(corpus.doc_entry_ids(unit).iter()),
        ScheduleMode::ByEntry => UnitEntries::Range(unit..unit + 1),
    }
}

enum UnitEntries<'c> {
    Range(std::ops::Range<usize>),
    List(std::slice::Iter<'c, usize>),
}

impl Iterator for UnitEntries<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            UnitEntries::Range(r) => r.next(),
            UnitEntries::List(it) => it.next().copied(),
        }
    }
}

/// One asynchronous sweep in the table's current order.
///
/// Units are visited in schedule order; within a word the entries go by
/// ascending document, within a document by ascending word. Each update reads
/// the live accumulators, so earlier updates in the sweep influence later ones.
/// Residuals are reset at the start, accumulated per unit, and the schedule
/// for the next sweep is sorted by descending residual at the end.
pub fn rbp_iteration(
    state: &mut MessageState,
    corpus: &Corpus,
    hyper: &Hyperparams,
    table: &mut ResidualTable,
) -> Result<SweepTiming> {
    let k = state.num_topics();
    let mode = table.mode();
    if table.order().len() != mode.num_units(corpus) {
        return Err(TopicError::Contract(format!(
            "schedule has {} units, corpus has {}",
            table.order().len(),
            mode.num_units(corpus)
        )));
    }
    table.reset();
    let order = table.order().to_vec();

    let mut nb = Neighborhood::zeros(k);
    let mut fresh = vec![0.0; k];
    let mut block: Vec<(usize, f64)> = Vec::with_capacity(BLOCK_ENTRIES * 2);
    let mut timing = SweepTiming::default();

    let mut units = order.iter().peekable();
    while units.peek().is_some() {
        block.clear();
        let start = Instant::now();
        while block.len() < BLOCK_ENTRIES {
            let Some(&unit) = units.next() else { break };
            for idx in unit_entries(corpus, mode, unit) {
                bp_update_entry_into(state, corpus, idx, hyper, &mut nb, &mut fresh)?;
                let r = state.apply_message_residual(corpus, idx, &fresh)?;
                block.push((idx, r));
            }
        }
        let updated = Instant::now();
        for &(idx, r) in &block {
            table.accumulate(idx, &corpus.entries()[idx], r);
        }
        let done = Instant::now();
        timing.update += updated - start;
        timing.schedule += done - updated;
    }

    let sort_start = Instant::now();
    table.build_schedule();
    timing.schedule += sort_start.elapsed();

    state.iteration += 1;
    if state.iteration % REBUILD_EVERY == 0 {
        state.rebuild_accumulators(corpus);
    }
    Ok(timing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hyper(k: usize) -> Hyperparams {
        Hyperparams::new(k, 0.01, 0.01).unwrap()
    }

    /// {(w1,d1,1), (w2,d1,1), (w1,d2,1)} with W = 2.
    fn toy() -> Corpus {
        Corpus::from_triples(2, 2, [(0, 0, 1), (0, 1, 1), (1, 0, 1)]).unwrap()
    }

    #[test]
    fn single_entry_is_symmetric() {
        let c = Corpus::from_triples(1, 2, [(0, 0, 1)]).unwrap();
        let s = MessageState::from_messages(&c, 2, vec![0.9, 0.1]);
        let m = bp_update_entry(&s, &c, 0, &hyper(2)).unwrap();
        assert_abs_diff_eq!(m[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn toy_update_matches_hand_evaluation() {
        let c = toy();
        // entry order is word-major: (w1,d1), (w1,d2), (w2,d1)
        let s = MessageState::from_messages(&c, 2, vec![0.5, 0.5, 0.6, 0.4, 0.8, 0.2]);
        let m = bp_update_entry(&s, &c, 0, &hyper(2)).unwrap();
        // doc factor (0.81, 0.21)/1.02; word factor (0.61/1.42, 0.41/0.62)
        let a = 0.81 * 0.61 / 1.42;
        let b = 0.21 * 0.41 / 0.62;
        assert_abs_diff_eq!(m[0], a / (a + b), epsilon = 1e-12);
        assert_abs_diff_eq!(m[0], 0.714743679, epsilon = 1e-9);
        assert_abs_diff_eq!(m[1], 0.285256321, epsilon = 1e-9);
    }

    #[test]
    fn single_topic_sbp_is_fixed_point() {
        let c = toy();
        let h = hyper(1);
        let mut s = MessageState::init_random(&c, &h, 1);
        let before = s.messages().to_vec();
        sbp_iteration(&mut s, &c, &h, &mut Vec::new()).unwrap();
        assert_eq!(s.messages(), before.as_slice());
        assert_eq!(s.iteration, 1);
    }

    #[test]
    fn sbp_uses_frozen_snapshot() {
        let c = toy();
        let h = hyper(2);
        let mut s = MessageState::init_random(&c, &h, 5);
        let snapshot = s.clone();
        sbp_iteration(&mut s, &c, &h, &mut Vec::new()).unwrap();
        for idx in 0..c.num_entries() {
            let expected = bp_update_entry(&snapshot, &c, idx, &h).unwrap();
            for (a, b) in s.message(idx).iter().zip(&expected) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn single_topic_rbp_keeps_order() {
        let c = toy();
        let h = hyper(1);
        let mut s = MessageState::init_random(&c, &h, 1);
        let mut table = ResidualTable::with_order(ScheduleMode::ByWord, vec![1, 0]).unwrap();
        rbp_iteration(&mut s, &c, &h, &mut table).unwrap();
        assert!(table.values().iter().all(|&r| r == 0.0));
        assert_eq!(table.order(), &[0, 1]);
    }

    #[test]
    fn fixed_word_goes_last() {
        // Word 0 has one entry alone in its document; word 1 spans two documents.
        let c = Corpus::from_triples(3, 2, [(0, 0, 1), (1, 1, 1), (2, 1, 1)]).unwrap();
        let h = hyper(2);
        let mut s = MessageState::from_messages(&c, 2, vec![0.9, 0.1, 0.3, 0.7, 0.6, 0.4]);
        let fixed = bp_update_entry(&s, &c, 0, &h).unwrap();
        s.apply_message(&c, 0, &fixed).unwrap();
        let mut table = ResidualTable::with_order(ScheduleMode::ByWord, vec![0, 1]).unwrap();
        rbp_iteration(&mut s, &c, &h, &mut table).unwrap();
        assert!(table.values()[0] < 1e-12);
        assert!(table.values()[1] > 0.0);
        assert_eq!(table.order(), &[1, 0]);
    }

    #[test]
    fn rbp_matches_scripted_sequential_updates() {
        let c = toy();
        let h = hyper(2);
        let mut s = MessageState::init_random(&c, &h, 3);
        let mut oracle = s.clone();
        let mut table = ResidualTable::with_order(ScheduleMode::ByWord, vec![0, 1]).unwrap();
        rbp_iteration(&mut s, &c, &h, &mut table).unwrap();
        // word 0: entries (w1,d1), (w1,d2); word 1: (w2,d1)
        for idx in [0, 1, 2] {
            let m = bp_update_entry(&oracle, &c, idx, &h).unwrap();
            oracle.apply_message(&c, idx, &m).unwrap();
        }
        for (a, b) in s.messages().iter().zip(oracle.messages()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rbp_rejects_wrong_schedule_length() {
        let c = toy();
        let h = hyper(2);
        let mut s = MessageState::init_random(&c, &h, 3);
        let mut table = ResidualTable::with_order(ScheduleMode::ByWord, vec![0, 1, 2]).unwrap();
        assert!(rbp_iteration(&mut s, &c, &h, &mut table).is_err());
    }
}
