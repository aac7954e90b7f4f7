//! Message residuals and the dynamic update order for residual BP.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Entry};
use crate::error::{Result, TopicError};

/// Which unit residuals are aggregated over, and hence what the schedule orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScheduleMode {
    /// `r_w = sum_d r_{w,d}`
    #[default]
    ByWord,
    /// `r_d = sum_w r_{w,d}`
    ByDoc,
    /// `r_{w,d}` per nonzero cell.
    ByEntry,
}

impl ScheduleMode {
    pub fn num_units(self, corpus: &Corpus) -> usize {
        match self {
            ScheduleMode::ByWord => corpus.vocab_size(),
            ScheduleMode::ByDoc => corpus.num_docs(),
            ScheduleMode::ByEntry => corpus.num_entries(),
        }
    }

    #[inline]
    pub fn unit_of(self, entry_idx: usize, entry: &Entry) -> usize {
        match self {
            ScheduleMode::ByWord => entry.word,
            ScheduleMode::ByDoc => entry.doc,
            ScheduleMode::ByEntry => entry_idx,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleMode::ByWord => "word",
            ScheduleMode::ByDoc => "doc",
            ScheduleMode::ByEntry => "entry",
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleMode {
    type Err = TopicError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(ScheduleMode::ByWord),
            "doc" => Ok(ScheduleMode::ByDoc),
            "entry" => Ok(ScheduleMode::ByEntry),
            other => Err(TopicError::UnknownSchedule(other.to_string())),
        }
    }
}

/// `x * ||new - old||_1`
pub fn entry_residual(old_msg: &[f64], new_msg: &[f64], count: u32) -> Result<f64> {
    if old_msg.len() != new_msg.len() {
        return Err(TopicError::Contract(format!(
            "residual of vectors with lengths {} and {}",
            old_msg.len(),
            new_msg.len()
        )));
    }
    Ok(count as f64 * l1_distance(old_msg, new_msg))
}

#[inline]
pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary {
    pub sum: f64,
    pub max: f64,
    /// 0-based unit id holding the largest residual (smallest id on ties).
    pub argmax: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTable {
    mode: ScheduleMode,
    values: Vec<f64>,
    order: Vec<usize>,
}

impl ResidualTable {
    /// Zeroed table whose initial order is a seeded random permutation of the units.
    pub fn new_random(mode: ScheduleMode, corpus: &Corpus, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..mode.num_units(corpus)).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self::with_order(mode, order).expect("identity shuffle is a permutation")
    }

    pub fn with_order(mode: ScheduleMode, order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &u in &order {
            if u >= n || std::mem::replace(&mut seen[u], true) {
                return Err(TopicError::Contract("schedule is not a permutation".into()));
            }
        }
        Ok(Self {
            mode,
            values: vec![0.0; n],
            order,
        })
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn reset(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `residual` to the bucket of the entry's unit.
    #[inline]
    pub fn accumulate(&mut self, entry_idx: usize, entry: &Entry, residual: f64) {
        debug_assert!(residual >= 0.0);
        self.values[self.mode.unit_of(entry_idx, entry)] += residual;
    }

    /// Re-sorts the order by descending residual, ties by ascending unit id.
    ///
    /// The previous order is sorted in place with a stable, run-adaptive merge
    /// sort, so an almost-sorted schedule is restored in close to linear time.
    /// The comparator is a total order, so the result does not depend on the
    /// previous order.
    pub fn build_schedule(&mut self) -> &[usize] {
        let values = &self.values;
        self.order
            .sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        &self.order
    }

    pub fn summary(&self) -> ResidualSummary {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (u, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (u, v);
            }
        }
        ResidualSummary {
            sum: self.values.iter().sum(),
            max: best.1.max(0.0),
            argmax: best.0,
        }
    }
}
