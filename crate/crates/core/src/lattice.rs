//! Finite index over the states `2 <= k + m + n <= n_max`.
//!
//! States are ordered by size `N`, then `k`, then `m`.

use crate::error::{invalid, Error, Result};
use crate::model::PopulationState;

/// Number of states `(k, m, n)` with `k + m + n = size`.
pub fn level_len(size: u32) -> usize {
    let s = size as usize;
    (s + 1) * (s + 2) / 2
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncatedLattice {
    n_max: u32,
    // offsets[N - 2] is the index of the first state of size N; one extra
    // entry holds the total count.
    offsets: Vec<usize>,
}

impl TruncatedLattice {
    pub const MIN_SIZE: u32 = 4;

    pub fn new(n_max: u32) -> Result<Self> {
        if n_max < Self::MIN_SIZE {
            return Err(invalid(format!("lattice n_max must be >= 4, got {n_max}")));
        }
        let mut offsets = Vec::with_capacity(n_max as usize);
        let mut acc = 0usize;
        for size in 2..=n_max {
            offsets.push(acc);
            acc += level_len(size);
        }
        offsets.push(acc);
        Ok(TruncatedLattice { n_max, offsets })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().expect("lattice has at least one level")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index range of the states of size `size`.
    pub fn level(&self, size: u32) -> std::ops::Range<usize> {
        let i = (size - 2) as usize;
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn contains(&self, state: &PopulationState) -> bool {
        state.size() <= self.n_max
    }

    pub fn index(&self, state: &PopulationState) -> Option<usize> {
        let size = state.size();
        if size > self.n_max {
            return None;
        }
        Some(self.index_of(state.k(), state.m(), size))
    }

    pub fn try_index(&self, state: &PopulationState) -> Result<usize> {
        self.index(state).ok_or(Error::OutOfRange {
            k: state.k(),
            m: state.m(),
            n: state.n(),
            limit: self.n_max,
        })
    }

    #[inline]
    pub(crate) fn index_of(&self, k: u32, m: u32, size: u32) -> usize {
        let (k, m, s) = (k as usize, m as usize, size as usize);
        // Before k: sum over k' < k of (s - k' + 1) entries.
        let pos = k * (s + 1) - k * k.saturating_sub(1) / 2 + m;
        self.offsets[size as usize - 2] + pos
    }

    pub fn state(&self, index: usize) -> PopulationState {
        assert!(index < self.len(), "lattice index {index} out of range");
        let level = self.offsets.partition_point(|&o| o <= index) - 1;
        let size = level as u32 + 2;
        let mut rest = index - self.offsets[level];
        let mut k = 0u32;
        loop {
            let row = (size - k + 1) as usize;
            if rest < row {
                break;
            }
            rest -= row;
            k += 1;
        }
        let m = rest as u32;
        PopulationState::new_unchecked(k, m, size - k - m)
    }

    /// All states in index order.
    pub fn states(&self) -> impl Iterator<Item = PopulationState> + '_ {
        (2..=self.n_max).flat_map(|size| {
            (0..=size).flat_map(move |k| {
                (0..=size - k).map(move |m| PopulationState::new_unchecked(k, m, size - k - m))
            })
        })
    }
}
