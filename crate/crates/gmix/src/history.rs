//! Semi-infinite pasts represented as a finite prefix plus an eventually
//! constant tail.
//!
//! Kernels quantify over entire pasts, which are not representable; a finite
//! prefix with a constant tail is enough to start chains from arbitrary
//! distinct histories and to realize the sup-style discrepancy definitions at
//! the extreme configurations where they are attained.

use crate::error::{GmixError, Result};
use crate::potential::Alphabet;

/// A past `(x_{-1}, x_{-2}, ...)`: explicit symbols for the most recent
/// coordinates, one repeated symbol for everything earlier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    /// Most-recent-first: `prefix[i]` holds the symbol at depth `i + 1`.
    prefix: Vec<u32>,
    /// Symbol at every depth beyond the prefix.
    tail: u32,
}

impl History {
    pub fn new(prefix: Vec<u32>, tail: u32) -> Self {
        Self { prefix, tail }
    }

    /// Constant past.
    pub fn constant(tail: u32) -> Self {
        Self { prefix: Vec::new(), tail }
    }

    /// Build a history after checking every symbol against `alphabet`.
    pub fn checked(prefix: Vec<u32>, tail: u32, alphabet: &Alphabet) -> Result<Self> {
        for &s in prefix.iter().chain(std::iter::once(&tail)) {
            if !alphabet.contains(s) {
                return Err(GmixError::SymbolOutsideAlphabet {
                    symbol: s,
                    size: alphabet.size_hint(),
                });
            }
        }
        Ok(Self::new(prefix, tail))
    }

    pub fn prefix(&self) -> &[u32] {
        &self.prefix
    }

    pub fn tail_symbol(&self) -> u32 {
        self.tail
    }
}

/// Read access to a past. Depth is 1-based: depth `d` is the `d`-th most
/// recent symbol. Lookups are total.
pub trait Past {
    fn symbol_at(&self, depth: usize) -> u32;

    /// `(d0, c)` such that every depth `>= d0` holds symbol `c`.
    fn constant_from(&self) -> (usize, u32);
}

impl Past for History {
    fn symbol_at(&self, depth: usize) -> u32 {
        debug_assert!(depth >= 1);
        if depth <= self.prefix.len() {
            self.prefix[depth - 1]
        } else {
            self.tail
        }
    }

    fn constant_from(&self) -> (usize, u32) {
        (self.prefix.len() + 1, self.tail)
    }
}

/// A base history extended by realized symbols, oldest first in `appended`.
/// Depth 1 is the last appended symbol.
#[derive(Debug, Clone, Copy)]
pub struct ExtendedPast<'a> {
    pub base: &'a History,
    pub appended: &'a [u32],
}

impl Past for ExtendedPast<'_> {
    fn symbol_at(&self, depth: usize) -> u32 {
        debug_assert!(depth >= 1);
        if depth <= self.appended.len() {
            self.appended[self.appended.len() - depth]
        } else {
            self.base.symbol_at(depth - self.appended.len())
        }
    }

    fn constant_from(&self) -> (usize, u32) {
        let (d, c) = self.base.constant_from();
        (d + self.appended.len(), c)
    }
}
