//! Quasi-cyclic LDPC coding: parity-check ingestion, encoding and min-sum decoding.

mod alist;
mod decoder;
mod encoder;
mod prototype;

pub use alist::{parse_alist, read_alist, write_alist};
pub use decoder::{DecodeOutcome, MinSumDecoder};
pub use encoder::Encoder;
pub use prototype::{expand_prototype, ieee80211_n1944_r12, parse_prototype_csv, Prototype, IEEE80211_N1944_R12_CSV};

use crate::error::{Error, Result};

/// Sparse binary parity-check matrix stored as row and column adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    rows: usize,
    cols: usize,
    /// Sorted column indices of the ones in each row.
    row_adj: Vec<Vec<usize>>,
    /// Sorted row indices of the ones in each column.
    col_adj: Vec<Vec<usize>>,
    prototype: Option<Prototype>,
}

impl ParityCheckMatrix {
    /// Builds from the column positions of each row; duplicates are rejected.
    pub fn from_rows(cols: usize, mut row_adj: Vec<Vec<usize>>) -> Result<Self> {
        let rows = row_adj.len();
        let mut col_adj = vec![Vec::new(); cols];
        for (r, adj) in row_adj.iter_mut().enumerate() {
            adj.sort_unstable();
            if adj.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Code(format!("row {r} lists a column twice")));
            }
            for &c in adj.iter() {
                if c >= cols {
                    return Err(Error::Code(format!("row {r} references column {c} ≥ {cols}")));
                }
                col_adj[c].push(r);
            }
        }
        Ok(Self {
            rows,
            cols,
            row_adj,
            col_adj,
            prototype: None,
        })
    }

    pub fn with_prototype(mut self, prototype: Prototype) -> Self {
        self.prototype = Some(prototype);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.row_adj[r]
    }

    pub fn col(&self, c: usize) -> &[usize] {
        &self.col_adj[c]
    }

    pub fn prototype(&self) -> Option<&Prototype> {
        self.prototype.as_ref()
    }

    pub fn num_edges(&self) -> usize {
        self.row_adj.iter().map(Vec::len).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.row_adj[r].binary_search(&c).is_ok()
    }

    /// `H·c mod 2`.
    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.row_adj
            .iter()
            .map(|adj| adj.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.cols
            && self
                .row_adj
                .iter()
                .all(|adj| adj.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)) == 0)
    }

    /// Structural equality of the sparse patterns, ignoring prototype metadata.
    pub fn same_pattern(&self, other: &Self) -> bool {
        self.cols == other.cols && self.row_adj == other.row_adj
    }
}
