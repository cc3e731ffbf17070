//! Normalized min-sum decoding with a flooding schedule.
//!
//! Input LLRs follow `ln P(b=1)/P(b=0)`; messages internally use the opposite sign.

use crate::error::{Error, Result};

use super::ParityCheckMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    /// All parity checks satisfied.
    pub converged: bool,
    /// Iterations run (at least 1).
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct MinSumDecoder {
    n: usize,
    /// Edge ranges per check, edges ordered by check.
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edge indices incident to each variable.
    var_edges: Vec<Vec<usize>>,
    alpha: f64,
    max_iters: usize,
}

impl MinSumDecoder {
    pub fn new(h: &ParityCheckMatrix, alpha: f64, max_iters: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || max_iters == 0 {
            return Err(Error::InvalidConfig(format!(
                "min-sum needs 0 < alpha ≤ 1 and max_iters ≥ 1, got {alpha} and {max_iters}"
            )));
        }
        let mut check_start = Vec::with_capacity(h.rows() + 1);
        let mut edge_var = Vec::with_capacity(h.num_edges());
        let mut var_edges = vec![Vec::new(); h.cols()];
        for r in 0..h.rows() {
            check_start.push(edge_var.len());
            for &c in h.row(r) {
                var_edges[c].push(edge_var.len());
                edge_var.push(c);
            }
        }
        check_start.push(edge_var.len());
        Ok(Self {
            n: h.cols(),
            check_start,
            edge_var,
            var_edges,
            alpha,
            max_iters,
        })
    }

    pub fn decode(&self, llrs: &[f64]) -> Result<DecodeOutcome> {
        if llrs.len() != self.n {
            return Err(Error::Dimension(format!("{} LLRs for a length-{} code", llrs.len(), self.n)));
        }
        if llrs.iter().any(|l| !l.is_finite()) {
            return Err(Error::Domain("LLRs must be finite".into()));
        }
        // positive favours bit 0
        let channel: Vec<f64> = llrs.iter().map(|l| -l).collect();
        let mut q: Vec<f64> = self.edge_var.iter().map(|&v| channel[v]).collect();
        let mut r = vec![0.0; q.len()];
        let mut posterior = channel.clone();
        let mut bits = vec![0u8; self.n];
        for iter in 1..=self.max_iters {
            for c in 0..self.check_start.len() - 1 {
                let edges = self.check_start[c]..self.check_start[c + 1];
                let (mut min1, mut min2, mut at) = (f64::INFINITY, f64::INFINITY, usize::MAX);
                let mut negative = false;
                for e in edges.clone() {
                    let m = q[e].abs();
                    negative ^= q[e] < 0.0;
                    if m < min1 {
                        min2 = min1;
                        min1 = m;
                        at = e;
                    } else if m < min2 {
                        min2 = m;
                    }
                }
                for e in edges {
                    let mag = if e == at { min2 } else { min1 };
                    let sign = negative ^ (q[e] < 0.0);
                    r[e] = if sign { -self.alpha * mag } else { self.alpha * mag };
                }
            }
            for (v, edges) in self.var_edges.iter().enumerate() {
                let total = channel[v] + edges.iter().map(|&e| r[e]).sum::<f64>();
                posterior[v] = total;
                bits[v] = (total < 0.0) as u8;
                for &e in edges {
                    q[e] = total - r[e];
                }
            }
            if self.syndrome_ok(&bits) {
                return Ok(DecodeOutcome {
                    bits,
                    converged: true,
                    iterations: iter,
                });
            }
        }
        Ok(DecodeOutcome {
            bits,
            converged: false,
            iterations: self.max_iters,
        })
    }

    fn syndrome_ok(&self, bits: &[u8]) -> bool {
        self.check_start
            .windows(2)
            .all(|w| self.edge_var[w[0]..w[1]].iter().fold(0u8, |a, &v| a ^ bits[v]) == 0)
    }
}
