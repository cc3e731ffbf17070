//! Gray-mapped square QAM.
//!
//! A symbol carries `2b` bits: the first `b` select the in-phase level and the
//! last `b` the quadrature level. Per axis, the bit group is read as a Gray
//! code whose binary value `i` picks amplitude `√Q − 1 − 2i` (`Q` points per
//! axis, largest amplitude first). For 4-QAM this gives
//!
//! | bits | symbol        |
//! |------|---------------|
//! | 00   | (+1 + j)/√2   |
//! | 01   | (+1 − j)/√2   |
//! | 10   | (−1 + j)/√2   |
//! | 11   | (−1 − j)/√2   |
//!
//! Points are scaled to unit average energy.

use crate::config::Modulation;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits_per_symbol: usize,
    /// Point for each label value; label bit 0 is the most significant.
    points: Vec<C64>,
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        Self::square_qam(modulation.bits_per_symbol())
    }

    pub fn qam4() -> Self {
        Self::square_qam(2)
    }

    fn square_qam(bits_per_symbol: usize) -> Self {
        let half = bits_per_symbol / 2;
        let per_axis = 1usize << half;
        let level = |g: usize| (per_axis as f64 - 1.0) - 2.0 * gray_to_binary(g) as f64;
        // mean energy of a square QAM grid with odd-integer levels
        let energy = 2.0 * (per_axis * per_axis - 1) as f64 / 3.0;
        let scale = energy.sqrt().recip();
        let points = (0..1usize << bits_per_symbol)
            .map(|label| {
                let gi = label >> half;
                let gq = label & (per_axis - 1);
                C64::new(level(gi) * scale, level(gq) * scale)
            })
            .collect();
        Self {
            bits_per_symbol,
            points,
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> C64 {
        self.points[label]
    }

    /// Bit `b` (0 = first transmitted) of a label.
    pub fn bit(&self, label: usize, b: usize) -> u8 {
        ((label >> (self.bits_per_symbol - 1 - b)) & 1) as u8
    }

    pub fn label_of(&self, bits: &[u8]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    pub fn map(&self, bits: &[u8]) -> C64 {
        self.points[self.label_of(bits)]
    }

    /// Label of the nearest constellation point.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    pub fn demap(&self, z: C64) -> Vec<u8> {
        let label = self.nearest(z);
        (0..self.bits_per_symbol).map(|b| self.bit(label, b)).collect()
    }
}

/// Transmitted symbols of one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    /// `K × τ_u` symbols; column `t` is the UE symbol vector at channel use `t`.
    pub s: CMatrix,
    /// `K × τ_u` constellation labels.
    pub labels: Vec<Vec<usize>>,
    /// Bit stream of each UE.
    pub bits: Vec<Vec<u8>>,
}

/// Maps one bit stream per UE onto a `K × τ_u` symbol frame.
pub fn modulate(bits: &[Vec<u8>], constellation: &Constellation) -> Result<SymbolFrame> {
    let k = bits.len();
    let bps = constellation.bits_per_symbol();
    let len = bits.first().map_or(0, Vec::len);
    if k == 0 || len % bps != 0 || bits.iter().any(|b| b.len() != len) {
        return Err(Error::Dimension(format!(
            "each of the {k} UE bit streams must have the same length, a multiple of {bps}"
        )));
    }
    let tau = len / bps;
    let labels: Vec<Vec<usize>> = bits
        .iter()
        .map(|b| b.chunks(bps).map(|c| constellation.label_of(c)).collect())
        .collect();
    let s = CMatrix::from_fn(k, tau, |i, t| constellation.point(labels[i][t]));
    Ok(SymbolFrame {
        s,
        labels,
        bits: bits.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qam4_table() {
        let c = Constellation::qam4();
        let r = FRAC_1_SQRT_2;
        let close = |a: C64, b: C64| (a - b).norm() < 1e-15;
        assert!(close(c.map(&[0, 0]), C64::new(r, r)));
        assert!(close(c.map(&[0, 1]), C64::new(r, -r)));
        assert!(close(c.map(&[1, 0]), C64::new(-r, r)));
        assert!(close(c.map(&[1, 1]), C64::new(-r, -r)));
    }

    #[test]
    fn unit_average_energy() {
        for m in [Modulation::Qam4, Modulation::Qam16, Modulation::Qam64] {
            let c = Constellation::new(m);
            let e = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / c.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn demap_inverts_map() {
        for m in [Modulation::Qam4, Modulation::Qam16, Modulation::Qam64] {
            let c = Constellation::new(m);
            for label in 0..c.len() {
                let bits: Vec<u8> = (0..c.bits_per_symbol()).map(|b| c.bit(label, b)).collect();
                assert_eq!(c.demap(c.map(&bits)), bits);
            }
        }
    }

    #[test]
    fn nearest_neighbours_differ_in_one_bit() {
        let c = Constellation::new(Modulation::Qam16);
        let spacing = 2.0 / 10f64.sqrt();
        for a in 0..c.len() {
            for b in 0..c.len() {
                if ((c.point(a) - c.point(b)).norm() - spacing).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn modulate_shapes_and_errors() {
        let c = Constellation::qam4();
        let frame = modulate(&[vec![0, 0, 1, 1], vec![0, 1, 1, 0]], &c).unwrap();
        assert_eq!(frame.s.shape(), (2, 2));
        assert_eq!(frame.labels, vec![vec![0, 3], vec![1, 2]]);
        assert!(modulate(&[vec![0, 0, 1]], &c).is_err());
        assert!(modulate(&[vec![0, 0], vec![1, 1, 0, 0]], &c).is_err());
    }
}
