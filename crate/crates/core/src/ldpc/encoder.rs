//! Systematic encoding by GF(2) Gauss–Jordan elimination of `H`.
//!
//! Pivots are taken from the rightmost columns first, so for codes whose
//! parity part is invertible the message occupies the first `k` positions.

use crate::error::{Error, Result};

use super::ParityCheckMatrix;

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

fn get(row: &[u64], i: usize) -> bool {
    row[i / 64] >> (i % 64) & 1 == 1
}

fn set(row: &mut [u64], i: usize) {
    row[i / 64] |= 1 << (i % 64);
}

#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    /// Message (non-pivot) positions, ascending.
    free: Vec<usize>,
    /// Codeword position of each parity bit.
    pivots: Vec<usize>,
    /// Row `i` holds the message positions that sum to parity bit `i`, packed over `free`.
    parity_rows: Vec<Vec<u64>>,
}

impl Encoder {
    pub fn new(h: &ParityCheckMatrix) -> Result<Self> {
        let n = h.cols();
        let w = words(n);
        let mut rows: Vec<Vec<u64>> = (0..h.rows())
            .map(|r| {
                let mut v = vec![0u64; w];
                for &c in h.row(r) {
                    set(&mut v, c);
                }
                v
            })
            .collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in (0..n).rev() {
            let Some(p) = (rank..rows.len()).find(|&r| get(&rows[r], col)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && get(row, col) {
                    for (a, b) in row.iter_mut().zip(&pivot) {
                        *a ^= b;
                    }
                }
            }
            pivots.push(col);
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        if rows[rank..].iter().any(|r| r.iter().any(|&x| x != 0)) {
            return Err(Error::Code("elimination left a nonzero dependent row".into()));
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        let fw = words(free.len());
        let parity_rows = rows[..rank]
            .iter()
            .map(|row| {
                let mut packed = vec![0u64; fw];
                for (i, &c) in free.iter().enumerate() {
                    if get(row, c) {
                        set(&mut packed, i);
                    }
                }
                packed
            })
            .collect();
        Ok(Self {
            n,
            free,
            pivots,
            parity_rows,
        })
    }

    /// Message length `n − rank(H)`.
    pub fn k(&self) -> usize {
        self.free.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Codeword positions carrying the message, ascending.
    pub fn message_positions(&self) -> &[usize] {
        &self.free
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k() {
            return Err(Error::Dimension(format!(
                "message has {} bits, the code carries {}",
                message.len(),
                self.k()
            )));
        }
        let mut packed = vec![0u64; words(self.k())];
        let mut cw = vec![0u8; self.n];
        for (i, (&b, &pos)) in message.iter().zip(&self.free).enumerate() {
            if b & 1 == 1 {
                set(&mut packed, i);
                cw[pos] = 1;
            }
        }
        for (row, &pos) in self.parity_rows.iter().zip(&self.pivots) {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[pos] = (ones & 1) as u8;
        }
        Ok(cw)
    }

    /// Message bits of a codeword.
    pub fn extract(&self, codeword: &[u8]) -> Vec<u8> {
        self.free.iter().map(|&p| codeword[p]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::ieee80211_n1944_r12;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn wifi_code_is_systematic_in_first_half() {
        let h = ieee80211_n1944_r12();
        let enc = Encoder::new(&h).unwrap();
        assert_eq!(enc.k(), 972);
        assert_eq!(enc.message_positions(), (0..972).collect::<Vec<_>>().as_slice());
        assert_eq!(enc.encode(&vec![0; 972]).unwrap(), vec![0; 1944]);
        let mut rng = substream(1, 0, 0);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..20 {
            let msg: Vec<u8> = (0..972).map(|_| rng.random_range(0..2)).collect();
            let cw = enc.encode(&msg).unwrap();
            assert!(h.is_codeword(&cw));
            assert_eq!(&cw[..972], msg.as_slice());
            assert_eq!(enc.extract(&cw), msg);
            assert!(seen.insert(cw));
        }
        assert!(enc.encode(&[0; 10]).is_err());
    }

    #[test]
    fn rank_deficient_matrix() {
        // duplicate rows: rank 1, so k = 2
        let h = ParityCheckMatrix::from_rows(3, vec![vec![0, 1, 2], vec![0, 1, 2]]).unwrap();
        let enc = Encoder::new(&h).unwrap();
        assert_eq!(enc.k(), 2);
        for m in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            assert!(h.is_codeword(&enc.encode(&m).unwrap()));
        }
    }
}
