use crate::error::{Error, Result};

use super::ParityCheckMatrix;

/// Base matrix of circulant shifts (`-1` = zero block) and lifting factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prototype {
    pub base: Vec<Vec<i32>>,
    pub z: usize,
}

/// Shifts of the IEEE 802.11 rate-1/2, length-1944 code (`z = 81`).
pub const IEEE80211_N1944_R12_CSV: &str = include_str!("../../data/ieee80211_n1944_r12.csv");

pub fn parse_prototype_csv(text: &str) -> Result<Vec<Vec<i32>>> {
    let mut base = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim().parse::<i32>().map_err(|e| Error::Alist {
                    line: i + 1,
                    msg: format!("bad shift {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = base.first() {
            let first: &Vec<i32> = first;
            if first.len() != row.len() {
                return Err(Error::Alist {
                    line: i + 1,
                    msg: format!("{} shifts, expected {}", row.len(), first.len()),
                });
            }
        }
        base.push(row);
    }
    Ok(base)
}

/// `-1` → `z × z` zero block, `s` → identity with columns cyclically shifted by `s`.
pub fn expand_prototype(base: &[Vec<i32>], z: usize) -> Result<ParityCheckMatrix> {
    if z == 0 {
        return Err(Error::Code("lifting factor must be positive".into()));
    }
    let cols = base.first().map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(base.len() * z);
    for (i, brow) in base.iter().enumerate() {
        if brow.len() != cols {
            return Err(Error::Code(format!("base row {i} has {} entries, expected {cols}", brow.len())));
        }
        for &s in brow {
            if s < -1 || s >= z as i32 {
                return Err(Error::Code(format!("shift {s} outside {{-1}} ∪ [0, {z})")));
            }
        }
        for a in 0..z {
            rows.push(
                brow.iter()
                    .enumerate()
                    .filter(|(_, &s)| s >= 0)
                    .map(|(j, &s)| j * z + (a + s as usize) % z)
                    .collect(),
            );
        }
    }
    Ok(ParityCheckMatrix::from_rows(cols * z, rows)?.with_prototype(Prototype {
        base: base.to_vec(),
        z,
    }))
}

/// The 972 × 1944 802.11 code.
pub fn ieee80211_n1944_r12() -> ParityCheckMatrix {
    let base = parse_prototype_csv(IEEE80211_N1944_R12_CSV).expect("embedded table parses");
    expand_prototype(&base, 81).expect("embedded table is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_shift() {
        let h = expand_prototype(&[vec![0]], 3).unwrap();
        assert_eq!((0..3).map(|r| h.row(r).to_vec()).collect::<Vec<_>>(), vec![vec![0], vec![1], vec![2]]);
        let h = expand_prototype(&[vec![1]], 3).unwrap();
        assert_eq!((0..3).map(|r| h.row(r).to_vec()).collect::<Vec<_>>(), vec![vec![1], vec![2], vec![0]]);
        let h = expand_prototype(&[vec![-1, 2]], 3).unwrap();
        assert_eq!(h.num_edges(), 3);
    }

    #[test]
    fn rejects_bad_shifts() {
        assert!(expand_prototype(&[vec![3]], 3).is_err());
        assert!(expand_prototype(&[vec![-2]], 3).is_err());
        assert!(expand_prototype(&[vec![0, 1], vec![0]], 3).is_err());
        assert!(parse_prototype_csv("1,2\n3\n").is_err());
        assert!(parse_prototype_csv("1,x\n").is_err());
    }

    #[test]
    fn wifi_code_dimensions_and_degrees() {
        let h = ieee80211_n1944_r12();
        assert_eq!((h.rows(), h.cols()), (972, 1944));
        let p = h.prototype().unwrap();
        assert_eq!((p.base.len(), p.base[0].len(), p.z), (12, 24, 81));
        let mut col_degrees: Vec<usize> = (0..h.cols()).map(|c| h.col(c).len()).collect();
        col_degrees.sort_unstable();
        col_degrees.dedup();
        assert_eq!(col_degrees, vec![2, 3, 4, 11]);
        let mut row_degrees: Vec<usize> = (0..h.rows()).map(|r| h.row(r).len()).collect();
        row_degrees.sort_unstable();
        row_degrees.dedup();
        assert_eq!(row_degrees, vec![7, 8]);
    }

    #[test]
    fn parity_part_is_dual_diagonal() {
        let base = parse_prototype_csv(IEEE80211_N1944_R12_CSV).unwrap();
        // first parity column: shift 1 at the ends, 0 in the middle
        let col12: Vec<(usize, i32)> = base.iter().enumerate().filter(|(_, r)| r[12] >= 0).map(|(i, r)| (i, r[12])).collect();
        assert_eq!(col12, vec![(0, 1), (6, 0), (11, 1)]);
        for j in 13..24 {
            let rows: Vec<usize> = (0..12).filter(|&i| base[i][j] >= 0).collect();
            assert_eq!(rows, vec![j - 13, j - 12]);
            assert!(rows.iter().all(|&i| base[i][j] == 0));
        }
    }
}
