//! UE transmission, AP reception and the local sufficient statistics.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian_matrix, CMatrix, C64};

/// Gramian and matched-filter outputs computed at one AP.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalStatistics {
    /// `T_l = H_l^H H_l` (`K × K`).
    pub gram: CMatrix,
    /// `t_{l,t} = H_l^H y_{l,t}` as the columns of a `K × τ_u` matrix.
    pub mf: CMatrix,
}

/// `Y_l = √ρ H_l S + N_l` for given noise.
pub fn ap_receive_with_noise(h: &CMatrix, s: &CMatrix, rho_ul: f64, noise: &CMatrix) -> Result<CMatrix> {
    if h.ncols() != s.nrows() || noise.shape() != (h.nrows(), s.ncols()) {
        return Err(Error::Dimension(format!(
            "H is {}x{}, S is {}x{}, noise is {}x{}",
            h.nrows(),
            h.ncols(),
            s.nrows(),
            s.ncols(),
            noise.nrows(),
            noise.ncols()
        )));
    }
    if !(rho_ul >= 0.0) {
        return Err(Error::Domain(format!("rho_ul must be nonnegative, got {rho_ul}")));
    }
    let mut y = h * s;
    y *= C64::new(rho_ul.sqrt(), 0.0);
    y += noise;
    Ok(y)
}

/// `Y_l = √ρ H_l S + N_l` with `N_l` i.i.d. CN(0, 1).
pub fn ap_receive<R: Rng + ?Sized>(h: &CMatrix, s: &CMatrix, rho_ul: f64, rng: &mut R) -> Result<CMatrix> {
    let noise = complex_gaussian_matrix(h.nrows(), s.ncols(), rng);
    ap_receive_with_noise(h, s, rho_ul, &noise)
}

pub fn local_stats(h: &CMatrix, y: &CMatrix) -> Result<LocalStatistics> {
    if h.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "H has {} rows but Y has {}",
            h.nrows(),
            y.nrows()
        )));
    }
    let ha = h.adjoint();
    Ok(LocalStatistics {
        gram: &ha * h,
        mf: ha * y,
    })
}

/// Stacks per-AP matrices vertically: `[H_1; …; H_L]`.
pub fn stack(blocks: &[CMatrix]) -> CMatrix {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let mut out = CMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

/// Exact `(Σ_l T_l, Σ_l t_l)`: what a wired fronthaul delivers.
pub fn summed_stats(stats: &[LocalStatistics]) -> LocalStatistics {
    let mut it = stats.iter();
    let first = it.next().expect("at least one AP").clone();
    it.fold(first, |mut acc, s| {
        acc.gram += &s.gram;
        acc.mf += &s.mf;
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigen, is_hermitian, relative_frobenius};
    use crate::rng::substream;

    #[test]
    fn identity_channel_noiseless() {
        let n = 4;
        let k = 3;
        let h = CMatrix::from_fn(n, k, |i, j| C64::new((i == j) as u8 as f64, 0.0));
        let mut s = CMatrix::zeros(k, 1);
        s[(0, 0)] = C64::new(1.0, 0.0);
        let y = ap_receive_with_noise(&h, &s, 4.0, &CMatrix::zeros(n, 1)).unwrap();
        let mut e = CMatrix::zeros(n, 1);
        e[(0, 0)] = C64::new(2.0, 0.0);
        assert_eq!(y, e);
    }

    #[test]
    fn zero_snr_is_pure_noise() {
        let mut rng = substream(1, 0, 0);
        let h = complex_gaussian_matrix(3, 2, &mut rng);
        let s = complex_gaussian_matrix(2, 5, &mut rng);
        let noise = complex_gaussian_matrix(3, 5, &mut rng);
        assert_eq!(ap_receive_with_noise(&h, &s, 0.0, &noise).unwrap(), noise);
    }

    #[test]
    fn identity_gram() {
        let h = CMatrix::identity(3, 3);
        let stats = local_stats(&h, &CMatrix::zeros(3, 2)).unwrap();
        assert_eq!(stats.gram, CMatrix::identity(3, 3));
    }

    #[test]
    fn gram_is_hermitian_psd() {
        let mut rng = substream(2, 0, 0);
        for _ in 0..50 {
            let h = complex_gaussian_matrix(5, 8, &mut rng);
            let stats = local_stats(&h, &CMatrix::zeros(5, 1)).unwrap();
            assert!(is_hermitian(&stats.gram, 1e-12));
            let (values, _) = hermitian_eigen(&stats.gram);
            assert!(values.iter().all(|&v| v >= -1e-10));
            // rank ≤ min(N, K)
            assert!(values.iter().filter(|v| v.abs() > 1e-9).count() <= 5);
        }
    }

    #[test]
    fn sum_of_local_stats_matches_stacked() {
        let mut rng = substream(3, 0, 0);
        let hs: Vec<CMatrix> = (0..4).map(|_| complex_gaussian_matrix(5, 3, &mut rng)).collect();
        let s = complex_gaussian_matrix(3, 6, &mut rng);
        let ys: Vec<CMatrix> = hs.iter().map(|h| ap_receive(h, &s, 2.0, &mut rng).unwrap()).collect();
        let stats: Vec<_> = hs.iter().zip(&ys).map(|(h, y)| local_stats(h, y).unwrap()).collect();
        let sum = summed_stats(&stats);
        let h = stack(&hs);
        let y = stack(&ys);
        assert!(relative_frobenius(&sum.gram, &(h.adjoint() * &h)) < 1e-12);
        assert!(relative_frobenius(&sum.mf, &(h.adjoint() * &y)) < 1e-12);
    }

    #[test]
    fn noiseless_matched_filter() {
        let mut rng = substream(4, 0, 0);
        let h = complex_gaussian_matrix(5, 3, &mut rng);
        let s = complex_gaussian_matrix(3, 4, &mut rng);
        let rho = 3.0;
        let y = ap_receive_with_noise(&h, &s, rho, &CMatrix::zeros(5, 4)).unwrap();
        let stats = local_stats(&h, &y).unwrap();
        let expected = (&stats.gram * &s) * C64::new(rho.sqrt(), 0.0);
        assert!(relative_frobenius(&stats.mf, &expected) < 1e-14);
    }
}
