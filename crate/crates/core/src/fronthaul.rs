//! Over-the-air fronthaul: packing, ZF precoding, power scaling and the
//! superposition channel at the CPU.
//!
//! Each AP sends its Gramian (phase 1) and its matched-filter outputs
//! (phase 2) as length-`M` chunks, one chunk per channel use. With the local
//! ZF precoder `W_l = G_l (G_l^H G_l)^{-1}` the CPU receives
//! `Z = √ρ_c Σ_l X̄_l + E`, i.e. the entrywise sum of the APs' chunks in AWGN.

use rand::Rng;

use crate::channel::{check_full_column_rank, MAX_GRAM_CONDITION};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian_matrix, hermitian_condition, hpd_inverse, CMatrix, CVector, C64};
use crate::uplink::LocalStatistics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Upper triangle of the Gramian.
    Gramian,
    /// Stacked matched-filter outputs.
    MatchedFilter,
}

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::Gramian => 1,
            Phase::MatchedFilter => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedVector {
    pub phase: Phase,
    pub data: CVector,
}

/// Length of the packed upper triangle of a `K × K` Hermitian matrix.
pub fn triangle_len(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Zero-based position of entry `(j, jp)`, `j ≤ jp`, in the row-wise packed upper triangle.
pub fn triangle_index(j: usize, jp: usize, k: usize) -> usize {
    debug_assert!(j <= jp && jp < k);
    // rows 0..j hold k + (k-1) + … + (k-j+1) entries
    j * k - j * j.saturating_sub(1) / 2 + (jp - j)
}

/// Inverse of [`triangle_index`].
pub fn triangle_pair(n: usize, k: usize) -> (usize, usize) {
    let mut start = 0;
    for j in 0..k {
        let row = k - j;
        if n < start + row {
            return (j, j + n - start);
        }
        start += row;
    }
    panic!("index {n} out of range for K={k}");
}

pub fn pack_gramian(gram: &CMatrix) -> PackedVector {
    let k = gram.nrows();
    let mut data = CVector::zeros(triangle_len(k));
    let mut n = 0;
    for j in 0..k {
        for jp in j..k {
            data[n] = gram[(j, jp)];
            n += 1;
        }
    }
    PackedVector {
        phase: Phase::Gramian,
        data,
    }
}

/// Column-major stacking `[t_1; t_2; …; t_τ]` of the `K × τ` matched-filter matrix.
pub fn pack_matched_filter(mf: &CMatrix) -> PackedVector {
    PackedVector {
        phase: Phase::MatchedFilter,
        data: CVector::from_column_slice(mf.as_slice()),
    }
}

pub fn pack(stats: &LocalStatistics, phase: Phase) -> PackedVector {
    match phase {
        Phase::Gramian => pack_gramian(&stats.gram),
        Phase::MatchedFilter => pack_matched_filter(&stats.mf),
    }
}

/// Number of channel uses `⌈len / M⌉` needed to send `len` symbols.
pub fn num_transmissions(len: usize, m: usize) -> usize {
    len.div_ceil(m)
}

/// Splits `x` into consecutive length-`M` columns, zero-padding the last one.
pub fn chunk(x: &CVector, m: usize) -> CMatrix {
    let cols = num_transmissions(x.len(), m);
    let mut out = CMatrix::zeros(m, cols);
    out.as_mut_slice()[..x.len()].copy_from_slice(x.as_slice());
    out
}

/// Inverse of [`chunk`]: drops the padding beyond `len`.
pub fn unchunk(xbar: &CMatrix, len: usize) -> Result<CVector> {
    if len > xbar.len() {
        return Err(Error::Dimension(format!(
            "cannot take {len} entries from a {}x{} frame",
            xbar.nrows(),
            xbar.ncols()
        )));
    }
    Ok(CVector::from_column_slice(&xbar.as_slice()[..len]))
}

/// Local ZF precoder `W = G (G^H G)^{-1}`.
pub fn zf_precoder(g: &CMatrix) -> Result<CMatrix> {
    check_full_column_rank(g)?;
    let gram = g.adjoint() * g;
    let condition = hermitian_condition(&gram);
    if !(condition < MAX_GRAM_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(g * hpd_inverse(&gram)?)
}

/// `E[W^H W] = E[(G^H G)^{-1}] = I_M / (β (N − M))` for `G` with i.i.d. CN(0, β) entries.
pub fn expected_precoder_gram(n: usize, m: usize, beta: f64) -> Result<CMatrix> {
    if n <= m {
        return Err(Error::Unsupported(format!(
            "E[W^H W] does not exist for N = M (N={n}, M={m})"
        )));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("fronthaul gain must be positive, got {beta}")));
    }
    Ok(CMatrix::identity(m, m) * C64::new(1.0 / (beta * (n - m) as f64), 0.0))
}

/// Monte Carlo estimate of `E[W^H W]` for an arbitrary fronthaul channel law.
pub fn expected_precoder_gram_mc<R: Rng + ?Sized>(
    draws: usize,
    rng: &mut R,
    mut sample_g: impl FnMut(&mut R) -> CMatrix,
) -> Result<CMatrix> {
    let mut acc: Option<CMatrix> = None;
    for _ in 0..draws {
        let w = zf_precoder(&sample_g(rng))?;
        let ww = w.adjoint() * &w;
        match acc.as_mut() {
            Some(a) => *a += ww,
            None => acc = Some(ww),
        }
    }
    let acc = acc.ok_or_else(|| Error::Domain("at least one draw required".into()))?;
    Ok(acc / C64::new(draws as f64, 0.0))
}

/// Second-moment matrix `E[x x^H]` of a packed statistic, accessed entrywise.
pub trait SecondMoment {
    fn len(&self) -> usize;
    fn entry(&self, a: usize, b: usize) -> C64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SecondMoment for CMatrix {
    fn len(&self) -> usize {
        self.nrows()
    }
    fn entry(&self, a: usize, b: usize) -> C64 {
        self[(a, b)]
    }
}

/// Block-diagonal second moment `I_τ ⊗ B`.
#[derive(Debug, Clone)]
pub struct BlockDiagonalMoment {
    pub block: CMatrix,
    pub repeats: usize,
}

impl SecondMoment for BlockDiagonalMoment {
    fn len(&self) -> usize {
        self.block.nrows() * self.repeats
    }
    fn entry(&self, a: usize, b: usize) -> C64 {
        let k = self.block.nrows();
        if a / k == b / k {
            self.block[(a % k, b % k)]
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// Expected energy `Ω = ρ_c tr((I_{M_i} ⊗ E[W^H W]) E[x x^H])` spent on one phase.
///
/// `x` is zero-padded to a multiple of `M`; padding carries no energy.
pub fn phase_energy(second_moment: &impl SecondMoment, eww: &CMatrix, rho_c: f64) -> f64 {
    let m = eww.nrows();
    let len = second_moment.len();
    let mut total = 0.0;
    for c in 0..num_transmissions(len, m) {
        let base = c * m;
        for p in 0..m {
            for q in 0..m {
                let (a, b) = (base + q, base + p);
                if a < len && b < len {
                    total += (eww[(p, q)] * second_moment.entry(a, b)).re;
                }
            }
        }
    }
    rho_c * total
}

/// Average transmit power `P = Ω / M_i`.
pub fn average_power(second_moment: &impl SecondMoment, eww: &CMatrix, rho_c: f64) -> f64 {
    let m_i = num_transmissions(second_moment.len(), eww.nrows());
    phase_energy(second_moment, eww, rho_c) / m_i as f64
}

/// Common scaling `ρ_c = P_max / max_l P_l` broadcast by the CPU.
///
/// `powers` are the APs' reports computed with `ρ_c = 1`.
pub fn scale_factor(powers: &[f64], p_max: f64) -> Result<f64> {
    let max = powers.iter().copied().fold(0f64, f64::max);
    if !(max > 0.0) || powers.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain(format!(
            "power reports must be finite with a positive maximum: {powers:?}"
        )));
    }
    Ok(p_max / max)
}

/// One AP's fronthaul link with its ZF precoder.
#[derive(Debug, Clone)]
pub struct FronthaulLink {
    pub g: CMatrix,
    pub w: CMatrix,
    /// `G^H W`, equal to `I_M` up to rounding.
    pub effective: CMatrix,
}

impl FronthaulLink {
    pub fn new(g: CMatrix) -> Result<Self> {
        let w = zf_precoder(&g)?;
        let effective = g.adjoint() * &w;
        Ok(Self { g, w, effective })
    }
}

/// Received frame `Z = Σ_l √ρ_c G_l^H W_l X̄_l + E`.
pub fn ota_transmit_with_noise(
    frames: &[CMatrix],
    links: &[FronthaulLink],
    rho_c: f64,
    noise: &CMatrix,
) -> Result<CMatrix> {
    if frames.len() != links.len() {
        return Err(Error::Dimension(format!(
            "{} frames for {} links",
            frames.len(),
            links.len()
        )));
    }
    let mut sum = noise.clone();
    let amp = C64::new(rho_c.sqrt(), 0.0);
    for (x, link) in frames.iter().zip(links) {
        if x.shape() != noise.shape() || link.effective.ncols() != x.nrows() {
            return Err(Error::Dimension(format!(
                "frame {}x{} does not match the {}x{} CPU frame",
                x.nrows(),
                x.ncols(),
                noise.nrows(),
                noise.ncols()
            )));
        }
        sum.gemm(amp, &link.effective, x, C64::new(1.0, 0.0));
    }
    Ok(sum)
}

pub fn ota_transmit<R: Rng + ?Sized>(
    frames: &[CMatrix],
    links: &[FronthaulLink],
    rho_c: f64,
    rng: &mut R,
) -> Result<CMatrix> {
    let (m, cols) = frames
        .first()
        .map(|f| f.shape())
        .ok_or_else(|| Error::Dimension("no frames".into()))?;
    let noise = complex_gaussian_matrix(m, cols, rng);
    ota_transmit_with_noise(frames, links, rho_c, &noise)
}

/// One phase as seen on the fronthaul, kept for inspection.
#[derive(Debug, Clone)]
pub struct OtaFrame {
    pub phase: Phase,
    /// Chunked transmit matrices `X̄_l`, one per AP.
    pub xbar: Vec<CMatrix>,
    pub rho_c: f64,
    /// Received `M × M_i` matrix at the CPU.
    pub z: CMatrix,
    /// Unpadded statistic length.
    pub len: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, relative_frobenius};
    use crate::rng::substream;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn pack_two_by_two() {
        let (a, b, cc) = (c(2.0, 0.0), c(0.5, -1.0), c(3.0, 0.0));
        let t = CMatrix::from_row_slice(2, 2, &[a, b, b.conj(), cc]);
        assert_eq!(pack_gramian(&t).data.as_slice(), &[a, b, cc]);
    }

    #[test]
    fn packed_lengths() {
        assert_eq!(pack_gramian(&CMatrix::zeros(8, 8)).data.len(), 36);
        assert_eq!(pack_matched_filter(&CMatrix::zeros(8, 10)).data.len(), 80);
    }

    #[test]
    fn triangle_index_matches_one_based_formula() {
        // n' = (K − j/2)(j − 1) + j' with 1-based j ≤ j'.
        for k in 1..12usize {
            let mut n = 0;
            for j in 0..k {
                for jp in j..k {
                    assert_eq!(triangle_index(j, jp, k), n);
                    assert_eq!(triangle_pair(n, k), (j, jp));
                    let (j1, jp1) = ((j + 1) as f64, (jp + 1) as f64);
                    let formula = (k as f64 - 0.5 * j1) * (j1 - 1.0) + jp1;
                    assert_eq!(formula as usize, n + 1);
                    n += 1;
                }
            }
        }
        assert_eq!(triangle_index(1, 2, 8) + 1, 10);
    }

    #[test]
    fn chunking() {
        let x = CVector::from_fn(36, |i, _| c(i as f64, 0.0));
        let xb = chunk(&x, 4);
        assert_eq!(xb.shape(), (4, 9));
        assert_eq!(xb[(0, 1)], c(4.0, 0.0));
        let y = CVector::from_fn(5, |i, _| c(1.0 + i as f64, 0.0));
        let yb = chunk(&y, 4);
        assert_eq!(yb.shape(), (4, 2));
        assert_eq!(yb[(0, 1)], c(5.0, 0.0));
        assert!((1..4).all(|r| yb[(r, 1)] == c(0.0, 0.0)));
        assert_eq!(unchunk(&yb, 5).unwrap(), y);
        assert!(unchunk(&yb, 9).is_err());
    }

    #[test]
    fn zf_on_orthonormal_columns_is_identity_map() {
        let mut g = CMatrix::zeros(5, 3);
        for i in 0..3 {
            g[(i, i)] = c(1.0, 0.0);
        }
        let w = zf_precoder(&g).unwrap();
        assert!(relative_frobenius(&w, &g) < 1e-15);
    }

    #[test]
    fn zf_inverts_random_channels() {
        let mut rng = substream(1, 0, 0);
        for _ in 0..100 {
            let g = complex_gaussian_matrix(5, 4, &mut rng) * c(3e-5, 0.0);
            let w = zf_precoder(&g).unwrap();
            let err = (g.adjoint() * &w - CMatrix::identity(4, 4)).norm();
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn zf_rejects_repeated_column() {
        let mut rng = substream(2, 0, 0);
        let mut g = complex_gaussian_matrix(5, 4, &mut rng);
        let col = g.column(1).clone_owned();
        g.set_column(2, &col);
        assert!(matches!(zf_precoder(&g), Err(Error::Singular { .. })));
    }

    #[test]
    fn expected_gram_closed_form() {
        let e = expected_precoder_gram(5, 4, 1.0).unwrap();
        assert_eq!(e, CMatrix::identity(4, 4));
        let e = expected_precoder_gram(6, 4, 2.0).unwrap();
        assert!((e[(0, 0)].re - 0.25).abs() < 1e-15);
        let a = expected_precoder_gram(7, 3, 1.5).unwrap();
        let b = expected_precoder_gram(7, 3, 3.0).unwrap();
        assert!(relative_frobenius(&(b * c(2.0, 0.0)), &a) < 1e-15);
        assert!(expected_precoder_gram(4, 4, 1.0).is_err());
    }

    #[test]
    fn identity_energy() {
        let exx = CMatrix::identity(36, 36);
        let eww = CMatrix::identity(4, 4);
        assert!((phase_energy(&exx, &eww, 1.0) - 36.0).abs() < 1e-12);
        assert!((average_power(&exx, &eww, 1.0) - 4.0).abs() < 1e-12);
        assert!((phase_energy(&exx, &eww, 2.0) - 72.0).abs() < 1e-12);
    }

    #[test]
    fn block_diagonal_matches_dense() {
        let mut rng = substream(3, 0, 0);
        let a = complex_gaussian_matrix(3, 3, &mut rng);
        let block = &a * a.adjoint();
        let bd = BlockDiagonalMoment {
            block: block.clone(),
            repeats: 5,
        };
        let mut dense = CMatrix::zeros(15, 15);
        for t in 0..5 {
            dense.view_mut((3 * t, 3 * t), (3, 3)).copy_from(&block);
        }
        let w = complex_gaussian_matrix(4, 4, &mut rng);
        let eww = w.adjoint() * w;
        let d = phase_energy(&dense, &eww, 1.3);
        let b = phase_energy(&bd, &eww, 1.3);
        assert!((d - b).abs() <= 1e-12 * d.abs());
    }

    #[test]
    fn scaling_factor() {
        assert_eq!(scale_factor(&[2.0, 4.0], 3.0).unwrap(), 0.75);
        let rho = scale_factor(&[2.0, 4.0], 8.0).unwrap();
        assert_eq!(rho, 2.0);
        assert_eq!(4.0 * rho, 8.0);
        assert_eq!(scale_factor(&[5.0], 5.0).unwrap(), 1.0);
        assert!(scale_factor(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn noiseless_superposition() {
        let mut rng = substream(4, 0, 0);
        let links: Vec<_> = (0..3)
            .map(|_| FronthaulLink::new(complex_gaussian_matrix(5, 4, &mut rng)).unwrap())
            .collect();
        let frames: Vec<_> = (0..3).map(|_| complex_gaussian_matrix(4, 6, &mut rng)).collect();
        let z = ota_transmit_with_noise(&frames, &links, 1.0, &CMatrix::zeros(4, 6)).unwrap();
        let sum = frames.iter().fold(CMatrix::zeros(4, 6), |a, f| a + f);
        assert!(relative_frobenius(&z, &sum) < 1e-10);
        let z4 = ota_transmit_with_noise(&frames, &links, 4.0, &CMatrix::zeros(4, 6)).unwrap();
        assert!(relative_frobenius(&z4, &(sum * c(2.0, 0.0))) < 1e-10);
    }
}
