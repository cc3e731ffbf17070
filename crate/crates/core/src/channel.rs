//! Quasi-static block-fading channel realizations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::CorrelationSet;
use crate::linalg::{complex_gaussian, complex_gaussian_matrix, hermitian_condition, psd_sqrt, CMatrix};

/// Channels of one coherence block.
#[derive(Debug, Clone)]
pub struct ChannelBlock {
    /// UE→AP channels, one `N × K` matrix per AP.
    pub h: Vec<CMatrix>,
    /// AP→CPU channels `G_l` (`N × M`); the physical channel is `G_l^H`.
    pub g: Vec<CMatrix>,
    pub block_index: u64,
}

/// Samples `h_kl = R_kl^{1/2} w` with `w ~ CN(0, I_N)`.
///
/// Square roots are computed once at construction.
#[derive(Debug, Clone)]
pub struct UeApSampler {
    sqrt: Vec<Vec<CMatrix>>,
    antennas: usize,
    num_ues: usize,
}

impl UeApSampler {
    pub fn new(corr: &CorrelationSet) -> Result<Self> {
        let sqrt = corr
            .r
            .iter()
            .map(|row| row.iter().map(psd_sqrt).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            sqrt,
            antennas: corr.antennas,
            num_ues: corr.num_ues,
        })
    }

    /// One `N × K` matrix per AP.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<CMatrix> {
        let n = self.antennas;
        self.sqrt
            .iter()
            .map(|row| {
                let mut h = CMatrix::zeros(n, self.num_ues);
                let mut w = crate::linalg::CVector::zeros(n);
                for (k, root) in row.iter().enumerate() {
                    for e in w.iter_mut() {
                        *e = complex_gaussian(rng);
                    }
                    h.set_column(k, &(root * &w));
                }
                h
            })
            .collect()
    }
}

pub fn sample_ue_ap<R: Rng + ?Sized>(corr: &CorrelationSet, rng: &mut R) -> Result<Vec<CMatrix>> {
    Ok(UeApSampler::new(corr)?.sample(rng))
}

/// Largest condition number of `G^H G` accepted as full column rank.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Checks that `G` has full column rank.
pub fn check_full_column_rank(g: &CMatrix) -> Result<()> {
    if g.ncols() > g.nrows() {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let condition = hermitian_condition(&(g.adjoint() * g));
    if !(condition < MAX_GRAM_CONDITION) {
        return Err(Error::Singular { condition });
    }
    Ok(())
}

/// Spatially uncorrelated AP→CPU channels: `G_l` has i.i.d. CN(0, `gains[l]`) entries.
pub fn sample_ap_cpu<R: Rng + ?Sized>(
    gains: &[f64],
    antennas: usize,
    cpu_antennas: usize,
    rng: &mut R,
) -> Result<Vec<CMatrix>> {
    if cpu_antennas > antennas {
        return Err(Error::Dimension(format!(
            "AP→CPU channel needs N ≥ M (N={antennas}, M={cpu_antennas})"
        )));
    }
    gains
        .iter()
        .map(|&beta| {
            let g = complex_gaussian_matrix(antennas, cpu_antennas, rng).scale(beta.sqrt());
            check_full_column_rank(&g)?;
            Ok(g)
        })
        .collect()
}
