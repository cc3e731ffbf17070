//! CPU-side estimation of the summed statistics from the received OTA frames.

use crate::config::EstimatorKind;
use crate::error::{Error, Result};
use crate::fronthaul::{num_transmissions, triangle_len};
use crate::linalg::{hermitian_eigen, hermitian_function, hermitian_part, CMatrix, CVector, C64};
use crate::moments::StatisticPrior;
use crate::uplink::LocalStatistics;

/// `x̂ = μ̄ + √ρ_c C̄ (ρ_c C̄ + I)^{-1} (z − √ρ_c μ̄)`.
pub fn lmmse_chunk_estimate(z: &CVector, mu: &CVector, cov: &CMatrix, rho_c: f64) -> Result<CVector> {
    let gain = lmmse_gain(cov, rho_c, 1.0)?;
    Ok(apply_lmmse(z, mu, &gain, rho_c))
}

/// `x̂ = z / √ρ_c`.
pub fn ls_chunk_estimate(z: &CVector, rho_c: f64) -> Result<CVector> {
    if !(rho_c > 0.0) {
        return Err(Error::Domain(format!("rho_c must be positive, got {rho_c}")));
    }
    Ok(z.unscale(rho_c.sqrt()))
}

/// `√ρ_c C̄ (ρ_c C̄ + σ² I)^+`; the pseudo-inverse acts only on the range of `C̄` when `σ² = 0`.
fn lmmse_gain(cov: &CMatrix, rho_c: f64, noise_var: f64) -> Result<CMatrix> {
    if !(rho_c > 0.0) || !(noise_var >= 0.0) {
        return Err(Error::Domain(format!(
            "need rho_c > 0 and noise variance ≥ 0, got {rho_c} and {noise_var}"
        )));
    }
    let (values, vectors) = hermitian_eigen(&hermitian_part(cov));
    if let Some(&min) = values.iter().find(|&&v| v < -1e-9 * values.iter().fold(1.0, |a: f64, b| a.max(b.abs()))) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    let amp = rho_c.sqrt();
    Ok(hermitian_function(&values, &vectors, |lambda| {
        let lambda = lambda.max(0.0);
        let den = rho_c * lambda + noise_var;
        if den > 0.0 {
            amp * lambda / den
        } else {
            0.0
        }
    }))
}

fn apply_lmmse(z: &CVector, mu: &CVector, gain: &CMatrix, rho_c: f64) -> CVector {
    let innovation = z - mu.scale(rho_c.sqrt());
    mu + gain * innovation
}

/// Per-chunk estimator for one phase with gains precomputed for fixed `(prior, ρ_c)`.
#[derive(Debug, Clone)]
pub struct ChunkEstimator {
    kind: EstimatorKind,
    rho_c: f64,
    len: usize,
    means: Vec<CVector>,
    gains: Vec<CMatrix>,
}

impl ChunkEstimator {
    /// `noise_var` is the fronthaul noise variance (1 after normalization).
    pub fn new(
        kind: EstimatorKind,
        prior: &impl StatisticPrior,
        chunk_len: usize,
        rho_c: f64,
        noise_var: f64,
    ) -> Result<Self> {
        if !(rho_c > 0.0) {
            return Err(Error::Domain(format!("rho_c must be positive, got {rho_c}")));
        }
        let len = prior.len();
        let chunks = num_transmissions(len, chunk_len);
        let (means, gains) = match kind {
            EstimatorKind::Ls => (Vec::new(), Vec::new()),
            EstimatorKind::Lmmse => {
                let mut means = Vec::with_capacity(chunks);
                let mut gains = Vec::with_capacity(chunks);
                for m in 0..chunks {
                    let (mu, cov) = prior.chunk_prior(m, chunk_len);
                    gains.push(lmmse_gain(&cov, rho_c, noise_var)?);
                    means.push(mu);
                }
                (means, gains)
            }
        };
        Ok(Self {
            kind,
            rho_c,
            len,
            means,
            gains,
        })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Estimates the unpadded summed statistic from the `M × M_i` received frame.
    pub fn estimate(&self, z: &CMatrix) -> Result<CVector> {
        let chunk_len = z.nrows();
        if num_transmissions(self.len, chunk_len) != z.ncols() {
            return Err(Error::Dimension(format!(
                "frame has {} columns, expected {}",
                z.ncols(),
                num_transmissions(self.len, chunk_len)
            )));
        }
        let mut out = CVector::zeros(self.len);
        let amp = self.rho_c.sqrt();
        for m in 0..z.ncols() {
            let zm = z.column(m).clone_owned();
            let est = match self.kind {
                EstimatorKind::Ls => zm.unscale(amp),
                EstimatorKind::Lmmse => apply_lmmse(&zm, &self.means[m], &self.gains[m], self.rho_c),
            };
            let base = m * chunk_len;
            for (p, v) in est.iter().enumerate() {
                if base + p < self.len {
                    out[base + p] = *v;
                }
            }
        }
        Ok(out)
    }
}

/// Reassembled CPU-side statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedStatistics {
    /// `T̂`, Hermitian with real diagonal.
    pub gram: CMatrix,
    /// `K × τ_u` matched-filter estimates.
    pub mf: CMatrix,
    pub estimator: EstimatorKind,
}

impl EstimatedStatistics {
    pub fn into_statistics(self) -> LocalStatistics {
        LocalStatistics {
            gram: self.gram,
            mf: self.mf,
        }
    }
}

/// Rebuilds the Hermitian `T̂` from its packed upper triangle (diagonal realified).
pub fn unpack_gramian(x: &CVector, k: usize) -> Result<CMatrix> {
    if x.len() != triangle_len(k) {
        return Err(Error::Dimension(format!(
            "packed Gramian has {} entries, expected {}",
            x.len(),
            triangle_len(k)
        )));
    }
    let mut gram = CMatrix::zeros(k, k);
    let mut n = 0;
    for j in 0..k {
        for jp in j..k {
            if j == jp {
                gram[(j, j)] = C64::new(x[n].re, 0.0);
            } else {
                gram[(j, jp)] = x[n];
                gram[(jp, j)] = x[n].conj();
            }
            n += 1;
        }
    }
    Ok(gram)
}

pub fn unpack_matched_filter(x: &CVector, k: usize, tau: usize) -> Result<CMatrix> {
    if x.len() != k * tau {
        return Err(Error::Dimension(format!(
            "packed matched filter has {} entries, expected {}",
            x.len(),
            k * tau
        )));
    }
    Ok(CMatrix::from_column_slice(k, tau, x.as_slice()))
}

pub fn unpack(
    x1: &CVector,
    x2: &CVector,
    k: usize,
    tau: usize,
    estimator: EstimatorKind,
) -> Result<EstimatedStatistics> {
    Ok(EstimatedStatistics {
        gram: unpack_gramian(x1, k)?,
        mf: unpack_matched_filter(x2, k, tau)?,
        estimator,
    })
}

/// Lower bound reported for a zero estimation error.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Running sums for `E‖x − x̂‖² / E‖x‖²` with a delta-method standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NmseAccumulator {
    pub trials: u64,
    err: f64,
    sig: f64,
    err2: f64,
    sig2: f64,
    cross: f64,
}

impl NmseAccumulator {
    pub fn push(&mut self, truth: &CVector, estimate: &CVector) {
        let e = (truth - estimate).norm_squared();
        let s = truth.norm_squared();
        self.push_energies(e, s);
    }

    pub fn push_energies(&mut self, err: f64, sig: f64) {
        self.trials += 1;
        self.err += err;
        self.sig += sig;
        self.err2 += err * err;
        self.sig2 += sig * sig;
        self.cross += err * sig;
    }

    pub fn merge(&mut self, other: &Self) {
        self.trials += other.trials;
        self.err += other.err;
        self.sig += other.sig;
        self.err2 += other.err2;
        self.sig2 += other.sig2;
        self.cross += other.cross;
    }

    pub fn ratio(&self) -> Result<f64> {
        if !(self.sig > 0.0) {
            return Err(Error::Domain("NMSE undefined for zero signal energy".into()));
        }
        Ok(self.err / self.sig)
    }

    pub fn nmse_db(&self) -> Result<f64> {
        let r = self.ratio()?;
        Ok(if r > 0.0 { (10.0 * r.log10()).max(NMSE_FLOOR_DB) } else { NMSE_FLOOR_DB })
    }

    /// Standard error of [`Self::nmse_db`] in dB.
    pub fn stderr_db(&self) -> Result<f64> {
        let r = self.ratio()?;
        let n = self.trials as f64;
        if self.trials < 2 || r == 0.0 {
            return Ok(0.0);
        }
        let mean_s = self.sig / n;
        // Var(e − r s) per trial
        let var = (self.err2 - 2.0 * r * self.cross + r * r * self.sig2) / n
            - ((self.err - r * self.sig) / n).powi(2);
        let se_ratio = (var.max(0.0) / (n - 1.0)).sqrt() / mean_s;
        Ok(10.0 / std::f64::consts::LN_10 * se_ratio / r)
    }
}

/// One-shot NMSE in dB over paired samples.
pub fn nmse_db(truth: &[CVector], estimate: &[CVector]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::Dimension(format!(
            "{} true vectors but {} estimates",
            truth.len(),
            estimate.len()
        )));
    }
    let mut acc = NmseAccumulator::default();
    for (x, xh) in truth.iter().zip(estimate) {
        if x.len() != xh.len() {
            return Err(Error::Dimension(format!("length {} vs {}", x.len(), xh.len())));
        }
        acc.push(x, xh);
    }
    acc.nmse_db()
}
