//! First- and second-order statistics of the summed sufficient statistics.
//!
//! Channels are independent across APs, so per-AP moments add. For the
//! Gramian `x_l = vec_upper(H_l^H H_l)` the entry for UE pair `(j, j')` has
//! mean `tr R_jl` on the diagonal pairs (zero elsewhere) and variance
//! `tr(R_jl R_j'l)`; distinct entries are uncorrelated. For the matched
//! filter `t_l = H_l^H y_l` (zero mean, unit-power i.i.d. symbols):
//!
//! * `C_l = ρ E[(H_l^H H_l)²] + E[H_l^H H_l]`, both diagonal, with
//!   `E[H^H H]_kk = tr R_k` and `E[(H^H H)²]_kk = (tr R_k)² + tr(R_k Σ_k' R_k')`;
//! * `C_ll' = ρ E[H_l^H H_l] E[H_l'^H H_l']` for `l ≠ l'`.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::UeApSampler;
use crate::error::{Error, Result};
use crate::fronthaul::{triangle_len, triangle_pair, BlockDiagonalMoment};
use crate::geometry::CorrelationSet;
use crate::linalg::{complex_gaussian, CMatrix, CVector, C64};
use crate::modulation::Constellation;
use crate::rng::substream;

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.transpose().iter())
        .map(|(x, y)| (x * y).re)
        .sum()
}

/// Mean and (diagonal) covariance of the packed Gramians.
#[derive(Debug, Clone)]
pub struct Phase1Moments {
    pub num_ues: usize,
    pub per_ap_mean: Vec<Vec<f64>>,
    pub per_ap_var: Vec<Vec<f64>>,
    /// `μ^(1)`: mean of `Σ_l x_l^(1)`.
    pub mean: Vec<f64>,
    /// Diagonal of `C^(1)`.
    pub var: Vec<f64>,
}

impl Phase1Moments {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// `E[x_l x_l^H] = C_l + μ_l μ_l^H` for AP `l`.
    pub fn second_moment(&self, l: usize) -> CMatrix {
        let mu = &self.per_ap_mean[l];
        let var = &self.per_ap_var[l];
        let n = mu.len();
        CMatrix::from_fn(n, n, |a, b| {
            let v = mu[a] * mu[b] + if a == b { var[a] } else { 0.0 };
            C64::new(v, 0.0)
        })
    }

    /// Dense covariance `C^(1)`.
    pub fn covariance(&self) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            self.var.len(),
            self.var.iter().map(|&v| C64::new(v, 0.0)),
        ))
    }
}

pub fn phase1_moments(corr: &CorrelationSet) -> Phase1Moments {
    let k = corr.num_ues;
    let len = triangle_len(k);
    let mut per_ap_mean = Vec::with_capacity(corr.num_aps);
    let mut per_ap_var = Vec::with_capacity(corr.num_aps);
    for r in &corr.r {
        let mut mu = vec![0.0; len];
        let mut var = vec![0.0; len];
        for (n, (m, v)) in mu.iter_mut().zip(var.iter_mut()).enumerate() {
            let (j, jp) = triangle_pair(n, k);
            if j == jp {
                *m = r[j].trace().re;
            }
            *v = trace_product(&r[j], &r[jp]);
        }
        per_ap_mean.push(mu);
        per_ap_var.push(var);
    }
    let sum = |per: &Vec<Vec<f64>>| {
        (0..len)
            .map(|n| per.iter().map(|v| v[n]).sum())
            .collect::<Vec<f64>>()
    };
    Phase1Moments {
        num_ues: k,
        mean: sum(&per_ap_mean),
        var: sum(&per_ap_var),
        per_ap_mean,
        per_ap_var,
    }
}

/// Covariances of the matched-filter outputs for one channel use.
#[derive(Debug, Clone)]
pub struct Phase2Moments {
    pub rho_ul: f64,
    /// `diag(E[H_l^H H_l])` per AP.
    pub expected_gram: Vec<Vec<f64>>,
    /// `C_{l,t}` per AP.
    pub per_ap_cov: Vec<CMatrix>,
    /// `C_t` of `Σ_l t_{l,t}` including the cross-covariances.
    pub cov: CMatrix,
}

impl Phase2Moments {
    /// Cross-covariance `C_{ll',t}` between two distinct APs.
    pub fn cross_covariance(&self, l: usize, lp: usize) -> CMatrix {
        let a = &self.expected_gram[l];
        let b = &self.expected_gram[lp];
        CMatrix::from_diagonal(&CVector::from_iterator(
            a.len(),
            a.iter().zip(b).map(|(x, y)| C64::new(self.rho_ul * x * y, 0.0)),
        ))
    }

    /// `E[x_l^(2) x_l^(2)H]` for `τ_u` channel uses (zero mean, uncorrelated over t).
    pub fn second_moment(&self, l: usize, tau: usize) -> BlockDiagonalMoment {
        BlockDiagonalMoment {
            block: self.per_ap_cov[l].clone(),
            repeats: tau,
        }
    }
}

pub fn phase2_moments(corr: &CorrelationSet, rho_ul: f64) -> Phase2Moments {
    let k = corr.num_ues;
    let mut expected_gram = Vec::with_capacity(corr.num_aps);
    let mut per_ap_cov = Vec::with_capacity(corr.num_aps);
    for r in &corr.r {
        let total = r
            .iter()
            .fold(CMatrix::zeros(corr.antennas, corr.antennas), |a, m| a + m);
        let d: Vec<f64> = r.iter().map(|m| m.trace().re).collect();
        let cov = CMatrix::from_fn(k, k, |i, j| {
            if i == j {
                let fourth = d[i] * d[i] + trace_product(&r[i], &total);
                C64::new(rho_ul * fourth + d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        expected_gram.push(d);
        per_ap_cov.push(cov);
    }
    let mut cov = per_ap_cov
        .iter()
        .fold(CMatrix::zeros(k, k), |a, c| a + c);
    // Σ_{l≠l'} ρ D_l D_l' = ρ[(Σ_l D_l)² − Σ_l D_l²]
    for i in 0..k {
        let s: f64 = expected_gram.iter().map(|d| d[i]).sum();
        let s2: f64 = expected_gram.iter().map(|d| d[i] * d[i]).sum();
        cov[(i, i)] += C64::new(rho_ul * (s * s - s2), 0.0);
    }
    Phase2Moments {
        rho_ul,
        expected_gram,
        per_ap_cov,
        cov,
    }
}

/// Entrywise prior of a packed summed statistic, used to slice per-chunk priors.
pub trait StatisticPrior {
    fn len(&self) -> usize;
    fn mean(&self, a: usize) -> C64;
    fn cov(&self, a: usize, b: usize) -> C64;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean and covariance of chunk `m` (entries `mM..(m+1)M`, zero beyond `len`).
    fn chunk_prior(&self, m: usize, chunk_len: usize) -> (CVector, CMatrix) {
        let base = m * chunk_len;
        let len = self.len();
        let mean = CVector::from_fn(chunk_len, |p, _| {
            if base + p < len {
                self.mean(base + p)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let cov = CMatrix::from_fn(chunk_len, chunk_len, |p, q| {
            if base + p < len && base + q < len {
                self.cov(base + p, base + q)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        (mean, cov)
    }
}

impl StatisticPrior for Phase1Moments {
    fn len(&self) -> usize {
        self.mean.len()
    }
    fn mean(&self, a: usize) -> C64 {
        C64::new(self.mean[a], 0.0)
    }
    fn cov(&self, a: usize, b: usize) -> C64 {
        C64::new(if a == b { self.var[a] } else { 0.0 }, 0.0)
    }
}

/// Prior of the stacked matched-filter outputs over `tau` channel uses.
#[derive(Debug, Clone, Copy)]
pub struct Phase2Prior<'a> {
    pub moments: &'a Phase2Moments,
    pub tau: usize,
}

impl StatisticPrior for Phase2Prior<'_> {
    fn len(&self) -> usize {
        self.moments.cov.nrows() * self.tau
    }
    fn mean(&self, _a: usize) -> C64 {
        C64::new(0.0, 0.0)
    }
    fn cov(&self, a: usize, b: usize) -> C64 {
        let k = self.moments.cov.nrows();
        if a / k == b / k {
            self.moments.cov[(a % k, b % k)]
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// Monte Carlo estimates with batch-means standard errors.
#[derive(Debug, Clone)]
pub struct EmpiricalMoments {
    pub draws: usize,
    pub mean1: CVector,
    pub mean1_se: Vec<f64>,
    pub cov1: CMatrix,
    pub cov1_se: Vec<Vec<f64>>,
    pub cov2: CMatrix,
    pub cov2_se: Vec<Vec<f64>>,
    /// Per-AP variances `E|t_{l,k}|²` (the diagonal of `C_{l,t}`), `[ap][ue]`.
    pub own2: Vec<Vec<f64>>,
    pub own2_se: Vec<Vec<f64>>,
    /// Batch-means standard error of [`EmpiricalMoments::cross2_diag`].
    pub cross2_se: Vec<f64>,
}

impl EmpiricalMoments {
    /// Empirical `Σ_{l≠l'} C_{ll',t}` diagonal: total variance minus the per-AP parts.
    pub fn cross2_diag(&self) -> Vec<f64> {
        (0..self.cov2.nrows())
            .map(|k| self.cov2[(k, k)].re - self.own2.iter().map(|v| v[k]).sum::<f64>())
            .collect()
    }
}

struct BatchSums {
    n: usize,
    sum1: CVector,
    outer1: CMatrix,
    sum2: CVector,
    outer2: CMatrix,
    own_sum: Vec<C64>,
    own_sq: Vec<f64>,
}

struct BatchEstimate {
    m1: CVector,
    c1: CMatrix,
    c2: CMatrix,
    own: Vec<f64>,
}

impl BatchSums {
    fn finish(&self) -> BatchEstimate {
        let n = C64::new(self.n as f64, 0.0);
        let m1 = &self.sum1 / n;
        let c1 = &self.outer1 / n - &m1 * m1.adjoint();
        let m2 = &self.sum2 / n;
        let c2 = &self.outer2 / n - &m2 * m2.adjoint();
        let own = self
            .own_sum
            .iter()
            .zip(&self.own_sq)
            .map(|(s, q)| q / n.re - (s / n).norm_sqr())
            .collect();
        BatchEstimate { m1, c1, c2, own }
    }
}

/// Number of independent batches used for standard errors.
pub const ORACLE_BATCHES: usize = 50;

/// Empirical mean/covariance of `Σ_l x_l^(1)` and covariance of `Σ_l t_{l,t}`
/// from direct simulation of channels, 4-QAM symbols and AP noise.
pub fn mc_moment_oracle(
    corr: &CorrelationSet,
    rho_ul: f64,
    draws: usize,
    seed: u64,
) -> Result<EmpiricalMoments> {
    if draws < ORACLE_BATCHES * 2 {
        return Err(Error::Domain(format!(
            "need at least {} draws, got {draws}",
            ORACLE_BATCHES * 2
        )));
    }
    let sampler = UeApSampler::new(corr)?;
    let k = corr.num_ues;
    let len1 = triangle_len(k);
    let constellation = Constellation::qam4();
    let per_batch = draws / ORACLE_BATCHES;
    let amp = C64::new(rho_ul.sqrt(), 0.0);

    let batches: Vec<BatchSums> = (0..ORACLE_BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, crate::rng::streams::MOMENTS, b as u64);
            let mut acc = BatchSums {
                n: per_batch,
                sum1: CVector::zeros(len1),
                outer1: CMatrix::zeros(len1, len1),
                sum2: CVector::zeros(k),
                outer2: CMatrix::zeros(k, k),
                own_sum: vec![C64::new(0.0, 0.0); corr.num_aps * k],
                own_sq: vec![0.0; corr.num_aps * k],
            };
            let mut x1 = CVector::zeros(len1);
            let mut t = CVector::zeros(k);
            for _ in 0..per_batch {
                let hs = sampler.sample(&mut rng);
                let s = CVector::from_fn(k, |_, _| {
                    constellation.point(rng.random_range(0..constellation.len()))
                });
                x1.fill(C64::new(0.0, 0.0));
                t.fill(C64::new(0.0, 0.0));
                for (l, h) in hs.iter().enumerate() {
                    let gram = h.adjoint() * h;
                    let mut n = 0;
                    for j in 0..k {
                        for jp in j..k {
                            x1[n] += gram[(j, jp)];
                            n += 1;
                        }
                    }
                    let noise = CVector::from_fn(h.nrows(), |_, _| complex_gaussian(&mut rng));
                    let y = h * &s * amp + noise;
                    let tl = h.adjoint() * y;
                    for (i, v) in tl.iter().enumerate() {
                        acc.own_sum[l * k + i] += v;
                        acc.own_sq[l * k + i] += v.norm_sqr();
                    }
                    t += tl;
                }
                acc.sum1 += &x1;
                acc.outer1.ger(C64::new(1.0, 0.0), &x1, &x1.conjugate(), C64::new(1.0, 0.0));
                acc.sum2 += &t;
                acc.outer2.ger(C64::new(1.0, 0.0), &t, &t.conjugate(), C64::new(1.0, 0.0));
            }
            acc
        })
        .collect();

    let finished: Vec<BatchEstimate> = batches.iter().map(BatchSums::finish).collect();
    let nb = finished.len() as f64;
    let average = |get: &dyn Fn(&BatchEstimate) -> C64| finished.iter().map(get).sum::<C64>() / nb;
    // batch-means standard error of the averaged estimate
    let stderr = |get: &dyn Fn(&BatchEstimate) -> C64, center: C64| {
        let ss: f64 = finished.iter().map(|x| (get(x) - center).norm_sqr()).sum();
        (ss / (nb - 1.0)).sqrt() / nb.sqrt()
    };
    let mean1 = CVector::from_fn(len1, |a, _| average(&|x| x.m1[a]));
    let cov1 = CMatrix::from_fn(len1, len1, |a, b| average(&|x| x.c1[(a, b)]));
    let cov2 = CMatrix::from_fn(k, k, |a, b| average(&|x| x.c2[(a, b)]));
    let mean1_se = (0..len1).map(|a| stderr(&|x| x.m1[a], mean1[a])).collect();
    let cov1_se = (0..len1)
        .map(|a| (0..len1).map(|b| stderr(&|x| x.c1[(a, b)], cov1[(a, b)])).collect())
        .collect();
    let cov2_se = (0..k)
        .map(|a| (0..k).map(|b| stderr(&|x| x.c2[(a, b)], cov2[(a, b)])).collect())
        .collect();
    let own_at = |l: usize, i: usize| average(&|x| C64::new(x.own[l * k + i], 0.0));
    let own2: Vec<Vec<f64>> = (0..corr.num_aps)
        .map(|l| (0..k).map(|i| own_at(l, i).re).collect())
        .collect();
    let own2_se = (0..corr.num_aps)
        .map(|l| {
            (0..k)
                .map(|i| stderr(&|x| C64::new(x.own[l * k + i], 0.0), C64::new(own2[l][i], 0.0)))
                .collect()
        })
        .collect();
    let cross_of = |x: &BatchEstimate, i: usize| {
        C64::new(x.c2[(i, i)].re - (0..corr.num_aps).map(|l| x.own[l * k + i]).sum::<f64>(), 0.0)
    };
    let cross2_se = (0..k)
        .map(|i| stderr(&|x| cross_of(x, i), average(&|x| cross_of(x, i))))
        .collect();
    Ok(EmpiricalMoments {
        draws: per_batch * ORACLE_BATCHES,
        mean1,
        mean1_se,
        cov1,
        cov1_se,
        cov2,
        cov2_se,
        own2,
        own2_se,
        cross2_se,
    })
}
