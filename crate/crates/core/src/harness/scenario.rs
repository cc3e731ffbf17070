//! One network drop, its operating points and the per-trial signal chain.

use std::sync::Arc;

use rand::Rng;

use crate::channel::{sample_ap_cpu, UeApSampler};
use crate::combiner::{unpack, ChunkEstimator, EstimatedStatistics};
use crate::config::{EstimatorKind, PrecoderGramMode, SystemConfig};
use crate::error::{Error, Result};
use crate::fronthaul::{
    average_power, chunk, expected_precoder_gram, num_transmissions, pack_gramian, pack_matched_filter,
    scale_factor, triangle_index, triangle_len, FronthaulLink, Phase,
};
use crate::geometry::{build_correlations, fronthaul_gains, generate_layout, CorrelationSet, NetworkLayout};
use crate::linalg::{complex_gaussian_matrix, CMatrix, CVector, C64};
use crate::modulation::{Constellation, SymbolFrame};
use crate::moments::{phase1_moments, phase2_moments, Phase1Moments, Phase2Moments, Phase2Prior};
use crate::rng::{streams, substream, SimRng};
use crate::uplink::LocalStatistics;

/// Fixed network realization shared by every trial of a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub layout: NetworkLayout,
    pub corr: CorrelationSet,
    pub sampler: UeApSampler,
    /// AP→CPU path gains `β_l` (CPU noise is normalized to unit variance).
    pub fronthaul_gains: Vec<f64>,
    pub constellation: Constellation,
    pub phase1: Phase1Moments,
    /// `E[W_l^H W_l]` used in the power reports.
    pub eww: Vec<CMatrix>,
    fixed_links: Option<Arc<Vec<FronthaulLink>>>,
}

impl Scenario {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = generate_layout(cfg, &mut substream(cfg.seed, streams::LAYOUT, 0));
        let corr = build_correlations(&layout, cfg)?;
        let sampler = UeApSampler::new(&corr)?;
        let fronthaul_gains = fronthaul_gains(&layout)?;
        let mut s = Self {
            cfg: cfg.clone(),
            layout,
            phase1: phase1_moments(&corr),
            corr,
            sampler,
            fronthaul_gains,
            constellation: Constellation::new(cfg.modulation),
            eww: Vec::new(),
            fixed_links: None,
        };
        if cfg.fronthaul_coherence_blocks.is_none() {
            s.fixed_links = Some(Arc::new(s.draw_links(0)?));
        }
        s.eww = match cfg.precoder_gram {
            PrecoderGramMode::Expected => s
                .fronthaul_gains
                .iter()
                .map(|&b| expected_precoder_gram(cfg.ap_antennas, cfg.cpu_antennas, b))
                .collect::<Result<_>>()?,
            PrecoderGramMode::Realized => {
                let links = s.fixed_links.as_ref().ok_or_else(|| {
                    Error::InvalidConfig(
                        "precoder_gram = \"realized\" needs a fixed fronthaul (fronthaul_coherence_blocks unset)"
                            .into(),
                    )
                })?;
                links.iter().map(|l| l.w.adjoint() * &l.w).collect()
            }
        };
        Ok(s)
    }

    pub fn num_ues(&self) -> usize {
        self.cfg.num_ues
    }

    /// Fronthaul links of fronthaul block `block`, drawn from their own stream.
    pub fn draw_links(&self, block: u64) -> Result<Vec<FronthaulLink>> {
        let mut rng = substream(self.cfg.seed, streams::FRONTHAUL, block);
        sample_ap_cpu(
            &self.fronthaul_gains,
            self.cfg.ap_antennas,
            self.cfg.cpu_antennas,
            &mut rng,
        )?
        .into_iter()
        .map(FronthaulLink::new)
        .collect()
    }

    /// Links in force at `trial`.
    pub fn links(&self, trial: u64) -> Result<Arc<Vec<FronthaulLink>>> {
        match (&self.fixed_links, self.cfg.fronthaul_coherence_blocks) {
            (Some(links), _) => Ok(links.clone()),
            (None, Some(blocks)) => Ok(Arc::new(self.draw_links(trial / blocks)?)),
            (None, None) => unreachable!("fixed links exist when the coherence is unbounded"),
        }
    }

    /// Power reports, `ρ_c` feedback and estimators for `(ρ_ul, P_max)`.
    pub fn operating_point(&self, rho_ul: f64, p_max_w: f64) -> Result<OperatingPoint> {
        self.operating_point_tau(rho_ul, p_max_w, self.cfg.tau_u)
    }

    pub fn operating_point_tau(&self, rho_ul: f64, p_max_w: f64, tau: usize) -> Result<OperatingPoint> {
        if !(rho_ul > 0.0) || !(p_max_w > 0.0) {
            return Err(Error::Domain(format!(
                "operating point needs rho_ul > 0 and P_max > 0, got {rho_ul} and {p_max_w}"
            )));
        }
        let m = self.cfg.cpu_antennas;
        let phase2 = phase2_moments(&self.corr, rho_ul);
        let powers1: Vec<f64> = (0..self.cfg.num_aps)
            .map(|l| average_power(&self.phase1.second_moment(l), &self.eww[l], 1.0))
            .collect();
        let powers2: Vec<f64> = (0..self.cfg.num_aps)
            .map(|l| average_power(&phase2.second_moment(l, tau), &self.eww[l], 1.0))
            .collect();
        let budget = self.cfg.normalized_budget(p_max_w);
        let rho_c = [scale_factor(&powers1, budget)?, scale_factor(&powers2, budget)?];
        let prior2 = Phase2Prior {
            moments: &phase2,
            tau,
        };
        let build = |kind| -> Result<[ChunkEstimator; 2]> {
            Ok([
                ChunkEstimator::new(kind, &self.phase1, m, rho_c[0], 1.0)?,
                ChunkEstimator::new(kind, &prior2, m, rho_c[1], 1.0)?,
            ])
        };
        Ok(OperatingPoint {
            rho_ul,
            p_max_w,
            tau,
            budget,
            rho_c,
            reports: [powers1, powers2],
            ls: build(EstimatorKind::Ls)?,
            lmmse: build(EstimatorKind::Lmmse)?,
            phase2,
        })
    }

    /// Uniform random labels for every UE and channel use.
    pub fn random_frame<R: Rng + ?Sized>(&self, tau: usize, rng: &mut R) -> SymbolFrame {
        let c = &self.constellation;
        let k = self.num_ues();
        let labels: Vec<Vec<usize>> = (0..k)
            .map(|_| (0..tau).map(|_| rng.random_range(0..c.len())).collect())
            .collect();
        let bits = labels
            .iter()
            .map(|ls| {
                ls.iter()
                    .flat_map(|&l| (0..c.bits_per_symbol()).map(move |b| c.bit(l, b)))
                    .collect()
            })
            .collect();
        let s = CMatrix::from_fn(k, tau, |i, t| c.point(labels[i][t]));
        SymbolFrame { s, labels, bits }
    }

    /// Draws everything random in one trial, in a fixed order: channels,
    /// payload, AP noise, then the fronthaul noise of both phases.
    pub fn draw(&self, rng: &mut SimRng, payload: impl FnOnce(&mut SimRng) -> SymbolFrame) -> TrialDraw {
        let h = self.sampler.sample(rng);
        let frame = payload(rng);
        let tau = frame.s.ncols();
        let n = self.cfg.ap_antennas;
        let m = self.cfg.cpu_antennas;
        let k = self.num_ues();
        let mut grams = Vec::with_capacity(h.len());
        let mut signal = Vec::with_capacity(h.len());
        let mut noise_mf = Vec::with_capacity(h.len());
        for hl in &h {
            let noise = complex_gaussian_matrix(n, tau, rng);
            let ha = hl.adjoint();
            let gram = &ha * hl;
            signal.push(&gram * &frame.s);
            noise_mf.push(ha * noise);
            grams.push(gram);
        }
        let fh_noise = [
            complex_gaussian_matrix(m, num_transmissions(triangle_len(k), m), rng),
            complex_gaussian_matrix(m, num_transmissions(k * tau, m), rng),
        ];
        TrialDraw {
            h,
            frame,
            grams,
            signal,
            noise_mf,
            fh_noise,
        }
    }

    /// Local statistics at SNR `rho_ul`: `T_l` and `t_l = √ρ T_l S + H_l^H N_l`.
    pub fn local_statistics(&self, draw: &TrialDraw, rho_ul: f64) -> Vec<LocalStatistics> {
        let amp = C64::new(rho_ul.sqrt(), 0.0);
        draw.grams
            .iter()
            .zip(draw.signal.iter().zip(&draw.noise_mf))
            .map(|(g, (sig, nz))| LocalStatistics {
                gram: g.clone(),
                mf: sig * amp + nz,
            })
            .collect()
    }

    /// Runs both fronthaul phases for one trial.
    pub fn observe(
        &self,
        op: &OperatingPoint,
        draw: &TrialDraw,
        links: &[FronthaulLink],
    ) -> Result<Observation> {
        let stats = self.local_statistics(draw, op.rho_ul);
        let m = self.cfg.cpu_antennas;
        let k = self.num_ues();
        let mut truth = [CVector::zeros(triangle_len(k)), CVector::zeros(k * op.tau)];
        let mut frames: [Vec<CMatrix>; 2] = [Vec::new(), Vec::new()];
        for st in &stats {
            let x1 = pack_gramian(&st.gram).data;
            let x2 = pack_matched_filter(&st.mf).data;
            frames[0].push(chunk(&x1, m));
            frames[1].push(chunk(&x2, m));
            truth[0] += x1;
            truth[1] += x2;
        }
        let z = [
            transmit(&frames[0], links, op.rho_c[0], &draw.fh_noise[0])?,
            transmit(&frames[1], links, op.rho_c[1], &draw.fh_noise[1])?,
        ];
        let wired = LocalStatistics {
            gram: stats.iter().fold(CMatrix::zeros(k, k), |a, s| a + &s.gram),
            mf: stats.iter().fold(CMatrix::zeros(k, op.tau), |a, s| a + &s.mf),
        };
        Ok(Observation {
            truth,
            z,
            wired,
            frames,
        })
    }

    /// CPU-side estimate with the packed vectors it was built from (diagonal realified).
    pub fn estimate(
        &self,
        op: &OperatingPoint,
        obs: &Observation,
        kind: EstimatorKind,
    ) -> Result<(EstimatedStatistics, [CVector; 2])> {
        let est = op.estimators(kind);
        let mut x1 = est[0].estimate(&obs.z[0])?;
        let x2 = est[1].estimate(&obs.z[1])?;
        let k = self.num_ues();
        for j in 0..k {
            let d = triangle_index(j, j, k);
            x1[d] = C64::new(x1[d].re, 0.0);
        }
        let stats = unpack(&x1, &x2, k, op.tau, kind)?;
        Ok((stats, [x1, x2]))
    }
}

fn transmit(frames: &[CMatrix], links: &[FronthaulLink], rho_c: f64, noise: &CMatrix) -> Result<CMatrix> {
    crate::fronthaul::ota_transmit_with_noise(frames, links, rho_c, noise)
}

/// Everything that depends on `(ρ_ul, P_max)` but not on the trial.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub rho_ul: f64,
    pub p_max_w: f64,
    pub tau: usize,
    /// `P_max / σ²`.
    pub budget: f64,
    /// `[ρ_c^(1), ρ_c^(2)]`.
    pub rho_c: [f64; 2],
    /// Per-AP power reports at `ρ_c = 1`, per phase.
    pub reports: [Vec<f64>; 2],
    pub phase2: Phase2Moments,
    ls: [ChunkEstimator; 2],
    lmmse: [ChunkEstimator; 2],
}

impl OperatingPoint {
    pub fn estimators(&self, kind: EstimatorKind) -> &[ChunkEstimator; 2] {
        match kind {
            EstimatorKind::Ls => &self.ls,
            EstimatorKind::Lmmse => &self.lmmse,
        }
    }

    pub fn rho_c(&self, phase: Phase) -> f64 {
        self.rho_c[phase.index()]
    }
}

/// Random inputs of one trial; the matched filter is rebuilt per `ρ_ul`.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub h: Vec<CMatrix>,
    pub frame: SymbolFrame,
    pub grams: Vec<CMatrix>,
    /// `T_l S` per AP.
    signal: Vec<CMatrix>,
    /// `H_l^H N_l` per AP.
    noise_mf: Vec<CMatrix>,
    /// Unit-variance CPU noise of phases 1 and 2.
    pub fh_noise: [CMatrix; 2],
}

#[derive(Debug, Clone)]
pub struct Observation {
    /// Exact packed `Σ_l x_l` of both phases.
    pub truth: [CVector; 2],
    /// Received frames `Z^(1)`, `Z^(2)`.
    pub z: [CMatrix; 2],
    /// Exact summed statistics (wired fronthaul).
    pub wired: LocalStatistics,
    /// Chunked transmit matrices per AP, per phase.
    pub frames: [Vec<CMatrix>; 2],
}
