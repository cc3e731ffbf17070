//! Scenario configuration.
//!
//! Configuration files are JSON objects. Every key is optional; omitted keys
//! take the defaults of [`SystemConfig::default`], and an empty file yields
//! the default scenario (16 APs, 8 UEs, 5 AP antennas, 4 CPU antennas).
//!
//! ```json
//! {
//!   "L": 16, "K": 8, "N": 5, "M": 4,
//!   "tau_u": 10,
//!   "p_max_w": 1.0,
//!   "rho_ul": 1.0,
//!   "modulation": "qam4",
//!   "estimator": "lmmse",
//!   "detector": "lmmse",
//!   "sweep": { "rho_ul_db": [-30, -20, -10, 0, 10] }
//! }
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symbol alphabet used by every UE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[serde(alias = "4qam", alias = "qpsk")]
    Qam4,
    #[serde(alias = "16qam")]
    Qam16,
    #[serde(alias = "64qam")]
    Qam64,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

/// CPU-side estimator of the over-the-air summed statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Ls,
    Lmmse,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Lmmse => "lmmse",
        })
    }
}

/// Data detector run on the (estimated) summed statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Lmmse,
    Ls,
    Ml,
    Soft,
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Lmmse => "lmmse",
            DetectorKind::Ls => "ls",
            DetectorKind::Ml => "ml",
            DetectorKind::Soft => "soft",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Self::Ls),
            "lmmse" => Ok(Self::Lmmse),
            _ => Err(Error::InvalidConfig(format!("unknown estimator {s:?} (expected ls or lmmse)"))),
        }
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lmmse" => Ok(Self::Lmmse),
            "ls" => Ok(Self::Ls),
            "ml" => Ok(Self::Ml),
            "soft" => Ok(Self::Soft),
            _ => Err(Error::InvalidConfig(format!(
                "unknown detector {s:?} (expected lmmse, ls, ml or soft)"
            ))),
        }
    }
}

/// How the APs evaluate `E[W^H W]` in the power report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecoderGramMode {
    /// Ensemble average over the fronthaul fading (closed form for i.i.d. channels).
    Expected,
    /// The AP's own realized `W_l^H W_l`.
    Realized,
}

/// Sweep grids used by the experiment drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// UL SNR grid (dB) for the NMSE and SER-vs-SNR experiments.
    pub rho_ul_db: Vec<f64>,
    /// AP power budgets (W) compared in the NMSE, SER and coded-BER experiments.
    pub p_max_w: Vec<f64>,
    /// AP power budget grid (dBm) for the SER-vs-P_max experiment.
    pub p_max_dbm: Vec<f64>,
    /// UL SNR operating points (dB) for the SER-vs-P_max experiment.
    pub rho_ul_db_at_pmax: Vec<f64>,
    /// Eb/N0 grid (dB) for the coded-BER experiment.
    pub ebn0_db: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            rho_ul_db: (-30..=10).step_by(5).map(f64::from).collect(),
            p_max_w: vec![1.0, 5.0],
            p_max_dbm: (0..=50).step_by(5).map(f64::from).collect(),
            rho_ul_db_at_pmax: vec![-4.0, -3.0],
            ebn0_db: (-12..=0).map(f64::from).collect(),
        }
    }
}

/// Stopping rule for error-counting experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoppingRule {
    /// Stop a sweep point once every curve has seen this many errors.
    pub error_target: u64,
    /// Never stop before this many trials.
    pub min_trials: u64,
    /// Trials processed between stopping checks.
    pub batch: u64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            error_target: 100,
            min_trials: 1_000,
            batch: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdpcSettings {
    /// Optional alist file; the built-in 802.11 n=1944 rate-1/2 code otherwise.
    pub alist: Option<String>,
    pub max_iters: usize,
    /// Normalization factor of the min-sum check update.
    pub alpha: f64,
}

impl Default for LdpcSettings {
    fn default() -> Self {
        Self {
            alist: None,
            max_iters: 50,
            alpha: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Number of APs.
    #[serde(rename = "L")]
    pub num_aps: usize,
    /// Number of single-antenna UEs.
    #[serde(rename = "K")]
    pub num_ues: usize,
    /// Antennas per AP.
    #[serde(rename = "N")]
    pub ap_antennas: usize,
    /// Antennas at the CPU.
    #[serde(rename = "M")]
    pub cpu_antennas: usize,
    /// UL channel uses per UE per coherence block.
    pub tau_u: usize,
    /// Maximum average AP transmit power in Watts.
    pub p_max_w: f64,
    /// UL SNR at average path loss, linear.
    pub rho_ul: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub carrier_freq_hz: f64,
    /// Side of the square UE deployment area in meters.
    pub area_side_m: f64,
    /// Radius of the AP circle around the CPU in meters.
    pub ap_radius_m: f64,
    /// Height of AP and CPU antennas above the UEs in meters.
    pub antenna_height_m: f64,
    pub seed: u64,
    pub trials: u64,
    pub modulation: Modulation,
    pub estimator: EstimatorKind,
    pub detector: DetectorKind,
    /// Trials sharing one AP-CPU channel draw; `None` keeps it for the whole run.
    pub fronthaul_coherence_blocks: Option<u64>,
    pub precoder_gram: PrecoderGramMode,
    /// Largest `|S|^K` searched exhaustively before switching to sphere search.
    pub exhaustive_budget: u64,
    pub ldpc: LdpcSettings,
    pub stopping: StoppingRule,
    pub sweep: SweepConfig,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            num_aps: 16,
            num_ues: 8,
            ap_antennas: 5,
            cpu_antennas: 4,
            tau_u: 10,
            p_max_w: 1.0,
            rho_ul: 1.0,
            bandwidth_hz: 1e6,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 5.0,
            carrier_freq_hz: 2e9,
            area_side_m: 200.0,
            ap_radius_m: 40.0,
            antenna_height_m: 5.0,
            seed: 1,
            trials: 100_000,
            modulation: Modulation::Qam4,
            estimator: EstimatorKind::Lmmse,
            detector: DetectorKind::Lmmse,
            fronthaul_coherence_blocks: None,
            precoder_gram: PrecoderGramMode::Expected,
            exhaustive_budget: 1 << 20,
            ldpc: LdpcSettings::default(),
            stopping: StoppingRule::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<SystemConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Parses and validates configuration text. Blank input yields the defaults.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let cfg: SystemConfig = if text.trim().is_empty() {
        SystemConfig::default()
    } else {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        for (name, v) in [
            ("L", self.num_aps),
            ("K", self.num_ues),
            ("N", self.ap_antennas),
            ("M", self.cpu_antennas),
            ("tau_u", self.tau_u),
        ] {
            if v == 0 {
                return bad(format!("{name} ≥ 1 violated ({name}=0)"));
            }
        }
        if self.num_aps * self.ap_antennas <= self.num_ues {
            return bad(format!(
                "L·N > K violated (L·N={}, K={})",
                self.num_aps * self.ap_antennas,
                self.num_ues
            ));
        }
        if self.ap_antennas < self.cpu_antennas {
            return bad(format!(
                "N ≥ M violated (N={}, M={})",
                self.ap_antennas, self.cpu_antennas
            ));
        }
        if !(self.p_max_w > 0.0) {
            return bad(format!("P_max > 0 violated (p_max_w={})", self.p_max_w));
        }
        if !(self.rho_ul > 0.0) {
            return bad(format!("rho_ul > 0 violated (rho_ul={})", self.rho_ul));
        }
        for (name, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("area_side_m", self.area_side_m),
            ("ap_radius_m", self.ap_radius_m),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} > 0 violated ({name}={v})"));
            }
        }
        if !(self.antenna_height_m >= 0.0) {
            return bad(format!(
                "antenna_height_m ≥ 0 violated ({})",
                self.antenna_height_m
            ));
        }
        if self.trials == 0 {
            return bad("trials ≥ 1 violated".into());
        }
        if self.fronthaul_coherence_blocks == Some(0) {
            return bad("fronthaul_coherence_blocks ≥ 1 violated".into());
        }
        if self.stopping.batch == 0 {
            return bad("stopping.batch ≥ 1 violated".into());
        }
        if !(self.ldpc.alpha > 0.0 && self.ldpc.alpha <= 1.0) {
            return bad(format!("ldpc.alpha in (0, 1] violated ({})", self.ldpc.alpha));
        }
        if self.precoder_gram == PrecoderGramMode::Expected && self.ap_antennas == self.cpu_antennas
        {
            return bad(
                "N > M required for precoder_gram = \"expected\" (E[W^H W] does not exist for N = M); use \"realized\""
                    .into(),
            );
        }
        Ok(())
    }

    /// Receiver noise power N0·B·NF in Watts.
    pub fn noise_power_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db;
        10f64.powf(dbm / 10.0) * 1e-3
    }

    /// AP power budget in units of the receiver noise power.
    pub fn normalized_budget(&self, p_max_w: f64) -> f64 {
        p_max_w / self.noise_power_w()
    }

    /// Stable hex fingerprint of the serialized configuration.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}
