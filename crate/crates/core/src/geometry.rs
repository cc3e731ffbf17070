//! Network layout, path loss and spatial correlation matrices.

use std::f64::consts::PI;

use rand::Rng;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub ue_positions: Vec<Point>,
    pub ap_positions: Vec<Point>,
    pub cpu_position: Point,
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Drops the UEs uniformly on the square and places the APs evenly on a
/// circle around the CPU at the square's center.
///
/// UEs sit at height 0; AP and CPU antennas at `cfg.antenna_height_m`.
pub fn generate_layout<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> NetworkLayout {
    let side = cfg.area_side_m;
    let h = cfg.antenna_height_m;
    let ue_positions = (0..cfg.num_ues)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side, 0.0])
        .collect();
    let cpu_position = [side / 2.0, side / 2.0, h];
    let ap_positions = (0..cfg.num_aps)
        .map(|l| {
            let angle = 2.0 * PI * l as f64 / cfg.num_aps as f64;
            [
                cpu_position[0] + cfg.ap_radius_m * angle.cos(),
                cpu_position[1] + cfg.ap_radius_m * angle.sin(),
                h,
            ]
        })
        .collect();
    NetworkLayout {
        ue_positions,
        ap_positions,
        cpu_position,
    }
}

/// 3GPP urban-microcell large-scale fading at 2 GHz, in dB.
pub fn path_loss_db(d_m: f64) -> Result<f64> {
    if !(d_m > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs a positive distance, got {d_m} m"
        )));
    }
    Ok(-30.5 - 36.7 * d_m.log10())
}

/// Linear large-scale gain between two points.
pub fn path_gain(a: &Point, b: &Point) -> Result<f64> {
    Ok(10f64.powf(path_loss_db(distance(a, b))? / 10.0))
}

/// UE-AP spatial correlation matrices, indexed `[ap][ue]`.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    pub num_aps: usize,
    pub num_ues: usize,
    pub antennas: usize,
    /// Correlation matrices after normalization by `beta_avg`.
    pub r: Vec<Vec<CMatrix>>,
    /// Raw large-scale coefficients `trace(R_kl)/N` before normalization, `[ap][ue]`.
    pub beta: Vec<Vec<f64>>,
    /// Linear mean of `beta` over all UE-AP pairs.
    pub beta_avg: f64,
}

impl CorrelationSet {
    /// Wraps explicit correlation matrices without normalization (`beta_avg = 1`).
    pub fn from_matrices(r: Vec<Vec<CMatrix>>) -> Result<Self> {
        let num_aps = r.len();
        let num_ues = r.first().map_or(0, Vec::len);
        let antennas = r.first().and_then(|v| v.first()).map_or(0, |m| m.nrows());
        for row in &r {
            if row.len() != num_ues {
                return Err(Error::Dimension("ragged correlation set".into()));
            }
            for m in row {
                if m.nrows() != antennas || m.ncols() != antennas {
                    return Err(Error::Dimension(format!(
                        "expected {antennas}x{antennas} correlation matrix, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
            }
        }
        let beta = r
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| m.trace().re / antennas.max(1) as f64)
                    .collect()
            })
            .collect();
        Ok(Self {
            num_aps,
            num_ues,
            antennas,
            r,
            beta,
            beta_avg: 1.0,
        })
    }

    /// Uncorrelated channels `R_kl = beta[l][k] · I_N`, taken as already normalized.
    pub fn uncorrelated(antennas: usize, beta: Vec<Vec<f64>>) -> Self {
        let r = beta
            .iter()
            .map(|row| row.iter().map(|&b| scaled_identity(antennas, b)).collect())
            .collect();
        let num_aps = beta.len();
        let num_ues = beta.first().map_or(0, Vec::len);
        Self {
            num_aps,
            num_ues,
            antennas,
            r,
            beta,
            beta_avg: 1.0,
        }
    }

    /// Trace of the (normalized) correlation matrix of UE `k` at AP `l`.
    pub fn trace(&self, l: usize, k: usize) -> f64 {
        self.r[l][k].trace().re
    }
}

fn scaled_identity(n: usize, v: f64) -> CMatrix {
    CMatrix::identity(n, n) * C64::new(v, 0.0)
}

/// Uncorrelated UE-AP correlation matrices from the layout.
///
/// The returned matrices are divided by the linear average path gain so that
/// `rho_ul` is the SNR of an average-path-loss link.
pub fn build_correlations(layout: &NetworkLayout, cfg: &SystemConfig) -> Result<CorrelationSet> {
    let beta: Vec<Vec<f64>> = layout
        .ap_positions
        .iter()
        .map(|ap| {
            layout
                .ue_positions
                .iter()
                .map(|ue| path_gain(ue, ap))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let count = (layout.ap_positions.len() * layout.ue_positions.len()) as f64;
    let beta_avg = beta.iter().flatten().sum::<f64>() / count;
    let n = cfg.ap_antennas;
    let r = beta
        .iter()
        .map(|row| {
            row.iter()
                .map(|&b| scaled_identity(n, b / beta_avg))
                .collect()
        })
        .collect();
    Ok(CorrelationSet {
        num_aps: layout.ap_positions.len(),
        num_ues: layout.ue_positions.len(),
        antennas: n,
        r,
        beta,
        beta_avg,
    })
}

/// Linear path gain of each AP-CPU link.
pub fn fronthaul_gains(layout: &NetworkLayout) -> Result<Vec<f64>> {
    layout
        .ap_positions
        .iter()
        .map(|ap| path_gain(ap, &layout.cpu_position))
        .collect()
}
