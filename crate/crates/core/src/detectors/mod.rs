//! Symbol detection from (estimated or exact) summed statistics.

mod linear;
mod search;
mod whiten;

pub use linear::{clip_eigenvalues, hard_decisions, lmmse_detect, ls_detect, LinearDetection};
pub use search::{
    exact_llrs, exhaustive_maxlog_llrs, exhaustive_ml, sphere_maxlog_llrs, sphere_ml, SearchResult,
    TriangularModel,
};
pub use whiten::{whiten, WhitenedModel, CLIP_EPSILON};

use crate::config::DetectorKind;
use crate::error::Result;
use crate::modulation::Constellation;
use crate::uplink::LocalStatistics;

/// Hard labels (`K × τ_u`, indexed `[ue][t]`) and the number of clipped eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct HardDetection {
    pub labels: Vec<Vec<usize>>,
    pub clipped: usize,
}

/// Runs the chosen detector over all channel uses of a block.
///
/// `Soft` returns the ML decisions its LLRs are built around.
pub fn detect(
    kind: DetectorKind,
    stats: &LocalStatistics,
    rho_ul: f64,
    constellation: &Constellation,
    exhaustive_budget: u64,
) -> Result<HardDetection> {
    match kind {
        DetectorKind::Lmmse | DetectorKind::Ls => {
            let out = if kind == DetectorKind::Lmmse {
                lmmse_detect(&stats.gram, &stats.mf, rho_ul)?
            } else {
                ls_detect(&stats.gram, &stats.mf, rho_ul)?
            };
            Ok(HardDetection {
                labels: hard_decisions(&out.estimate, constellation),
                clipped: out.clipped,
            })
        }
        DetectorKind::Ml | DetectorKind::Soft => {
            let model = whiten(&stats.gram, &stats.mf);
            let tri = TriangularModel::new(&model.h_bar, rho_ul);
            let k = stats.gram.nrows();
            let tau = stats.mf.ncols();
            let use_sphere = (constellation.len() as f64).powi(k as i32) > exhaustive_budget as f64
                || kind == DetectorKind::Soft;
            let mut labels = vec![vec![0; tau]; k];
            for t in 0..tau {
                let y = tri.rotate(&model.y_bar.column(t).clone_owned());
                let best = if use_sphere {
                    sphere_ml(&tri, &y, constellation)
                } else {
                    exhaustive_ml(&tri, &y, constellation, exhaustive_budget)?
                };
                for (u, l) in best.labels.iter().enumerate() {
                    labels[u][t] = *l;
                }
            }
            Ok(HardDetection {
                labels,
                clipped: model.clipped,
            })
        }
    }
}

/// Max-log LLRs of every UE bit stream (`ln P(1)/P(0)` convention) over a block.
pub fn detect_soft(
    stats: &LocalStatistics,
    rho_ul: f64,
    constellation: &Constellation,
) -> (Vec<Vec<f64>>, usize) {
    let model = whiten(&stats.gram, &stats.mf);
    let tri = TriangularModel::new(&model.h_bar, rho_ul);
    let k = stats.gram.nrows();
    let tau = stats.mf.ncols();
    let bps = constellation.bits_per_symbol();
    let mut llrs = vec![Vec::with_capacity(tau * bps); k];
    for t in 0..tau {
        let y = tri.rotate(&model.y_bar.column(t).clone_owned());
        let per_ue = sphere_maxlog_llrs(&tri, &y, constellation);
        for (u, l) in per_ue.into_iter().enumerate() {
            llrs[u].extend(l);
        }
    }
    (llrs, model.clipped)
}
