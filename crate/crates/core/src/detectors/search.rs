//! Minimum-distance search over `S^K` on the triangularized whitened model.
//!
//! With `√ρ H̄ = Q R`, `‖ȳ − √ρ H̄ s‖² = ‖Q^H ȳ − R s‖²`, accumulated level by
//! level from `K−1` down to `0`. Exhaustive and sphere search share that
//! accumulation, so their metrics agree bit for bit. Ties break towards the
//! lexicographically smallest label vector.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::modulation::Constellation;

/// Upper-triangular factor of `√ρ H̄` and the rotation `Q^H`.
#[derive(Debug, Clone)]
pub struct TriangularModel {
    pub r: CMatrix,
    q_adj: CMatrix,
}

impl TriangularModel {
    pub fn new(h_bar: &CMatrix, rho_ul: f64) -> Self {
        let qr = h_bar.scale(rho_ul.sqrt()).qr();
        Self {
            r: qr.r(),
            q_adj: qr.q().adjoint(),
        }
    }

    pub fn num_ues(&self) -> usize {
        self.r.ncols()
    }

    /// `Q^H ȳ` for one channel use.
    pub fn rotate(&self, y_bar: &CVector) -> CVector {
        &self.q_adj * y_bar
    }

    #[inline]
    fn increment(&self, y: &CVector, level: usize, labels: &[usize], points: &[C64]) -> f64 {
        let mut b = y[level];
        for j in level + 1..labels.len() {
            b -= self.r[(level, j)] * points[labels[j]];
        }
        (b - self.r[(level, level)] * points[labels[level]]).norm_sqr()
    }

    /// Full metric of one hypothesis.
    pub fn metric(&self, y: &CVector, labels: &[usize], points: &[C64]) -> f64 {
        let mut d = 0.0;
        for level in (0..labels.len()).rev() {
            d += self.increment(y, level, labels, points);
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Label per UE.
    pub labels: Vec<usize>,
    pub metric: f64,
    /// Tree nodes visited.
    pub nodes: u64,
}

/// Restricts one UE's label to those whose bit `bit` equals `value`.
#[derive(Debug, Clone, Copy)]
struct Constraint {
    ue: usize,
    bit: usize,
    value: u8,
}

struct Sphere<'a> {
    model: &'a TriangularModel,
    y: &'a CVector,
    constellation: &'a Constellation,
    constraint: Option<Constraint>,
    current: Vec<usize>,
    best: f64,
    best_labels: Vec<usize>,
    nodes: u64,
    scratch: Vec<Vec<(f64, usize)>>,
}

impl Sphere<'_> {
    fn allowed(&self, level: usize, label: usize) -> bool {
        match self.constraint {
            Some(c) if c.ue == level => self.constellation.bit(label, c.bit) == c.value,
            _ => true,
        }
    }

    fn descend(&mut self, level: usize, partial: f64) {
        let mut cands = std::mem::take(&mut self.scratch[level]);
        cands.clear();
        let points = self.constellation.points();
        for label in 0..points.len() {
            if self.allowed(level, label) {
                self.current[level] = label;
                let inc = self.model.increment(self.y, level, &self.current, points);
                cands.push((inc, label));
            }
        }
        // Schnorr–Euchner order
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(inc, label) in &cands {
            let d = partial + inc;
            if d > self.best {
                break;
            }
            self.nodes += 1;
            self.current[level] = label;
            if level == 0 {
                if d < self.best || self.current < self.best_labels {
                    self.best = d;
                    self.best_labels.clone_from(&self.current);
                }
            } else {
                self.descend(level - 1, d);
            }
        }
        self.scratch[level] = cands;
    }
}

fn sphere_search(
    model: &TriangularModel,
    y: &CVector,
    constellation: &Constellation,
    constraint: Option<Constraint>,
) -> SearchResult {
    let k = model.num_ues();
    let mut s = Sphere {
        model,
        y,
        constellation,
        constraint,
        current: vec![0; k],
        best: f64::INFINITY,
        best_labels: vec![usize::MAX; k],
        nodes: 0,
        scratch: vec![Vec::with_capacity(constellation.len()); k],
    };
    if k > 0 {
        s.descend(k - 1, 0.0);
    }
    SearchResult {
        labels: s.best_labels,
        metric: s.best,
        nodes: s.nodes,
    }
}

/// Depth-first sphere decoder with a shrinking radius.
pub fn sphere_ml(model: &TriangularModel, y: &CVector, constellation: &Constellation) -> SearchResult {
    sphere_search(model, y, constellation, None)
}

/// Visits every hypothesis with the same level-wise accumulation as the sphere search.
fn enumerate(
    model: &TriangularModel,
    y: &CVector,
    points: &[C64],
    level: usize,
    partial: f64,
    current: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize], f64),
) {
    for label in 0..points.len() {
        current[level] = label;
        let d = partial + model.increment(y, level, current, points);
        if level == 0 {
            visit(current, d);
        } else {
            enumerate(model, y, points, level - 1, d, current, visit);
        }
    }
}

fn check_budget(k: usize, constellation: &Constellation, budget: u64) -> Result<()> {
    let size = (constellation.len() as f64).powi(k as i32);
    if size > budget as f64 {
        return Err(Error::Unsupported(format!(
            "exhaustive search over {size} hypotheses exceeds the budget of {budget}"
        )));
    }
    Ok(())
}

pub fn exhaustive_ml(
    model: &TriangularModel,
    y: &CVector,
    constellation: &Constellation,
    budget: u64,
) -> Result<SearchResult> {
    let k = model.num_ues();
    check_budget(k, constellation, budget)?;
    let mut best = f64::INFINITY;
    let mut best_labels = vec![usize::MAX; k];
    let mut nodes = 0u64;
    let mut current = vec![0; k];
    if k > 0 {
        enumerate(model, y, constellation.points(), k - 1, 0.0, &mut current, &mut |labels, d| {
            nodes += 1;
            if d < best || (d == best && labels < best_labels.as_slice()) {
                best = d;
                best_labels.copy_from_slice(labels);
            }
        });
    }
    Ok(SearchResult {
        labels: best_labels,
        metric: best,
        nodes,
    })
}

/// Per-UE max-log LLRs `min d(b=0) − min d(b=1)` via one ML search plus one
/// constrained counter-hypothesis search per bit.
pub fn sphere_maxlog_llrs(model: &TriangularModel, y: &CVector, constellation: &Constellation) -> Vec<Vec<f64>> {
    let k = model.num_ues();
    let bps = constellation.bits_per_symbol();
    let ml = sphere_ml(model, y, constellation);
    (0..k)
        .map(|ue| {
            (0..bps)
                .map(|bit| {
                    let value = constellation.bit(ml.labels[ue], bit);
                    let counter = sphere_search(
                        model,
                        y,
                        constellation,
                        Some(Constraint {
                            ue,
                            bit,
                            value: 1 - value,
                        }),
                    )
                    .metric;
                    if value == 0 {
                        ml.metric - counter
                    } else {
                        counter - ml.metric
                    }
                })
                .collect()
        })
        .collect()
}

/// Max-log LLRs by enumerating all of `S^K`.
pub fn exhaustive_maxlog_llrs(
    model: &TriangularModel,
    y: &CVector,
    constellation: &Constellation,
    budget: u64,
) -> Result<Vec<Vec<f64>>> {
    let k = model.num_ues();
    check_budget(k, constellation, budget)?;
    let bps = constellation.bits_per_symbol();
    // min metric per (ue, bit, value)
    let mut mins = vec![[f64::INFINITY; 2]; k * bps];
    let mut current = vec![0; k];
    if k > 0 {
        enumerate(model, y, constellation.points(), k - 1, 0.0, &mut current, &mut |labels, d| {
            for (ue, &label) in labels.iter().enumerate() {
                for bit in 0..bps {
                    let slot = &mut mins[ue * bps + bit][constellation.bit(label, bit) as usize];
                    if d < *slot {
                        *slot = d;
                    }
                }
            }
        });
    }
    Ok((0..k)
        .map(|ue| (0..bps).map(|bit| mins[ue * bps + bit][0] - mins[ue * bps + bit][1]).collect())
        .collect())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Exact LLRs `ln Σ_{b=1} e^{−d} − ln Σ_{b=0} e^{−d}` by enumeration.
pub fn exact_llrs(
    model: &TriangularModel,
    y: &CVector,
    constellation: &Constellation,
    budget: u64,
) -> Result<Vec<Vec<f64>>> {
    let k = model.num_ues();
    check_budget(k, constellation, budget)?;
    let bps = constellation.bits_per_symbol();
    let mut terms: Vec<[Vec<f64>; 2]> = vec![[Vec::new(), Vec::new()]; k * bps];
    let mut current = vec![0; k];
    if k > 0 {
        enumerate(model, y, constellation.points(), k - 1, 0.0, &mut current, &mut |labels, d| {
            for (ue, &label) in labels.iter().enumerate() {
                for bit in 0..bps {
                    terms[ue * bps + bit][constellation.bit(label, bit) as usize].push(-d);
                }
            }
        });
    }
    Ok((0..k)
        .map(|ue| {
            (0..bps)
                .map(|bit| {
                    let t = &terms[ue * bps + bit];
                    log_sum_exp(&t[1]) - log_sum_exp(&t[0])
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Modulation;
    use crate::linalg::complex_gaussian_matrix;
    use crate::rng::substream;

    fn instance(k: usize, seed: u64, rho: f64, c: &Constellation) -> (TriangularModel, CVector, Vec<usize>) {
        let mut rng = substream(seed, 0, 0);
        let h = complex_gaussian_matrix(k, k, &mut rng);
        let labels: Vec<usize> = (0..k).map(|i| (seed as usize * 7 + i * 3) % c.len()).collect();
        let s = CVector::from_iterator(k, labels.iter().map(|&l| c.point(l)));
        let noise = complex_gaussian_matrix(k, 1, &mut rng).column(0).clone_owned();
        let y = &h * &s * C64::new(rho.sqrt(), 0.0) + noise;
        let tri = TriangularModel::new(&h, rho);
        let yr = tri.rotate(&y);
        (tri, yr, labels)
    }

    #[test]
    fn single_ue_noiseless() {
        let c = Constellation::qam4();
        let tri = TriangularModel::new(&CMatrix::identity(1, 1), 1.0);
        for label in 0..4 {
            let y = CVector::from_element(1, c.point(label));
            assert_eq!(sphere_ml(&tri, &y, &c).labels, vec![label]);
            assert_eq!(exhaustive_ml(&tri, &y, &c, 1 << 20).unwrap().labels, vec![label]);
        }
    }

    #[test]
    fn triangular_metric_matches_direct_norm() {
        let c = Constellation::qam4();
        let mut rng = substream(9, 0, 0);
        let h = complex_gaussian_matrix(3, 3, &mut rng);
        let y = complex_gaussian_matrix(3, 1, &mut rng).column(0).clone_owned();
        let rho: f64 = 2.0;
        let tri = TriangularModel::new(&h, rho);
        let yr = tri.rotate(&y);
        let labels = [1, 3, 2];
        let s = CVector::from_iterator(3, labels.iter().map(|&l| c.point(l)));
        let direct = (&y - &h * s * C64::new(rho.sqrt(), 0.0)).norm_squared();
        assert!((tri.metric(&yr, &labels, c.points()) - direct).abs() < 1e-10 * direct.max(1.0));
    }

    #[test]
    fn sphere_equals_exhaustive_small() {
        let c = Constellation::new(Modulation::Qam16);
        for seed in 0..200 {
            let (tri, y, _) = instance(3, seed, 3.0, &c);
            let sphere = sphere_ml(&tri, &y, &c);
            let full = exhaustive_ml(&tri, &y, &c, 1 << 20).unwrap();
            assert_eq!(sphere.labels, full.labels);
            assert_eq!(sphere.metric.to_bits(), full.metric.to_bits());
            assert!(sphere.nodes <= full.nodes);
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        let c = Constellation::qam4();
        // zero channel: every hypothesis has the same metric
        let tri = TriangularModel::new(&CMatrix::zeros(2, 2), 1.0);
        let y = CVector::zeros(2);
        assert_eq!(sphere_ml(&tri, &y, &c).labels, vec![0, 0]);
        assert_eq!(exhaustive_ml(&tri, &y, &c, 16).unwrap().labels, vec![0, 0]);
    }

    #[test]
    fn budget_enforced() {
        let c = Constellation::qam4();
        let (tri, y, _) = instance(3, 1, 1.0, &c);
        assert!(exhaustive_ml(&tri, &y, &c, 63).is_err());
        assert!(exhaustive_ml(&tri, &y, &c, 64).is_ok());
    }

    #[test]
    fn maxlog_sphere_equals_exhaustive() {
        let c = Constellation::qam4();
        for seed in 0..200 {
            let (tri, y, _) = instance(3, seed, 0.5, &c);
            let a = sphere_maxlog_llrs(&tri, &y, &c);
            let b = exhaustive_maxlog_llrs(&tri, &y, &c, 1 << 20).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn equidistant_single_ue_llr_is_zero() {
        let c = Constellation::qam4();
        let tri = TriangularModel::new(&CMatrix::identity(1, 1), 1.0);
        let y = CVector::zeros(1);
        for llr in exact_llrs(&tri, &y, &c, 4).unwrap()[0].iter().chain(&sphere_maxlog_llrs(&tri, &y, &c)[0]) {
            assert!(llr.abs() < 1e-15);
        }
    }

    #[test]
    fn maxlog_sign_matches_hard_decision() {
        let c = Constellation::qam4();
        for seed in 0..100 {
            let (tri, y, _) = instance(1, seed, 1.0, &c);
            let ml = sphere_ml(&tri, &y, &c).labels[0];
            for (bit, llr) in sphere_maxlog_llrs(&tri, &y, &c)[0].iter().enumerate() {
                // positive LLR favours bit 1
                assert_eq!((*llr > 0.0) as u8, c.bit(ml, bit));
            }
        }
    }

    #[test]
    fn log_sum_exp_stable() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
