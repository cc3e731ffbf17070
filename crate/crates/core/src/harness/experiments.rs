use std::collections::BTreeMap;

use crate::channel::sample_ap_cpu;
use crate::combiner::NmseAccumulator;
use crate::config::{db_to_linear, dbm_to_w, DetectorKind, EstimatorKind, StoppingRule, SystemConfig};
use crate::detectors::{detect, detect_soft};
use crate::error::{Error, Result};
use crate::fronthaul::{expected_precoder_gram, expected_precoder_gram_mc, triangle_len, triangle_pair, FronthaulLink};
use crate::geometry::CorrelationSet;
use crate::ldpc::{ieee80211_n1944_r12, read_alist, Encoder, MinSumDecoder};
use crate::linalg::{complex_gaussian_matrix, C64};
use crate::modulation::modulate;
use crate::moments::{mc_moment_oracle, phase1_moments, phase2_moments};
use crate::rng::{streams, substream};
use crate::uplink::LocalStatistics;

use super::scenario::{OperatingPoint, Scenario, TrialDraw};
use super::stats::ErrorCounter;
use super::{fmt_param, parallel_trials, ExperimentResult, ResultRow};

/// Curve selection shared by the experiment drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    pub estimators: Vec<EstimatorKind>,
    pub detector: DetectorKind,
    pub wired_baseline: bool,
}

impl ExperimentOptions {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self {
            estimators: vec![EstimatorKind::Ls, EstimatorKind::Lmmse],
            detector: cfg.detector,
            wired_baseline: true,
        }
    }
}

fn new_result(cfg: &SystemConfig, experiment: &str, sweep: &str, metric: &str) -> ExperimentResult {
    ExperimentResult {
        experiment: experiment.into(),
        sweep_variable: sweep.into(),
        metric_name: metric.into(),
        seed: cfg.seed,
        fingerprint: cfg.fingerprint(),
        rows: Vec::new(),
        counters: BTreeMap::new(),
    }
}

/// NMSE of both estimated statistics over `rho_ul_db × p_max_w`, `cfg.trials` trials per point.
pub fn run_nmse(cfg: &SystemConfig, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    let sc = Scenario::new(cfg)?;
    let mut points = Vec::new();
    for &p in &cfg.sweep.p_max_w {
        for &r in &cfg.sweep.rho_ul_db {
            points.push((p, r, sc.operating_point(db_to_linear(r), p)?));
        }
    }
    let ests = &opts.estimators;
    // [point][estimator][phase]
    let mut acc = vec![vec![[NmseAccumulator::default(); 2]; ests.len()]; points.len()];
    let batch = cfg.stopping.batch.max(1);
    let mut start = 0;
    while start < cfg.trials {
        let end = (start + batch).min(cfg.trials);
        let results = parallel_trials(start..end, |t| -> Result<Vec<[(f64, f64); 2]>> {
            let mut rng = substream(cfg.seed, streams::NMSE, t);
            let draw = sc.draw(&mut rng, |r| sc.random_frame(cfg.tau_u, r));
            let links = sc.links(t)?;
            let mut out = Vec::with_capacity(points.len() * ests.len());
            for (_, _, op) in &points {
                let obs = sc.observe(op, &draw, &links)?;
                for &kind in ests {
                    let (_, xhat) = sc.estimate(op, &obs, kind)?;
                    let mut e = [(0.0, 0.0); 2];
                    for ph in 0..2 {
                        e[ph] = ((&obs.truth[ph] - &xhat[ph]).norm_squared(), obs.truth[ph].norm_squared());
                    }
                    out.push(e);
                }
            }
            Ok(out)
        });
        for r in results {
            let r = r?;
            for (pi, a) in acc.iter_mut().enumerate() {
                for (ei, slot) in a.iter_mut().enumerate() {
                    let e = r[pi * ests.len() + ei];
                    slot[0].push_energies(e[0].0, e[0].1);
                    slot[1].push_energies(e[1].0, e[1].1);
                }
            }
        }
        start = end;
    }
    let mut res = new_result(cfg, "nmse", "rho_ul_db", "nmse_db");
    for (pi, (p, r, _)) in points.iter().enumerate() {
        for (ei, kind) in ests.iter().enumerate() {
            for (ph, name) in ["gramian", "matched_filter"].iter().enumerate() {
                let a = &acc[pi][ei][ph];
                res.rows.push(ResultRow {
                    value: *r,
                    metric: a.nmse_db()?,
                    stderr: a.stderr_db()?,
                    trials: a.trials,
                    label: format!("{name}/{kind}/pmax={}W", fmt_param(*p)),
                });
            }
        }
    }
    Ok(res)
}

/// A sweep point whose curves share one observation per trial.
struct Group {
    value: f64,
    labels: Vec<String>,
}

#[derive(Default)]
struct TrialOutcome {
    /// `(errors, units)` per curve of each active group.
    counts: Vec<Vec<(u64, u64)>>,
    clipped: u64,
    failures: u64,
}

#[derive(Clone, Copy, PartialEq)]
enum StopOn {
    Errors,
    ErrorTrials,
}

struct Counted {
    counters: Vec<Vec<ErrorCounter>>,
    clipped: u64,
    failures: u64,
}

/// Batched error counting: a group stops once every curve reached the error
/// target (after `min_trials`) or at `cap` trials.
fn count_errors(
    groups: &[Group],
    cap: u64,
    stopping: &StoppingRule,
    stop_on: StopOn,
    eval: impl Fn(u64, &[usize]) -> Result<TrialOutcome> + Sync + Send,
) -> Result<Counted> {
    let mut counters: Vec<Vec<ErrorCounter>> =
        groups.iter().map(|g| vec![ErrorCounter::default(); g.labels.len()]).collect();
    let mut active: Vec<usize> = (0..groups.len()).collect();
    let (mut clipped, mut failures) = (0, 0);
    let mut start = 0;
    while !active.is_empty() && start < cap {
        let end = (start + stopping.batch.max(1)).min(cap);
        let results = parallel_trials(start..end, |t| eval(t, &active));
        for r in results {
            let r = r?;
            clipped += r.clipped;
            failures += r.failures;
            for (&g, counts) in active.iter().zip(&r.counts) {
                for (c, &(e, u)) in counters[g].iter_mut().zip(counts) {
                    c.push(e, u);
                }
            }
        }
        start = end;
        active.retain(|&g| {
            let done = counters[g].iter().all(|c| {
                let seen = match stop_on {
                    StopOn::Errors => c.errors,
                    StopOn::ErrorTrials => c.error_trials,
                };
                c.trials >= stopping.min_trials && seen >= stopping.error_target
            });
            !done
        });
    }
    Ok(Counted {
        counters,
        clipped,
        failures,
    })
}

fn push_counted(res: &mut ExperimentResult, groups: &[Group], counted: &Counted) {
    for (g, cs) in groups.iter().zip(&counted.counters) {
        for (label, c) in g.labels.iter().zip(cs) {
            res.rows.push(ResultRow {
                value: g.value,
                metric: c.rate(),
                stderr: c.stderr(),
                trials: c.trials,
                label: label.clone(),
            });
        }
    }
    res.counters.insert("clipped_eigenvalues".into(), counted.clipped);
    res.counters.insert("detector_failures".into(), counted.failures);
}

fn symbol_errors(detected: &[Vec<usize>], sent: &[Vec<usize>]) -> u64 {
    detected
        .iter()
        .zip(sent)
        .map(|(d, s)| d.iter().zip(s).filter(|(a, b)| a != b).count() as u64)
        .sum()
}

/// Hard detection with failures counted as all-wrong.
fn detect_errors(
    sc: &Scenario,
    detector: DetectorKind,
    stats: &LocalStatistics,
    rho_ul: f64,
    draw: &TrialDraw,
    out: &mut TrialOutcome,
) -> Result<(u64, u64)> {
    let units = (draw.frame.labels.len() * draw.frame.labels[0].len()) as u64;
    match detect(detector, stats, rho_ul, &sc.constellation, sc.cfg.exhaustive_budget) {
        Ok(d) => {
            out.clipped += d.clipped as u64;
            Ok((symbol_errors(&d.labels, &draw.frame.labels), units))
        }
        Err(Error::Singular { .. }) => {
            out.failures += 1;
            Ok((units, units))
        }
        Err(e) => Err(e),
    }
}

enum SerTask {
    Ota(Box<OperatingPoint>),
    Wired(f64),
}

fn ser_eval<'a>(
    sc: &'a Scenario,
    tasks: &'a [SerTask],
    opts: &'a ExperimentOptions,
    stream: u64,
) -> impl Fn(u64, &[usize]) -> Result<TrialOutcome> + Sync + Send + 'a {
    move |t, active| {
        let mut rng = substream(sc.cfg.seed, stream, t);
        let draw = sc.draw(&mut rng, |r| sc.random_frame(sc.cfg.tau_u, r));
        let links = sc.links(t)?;
        let mut out = TrialOutcome::default();
        for &g in active {
            let counts = match &tasks[g] {
                SerTask::Ota(op) => {
                    let obs = sc.observe(op, &draw, &links)?;
                    let mut counts = Vec::new();
                    for &kind in &opts.estimators {
                        let (est, _) = sc.estimate(op, &obs, kind)?;
                        let stats = est.into_statistics();
                        counts.push(detect_errors(sc, opts.detector, &stats, op.rho_ul, &draw, &mut out)?);
                    }
                    counts
                }
                SerTask::Wired(rho) => {
                    let stats = wired_statistics(sc, &draw, *rho);
                    vec![detect_errors(sc, opts.detector, &stats, *rho, &draw, &mut out)?]
                }
            };
            out.counts.push(counts);
        }
        Ok(out)
    }
}

/// Exact `(Σ T_l, Σ t_l)` of a trial.
pub(crate) fn wired_statistics(sc: &Scenario, draw: &TrialDraw, rho_ul: f64) -> LocalStatistics {
    let stats = sc.local_statistics(draw, rho_ul);
    crate::uplink::summed_stats(&stats)
}

/// SER over `rho_ul_db` for each `p_max_w`, plus the wired baseline.
pub fn run_ser(cfg: &SystemConfig, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    let sc = Scenario::new(cfg)?;
    let mut tasks = Vec::new();
    let mut groups = Vec::new();
    for &p in &cfg.sweep.p_max_w {
        for &r in &cfg.sweep.rho_ul_db {
            tasks.push(SerTask::Ota(Box::new(sc.operating_point(db_to_linear(r), p)?)));
            groups.push(Group {
                value: r,
                labels: opts
                    .estimators
                    .iter()
                    .map(|e| format!("ota/{e}/pmax={}W", fmt_param(p)))
                    .collect(),
            });
        }
    }
    if opts.wired_baseline {
        for &r in &cfg.sweep.rho_ul_db {
            tasks.push(SerTask::Wired(db_to_linear(r)));
            groups.push(Group {
                value: r,
                labels: vec!["wired".into()],
            });
        }
    }
    let counted = count_errors(
        &groups,
        cfg.trials,
        &cfg.stopping,
        StopOn::Errors,
        ser_eval(&sc, &tasks, opts, streams::SER),
    )?;
    let mut res = new_result(cfg, &format!("ser-vs-snr/{}", opts.detector), "rho_ul_db", "ser");
    push_counted(&mut res, &groups, &counted);
    Ok(res)
}

/// SER over `p_max_dbm` at each `rho_ul_db_at_pmax`; the wired line is repeated at every `P_max`.
pub fn run_ser_vs_pmax(cfg: &SystemConfig, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    let sc = Scenario::new(cfg)?;
    let mut tasks = Vec::new();
    let mut groups = Vec::new();
    for &r in &cfg.sweep.rho_ul_db_at_pmax {
        for &p in &cfg.sweep.p_max_dbm {
            tasks.push(SerTask::Ota(Box::new(sc.operating_point(db_to_linear(r), dbm_to_w(p))?)));
            groups.push(Group {
                value: p,
                labels: opts
                    .estimators
                    .iter()
                    .map(|e| format!("ota/{e}/rho={}dB", fmt_param(r)))
                    .collect(),
            });
        }
    }
    let wired_start = groups.len();
    if opts.wired_baseline {
        for &r in &cfg.sweep.rho_ul_db_at_pmax {
            tasks.push(SerTask::Wired(db_to_linear(r)));
            groups.push(Group {
                value: f64::NAN,
                labels: vec![format!("wired/rho={}dB", fmt_param(r))],
            });
        }
    }
    let counted = count_errors(
        &groups,
        cfg.trials,
        &cfg.stopping,
        StopOn::Errors,
        ser_eval(&sc, &tasks, opts, streams::SER_PMAX),
    )?;
    let mut res = new_result(cfg, &format!("ser-vs-pmax/{}", opts.detector), "p_max_dbm", "ser");
    push_counted(&mut res, &groups[..wired_start], &Counted {
        counters: counted.counters[..wired_start].to_vec(),
        clipped: counted.clipped,
        failures: counted.failures,
    });
    for (g, cs) in groups[wired_start..].iter().zip(&counted.counters[wired_start..]) {
        for &p in &cfg.sweep.p_max_dbm {
            res.rows.push(ResultRow {
                value: p,
                metric: cs[0].rate(),
                stderr: cs[0].stderr(),
                trials: cs[0].trials,
                label: g.labels[0].clone(),
            });
        }
    }
    Ok(res)
}

struct CodedGroup {
    rho_coded: f64,
    rho_uncoded: f64,
    /// `(coded, uncoded)` operating points per `P_max`.
    ota: Vec<(OperatingPoint, OperatingPoint)>,
}

/// Coded and uncoded BER over `ebn0_db` with one LDPC codeword per UE and block.
///
/// Coded points run at `ρ_ul = E_b/N_0 · log2|S| · R_c` with max-log sphere
/// LLRs; uncoded points carry the same bits at `ρ_ul = E_b/N_0 · log2|S|`
/// with hard ML decisions.
pub fn run_coded_ber(cfg: &SystemConfig, opts: &ExperimentOptions) -> Result<ExperimentResult> {
    let h = match &cfg.ldpc.alist {
        Some(path) => read_alist(path)?,
        None => ieee80211_n1944_r12(),
    };
    let encoder = Encoder::new(&h)?;
    let decoder = MinSumDecoder::new(&h, cfg.ldpc.alpha, cfg.ldpc.max_iters)?;
    let sc = Scenario::new(cfg)?;
    let bps = sc.constellation.bits_per_symbol();
    if encoder.n() % bps != 0 || encoder.n() / bps != cfg.tau_u {
        return Err(Error::InvalidConfig(format!(
            "one codeword per UE needs tau_u = n / log2|S| = {} (tau_u={})",
            encoder.n() as f64 / bps as f64,
            cfg.tau_u
        )));
    }
    let rate = encoder.k() as f64 / encoder.n() as f64;
    let estimator = *opts.estimators.last().unwrap_or(&EstimatorKind::Lmmse);
    let mut points = Vec::new();
    let mut groups = Vec::new();
    for &e in &cfg.sweep.ebn0_db {
        let ebn0 = db_to_linear(e);
        let rho_coded = ebn0 * bps as f64 * rate;
        let rho_uncoded = ebn0 * bps as f64;
        let mut labels = Vec::new();
        if opts.wired_baseline {
            labels.push("coded/wired".to_string());
            labels.push("uncoded/wired".to_string());
        }
        let mut ota = Vec::new();
        for &p in &cfg.sweep.p_max_w {
            ota.push((sc.operating_point(rho_coded, p)?, sc.operating_point(rho_uncoded, p)?));
            labels.push(format!("coded/ota/pmax={}W", fmt_param(p)));
            labels.push(format!("uncoded/ota/pmax={}W", fmt_param(p)));
        }
        points.push(CodedGroup {
            rho_coded,
            rho_uncoded,
            ota,
        });
        groups.push(Group { value: e, labels });
    }
    let k = cfg.num_ues;
    let eval = |t: u64, active: &[usize]| -> Result<TrialOutcome> {
        let mut rng = substream(cfg.seed, streams::CODED, t);
        let mut messages = Vec::with_capacity(k);
        let draw = sc.draw(&mut rng, |r| {
            use rand::Rng;
            let codewords: Vec<Vec<u8>> = (0..k)
                .map(|_| {
                    let msg: Vec<u8> = (0..encoder.k()).map(|_| r.random_range(0..2u8)).collect();
                    let cw = encoder.encode(&msg).expect("message length matches");
                    messages.push(msg);
                    cw
                })
                .collect();
            modulate(&codewords, &sc.constellation).expect("codeword length matches tau_u")
        });
        let links = sc.links(t)?;
        let mut out = TrialOutcome::default();
        let coded = |stats: &LocalStatistics, rho: f64, out: &mut TrialOutcome| -> Result<(u64, u64)> {
            let (llrs, clipped) = detect_soft(stats, rho, &sc.constellation);
            out.clipped += clipped as u64;
            let mut errors = 0;
            for (u, l) in llrs.iter().enumerate() {
                let decoded = decoder.decode(l)?;
                let msg = encoder.extract(&decoded.bits);
                errors += msg.iter().zip(&messages[u]).filter(|(a, b)| a != b).count() as u64;
            }
            Ok((errors, (k * encoder.k()) as u64))
        };
        let uncoded = |stats: &LocalStatistics, rho: f64, out: &mut TrialOutcome| -> Result<(u64, u64)> {
            let det = detect(DetectorKind::Ml, stats, rho, &sc.constellation, cfg.exhaustive_budget)?;
            out.clipped += det.clipped as u64;
            let c = &sc.constellation;
            let mut errors = 0;
            for (u, labels) in det.labels.iter().enumerate() {
                for (t, &l) in labels.iter().enumerate() {
                    let sent = draw.frame.labels[u][t];
                    errors += (0..bps).filter(|&b| c.bit(l, b) != c.bit(sent, b)).count() as u64;
                }
            }
            Ok((errors, (k * encoder.n()) as u64))
        };
        for &g in active {
            let pt = &points[g];
            let mut counts = Vec::new();
            if opts.wired_baseline {
                counts.push(coded(&wired_statistics(&sc, &draw, pt.rho_coded), pt.rho_coded, &mut out)?);
                counts.push(uncoded(&wired_statistics(&sc, &draw, pt.rho_uncoded), pt.rho_uncoded, &mut out)?);
            }
            for (op_c, op_u) in &pt.ota {
                let obs = sc.observe(op_c, &draw, &links)?;
                let stats = sc.estimate(op_c, &obs, estimator)?.0.into_statistics();
                counts.push(coded(&stats, pt.rho_coded, &mut out)?);
                let obs = sc.observe(op_u, &draw, &links)?;
                let stats = sc.estimate(op_u, &obs, estimator)?.0.into_statistics();
                counts.push(uncoded(&stats, pt.rho_uncoded, &mut out)?);
            }
            out.counts.push(counts);
        }
        Ok(out)
    };
    let counted = count_errors(&groups, cfg.trials, &cfg.stopping, StopOn::ErrorTrials, eval)?;
    let mut res = new_result(cfg, &format!("coded-ber/{estimator}"), "ebn0_db", "ber");
    push_counted(&mut res, &groups, &counted);
    Ok(res)
}

/// Per-AP empirical transmit powers over `trials` draws with the AP→CPU channel resampled every trial.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub trials: u64,
    /// `P_max / σ²`.
    pub budget: f64,
    /// Mean power per phase and AP, in units of the noise power.
    pub mean: [Vec<f64>; 2],
    pub stderr: [Vec<f64>; 2],
}

impl PowerReport {
    /// Largest `mean / budget` of each phase.
    pub fn max_ratio(&self) -> [f64; 2] {
        [0, 1].map(|ph| self.mean[ph].iter().copied().fold(0.0, f64::max) / self.budget)
    }
}

pub fn empirical_power(sc: &Scenario, op: &OperatingPoint, trials: u64, seed: u64) -> Result<PowerReport> {
    let cfg = &sc.cfg;
    let l = cfg.num_aps;
    let per_trial = parallel_trials(0..trials, |t| -> Result<[Vec<f64>; 2]> {
        let mut rng = substream(seed, streams::POWER, t);
        let draw = sc.draw(&mut rng, |r| sc.random_frame(op.tau, r));
        let links: Vec<FronthaulLink> = sample_ap_cpu(&sc.fronthaul_gains, cfg.ap_antennas, cfg.cpu_antennas, &mut rng)?
            .into_iter()
            .map(FronthaulLink::new)
            .collect::<Result<_>>()?;
        let obs = sc.observe(op, &draw, &links)?;
        Ok([0, 1].map(|ph| {
            obs.frames[ph]
                .iter()
                .zip(&links)
                .map(|(x, link)| op.rho_c[ph] * (&link.w * x).norm_squared() / x.ncols() as f64)
                .collect()
        }))
    });
    let mut sum = [vec![0.0; l], vec![0.0; l]];
    let mut sq = [vec![0.0; l], vec![0.0; l]];
    for r in per_trial {
        let r = r?;
        for ph in 0..2 {
            for a in 0..l {
                sum[ph][a] += r[ph][a];
                sq[ph][a] += r[ph][a] * r[ph][a];
            }
        }
    }
    let n = trials as f64;
    let mean = [0, 1].map(|ph| sum[ph].iter().map(|s| s / n).collect::<Vec<_>>());
    let stderr = [0, 1].map(|ph| {
        sq[ph]
            .iter()
            .zip(&mean[ph])
            .map(|(q, m)| ((q / n - m * m).max(0.0) / (n - 1.0).max(1.0)).sqrt())
            .collect()
    });
    Ok(PowerReport {
        trials,
        budget: op.budget,
        mean,
        stderr,
    })
}

/// One closed-form entry compared with its Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub quantity: String,
    pub analytic: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl MomentCheck {
    pub fn relative_error(&self) -> f64 {
        if self.analytic == 0.0 {
            self.empirical.abs()
        } else {
            (self.empirical - self.analytic).abs() / self.analytic.abs()
        }
    }
}

/// Joint consistency of analytically-zero entries with zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCheck {
    pub quantity: String,
    pub count: usize,
    /// Mean of `|x̂|² / se²`, about 1 under the null.
    pub mean_z2: f64,
    pub max_abs_z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub draws: usize,
    pub tolerance: f64,
    pub checks: Vec<MomentCheck>,
    pub zeros: Vec<ZeroCheck>,
}

impl MomentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.zeros.iter().all(|z| z.pass)
    }

    pub fn to_result(&self, cfg: &SystemConfig) -> ExperimentResult {
        let mut res = new_result(cfg, "validate-moments", "analytic", "empirical");
        for c in &self.checks {
            res.rows.push(ResultRow {
                value: c.analytic,
                metric: c.empirical,
                stderr: c.stderr,
                trials: self.draws as u64,
                label: format!("{}:{}", c.quantity, if c.pass { "pass" } else { "fail" }),
            });
        }
        for z in &self.zeros {
            res.rows.push(ResultRow {
                value: 0.0,
                metric: z.mean_z2,
                stderr: z.max_abs_z,
                trials: self.draws as u64,
                label: format!("{}:{}", z.quantity, if z.pass { "pass" } else { "fail" }),
            });
        }
        res.counters.insert("failed_checks".into(), self.checks.iter().filter(|c| !c.pass).count() as u64);
        res
    }
}

/// Largest `|x̂|/se` accepted among analytically-zero entries.
pub const ZERO_MAX_Z: f64 = 5.5;

fn zero_check(quantity: &str, entries: &[(C64, f64)]) -> ZeroCheck {
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut exact = true;
    for &(x, se) in entries {
        if se > 0.0 {
            let z2 = x.norm_sqr() / (se * se);
            sum += z2;
            max = max.max(z2.sqrt());
        } else if x.norm() != 0.0 {
            exact = false;
        }
    }
    let count = entries.len();
    let mean_z2 = if count > 0 { sum / count as f64 } else { 0.0 };
    // batch-means SEs carry 49 degrees of freedom, inflating E|z|² slightly above 1
    let limit = 1.1 + 4.0 / (count.max(1) as f64).sqrt();
    ZeroCheck {
        quantity: quantity.into(),
        count,
        mean_z2,
        max_abs_z: max,
        pass: exact && mean_z2 <= limit && max <= ZERO_MAX_Z,
    }
}

/// Closed-form moments of `corr` at `rho_ul` against `draws` Monte Carlo draws.
///
/// Nonzero entries must agree within `tolerance` relative; analytically-zero
/// entries must be jointly consistent with zero. The cross-AP part of the
/// phase-2 variance is checked against its standard error and must be
/// significantly nonzero wherever the closed form is.
pub fn validate_moments_for(
    corr: &CorrelationSet,
    rho_ul: f64,
    draws: usize,
    seed: u64,
    tolerance: f64,
) -> Result<MomentReport> {
    let emp = mc_moment_oracle(corr, rho_ul, draws, seed)?;
    let m1 = phase1_moments(corr);
    let m2 = phase2_moments(corr, rho_ul);
    let k = corr.num_ues;
    let len = triangle_len(k);
    let mut checks = Vec::new();
    let rel = |a: f64, e: f64| if a == 0.0 { e == 0.0 } else { ((e - a) / a).abs() <= tolerance };
    let mut check = |quantity: String, analytic: f64, empirical: f64, stderr: f64| {
        checks.push(MomentCheck {
            pass: rel(analytic, empirical),
            quantity,
            analytic,
            empirical,
            stderr,
        });
    };
    let mut zero_mean = Vec::new();
    for n in 0..len {
        let (j, jp) = triangle_pair(n, k);
        if m1.mean[n] != 0.0 {
            check(format!("phase1_mean[{j},{jp}]"), m1.mean[n], emp.mean1[n].re, emp.mean1_se[n]);
        } else {
            zero_mean.push((emp.mean1[n], emp.mean1_se[n]));
        }
        check(format!("phase1_var[{j},{jp}]"), m1.var[n], emp.cov1[(n, n)].re, emp.cov1_se[n][n]);
    }
    let mut zero_cov1 = Vec::new();
    for a in 0..len {
        for b in a + 1..len {
            zero_cov1.push((emp.cov1[(a, b)], emp.cov1_se[a][b]));
        }
    }
    let mut zero_cov2 = Vec::new();
    for a in 0..k {
        check(format!("phase2_var[{a}]"), m2.cov[(a, a)].re, emp.cov2[(a, a)].re, emp.cov2_se[a][a]);
        for b in a + 1..k {
            zero_cov2.push((emp.cov2[(a, b)], emp.cov2_se[a][b]));
        }
    }
    for l in 0..corr.num_aps {
        for a in 0..k {
            check(
                format!("phase2_own_var[ap={l},ue={a}]"),
                m2.per_ap_cov[l][(a, a)].re,
                emp.own2[l][a],
                emp.own2_se[l][a],
            );
        }
    }
    let cross = emp.cross2_diag();
    for (a, &c) in cross.iter().enumerate() {
        let analytic = m2.cov[(a, a)].re - m2.per_ap_cov.iter().map(|p| p[(a, a)].re).sum::<f64>();
        let se = emp.cross2_se[a];
        let consistent = (c - analytic).abs() <= 4.0 * se || rel(analytic, c);
        let significant = analytic == 0.0 || c.abs() > 4.0 * se;
        checks.push(MomentCheck {
            quantity: format!("phase2_cross_sum[{a}]"),
            analytic,
            empirical: c,
            stderr: se,
            pass: consistent && significant,
        });
    }
    Ok(MomentReport {
        draws: emp.draws,
        tolerance,
        checks,
        zeros: vec![
            zero_check("phase1_mean_zero_entries", &zero_mean),
            zero_check("phase1_offdiag_cov", &zero_cov1),
            zero_check("phase2_offdiag_cov", &zero_cov2),
        ],
    })
}

/// Relative tolerance of the moment validation.
pub const MOMENT_TOLERANCE: f64 = 0.02;

/// Moment validation for the configured drop, plus `E[W^H W]` against Monte Carlo.
pub fn validate_moments(cfg: &SystemConfig, draws: usize) -> Result<MomentReport> {
    let sc = Scenario::new(cfg)?;
    let mut report = validate_moments_for(&sc.corr, cfg.rho_ul, draws, cfg.seed, MOMENT_TOLERANCE)?;
    let (n, m) = (cfg.ap_antennas, cfg.cpu_antennas);
    if n > m {
        // unit gain: the closed form scales as 1/β
        let closed = expected_precoder_gram(n, m, 1.0)?;
        let mut rng = substream(cfg.seed, streams::PRECODER_GRAM, 0);
        let mc = expected_precoder_gram_mc(draws, &mut rng, |r| complex_gaussian_matrix(n, m, r))?;
        for i in 0..m {
            report.checks.push(MomentCheck {
                quantity: format!("eww_diag[{i}]"),
                analytic: closed[(i, i)].re,
                empirical: mc[(i, i)].re,
                stderr: f64::NAN,
                pass: ((mc[(i, i)].re - closed[(i, i)].re) / closed[(i, i)].re).abs() <= MOMENT_TOLERANCE,
            });
        }
        let off = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| mc[(i, j)].norm())
            .fold(0.0, f64::max);
        report.checks.push(MomentCheck {
            quantity: "eww_offdiag_max".into(),
            analytic: 0.0,
            empirical: off,
            stderr: f64::NAN,
            pass: off <= MOMENT_TOLERANCE * closed[(0, 0)].re,
        });
    }
    Ok(report)
}
