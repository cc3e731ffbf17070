//! Error counting with per-trial clustering.

/// Errors observed over trials that each carry `units` decisions.
///
/// Decisions within a trial share a channel realization, so the standard
/// error treats the per-trial error count as the independent sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorCounter {
    pub trials: u64,
    pub errors: u64,
    pub units: u64,
    /// Trials with at least one error (frame errors).
    pub error_trials: u64,
    sum_sq: f64,
}

impl ErrorCounter {
    pub fn push(&mut self, errors: u64, units: u64) {
        self.trials += 1;
        self.errors += errors;
        self.units += units;
        self.error_trials += (errors > 0) as u64;
        self.sum_sq += (errors as f64).powi(2);
    }

    pub fn merge(&mut self, other: &Self) {
        self.trials += other.trials;
        self.errors += other.errors;
        self.units += other.units;
        self.error_trials += other.error_trials;
        self.sum_sq += other.sum_sq;
    }

    pub fn rate(&self) -> f64 {
        if self.units == 0 {
            0.0
        } else {
            self.errors as f64 / self.units as f64
        }
    }

    /// Cluster-robust standard error of [`Self::rate`].
    pub fn stderr(&self) -> f64 {
        if self.trials < 2 || self.units == 0 {
            return 0.0;
        }
        let n = self.trials as f64;
        let per_trial_units = self.units as f64 / n;
        let mean = self.errors as f64 / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt() / per_trial_units
    }

    /// Wilson score interval for the rate, treating decisions as independent.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.errors, self.units, z)
    }
}

pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_and_independent_stderr() {
        let mut c = ErrorCounter::default();
        for i in 0..1000 {
            c.push((i % 10 == 0) as u64, 1);
        }
        assert!((c.rate() - 0.1).abs() < 1e-12);
        let binomial = (0.1f64 * 0.9 / 1000.0).sqrt();
        assert!((c.stderr() - binomial).abs() < 0.01 * binomial);
        assert_eq!(c.error_trials, 100);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!(lo < 0.1 && 0.1 < hi);
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
    }

    #[test]
    fn merge_is_additive() {
        let mut a = ErrorCounter::default();
        let mut b = ErrorCounter::default();
        a.push(3, 10);
        b.push(1, 10);
        b.push(0, 10);
        let mut all = ErrorCounter::default();
        all.push(3, 10);
        all.push(1, 10);
        all.push(0, 10);
        a.merge(&b);
        assert_eq!(a, all);
    }
}
