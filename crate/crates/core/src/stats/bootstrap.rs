use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::correlation::{CorrelationMethod, Interval};
use super::StatsError;

pub const MIN_BOOTSTRAP_ITERS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub iters: usize,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        BootstrapSpec { iters: 1000, seed: 0 }
    }
}

/// Linear-interpolation percentile of sorted data (`q` in [0, 1]).
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval over case resamples of (x, y) pairs.
///
/// Iteration `i` draws from its own ChaCha stream `i` under `seed`, so the
/// result does not depend on evaluation order. Resamples whose statistic is
/// undefined (zero variance, all ties) are skipped; when more than half are
/// skipped the interval is reported as unstable.
pub fn bootstrap_ci(
    x: &[f64],
    y: &[f64],
    statistic: &dyn CorrelationMethod,
    spec: &BootstrapSpec,
) -> Result<Interval, StatsError> {
    if spec.iters < MIN_BOOTSTRAP_ITERS {
        return Err(StatsError::Invalid(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_ITERS} iterations, got {}",
            spec.iters
        )));
    }
    if x.len() != y.len() {
        return Err(StatsError::Invalid("length mismatch".into()));
    }
    let n = x.len();
    if n < 4 {
        return Err(StatsError::InsufficientData { n, required: 4 });
    }

    let mut stats = Vec::with_capacity(spec.iters);
    let mut degenerate = 0;
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    for iter in 0..spec.iters {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(iter as u64);
        for k in 0..n {
            let j = rng.random_range(0..n);
            bx[k] = x[j];
            by[k] = y[j];
        }
        match statistic.estimate(&bx, &by) {
            Ok(v) => stats.push(v),
            Err(e) if e.is_undefined_marker() => degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    if degenerate * 2 > spec.iters {
        return Ok(Interval::Unstable { degenerate });
    }
    stats.sort_by(f64::total_cmp);
    Ok(Interval::Closed {
        low: percentile(&stats, 0.025),
        high: percentile(&stats, 0.975),
    })
}
