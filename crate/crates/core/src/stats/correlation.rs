use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci, BootstrapSpec};
use super::special::{normal_sf, t_two_sided};
use super::StatsError;

/// Two-sided 95% normal quantile used for the Fisher-z interval.
pub const FISHER_Z_CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pearson,
    Spearman,
    Kendall,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pearson, Method::Spearman, Method::Kendall];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pearson => "pearson",
            Method::Spearman => "spearman",
            Method::Kendall => "kendall",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| StatsError::Invalid(format!("unknown correlation method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interval {
    Closed { low: f64, high: f64 },
    /// More than half the bootstrap resamples were degenerate.
    Unstable { degenerate: usize },
    /// Too few observations to resample.
    Unavailable,
}

impl Interval {
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match *self {
            Interval::Closed { low, high } => Some((low, high)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub method: Method,
    pub estimate: f64,
    pub p_raw: f64,
    pub p_adjusted: Option<f64>,
    pub ci: Interval,
    pub n: usize,
    pub feature: String,
    pub target: String,
}

impl CorrelationResult {
    pub fn ci_low(&self) -> Option<f64> {
        self.ci.bounds().map(|b| b.0)
    }

    pub fn ci_high(&self) -> Option<f64> {
        self.ci.bounds().map(|b| b.1)
    }

    pub fn labeled(mut self, feature: impl Into<String>, target: impl Into<String>) -> Self {
        self.feature = feature.into();
        self.target = target.into();
        self
    }
}

/// A correlation family: point estimate, two-sided p-value and interval.
pub trait CorrelationMethod: Send + Sync {
    fn method(&self) -> Method;

    /// Minimum number of complete pairs.
    fn min_n(&self) -> usize;

    fn estimate(&self, x: &[f64], y: &[f64]) -> Result<f64, StatsError>;

    fn p_value(&self, estimate: f64, x: &[f64], y: &[f64]) -> Result<f64, StatsError>;

    fn interval(&self, estimate: f64, x: &[f64], y: &[f64], boot: &BootstrapSpec) -> Result<Interval, StatsError>;

    /// Full test on complete data.
    fn test(&self, x: &[f64], y: &[f64], boot: &BootstrapSpec) -> Result<CorrelationResult, StatsError> {
        if x.len() != y.len() {
            return Err(StatsError::Invalid(format!(
                "length mismatch: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < self.min_n() {
            return Err(StatsError::InsufficientData {
                n: x.len(),
                required: self.min_n(),
            });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(StatsError::Invalid("non-finite value".into()));
        }
        let estimate = self.estimate(x, y)?;
        Ok(CorrelationResult {
            method: self.method(),
            estimate,
            p_raw: self.p_value(estimate, x, y)?,
            p_adjusted: None,
            ci: self.interval(estimate, x, y, boot)?,
            n: x.len(),
            feature: String::new(),
            target: String::new(),
        })
    }
}

pub struct Pearson;

/// Spearman's rho. `exact_small_n` switches to an exact permutation p-value
/// for n ≤ 10.
#[derive(Default)]
pub struct Spearman {
    pub exact_small_n: bool,
}

pub struct Kendall;

static PEARSON: Pearson = Pearson;
static SPEARMAN: Spearman = Spearman { exact_small_n: false };
static SPEARMAN_EXACT: Spearman = Spearman { exact_small_n: true };
static KENDALL: Kendall = Kendall;

/// Default strategy object for a method.
pub fn correlation_method(method: Method) -> &'static dyn CorrelationMethod {
    correlation_method_with(method, false)
}

/// As [`correlation_method`], optionally with exact small-n Spearman p-values.
pub fn correlation_method_with(method: Method, spearman_exact: bool) -> &'static dyn CorrelationMethod {
    match method {
        Method::Pearson => &PEARSON,
        Method::Spearman if spearman_exact => &SPEARMAN_EXACT,
        Method::Spearman => &SPEARMAN,
        Method::Kendall => &KENDALL,
    }
}

fn all_equal(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if all_equal(x) || all_equal(y) {
        return Err(StatsError::ZeroVariance);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn t_test_p(r: f64, n: usize) -> Result<f64, StatsError> {
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    t_two_sided(t, df)
}

impl CorrelationMethod for Pearson {
    fn method(&self) -> Method {
        Method::Pearson
    }

    fn min_n(&self) -> usize {
        4
    }

    fn estimate(&self, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
        product_moment(x, y)
    }

    fn p_value(&self, r: f64, x: &[f64], _y: &[f64]) -> Result<f64, StatsError> {
        t_test_p(r, x.len())
    }

    /// Fisher z: tanh(atanh(r) ± 1.96/√(n−3)).
    fn interval(&self, r: f64, x: &[f64], _y: &[f64], _boot: &BootstrapSpec) -> Result<Interval, StatsError> {
        if r.abs() >= 1.0 {
            return Ok(Interval::Closed { low: r, high: r });
        }
        let half = FISHER_Z_CRITICAL / ((x.len() - 3) as f64).sqrt();
        let z = r.atanh();
        Ok(Interval::Closed {
            low: (z - half).tanh().min(r),
            high: (z + half).tanh().max(r),
        })
    }
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

impl Spearman {
    fn exact_p(&self, rho: f64, rx: &[f64], ry: &[f64]) -> Result<f64, StatsError> {
        let mut perm = ry.to_vec();
        let n = perm.len();
        let target = rho.abs() - 1e-12;
        let (mut hits, mut total) = (0u64, 0u64);
        let mut visit = |p: &[f64]| -> Result<(), StatsError> {
            total += 1;
            if product_moment(rx, p)?.abs() >= target {
                hits += 1;
            }
            Ok(())
        };
        // Heap's algorithm
        let mut c = vec![0usize; n];
        visit(&perm)?;
        let mut i = 1;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                visit(&perm)?;
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        Ok(hits as f64 / total as f64)
    }
}

impl CorrelationMethod for Spearman {
    fn method(&self) -> Method {
        Method::Spearman
    }

    fn min_n(&self) -> usize {
        4
    }

    fn estimate(&self, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
        product_moment(&average_ranks(x), &average_ranks(y))
    }

    fn p_value(&self, rho: f64, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
        if self.exact_small_n && x.len() <= 10 {
            return self.exact_p(rho, &average_ranks(x), &average_ranks(y));
        }
        t_test_p(rho, x.len())
    }

    fn interval(&self, _rho: f64, x: &[f64], y: &[f64], boot: &BootstrapSpec) -> Result<Interval, StatsError> {
        bootstrap_ci(x, y, self, boot)
    }
}

/// Sums t(t−1)/2 over runs of equal adjacent elements.
fn tie_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort that returns the number of strict inversions.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// (C − D, n0, n1, n2) via Knight's O(n log n) algorithm.
fn kendall_counts(x: &[f64], y: &[f64]) -> (i64, u64, u64, u64) {
    let n = x.len() as u64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let n0 = n * (n - 1) / 2;
    let n1 = tie_pairs(&xs);
    let n3 = tie_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = count_inversions(&mut ys, &mut buf);
    let n2 = tie_pairs(&ys);
    let s = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    (s, n0, n1, n2)
}

impl CorrelationMethod for Kendall {
    fn method(&self) -> Method {
        Method::Kendall
    }

    fn min_n(&self) -> usize {
        3
    }

    fn estimate(&self, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
        let (s, n0, n1, n2) = kendall_counts(x, y);
        if n1 == n0 || n2 == n0 {
            return Err(StatsError::AllTied);
        }
        let denom = ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt();
        Ok((s as f64 / denom).clamp(-1.0, 1.0))
    }

    /// Normal approximation on S = C − D without the tie-variance term.
    fn p_value(&self, _tau: f64, x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
        let (s, ..) = kendall_counts(x, y);
        let n = x.len() as f64;
        let var = n * (n - 1.0) * (2.0 * n + 5.0) / 18.0;
        let z = s as f64 / var.sqrt();
        Ok((2.0 * normal_sf(z.abs())?).min(1.0))
    }

    fn interval(&self, _tau: f64, x: &[f64], y: &[f64], boot: &BootstrapSpec) -> Result<Interval, StatsError> {
        if x.len() < 4 {
            return Ok(Interval::Unavailable);
        }
        bootstrap_ci(x, y, self, boot)
    }
}

/// Drops every index where either side is missing.
fn complete_pairs(x: &[Option<f64>], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip()
}

/// Pairwise deletion followed by the method's full test.
pub fn correlate(
    method: &dyn CorrelationMethod,
    x: &[Option<f64>],
    y: &[Option<f64>],
    boot: &BootstrapSpec,
) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let (cx, cy) = complete_pairs(x, y);
    method.test(&cx, &cy, boot)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    Pearson.test(x, y, &BootstrapSpec::default())
}

pub fn spearman(x: &[f64], y: &[f64], boot: &BootstrapSpec) -> Result<CorrelationResult, StatsError> {
    SPEARMAN.test(x, y, boot)
}

pub fn kendall_tau_b(x: &[f64], y: &[f64], boot: &BootstrapSpec) -> Result<CorrelationResult, StatsError> {
    Kendall.test(x, y, boot)
}
