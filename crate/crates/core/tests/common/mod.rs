//! Independent oracles and fixture plumbing shared by the integration tests.
#![allow(dead_code)]

use std::path::Path;

use biasaudit::fixtures::{synthetic_universe, write_universe, FixtureSpec};
use biasaudit::inference::SyntheticBiasParams;
use biasaudit::protocol::ScheduleParams;
use biasaudit::reporting::RunConfig;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Two-pass Pearson r.
pub fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Midranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_spearman(x: &[f64], y: &[f64]) -> f64 {
    brute_pearson(&brute_ranks(x), &brute_ranks(y))
}

/// Tau-b from all O(n²) pairs.
pub fn brute_kendall(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut ties_x, mut ties_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                ties_x += 1;
            }
            if dy == 0.0 {
                ties_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    (concordant - discordant) as f64 / ((n0 - ties_x as f64) * (n0 - ties_y as f64)).sqrt()
}

/// BH by definition: adj(i) = min over j with p_j ≥ p_i of min(1, m·p_j / rank_j).
pub fn brute_bh(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    p.iter()
        .map(|&pi| {
            let start = sorted.iter().position(|&s| s == pi).unwrap();
            (start..m)
                .map(|j| (sorted[j] * m as f64 / (j + 1) as f64).min(1.0))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Pooled two-sample t computed from scratch.
pub fn brute_pooled_t(a: &[f64], b: &[f64]) -> f64 {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
    };
    let df = (a.len() + b.len() - 2) as f64;
    let sp2 = (ss(a) + ss(b)) / df;
    (mean(a) - mean(b)) / (sp2 / a.len() as f64 + sp2 / b.len() as f64).sqrt()
}

/// ∫_0^x t^(a−1) (1−t)^(b−1) dt by tanh-sinh quadrature.
///
/// Distances to both ends of the interval are formed without cancellation,
/// which keeps the endpoint singularities of a < 1 or b < 1 harmless.
pub fn beta_integral(a: f64, b: f64, x: f64) -> f64 {
    let half = x / 2.0;
    let h = 1.0 / 128.0;
    let mut sum = 0.0;
    for k in -(8 * 128)..=(8 * 128) {
        let u = k as f64 * h;
        let s = std::f64::consts::FRAC_PI_2 * u.sinh();
        // 1 ± tanh(s) = 2 / (1 + e^(∓2s))
        let from_lo = half * 2.0 / (1.0 + (-2.0 * s).exp());
        let to_hi = half * 2.0 / (1.0 + (2.0 * s).exp());
        if from_lo <= 0.0 || to_hi <= 0.0 {
            continue;
        }
        let one_minus_t = (1.0 - x) + to_hi;
        let weight = half * std::f64::consts::FRAC_PI_2 * u.cosh() / s.cosh().powi(2);
        if weight == 0.0 || !weight.is_finite() {
            continue;
        }
        let f = ((a - 1.0) * from_lo.ln() + (b - 1.0) * one_minus_t.ln()).exp();
        sum += weight * f;
    }
    sum * h
}

pub fn beta_oracle(a: f64, b: f64, x: f64) -> f64 {
    beta_integral(a, b, x) / beta_integral(a, b, 1.0)
}

/// Half the vectors use a small integer alphabet so ties are common.
pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if ties {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect()
}

/// A fixture universe written under `dir` plus a config that points at it.
pub fn fixture_config(dir: &Path, n_firms: usize, fixture_seed: u64) -> RunConfig {
    let universe = synthetic_universe(&FixtureSpec {
        n_firms,
        months: 12,
        seed: fixture_seed,
    })
    .unwrap();
    let paths = write_universe(&universe, &dir.join("universe")).unwrap();
    RunConfig::new(paths, dir.join("out"))
}

pub fn schedule(categories: &[&str], variants: u8, orders: u8, reps: u32, seed: u64) -> ScheduleParams {
    ScheduleParams {
        categories: categories.iter().map(|c| c.to_string()).collect(),
        variants,
        orders,
        reps,
        seed,
    }
}

pub fn size_bias(coeff: f64) -> SyntheticBiasParams {
    SyntheticBiasParams {
        size_coeff: coeff,
        ..SyntheticBiasParams::default()
    }
}
