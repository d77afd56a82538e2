use serde::{Deserialize, Serialize};

use super::special::f_sf;
use super::StatsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub factor: String,
    /// `+inf` when the within-group sum of squares is zero.
    pub f_stat: f64,
    pub p_value: f64,
    pub eta_squared: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// One-way ANOVA with η² = SSB/SST.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    let g = groups.len();
    if g < 2 {
        return Err(StatsError::Invalid(format!("need at least 2 groups, got {g}")));
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(StatsError::Invalid("every group needs at least one value".into()));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::Invalid("non-finite value".into()));
    }
    let total_n: usize = groups.iter().map(Vec::len).sum();
    if total_n <= g {
        return Err(StatsError::InsufficientData {
            n: total_n,
            required: g + 1,
        });
    }
    let first = groups[0][0];
    if groups.iter().flatten().all(|&v| v == first) {
        return Err(StatsError::ZeroVariance);
    }

    let grand = groups.iter().flatten().sum::<f64>() / total_n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for group in groups {
        let mean = group.iter().sum::<f64>() / group.len() as f64;
        ssb += group.len() as f64 * (mean - grand).powi(2);
        ssw += group.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    let sst = ssb + ssw;
    let df_between = g - 1;
    let df_within = total_n - g;
    let (f_stat, p_value) = if ssw == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (ssb / df_between as f64) / (ssw / df_within as f64);
        (f, f_sf(f, df_between as f64, df_within as f64)?)
    };
    Ok(AnovaResult {
        factor: String::new(),
        f_stat,
        p_value,
        eta_squared: (ssb / sst).clamp(0.0, 1.0),
        df_between,
        df_within,
    })
}

/// Pooled-variance two-sample t statistic.
pub fn pooled_t_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let ss = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>()
        + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
    let pooled = ss / (na + nb - 2.0);
    (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt()
}
