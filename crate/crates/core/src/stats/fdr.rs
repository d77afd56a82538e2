use super::StatsError;

/// Benjamini-Hochberg step-up adjustment, returned in input order.
pub fn bh_fdr(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::Invalid(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));

    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank0, &idx) in order.iter().enumerate().rev() {
        // the ratio is >= 1, so the product never rounds below the raw p
        let scaled = p_values[idx] * (m as f64 / (rank0 + 1) as f64);
        running = running.min(scaled);
        adjusted[idx] = running;
    }
    Ok(adjusted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_up_examples() {
        let adj = bh_fdr(&[0.01, 0.02, 0.03, 0.04]).unwrap();
        for a in adj {
            assert!((a - 0.04).abs() < 1e-15);
        }
        assert_eq!(bh_fdr(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(bh_fdr(&[0.001, 0.9]).unwrap(), vec![0.002, 0.9]);
        assert_eq!(bh_fdr(&[0.9, 0.001]).unwrap(), vec![0.9, 0.002]);
        assert!(bh_fdr(&[]).unwrap().is_empty());
    }

    #[test]
    fn capped_at_one() {
        for a in bh_fdr(&[0.8, 0.9, 0.95]).unwrap() {
            assert!((a - 0.95).abs() < 1e-15);
        }
        assert!(bh_fdr(&[0.6, 0.7]).unwrap().iter().all(|&p| p <= 1.0));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(bh_fdr(&[0.1, 1.2]).is_err());
        assert!(bh_fdr(&[-0.1]).is_err());
        assert!(bh_fdr(&[f64::NAN]).is_err());
    }
}
