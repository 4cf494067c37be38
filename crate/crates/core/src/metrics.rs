//! Portfolio risk metrics over a year loss table: probable maximum loss
//! at a return period, tail value-at-risk, and the empirical exceedance
//! curve.
//!
//! Quantiles are empirical and non-interpolated. The PML at return
//! period RP is the element at zero-based index ceil(N * (1 - 1/RP)) of
//! the ascending trial-loss vector, equivalently the floor(N/RP)-th
//! largest loss; the fixed convention keeps outputs identical across
//! implementations.

use thiserror::Error;

use crate::model::{Currency, YearLossTable};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("year loss table is empty")]
    EmptyTable,
    #[error("return period {return_period} outside (1, {trials}] supported by {trials} trials")]
    ReturnPeriodOutOfRange { return_period: f64, trials: usize },
    #[error("probability {0} outside open (0, 1)")]
    ProbabilityOutOfRange(f64),
}

/// Empirical exceedance curve: point k (1-based rank over losses sorted
/// descending) pairs the k-th largest loss with probability k/N.
/// Duplicate losses keep their distinct ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceCurve {
    pub points: Vec<ExceedancePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceedancePoint {
    pub loss: Currency,
    pub exceedance_probability: f64,
}

impl ExceedanceCurve {
    /// Recover the PML at a return period from the curve: the loss at
    /// the largest rank whose exceedance probability is at most 1/RP.
    pub fn pml(&self, return_period: f64) -> Result<Currency, MetricsError> {
        let n = self.points.len();
        check_return_period(return_period, n)?;
        let rank = ((n as f64) / return_period).floor() as usize;
        let rank = rank.clamp(1, n);
        Ok(self.points[rank - 1].loss)
    }
}

fn sorted_totals(ylt: &YearLossTable) -> Result<Vec<Currency>, MetricsError> {
    let mut totals = ylt.trial_totals();
    if totals.is_empty() {
        return Err(MetricsError::EmptyTable);
    }
    totals.sort_unstable_by(|a, b| a.total_cmp(b));
    Ok(totals)
}

fn check_return_period(return_period: f64, trials: usize) -> Result<(), MetricsError> {
    if !(return_period > 1.0 && return_period <= trials as f64) {
        return Err(MetricsError::ReturnPeriodOutOfRange {
            return_period,
            trials,
        });
    }
    Ok(())
}

/// Probable maximum loss: the trial loss not exceeded in RP-year terms,
/// read from the empirical distribution at probability 1 - 1/RP.
pub fn pml(ylt: &YearLossTable, return_period: f64) -> Result<Currency, MetricsError> {
    let totals = sorted_totals(ylt)?;
    let n = totals.len();
    check_return_period(return_period, n)?;
    let index = ((n as f64) * (1.0 - 1.0 / return_period)).ceil() as usize;
    Ok(totals[index.min(n - 1)])
}

/// Tail value-at-risk at probability level p: the mean of the worst
/// ceil(N * (1 - p)) trial losses.
pub fn tvar(ylt: &YearLossTable, p: f64) -> Result<Currency, MetricsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MetricsError::ProbabilityOutOfRange(p));
    }
    let totals = sorted_totals(ylt)?;
    let n = totals.len();
    let tail = (((n as f64) * (1.0 - p)).ceil() as usize).clamp(1, n);
    let sum: f64 = totals[n - tail..].iter().sum();
    Ok(sum / tail as f64)
}

/// Build the empirical exceedance curve from the per-trial totals.
pub fn exceedance_curve(ylt: &YearLossTable) -> Result<ExceedanceCurve, MetricsError> {
    let mut totals = sorted_totals(ylt)?;
    totals.reverse();
    let n = totals.len() as f64;
    let points = totals
        .into_iter()
        .enumerate()
        .map(|(i, loss)| ExceedancePoint {
            loss,
            exceedance_probability: (i + 1) as f64 / n,
        })
        .collect();
    Ok(ExceedanceCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::SplitMix64;
    use crate::model::YltRow;

    fn ylt_from(losses: &[f64]) -> YearLossTable {
        YearLossTable {
            rows: losses
                .iter()
                .enumerate()
                .map(|(i, &loss)| YltRow {
                    program: 0,
                    layer: 0,
                    trial_id: i as u64,
                    loss,
                })
                .collect(),
        }
    }

    fn ladder() -> YearLossTable {
        // 100 trials with losses 0, 10, ..., 990.
        ylt_from(&(0..100).map(|i| f64::from(i) * 10.0).collect::<Vec<_>>())
    }

    #[test]
    fn pml_at_max_return_period_is_max_loss() {
        assert_eq!(pml(&ladder(), 100.0).unwrap(), 990.0);
    }

    #[test]
    fn pml_at_two_years_is_median_order_statistic() {
        // Index ceil(100 * 0.5) = 50 of the ascending vector.
        assert_eq!(pml(&ladder(), 2.0).unwrap(), 500.0);
    }

    #[test]
    fn pml_constant_losses() {
        let ylt = ylt_from(&[7.5; 64]);
        for rp in [2.0, 5.0, 10.0, 64.0] {
            assert_eq!(pml(&ylt, rp).unwrap(), 7.5);
        }
    }

    #[test]
    fn pml_rejects_return_period_beyond_trials() {
        let err = pml(&ladder(), 101.0).unwrap_err();
        assert!(matches!(err, MetricsError::ReturnPeriodOutOfRange { .. }));
        assert!(pml(&ladder(), 1.0).is_err());
    }

    #[test]
    fn pml_monotone_in_return_period() {
        let ylt = ladder();
        let mut prev = f64::NEG_INFINITY;
        for rp in [2.0, 3.0, 5.0, 10.0, 25.0, 50.0, 100.0] {
            let v = pml(&ylt, rp).unwrap();
            assert!(v >= prev, "rp={rp}");
            prev = v;
        }
    }

    #[test]
    fn tvar_mean_of_upper_half() {
        let ylt = ylt_from(&[100.0, 200.0, 300.0, 400.0]);
        assert_eq!(tvar(&ylt, 0.5).unwrap(), 350.0);
    }

    #[test]
    fn tvar_single_element_tail_is_max() {
        let ylt = ylt_from(&[100.0, 200.0, 300.0, 400.0]);
        assert_eq!(tvar(&ylt, 0.9).unwrap(), 400.0);
    }

    #[test]
    fn tvar_uniform_tail_mean() {
        // 10,000 standard-uniform losses; the analytic mean of the worst
        // 1% is (0.99 + 1)/2 = 0.995.
        let mut rng = SplitMix64::new(2024);
        let losses: Vec<f64> = (0..10_000).map(|_| rng.next_open01()).collect();
        let v = tvar(&ylt_from(&losses), 0.99).unwrap();
        assert!((v - 0.995).abs() <= 0.005, "tvar = {v}");
    }

    #[test]
    fn tvar_monotone_in_p_and_dominates_pml() {
        let mut rng = SplitMix64::new(7);
        let losses: Vec<f64> = (0..10_000).map(|_| rng.next_open01()).collect();
        let ylt = ylt_from(&losses);
        let mut prev = f64::NEG_INFINITY;
        for p in [0.5, 0.8, 0.9, 0.95, 0.99] {
            let t = tvar(&ylt, p).unwrap();
            assert!(t >= prev, "p={p}");
            prev = t;
            let quantile = pml(&ylt, 1.0 / (1.0 - p)).unwrap();
            assert!(t >= quantile, "p={p}: tvar {t} < quantile {quantile}");
        }
    }

    #[test]
    fn tvar_rejects_degenerate_probability() {
        let ylt = ylt_from(&[1.0, 2.0]);
        assert!(tvar(&ylt, 0.0).is_err());
        assert!(tvar(&ylt, 1.0).is_err());
    }

    #[test]
    fn metrics_reject_empty_table() {
        let empty = YearLossTable { rows: vec![] };
        assert_eq!(pml(&empty, 2.0).unwrap_err(), MetricsError::EmptyTable);
        assert_eq!(tvar(&empty, 0.5).unwrap_err(), MetricsError::EmptyTable);
        assert!(exceedance_curve(&empty).is_err());
    }

    #[test]
    fn curve_single_trial() {
        let curve = exceedance_curve(&ylt_from(&[7.0])).unwrap();
        assert_eq!(curve.points.len(), 1);
        assert_eq!(curve.points[0].loss, 7.0);
        assert_eq!(curve.points[0].exceedance_probability, 1.0);
    }

    #[test]
    fn curve_keeps_duplicates_as_distinct_ranks() {
        let curve = exceedance_curve(&ylt_from(&[5.0, 5.0, 1.0])).unwrap();
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[0].loss, 5.0);
        assert_eq!(curve.points[1].loss, 5.0);
        assert!((curve.points[0].exceedance_probability - 1.0 / 3.0).abs() < 1e-15);
        assert!((curve.points[1].exceedance_probability - 2.0 / 3.0).abs() < 1e-15);
        // Non-increasing losses as probability grows.
        for w in curve.points.windows(2) {
            assert!(w[0].loss >= w[1].loss);
            assert!(w[0].exceedance_probability < w[1].exceedance_probability);
        }
    }

    #[test]
    fn curve_pml_matches_direct_pml_on_random_tables() {
        // Cross-check the two routes over 1,000 random tables.
        let mut rng = SplitMix64::new(99);
        for _ in 0..1_000 {
            let n = 1 + rng.next_below(60) as usize;
            let losses: Vec<f64> = (0..n).map(|_| rng.next_range(0.0, 1e6)).collect();
            let ylt = ylt_from(&losses);
            let curve = exceedance_curve(&ylt).unwrap();
            if n < 2 {
                continue;
            }
            let rp = 1.0 + rng.next_range(0.001, (n - 1) as f64);
            let direct = pml(&ylt, rp).unwrap();
            let via_curve = curve.pml(rp).unwrap();
            assert_eq!(direct.to_bits(), via_curve.to_bits(), "n={n} rp={rp}");
        }
    }
}
