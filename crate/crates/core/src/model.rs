//! Domain types for aggregate risk analysis: pre-simulated event tables,
//! extended event-loss tables, contract structure, and the per-trial loss
//! output, plus the retention/limit operators applied at each contract level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Monetary amounts are 64-bit floats throughout.
pub type Currency = f64;

/// Validation failure on a domain object, reported at trust boundaries
/// (file load, lookup build) rather than on every field write.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("trial {trial_id}: occurrence {index} has event_id {event_id} outside catalogue 1..={catalogue_size}")]
    EventIdOutOfRange {
        trial_id: u64,
        index: usize,
        event_id: u32,
        catalogue_size: u64,
    },
    #[error("trial {trial_id}: occurrences not sorted by ascending timestamp at index {index}")]
    UnsortedOccurrences { trial_id: u64, index: usize },
    #[error("trial {trial_id}: {field} = {value} outside its valid range")]
    FieldOutOfRange {
        trial_id: u64,
        field: &'static str,
        value: f64,
    },
    #[error("trial ids not contiguous from 0: expected {expected}, found {found}")]
    NonContiguousTrialIds { expected: u64, found: u64 },
    #[error("event loss record {event_id}: {reason}")]
    InvalidLossRecord { event_id: u32, reason: String },
    #[error("duplicate event_id {event_id} within one XELT")]
    DuplicateEventId { event_id: u32 },
    #[error("layer has no XELTs")]
    EmptyLayer,
    #[error("portfolio has no programs or a program has no layers")]
    EmptyPortfolio,
    #[error("negative term value: {field} = {value}")]
    NegativeTerm { field: &'static str, value: f64 },
}

/// One pre-simulated event occurrence inside a trial: the event identifier,
/// its time within the contractual year, and the uniform draw specific to
/// this (program, occurrence) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventOccurrence {
    pub event_id: u32,
    pub timestamp: f64,
    pub z_prog_e: f64,
}

/// One alternative realization of a contractual year: an ordered sequence
/// of event occurrences, sorted by ascending timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: u64,
    pub occurrences: Vec<EventOccurrence>,
}

/// Database of pre-simulated trials drawn against an event catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearEventTable {
    pub catalogue_size: u64,
    pub trials: Vec<Trial>,
}

impl YearEventTable {
    /// Check trial-id contiguity, timestamp ordering, draw ranges, and
    /// event-id bounds for every occurrence.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, trial) in self.trials.iter().enumerate() {
            if trial.trial_id != i as u64 {
                return Err(ModelError::NonContiguousTrialIds {
                    expected: i as u64,
                    found: trial.trial_id,
                });
            }
            let mut prev = f64::NEG_INFINITY;
            for (k, occ) in trial.occurrences.iter().enumerate() {
                if occ.event_id < 1 || u64::from(occ.event_id) > self.catalogue_size {
                    return Err(ModelError::EventIdOutOfRange {
                        trial_id: trial.trial_id,
                        index: k,
                        event_id: occ.event_id,
                        catalogue_size: self.catalogue_size,
                    });
                }
                if occ.timestamp < prev {
                    return Err(ModelError::UnsortedOccurrences {
                        trial_id: trial.trial_id,
                        index: k,
                    });
                }
                prev = occ.timestamp;
                if !(occ.timestamp >= 0.0) {
                    return Err(ModelError::FieldOutOfRange {
                        trial_id: trial.trial_id,
                        field: "timestamp",
                        value: occ.timestamp,
                    });
                }
                if !(occ.z_prog_e > 0.0 && occ.z_prog_e < 1.0) {
                    return Err(ModelError::FieldOutOfRange {
                        trial_id: trial.trial_id,
                        field: "z_prog_e",
                        value: occ.z_prog_e,
                    });
                }
            }
        }
        Ok(())
    }
}

/// One row of an extended event-loss table: the loss distribution for a
/// single event (mean, independent and correlated standard deviations,
/// maximum loss) plus the event-specific uniform draw shared across
/// programs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtendedEventLoss {
    pub event_id: u32,
    pub mean_loss: Currency,
    pub sigma_i: Currency,
    pub sigma_c: Currency,
    pub max_loss: Currency,
    pub z_e: f64,
}

impl ExtendedEventLoss {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: String| ModelError::InvalidLossRecord {
            event_id: self.event_id,
            reason,
        };
        if !(self.max_loss > 0.0) {
            return Err(fail(format!("max_loss {} must be > 0", self.max_loss)));
        }
        if !(self.mean_loss >= 0.0 && self.mean_loss <= self.max_loss) {
            return Err(fail(format!(
                "mean_loss {} outside [0, max_loss {}]",
                self.mean_loss, self.max_loss
            )));
        }
        if !(self.sigma_i >= 0.0 && self.sigma_c >= 0.0) {
            return Err(fail(format!(
                "negative std dev (sigma_i {}, sigma_c {})",
                self.sigma_i, self.sigma_c
            )));
        }
        if !(self.z_e > 0.0 && self.z_e < 1.0) {
            return Err(fail(format!("z_e {} outside open (0,1)", self.z_e)));
        }
        Ok(())
    }
}

/// Retention and limit applied to each event loss taken from one XELT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EltTerms {
    pub retention: Currency,
    pub limit: Currency,
}

impl EltTerms {
    /// Pass-through terms: zero retention, unbounded limit.
    pub fn identity() -> Self {
        EltTerms {
            retention: 0.0,
            limit: f64::INFINITY,
        }
    }
}

/// Extended event-loss table: per-event loss distributions keyed by
/// event_id, under one set of financial terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Xelt {
    pub records: Vec<ExtendedEventLoss>,
    pub terms: EltTerms,
}

impl Xelt {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.terms.retention < 0.0 {
            return Err(ModelError::NegativeTerm {
                field: "elt retention",
                value: self.terms.retention,
            });
        }
        if self.terms.limit < 0.0 {
            return Err(ModelError::NegativeTerm {
                field: "elt limit",
                value: self.terms.limit,
            });
        }
        let mut seen: Vec<u32> = self.records.iter().map(|r| r.event_id).collect();
        seen.sort_unstable();
        for w in seen.windows(2) {
            if w[0] == w[1] {
                return Err(ModelError::DuplicateEventId { event_id: w[0] });
            }
        }
        for r in &self.records {
            r.validate()?;
        }
        Ok(())
    }
}

/// Occurrence and aggregate retention/limit pairs for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerTerms {
    pub occ_retention: Currency,
    pub occ_limit: Currency,
    pub agg_retention: Currency,
    pub agg_limit: Currency,
}

impl LayerTerms {
    pub fn identity() -> Self {
        LayerTerms {
            occ_retention: 0.0,
            occ_limit: f64::INFINITY,
            agg_retention: 0.0,
            agg_limit: f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, value) in [
            ("occ_retention", self.occ_retention),
            ("occ_limit", self.occ_limit),
            ("agg_retention", self.agg_retention),
            ("agg_limit", self.agg_limit),
        ] {
            if value < 0.0 {
                return Err(ModelError::NegativeTerm { field, value });
            }
        }
        Ok(())
    }
}

/// A reinsurance contract unit: a set of XELTs covered under occurrence
/// and aggregate terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub xelts: Vec<Xelt>,
    pub terms: LayerTerms,
}

impl Layer {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.xelts.is_empty() {
            return Err(ModelError::EmptyLayer);
        }
        self.terms.validate()?;
        for x in &self.xelts {
            x.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub programs: Vec<Program>,
}

impl Portfolio {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.programs.is_empty() || self.programs.iter().any(|p| p.layers.is_empty()) {
            return Err(ModelError::EmptyPortfolio);
        }
        for p in &self.programs {
            for l in &p.layers {
                l.validate()?;
            }
        }
        Ok(())
    }

    /// Total (program, layer) pair count, the number of YLT blocks a run
    /// produces.
    pub fn layer_count(&self) -> usize {
        self.programs.iter().map(|p| p.layers.len()).sum()
    }
}

/// One output row: the aggregate loss of a single trial under one
/// (program, layer) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YltRow {
    pub program: u32,
    pub layer: u32,
    pub trial_id: u64,
    pub loss: Currency,
}

/// Per-trial aggregate losses, one row per (program, layer, trial), in
/// (program, layer, trial_id) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearLossTable {
    pub rows: Vec<YltRow>,
}

impl YearLossTable {
    /// Sum losses across programs and layers per trial, ordered by
    /// trial_id. This is the portfolio-level loss vector the risk metrics
    /// consume.
    pub fn trial_totals(&self) -> Vec<Currency> {
        let max_trial = self.rows.iter().map(|r| r.trial_id).max();
        let Some(max_trial) = max_trial else {
            return Vec::new();
        };
        let mut totals = vec![0.0; (max_trial + 1) as usize];
        for row in &self.rows {
            totals[row.trial_id as usize] += row.loss;
        }
        totals
    }
}

fn retention_limit(loss: Currency, retention: Currency, limit: Currency) -> Currency {
    (loss - retention).max(0.0).min(limit)
}

/// Net an event loss against the XELT's financial terms:
/// min(max(loss - retention, 0), limit).
pub fn apply_elt_terms(loss: Currency, terms: &EltTerms) -> Currency {
    retention_limit(loss, terms.retention, terms.limit)
}

/// Net a combined event loss against the layer's occurrence terms.
pub fn apply_occurrence_terms(loss: Currency, terms: &LayerTerms) -> Currency {
    retention_limit(loss, terms.occ_retention, terms.occ_limit)
}

/// Net a trial's cumulative occurrence loss against the layer's aggregate
/// terms.
pub fn apply_aggregate_terms(cumulative: Currency, terms: &LayerTerms) -> Currency {
    retention_limit(cumulative, terms.agg_retention, terms.agg_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn elt(retention: f64, limit: f64) -> EltTerms {
        EltTerms { retention, limit }
    }

    fn layer_terms(occ_r: f64, occ_l: f64, agg_r: f64, agg_l: f64) -> LayerTerms {
        LayerTerms {
            occ_retention: occ_r,
            occ_limit: occ_l,
            agg_retention: agg_r,
            agg_limit: agg_l,
        }
    }

    #[test]
    fn elt_terms_limit_binds() {
        assert_eq!(apply_elt_terms(100.0, &elt(20.0, 50.0)), 50.0);
    }

    #[test]
    fn elt_terms_below_retention() {
        assert_eq!(apply_elt_terms(10.0, &elt(20.0, 50.0)), 0.0);
    }

    #[test]
    fn elt_terms_within_band() {
        assert_eq!(apply_elt_terms(60.0, &elt(20.0, 50.0)), 40.0);
    }

    #[test]
    fn occurrence_terms_zero_loss() {
        assert_eq!(
            apply_occurrence_terms(0.0, &layer_terms(100.0, 500.0, 0.0, 1e9)),
            0.0
        );
    }

    #[test]
    fn occurrence_terms_limit_binds() {
        assert_eq!(
            apply_occurrence_terms(1000.0, &layer_terms(100.0, 500.0, 0.0, 1e9)),
            500.0
        );
    }

    #[test]
    fn occurrence_terms_retention_band() {
        assert_eq!(
            apply_occurrence_terms(150.0, &layer_terms(100.0, 500.0, 0.0, 1e9)),
            50.0
        );
    }

    #[test]
    fn aggregate_terms_zero() {
        assert_eq!(
            apply_aggregate_terms(0.0, &layer_terms(0.0, 1e9, 2000.0, 5000.0)),
            0.0
        );
    }

    #[test]
    fn aggregate_terms_limit_binds() {
        assert_eq!(
            apply_aggregate_terms(10000.0, &layer_terms(0.0, 1e9, 2000.0, 5000.0)),
            5000.0
        );
    }

    #[test]
    fn aggregate_terms_retention_band() {
        assert_eq!(
            apply_aggregate_terms(2500.0, &layer_terms(0.0, 1e9, 2000.0, 5000.0)),
            500.0
        );
    }

    #[test]
    fn yet_validation_rejects_unsorted_timestamps() {
        let yet = YearEventTable {
            catalogue_size: 10,
            trials: vec![Trial {
                trial_id: 0,
                occurrences: vec![
                    EventOccurrence {
                        event_id: 1,
                        timestamp: 0.5,
                        z_prog_e: 0.5,
                    },
                    EventOccurrence {
                        event_id: 2,
                        timestamp: 0.2,
                        z_prog_e: 0.5,
                    },
                ],
            }],
        };
        assert!(matches!(
            yet.validate(),
            Err(ModelError::UnsortedOccurrences { .. })
        ));
    }

    #[test]
    fn yet_validation_rejects_event_id_zero() {
        let yet = YearEventTable {
            catalogue_size: 10,
            trials: vec![Trial {
                trial_id: 0,
                occurrences: vec![EventOccurrence {
                    event_id: 0,
                    timestamp: 0.1,
                    z_prog_e: 0.5,
                }],
            }],
        };
        assert!(matches!(
            yet.validate(),
            Err(ModelError::EventIdOutOfRange { .. })
        ));
    }

    #[test]
    fn yet_validation_rejects_gap_in_trial_ids() {
        let yet = YearEventTable {
            catalogue_size: 10,
            trials: vec![
                Trial {
                    trial_id: 0,
                    occurrences: vec![],
                },
                Trial {
                    trial_id: 2,
                    occurrences: vec![],
                },
            ],
        };
        assert!(matches!(
            yet.validate(),
            Err(ModelError::NonContiguousTrialIds { .. })
        ));
    }

    #[test]
    fn xelt_validation_rejects_duplicate_event_ids() {
        let rec = ExtendedEventLoss {
            event_id: 7,
            mean_loss: 10.0,
            sigma_i: 1.0,
            sigma_c: 1.0,
            max_loss: 20.0,
            z_e: 0.5,
        };
        let xelt = Xelt {
            records: vec![rec, rec],
            terms: EltTerms::identity(),
        };
        assert!(matches!(
            xelt.validate(),
            Err(ModelError::DuplicateEventId { event_id: 7 })
        ));
    }

    #[test]
    fn record_validation_rejects_mean_above_max() {
        let rec = ExtendedEventLoss {
            event_id: 1,
            mean_loss: 30.0,
            sigma_i: 1.0,
            sigma_c: 1.0,
            max_loss: 20.0,
            z_e: 0.5,
        };
        assert!(rec.validate().is_err());
    }

    #[test]
    fn trial_totals_sum_across_layers() {
        let ylt = YearLossTable {
            rows: vec![
                YltRow {
                    program: 0,
                    layer: 0,
                    trial_id: 0,
                    loss: 10.0,
                },
                YltRow {
                    program: 0,
                    layer: 1,
                    trial_id: 0,
                    loss: 5.0,
                },
                YltRow {
                    program: 0,
                    layer: 0,
                    trial_id: 1,
                    loss: 7.0,
                },
                YltRow {
                    program: 0,
                    layer: 1,
                    trial_id: 1,
                    loss: 0.0,
                },
            ],
        };
        assert_eq!(ylt.trial_totals(), vec![15.0, 7.0]);
    }

    proptest! {
        #[test]
        fn term_operators_bounded_and_monotone(
            a in 0.0..1e7f64,
            b in 0.0..1e7f64,
            retention in 0.0..1e6f64,
            limit in 0.0..1e6f64,
        ) {
            let terms = elt(retention, limit);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let out_lo = apply_elt_terms(lo, &terms);
            let out_hi = apply_elt_terms(hi, &terms);
            prop_assert!(out_lo <= out_hi);
            prop_assert!(out_lo >= 0.0 && out_lo <= limit);
            prop_assert!(out_hi >= 0.0 && out_hi <= limit);
        }

        #[test]
        fn occurrence_netting_never_increases_loss(
            loss in 0.0..1e7f64,
            occ_r in 0.0..1e6f64,
            occ_l in 0.0..1e7f64,
        ) {
            let terms = layer_terms(occ_r, occ_l, 0.0, f64::INFINITY);
            prop_assert!(apply_occurrence_terms(loss, &terms) <= loss);
        }

        #[test]
        fn aggregate_cap_telescopes_over_event_sequence(
            losses in proptest::collection::vec(0.0..1e5f64, 1..40),
            agg_r in 0.0..1e5f64,
            agg_l in 1.0..1e6f64,
        ) {
            let terms = layer_terms(0.0, f64::INFINITY, agg_r, agg_l);
            // Route 1: cap the final cumulative sum once.
            let total: f64 = losses.iter().sum();
            let capped_once = apply_aggregate_terms(total, &terms);
            // Route 2: sum per-event increments of the capped running sum.
            let mut running = 0.0;
            let mut prev_capped = 0.0;
            let mut increments = 0.0;
            for l in &losses {
                running += l;
                let capped = apply_aggregate_terms(running, &terms);
                increments += capped - prev_capped;
                prev_capped = capped;
            }
            prop_assert!((capped_once - increments).abs() <= 1e-9 * capped_once.max(1.0));
        }
    }
}
