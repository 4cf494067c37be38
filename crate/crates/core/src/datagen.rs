//! Deterministic synthetic generation of year event tables, extended
//! event-loss tables, and portfolios. Every structure is a pure function
//! of the seed, so runs are reproducible from the generation spec alone.

use thiserror::Error;

use crate::model::{
    EltTerms, EventOccurrence, ExtendedEventLoss, Layer, LayerTerms, Portfolio, Program, Trial,
    YearEventTable,
};

/// Identifier written into generated-file headers so readers can tell
/// which generator produced a dataset.
pub const RNG_ALGORITHM_ID: &str = "splitmix64/v1";

/// SplitMix64: a counter-based generator with a single 64-bit state.
/// Output k of a stream is a pure function of (seed, k), which is what
/// makes generation order-independent and cheap to document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent stream derived from a (seed, tag) pair. Tags keep the
    /// YET, layer, and terms draws decoupled so adding a field to one
    /// table never shifts another.
    pub fn substream(seed: u64, tag: u64) -> Self {
        SplitMix64 {
            state: mix(seed ^ mix(tag)),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform draw on the open interval (0, 1); never returns 0 or 1.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        (((self.next_u64() >> 11) as f64) + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw on [lo, hi).
    #[inline]
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_open01()
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }
}

// Substream tags, one per generated table kind.
const TAG_YET: u64 = 0x5945_5401;
const TAG_LAYER: u64 = 0x4C41_5902;
const TAG_TERMS: u64 = 0x5445_5203;

/// An inclusive (lo, hi) range; degenerate lo == hi pins the value.
pub type Range = (f64, f64);

/// Everything needed to generate one dataset deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub seed: u64,
    pub num_trials: u64,
    /// Inclusive bounds on occurrences per trial.
    pub events_per_trial: (u32, u32),
    pub catalogue_size: u64,
    pub programs: u32,
    pub layers_per_program: u32,
    pub xelts_per_layer: u32,
    pub events_per_xelt: u32,
    /// Mean loss drawn uniformly from this range; lower bound must be
    /// positive so every record has 0 < mean < max.
    pub mean_loss_range: Range,
    /// Independent and correlated std devs as fractions of the mean.
    pub sigma_i_frac_range: Range,
    pub sigma_c_frac_range: Range,
    /// max_loss = mean * multiplier; multipliers stay above 1.
    pub max_loss_multiplier_range: Range,
    pub elt_retention_range: Range,
    pub elt_limit_range: Range,
    pub occ_retention_range: Range,
    pub occ_limit_range: Range,
    pub agg_retention_range: Range,
    pub agg_limit_range: Range,
}

impl GenSpec {
    /// Desk-scale default: small enough to run in seconds, shaped like
    /// the typical industry configuration (one layer, a handful of
    /// XELTs, a six-figure catalogue scaled down).
    pub fn desk(seed: u64) -> Self {
        GenSpec {
            seed,
            num_trials: 10_000,
            events_per_trial: (100, 100),
            catalogue_size: 10_000,
            programs: 1,
            layers_per_program: 1,
            xelts_per_layer: 4,
            events_per_xelt: 1_000,
            mean_loss_range: (1_000.0, 100_000.0),
            sigma_i_frac_range: (0.05, 0.45),
            sigma_c_frac_range: (0.05, 0.45),
            max_loss_multiplier_range: (2.0, 6.0),
            elt_retention_range: (0.0, 10_000.0),
            elt_limit_range: (100_000.0, 400_000.0),
            occ_retention_range: (5_000.0, 50_000.0),
            occ_limit_range: (100_000.0, 600_000.0),
            agg_retention_range: (0.0, 200_000.0),
            agg_limit_range: (1_000_000.0, 8_000_000.0),
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let count_checks: [(&str, u64); 6] = [
            ("num_trials", self.num_trials),
            ("catalogue_size", self.catalogue_size),
            ("programs", u64::from(self.programs)),
            ("layers_per_program", u64::from(self.layers_per_program)),
            ("xelts_per_layer", u64::from(self.xelts_per_layer)),
            ("events_per_xelt", u64::from(self.events_per_xelt)),
        ];
        for (name, value) in count_checks {
            if value < 1 {
                return Err(GenError::CountTooSmall { name, value });
            }
        }
        if self.events_per_trial.0 < 1 || self.events_per_trial.0 > self.events_per_trial.1 {
            return Err(GenError::EmptyRange {
                name: "events_per_trial",
            });
        }
        if u64::from(self.events_per_xelt) > self.catalogue_size {
            return Err(GenError::XeltLargerThanCatalogue {
                events_per_xelt: self.events_per_xelt,
                catalogue_size: self.catalogue_size,
            });
        }
        let ranges: [(&str, Range); 9] = [
            ("mean_loss_range", self.mean_loss_range),
            ("sigma_i_frac_range", self.sigma_i_frac_range),
            ("sigma_c_frac_range", self.sigma_c_frac_range),
            ("max_loss_multiplier_range", self.max_loss_multiplier_range),
            ("elt_retention_range", self.elt_retention_range),
            ("elt_limit_range", self.elt_limit_range),
            ("occ_retention_range", self.occ_retention_range),
            ("occ_limit_range", self.occ_limit_range),
            ("agg_retention_range", self.agg_retention_range),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi && lo >= 0.0) {
                return Err(GenError::EmptyRange { name });
            }
        }
        let (alo, ahi) = self.agg_limit_range;
        if !(alo.is_finite() && ahi.is_finite() && alo <= ahi && alo >= 0.0) {
            return Err(GenError::EmptyRange {
                name: "agg_limit_range",
            });
        }
        if self.mean_loss_range.0 <= 0.0 {
            return Err(GenError::EmptyRange {
                name: "mean_loss_range (lower bound must be > 0)",
            });
        }
        if self.max_loss_multiplier_range.0 <= 1.0 {
            return Err(GenError::MultiplierNotAboveOne {
                value: self.max_loss_multiplier_range.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("{name} = {value}; must be at least 1")]
    CountTooSmall { name: &'static str, value: u64 },
    #[error("range {name} is empty or out of bounds")]
    EmptyRange { name: &'static str },
    #[error("events_per_xelt {events_per_xelt} exceeds catalogue_size {catalogue_size}")]
    XeltLargerThanCatalogue {
        events_per_xelt: u32,
        catalogue_size: u64,
    },
    #[error("max_loss multiplier lower bound {value} must exceed 1")]
    MultiplierNotAboveOne { value: f64 },
}

/// Generate the year event table: `num_trials` trials of timestamp-sorted
/// occurrences, event ids uniform over the catalogue (repeats allowed),
/// draws in the open unit interval.
pub fn generate_yet(spec: &GenSpec) -> Result<YearEventTable, GenError> {
    spec.validate()?;
    let mut rng = SplitMix64::substream(spec.seed, TAG_YET);
    let (lo, hi) = spec.events_per_trial;
    let mut trials = Vec::with_capacity(spec.num_trials as usize);
    for trial_id in 0..spec.num_trials {
        let count = if lo == hi {
            lo
        } else {
            lo + rng.next_below(u64::from(hi - lo + 1)) as u32
        };
        let mut occurrences = Vec::with_capacity(count as usize);
        for _ in 0..count {
            occurrences.push(EventOccurrence {
                event_id: (1 + rng.next_below(spec.catalogue_size)) as u32,
                timestamp: rng.next_open01(),
                z_prog_e: rng.next_open01(),
            });
        }
        occurrences.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        trials.push(Trial {
            trial_id,
            occurrences,
        });
    }
    Ok(YearEventTable {
        catalogue_size: spec.catalogue_size,
        trials,
    })
}

/// Generate one layer: `xelts_per_layer` tables of unique sorted event
/// ids with loss records drawn from the configured ranges, under drawn
/// ELT and layer terms.
pub fn generate_layer(spec: &GenSpec) -> Result<Layer, GenError> {
    spec.validate()?;
    generate_layer_indexed(spec, 0, 0)
}

/// Generate the full portfolio: `programs` x `layers_per_program` layers,
/// each from its own substream so layer contents do not shift when the
/// portfolio shape changes.
pub fn generate_portfolio(spec: &GenSpec) -> Result<Portfolio, GenError> {
    spec.validate()?;
    let mut programs = Vec::with_capacity(spec.programs as usize);
    for p in 0..spec.programs {
        let mut layers = Vec::with_capacity(spec.layers_per_program as usize);
        for l in 0..spec.layers_per_program {
            layers.push(generate_layer_indexed(spec, p, l)?);
        }
        programs.push(Program { layers });
    }
    Ok(Portfolio { programs })
}

fn generate_layer_indexed(spec: &GenSpec, program: u32, layer: u32) -> Result<Layer, GenError> {
    let layer_tag = TAG_LAYER ^ (u64::from(program) << 32) ^ u64::from(layer);
    let mut terms_rng = SplitMix64::substream(spec.seed, TAG_TERMS ^ layer_tag);
    let terms = LayerTerms {
        occ_retention: terms_rng.next_range(spec.occ_retention_range.0, spec.occ_retention_range.1),
        occ_limit: terms_rng.next_range(spec.occ_limit_range.0, spec.occ_limit_range.1),
        agg_retention: terms_rng.next_range(spec.agg_retention_range.0, spec.agg_retention_range.1),
        agg_limit: terms_rng.next_range(spec.agg_limit_range.0, spec.agg_limit_range.1),
    };

    let mut xelts = Vec::with_capacity(spec.xelts_per_layer as usize);
    for x in 0..spec.xelts_per_layer {
        let mut rng = SplitMix64::substream(spec.seed, layer_tag ^ (u64::from(x + 1) << 16));
        let elt_terms = EltTerms {
            retention: rng.next_range(spec.elt_retention_range.0, spec.elt_retention_range.1),
            limit: rng.next_range(spec.elt_limit_range.0, spec.elt_limit_range.1),
        };
        let ids = sample_unique_ids(&mut rng, spec.events_per_xelt, spec.catalogue_size);
        let mut records = Vec::with_capacity(ids.len());
        for event_id in ids {
            let mean_loss = rng.next_range(spec.mean_loss_range.0, spec.mean_loss_range.1);
            let sigma_i =
                mean_loss * rng.next_range(spec.sigma_i_frac_range.0, spec.sigma_i_frac_range.1);
            let sigma_c =
                mean_loss * rng.next_range(spec.sigma_c_frac_range.0, spec.sigma_c_frac_range.1);
            let max_loss = mean_loss
                * rng.next_range(
                    spec.max_loss_multiplier_range.0,
                    spec.max_loss_multiplier_range.1,
                );
            records.push(ExtendedEventLoss {
                event_id,
                mean_loss,
                sigma_i,
                sigma_c,
                max_loss,
                z_e: rng.next_open01(),
            });
        }
        xelts.push(Xelt {
            records,
            terms: elt_terms,
        });
    }
    Ok(Layer { xelts, terms })
}

/// Draw `count` distinct event ids from 1..=catalogue, returned sorted.
/// Rejection sampling for sparse tables, full shuffle when the table
/// covers most of the catalogue.
fn sample_unique_ids(rng: &mut SplitMix64, count: u32, catalogue: u64) -> Vec<u32> {
    let count = count as usize;
    let mut ids: Vec<u32>;
    if (count as u64) * 2 >= catalogue {
        let mut all: Vec<u32> = (1..=catalogue as u32).collect();
        // Partial Fisher-Yates: only the first `count` slots matter.
        for i in 0..count {
            let j = i + rng.next_below((all.len() - i) as u64) as usize;
            all.swap(i, j);
        }
        ids = all[..count].to_vec();
    } else {
        let mut seen = std::collections::HashSet::with_capacity(count * 2);
        ids = Vec::with_capacity(count);
        while ids.len() < count {
            let id = (1 + rng.next_below(catalogue)) as u32;
            if seen.insert(id) {
                ids.push(id);
            }
        }
    }
    ids.sort_unstable();
    ids
}
