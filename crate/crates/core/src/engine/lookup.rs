//! Event-loss lookup structures. One index per XELT, in three layouts:
//! a catalogue-sized direct-access table (fastest probes, largest
//! memory), a sorted array with binary search, and a hash map. All three
//! resolve identical records; the engine output never depends on the
//! backend choice.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{ExtendedEventLoss, Layer};

use super::EngineError;

/// Fallback budget for the direct-access estimate: 2 GiB.
pub const DEFAULT_MEMORY_BUDGET_BYTES: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LookupBackend {
    DirectAccess,
    SortedBinary,
    Hashed,
}

impl LookupBackend {
    pub const ALL: [LookupBackend; 3] = [
        LookupBackend::DirectAccess,
        LookupBackend::SortedBinary,
        LookupBackend::Hashed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LookupBackend::DirectAccess => "direct_access",
            LookupBackend::SortedBinary => "sorted_binary",
            LookupBackend::Hashed => "hashed",
        }
    }
}

impl std::str::FromStr for LookupBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct_access" | "direct-access" | "direct" => Ok(LookupBackend::DirectAccess),
            "sorted_binary" | "sorted-binary" | "sorted" => Ok(LookupBackend::SortedBinary),
            "hashed" | "hash" => Ok(LookupBackend::Hashed),
            other => Err(format!(
                "unknown lookup backend '{other}' (expected direct_access, sorted_binary, or hashed)"
            )),
        }
    }
}

enum XeltIndex {
    /// One slot per catalogue event id; `None` marks an absent event,
    /// which is distinct from a present record with zero mean loss.
    Direct(Vec<Option<ExtendedEventLoss>>),
    Sorted(Vec<ExtendedEventLoss>),
    Hashed(HashMap<u32, ExtendedEventLoss>),
}

impl XeltIndex {
    #[inline]
    fn get(&self, event_id: u32) -> Option<&ExtendedEventLoss> {
        match self {
            XeltIndex::Direct(slots) => slots[event_id as usize - 1].as_ref(),
            XeltIndex::Sorted(records) => records
                .binary_search_by_key(&event_id, |r| r.event_id)
                .ok()
                .map(|i| &records[i]),
            XeltIndex::Hashed(map) => map.get(&event_id),
        }
    }
}

/// Per-layer loss lookup: each XELT is kept as an independent table.
pub struct LossLookup {
    backend: LookupBackend,
    catalogue_size: u64,
    tables: Vec<XeltIndex>,
}

impl LossLookup {
    /// Build the lookup for a layer. Every record's event id must lie
    /// inside the catalogue; a direct-access build over budget is refused
    /// with the estimate in the error.
    pub fn build(
        layer: &Layer,
        catalogue_size: u64,
        backend: LookupBackend,
        memory_budget_bytes: u64,
    ) -> Result<LossLookup, EngineError> {
        for (xelt_idx, xelt) in layer.xelts.iter().enumerate() {
            for record in &xelt.records {
                if record.event_id < 1 || u64::from(record.event_id) > catalogue_size {
                    return Err(EngineError::EventIdBeyondCatalogue {
                        xelt: xelt_idx,
                        event_id: record.event_id,
                        catalogue_size,
                    });
                }
            }
        }

        if backend == LookupBackend::DirectAccess {
            let estimate = Self::direct_access_bytes(layer.xelts.len(), catalogue_size);
            if estimate > memory_budget_bytes {
                return Err(EngineError::MemoryBudgetExceeded {
                    slots: Self::direct_access_slots(layer.xelts.len(), catalogue_size),
                    estimated_bytes: estimate,
                    budget_bytes: memory_budget_bytes,
                });
            }
        }

        let tables = layer
            .xelts
            .iter()
            .map(|xelt| match backend {
                LookupBackend::DirectAccess => {
                    let mut slots: Vec<Option<ExtendedEventLoss>> =
                        vec![None; catalogue_size as usize];
                    for record in &xelt.records {
                        slots[record.event_id as usize - 1] = Some(*record);
                    }
                    XeltIndex::Direct(slots)
                }
                LookupBackend::SortedBinary => {
                    let mut records = xelt.records.clone();
                    records.sort_unstable_by_key(|r| r.event_id);
                    XeltIndex::Sorted(records)
                }
                LookupBackend::Hashed => XeltIndex::Hashed(
                    xelt.records.iter().map(|r| (r.event_id, *r)).collect(),
                ),
            })
            .collect();

        Ok(LossLookup {
            backend,
            catalogue_size,
            tables,
        })
    }

    /// Resolve (xelt, event_id) to a record, or `None` when the event is
    /// absent from that XELT and contributes zero loss.
    #[inline]
    pub fn get(&self, xelt: usize, event_id: u32) -> Option<&ExtendedEventLoss> {
        self.tables[xelt].get(event_id)
    }

    pub fn backend(&self) -> LookupBackend {
        self.backend
    }

    pub fn catalogue_size(&self) -> u64 {
        self.catalogue_size
    }

    pub fn xelt_count(&self) -> usize {
        self.tables.len()
    }

    /// Slot count of the direct-access layout: catalogue_size per XELT.
    pub fn direct_access_slots(xelt_count: usize, catalogue_size: u64) -> u64 {
        catalogue_size * xelt_count as u64
    }

    /// Byte estimate of the direct-access layout.
    pub fn direct_access_bytes(xelt_count: usize, catalogue_size: u64) -> u64 {
        Self::direct_access_slots(xelt_count, catalogue_size)
            * std::mem::size_of::<Option<ExtendedEventLoss>>() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{self, GenSpec, SplitMix64};
    use crate::model::{EltTerms, Xelt};

    fn record(event_id: u32, mean: f64) -> ExtendedEventLoss {
        ExtendedEventLoss {
            event_id,
            mean_loss: mean,
            sigma_i: 1.0,
            sigma_c: 1.0,
            max_loss: mean * 2.0 + 1.0,
            z_e: 0.5,
        }
    }

    fn small_layer() -> Layer {
        Layer {
            xelts: vec![Xelt {
                records: vec![record(3, 30.0), record(7, 70.0)],
                terms: EltTerms::identity(),
            }],
            terms: crate::model::LayerTerms::identity(),
        }
    }

    #[test]
    fn direct_access_populates_only_present_slots() {
        let lookup = LossLookup::build(
            &small_layer(),
            10,
            LookupBackend::DirectAccess,
            DEFAULT_MEMORY_BUDGET_BYTES,
        )
        .unwrap();
        assert_eq!(lookup.get(0, 3).unwrap().mean_loss, 30.0);
        assert_eq!(lookup.get(0, 7).unwrap().mean_loss, 70.0);
        assert!(lookup.get(0, 8).is_none());
        assert!(lookup.get(0, 1).is_none());
    }

    #[test]
    fn absent_event_is_none_for_every_backend() {
        for backend in LookupBackend::ALL {
            let lookup =
                LossLookup::build(&small_layer(), 10, backend, DEFAULT_MEMORY_BUDGET_BYTES)
                    .unwrap();
            assert!(lookup.get(0, 5).is_none(), "{}", backend.name());
        }
    }

    #[test]
    fn build_rejects_event_id_beyond_catalogue() {
        let err = LossLookup::build(
            &small_layer(),
            5,
            LookupBackend::Hashed,
            DEFAULT_MEMORY_BUDGET_BYTES,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            EngineError::EventIdBeyondCatalogue { event_id: 7, .. }
        ));
    }

    #[test]
    fn direct_access_refused_over_budget_with_suggestion() {
        let err = LossLookup::build(&small_layer(), 1_000_000, LookupBackend::DirectAccess, 1024)
            .unwrap_err();
        match err {
            EngineError::MemoryBudgetExceeded {
                slots,
                estimated_bytes,
                budget_bytes,
            } => {
                assert_eq!(slots, 1_000_000);
                assert!(estimated_bytes > budget_bytes);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // Compact backends still build against the same catalogue.
        assert!(LossLookup::build(&small_layer(), 1_000_000, LookupBackend::Hashed, 1024).is_ok());
    }

    #[test]
    fn slot_arithmetic_matches_catalogue_times_xelts() {
        assert_eq!(LossLookup::direct_access_slots(16, 1_000_000), 16_000_000);
    }

    #[test]
    fn backends_agree_on_random_probes() {
        let spec = GenSpec {
            catalogue_size: 2_000,
            events_per_xelt: 400,
            ..GenSpec::desk(17)
        };
        let layer = datagen::generate_layer(&spec).unwrap();
        let direct = LossLookup::build(
            &layer,
            2_000,
            LookupBackend::DirectAccess,
            DEFAULT_MEMORY_BUDGET_BYTES,
        )
        .unwrap();
        let sorted = LossLookup::build(
            &layer,
            2_000,
            LookupBackend::SortedBinary,
            DEFAULT_MEMORY_BUDGET_BYTES,
        )
        .unwrap();
        let hashed = LossLookup::build(
            &layer,
            2_000,
            LookupBackend::Hashed,
            DEFAULT_MEMORY_BUDGET_BYTES,
        )
        .unwrap();

        let mut rng = SplitMix64::new(99);
        for _ in 0..1_000 {
            let xelt = rng.next_below(4) as usize;
            let event_id = (1 + rng.next_below(2_000)) as u32;
            let a = direct.get(xelt, event_id);
            let b = sorted.get(xelt, event_id);
            let c = hashed.get(xelt, event_id);
            assert_eq!(a, b);
            assert_eq!(b, c);
        }
    }
}
