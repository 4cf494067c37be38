//! Trial-loss computation and the parallel run: event lookup per XELT,
//! optional secondary-uncertainty sampling, financial-term application,
//! and a chunked work queue that partitions trials across workers with
//! deterministic write positions, so the output is bit-identical for any
//! worker count, chunk size, or lookup backend.

pub mod lookup;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    apply_aggregate_terms, apply_elt_terms, apply_occurrence_terms, Currency, ExtendedEventLoss,
    Layer, ModelError, Portfolio, Trial, YearEventTable, YearLossTable, YltRow,
};
use crate::stats::Precision;
use crate::uncertainty::{sample_secondary_loss, UncertaintyError};

pub use lookup::{LookupBackend, LossLookup, DEFAULT_MEMORY_BUDGET_BYTES};

/// Whether event losses come straight from the mean (primary uncertainty
/// only) or are sampled through the beta pipeline (secondary uncertainty).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Pu,
    Su,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Pu => "pu",
            Mode::Su => "su",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pu" => Ok(Mode::Pu),
            "su" => Ok(Mode::Su),
            other => Err(format!("unknown mode '{other}' (expected pu or su)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub worker_count: usize,
    /// Trials per work unit pulled from the shared queue.
    pub chunk_size: usize,
    pub precision: Precision,
    pub lookup_backend: LookupBackend,
    pub memory_budget_bytes: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Pu,
            worker_count: 1,
            chunk_size: 64,
            precision: Precision::default(),
            lookup_backend: LookupBackend::DirectAccess,
            memory_budget_bytes: DEFAULT_MEMORY_BUDGET_BYTES,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.worker_count < 1 {
            return Err(EngineError::Config("worker_count must be at least 1".into()));
        }
        if self.chunk_size < 1 {
            return Err(EngineError::Config("chunk_size must be at least 1".into()));
        }
        self.precision
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(
        "direct access table needs {slots} slots (~{estimated_bytes} bytes), over the \
         {budget_bytes}-byte budget; use the sorted_binary or hashed backend instead"
    )]
    MemoryBudgetExceeded {
        slots: u64,
        estimated_bytes: u64,
        budget_bytes: u64,
    },
    #[error("XELT {xelt}: event_id {event_id} exceeds catalogue size {catalogue_size}")]
    EventIdBeyondCatalogue {
        xelt: usize,
        event_id: u32,
        catalogue_size: u64,
    },
    #[error("trial {trial_id}: {source}")]
    Trial {
        trial_id: u64,
        source: UncertaintyError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("run config: {0}")]
    Config(String),
}

/// Wall time accumulated per instrumented phase, summed across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseTimes {
    /// Fetching events and resolving records in the loss lookup.
    pub lookup: Duration,
    /// Applying ELT, occurrence, and aggregate terms plus accumulation.
    pub financial_terms: Duration,
    /// Sampling losses through the secondary-uncertainty pipeline.
    pub secondary_uncertainty: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.lookup + self.financial_terms + self.secondary_uncertainty
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PhaseNanos {
    lookup: u64,
    terms: u64,
    su: u64,
}

impl PhaseNanos {
    fn merge(&mut self, other: PhaseNanos) {
        self.lookup += other.lookup;
        self.terms += other.terms;
        self.su += other.su;
    }
}

impl From<PhaseNanos> for PhaseTimes {
    fn from(n: PhaseNanos) -> Self {
        PhaseTimes {
            lookup: Duration::from_nanos(n.lookup),
            financial_terms: Duration::from_nanos(n.terms),
            secondary_uncertainty: Duration::from_nanos(n.su),
        }
    }
}

/// Compute one trial's loss for one layer: resolve each occurrence in
/// every XELT, take the mean loss (PU) or sample it (SU), net each event
/// loss through ELT terms, sum across XELTs, net through occurrence
/// terms, accumulate, and net the final cumulative sum through the
/// aggregate terms once.
pub fn trial_loss(
    trial: &Trial,
    layer: &Layer,
    lookup: &LossLookup,
    cfg: &RunConfig,
) -> Result<Currency, EngineError> {
    let mut hits = Vec::new();
    let mut sampled = Vec::new();
    let mut phases = PhaseNanos::default();
    trial_loss_impl::<false>(
        trial,
        layer,
        lookup,
        cfg.mode,
        &cfg.precision,
        &mut hits,
        &mut sampled,
        &mut phases,
    )
    .map_err(|source| EngineError::Trial {
        trial_id: trial.trial_id,
        source,
    })
}

#[allow(clippy::too_many_arguments)]
fn trial_loss_impl<'l, const INSTR: bool>(
    trial: &Trial,
    layer: &Layer,
    lookup: &'l LossLookup,
    mode: Mode,
    precision: &Precision,
    hits: &mut Vec<(usize, &'l ExtendedEventLoss)>,
    sampled: &mut Vec<Currency>,
    phases: &mut PhaseNanos,
) -> Result<Currency, UncertaintyError> {
    let mut cumulative = 0.0;
    for occ in &trial.occurrences {
        let t_lookup = if INSTR { Some(Instant::now()) } else { None };
        hits.clear();
        for xelt_idx in 0..layer.xelts.len() {
            if let Some(record) = lookup.get(xelt_idx, occ.event_id) {
                hits.push((xelt_idx, record));
            }
        }
        if let Some(t) = t_lookup {
            phases.lookup += t.elapsed().as_nanos() as u64;
        }
        if hits.is_empty() {
            continue;
        }

        if mode == Mode::Su {
            let t_su = if INSTR { Some(Instant::now()) } else { None };
            sampled.clear();
            for (_, record) in hits.iter() {
                sampled.push(sample_secondary_loss(record, occ.z_prog_e, precision)?);
            }
            if let Some(t) = t_su {
                phases.su += t.elapsed().as_nanos() as u64;
            }
        }

        let t_terms = if INSTR { Some(Instant::now()) } else { None };
        let mut event_loss = 0.0;
        for (slot, (xelt_idx, record)) in hits.iter().enumerate() {
            let raw = match mode {
                Mode::Pu => record.mean_loss,
                Mode::Su => sampled[slot],
            };
            event_loss += apply_elt_terms(raw, &layer.xelts[*xelt_idx].terms);
        }
        cumulative += apply_occurrence_terms(event_loss, &layer.terms);
        if let Some(t) = t_terms {
            phases.terms += t.elapsed().as_nanos() as u64;
        }
    }
    Ok(apply_aggregate_terms(cumulative, &layer.terms))
}

enum WorkerMsg {
    Chunk { start: usize, losses: Vec<Currency> },
    Done { phases: PhaseNanos },
    Failed { trial_id: u64, error: UncertaintyError },
}

/// Run one layer over a slice of trials with the chunked work queue.
/// Output position is indexed by the trial's offset in the slice, so the
/// merge needs no ordering step and is independent of scheduling.
fn run_layer_trials<const INSTR: bool>(
    trials: &[Trial],
    layer: &Layer,
    lookup: &LossLookup,
    cfg: &RunConfig,
) -> Result<(Vec<Currency>, PhaseNanos), EngineError> {
    let n = trials.len();
    let chunk = cfg.chunk_size;
    let n_chunks = n.div_ceil(chunk.max(1));
    let next_chunk = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<WorkerMsg>();

    let mut out = vec![0.0; n];
    let mut phases = PhaseNanos::default();
    let mut failure: Option<(u64, UncertaintyError)> = None;

    thread::scope(|scope| {
        for _ in 0..cfg.worker_count {
            let tx = tx.clone();
            let next_chunk = &next_chunk;
            scope.spawn(move || {
                let mut hits = Vec::with_capacity(layer.xelts.len());
                let mut sampled = Vec::with_capacity(layer.xelts.len());
                let mut local_phases = PhaseNanos::default();
                loop {
                    let c = next_chunk.fetch_add(1, Ordering::Relaxed);
                    if c >= n_chunks {
                        break;
                    }
                    let start = c * chunk;
                    let end = (start + chunk).min(n);
                    let mut losses = Vec::with_capacity(end - start);
                    for trial in &trials[start..end] {
                        match trial_loss_impl::<INSTR>(
                            trial,
                            layer,
                            lookup,
                            cfg.mode,
                            &cfg.precision,
                            &mut hits,
                            &mut sampled,
                            &mut local_phases,
                        ) {
                            Ok(loss) => losses.push(loss),
                            Err(error) => {
                                let _ = tx.send(WorkerMsg::Failed {
                                    trial_id: trial.trial_id,
                                    error,
                                });
                                return;
                            }
                        }
                    }
                    let _ = tx.send(WorkerMsg::Chunk { start, losses });
                }
                let _ = tx.send(WorkerMsg::Done {
                    phases: local_phases,
                });
            });
        }
        drop(tx);

        for msg in rx {
            match msg {
                WorkerMsg::Chunk { start, losses } => {
                    out[start..start + losses.len()].copy_from_slice(&losses);
                }
                WorkerMsg::Done { phases: p } => phases.merge(p),
                WorkerMsg::Failed { trial_id, error } => {
                    // Keep the lowest-trial-id failure so the reported
                    // error does not depend on scheduling.
                    if failure.as_ref().is_none_or(|(id, _)| trial_id < *id) {
                        failure = Some((trial_id, error));
                    }
                }
            }
        }
    });

    match failure {
        Some((trial_id, source)) => Err(EngineError::Trial { trial_id, source }),
        None => Ok((out, phases)),
    }
}

fn run<const INSTR: bool>(
    portfolio: &Portfolio,
    yet: &YearEventTable,
    cfg: &RunConfig,
) -> Result<(YearLossTable, PhaseTimes), EngineError> {
    cfg.validate()?;
    portfolio.validate()?;
    yet.validate()?;

    let mut rows = Vec::with_capacity(portfolio.layer_count() * yet.trials.len());
    let mut phases = PhaseNanos::default();
    for (p_idx, program) in portfolio.programs.iter().enumerate() {
        for (l_idx, layer) in program.layers.iter().enumerate() {
            let lookup = LossLookup::build(
                layer,
                yet.catalogue_size,
                cfg.lookup_backend,
                cfg.memory_budget_bytes,
            )?;
            let (losses, layer_phases) = run_layer_trials::<INSTR>(&yet.trials, layer, &lookup, cfg)?;
            phases.merge(layer_phases);
            rows.extend(losses.into_iter().enumerate().map(|(t, loss)| YltRow {
                program: p_idx as u32,
                layer: l_idx as u32,
                trial_id: t as u64,
                loss,
            }));
        }
    }
    Ok((YearLossTable { rows }, phases.into()))
}

/// Run the full analysis: one loss per (program, layer, trial). All
/// randomness is pre-simulated in the inputs, so the output is a pure
/// function of (portfolio, yet, mode, precision).
pub fn run_analysis(
    portfolio: &Portfolio,
    yet: &YearEventTable,
    cfg: &RunConfig,
) -> Result<YearLossTable, EngineError> {
    run::<false>(portfolio, yet, cfg).map(|(ylt, _)| ylt)
}

/// Same as [`run_analysis`] but with per-phase wall times accumulated
/// across workers. Instrumentation does not change the arithmetic; the
/// YLT is bit-identical to the uninstrumented run.
pub fn run_analysis_instrumented(
    portfolio: &Portfolio,
    yet: &YearEventTable,
    cfg: &RunConfig,
) -> Result<(YearLossTable, PhaseTimes), EngineError> {
    run::<true>(portfolio, yet, cfg)
}

/// Wall times of the two pools of a split run.
#[derive(Debug, Clone, Copy)]
pub struct SplitTiming {
    pub pool_a: Duration,
    pub pool_b: Duration,
    /// First trial index assigned to pool B.
    pub boundary: usize,
}

/// Split the trial workload between two independently configured worker
/// pools running side by side: pool A takes the first
/// `floor(split_fraction * n)` trials, pool B the rest. The merged YLT is
/// identical to a [`run_analysis`] output; per-pool wall times are
/// reported for load-balance sweeps.
pub fn run_split(
    portfolio: &Portfolio,
    yet: &YearEventTable,
    cfg_a: &RunConfig,
    cfg_b: &RunConfig,
    split_fraction: f64,
) -> Result<(YearLossTable, SplitTiming), EngineError> {
    cfg_a.validate()?;
    cfg_b.validate()?;
    if !(0.0..=1.0).contains(&split_fraction) {
        return Err(EngineError::Config(format!(
            "split_fraction {split_fraction} outside [0, 1]"
        )));
    }
    if cfg_a.mode != cfg_b.mode || cfg_a.precision != cfg_b.precision {
        return Err(EngineError::Config(
            "split pools must share mode and precision for the merged output to be well-defined"
                .into(),
        ));
    }
    portfolio.validate()?;
    yet.validate()?;

    let n = yet.trials.len();
    let boundary = ((split_fraction * n as f64).floor() as usize).min(n);
    let (head, tail) = yet.trials.split_at(boundary);

    // Lookups are built once up front; pool times measure trial
    // processing only.
    let mut jobs = Vec::new();
    for (p_idx, program) in portfolio.programs.iter().enumerate() {
        for (l_idx, layer) in program.layers.iter().enumerate() {
            let lookup_a = LossLookup::build(
                layer,
                yet.catalogue_size,
                cfg_a.lookup_backend,
                cfg_a.memory_budget_bytes,
            )?;
            let lookup_b = if cfg_b.lookup_backend == cfg_a.lookup_backend {
                None
            } else {
                Some(LossLookup::build(
                    layer,
                    yet.catalogue_size,
                    cfg_b.lookup_backend,
                    cfg_b.memory_budget_bytes,
                )?)
            };
            jobs.push((p_idx as u32, l_idx as u32, layer, lookup_a, lookup_b));
        }
    }

    let run_pool = |trials: &[Trial],
                    cfg: &RunConfig,
                    use_b_lookup: bool|
     -> Result<(Vec<Vec<Currency>>, Duration), EngineError> {
        let started = Instant::now();
        let mut per_job = Vec::with_capacity(jobs.len());
        for (_, _, layer, lookup_a, lookup_b) in &jobs {
            let lookup = if use_b_lookup {
                lookup_b.as_ref().unwrap_or(lookup_a)
            } else {
                lookup_a
            };
            let (losses, _) = run_layer_trials::<false>(trials, layer, lookup, cfg)?;
            per_job.push(losses);
        }
        Ok((per_job, started.elapsed()))
    };

    let (result_a, result_b) = thread::scope(|scope| {
        let handle_a = scope.spawn(|| run_pool(head, cfg_a, false));
        let result_b = run_pool(tail, cfg_b, true);
        (handle_a.join().expect("pool A panicked"), result_b)
    });
    let (losses_a, time_a) = result_a?;
    let (losses_b, time_b) = result_b?;

    let mut rows = Vec::with_capacity(jobs.len() * n);
    for (job_idx, (p_idx, l_idx, _, _, _)) in jobs.iter().enumerate() {
        let make_row = |trial_id: usize, loss: Currency| YltRow {
            program: *p_idx,
            layer: *l_idx,
            trial_id: trial_id as u64,
            loss,
        };
        rows.extend(
            losses_a[job_idx]
                .iter()
                .enumerate()
                .map(|(t, &loss)| make_row(t, loss)),
        );
        rows.extend(
            losses_b[job_idx]
                .iter()
                .enumerate()
                .map(|(t, &loss)| make_row(boundary + t, loss)),
        );
    }

    Ok((
        YearLossTable { rows },
        SplitTiming {
            pool_a: time_a,
            pool_b: time_b,
            boundary,
        },
    ))
}
