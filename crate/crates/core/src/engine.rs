//! Monte Carlo engine: slot-by-slot contention dynamics and cross-trial
//! aggregation.
//!
//! A trial simulates `horizon_slots` random access slots for a population of
//! `k_inactive` UEs over one channel realization. Each slot: UEs enter
//! contention (first attempts with probability `p_a`, committed re-entries
//! from the previous slot's retry draw), pick pilots, run the four protocol
//! steps per pilot, and either get admitted (terminal), burn the attempt and
//! back off, or fail permanently at the attempt cap.
//!
//! Channel rows are materialized lazily, the first time a UE contends; since
//! every row is a pure function of `(master_seed, trial, ue)`, this is a pure
//! optimization — UEs that never contend (the overwhelming majority under
//! small `p_a`) cost nothing, and results are bit-identical to eager
//! evaluation. Campaigns run trials in parallel and merge per-trial metrics
//! in trial-index order, so output is independent of worker count.

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelRealization, RowSampler};
use crate::error::CoreError;
use crate::fading::FadingModel;
use crate::geometry::{ArrayGeometry, CellLayout, StandoffPolicy};
use crate::metrics::{noma_xl_sum_rate, sucre_xl_sum_rate};
use crate::metrics::{
    CampaignAccumulator, CampaignStats, RoundMetrics, RunAccumulator, RunMetrics,
};
use crate::protocol::{
    genie_alpha_all, noisy_alpha, own_gain, resolve_noma_xl, resolve_sucre_xl, retry_update,
    step1_choose_pilots, AlphaMode, PilotAdmission, ProtocolKind, ProtocolParams, ResolveOutcome,
    SinrTable, UeId, UeState, UeStatus,
};
use crate::rng::{substream, Stream};
use crate::visibility::validate_p_b;

/// Everything needed to run one simulation campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    /// Side of the square cell, meters.
    pub cell_side: f64,
    pub standoff: StandoffPolicy,
    pub fading: FadingModel,
    /// Per-subarray visibility probability.
    pub p_b: f64,
    /// Number of inactive UEs in the cell (the crowding parameter K).
    pub k_inactive: usize,
    pub protocol: ProtocolParams,
    /// Slots simulated per trial.
    pub horizon_slots: usize,
    /// Monte Carlo trials per campaign.
    pub trials: usize,
    pub master_seed: u64,
}

impl Scenario {
    /// Validates the cross-module consistency of the scenario.
    pub fn validate(&self) -> Result<(), CoreError> {
        self.fading.validate()?;
        validate_p_b(self.p_b)?;
        self.protocol.validate()?;
        // Geometry and cell validity are re-checked via layout construction.
        self.cell_layout()?;
        if self.horizon_slots == 0 {
            return Err(CoreError::config("horizon_slots must be >= 1"));
        }
        if self.protocol.p_na > 0.0 {
            let needed = (self.protocol.max_attempts as f64 / self.protocol.p_na).ceil() as usize;
            if self.horizon_slots < needed {
                return Err(CoreError::config(format!(
                    "horizon_slots = {} is too short for {} attempts at retry probability {}; \
                     need at least {needed} slots for UEs to reach an absorbing state",
                    self.horizon_slots, self.protocol.max_attempts, self.protocol.p_na
                )));
            }
        }
        if self.trials == 0 {
            return Err(CoreError::config("trials must be >= 1"));
        }
        Ok(())
    }

    /// The resolved cell footprint.
    pub fn cell_layout(&self) -> Result<CellLayout, CoreError> {
        CellLayout::new(&self.geometry, self.cell_side, self.standoff)
    }

    /// True when placement cannot satisfy the far-field constraint; a
    /// property of geometry and cell only, identical for every trial.
    pub fn far_field_violated(&self) -> Result<bool, CoreError> {
        Ok(!self.cell_layout()?.far_field_feasible(&self.geometry))
    }
}

/// Result of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    pub metrics: RunMetrics,
    pub far_field_violated: bool,
}

/// Per-slot event record used by tests and debugging; not produced in
/// normal campaigns.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub slot: usize,
    pub attempting: Vec<UeId>,
    pub admitted: Vec<UeId>,
    /// Contenders whose attempt failed this slot (withdrawn or collided).
    pub failed_attempt: Vec<UeId>,
    pub metrics: RoundMetrics,
}

struct SlotOutcome {
    admitted: Vec<UeId>,
    failed: Vec<UeId>,
    sum_rate: f64,
}

/// Runs steps I-IV for one slot's active set. Statuses of `active` UEs must
/// be `Contending`; admitted UEs leave as `Admitted`, the rest keep
/// `Contending`/`Repeated` for the caller's retry bookkeeping.
fn run_slot(
    active: &[UeId],
    channel: &ChannelRealization,
    states: &mut [UeState],
    params: &ProtocolParams,
    master_seed: u64,
    trial: u64,
    slot: usize,
) -> Result<SlotOutcome, CoreError> {
    let mut pilot_rng = substream(master_seed, trial, Stream::PilotChoice, slot as u64);
    let pilots = step1_choose_pilots(active, params.tau_ra, &mut pilot_rng);

    let mut noise_rng = match params.alpha_mode {
        AlphaMode::Noisy { .. } => Some(substream(
            master_seed,
            trial,
            Stream::AlphaNoise,
            slot as u64,
        )),
        AlphaMode::Genie => None,
    };

    let mut admitted = Vec::new();
    let mut failed = Vec::new();
    let mut sinr_table = SinrTable::default();
    let mut sucre_admitted = Vec::new();

    for (t, contenders) in pilots.iter().enumerate() {
        if contenders.is_empty() {
            continue;
        }
        let mut alphas = genie_alpha_all(contenders, channel, params);
        if let AlphaMode::Noisy { variance } = params.alpha_mode {
            let rng = noise_rng
                .as_mut()
                .expect("noise stream exists in noisy mode");
            for (alpha, &k) in alphas.iter_mut().zip(contenders) {
                *alpha = noisy_alpha(*alpha, own_gain(k, channel, params), variance, rng);
            }
        }

        let mut repeaters = Vec::new();
        for (&k, &alpha) in contenders.iter().zip(&alphas) {
            if crate::protocol::decision_rule(k, alpha, channel, params)? {
                states[k].status = UeStatus::Repeated;
                repeaters.push(k);
            }
        }

        let outcome = match params.kind {
            ProtocolKind::NomaXl => resolve_noma_xl(&repeaters, channel, params),
            ProtocolKind::SucreXl => resolve_sucre_xl(&repeaters, channel, params),
        };
        match outcome {
            ResolveOutcome::Admitted(admission) => {
                apply_admission(
                    t,
                    &admission,
                    contenders,
                    states,
                    params,
                    &mut admitted,
                    &mut failed,
                    &mut sinr_table,
                    &mut sucre_admitted,
                );
            }
            ResolveOutcome::NoRepeaters | ResolveOutcome::Overloaded => {
                // The whole contender set burned this attempt.
                failed.extend_from_slice(contenders);
            }
        }
    }

    let sum_rate = match params.kind {
        ProtocolKind::NomaXl => noma_xl_sum_rate(&sinr_table),
        ProtocolKind::SucreXl => sucre_xl_sum_rate(&sucre_admitted, channel, params),
    };
    Ok(SlotOutcome {
        admitted,
        failed,
        sum_rate,
    })
}

#[allow(clippy::too_many_arguments)]
fn apply_admission(
    pilot: usize,
    admission: &PilotAdmission,
    contenders: &[UeId],
    states: &mut [UeState],
    params: &ProtocolParams,
    admitted: &mut Vec<UeId>,
    failed: &mut Vec<UeId>,
    sinr_table: &mut SinrTable,
    sucre_admitted: &mut Vec<UeId>,
) {
    for &k in &admission.members {
        debug_assert!(!states[k].is_absorbed());
        states[k].status = UeStatus::Admitted;
        admitted.push(k);
    }
    // Contenders that withdrew in step III lost the slot even though the
    // repeaters got through.
    for &k in contenders {
        if states[k].status != UeStatus::Admitted {
            failed.push(k);
        }
    }
    match params.kind {
        ProtocolKind::NomaXl => {
            sinr_table.push_admission(pilot, admission, params.varpi1, params.sigma2);
        }
        ProtocolKind::SucreXl => sucre_admitted.extend_from_slice(&admission.members),
    }
}

fn run_trial_impl(
    scenario: &Scenario,
    trial: u64,
    trace: Option<&mut Vec<RoundTrace>>,
) -> Result<(TrialResult, Vec<UeState>), CoreError> {
    let cell = scenario.cell_layout()?;
    let sampler = RowSampler::new(
        &scenario.geometry,
        &cell,
        &scenario.fading,
        scenario.p_b,
        scenario.master_seed,
        trial,
    )?;
    let mut channel = ChannelRealization::empty(
        scenario.k_inactive,
        scenario.geometry.b(),
        scenario.geometry.m_b(),
    );
    run_dynamics(
        scenario,
        &scenario.protocol,
        &sampler,
        &mut channel,
        trial,
        trace,
    )
    .map(|(metrics, states)| {
        (
            TrialResult {
                trial_index: trial,
                metrics,
                far_field_violated: sampler.far_field_violated(),
            },
            states,
        )
    })
}

/// Runs the contention dynamics for one trial on an existing (possibly
/// partially materialized) channel. Exposed at crate level so the bias-factor
/// sweep can replay many protocol variants on one shared realization.
pub(crate) fn run_dynamics(
    scenario: &Scenario,
    params: &ProtocolParams,
    sampler: &RowSampler<'_>,
    channel: &mut ChannelRealization,
    trial: u64,
    mut trace: Option<&mut Vec<RoundTrace>>,
) -> Result<(RunMetrics, Vec<UeState>), CoreError> {
    let k = scenario.k_inactive;
    let mut states = vec![UeState::new(); k];
    let mut acc = RunAccumulator::new();
    // UEs waiting between failed attempts; kept sorted by id.
    let mut backoff: Vec<UeId> = Vec::new();
    let mut unabsorbed = k;

    for slot in 0..scenario.horizon_slots {
        if unabsorbed == 0 {
            // Every UE is admitted or failed; remaining slots are idle and
            // carry no metric information.
            break;
        }

        // Access draws: committed re-entries join for free, fresh UEs flip
        // p_a. Backing-off UEs are handled by the end-of-slot retry draw.
        let mut access_rng = substream(
            scenario.master_seed,
            trial,
            Stream::AccessDraws,
            slot as u64,
        );
        let mut active: Vec<UeId> = Vec::new();
        for (ue, state) in states.iter_mut().enumerate() {
            match state.status {
                UeStatus::Committed => {
                    state.status = UeStatus::Contending;
                    active.push(ue);
                }
                UeStatus::Inactive if state.attempts == 0 && access_rng.gen_bool(params.p_a) => {
                    state.status = UeStatus::Contending;
                    active.push(ue);
                }
                _ => {}
            }
        }

        if active.is_empty() && backoff.is_empty() {
            acc.add_round(&RoundMetrics::default());
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(RoundTrace {
                    slot,
                    attempting: Vec::new(),
                    admitted: Vec::new(),
                    failed_attempt: Vec::new(),
                    metrics: RoundMetrics::default(),
                });
            }
            continue;
        }

        for &ue in &active {
            sampler.materialize_row(channel, ue, true)?;
            states[ue].attempts += 1;
        }

        let outcome = if active.is_empty() {
            SlotOutcome {
                admitted: Vec::new(),
                failed: Vec::new(),
                sum_rate: 0.0,
            }
        } else {
            run_slot(
                &active,
                channel,
                &mut states,
                params,
                scenario.master_seed,
                trial,
                slot,
            )?
        };
        unabsorbed -= outcome.admitted.len();

        let round = RoundMetrics {
            attempting_count: active.len(),
            admitted_count: outcome.admitted.len(),
            sum_rate: outcome.sum_rate,
        };
        acc.add_round(&round);

        // Retry draw over everything currently waiting: this slot's failed
        // contenders plus UEs already backing off. Exactly one p_na draw per
        // waiting UE per slot.
        let mut candidates = std::mem::take(&mut backoff);
        candidates.extend_from_slice(&outcome.failed);
        candidates.sort_unstable();
        let mut retry_rng = substream(scenario.master_seed, trial, Stream::RetryDraws, slot as u64);
        let reentering = retry_update(
            &candidates,
            &mut states,
            params.p_na,
            params.max_attempts,
            &mut retry_rng,
        );
        debug_assert!(reentering
            .iter()
            .all(|&ue| states[ue].status == UeStatus::Committed));
        for &ue in &candidates {
            match states[ue].status {
                UeStatus::Inactive => backoff.push(ue),
                UeStatus::Failed => unabsorbed -= 1,
                UeStatus::Committed => {}
                other => unreachable!("retry left UE {ue} in {other:?}"),
            }
        }

        if let Some(tr) = trace.as_deref_mut() {
            tr.push(RoundTrace {
                slot,
                attempting: active.clone(),
                admitted: outcome.admitted.clone(),
                failed_attempt: outcome.failed.clone(),
                metrics: round,
            });
        }
    }

    Ok((acc.finalize(&states), states))
}

/// Simulates one trial; deterministic in `(scenario, trial)`.
pub fn run_trial(scenario: &Scenario, trial: u64) -> Result<TrialResult, CoreError> {
    run_trial_impl(scenario, trial, None).map(|(result, _)| result)
}

/// [`run_trial`] plus per-slot traces and final UE states, for tests.
pub fn run_trial_traced(
    scenario: &Scenario,
    trial: u64,
) -> Result<(TrialResult, Vec<RoundTrace>, Vec<UeState>), CoreError> {
    let mut traces = Vec::new();
    let (result, states) = run_trial_impl(scenario, trial, Some(&mut traces))?;
    Ok((result, traces, states))
}

/// Campaign output: per-metric means with confidence intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub stats: CampaignStats,
    pub far_field_violated: bool,
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CoreError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(CoreError::config("worker count must be >= 1"));
        }
        builder = builder.num_threads(w);
    }
    builder
        .build()
        .map_err(|e| CoreError::config(format!("failed to build worker pool: {e}")))
}

/// Runs all trials of a scenario and aggregates the metrics.
///
/// `workers = None` uses every core. Results are bit-identical for any
/// worker count: trials depend only on `(master_seed, trial_index)` and are
/// merged in index order.
pub fn run_campaign(
    scenario: &Scenario,
    workers: Option<usize>,
) -> Result<CampaignResult, CoreError> {
    scenario.validate()?;
    let far_field_violated = scenario.far_field_violated()?;
    let pool = build_pool(workers)?;
    let per_trial: Result<Vec<RunMetrics>, CoreError> = pool.install(|| {
        (0..scenario.trials as u64)
            .into_par_iter()
            .map(|trial| run_trial(scenario, trial).map(|r| r.metrics))
            .collect()
    });
    let per_trial = per_trial?;
    let mut acc = CampaignAccumulator::new();
    for metrics in &per_trial {
        acc.add_trial(metrics);
    }
    Ok(CampaignResult {
        stats: acc.summary(),
        far_field_violated,
    })
}

/// Runs one trial's dynamics once per `delta` value on a single shared
/// channel realization (common random numbers across the grid), returning
/// one metric set per delta in input order.
pub fn run_trial_over_deltas(
    scenario: &Scenario,
    trial: u64,
    deltas: &[f64],
) -> Result<Vec<RunMetrics>, CoreError> {
    let cell = scenario.cell_layout()?;
    let sampler = RowSampler::new(
        &scenario.geometry,
        &cell,
        &scenario.fading,
        scenario.p_b,
        scenario.master_seed,
        trial,
    )?;
    let mut channel = ChannelRealization::empty(
        scenario.k_inactive,
        scenario.geometry.b(),
        scenario.geometry.m_b(),
    );
    deltas
        .iter()
        .map(|&delta| {
            let mut params = scenario.protocol;
            params.delta = delta;
            run_dynamics(scenario, &params, &sampler, &mut channel, trial, None)
                .map(|(metrics, _)| metrics)
        })
        .collect()
}
