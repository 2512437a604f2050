//! The four-step grant-based random access protocol and its two
//! collision-resolution variants.
//!
//! Per slot: (I) every active UE picks one of `tau_ra` pilots uniformly;
//! (II) the base station broadcasts a precoded response from which each
//! contender estimates the total uplink gain `alpha` on its pilot, summed
//! over the subarrays it sees; (III) each contender repeats the pilot only
//! if its own gain exceeds half the estimated total plus a bias term
//! (strict inequality); (IV) repeaters are admitted or rejected by the
//! resolution rule:
//!
//! * `sucre-xl` admits the repeaters of a pilot only when no subarray sees
//!   more than one of them (pairwise disjoint visibility regions);
//! * `noma-xl` admits them when no subarray sees more than `max_cluster`,
//!   separating co-visible repeaters by power-domain SIC per subarray.
//!
//! A failed pilot fails the whole contender set: everyone on it burns the
//! attempt and re-enters later with probability `p_na`, up to
//! `max_attempts` total attempts.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelRealization;
use crate::error::CoreError;

/// Index of a UE within a trial (0-based, dense).
pub type UeId = usize;
/// Index of a random access pilot.
pub type PilotId = usize;
/// Index of a subarray.
pub type SubarrayId = usize;

/// Which collision-resolution rule terminates step IV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    /// Strongest-user baseline: at most one repeater per subarray.
    SucreXl,
    /// Power-domain NOMA: up to `max_cluster` repeaters per subarray.
    NomaXl,
}

impl ProtocolKind {
    /// Stable lower-case name used by configs and output files.
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::SucreXl => "sucre-xl",
            ProtocolKind::NomaXl => "noma-xl",
        }
    }
}

/// How contenders learn the total contending gain on their pilot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// Perfect knowledge of the sum gain (the estimation-error-free limit).
    Genie,
    /// Genie value plus zero-mean Gaussian noise, clamped from below by the
    /// contender's own gain (a sum including the own term cannot be smaller).
    Noisy {
        /// Variance of the additive estimation noise, in watts squared.
        variance: f64,
    },
}

/// All protocol-level parameters of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub kind: ProtocolKind,
    /// Number of orthogonal random access pilots.
    pub tau_ra: usize,
    /// Uplink transmit power per UE, watts.
    pub rho: f64,
    /// Receiver noise power, watts.
    pub sigma2: f64,
    /// First-attempt access probability per slot.
    pub p_a: f64,
    /// Retry probability per slot while backing off.
    pub p_na: f64,
    /// Hard cap on access attempts before a UE gives up.
    pub max_attempts: u32,
    /// Bias scale factor of the repeat decision.
    pub delta: f64,
    /// Residual interference fraction left by imperfect SIC.
    pub varpi1: f64,
    /// Maximum co-admitted repeaters per subarray (1 for the baseline).
    pub max_cluster: usize,
    pub alpha_mode: AlphaMode,
}

impl ProtocolParams {
    /// Validates parameter ranges.
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.tau_ra == 0 {
            return Err(CoreError::config("tau_ra must be >= 1"));
        }
        if self.rho <= 0.0 || !self.rho.is_finite() {
            return Err(CoreError::config(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if self.sigma2 <= 0.0 || !self.sigma2.is_finite() {
            return Err(CoreError::config(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        for (name, p) in [("p_a", self.p_a), ("p_na", self.p_na)] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(CoreError::config(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if self.max_attempts == 0 {
            return Err(CoreError::config("max_attempts must be >= 1"));
        }
        if !self.delta.is_finite() {
            return Err(CoreError::config(format!(
                "delta must be finite, got {}",
                self.delta
            )));
        }
        if !(0.0..=1.0).contains(&self.varpi1) {
            return Err(CoreError::config(format!(
                "varpi1 must lie in [0, 1], got {}",
                self.varpi1
            )));
        }
        match self.kind {
            ProtocolKind::SucreXl => {
                if self.max_cluster != 1 {
                    return Err(CoreError::config(format!(
                        "the sucre-xl baseline admits exactly one repeater per subarray; \
                         max_cluster must be 1, got {}",
                        self.max_cluster
                    )));
                }
            }
            ProtocolKind::NomaXl => {
                if !(2..=3).contains(&self.max_cluster) {
                    return Err(CoreError::config(format!(
                        "noma-xl supports clusters of 2 or 3 per subarray, got {}",
                        self.max_cluster
                    )));
                }
            }
        }
        if let AlphaMode::Noisy { variance } = self.alpha_mode {
            if variance < 0.0 || !variance.is_finite() {
                return Err(CoreError::config(format!(
                    "alpha noise variance must be non-negative, got {variance}"
                )));
            }
        }
        Ok(())
    }
}

/// Lifecycle of one UE within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UeStatus {
    /// Waiting: never contended, or backing off after a failed attempt.
    Inactive,
    /// Re-entry draw already won; will contend next slot.
    Committed,
    /// Transmitted a pilot this slot (step I).
    Contending,
    /// Repeated its pilot this slot (step III said yes).
    Repeated,
    /// Granted access; terminal.
    Admitted,
    /// Out of attempts; terminal.
    Failed,
}

/// Per-UE contention state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UeState {
    /// Pilots transmitted so far (step I participations).
    pub attempts: u32,
    pub status: UeStatus,
}

impl UeState {
    /// Initial state: idle, nothing attempted.
    pub fn new() -> Self {
        UeState {
            attempts: 0,
            status: UeStatus::Inactive,
        }
    }

    /// True for terminal states that no transition may leave.
    pub fn is_absorbed(&self) -> bool {
        matches!(self.status, UeStatus::Admitted | UeStatus::Failed)
    }
}

impl Default for UeState {
    fn default() -> Self {
        Self::new()
    }
}

// =========================================================================
// Step I: pilot choice
// =========================================================================

/// Assigns each active UE one pilot uniformly at random.
///
/// Returns per-pilot contender lists; UE order within a list follows the
/// order of `active`, which callers keep ascending for reproducibility.
pub fn step1_choose_pilots(active: &[UeId], tau_ra: usize, rng: &mut impl Rng) -> Vec<Vec<UeId>> {
    debug_assert!(tau_ra >= 1);
    let mut pilots: Vec<Vec<UeId>> = vec![Vec::new(); tau_ra];
    for &ue in active {
        let t = rng.gen_range(0..tau_ra);
        pilots[t].push(ue);
    }
    pilots
}

// =========================================================================
// Step II: sum-gain estimation
// =========================================================================

/// A UE's own contribution to the sum gain on its pilot:
/// `rho * tau_ra * sum of visible subarray gains`.
pub fn own_gain(k: UeId, channel: &ChannelRealization, params: &ProtocolParams) -> f64 {
    params.rho * params.tau_ra as f64 * channel.sum_visible_beta(k)
}

/// Genie estimate of the total contending gain seen by contender `k`:
/// every contender's gain summed over the subarrays both UEs see.
pub fn genie_alpha(
    contenders: &[UeId],
    k: UeId,
    channel: &ChannelRealization,
    params: &ProtocolParams,
) -> f64 {
    let mut sum = 0.0;
    for &i in contenders {
        let mut shared = 0.0;
        for sa in channel.visible_sas(k) {
            if channel.visible(i, sa) {
                shared += channel.beta(i, sa);
            }
        }
        sum += params.rho * params.tau_ra as f64 * shared;
    }
    sum
}

/// Genie estimates for every contender of one pilot at once.
///
/// Algebraically identical to [`genie_alpha`] per contender, but aggregates
/// per-subarray gains first so the cost is linear in contenders instead of
/// quadratic.
pub fn genie_alpha_all(
    contenders: &[UeId],
    channel: &ChannelRealization,
    params: &ProtocolParams,
) -> Vec<f64> {
    let mut per_sa = vec![0.0f64; channel.b_count()];
    for &i in contenders {
        for sa in channel.visible_sas(i) {
            per_sa[sa] += channel.beta(i, sa);
        }
    }
    let scale = params.rho * params.tau_ra as f64;
    contenders
        .iter()
        .map(|&k| scale * channel.visible_sas(k).map(|sa| per_sa[sa]).sum::<f64>())
        .collect()
}

/// Noisy sum-gain estimate: genie value plus Gaussian noise, clamped from
/// below by the contender's own gain term.
pub fn noisy_alpha(
    genie_value: f64,
    own_gain_floor: f64,
    noise_var: f64,
    rng: &mut impl Rng,
) -> f64 {
    debug_assert!(noise_var >= 0.0);
    let noise = if noise_var > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        noise_var.sqrt() * z
    } else {
        0.0
    };
    (genie_value + noise).max(own_gain_floor)
}

// =========================================================================
// Step III: repeat decision
// =========================================================================

/// Bias term of the repeat decision: `delta / (sqrt(m_b) * sum of visible
/// gains)`. Negative `delta` makes contenders more aggressive.
pub fn bias_term(
    delta: f64,
    m_b: usize,
    visible_betas: impl IntoIterator<Item = f64>,
) -> Result<f64, CoreError> {
    if m_b == 0 {
        return Err(CoreError::domain(
            "bias term needs at least one antenna per subarray",
        ));
    }
    let mut sum = 0.0;
    let mut any = false;
    for b in visible_betas {
        sum += b;
        any = true;
    }
    if !any || sum <= 0.0 || sum.is_nan() {
        return Err(CoreError::domain(
            "bias term needs a non-empty visibility region with positive gains",
        ));
    }
    Ok(delta / ((m_b as f64).sqrt() * sum))
}

/// Step III for contender `k`: repeat the pilot iff the own gain strictly
/// exceeds half the estimated total plus the bias term.
pub fn decision_rule(
    k: UeId,
    alpha_hat: f64,
    channel: &ChannelRealization,
    params: &ProtocolParams,
) -> Result<bool, CoreError> {
    let own = own_gain(k, channel, params);
    let betas = channel.visible_sas(k).map(|sa| channel.beta(k, sa));
    let eps = bias_term(params.delta, channel.m_b(), betas)?;
    Ok(own > alpha_hat / 2.0 + eps)
}

// =========================================================================
// Step IV: collision resolution
// =========================================================================

/// Decoding order of one subarray: admitted UEs visible there, strongest
/// received power first.
#[derive(Debug, Clone, PartialEq)]
pub struct SaDecoding {
    pub sa: SubarrayId,
    /// `(ue, received power rho * beta)` sorted descending by power, ties
    /// broken by lower UE id.
    pub ranked: Vec<(UeId, f64)>,
}

/// Successful step IV outcome for one pilot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotAdmission {
    /// Every repeater of the pilot, ascending id.
    pub members: Vec<UeId>,
    /// Per-subarray decoding orders; only subarrays seeing >= 1 member.
    pub per_sa: Vec<SaDecoding>,
}

/// Step IV outcome for one pilot.
#[derive(Debug, Clone, PartialEq)]
pub enum ResolveOutcome {
    /// Nobody repeated; the collision stands unresolved.
    NoRepeaters,
    /// All repeaters admitted.
    Admitted(PilotAdmission),
    /// Some subarray saw more repeaters than the cluster limit; the whole
    /// pilot fails.
    Overloaded,
}

fn resolve_with_cluster_limit(
    repeaters: &[UeId],
    channel: &ChannelRealization,
    rho: f64,
    limit: usize,
) -> ResolveOutcome {
    if repeaters.is_empty() {
        return ResolveOutcome::NoRepeaters;
    }
    let mut counts = vec![0usize; channel.b_count()];
    for &ue in repeaters {
        for sa in channel.visible_sas(ue) {
            counts[sa] += 1;
            if counts[sa] > limit {
                return ResolveOutcome::Overloaded;
            }
        }
    }
    let mut per_sa = Vec::new();
    for (sa, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mut ranked: Vec<(UeId, f64)> = repeaters
            .iter()
            .filter(|&&ue| channel.visible(ue, sa))
            .map(|&ue| (ue, rho * channel.beta(ue, sa)))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("gains are finite")
                .then(a.0.cmp(&b.0))
        });
        per_sa.push(SaDecoding { sa, ranked });
    }
    ResolveOutcome::Admitted(PilotAdmission {
        members: repeaters.to_vec(),
        per_sa,
    })
}

/// NOMA resolution: admit all repeaters iff every subarray sees at most
/// `max_cluster` of them.
pub fn resolve_noma_xl(
    repeaters: &[UeId],
    channel: &ChannelRealization,
    params: &ProtocolParams,
) -> ResolveOutcome {
    resolve_with_cluster_limit(repeaters, channel, params.rho, params.max_cluster)
}

/// Baseline resolution: admit all repeaters iff their visibility regions
/// are pairwise disjoint (no subarray sees two of them).
pub fn resolve_sucre_xl(
    repeaters: &[UeId],
    channel: &ChannelRealization,
    params: &ProtocolParams,
) -> ResolveOutcome {
    resolve_with_cluster_limit(repeaters, channel, params.rho, 1)
}

// =========================================================================
// SIC and per-subarray SINR
// =========================================================================

/// SINR of the user decoded at `rank` (1-based) in a descending-power SIC
/// chain: already-decoded users leave a `varpi1` fraction of their power,
/// not-yet-decoded users interfere fully.
pub fn sic_sinr(rank: usize, ordered_powers: &[f64], varpi1: f64, sigma2: f64) -> f64 {
    assert!(
        rank >= 1 && rank <= ordered_powers.len(),
        "rank {rank} outside 1..={}",
        ordered_powers.len()
    );
    assert!(
        ordered_powers.windows(2).all(|w| w[0] >= w[1]),
        "SIC powers must be sorted descending: {ordered_powers:?}"
    );
    assert!(sigma2 > 0.0, "noise power must be positive");
    let before: f64 = ordered_powers[..rank - 1].iter().sum();
    let after: f64 = ordered_powers[rank..].iter().sum();
    ordered_powers[rank - 1] / (varpi1 * before + after + sigma2)
}

/// One SINR record: pilot `t`, subarray `sa`, decoding `rank` of `ue`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrEntry {
    pub sa: SubarrayId,
    pub pilot: PilotId,
    pub rank: usize,
    pub ue: UeId,
    pub sinr: f64,
}

/// All per-subarray SINRs of one slot's admissions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SinrTable {
    pub entries: Vec<SinrEntry>,
}

impl SinrTable {
    /// Appends the SINRs of one admitted pilot.
    pub fn push_admission(
        &mut self,
        pilot: PilotId,
        admission: &PilotAdmission,
        varpi1: f64,
        sigma2: f64,
    ) {
        for sa_dec in &admission.per_sa {
            let powers: Vec<f64> = sa_dec.ranked.iter().map(|&(_, p)| p).collect();
            for (idx, &(ue, _)) in sa_dec.ranked.iter().enumerate() {
                let rank = idx + 1;
                self.entries.push(SinrEntry {
                    sa: sa_dec.sa,
                    pilot,
                    rank,
                    ue,
                    sinr: sic_sinr(rank, &powers, varpi1, sigma2),
                });
            }
        }
    }
}

// =========================================================================
// Retry dynamics
// =========================================================================

/// End-of-slot bookkeeping for UEs that burned an attempt this slot or are
/// still backing off: out-of-attempts UEs become `Failed`, the rest draw
/// re-entry with probability `p_na` (winners are `Committed` for the next
/// slot and returned; losers keep waiting as `Inactive`).
pub fn retry_update(
    candidates: &[UeId],
    states: &mut [UeState],
    p_na: f64,
    max_attempts: u32,
    rng: &mut impl Rng,
) -> Vec<UeId> {
    debug_assert!((0.0..=1.0).contains(&p_na));
    let mut reentering = Vec::new();
    for &ue in candidates {
        let state = &mut states[ue];
        debug_assert!(!state.is_absorbed(), "absorbed UE {ue} offered a retry");
        if state.attempts >= max_attempts {
            state.status = UeStatus::Failed;
        } else if rng.gen_bool(p_na) {
            state.status = UeStatus::Committed;
            reentering.push(ue);
        } else {
            state.status = UeStatus::Inactive;
        }
    }
    reentering
}
