//! Per-round and per-run performance metrics.
//!
//! Four quantities are tracked per run and averaged over Monte Carlo trials
//! with 95% confidence intervals:
//!
//! * average access attempts over UEs that contended at least once;
//! * failure probability: the fraction of contending UEs that exhausted
//!   their attempt budget;
//! * normalized accepted UEs: admitted / attempting, averaged over slots
//!   that saw at least one attempt;
//! * sum rate in bits per channel use: SIC rates summed over subarrays,
//!   pilots and cluster members for `noma-xl`; interference-free per-UE
//!   rates over visible subarrays for `sucre-xl`.
//!
//! All accumulation is Welford-style (numerically stable running mean and
//! variance) with an exact pairwise merge, so trial results can be combined
//! across workers in a fixed order, independent of scheduling.

use crate::channel::ChannelRealization;
use crate::protocol::{ProtocolParams, SinrTable, UeId, UeState, UeStatus};

/// Numerically stable running mean / variance accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of accumulated samples.
    pub fn count(&self) -> u64 {
        self.n
    }

    /// Adds one sample.
    pub fn add(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Merges another accumulator (Chan's parallel update). Yields the same
    /// result as adding the other accumulator's samples, up to rounding.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let n = n1 + n2;
        let d = other.mean - self.mean;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }

    /// Sample mean; 0 when empty.
    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Half-width of the normal-approximation 95% confidence interval.
    pub fn ci95_half_width(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            1.96 * (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Outcome counts of one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoundMetrics {
    /// UEs that transmitted a pilot this slot.
    pub attempting_count: usize,
    /// UEs granted access this slot.
    pub admitted_count: usize,
    /// Sum rate realized by this slot's admissions, bits per channel use.
    pub sum_rate: f64,
}

/// Total rate of one slot's NOMA admissions: `log2(1 + sinr)` summed over
/// every (subarray, pilot, decoded member) entry of the SINR table.
pub fn noma_xl_sum_rate(table: &SinrTable) -> f64 {
    table.entries.iter().map(|e| (1.0 + e.sinr).log2()).sum()
}

/// Total rate of one slot's baseline admissions: each admitted UE gets an
/// interference-free `log2(1 + rho * beta / sigma2)` on every visible
/// subarray (admission guarantees it is alone there on its pilot).
pub fn sucre_xl_sum_rate(
    admitted: &[UeId],
    channel: &ChannelRealization,
    params: &ProtocolParams,
) -> f64 {
    admitted
        .iter()
        .map(|&ue| {
            channel
                .visible_sas(ue)
                .map(|sa| (1.0 + params.rho * channel.beta(ue, sa) / params.sigma2).log2())
                .sum::<f64>()
        })
        .sum()
}

/// End-of-trial population counts; they must satisfy the conservation
/// identity `admitted + failed + pending = ever_contended`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialCounts {
    /// UEs with at least one attempt.
    pub ever_contended: usize,
    pub admitted: usize,
    pub failed: usize,
    /// Contended but neither admitted nor failed when the horizon ended.
    pub pending: usize,
}

impl TrialCounts {
    /// Derives the counts from final UE states.
    pub fn from_states(states: &[UeState]) -> Self {
        let mut c = TrialCounts::default();
        for s in states {
            if s.attempts == 0 {
                continue;
            }
            c.ever_contended += 1;
            match s.status {
                UeStatus::Admitted => c.admitted += 1,
                UeStatus::Failed => c.failed += 1,
                _ => c.pending += 1,
            }
        }
        c
    }

    /// The conservation identity the engine must maintain.
    pub fn is_conserved(&self) -> bool {
        self.admitted + self.failed + self.pending == self.ever_contended
    }
}

/// Per-trial metric summary.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunMetrics {
    /// Mean attempts over UEs that ever contended; 0 if none did.
    pub avg_attempts: f64,
    /// Fraction of contending UEs that ran out of attempts.
    pub failure_prob: f64,
    /// Mean of admitted/attempting over slots with >= 1 attempt.
    pub normalized_accepted: f64,
    /// Mean per-slot sum rate over slots with >= 1 attempt.
    pub mean_sum_rate: f64,
    pub counts: TrialCounts,
}

/// Accumulates one trial's rounds into a [`RunMetrics`].
#[derive(Debug, Clone, Default)]
pub struct RunAccumulator {
    accepted_ratio: Welford,
    round_sum_rate: Welford,
    rounds_seen: u64,
}

impl RunAccumulator {
    /// Fresh accumulator for one trial.
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in one slot. Slots with no attempts carry no information about
    /// acceptance or rate and only bump the round counter.
    pub fn add_round(&mut self, round: &RoundMetrics) {
        self.rounds_seen += 1;
        if round.attempting_count == 0 {
            debug_assert_eq!(round.admitted_count, 0);
            return;
        }
        debug_assert!(round.admitted_count <= round.attempting_count);
        self.accepted_ratio
            .add(round.admitted_count as f64 / round.attempting_count as f64);
        self.round_sum_rate.add(round.sum_rate);
    }

    /// Number of slots folded in so far.
    pub fn rounds_seen(&self) -> u64 {
        self.rounds_seen
    }

    /// Finalizes the trial against the end-of-trial UE states.
    pub fn finalize(&self, states: &[UeState]) -> RunMetrics {
        let counts = TrialCounts::from_states(states);
        debug_assert!(counts.is_conserved());
        let total_attempts: u64 = states.iter().map(|s| s.attempts as u64).sum();
        let (avg_attempts, failure_prob) = if counts.ever_contended > 0 {
            (
                total_attempts as f64 / counts.ever_contended as f64,
                counts.failed as f64 / counts.ever_contended as f64,
            )
        } else {
            (0.0, 0.0)
        };
        RunMetrics {
            avg_attempts,
            failure_prob,
            normalized_accepted: self.accepted_ratio.mean(),
            mean_sum_rate: self.round_sum_rate.mean(),
            counts,
        }
    }
}

/// Mean and confidence interval of one metric over trials.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricStat {
    pub mean: f64,
    pub ci95_half_width: f64,
}

impl MetricStat {
    fn from_welford(w: &Welford) -> Self {
        MetricStat {
            mean: w.mean(),
            ci95_half_width: w.ci95_half_width(),
        }
    }

    /// Lower edge of the 95% interval.
    pub fn lo(&self) -> f64 {
        self.mean - self.ci95_half_width
    }

    /// Upper edge of the 95% interval.
    pub fn hi(&self) -> f64 {
        self.mean + self.ci95_half_width
    }
}

/// Cross-trial accumulator for the four run metrics.
#[derive(Debug, Clone, Default)]
pub struct CampaignAccumulator {
    avg_attempts: Welford,
    failure_prob: Welford,
    normalized_accepted: Welford,
    mean_sum_rate: Welford,
}

impl CampaignAccumulator {
    /// Empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Folds in one trial.
    pub fn add_trial(&mut self, run: &RunMetrics) {
        self.avg_attempts.add(run.avg_attempts);
        self.failure_prob.add(run.failure_prob);
        self.normalized_accepted.add(run.normalized_accepted);
        self.mean_sum_rate.add(run.mean_sum_rate);
    }

    /// Merges another accumulator; callers merge in a fixed (trial-index)
    /// order so results do not depend on worker count.
    pub fn merge(&mut self, other: &CampaignAccumulator) {
        self.avg_attempts.merge(&other.avg_attempts);
        self.failure_prob.merge(&other.failure_prob);
        self.normalized_accepted.merge(&other.normalized_accepted);
        self.mean_sum_rate.merge(&other.mean_sum_rate);
    }

    /// Number of trials accumulated.
    pub fn trials(&self) -> u64 {
        self.avg_attempts.count()
    }

    /// Snapshot of all four metric statistics.
    pub fn summary(&self) -> CampaignStats {
        CampaignStats {
            avg_attempts: MetricStat::from_welford(&self.avg_attempts),
            failure_prob: MetricStat::from_welford(&self.failure_prob),
            normalized_accepted: MetricStat::from_welford(&self.normalized_accepted),
            mean_sum_rate: MetricStat::from_welford(&self.mean_sum_rate),
            trials: self.trials(),
        }
    }
}

/// Campaign-level means and confidence intervals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CampaignStats {
    pub avg_attempts: MetricStat,
    pub failure_prob: MetricStat,
    pub normalized_accepted: MetricStat,
    pub mean_sum_rate: MetricStat,
    pub trials: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{resolve_noma_xl, AlphaMode, ProtocolKind, ResolveOutcome, SinrEntry};
    use crate::rng::{substream, Stream};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn rel_err(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    fn noma_params() -> ProtocolParams {
        ProtocolParams {
            kind: ProtocolKind::NomaXl,
            tau_ra: 10,
            rho: 1.0,
            sigma2: 1.0,
            p_a: 0.01,
            p_na: 0.5,
            max_attempts: 10,
            delta: 0.0,
            varpi1: 0.1,
            max_cluster: 3,
            alpha_mode: AlphaMode::Genie,
        }
    }

    fn channel_from_rows(b_count: usize, rows: &[(Vec<bool>, Vec<f64>)]) -> ChannelRealization {
        let mut ch = ChannelRealization::empty(rows.len(), b_count, 100);
        for (k, (vis, beta)) in rows.iter().enumerate() {
            ch.set_row(k, vis.clone(), beta.clone());
        }
        ch
    }

    // ---- sum rates ------------------------------------------------------

    #[test]
    fn empty_tables_and_sets_rate_zero() {
        assert_eq!(noma_xl_sum_rate(&SinrTable::default()), 0.0);
        let ch = channel_from_rows(1, &[(vec![true], vec![0.5])]);
        assert_eq!(sucre_xl_sum_rate(&[], &ch, &noma_params()), 0.0);
    }

    #[test]
    fn unit_sinr_gives_one_bit() {
        let table = SinrTable {
            entries: vec![SinrEntry {
                sa: 0,
                pilot: 0,
                rank: 1,
                ue: 0,
                sinr: 1.0,
            }],
        };
        assert!(rel_err(noma_xl_sum_rate(&table), 1.0) < 1e-15);
    }

    #[test]
    fn two_user_cluster_rate_matches_hand_computation() {
        // Received powers 0.2 and 0.1 at one subarray, varpi1 = 0.1:
        // log2(1 + 0.2/1.1) + log2(1 + 0.1/1.02) ~ 0.3759377.
        let ch = channel_from_rows(1, &[(vec![true], vec![0.2]), (vec![true], vec![0.1])]);
        let params = noma_params();
        let adm = match resolve_noma_xl(&[0, 1], &ch, &params) {
            ResolveOutcome::Admitted(adm) => adm,
            other => panic!("expected admission, got {other:?}"),
        };
        let mut table = SinrTable::default();
        table.push_admission(0, &adm, params.varpi1, params.sigma2);
        let got = noma_xl_sum_rate(&table);
        let want = (1.0f64 + 0.2 / 1.1).log2() + (1.0f64 + 0.1 / 1.02).log2();
        assert!(rel_err(got, want) < 1e-14, "got {got}, want {want}");
        assert!((got - 0.3759377).abs() < 1e-6);
    }

    #[test]
    fn sucre_rate_reference_value() {
        // rho * beta / sigma2 = 3 on two visible subarrays: 2 * log2(4) = 4.
        let ch = channel_from_rows(3, &[(vec![true, true, false], vec![3.0, 3.0, 0.0])]);
        let got = sucre_xl_sum_rate(&[0], &ch, &noma_params());
        assert!(rel_err(got, 4.0) < 1e-14, "got {got}");
    }

    #[test]
    fn rate_is_additive_over_pilots() {
        let ch = channel_from_rows(
            2,
            &[
                (vec![true, false], vec![0.4, 0.0]),
                (vec![true, false], vec![0.2, 0.0]),
                (vec![false, true], vec![0.0, 0.7]),
            ],
        );
        let params = noma_params();
        let adm_a = match resolve_noma_xl(&[0, 1], &ch, &params) {
            ResolveOutcome::Admitted(a) => a,
            other => panic!("{other:?}"),
        };
        let adm_b = match resolve_noma_xl(&[2], &ch, &params) {
            ResolveOutcome::Admitted(a) => a,
            other => panic!("{other:?}"),
        };
        let mut joint = SinrTable::default();
        joint.push_admission(0, &adm_a, params.varpi1, params.sigma2);
        joint.push_admission(1, &adm_b, params.varpi1, params.sigma2);
        let mut only_a = SinrTable::default();
        only_a.push_admission(0, &adm_a, params.varpi1, params.sigma2);
        let mut only_b = SinrTable::default();
        only_b.push_admission(1, &adm_b, params.varpi1, params.sigma2);
        let lhs = noma_xl_sum_rate(&joint);
        let rhs = noma_xl_sum_rate(&only_a) + noma_xl_sum_rate(&only_b);
        assert!(rel_err(lhs, rhs) < 1e-14);
    }

    proptest! {
        /// A lone repeater admitted under NOMA realizes exactly the baseline
        /// rate: one interference-free stream per visible subarray.
        #[test]
        fn singleton_noma_rate_equals_sucre_rate(
            seed in 0u64..400,
            b in 1usize..6,
        ) {
            let mut rng = substream(seed, 0, Stream::Visibility, 7);
            let mut vis: Vec<bool> = (0..b).map(|_| rng.gen_bool(0.5)).collect();
            if !vis.iter().any(|&v| v) {
                vis[rng.gen_range(0..b)] = true;
            }
            let beta: Vec<f64> =
                (0..b).map(|i| if vis[i] { rng.gen::<f64>() * 2.0 + 0.01 } else { 0.0 }).collect();
            let ch = channel_from_rows(b, &[(vis, beta)]);
            let params = noma_params();
            let adm = match resolve_noma_xl(&[0], &ch, &params) {
                ResolveOutcome::Admitted(a) => a,
                other => panic!("{other:?}"),
            };
            let mut table = SinrTable::default();
            table.push_admission(0, &adm, params.varpi1, params.sigma2);
            let noma = noma_xl_sum_rate(&table);
            let sucre = sucre_xl_sum_rate(&[0], &ch, &params);
            prop_assert!(rel_err(noma, sucre) < 1e-12, "noma {} vs sucre {}", noma, sucre);
        }
    }

    // ---- accumulators ---------------------------------------------------

    #[test]
    fn single_round_finalize_reproduces_the_round() {
        let mut acc = RunAccumulator::new();
        acc.add_round(&RoundMetrics {
            attempting_count: 4,
            admitted_count: 1,
            sum_rate: 2.5,
        });
        let states = vec![
            UeState {
                attempts: 1,
                status: UeStatus::Admitted,
            },
            UeState {
                attempts: 1,
                status: UeStatus::Inactive,
            },
            UeState {
                attempts: 1,
                status: UeStatus::Inactive,
            },
            UeState {
                attempts: 1,
                status: UeStatus::Inactive,
            },
            UeState {
                attempts: 0,
                status: UeStatus::Inactive,
            },
        ];
        let run = acc.finalize(&states);
        assert!(rel_err(run.normalized_accepted, 0.25) < 1e-15);
        assert!(rel_err(run.mean_sum_rate, 2.5) < 1e-15);
        assert!(rel_err(run.avg_attempts, 1.0) < 1e-15);
        assert_eq!(run.failure_prob, 0.0);
        assert_eq!(run.counts.ever_contended, 4);
        assert_eq!(run.counts.pending, 3);
        assert!(run.counts.is_conserved());
    }

    #[test]
    fn attempts_average_over_contenders_only() {
        let acc = RunAccumulator::new();
        let states = vec![
            UeState {
                attempts: 2,
                status: UeStatus::Admitted,
            },
            UeState {
                attempts: 4,
                status: UeStatus::Failed,
            },
            UeState {
                attempts: 0,
                status: UeStatus::Inactive,
            },
        ];
        let run = acc.finalize(&states);
        assert!(
            rel_err(run.avg_attempts, 3.0) < 1e-15,
            "mean of 2 and 4 over two contenders"
        );
        assert!(rel_err(run.failure_prob, 0.5) < 1e-15);
    }

    #[test]
    fn empty_trial_reports_zeros() {
        let acc = RunAccumulator::new();
        let run = acc.finalize(&[]);
        assert_eq!(run.avg_attempts, 0.0);
        assert_eq!(run.failure_prob, 0.0);
        assert_eq!(run.normalized_accepted, 0.0);
        assert_eq!(run.mean_sum_rate, 0.0);
        assert_eq!(run.counts, TrialCounts::default());
    }

    #[test]
    fn idle_rounds_do_not_dilute_the_acceptance_ratio() {
        let mut acc = RunAccumulator::new();
        acc.add_round(&RoundMetrics {
            attempting_count: 0,
            admitted_count: 0,
            sum_rate: 0.0,
        });
        acc.add_round(&RoundMetrics {
            attempting_count: 2,
            admitted_count: 2,
            sum_rate: 1.0,
        });
        let run = acc.finalize(&[UeState {
            attempts: 1,
            status: UeStatus::Admitted,
        }]);
        assert!(rel_err(run.normalized_accepted, 1.0) < 1e-15);
        assert!(rel_err(run.mean_sum_rate, 1.0) < 1e-15);
        assert_eq!(acc.rounds_seen(), 2);
    }

    #[test]
    fn welford_matches_batch_recomputation() {
        let mut rng = substream(10, 0, Stream::AccessDraws, 0);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| rng.gen::<f64>() * 100.0 - 20.0)
            .collect();
        let mut w = Welford::new();
        for &x in &xs {
            w.add(x);
        }
        let n = xs.len() as f64;
        let batch_mean = xs.iter().sum::<f64>() / n;
        let batch_var = xs.iter().map(|x| (x - batch_mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(
            rel_err(w.mean(), batch_mean) < 1e-9,
            "{} vs {batch_mean}",
            w.mean()
        );
        assert!(
            rel_err(w.variance(), batch_var) < 1e-9,
            "{} vs {batch_var}",
            w.variance()
        );
    }

    #[test]
    fn welford_merge_equals_sequential_accumulation() {
        let mut rng = substream(10, 1, Stream::AccessDraws, 0);
        let xs: Vec<f64> = (0..3000).map(|_| rng.gen::<f64>() * 10.0).collect();
        let mut whole = Welford::new();
        for &x in &xs {
            whole.add(x);
        }
        for split in [1, 100, 1500, 2999] {
            let (a, b) = xs.split_at(split);
            let mut wa = Welford::new();
            a.iter().for_each(|&x| wa.add(x));
            let mut wb = Welford::new();
            b.iter().for_each(|&x| wb.add(x));
            wa.merge(&wb);
            assert_eq!(wa.count(), whole.count());
            assert!(rel_err(wa.mean(), whole.mean()) < 1e-12);
            assert!(rel_err(wa.variance(), whole.variance()) < 1e-9);
        }
    }

    #[test]
    fn welford_merge_is_associative_within_tolerance() {
        let mut rng = substream(10, 2, Stream::AccessDraws, 0);
        let chunks: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..500).map(|_| rng.gen::<f64>() * 5.0 - 1.0).collect())
            .collect();
        let ws: Vec<Welford> = chunks
            .iter()
            .map(|c| {
                let mut w = Welford::new();
                c.iter().for_each(|&x| w.add(x));
                w
            })
            .collect();
        let mut left = ws[0];
        left.merge(&ws[1]);
        left.merge(&ws[2]);
        let mut right_inner = ws[1];
        right_inner.merge(&ws[2]);
        let mut right = ws[0];
        right.merge(&right_inner);
        assert!(rel_err(left.mean(), right.mean()) < 1e-12);
        assert!(rel_err(left.variance(), right.variance()) < 1e-10);
    }

    #[test]
    fn ci_half_width_shrinks_with_sample_count() {
        let mut rng = substream(10, 3, Stream::AccessDraws, 0);
        let mut small = Welford::new();
        let mut large = Welford::new();
        for i in 0..4000 {
            let x = rng.gen::<f64>();
            if i < 1000 {
                small.add(x);
            }
            large.add(x);
        }
        let ratio = small.ci95_half_width() / large.ci95_half_width();
        assert!(
            (ratio - 2.0).abs() < 0.2,
            "4x samples should halve the CI, ratio {ratio}"
        );
    }

    #[test]
    fn campaign_merge_matches_sequential_order() {
        let mut rng = substream(10, 4, Stream::AccessDraws, 0);
        let runs: Vec<RunMetrics> = (0..64)
            .map(|_| RunMetrics {
                avg_attempts: 1.0 + rng.gen::<f64>() * 5.0,
                failure_prob: rng.gen::<f64>(),
                normalized_accepted: rng.gen::<f64>(),
                mean_sum_rate: rng.gen::<f64>() * 1e-9,
                counts: TrialCounts::default(),
            })
            .collect();
        let mut sequential = CampaignAccumulator::new();
        runs.iter().for_each(|r| sequential.add_trial(r));
        // Simulated 4-worker split merged in fixed chunk order.
        let mut merged = CampaignAccumulator::new();
        for chunk in runs.chunks(16) {
            let mut part = CampaignAccumulator::new();
            chunk.iter().for_each(|r| part.add_trial(r));
            merged.merge(&part);
        }
        let a = sequential.summary();
        let b = merged.summary();
        assert_eq!(a.trials, b.trials);
        assert!(rel_err(a.avg_attempts.mean, b.avg_attempts.mean) < 1e-12);
        assert!(rel_err(a.mean_sum_rate.mean, b.mean_sum_rate.mean) < 1e-12);
        assert!(
            rel_err(
                a.avg_attempts.ci95_half_width,
                b.avg_attempts.ci95_half_width
            ) < 1e-9
        );
    }

    proptest! {
        #[test]
        fn welford_mean_stays_inside_the_sample_range(
            xs in proptest::collection::vec(-1e6f64..1e6, 1..200)
        ) {
            let mut w = Welford::new();
            xs.iter().for_each(|&x| w.add(x));
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let slack = 1e-9 * (1.0 + hi.abs() + lo.abs());
            prop_assert!(w.mean() >= lo - slack && w.mean() <= hi + slack);
            prop_assert!(w.variance() >= 0.0);
        }
    }
}
