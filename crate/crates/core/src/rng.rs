//! Deterministic random-number substreams.
//!
//! Every stochastic quantity in a trial is drawn from its own named stream
//! derived from `(master_seed, trial_index, purpose, index)`. Streams are
//! created on demand and never shared, which gives two properties the engine
//! relies on:
//!
//! * adding or removing a consumer (e.g. materializing the channel row of a
//!   UE that happens to contend) never perturbs any other stream;
//! * results are a pure function of `(master_seed, trial_index)`, so trials
//!   can be scheduled on any number of workers in any order.
//!
//! Keys are expanded with SplitMix64 into a full 256-bit ChaCha seed rather
//! than relying on a particular `seed_from_u64` construction.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tag for a substream. Each random consumer gets its own tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// UE position rejection sampling; indexed by UE id.
    Placement,
    /// Per-element shadow fading; indexed by `ue * b_count + subarray`.
    Shadowing,
    /// Visibility-region Bernoulli rows; indexed by UE id.
    Visibility,
    /// Pilot choice in step I; indexed by slot.
    PilotChoice,
    /// First-attempt and backoff access draws; indexed by slot.
    AccessDraws,
    /// Re-entry draws after a failed attempt; indexed by slot.
    RetryDraws,
    /// Measurement noise for the noisy sum-gain estimate; indexed by slot.
    AlphaNoise,
    /// Small-scale channel vectors; indexed by `ue * b_count + subarray`.
    SmallScale,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Placement => 1,
            Stream::Shadowing => 2,
            Stream::Visibility => 3,
            Stream::PilotChoice => 4,
            Stream::AccessDraws => 5,
            Stream::RetryDraws => 6,
            Stream::AlphaNoise => 7,
            Stream::SmallScale => 8,
        }
    }
}

/// SplitMix64 output function; a well-mixed 64 -> 64 bit permutation.
fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    *state = z ^ (z >> 31);
}

/// Derives the substream identified by `(master_seed, trial, purpose, index)`.
///
/// The four coordinates are folded into a SplitMix64 chain whose successive
/// outputs fill the 256-bit ChaCha key, so distinct coordinates give
/// independent streams for all practical purposes.
pub fn substream(master_seed: u64, trial: u64, purpose: Stream, index: u64) -> ChaCha8Rng {
    let mut state = master_seed;
    splitmix64(&mut state);
    state ^= trial;
    splitmix64(&mut state);
    state ^= purpose.tag();
    splitmix64(&mut state);
    state ^= index;
    splitmix64(&mut state);

    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        splitmix64(&mut state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
