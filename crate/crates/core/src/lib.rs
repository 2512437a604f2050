//! Core library for simulating grant-based random access in crowded
//! extra-large MIMO (XL-MIMO) cells.
//!
//! The physical layer is an extra-large uniform rectangular array split into
//! subarrays. Each user equipment (UE) sees only a random subset of subarrays
//! (its visibility region), and contends for uplink access by picking one of a
//! small pool of random-access pilots. Two collision-resolution protocols are
//! provided:
//!
//! * `sucre-xl` — a strongest-user baseline: a pilot is granted only when the
//!   repeating contenders are pairwise invisible to each other (at most one
//!   repeater per subarray).
//! * `noma-xl` — power-domain NOMA: up to `max_cluster` repeaters per subarray
//!   are admitted together and separated by successive interference
//!   cancellation (SIC) at each subarray.
//!
//! The crate is organized as: array geometry and UE placement ([`geometry`]),
//! large-scale fading ([`fading`]), visibility regions ([`visibility`]), the
//! assembled per-trial channel ([`channel`]), the contention protocol steps
//! ([`protocol`]), per-round and per-run metrics ([`metrics`]), the Monte
//! Carlo engine ([`engine`]) and the bias-factor sweep ([`optimizer`]).
//!
//! Every random quantity is drawn from a named, independently seeded
//! substream derived from `(master_seed, trial_index)`, so results are
//! bit-reproducible and independent of worker count.

pub mod channel;
pub mod engine;
pub mod error;
pub mod fading;
pub mod geometry;
pub mod metrics;
pub mod optimizer;
pub mod protocol;
pub mod rng;
pub mod visibility;

pub use error::CoreError;
