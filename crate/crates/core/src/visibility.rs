//! Visibility regions: which subarrays receive energy from which UE.
//!
//! Spatial non-stationarity over the extra-large array is modeled by a
//! Bernoulli mask: each (UE, subarray) pair is visible with probability
//! `p_b`, independently, conditioned on every UE seeing at least one
//! subarray (all-invisible rows are resampled). With a single subarray this
//! conditioning forces full visibility.

use rand::Rng;

use crate::error::CoreError;

/// Checks that a visibility probability is usable: `0 < p_b <= 1`.
///
/// `p_b = 0` is rejected because the conditioned distribution (at least one
/// visible subarray) does not exist.
pub fn validate_p_b(p_b: f64) -> Result<(), CoreError> {
    if !(p_b > 0.0 && p_b <= 1.0) {
        return Err(CoreError::config(format!(
            "visibility probability must satisfy 0 < p_b <= 1, got {p_b}"
        )));
    }
    Ok(())
}

/// Samples one UE's visibility row over `b_count` subarrays, resampling
/// until at least one entry is true.
pub fn sample_visibility_row(b_count: usize, p_b: f64, rng: &mut impl Rng, row: &mut Vec<bool>) {
    debug_assert!(p_b > 0.0 && p_b <= 1.0);
    debug_assert!(b_count > 0);
    loop {
        row.clear();
        let mut any = false;
        for _ in 0..b_count {
            let v = rng.gen_bool(p_b);
            any |= v;
            row.push(v);
        }
        if any {
            return;
        }
    }
}

/// Samples a `k_count x b_count` visibility matrix (row-major), every row
/// conditioned on being non-empty.
pub fn sample_visibility(
    k_count: usize,
    b_count: usize,
    p_b: f64,
    rng: &mut impl Rng,
) -> Result<Vec<bool>, CoreError> {
    validate_p_b(p_b)?;
    if b_count == 0 {
        return Err(CoreError::config("subarray count must be >= 1"));
    }
    let mut out = Vec::with_capacity(k_count * b_count);
    let mut row = Vec::with_capacity(b_count);
    for _ in 0..k_count {
        sample_visibility_row(b_count, p_b, rng, &mut row);
        out.extend_from_slice(&row);
    }
    Ok(out)
}
