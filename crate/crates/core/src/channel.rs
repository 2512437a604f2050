//! Assembled per-trial channel state: UE positions, visibility regions and
//! per-subarray large-scale gains.
//!
//! Each UE's state is a pure function of `(master_seed, trial, ue)` through
//! named substreams, so rows can be materialized lazily — the engine only
//! pays for UEs that actually contend — without any effect on the values
//! other UEs would get. Per-subarray gains average per-element path loss
//! with shadowing drawn independently per (UE, element); gains of subarrays
//! outside a UE's visibility region are never read by the protocol and are
//! skipped in lazy mode.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::CoreError;
use crate::fading::{gain_from_sq_distance, FadingModel};
use crate::geometry::{place_one, ArrayGeometry, CellLayout, UePosition};
use crate::rng::{substream, Stream};
use crate::visibility::{sample_visibility_row, validate_p_b};

/// Channel state of one trial for up to `k_count` UEs.
///
/// Row-major `k_count x b_count` matrices; a row is valid only after it has
/// been materialized (all rows are materialized in a fully realized channel).
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    k_count: usize,
    b_count: usize,
    m_b: usize,
    beta: Vec<f64>,
    visibility: Vec<bool>,
    sum_visible_beta: Vec<f64>,
    materialized: Vec<bool>,
}

impl ChannelRealization {
    /// Creates an empty channel with no materialized rows.
    pub fn empty(k_count: usize, b_count: usize, m_b: usize) -> Self {
        ChannelRealization {
            k_count,
            b_count,
            m_b,
            beta: vec![0.0; k_count * b_count],
            visibility: vec![false; k_count * b_count],
            sum_visible_beta: vec![0.0; k_count],
            materialized: vec![false; k_count],
        }
    }

    /// Number of UEs this channel can hold.
    pub fn k_count(&self) -> usize {
        self.k_count
    }

    /// Number of subarrays.
    pub fn b_count(&self) -> usize {
        self.b_count
    }

    /// Antennas per subarray (drives the bias-term normalization).
    pub fn m_b(&self) -> usize {
        self.m_b
    }

    /// True once UE `k`'s row has been sampled.
    pub fn is_materialized(&self, k: usize) -> bool {
        self.materialized[k]
    }

    /// Per-subarray gain of UE `k` at subarray `sa`.
    pub fn beta(&self, k: usize, sa: usize) -> f64 {
        debug_assert!(self.materialized[k], "row {k} read before materialization");
        self.beta[k * self.b_count + sa]
    }

    /// Whether subarray `sa` lies in UE `k`'s visibility region.
    pub fn visible(&self, k: usize, sa: usize) -> bool {
        debug_assert!(self.materialized[k], "row {k} read before materialization");
        self.visibility[k * self.b_count + sa]
    }

    /// Sum of UE `k`'s gains over its visible subarrays.
    pub fn sum_visible_beta(&self, k: usize) -> f64 {
        debug_assert!(self.materialized[k], "row {k} read before materialization");
        self.sum_visible_beta[k]
    }

    /// Iterator over the visible subarray indices of UE `k`.
    pub fn visible_sas(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        debug_assert!(self.materialized[k], "row {k} read before materialization");
        let row = &self.visibility[k * self.b_count..(k + 1) * self.b_count];
        row.iter()
            .enumerate()
            .filter_map(|(sa, &v)| v.then_some(sa))
    }

    fn install_row(&mut self, k: usize, visibility: &[bool], beta: &[f64]) {
        debug_assert_eq!(visibility.len(), self.b_count);
        debug_assert_eq!(beta.len(), self.b_count);
        let base = k * self.b_count;
        self.visibility[base..base + self.b_count].copy_from_slice(visibility);
        self.beta[base..base + self.b_count].copy_from_slice(beta);
        self.sum_visible_beta[k] = visibility
            .iter()
            .zip(beta)
            .filter_map(|(&v, &b)| v.then_some(b))
            .sum();
        self.materialized[k] = true;
    }

    /// Installs a hand-built row; test scaffolding for protocol-level code
    /// that needs a channel with prescribed gains.
    pub fn set_row(&mut self, k: usize, visibility: Vec<bool>, beta: Vec<f64>) {
        assert_eq!(
            visibility.len(),
            self.b_count,
            "visibility row length mismatch"
        );
        assert_eq!(beta.len(), self.b_count, "beta row length mismatch");
        assert!(
            visibility.iter().any(|&v| v),
            "visibility row must be non-empty"
        );
        self.install_row(k, &visibility, &beta);
    }
}

/// Samples channel rows for one trial; holds everything needed to build the
/// row of any UE on demand.
pub struct RowSampler<'a> {
    geometry: &'a ArrayGeometry,
    cell: &'a CellLayout,
    fading: &'a FadingModel,
    p_b: f64,
    far_field_feasible: bool,
    master_seed: u64,
    trial: u64,
    /// Element z offsets squared, reused across all rows.
    dz_sq: Vec<f64>,
}

impl<'a> RowSampler<'a> {
    /// Validates parameters and prepares a sampler for one trial.
    pub fn new(
        geometry: &'a ArrayGeometry,
        cell: &'a CellLayout,
        fading: &'a FadingModel,
        p_b: f64,
        master_seed: u64,
        trial: u64,
    ) -> Result<Self, CoreError> {
        validate_p_b(p_b)?;
        fading.validate()?;
        let dz_sq = (0..geometry.m_z())
            .map(|iz| {
                let dz = iz as f64 * geometry.d_m();
                dz * dz
            })
            .collect();
        Ok(RowSampler {
            geometry,
            cell,
            fading,
            p_b,
            far_field_feasible: cell.far_field_feasible(geometry),
            master_seed,
            trial,
            dz_sq,
        })
    }

    /// True when placement had to drop the far-field constraint.
    pub fn far_field_violated(&self) -> bool {
        !self.far_field_feasible
    }

    /// Samples UE `k`'s position from its placement substream.
    pub fn sample_position(&self, k: usize) -> Result<UePosition, CoreError> {
        let mut rng = substream(self.master_seed, self.trial, Stream::Placement, k as u64);
        place_one(self.geometry, self.cell, self.far_field_feasible, &mut rng)
    }

    /// Samples UE `k`'s visibility row from its visibility substream.
    pub fn sample_visibility_row(&self, k: usize) -> Vec<bool> {
        let mut rng = substream(self.master_seed, self.trial, Stream::Visibility, k as u64);
        let mut row = Vec::with_capacity(self.geometry.b());
        sample_visibility_row(self.geometry.b(), self.p_b, &mut rng, &mut row);
        row
    }

    /// Per-subarray gain of a UE at `pos` for subarray `sa`: the mean of
    /// per-element gains, shadowing drawn from the (UE, subarray) substream.
    pub fn sample_sa_beta(&self, k: usize, pos: UePosition, sa: usize) -> f64 {
        let stream_index = (k * self.geometry.b() + sa) as u64;
        let mut rng = substream(
            self.master_seed,
            self.trial,
            Stream::Shadowing,
            stream_index,
        );
        let d_m = self.geometry.d_m();
        let x_sq = pos.x * pos.x;
        let cols = self.geometry.cols_per_sa();
        let first_col = sa * cols;
        let mut sum = 0.0;
        for iy in first_col..first_col + cols {
            let dy = pos.y - iy as f64 * d_m;
            let base = x_sq + dy * dy;
            for &dz_sq in &self.dz_sq {
                // UEs sit at z = 0, so the element z offset is the distance.
                let shadow = self.fading.sample_shadow_db(&mut rng);
                sum += gain_from_sq_distance(base + dz_sq, self.fading, shadow);
            }
        }
        sum / self.geometry.m_b() as f64
    }

    /// Materializes UE `k`'s row into `channel`.
    ///
    /// `visible_only` skips gains of invisible subarrays (they are never read
    /// by the protocol); per-(UE, subarray) substreams guarantee the computed
    /// entries are identical either way.
    pub fn materialize_row(
        &self,
        channel: &mut ChannelRealization,
        k: usize,
        visible_only: bool,
    ) -> Result<(), CoreError> {
        if channel.is_materialized(k) {
            return Ok(());
        }
        let pos = self.sample_position(k)?;
        let visibility = self.sample_visibility_row(k);
        let beta: Vec<f64> = (0..self.geometry.b())
            .map(|sa| {
                if visible_only && !visibility[sa] {
                    0.0
                } else {
                    self.sample_sa_beta(k, pos, sa)
                }
            })
            .collect();
        channel.install_row(k, &visibility, &beta);
        Ok(())
    }
}

/// Fully realizes the channel of one trial: positions, visibility and gains
/// for every UE and every subarray.
pub fn realize_channel(
    k_count: usize,
    geometry: &ArrayGeometry,
    cell: &CellLayout,
    fading: &FadingModel,
    p_b: f64,
    master_seed: u64,
    trial: u64,
) -> Result<(ChannelRealization, Vec<UePosition>, bool), CoreError> {
    let sampler = RowSampler::new(geometry, cell, fading, p_b, master_seed, trial)?;
    let mut channel = ChannelRealization::empty(k_count, geometry.b(), geometry.m_b());
    let mut positions = Vec::with_capacity(k_count);
    for k in 0..k_count {
        sampler.materialize_row(&mut channel, k, false)?;
        positions.push(sampler.sample_position(k)?);
    }
    Ok((channel, positions, sampler.far_field_violated()))
}

/// Samples a small-scale channel vector `h ~ CN(0, beta I)` of length `m_b`.
///
/// The default pipeline works on large-scale statistics only; this sampler
/// exists for extensions that need instantaneous channels.
pub fn sample_small_scale(
    beta: f64,
    m_b: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Complex64>, CoreError> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(CoreError::domain(format!(
            "small-scale sampling needs a positive finite gain, got {beta}"
        )));
    }
    let scale = (beta / 2.0).sqrt();
    Ok((0..m_b)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(scale * re, scale * im)
        })
        .collect())
}
