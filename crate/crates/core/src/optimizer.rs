//! Exhaustive search for the sum-rate-maximizing decision-bias scale.
//!
//! The decision rule's bias term is proportional to a dimensionless scale
//! `delta`; its sign and magnitude trade admission aggressiveness against
//! collision risk easily enough that the best value shifts with load. The
//! optimizer evaluates the average sum rate on an evenly spaced grid of
//! `delta` values and returns the argmax.
//!
//! All grid points are evaluated under common random numbers: each trial
//! draws one channel realization (positions, shadowing, visibility) and
//! replays the contention dynamics once per grid value on it, so the
//! comparison across `delta` is paired and the argmax is stable at modest
//! trial counts.

use rayon::prelude::*;

use crate::engine::{run_trial_over_deltas, Scenario};
use crate::error::CoreError;
use crate::metrics::{CampaignAccumulator, RunMetrics};

/// Conventional fixed bias scale used when no sweep is run.
pub fn fixed_delta_baseline() -> f64 {
    -1.0
}

/// Evenly spaced search grid for the bias scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    /// Monte Carlo trials evaluated per grid point.
    pub trials_per_point: usize,
}

impl DeltaGrid {
    /// The default search window.
    pub fn default_grid(trials_per_point: usize) -> Self {
        DeltaGrid {
            lo: -2.0,
            hi: 2.0,
            step: 0.1,
            trials_per_point,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.lo.is_finite() || !self.hi.is_finite() || !self.step.is_finite() {
            return Err(CoreError::config("grid bounds and step must be finite"));
        }
        if self.lo > self.hi {
            return Err(CoreError::config(format!(
                "grid lower bound {} exceeds upper bound {}",
                self.lo, self.hi
            )));
        }
        if self.step <= 0.0 {
            return Err(CoreError::config("grid step must be positive"));
        }
        if self.trials_per_point == 0 {
            return Err(CoreError::config("trials_per_point must be >= 1"));
        }
        Ok(())
    }

    /// Grid points `lo, lo + step, ...` up to and including `hi`. Values are
    /// snapped to 9 decimal places so that representative points like `0.0`
    /// come out exact instead of accumulating float error.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| snap(self.lo + i as f64 * self.step))
            .collect()
    }
}

fn snap(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPoint {
    pub delta: f64,
    /// Across-trial mean of the per-round average sum rate.
    pub mean_sum_rate: f64,
    pub ci95_half_width: f64,
}

/// Output of a sweep: every evaluated point plus the winning scale.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSweepResult {
    pub points: Vec<DeltaPoint>,
    pub delta_star: f64,
    pub trials_per_point: usize,
}

/// Argmax with a deterministic tie rule: highest mean wins; exact ties go to
/// the smaller magnitude, then to the smaller value. Returns `None` on an
/// empty slice.
pub fn argmax_delta(points: &[DeltaPoint]) -> Option<f64> {
    let mut best: Option<&DeltaPoint> = None;
    for p in points {
        let replace = match best {
            None => true,
            Some(b) => {
                p.mean_sum_rate > b.mean_sum_rate
                    || (p.mean_sum_rate == b.mean_sum_rate
                        && (p.delta.abs() < b.delta.abs()
                            || (p.delta.abs() == b.delta.abs() && p.delta < b.delta)))
            }
        };
        if replace {
            best = Some(p);
        }
    }
    best.map(|p| p.delta)
}

/// Exhaustively evaluates a deterministic objective on the given points and
/// returns the argmax under the same tie rule as the Monte Carlo sweep.
pub fn sweep_objective(deltas: &[f64], mut objective: impl FnMut(f64) -> f64) -> Option<f64> {
    let points: Vec<DeltaPoint> = deltas
        .iter()
        .map(|&d| DeltaPoint {
            delta: d,
            mean_sum_rate: objective(d),
            ci95_half_width: 0.0,
        })
        .collect();
    argmax_delta(&points)
}

/// Sweeps the bias scale over `grid` for the scenario's protocol and
/// population, returning per-point statistics and the argmax.
///
/// The scenario's own `delta` and `trials` fields are ignored; the grid
/// supplies both. Results are deterministic in `(scenario, grid)` and
/// independent of `workers`.
pub fn sweep_delta(
    scenario: &Scenario,
    grid: &DeltaGrid,
    workers: Option<usize>,
) -> Result<DeltaSweepResult, CoreError> {
    grid.validate()?;
    let mut scenario = scenario.clone();
    scenario.trials = grid.trials_per_point;
    scenario.validate()?;
    let deltas = grid.values();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(CoreError::config("worker count must be >= 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| CoreError::config(format!("failed to build worker pool: {e}")))?;

    // per_trial[t][d]: metrics for trial t at grid value d, all grid values
    // sharing trial t's channel realization.
    let per_trial: Result<Vec<Vec<RunMetrics>>, CoreError> = pool.install(|| {
        (0..grid.trials_per_point as u64)
            .into_par_iter()
            .map(|trial| run_trial_over_deltas(&scenario, trial, &deltas))
            .collect()
    });
    let per_trial = per_trial?;

    let points: Vec<DeltaPoint> = deltas
        .iter()
        .enumerate()
        .map(|(d, &delta)| {
            let mut acc = CampaignAccumulator::new();
            for trial_metrics in &per_trial {
                acc.add_trial(&trial_metrics[d]);
            }
            let stats = acc.summary();
            DeltaPoint {
                delta,
                mean_sum_rate: stats.mean_sum_rate.mean,
                ci95_half_width: stats.mean_sum_rate.ci95_half_width,
            }
        })
        .collect();

    let delta_star =
        argmax_delta(&points).ok_or_else(|| CoreError::domain("delta grid produced no points"))?;
    Ok(DeltaSweepResult {
        points,
        delta_star,
        trials_per_point: grid.trials_per_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fading::FadingModel;
    use crate::geometry::{ArrayGeometry, StandoffPolicy};
    use crate::protocol::{AlphaMode, ProtocolKind, ProtocolParams};

    fn sweep_scenario(k: usize) -> Scenario {
        Scenario {
            geometry: ArrayGeometry::new(100, 1, 0.1, 2, 0.125).unwrap(),
            cell_side: 100.0,
            standoff: StandoffPolicy::Auto,
            fading: FadingModel {
                g_db: -34.53,
                kappa: 3.8,
                sigma_sf_db: 10.0,
            },
            p_b: 0.5,
            k_inactive: k,
            protocol: ProtocolParams {
                kind: ProtocolKind::NomaXl,
                tau_ra: 5,
                rho: 1.0,
                sigma2: 1.0,
                p_a: 0.15,
                p_na: 0.5,
                max_attempts: 10,
                delta: -1.0,
                varpi1: 0.1,
                max_cluster: 3,
                alpha_mode: AlphaMode::Genie,
            },
            horizon_slots: 20,
            trials: 0, // overridden by the grid
            master_seed: 11,
        }
    }

    #[test]
    fn grid_values_land_on_exact_decimals() {
        let grid = DeltaGrid::default_grid(1);
        let values = grid.values();
        assert_eq!(values.len(), 41);
        assert_eq!(values[0], -2.0);
        assert_eq!(
            values[20].to_bits(),
            0.0_f64.to_bits(),
            "midpoint must be exactly zero"
        );
        assert_eq!(values[40], 2.0);
        let fine = DeltaGrid {
            lo: 0.0,
            hi: 0.3,
            step: 0.1,
            trials_per_point: 1,
        };
        assert_eq!(fine.values(), vec![0.0, 0.1, 0.2, 0.3]);
    }

    #[test]
    fn degenerate_grid_is_a_single_point() {
        let grid = DeltaGrid {
            lo: -0.7,
            hi: -0.7,
            step: 0.1,
            trials_per_point: 1,
        };
        assert_eq!(grid.values(), vec![-0.7]);
    }

    #[test]
    fn grid_validation_rejects_bad_bounds() {
        let mut g = DeltaGrid::default_grid(10);
        g.step = 0.0;
        assert!(g.validate().is_err());
        let mut g = DeltaGrid::default_grid(10);
        g.lo = 1.0;
        g.hi = -1.0;
        assert!(g.validate().is_err());
        let g = DeltaGrid::default_grid(0);
        assert!(g.validate().is_err());
        let mut g = DeltaGrid::default_grid(5);
        g.hi = f64::INFINITY;
        assert!(g.validate().is_err());
    }

    #[test]
    fn stub_objective_argmax_is_recovered() {
        let grid = DeltaGrid {
            lo: -1.0,
            hi: 1.0,
            step: 0.1,
            trials_per_point: 1,
        };
        let star = sweep_objective(&grid.values(), |d| -(d - 0.4) * (d - 0.4)).unwrap();
        assert!(
            (star - 0.4).abs() < 1e-12,
            "concave peak must be found, got {star}"
        );
    }

    #[test]
    fn ties_prefer_small_magnitude_then_small_value() {
        let grid = DeltaGrid {
            lo: -2.0,
            hi: 2.0,
            step: 0.5,
            trials_per_point: 1,
        };
        let star = sweep_objective(&grid.values(), |_| 1.0).unwrap();
        assert_eq!(
            star, 0.0,
            "flat objective resolves to the least-biased rule"
        );
        let star = sweep_objective(&[0.5, 1.0, 1.5], |_| 0.0).unwrap();
        assert_eq!(star, 0.5);
        let star = sweep_objective(&[-0.5, 0.5], |_| 0.0).unwrap();
        assert_eq!(star, -0.5, "equal magnitudes resolve to the smaller value");
    }

    #[test]
    fn empty_grid_has_no_argmax() {
        assert_eq!(argmax_delta(&[]), None);
        assert_eq!(sweep_objective(&[], |d| d), None);
    }

    #[test]
    fn sweep_is_deterministic_and_worker_independent() {
        let scenario = sweep_scenario(60);
        let grid = DeltaGrid {
            lo: -1.0,
            hi: 1.0,
            step: 0.5,
            trials_per_point: 6,
        };
        let a = sweep_delta(&scenario, &grid, Some(1)).unwrap();
        let b = sweep_delta(&scenario, &grid, Some(8)).unwrap();
        assert_eq!(a, b, "sweep output must not depend on worker count");
        let c = sweep_delta(&scenario, &grid, Some(1)).unwrap();
        assert_eq!(a, c, "sweep must replay bit-identically");
        assert_eq!(a.points.len(), 5);
        assert!(grid.values().contains(&a.delta_star));
        for p in &a.points {
            assert!(p.ci95_half_width >= 0.0);
            assert!(p.mean_sum_rate.is_finite());
        }
    }

    #[test]
    fn sweep_points_match_independent_campaigns() {
        use crate::engine::run_campaign;
        let scenario = sweep_scenario(40);
        let grid = DeltaGrid {
            lo: -1.0,
            hi: 0.0,
            step: 1.0,
            trials_per_point: 5,
        };
        let sweep = sweep_delta(&scenario, &grid, Some(2)).unwrap();
        for p in &sweep.points {
            let mut indep = scenario.clone();
            indep.protocol.delta = p.delta;
            indep.trials = grid.trials_per_point;
            let campaign = run_campaign(&indep, Some(2)).unwrap();
            assert_eq!(
                p.mean_sum_rate.to_bits(),
                campaign.stats.mean_sum_rate.mean.to_bits(),
                "shared-channel sweep must agree with an independent campaign at delta {}",
                p.delta
            );
        }
    }

    #[test]
    fn confidence_interval_shrinks_like_root_n() {
        let scenario = sweep_scenario(60);
        let grid = |n| DeltaGrid {
            lo: 0.0,
            hi: 0.0,
            step: 0.1,
            trials_per_point: n,
        };
        let narrow = sweep_delta(&scenario, &grid(200), Some(2)).unwrap();
        let wide = sweep_delta(&scenario, &grid(800), Some(2)).unwrap();
        let ratio = narrow.points[0].ci95_half_width / wide.points[0].ci95_half_width;
        assert!(
            (1.6..=2.4).contains(&ratio),
            "4x the trials should halve the interval (within 20%), got ratio {ratio}"
        );
    }

    #[test]
    fn delta_star_is_stable_across_disjoint_seed_sets() {
        // Two sweeps that share nothing but the scenario shape must land on
        // the same (or an adjacent) grid point.
        let mut scenario = sweep_scenario(200);
        scenario.geometry = ArrayGeometry::new(50, 5, 0.1, 5, 0.125).unwrap();
        let grid = DeltaGrid {
            lo: -2.0,
            hi: 2.0,
            step: 0.5,
            trials_per_point: 200,
        };
        scenario.master_seed = 1001;
        let first = sweep_delta(&scenario, &grid, Some(2)).unwrap();
        scenario.master_seed = 2002;
        let second = sweep_delta(&scenario, &grid, Some(2)).unwrap();
        assert!(
            (first.delta_star - second.delta_star).abs() <= grid.step + 1e-9,
            "argmax moved more than one grid step between seed sets: {} vs {}",
            first.delta_star,
            second.delta_star
        );
    }

    #[test]
    fn reevaluating_delta_star_with_fresh_seeds_agrees() {
        use crate::engine::run_campaign;
        let scenario = sweep_scenario(80);
        let grid = DeltaGrid {
            lo: -1.0,
            hi: 1.0,
            step: 0.5,
            trials_per_point: 60,
        };
        let sweep = sweep_delta(&scenario, &grid, Some(2)).unwrap();
        let at_star = sweep
            .points
            .iter()
            .find(|p| p.delta == sweep.delta_star)
            .expect("argmax is a grid point");
        let mut fresh = scenario.clone();
        fresh.master_seed = scenario.master_seed.wrapping_add(7777);
        fresh.protocol.delta = sweep.delta_star;
        fresh.trials = grid.trials_per_point;
        let reeval = run_campaign(&fresh, Some(2)).unwrap();
        let gap = (reeval.stats.mean_sum_rate.mean - at_star.mean_sum_rate).abs();
        let slack = 2.0 * (at_star.ci95_half_width + reeval.stats.mean_sum_rate.ci95_half_width);
        assert!(
            gap <= slack,
            "independent re-evaluation at delta* drifted: gap {gap}, allowed {slack}"
        );
    }

    #[test]
    fn baseline_bias_scale_is_fixed() {
        assert_eq!(fixed_delta_baseline(), -1.0);
    }
}
