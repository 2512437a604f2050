//! Large-scale fading: distance-dependent path loss with log-normal
//! shadowing, sampled independently per (UE, antenna element).
//!
//! The gain at distance `d` with shadow realization `phi` (in dB) is
//!
//! ```text
//! beta = 10^( -kappa * log10(d) + (g_db + phi) / 10 )
//! ```
//!
//! i.e. a power-law loss `d^-kappa` around a reference gain `g_db` dB at 1 m,
//! with `phi ~ N(0, sigma_sf_db^2)`. Subarray-level processing uses the
//! arithmetic mean of the per-element gains over the subarray.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::CoreError;

const LN_10: f64 = core::f64::consts::LN_10;

/// Path-loss and shadowing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    /// Reference gain at 1 m, in dB (negative in practice).
    pub g_db: f64,
    /// Path-loss exponent.
    pub kappa: f64,
    /// Shadow-fading standard deviation in dB.
    pub sigma_sf_db: f64,
}

impl FadingModel {
    /// Validates the parameter ranges: finite `g_db`, positive finite
    /// `kappa`, non-negative finite `sigma_sf_db`.
    pub fn validate(&self) -> Result<(), CoreError> {
        if !self.g_db.is_finite() {
            return Err(CoreError::config(format!(
                "reference gain must be finite, got {}",
                self.g_db
            )));
        }
        if self.kappa <= 0.0 || !self.kappa.is_finite() {
            return Err(CoreError::config(format!(
                "path-loss exponent must be positive and finite, got {}",
                self.kappa
            )));
        }
        if self.sigma_sf_db < 0.0 || !self.sigma_sf_db.is_finite() {
            return Err(CoreError::config(format!(
                "shadow std must be non-negative and finite, got {}",
                self.sigma_sf_db
            )));
        }
        Ok(())
    }

    /// Draws one shadow-fading realization in dB.
    pub fn sample_shadow_db(&self, rng: &mut impl Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.sigma_sf_db * z
    }
}

/// Linear power gain at `distance` meters with a fixed shadow term in dB.
///
/// `distance` must be strictly positive; the model diverges at the array.
pub fn large_scale_gain(
    distance: f64,
    model: &FadingModel,
    shadow_db: f64,
) -> Result<f64, CoreError> {
    if distance <= 0.0 || !distance.is_finite() {
        return Err(CoreError::domain(format!(
            "path-loss distance must be strictly positive and finite, got {distance}"
        )));
    }
    let exponent = -model.kappa * distance.log10() + (model.g_db + shadow_db) / 10.0;
    Ok((LN_10 * exponent).exp())
}

/// Same gain computed from a squared distance; the hot-path form used by the
/// channel builder (`log10(d) = ln(d^2) / (2 ln 10)` avoids the square root).
#[inline]
pub fn gain_from_sq_distance(dist_sq: f64, model: &FadingModel, shadow_db: f64) -> f64 {
    debug_assert!(dist_sq > 0.0);
    let exponent = -model.kappa * 0.5 * dist_sq.ln() + LN_10 / 10.0 * (model.g_db + shadow_db);
    exponent.exp()
}

/// Arithmetic mean of per-element gains; the subarray-level gain.
pub fn per_sa_average_beta(gains: &[f64]) -> Result<f64, CoreError> {
    if gains.is_empty() {
        return Err(CoreError::domain("cannot average an empty gain list"));
    }
    Ok(gains.iter().sum::<f64>() / gains.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn reference_model() -> FadingModel {
        FadingModel {
            g_db: -34.53,
            kappa: 3.8,
            sigma_sf_db: 10.0,
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn gain_at_one_meter_equals_reference_gain() {
        // log10(1) = 0, so the exponent is g/10 = -3.453.
        let got = large_scale_gain(1.0, &reference_model(), 0.0).unwrap();
        let want = 10f64.powf(-3.453);
        assert!(rel_err(got, want) < 1e-12, "got {got}, want {want}");
        // Magnitude sanity: about 3.524e-4.
        assert!((got - 3.524e-4).abs() < 1e-6);
    }

    #[test]
    fn gain_at_hundred_meters() {
        // Exponent -3.8 * 2 - 3.453 = -11.053.
        let got = large_scale_gain(100.0, &reference_model(), 0.0).unwrap();
        let want = 10f64.powf(-11.053);
        assert!(rel_err(got, want) < 1e-12, "got {got}, want {want}");
        assert!((got - 8.85e-12).abs() < 1e-14);
    }

    #[test]
    fn ten_db_shadow_scales_gain_by_ten() {
        let m = reference_model();
        let base = large_scale_gain(37.5, &m, 0.0).unwrap();
        let up = large_scale_gain(37.5, &m, 10.0).unwrap();
        assert!(rel_err(up / base, 10.0) < 1e-12, "ratio {}", up / base);
    }

    #[test]
    fn rejects_non_positive_distance() {
        let m = reference_model();
        assert!(matches!(
            large_scale_gain(0.0, &m, 0.0),
            Err(CoreError::Domain(_))
        ));
        assert!(matches!(
            large_scale_gain(-3.0, &m, 0.0),
            Err(CoreError::Domain(_))
        ));
        assert!(large_scale_gain(f64::NAN, &m, 0.0).is_err());
    }

    #[test]
    fn squared_distance_path_agrees_with_direct_formula() {
        let m = reference_model();
        let mut rng = substream(3, 0, Stream::Shadowing, 0);
        for _ in 0..2000 {
            let d = 0.5 + rng.gen::<f64>() * 500.0;
            let shadow = (rng.gen::<f64>() - 0.5) * 40.0;
            let direct = large_scale_gain(d, &m, shadow).unwrap();
            let fast = gain_from_sq_distance(d * d, &m, shadow);
            assert!(rel_err(fast, direct) < 1e-12, "d = {d}: {fast} vs {direct}");
        }
    }

    #[test]
    fn per_sa_average_small_cases() {
        assert_eq!(per_sa_average_beta(&[0.75]).unwrap(), 0.75);
        assert!(rel_err(per_sa_average_beta(&[2.0, 4.0, 6.0]).unwrap(), 4.0) < 1e-15);
        assert!(matches!(
            per_sa_average_beta(&[]),
            Err(CoreError::Domain(_))
        ));
    }

    #[test]
    fn per_sa_average_matches_extended_precision_resum() {
        // 50 realistic gains; compare against a compensated (Kahan) sum.
        let m = reference_model();
        let mut rng = substream(4, 0, Stream::Shadowing, 1);
        let gains: Vec<f64> = (0..50)
            .map(|i| {
                let d = 80.0 + i as f64 * 0.13;
                let shadow = m.sample_shadow_db(&mut rng);
                large_scale_gain(d, &m, shadow).unwrap()
            })
            .collect();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for &g in &gains {
            let y = g - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        let want = sum / gains.len() as f64;
        let got = per_sa_average_beta(&gains).unwrap();
        assert!(rel_err(got, want) < 1e-13, "got {got}, want {want}");
    }

    #[test]
    fn shadow_std_in_db_domain_matches_sigma() {
        // Strip the deterministic part of the gain in the dB domain; what is
        // left is the shadow draw, whose sample std must be close to 10 dB.
        let m = reference_model();
        let d = 140.0;
        let mut rng = substream(6, 0, Stream::Shadowing, 2);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let shadow = m.sample_shadow_db(&mut rng);
            let beta = large_scale_gain(d, &m, shadow).unwrap();
            let db = 10.0 * beta.log10() + m.kappa * 10.0 * d.log10() - m.g_db;
            sum += db;
            sum_sq += db * db;
        }
        let mean = sum / n as f64;
        let std = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!(
            (std - m.sigma_sf_db).abs() / m.sigma_sf_db < 0.05,
            "dB-domain sample std {std} deviates more than 5% from {}",
            m.sigma_sf_db
        );
    }

    proptest! {
        #[test]
        fn gain_strictly_decreases_with_distance(
            d1 in 0.1f64..1e4,
            factor in 1.001f64..100.0,
            shadow in -30.0f64..30.0,
        ) {
            let m = reference_model();
            let near = large_scale_gain(d1, &m, shadow).unwrap();
            let far = large_scale_gain(d1 * factor, &m, shadow).unwrap();
            prop_assert!(far < near, "gain must strictly decrease: {near} -> {far}");
        }

        #[test]
        fn gain_is_deterministic_without_shadowing(d in 0.1f64..1e4) {
            let m = reference_model();
            let a = large_scale_gain(d, &m, 0.0).unwrap();
            let b = large_scale_gain(d, &m, 0.0).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0);
        }

        #[test]
        fn average_lies_between_min_and_max(
            gains in proptest::collection::vec(1e-14f64..1e-3, 1..200)
        ) {
            let avg = per_sa_average_beta(&gains).unwrap();
            let lo = gains.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = gains.iter().cloned().fold(0.0f64, f64::max);
            prop_assert!(avg >= lo * (1.0 - 1e-12) && avg <= hi * (1.0 + 1e-12));
        }
    }
}
