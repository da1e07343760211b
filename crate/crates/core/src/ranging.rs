//! WiFi RSS to distance conversion, d = alpha * exp(rss * beta), and
//! least-squares fitting of the per-AP (alpha, beta) constants from
//! calibration pairs.
//!
//! The fit minimizes squared error on the log-linearized model
//! ln d = ln alpha + beta * rss, which is closed-form and
//! deterministic. Distances are never clamped: outliers are the
//! tracker's problem, not the ranging layer's.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floorplan::ApId;

#[derive(Debug, Error)]
pub enum RangingError {
    #[error("sample ap {sample} does not match calibration ap {calibration}")]
    ApMismatch { sample: ApId, calibration: ApId },
    #[error("calibration for {ap_id} underdetermined: needs >= 2 distinct rss values")]
    Underdetermined { ap_id: ApId },
    #[error("calibration pair for {ap_id} has non-positive distance {d}")]
    NonPositiveDistance { ap_id: ApId, d: f64 },
    #[error("malformed calibration file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One received-signal-strength measurement, dBm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RssSample {
    pub ap_id: ApId,
    pub t: f64,
    pub rss: f64,
}

/// Environmental constants of one access point's ranging model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApCalibration {
    pub ap_id: ApId,
    /// Distance at rss = 0, meters; > 0.
    pub alpha: f64,
    /// Exponential rate per dBm, typically negative.
    pub beta: f64,
}

/// An estimated distance to one access point, meters (> 0 by the
/// exponential form).
#[derive(Debug, Clone)]
pub struct RangeEstimate {
    pub ap_id: ApId,
    pub t: f64,
    pub d: f64,
}

/// d = alpha * exp(rss * beta).
pub fn range_from_rss(s: &RssSample, cal: &ApCalibration) -> Result<RangeEstimate, RangingError> {
    if s.ap_id != cal.ap_id {
        return Err(RangingError::ApMismatch {
            sample: s.ap_id.clone(),
            calibration: cal.ap_id.clone(),
        });
    }
    Ok(RangeEstimate {
        ap_id: s.ap_id.clone(),
        t: s.t,
        d: cal.alpha * (s.rss * cal.beta).exp(),
    })
}

/// Least-squares fit of (alpha, beta) on ln d = ln alpha + beta * rss.
///
/// `pairs` are (rss dBm, true distance m) observations for one AP.
pub fn fit_calibration(pairs: &[(f64, f64)], ap_id: &str) -> Result<ApCalibration, RangingError> {
    for &(_, d) in pairs {
        if d <= 0.0 {
            return Err(RangingError::NonPositiveDistance {
                ap_id: ap_id.to_string(),
                d,
            });
        }
    }
    let distinct = {
        let mut rss: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        rss.sort_by(|a, b| a.partial_cmp(b).expect("finite rss"));
        rss.dedup();
        rss.len()
    };
    if distinct < 2 {
        return Err(RangingError::Underdetermined {
            ap_id: ap_id.to_string(),
        });
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(x, d) in pairs {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (d.ln() - mean_y);
    }
    let beta = sxy / sxx;
    let alpha = (mean_y - beta * mean_x).exp();
    Ok(ApCalibration {
        ap_id: ap_id.to_string(),
        alpha,
        beta,
    })
}

/// Reads a calibration file: a JSON array of ApCalibration records.
pub fn read_calibrations(mut reader: impl Read) -> Result<Vec<ApCalibration>, RangingError> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    Ok(serde_json::from_str(&buf)?)
}

pub fn write_calibrations(
    mut writer: impl Write,
    cals: &[ApCalibration],
) -> Result<(), RangingError> {
    serde_json::to_writer_pretty(&mut writer, cals)?;
    writeln!(writer)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn sample(ap: &str, rss: f64) -> RssSample {
        RssSample {
            ap_id: ap.into(),
            t: 0.0,
            rss,
        }
    }

    fn cal(ap: &str, alpha: f64, beta: f64) -> ApCalibration {
        ApCalibration {
            ap_id: ap.into(),
            alpha,
            beta,
        }
    }

    #[test]
    fn zero_rss_returns_alpha() {
        let r = range_from_rss(&sample("ap-1", 0.0), &cal("ap-1", 2.0, -0.05)).unwrap();
        assert_eq!(r.d, 2.0);
    }

    #[test]
    fn zero_beta_ignores_rss() {
        for rss in [-90.0, -40.0, 0.0] {
            let r = range_from_rss(&sample("ap-1", rss), &cal("ap-1", 1.0, 0.0)).unwrap();
            assert_eq!(r.d, 1.0);
        }
    }

    #[test]
    fn matches_independent_high_precision_evaluation() {
        // 0.5 * e^2.4, evaluated independently to 30 significant digits.
        let expected = 5.511588190320800826;
        let r = range_from_rss(&sample("ap-1", -40.0), &cal("ap-1", 0.5, -0.06)).unwrap();
        assert!((r.d - expected).abs() < 1e-12);
    }

    #[test]
    fn ap_mismatch_is_a_contract_error() {
        assert!(matches!(
            range_from_rss(&sample("ap-1", -40.0), &cal("ap-2", 1.0, -0.05)),
            Err(RangingError::ApMismatch { .. })
        ));
    }

    #[test]
    fn fit_recovers_exact_parameters() {
        let (alpha, beta) = (2.0, -0.05);
        let pairs: Vec<(f64, f64)> = [-30.0, -50.0, -70.0]
            .iter()
            .map(|&rss| (rss, alpha * (rss * beta as f64).exp()))
            .collect();
        let fitted = fit_calibration(&pairs, "ap-1").unwrap();
        assert!((fitted.alpha - alpha).abs() / alpha < 1e-9);
        assert!((fitted.beta - beta).abs() / beta.abs() < 1e-9);
    }

    #[test]
    fn two_point_fit_is_the_exact_solution() {
        let pairs = vec![(0.0, 1.0), (-20.0, std::f64::consts::E)];
        let fitted = fit_calibration(&pairs, "ap-1").unwrap();
        assert!((fitted.alpha - 1.0).abs() < 1e-12);
        assert!((fitted.beta - -0.05).abs() < 1e-12);
    }

    #[test]
    fn noisy_fit_recovers_within_five_percent() {
        let (alpha, beta) = (2.0, -0.05);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let pairs: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let d = 1.0 + 0.15 * i as f64; // 1 m .. ~31 m
                let rss_true = (d / alpha as f64).ln() / beta;
                (rss_true + noise.sample(&mut rng), d)
            })
            .collect();
        let fitted = fit_calibration(&pairs, "ap-1").unwrap();
        assert!((fitted.alpha - alpha).abs() / alpha < 0.05);
        assert!((fitted.beta - beta).abs() / beta.abs() < 0.05);
    }

    #[test]
    fn underdetermined_and_invalid_inputs() {
        assert!(matches!(
            fit_calibration(&[(-40.0, 3.0)], "ap-1"),
            Err(RangingError::Underdetermined { .. })
        ));
        assert!(matches!(
            fit_calibration(&[(-40.0, 3.0), (-40.0, 5.0)], "ap-1"),
            Err(RangingError::Underdetermined { .. })
        ));
        assert!(matches!(
            fit_calibration(&[(-40.0, 3.0), (-50.0, 0.0)], "ap-1"),
            Err(RangingError::NonPositiveDistance { .. })
        ));
    }

    #[test]
    fn fit_beats_grid_search_on_log_scale() {
        // No grid point does better than the closed-form fit in
        // sum of squared log-distance residuals.
        let pairs = vec![(-30.0, 5.1), (-45.0, 9.7), (-60.0, 22.0), (-75.0, 41.0)];
        let fitted = fit_calibration(&pairs, "ap-1").unwrap();
        let sse = |alpha: f64, beta: f64| {
            pairs
                .iter()
                .map(|&(rss, d)| {
                    let r = d.ln() - (alpha.ln() + beta * rss);
                    r * r
                })
                .sum::<f64>()
        };
        let best = sse(fitted.alpha, fitted.beta);
        for ai in 0..60 {
            for bi in 0..60 {
                let alpha = 0.1 + 0.05 * ai as f64;
                let beta = -0.1 + 0.002 * bi as f64;
                assert!(sse(alpha, beta) >= best - 1e-12);
            }
        }
    }

    #[test]
    fn calibration_file_round_trip() {
        let cals = vec![cal("ap-1", 2.0, -0.05), cal("ap-2", 0.3, -0.045)];
        let mut buf = Vec::new();
        write_calibrations(&mut buf, &cals).unwrap();
        let back = read_calibrations(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].alpha, 0.3);
    }

    proptest! {
        #[test]
        fn range_is_monotone_in_rss(
            alpha in 0.1..5.0f64,
            beta in -0.1..-0.001f64,
            rss in -100.0..0.0f64,
        ) {
            let lo = range_from_rss(&sample("a", rss), &cal("a", alpha, beta)).unwrap();
            let hi = range_from_rss(&sample("a", rss + 1.0), &cal("a", alpha, beta)).unwrap();
            // beta < 0: stronger signal means shorter distance.
            prop_assert!(hi.d < lo.d);
        }

        #[test]
        fn noiseless_fit_recovers_parameters(
            alpha in 0.1..5.0f64,
            beta in -0.1..-0.005f64,
        ) {
            let pairs: Vec<(f64, f64)> = [-20.0, -40.0, -60.0, -80.0]
                .iter()
                .map(|&rss| (rss, alpha * (rss * beta as f64).exp()))
                .collect();
            let fitted = fit_calibration(&pairs, "ap-1").unwrap();
            prop_assert!((fitted.alpha - alpha).abs() / alpha < 1e-8);
            prop_assert!((fitted.beta - beta).abs() / beta.abs() < 1e-8);
        }
    }
}
