//! Pedestrian dead reckoning: step detection from accelerometer
//! magnitude and tilt-compensated compass heading from the
//! magnetometer, combined into per-step motion vectors [theta, ell].
//!
//! Heading convention: 0 rad means the floor plan's +y axis
//! ("map north"); with the device flat, heading = atan2(mx, my) of the
//! horizontal magnetic components, so a magnetic vector along device
//! +x reads +pi/2. Stride length ell is a configured constant.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity used as the step-detection baseline, m/s^2.
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Error)]
pub enum MotionError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("t={t} outside trace span")]
    OutOfSpan { t: f64 },
    #[error("unusable compass sample at t={t}: magnetic vector parallel to gravity")]
    DegenerateCompass { t: f64 },
    #[error("trace not strictly increasing in t at line {line}")]
    NonMonotoneTrace { line: usize },
    #[error("malformed trace line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One inertial sample: accelerometer in m/s^2, magnetometer in uT.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub accel: [f64; 3],
    pub mag: [f64; 3],
}

/// The instant a new step was executed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub t: f64,
}

/// Per-step displacement: heading theta (rad, [-pi, pi)) and stride
/// length ell (m, > 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVector {
    pub theta: f64,
    pub ell: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdrConfig {
    /// Constant stride length, meters.
    pub stride_length: f64,
    /// Smoothed accel magnitude must exceed gravity by this much at a
    /// peak to count as a step, m/s^2.
    pub peak_threshold: f64,
    /// Refractory period between steps, seconds.
    pub min_step_interval: f64,
    /// Moving-average window (samples) for accel smoothing, used both
    /// for step detection and for gravity estimation in the compass.
    pub smoothing_window: usize,
}

impl Default for PdrConfig {
    fn default() -> Self {
        PdrConfig {
            stride_length: 0.7,
            peak_threshold: 1.5,
            min_step_interval: 0.3,
            smoothing_window: 25,
        }
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Wraps an angle to [-pi, pi).
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let wrapped = a - two_pi * ((a + PI) / two_pi).floor();
    // Guard the upper boundary against rounding.
    if wrapped >= PI {
        wrapped - two_pi
    } else {
        wrapped
    }
}

/// Centered moving average of accel magnitude, window clamped at the
/// trace edges. window == 1 leaves the signal untouched.
fn smoothed_magnitude(trace: &[ImuSample], window: usize) -> Vec<f64> {
    let n = trace.len();
    let mags: Vec<f64> = trace.iter().map(|s| norm(s.accel)).collect();
    if window <= 1 {
        return mags;
    }
    let half = window / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            mags[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Mean accel over the smoothing window centered on sample `idx`.
fn gravity_estimate(trace: &[ImuSample], idx: usize, window: usize) -> [f64; 3] {
    let n = trace.len();
    let half = window.max(1) / 2;
    let lo = idx.saturating_sub(half);
    let hi = (idx + half).min(n - 1);
    let mut sum = [0.0; 3];
    for s in &trace[lo..=hi] {
        sum[0] += s.accel[0];
        sum[1] += s.accel[1];
        sum[2] += s.accel[2];
    }
    scale(sum, 1.0 / (hi - lo + 1) as f64)
}

/// Detects step events: local maxima of the smoothed accel magnitude
/// exceeding gravity by `peak_threshold`, with a `min_step_interval`
/// refractory period (the first peak of a burst wins). Plateaus
/// resolve to their leftmost sample. Deterministic.
pub fn detect_steps(trace: &[ImuSample], cfg: &PdrConfig) -> Vec<StepEvent> {
    let n = trace.len();
    if n < 3 {
        return Vec::new();
    }
    let smoothed = smoothed_magnitude(trace, cfg.smoothing_window);
    let mut steps: Vec<StepEvent> = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if smoothed[i] > smoothed[i - 1] {
            // Rising edge; scan any plateau to see whether it drops.
            let mut j = i;
            while j + 1 < n && smoothed[j + 1] == smoothed[i] {
                j += 1;
            }
            if j + 1 < n && smoothed[j + 1] < smoothed[i] {
                let excess = smoothed[i] - STANDARD_GRAVITY;
                let t = trace[i].t;
                let clear_of_last = steps
                    .last()
                    .is_none_or(|s| t - s.t >= cfg.min_step_interval);
                if excess > cfg.peak_threshold && clear_of_last {
                    steps.push(StepEvent { t });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    steps
}

/// Tilt-compensated compass heading at time `t`.
///
/// Gravity is estimated from the smoothed accelerometer, the magnetic
/// vector of the latest sample at or before `t` is projected onto the
/// horizontal plane, and the heading is the signed angle from the
/// projected device +y axis to projected north, in [-pi, pi).
pub fn heading_at(trace: &[ImuSample], t: f64, cfg: &PdrConfig) -> Result<f64, MotionError> {
    if trace.is_empty() {
        return Err(MotionError::EmptyTrace);
    }
    if t < trace[0].t || t > trace[trace.len() - 1].t {
        return Err(MotionError::OutOfSpan { t });
    }
    let idx = match trace.binary_search_by(|s| s.t.partial_cmp(&t).expect("finite t")) {
        Ok(i) => i,
        Err(ins) => ins - 1, // latest sample before t; ins >= 1 given the span check
    };
    let g = gravity_estimate(trace, idx, cfg.smoothing_window);
    let g_norm = norm(g);
    if g_norm < 1e-9 {
        return Err(MotionError::DegenerateCompass { t });
    }
    let up = scale(g, 1.0 / g_norm);
    let m = trace[idx].mag;
    let m_h = sub(m, scale(up, dot(m, up)));
    let y_axis = [0.0, 1.0, 0.0];
    let y_h = sub(y_axis, scale(up, dot(y_axis, up)));
    if norm(m_h) <= 1e-9 * norm(m).max(1e-12) || norm(y_h) <= 1e-9 {
        return Err(MotionError::DegenerateCompass { t });
    }
    Ok(normalize_angle(f64::atan2(
        dot(cross3(m_h, y_h), up),
        dot(m_h, y_h),
    )))
}

/// Pairs every detected step with its motion vector
/// (heading at the step instant, configured stride).
pub fn motion_vectors(
    trace: &[ImuSample],
    cfg: &PdrConfig,
) -> Result<Vec<(StepEvent, MotionVector)>, MotionError> {
    detect_steps(trace, cfg)
        .into_iter()
        .map(|step| {
            let theta = heading_at(trace, step.t, cfg)?;
            Ok((
                step,
                MotionVector {
                    theta,
                    ell: cfg.stride_length,
                },
            ))
        })
        .collect()
}

/// Reads a JSON-lines IMU trace (one sample per line), validating
/// strictly increasing timestamps.
pub fn read_imu_trace(reader: impl BufRead) -> Result<Vec<ImuSample>, MotionError> {
    let mut trace = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: ImuSample =
            serde_json::from_str(&line).map_err(|source| MotionError::Parse {
                line: i + 1,
                source,
            })?;
        if let Some(prev) = trace.last() {
            let prev: &ImuSample = prev;
            if sample.t <= prev.t {
                return Err(MotionError::NonMonotoneTrace { line: i + 1 });
            }
        }
        trace.push(sample);
    }
    Ok(trace)
}

pub fn write_imu_trace(mut writer: impl Write, trace: &[ImuSample]) -> Result<(), MotionError> {
    for sample in trace {
        serde_json::to_writer(&mut writer, sample).map_err(|e| MotionError::Io(e.into()))?;
        writeln!(writer)?;
    }
    Ok(())
}
