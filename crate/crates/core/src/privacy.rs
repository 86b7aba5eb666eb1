//! Privacy mechanisms: streaming linear-weighted gaze smoothing and
//! bounded-Laplace anthropometric noise for head and hand streams.
//!
//! Head and hand streams are privatized together or not at all: the single
//! `motion_private` flag makes mixed states unrepresentable.
//!
//! Motion noise is sampled once per (stream kind, session), not per sample:
//! the mechanism obscures a session's apparent height and reach, and
//! per-sample noise would average away under windowed statistics. The head
//! draw shifts the vertical component; the hand draw rescales horizontal and
//! depth offsets about the head axis and shifts the vertical by half the
//! wingspan change (the per-arm reach delta). Horizontal and depth head
//! components pass through untouched.

use crate::model::{SessionRecording, StreamKind, TimeSeries};
use crate::rng::{derive_seed_n, derive_seed_str, rng_for};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_SMOOTHING_WINDOW: usize = 108;
pub const DEFAULT_EPSILON_HEAD: f64 = 1.0;
pub const DEFAULT_EPSILON_HAND: f64 = 0.5;
pub const DEFAULT_BOUNDS_M: Interval = Interval { lower: 1.32, upper: 1.82 };

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("smoothing window must be >= 1, got {0}")]
    InvalidB(usize),
    #[error("invalid bounds/scale: {0}")]
    InvalidBounds(String),
    #[error("session has no head stream to estimate from")]
    NoHeadStream,
    #[error("head stream has no unmasked samples")]
    NoHeadSamples,
    #[error("motion privatization requires an anthropometric estimate")]
    MissingEstimate,
    #[error("invalid privacy config: {0}")]
    InvalidConfig(String),
}

/// A closed interval in meters, serialized as `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 2]", try_from = "[f64; 2]")]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        (self.lower..=self.upper).contains(&x)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lower, i.upper]
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = String;

    fn try_from(v: [f64; 2]) -> Result<Self, String> {
        if !(v[0] < v[1]) {
            return Err(format!("interval lower bound {} must be below upper {}", v[0], v[1]));
        }
        Ok(Interval { lower: v[0], upper: v[1] })
    }
}

/// Mechanism parameters shared by every privatized experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismParams {
    /// Gaze smoothing window length B, in samples.
    pub smoothing_window: usize,
    pub epsilon_head: f64,
    pub epsilon_hand: f64,
    pub bounds_m: Interval,
}

impl Default for MechanismParams {
    fn default() -> Self {
        MechanismParams {
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            epsilon_head: DEFAULT_EPSILON_HEAD,
            epsilon_hand: DEFAULT_EPSILON_HAND,
            bounds_m: DEFAULT_BOUNDS_M,
        }
    }
}

impl MechanismParams {
    pub fn validate(&self) -> Result<(), PrivacyError> {
        if self.smoothing_window < 1 {
            return Err(PrivacyError::InvalidB(self.smoothing_window));
        }
        if self.epsilon_head <= 0.0 || self.epsilon_hand <= 0.0 {
            return Err(PrivacyError::InvalidConfig("epsilons must be positive".into()));
        }
        if !(self.bounds_m.lower < self.bounds_m.upper) {
            return Err(PrivacyError::InvalidConfig("bounds lower must be below upper".into()));
        }
        Ok(())
    }
}

/// Which streams to privatize, plus mechanism parameters and the noise seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    pub gaze_private: bool,
    /// Covers head AND hands jointly.
    pub motion_private: bool,
    #[serde(flatten)]
    pub params: MechanismParams,
    #[serde(default)]
    pub noise_seed: u64,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        PrivacyConfig {
            gaze_private: false,
            motion_private: false,
            params: MechanismParams::default(),
            noise_seed: 0,
        }
    }
}

/// Height and wingspan estimate feeding the noise calibration; both are
/// clamped into the bounds before use and wingspan equals height (1:1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnthropometricEstimate {
    pub height_m: f64,
    pub wingspan_m: f64,
}

/// Replaces each sample with the linearly weighted average of the window
/// ending at it: weight i of k for the i-th oldest of k samples, heaviest on
/// the most recent. The warm-up prefix uses however many samples exist.
/// Masked samples are skipped and the remaining weights renormalized; an
/// output sample is masked only when its whole window is masked.
pub fn smooth_stream(s: &TimeSeries, window: usize) -> Result<TimeSeries, PrivacyError> {
    if window < 1 {
        return Err(PrivacyError::InvalidB(window));
    }
    let n = s.len();
    let mut out = s.clone();
    for c in 0..s.arity() {
        let src = &s.components[c];
        let dst = &mut out.components[c];
        for t in 0..n {
            let k = window.min(t + 1);
            let start = t + 1 - k;
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, idx) in (start..=t).enumerate() {
                if s.missing[idx] {
                    continue;
                }
                let w = (i + 1) as f64;
                num += w * src[idx];
                den += w;
            }
            if den > 0.0 {
                dst[t] = num / den;
            } else {
                dst[t] = 0.0;
            }
        }
    }
    // Recompute the mask: a sample stays masked only if no window sample was
    // available to average.
    for t in 0..n {
        let k = window.min(t + 1);
        let start = t + 1 - k;
        out.missing[t] = (start..=t).all(|idx| s.missing[idx]);
    }
    Ok(out)
}

/// Mean unmasked head height of the subject's first recording, clamped into
/// the bounds; wingspan is assumed equal to height.
pub fn estimate_anthropometrics(
    first_session: &SessionRecording,
    bounds: Interval,
) -> Result<AnthropometricEstimate, PrivacyError> {
    let head = first_session
        .stream(StreamKind::Head)
        .ok_or(PrivacyError::NoHeadStream)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (v, &m) in head.components[1].iter().zip(&head.missing) {
        if !m {
            sum += v;
            count += 1;
        }
    }
    if count == 0 {
        return Err(PrivacyError::NoHeadSamples);
    }
    let height = bounds.clamp(sum / count as f64);
    Ok(AnthropometricEstimate { height_m: height, wingspan_m: height })
}

/// Inverse-CDF draw from a Laplace(center, scale_b) density truncated and
/// renormalized to [lower, upper]. Every draw lies inside the interval and
/// costs exactly one uniform variate, so draw counts are seed-stable.
pub fn sample_bounded_laplace<R: Rng>(
    center: f64,
    scale_b: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64, PrivacyError> {
    if !(lower < upper) {
        return Err(PrivacyError::InvalidBounds(format!(
            "lower {lower} must be below upper {upper}"
        )));
    }
    if scale_b <= 0.0 {
        return Err(PrivacyError::InvalidBounds(format!("scale {scale_b} must be positive")));
    }
    if !(lower..=upper).contains(&center) {
        return Err(PrivacyError::InvalidBounds(format!(
            "center {center} outside [{lower}, {upper}]"
        )));
    }

    let cdf = |x: f64| -> f64 {
        let z = (x - center) / scale_b;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    };
    let f_lo = cdf(lower);
    let f_hi = cdf(upper);
    let u: f64 = rng.random();
    let p = f_lo + u * (f_hi - f_lo);
    let x = if p < 0.5 {
        center + scale_b * (2.0 * p).ln()
    } else {
        center - scale_b * (2.0 * (1.0 - p)).ln()
    };
    Ok(x.clamp(lower, upper))
}

/// Applies the bounded-Laplace mechanism to the motion streams of one
/// session. One draw is taken per (stream kind, session), derived from
/// (noise_seed, subject_id, session_index), so output is reproducible and
/// independent of evaluation order.
pub fn privatize_motion(
    r: &SessionRecording,
    est: &AnthropometricEstimate,
    cfg: &PrivacyConfig,
) -> Result<SessionRecording, PrivacyError> {
    cfg.params.validate()?;
    let bounds = cfg.params.bounds_m;
    if !bounds.contains(est.height_m) || !bounds.contains(est.wingspan_m) {
        return Err(PrivacyError::InvalidBounds(
            "estimate must be clamped into the bounds before privatization".into(),
        ));
    }
    let mut out = r.clone();
    let session_seed = derive_seed_n(
        derive_seed_str(cfg.noise_seed, "subject", &r.subject_id),
        "session",
        u64::from(r.session_index),
    );

    if let Some(head) = out.streams.get_mut(&StreamKind::Head) {
        let mut rng = rng_for(derive_seed_n(session_seed, "head-draw", 0));
        let draw = sample_bounded_laplace(
            est.height_m,
            bounds.width() / cfg.params.epsilon_head,
            bounds.lower,
            bounds.upper,
            &mut rng,
        )?;
        let offset = draw - est.height_m;
        for v in &mut head.components[1] {
            *v += offset;
        }
    }

    let has_hands = r.stream(StreamKind::LeftHand).is_some()
        || r.stream(StreamKind::RightHand).is_some();
    if has_hands {
        let mut rng = rng_for(derive_seed_n(session_seed, "hand-draw", 0));
        let draw = sample_bounded_laplace(
            est.wingspan_m,
            bounds.width() / cfg.params.epsilon_hand,
            bounds.lower,
            bounds.upper,
            &mut rng,
        )?;
        let scale = draw / est.wingspan_m;
        let dy = (draw - est.wingspan_m) / 2.0;
        // Horizontal/depth offsets are taken about the (unperturbed) head
        // axis when a head stream exists, else about the world origin.
        let head_axis: Option<(Vec<f64>, Vec<f64>)> = r
            .stream(StreamKind::Head)
            .map(|h| (h.components[0].clone(), h.components[2].clone()));
        for kind in [StreamKind::LeftHand, StreamKind::RightHand] {
            let Some(hand) = out.streams.get_mut(&kind) else { continue };
            let n = hand.len();
            for t in 0..n {
                let (ax, az) = match &head_axis {
                    Some((hx, hz)) if t < hx.len() => (hx[t], hz[t]),
                    _ => (0.0, 0.0),
                };
                hand.components[0][t] = ax + scale * (hand.components[0][t] - ax);
                hand.components[2][t] = az + scale * (hand.components[2][t] - az);
                hand.components[1][t] += dy;
            }
        }
    }
    Ok(out)
}

/// Applies the configured mechanisms to one session: gaze smoothed iff
/// `gaze_private`, head and hands privatized iff `motion_private`. Streams
/// not selected by the flags come back bit-identical.
pub fn apply_privacy(
    r: &SessionRecording,
    cfg: &PrivacyConfig,
    est: Option<&AnthropometricEstimate>,
) -> Result<SessionRecording, PrivacyError> {
    cfg.params.validate()?;
    let mut out = r.clone();
    if cfg.gaze_private {
        if let Some(gaze) = r.stream(StreamKind::Gaze) {
            out.streams
                .insert(StreamKind::Gaze, smooth_stream(gaze, cfg.params.smoothing_window)?);
        }
    }
    if cfg.motion_private {
        let has_motion = r.stream(StreamKind::Head).is_some()
            || r.stream(StreamKind::LeftHand).is_some()
            || r.stream(StreamKind::RightHand).is_some();
        if has_motion {
            let est = est.ok_or(PrivacyError::MissingEstimate)?;
            out = privatize_motion(&out, est, cfg)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NOMINAL_RATE_HZ;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn gaze_series(values: Vec<f64>) -> TimeSeries {
        TimeSeries::dense(StreamKind::Gaze, NOMINAL_RATE_HZ, vec![values])
    }

    fn head_session(y: Vec<f64>) -> SessionRecording {
        let n = y.len();
        let mut streams = BTreeMap::new();
        streams.insert(
            StreamKind::Head,
            TimeSeries::dense(StreamKind::Head, NOMINAL_RATE_HZ, vec![vec![0.0; n], y, vec![0.0; n]]),
        );
        SessionRecording { subject_id: "a".into(), session_index: 1, streams }
    }

    #[test]
    fn smoothing_preserves_constant_signals() {
        let s = gaze_series(vec![2.5; 400]);
        let out = smooth_stream(&s, 108).unwrap();
        for &v in &out.components[0] {
            assert_relative_eq!(v, 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn smoothing_with_b_one_is_identity() {
        let s = gaze_series((0..50).map(|t| (t as f64).sin()).collect());
        let out = smooth_stream(&s, 1).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn ramp_closed_form_at_steady_state() {
        // x_t = t with B = 3 settles to t - 2/3.
        let s = gaze_series((0..100).map(|t| t as f64).collect());
        let out = smooth_stream(&s, 3).unwrap();
        for t in 2..100 {
            assert_relative_eq!(out.components[0][t], t as f64 - 2.0 / 3.0, epsilon = 1e-9);
        }
    }

    /// Brute-force weighted-sum oracle with the stated weight convention.
    fn smooth_oracle(x: &[f64], window: usize) -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                let k = window.min(t + 1);
                let weights: Vec<f64> = (1..=k).map(|i| i as f64).collect();
                let wsum: f64 = weights.iter().sum();
                (0..k).map(|i| weights[i] / wsum * x[t + 1 - k + i]).sum()
            })
            .collect()
    }

    #[test]
    fn smoothing_matches_brute_force_oracle() {
        let x: Vec<f64> = (0..200).map(|t| (t as f64 * 0.37).sin() * 3.0 + 0.2).collect();
        let s = gaze_series(x.clone());
        for window in [1usize, 2, 3, 7, 108] {
            let out = smooth_stream(&s, window).unwrap();
            let oracle = smooth_oracle(&x, window);
            for (a, b) in out.components[0].iter().zip(&oracle) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_renormalizes_around_masked_samples() {
        let mut s = gaze_series(vec![1.0, 100.0, 1.0, 1.0]);
        s.missing[1] = true;
        let out = smooth_stream(&s, 3).unwrap();
        // window at t=2 holds {1.0(masked 100), 1.0}; masked excluded
        assert_relative_eq!(out.components[0][2], 1.0, epsilon = 1e-12);
        assert!(!out.missing[2]);
    }

    #[test]
    fn smoothing_masks_only_fully_masked_windows() {
        let mut s = gaze_series(vec![1.0, 2.0, 3.0]);
        s.missing = vec![true, true, false];
        let out = smooth_stream(&s, 2).unwrap();
        assert_eq!(out.missing, vec![true, true, false]);
    }

    #[test]
    fn invalid_b_is_rejected() {
        let s = gaze_series(vec![0.0; 10]);
        assert!(matches!(smooth_stream(&s, 0), Err(PrivacyError::InvalidB(0))));
    }

    proptest! {
        #[test]
        fn smoothing_is_linear(
            x in proptest::collection::vec(-100.0f64..100.0, 10..200),
            a in -5.0f64..5.0,
            b in -5.0f64..5.0,
        ) {
            let y: Vec<f64> = x.iter().map(|v| v * 0.5 - 1.0).collect();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(xv, yv)| a * xv + b * yv).collect();
            let sx = smooth_stream(&gaze_series(x), 7).unwrap();
            let sy = smooth_stream(&gaze_series(y), 7).unwrap();
            let sc = smooth_stream(&gaze_series(combo), 7).unwrap();
            for t in 0..sc.len() {
                let expected = a * sx.components[0][t] + b * sy.components[0][t];
                prop_assert!((sc.components[0][t] - expected).abs() < 1e-9);
            }
        }

        #[test]
        fn smoothing_stays_within_input_range(
            x in proptest::collection::vec(-50.0f64..50.0, 5..150),
            window in 1usize..20,
        ) {
            let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let out = smooth_stream(&gaze_series(x), window).unwrap();
            for &v in &out.components[0] {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn estimate_uses_mean_and_clamps() {
        let r = head_session(vec![1.60; 100]);
        let est = estimate_anthropometrics(&r, DEFAULT_BOUNDS_M).unwrap();
        assert_relative_eq!(est.height_m, 1.60, epsilon = 1e-12);
        assert_relative_eq!(est.wingspan_m, 1.60, epsilon = 1e-12);

        let tall = head_session(vec![2.10; 100]);
        let est = estimate_anthropometrics(&tall, DEFAULT_BOUNDS_M).unwrap();
        assert_relative_eq!(est.height_m, 1.82);

        let two = head_session(vec![1.50, 1.70]);
        let est = estimate_anthropometrics(&two, DEFAULT_BOUNDS_M).unwrap();
        assert_relative_eq!(est.height_m, 1.60, epsilon = 1e-12);
    }

    #[test]
    fn estimate_requires_head_stream() {
        let r = SessionRecording {
            subject_id: "a".into(),
            session_index: 1,
            streams: BTreeMap::new(),
        };
        assert!(matches!(
            estimate_anthropometrics(&r, DEFAULT_BOUNDS_M),
            Err(PrivacyError::NoHeadStream)
        ));
    }

    #[test]
    fn tiny_scale_draw_returns_center() {
        let mut rng = rng_for(1);
        for _ in 0..100 {
            let v = sample_bounded_laplace(1.5, 1e-12, 1.32, 1.82, &mut rng).unwrap();
            assert_relative_eq!(v, 1.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn draws_always_lie_in_bounds() {
        let mut rng = rng_for(2);
        for _ in 0..10_000 {
            let v = sample_bounded_laplace(1.6, 0.5, 1.32, 1.82, &mut rng).unwrap();
            assert!((1.32..=1.82).contains(&v));
        }
    }

    #[test]
    fn midpoint_center_is_symmetric() {
        let mut rng = rng_for(3);
        let center = (1.32 + 1.82) / 2.0;
        let n = 100_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let v = sample_bounded_laplace(center, 0.5, 1.32, 1.82, &mut rng).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let stderr = (var / n as f64).sqrt();
        assert!(
            (mean - center).abs() <= 3.0 * stderr,
            "mean {mean} vs center {center} (stderr {stderr})"
        );
    }

    #[test]
    fn invalid_draw_parameters_are_rejected() {
        let mut rng = rng_for(4);
        assert!(sample_bounded_laplace(1.5, 0.5, 1.82, 1.32, &mut rng).is_err());
        assert!(sample_bounded_laplace(1.5, 0.0, 1.32, 1.82, &mut rng).is_err());
        assert!(sample_bounded_laplace(2.0, 0.5, 1.32, 1.82, &mut rng).is_err());
    }

    fn full_session(subject: &str, session: u32) -> SessionRecording {
        let p = crate::synth::SubjectProfile {
            subject_id: subject.into(),
            height_m: 1.60,
            arm_scale: 1.0,
            sway_amplitude_m: 0.01,
            sway_frequency_hz: 0.3,
            sway_shape: 0.2,
            saccade_rate_hz: 2.0,
            saccade_amplitude_deg: 8.0,
            fixation_noise_deg: 0.05,
            tremor_amplitude_m: 0.005,
            tremor_frequency_hz: 4.0,
            seed: 5,
        };
        crate::synth::generate_session(&p, session, 15.0, 77)
    }

    #[test]
    fn constant_head_gets_constant_offset() {
        let r = head_session(vec![1.60; 200]);
        let est = AnthropometricEstimate { height_m: 1.60, wingspan_m: 1.60 };
        let cfg = PrivacyConfig { motion_private: true, ..PrivacyConfig::default() };
        let out = privatize_motion(&r, &est, &cfg).unwrap();
        let y = &out.stream(StreamKind::Head).unwrap().components[1];
        let delta = y[0] - 1.60;
        assert!(delta.abs() > 0.0);
        for &v in y {
            assert_relative_eq!(v, 1.60 + delta, epsilon = 1e-12);
        }
    }

    #[test]
    fn privatize_motion_is_deterministic_per_seed() {
        let r = full_session("a", 1);
        let est = AnthropometricEstimate { height_m: 1.60, wingspan_m: 1.60 };
        let cfg = PrivacyConfig {
            motion_private: true,
            noise_seed: 9,
            ..PrivacyConfig::default()
        };
        let a = privatize_motion(&r, &est, &cfg).unwrap();
        let b = privatize_motion(&r, &est, &cfg).unwrap();
        assert_eq!(a, b);
        // a different session index draws different noise
        let mut r2 = r.clone();
        r2.session_index = 2;
        let c = privatize_motion(&r2, &est, &cfg).unwrap();
        assert_ne!(
            a.stream(StreamKind::Head).unwrap().components[1][0],
            c.stream(StreamKind::Head).unwrap().components[1][0]
        );
    }

    #[test]
    fn huge_epsilon_approaches_identity() {
        let r = full_session("a", 1);
        let est = estimate_anthropometrics(&r, DEFAULT_BOUNDS_M).unwrap();
        let mut cfg = PrivacyConfig { motion_private: true, ..PrivacyConfig::default() };
        cfg.params.epsilon_head = 1e12;
        cfg.params.epsilon_hand = 1e12;
        let out = privatize_motion(&r, &est, &cfg).unwrap();
        for kind in [StreamKind::Head, StreamKind::LeftHand, StreamKind::RightHand] {
            let a = r.stream(kind).unwrap();
            let b = out.stream(kind).unwrap();
            for c in 0..3 {
                for t in 0..a.len() {
                    assert_relative_eq!(a.components[c][t], b.components[c][t], epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn head_horizontal_and_depth_pass_through() {
        let r = full_session("a", 1);
        let est = estimate_anthropometrics(&r, DEFAULT_BOUNDS_M).unwrap();
        let cfg = PrivacyConfig { motion_private: true, ..PrivacyConfig::default() };
        let out = privatize_motion(&r, &est, &cfg).unwrap();
        let before = r.stream(StreamKind::Head).unwrap();
        let after = out.stream(StreamKind::Head).unwrap();
        assert_eq!(before.components[0], after.components[0]);
        assert_eq!(before.components[2], after.components[2]);
    }

    #[test]
    fn reestimated_privatized_height_stays_in_bounds() {
        for seed in 0..20u64 {
            let r = full_session("a", 1);
            let est = estimate_anthropometrics(&r, DEFAULT_BOUNDS_M).unwrap();
            let cfg = PrivacyConfig {
                motion_private: true,
                noise_seed: seed,
                ..PrivacyConfig::default()
            };
            let out = privatize_motion(&r, &est, &cfg).unwrap();
            let re = estimate_anthropometrics(&out, DEFAULT_BOUNDS_M).unwrap();
            assert!(DEFAULT_BOUNDS_M.contains(re.height_m));
        }
    }

    #[test]
    fn apply_privacy_with_no_flags_is_identity() {
        let r = full_session("a", 1);
        let out = apply_privacy(&r, &PrivacyConfig::default(), None).unwrap();
        assert_eq!(out, r);
    }

    #[test]
    fn gaze_only_privacy_leaves_motion_bit_identical() {
        let r = full_session("a", 1);
        let cfg = PrivacyConfig { gaze_private: true, ..PrivacyConfig::default() };
        let out = apply_privacy(&r, &cfg, None).unwrap();
        assert_ne!(out.stream(StreamKind::Gaze), r.stream(StreamKind::Gaze));
        for kind in [StreamKind::Head, StreamKind::LeftHand, StreamKind::RightHand] {
            assert_eq!(out.stream(kind), r.stream(kind));
        }
    }

    #[test]
    fn motion_only_privacy_leaves_gaze_bit_identical() {
        let r = full_session("a", 1);
        let est = estimate_anthropometrics(&r, DEFAULT_BOUNDS_M).unwrap();
        let cfg = PrivacyConfig { motion_private: true, ..PrivacyConfig::default() };
        let out = apply_privacy(&r, &cfg, Some(&est)).unwrap();
        assert_eq!(out.stream(StreamKind::Gaze), r.stream(StreamKind::Gaze));
        assert_ne!(out.stream(StreamKind::Head), r.stream(StreamKind::Head));
    }

    #[test]
    fn motion_privacy_without_estimate_fails() {
        let r = full_session("a", 1);
        let cfg = PrivacyConfig { motion_private: true, ..PrivacyConfig::default() };
        assert!(matches!(
            apply_privacy(&r, &cfg, None),
            Err(PrivacyError::MissingEstimate)
        ));
    }

    #[test]
    fn config_defaults_match_published_values() {
        let cfg = PrivacyConfig::default();
        assert_eq!(cfg.params.smoothing_window, 108);
        assert_relative_eq!(cfg.params.epsilon_head, 1.0);
        assert_relative_eq!(cfg.params.epsilon_hand, 0.5);
        assert_relative_eq!(cfg.params.bounds_m.lower, 1.32);
        assert_relative_eq!(cfg.params.bounds_m.upper, 1.82);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: PrivacyConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
