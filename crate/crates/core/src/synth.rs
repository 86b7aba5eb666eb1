//! Seeded synthetic populations with a tunable identity signal.
//!
//! Each subject gets a parameter profile covering physical traits (standing
//! height, arm reach) and behavioral traits (head sway, saccade habits, hand
//! tremor). `identity_strength` blends every profile between a shared
//! population default (strength 0, no identity signal) and fully individual
//! parameters (strength 1). Session-level nuisance variation (phases, drift,
//! saccade timing) is always resampled per session.
//!
//! Signal model per stream:
//! - head: standing height + sinusoidal sway + slow mean-reverting drift;
//!   horizontal/depth components wander slowly around the origin
//! - gaze: fixation noise around a session-specific center, plus discrete
//!   saccades at jitter-periodic times with two-sample displacement steps
//! - hands: shoulder-anchored offsets scaled by arm reach (hand spread is
//!   close to standing height), plus tremor sinusoids and slow drift

use crate::model::{Dataset, SessionRecording, StreamKind, TimeSeries, NOMINAL_RATE_HZ};
use crate::rng::{derive_seed, derive_seed_n, rng_for};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
}

/// Per-subject generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: String,
    pub height_m: f64,
    pub arm_scale: f64,
    pub sway_amplitude_m: f64,
    pub sway_frequency_hz: f64,
    /// Second-harmonic fraction of the sway waveform, in [0, 1).
    pub sway_shape: f64,
    pub saccade_rate_hz: f64,
    pub saccade_amplitude_deg: f64,
    pub fixation_noise_deg: f64,
    pub tremor_amplitude_m: f64,
    pub tremor_frequency_hz: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_subjects: usize,
    pub sessions_per_subject: u32,
    pub session_duration_s: f64,
    /// 0.0 collapses every profile onto one shared parameter set; 1.0 keeps
    /// fully individual draws.
    pub identity_strength: f64,
    pub master_seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_subjects: 20,
            sessions_per_subject: 2,
            session_duration_s: 60.0,
            identity_strength: 1.0,
            master_seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_subjects < 2 {
            return Err(SynthError::InvalidConfig("n_subjects must be >= 2".into()));
        }
        if self.sessions_per_subject < 1 {
            return Err(SynthError::InvalidConfig("sessions_per_subject must be >= 1".into()));
        }
        if self.session_duration_s < 15.0 {
            return Err(SynthError::InvalidConfig(
                "session_duration_s must be >= 15".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.identity_strength) {
            return Err(SynthError::InvalidConfig(
                "identity_strength must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Raw parameter draws before identity blending.
#[derive(Clone, Copy)]
struct RawParams {
    height_m: f64,
    arm_scale: f64,
    sway_amplitude_m: f64,
    sway_frequency_hz: f64,
    sway_shape: f64,
    saccade_rate_hz: f64,
    saccade_amplitude_deg: f64,
    fixation_noise_deg: f64,
    tremor_amplitude_m: f64,
    tremor_frequency_hz: f64,
}

impl RawParams {
    fn draw(rng: &mut ChaCha12Rng) -> Self {
        RawParams {
            height_m: rng.random_range(1.40..1.90),
            arm_scale: rng.random_range(0.90..1.10),
            sway_amplitude_m: rng.random_range(0.005..0.030),
            // Lower bound keeps at least ~2 sway periods in a 5 s window so
            // window statistics estimate the amplitude stably.
            sway_frequency_hz: rng.random_range(0.35..0.80),
            sway_shape: rng.random_range(0.0..0.6),
            saccade_rate_hz: rng.random_range(1.0..3.6),
            saccade_amplitude_deg: rng.random_range(7.8..8.2),
            fixation_noise_deg: rng.random_range(0.045..0.075),
            tremor_amplitude_m: rng.random_range(0.002..0.012),
            tremor_frequency_hz: rng.random_range(3.0..8.0),
        }
    }

    fn blend(&self, individual: &RawParams, strength: f64) -> RawParams {
        let mix = |shared: f64, own: f64| shared + strength * (own - shared);
        RawParams {
            height_m: mix(self.height_m, individual.height_m),
            arm_scale: mix(self.arm_scale, individual.arm_scale),
            sway_amplitude_m: mix(self.sway_amplitude_m, individual.sway_amplitude_m),
            sway_frequency_hz: mix(self.sway_frequency_hz, individual.sway_frequency_hz),
            sway_shape: mix(self.sway_shape, individual.sway_shape),
            saccade_rate_hz: mix(self.saccade_rate_hz, individual.saccade_rate_hz),
            saccade_amplitude_deg: mix(
                self.saccade_amplitude_deg,
                individual.saccade_amplitude_deg,
            ),
            fixation_noise_deg: mix(self.fixation_noise_deg, individual.fixation_noise_deg),
            tremor_amplitude_m: mix(self.tremor_amplitude_m, individual.tremor_amplitude_m),
            tremor_frequency_hz: mix(self.tremor_frequency_hz, individual.tremor_frequency_hz),
        }
    }

    fn into_profile(self, subject_id: String, seed: u64) -> SubjectProfile {
        SubjectProfile {
            subject_id,
            height_m: self.height_m,
            arm_scale: self.arm_scale,
            sway_amplitude_m: self.sway_amplitude_m,
            sway_frequency_hz: self.sway_frequency_hz,
            sway_shape: self.sway_shape,
            saccade_rate_hz: self.saccade_rate_hz,
            saccade_amplitude_deg: self.saccade_amplitude_deg,
            fixation_noise_deg: self.fixation_noise_deg,
            tremor_amplitude_m: self.tremor_amplitude_m,
            tremor_frequency_hz: self.tremor_frequency_hz,
            seed,
        }
    }
}

/// Generates the full population. Identical configs (including the seed)
/// yield bit-identical datasets regardless of thread count, because every
/// session derives its own ChaCha12 seed up front.
pub fn generate_population(cfg: &GeneratorConfig) -> Result<Dataset, SynthError> {
    cfg.validate()?;
    let shared = RawParams::draw(&mut rng_for(derive_seed(cfg.master_seed, "shared-params")));

    let mut jobs = Vec::new();
    for i in 0..cfg.n_subjects {
        let subject_id = format!("S{:03}", i + 1);
        let individual = RawParams::draw(&mut rng_for(derive_seed_n(
            cfg.master_seed,
            "subject-params",
            i as u64,
        )));
        let params = shared.blend(&individual, cfg.identity_strength);
        let profile = params
            .into_profile(subject_id, derive_seed_n(cfg.master_seed, "subject-rng", i as u64));
        for s in 1..=cfg.sessions_per_subject {
            let session_seed = derive_seed_n(profile.seed, "session", u64::from(s));
            jobs.push((profile.clone(), s, session_seed));
        }
    }

    let recordings = jobs
        .par_iter()
        .map(|(profile, s, seed)| generate_session(profile, *s, cfg.session_duration_s, *seed))
        .collect();
    Ok(Dataset { recordings })
}

/// Generates one session. The head vertical mean stays within ±0.02 m of the
/// profile height, and the saccade count stays within ±20% of
/// `saccade_rate_hz · duration` under a 100°/s two-sample event counter.
pub fn generate_session(
    p: &SubjectProfile,
    session_index: u32,
    duration_s: f64,
    session_seed: u64,
) -> SessionRecording {
    assert!(duration_s > 0.0, "duration_s must be positive");
    let n = (duration_s * NOMINAL_RATE_HZ).round() as usize;

    let mut streams = BTreeMap::new();
    streams.insert(StreamKind::Head, head_stream(p, n, derive_seed(session_seed, "head")));
    streams.insert(StreamKind::Gaze, gaze_stream(p, n, derive_seed(session_seed, "gaze")));
    streams.insert(
        StreamKind::LeftHand,
        hand_stream(p, n, -1.0, StreamKind::LeftHand, derive_seed(session_seed, "left_hand")),
    );
    streams.insert(
        StreamKind::RightHand,
        hand_stream(p, n, 1.0, StreamKind::RightHand, derive_seed(session_seed, "right_hand")),
    );

    SessionRecording { subject_id: p.subject_id.clone(), session_index, streams }
}

/// Mean-reverting drift: w[t+1] = a·w[t] + sigma·N(0,1).
fn ou_walk(rng: &mut ChaCha12Rng, n: usize, a: f64, sigma: f64) -> Vec<f64> {
    let mut w = Vec::with_capacity(n);
    let mut cur = 0.0;
    for _ in 0..n {
        w.push(cur);
        let z: f64 = rng.sample(StandardNormal);
        cur = a * cur + sigma * z;
    }
    w
}

fn head_stream(p: &SubjectProfile, n: usize, seed: u64) -> TimeSeries {
    let mut rng = rng_for(seed);
    let posture: f64 = rng.random_range(-0.002..0.002);
    let phase_y: f64 = rng.random_range(0.0..TAU);
    let phase_x: f64 = rng.random_range(0.0..TAU);
    let phase_z: f64 = rng.random_range(0.0..TAU);
    // Fast-mixing wander: the correlation time stays well under the 5 s
    // analysis window, so window statistics carry no session-level offset.
    let wy = ou_walk(&mut rng, n, 0.99, 0.0005);
    let wx = ou_walk(&mut rng, n, 0.98, 0.001);
    let wz = ou_walk(&mut rng, n, 0.98, 0.001);

    // Sway traces an ellipse: the horizontal and depth components oscillate
    // at the same frequency with their own phases and smaller amplitudes.
    let omega = TAU * p.sway_frequency_hz / NOMINAL_RATE_HZ;
    let shape = p.sway_shape;
    let wave = |ph: f64| (1.0 - shape) * ph.sin() + shape * (2.0 * ph).sin();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for t in 0..n {
        let ph = omega * t as f64;
        x.push(0.8 * p.sway_amplitude_m * wave(ph + phase_x) + wx[t]);
        y.push(p.height_m + posture + p.sway_amplitude_m * wave(ph + phase_y) + wy[t]);
        z.push(0.6 * p.sway_amplitude_m * wave(ph + phase_z) + wz[t]);
    }
    TimeSeries::dense(StreamKind::Head, NOMINAL_RATE_HZ, vec![x, y, z])
}

fn gaze_stream(p: &SubjectProfile, n: usize, seed: u64) -> TimeSeries {
    let mut rng = rng_for(seed);
    let center_h: f64 = rng.random_range(-10.0..10.0);
    let center_v: f64 = rng.random_range(-8.0..8.0);
    // Habitual scanning radius: saccades aim back toward the fixation
    // center once the excursion exceeds it. This low-frequency trait is
    // what survives heavy stream smoothing.
    let scan_radius_deg =
        (p.saccade_amplitude_deg * p.saccade_rate_hz).clamp(5.0, 32.0);

    // Saccade displacement steps, two samples per event so the angular speed
    // clears the 100°/s detector threshold on consecutive samples.
    let mut steps_h = vec![0.0; n];
    let mut steps_v = vec![0.0; n];
    let mut pos_h = center_h;
    let mut pos_v = center_v;
    let gap = |rng: &mut ChaCha12Rng| -> usize {
        let interval_s = (0.75 + 0.5 * rng.random_range(0.0..1.0)) / p.saccade_rate_hz;
        ((interval_s * NOMINAL_RATE_HZ).round() as usize).max(3)
    };
    let mut t = gap(&mut rng);
    while t + 1 < n {
        let amp = p.saccade_amplitude_deg * rng.random_range(0.8..1.2);
        let off_h = pos_h - center_h;
        let off_v = pos_v - center_v;
        let dir = if off_h.hypot(off_v) > scan_radius_deg {
            (center_v - pos_v).atan2(center_h - pos_h) + rng.random_range(-0.8..0.8)
        } else {
            rng.random_range(0.0..TAU)
        };
        let dh = amp * dir.cos();
        let dv = amp * dir.sin();
        steps_h[t] += dh / 2.0;
        steps_h[t + 1] += dh / 2.0;
        steps_v[t] += dv / 2.0;
        steps_v[t + 1] += dv / 2.0;
        pos_h += dh;
        pos_v += dv;
        t += gap(&mut rng);
    }

    let mut acc_h = center_h;
    let mut acc_v = center_v;
    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let mut gz = Vec::with_capacity(n);
    for t in 0..n {
        acc_h += steps_h[t];
        acc_v += steps_v[t];
        let nh: f64 = rng.sample(StandardNormal);
        let nv: f64 = rng.sample(StandardNormal);
        let theta = (acc_h + p.fixation_noise_deg * nh).to_radians();
        let phi = (acc_v + p.fixation_noise_deg * nv).to_radians();
        gx.push(phi.cos() * theta.sin());
        gy.push(phi.sin());
        gz.push(phi.cos() * theta.cos());
    }
    TimeSeries::dense(StreamKind::Gaze, NOMINAL_RATE_HZ, vec![gx, gy, gz])
}

fn hand_stream(p: &SubjectProfile, n: usize, side: f64, kind: StreamKind, seed: u64) -> TimeSeries {
    let mut rng = rng_for(seed);
    // Anchors keep the left/right hand spread close to standing height, so
    // an assumed 1:1 height-to-wingspan ratio holds on synthetic data.
    let extension: f64 = 0.90 + rng.random_range(-0.015..0.015);
    let anchor_x = side * 0.5 * p.height_m * p.arm_scale * extension;
    let anchor_y = 0.55 * p.height_m + rng.random_range(-0.01..0.01);
    let anchor_z = 0.15 * p.height_m + rng.random_range(-0.01..0.01);
    let phases: [f64; 3] = [
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
        rng.random_range(0.0..TAU),
    ];
    let drift: [Vec<f64>; 3] = [
        ou_walk(&mut rng, n, 0.99, 0.0015),
        ou_walk(&mut rng, n, 0.99, 0.0015),
        ou_walk(&mut rng, n, 0.99, 0.0015),
    ];

    let anchors = [anchor_x, anchor_y, anchor_z];
    let mut components = vec![Vec::with_capacity(n); 3];
    for t in 0..n {
        for c in 0..3 {
            let tremor = p.tremor_amplitude_m
                * (TAU * p.tremor_frequency_hz * t as f64 / NOMINAL_RATE_HZ + phases[c]).sin();
            components[c].push(anchors[c] + tremor + drift[c][t]);
        }
    }
    TimeSeries::dense(kind, NOMINAL_RATE_HZ, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::gaze_to_angles;

    /// Counts gaze events whose angular speed exceeds 100°/s for at least
    /// two consecutive samples.
    fn count_saccades(gaze: &TimeSeries) -> usize {
        let angles = gaze_to_angles(gaze).unwrap();
        let h = &angles.components[0];
        let v = &angles.components[1];
        let mut run = 0usize;
        let mut count = 0usize;
        for t in 1..angles.len() {
            let speed =
                ((h[t] - h[t - 1]).hypot(v[t] - v[t - 1])) * NOMINAL_RATE_HZ;
            if speed > 100.0 {
                run += 1;
                if run == 2 {
                    count += 1;
                }
            } else {
                run = 0;
            }
        }
        count
    }

    fn profile(seed: u64) -> SubjectProfile {
        SubjectProfile {
            subject_id: "S001".into(),
            height_m: 1.60,
            arm_scale: 1.0,
            sway_amplitude_m: 0.015,
            sway_frequency_hz: 0.3,
            sway_shape: 0.2,
            saccade_rate_hz: 2.0,
            saccade_amplitude_deg: 8.0,
            fixation_noise_deg: 0.05,
            tremor_amplitude_m: 0.006,
            tremor_frequency_hz: 4.0,
            seed,
        }
    }

    #[test]
    fn population_has_expected_shape() {
        let cfg = GeneratorConfig {
            n_subjects: 38,
            sessions_per_subject: 2,
            session_duration_s: 15.0,
            identity_strength: 1.0,
            master_seed: 7,
        };
        let d = generate_population(&cfg).unwrap();
        assert_eq!(d.recordings.len(), 76);
        assert_eq!(d.subjects().len(), 38);
        d.validate().unwrap();
        for r in &d.recordings {
            assert_eq!(r.streams.len(), 4);
            assert_eq!(r.sample_count(), 1350);
            for s in r.streams.values() {
                assert_eq!(s.len(), 1350);
            }
        }
    }

    #[test]
    fn zero_strength_collapses_between_subject_variance() {
        let cfg = GeneratorConfig {
            n_subjects: 6,
            sessions_per_subject: 2,
            session_duration_s: 15.0,
            identity_strength: 0.0,
            master_seed: 3,
        };
        let d = generate_population(&cfg).unwrap();
        // All subjects share parameters, so session-averaged head height must
        // match across subjects up to session noise (< 2 cm spread).
        let mut means = Vec::new();
        for subject in d.subjects() {
            for r in d.sessions_of(&subject) {
                let y = &r.stream(StreamKind::Head).unwrap().components[1];
                means.push(y.iter().sum::<f64>() / y.len() as f64);
            }
        }
        let lo = means.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo < 0.04, "spread {}", hi - lo);
    }

    #[test]
    fn same_config_is_bit_identical() {
        let cfg = GeneratorConfig {
            n_subjects: 4,
            sessions_per_subject: 2,
            session_duration_s: 15.0,
            identity_strength: 0.7,
            master_seed: 11,
        };
        let a = generate_population(&cfg).unwrap();
        let b = generate_population(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn head_mean_tracks_profile_height() {
        let p = profile(5);
        let r = generate_session(&p, 1, 60.0, 42);
        let y = &r.stream(StreamKind::Head).unwrap().components[1];
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.60).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn session_sample_count_matches_duration() {
        let p = profile(5);
        let r = generate_session(&p, 1, 15.0, 42);
        assert_eq!(r.sample_count(), 1350);
    }

    #[test]
    fn saccade_rate_is_within_twenty_percent() {
        for seed in [1u64, 2, 3, 4, 5] {
            let p = profile(seed);
            let r = generate_session(&p, 1, 60.0, seed * 97 + 1);
            let count = count_saccades(r.stream(StreamKind::Gaze).unwrap());
            let expected = 2.0 * 60.0;
            assert!(
                (count as f64 - expected).abs() <= 0.2 * expected,
                "seed {seed}: {count} saccades, expected {expected} ± 20%"
            );
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = GeneratorConfig::default();
        cfg.n_subjects = 1;
        assert!(matches!(
            generate_population(&cfg),
            Err(SynthError::InvalidConfig(_))
        ));
        let mut cfg = GeneratorConfig::default();
        cfg.session_duration_s = 10.0;
        assert!(generate_population(&cfg).is_err());
        let mut cfg = GeneratorConfig::default();
        cfg.identity_strength = 1.5;
        assert!(generate_population(&cfg).is_err());
    }

    #[test]
    fn hand_spread_approximates_height() {
        let p = profile(9);
        let r = generate_session(&p, 1, 30.0, 123);
        let lx = &r.stream(StreamKind::LeftHand).unwrap().components[0];
        let rx = &r.stream(StreamKind::RightHand).unwrap().components[0];
        let spread: f64 = lx
            .iter()
            .zip(rx)
            .map(|(l, r)| (r - l).abs())
            .sum::<f64>()
            / lx.len() as f64;
        assert!((spread - p.height_m).abs() / p.height_m < 0.2, "spread {spread}");
    }
}
