//! Window construction: gaze angles → Savitzky-Golay velocity → clamp →
//! non-overlapping 450-sample windows → per-channel normalization, with raw
//! motion positions appended as additional channels.
//!
//! Channel order is fixed as
//! `[gaze_vx, gaze_vy, head_x, head_y, head_z, lhand_x, lhand_y, lhand_z,
//! rhand_x, rhand_y, rhand_z]`, restricted to the selection. Gaze velocity
//! channels are z-normalized with training-set statistics; motion channels
//! pass through raw. Masked samples travel as NaN until normalization maps
//! every non-finite value to zero.

use crate::model::{SessionRecording, StreamKind, TimeSeries};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Samples per window (5 s at 90 Hz).
pub const WINDOW_LEN: usize = 450;
/// Velocity clamp, degrees per second.
pub const VELOCITY_CLAMP_DEG_S: f64 = 1000.0;
/// Savitzky-Golay differentiation defaults.
pub const SG_ORDER: usize = 2;
pub const SG_WINDOW: usize = 7;

const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("series too short for the derivative window: {len} < {window}")]
    TooShort { len: usize, window: usize },
    #[error("no training windows to fit normalization stats")]
    NoTrainingData,
    #[error("stats cover {expected} channels but the window has {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("selected stream {0:?} is missing from the recording")]
    MissingStream(StreamKind),
    #[error("gaze stream must have 2 or 3 components, got {0}")]
    BadGazeArity(usize),
    #[error("channel selection selects no streams")]
    EmptySelection,
    #[error("derivative window must be odd and larger than the polynomial order")]
    BadDerivativeConfig,
}

/// Which streams contribute channels to a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSelection {
    pub include_gaze: bool,
    pub include_head: bool,
    pub include_hands: bool,
}

impl ChannelSelection {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if !self.include_gaze && !self.include_head && !self.include_hands {
            return Err(FeatureError::EmptySelection);
        }
        Ok(())
    }

    /// 2 gaze + 3 head + 6 hand channels, restricted to the selection.
    pub fn channel_count(&self) -> usize {
        2 * usize::from(self.include_gaze)
            + 3 * usize::from(self.include_head)
            + 6 * usize::from(self.include_hands)
    }

    pub fn channel_names(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        if self.include_gaze {
            names.extend(["gaze_vx", "gaze_vy"]);
        }
        if self.include_head {
            names.extend(["head_x", "head_y", "head_z"]);
        }
        if self.include_hands {
            names.extend([
                "lhand_x", "lhand_y", "lhand_z", "rhand_x", "rhand_y", "rhand_z",
            ]);
        }
        names
    }

    /// Number of leading channels that are gaze velocities.
    pub fn gaze_channel_count(&self) -> usize {
        2 * usize::from(self.include_gaze)
    }

    pub fn streams(&self) -> Vec<StreamKind> {
        let mut v = Vec::new();
        if self.include_gaze {
            v.push(StreamKind::Gaze);
        }
        if self.include_head {
            v.push(StreamKind::Head);
        }
        if self.include_hands {
            v.push(StreamKind::LeftHand);
            v.push(StreamKind::RightHand);
        }
        v
    }
}

/// A fixed-length multichannel slice: the biometric unit of analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelWindow {
    pub subject_id: String,
    pub session_index: u32,
    pub window_index: usize,
    /// `channels[c]` holds [`WINDOW_LEN`] samples.
    pub channels: Vec<Vec<f64>>,
}

/// Per-channel normalization statistics fit on training data. Motion
/// channels carry identity stats (mean 0, std 1) so the code path is
/// uniform; only gaze velocity channels are actually standardized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    /// (mean, population std) per channel, in channel order.
    pub per_channel: Vec<(f64, f64)>,
}

/// Converts a 3-component gaze direction stream to two angle channels in
/// degrees: horizontal = atan2(x, z), vertical = asin(y / ‖v‖). A
/// 2-component stream is taken as pre-computed angles and passed through.
/// Near-zero vectors mask the output sample instead of failing.
pub fn gaze_to_angles(g: &TimeSeries) -> Result<TimeSeries, FeatureError> {
    match g.arity() {
        2 => Ok(g.clone()),
        3 => {
            let n = g.len();
            let mut h = Vec::with_capacity(n);
            let mut v = Vec::with_capacity(n);
            let mut missing = g.missing.clone();
            for t in 0..n {
                let (x, y, z) =
                    (g.components[0][t], g.components[1][t], g.components[2][t]);
                let norm = (x * x + y * y + z * z).sqrt();
                if missing[t] || norm < 1e-12 {
                    missing[t] = true;
                    h.push(0.0);
                    v.push(0.0);
                } else {
                    h.push(x.atan2(z).to_degrees());
                    v.push((y / norm).asin().to_degrees());
                }
            }
            Ok(TimeSeries::new(StreamKind::Gaze, g.rate_hz, vec![h, v], missing))
        }
        a => Err(FeatureError::BadGazeArity(a)),
    }
}

/// First-derivative convolution coefficients of a least-squares polynomial
/// fit of `order` over `window` points, with the derivative evaluated
/// `offset` samples from the window center. `offset = 0` gives the usual
/// interior coefficients; nonzero offsets handle the edges.
pub fn sg_derivative_coefficients(
    order: usize,
    window: usize,
    offset: i64,
) -> Result<Vec<f64>, FeatureError> {
    if window % 2 == 0 || window <= order {
        return Err(FeatureError::BadDerivativeConfig);
    }
    let half = (window / 2) as i64;
    let m = order + 1;

    // Normal equations G a = Aᵀ x with A the Vandermonde design matrix.
    let mut g = vec![vec![0.0; m]; m];
    for row in 0..m {
        for col in 0..m {
            g[row][col] = (-half..=half)
                .map(|j| (j as f64).powi((row + col) as i32))
                .sum();
        }
    }
    // Derivative functional of the fitted polynomial at `offset`.
    let mut q = vec![0.0; m];
    for (p, qv) in q.iter_mut().enumerate().skip(1) {
        *qv = p as f64 * (offset as f64).powi(p as i32 - 1);
    }
    let y = solve_linear(g, q);
    Ok((-half..=half)
        .map(|j| (0..m).map(|p| y[p] * (j as f64).powi(p as i32)).sum())
        .collect())
}

/// Gaussian elimination with partial pivoting; the normal matrices here are
/// tiny and well conditioned.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / diag;
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Savitzky-Golay first derivative of one channel, scaled to units per
/// second. Edge samples reuse the nearest full window's fit evaluated at the
/// edge offset, so output length equals input length. Any NaN inside a
/// window makes that output sample NaN.
pub fn sg_derivative(
    x: &[f64],
    order: usize,
    window: usize,
    rate_hz: f64,
) -> Result<Vec<f64>, FeatureError> {
    if window % 2 == 0 || window <= order {
        return Err(FeatureError::BadDerivativeConfig);
    }
    let n = x.len();
    if n < window {
        return Err(FeatureError::TooShort { len: n, window });
    }
    let half = window / 2;
    let coeffs: Vec<Vec<f64>> = (-(half as i64)..=half as i64)
        .map(|d| sg_derivative_coefficients(order, window, d).expect("validated above"))
        .collect();

    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let (start, offset) = if t < half {
            (0, t as i64 - half as i64)
        } else if t + half >= n {
            (n - window, t as i64 - (n - window + half) as i64)
        } else {
            (t - half, 0)
        };
        let c = &coeffs[(offset + half as i64) as usize];
        let mut acc = 0.0;
        for (j, cj) in c.iter().enumerate() {
            acc += cj * x[start + j];
        }
        out.push(acc * rate_hz);
    }
    Ok(out)
}

/// Clamps a velocity channel to ±limit; NaN samples stay NaN.
pub fn clamp_velocity(v: &[f64], limit: f64) -> Vec<f64> {
    v.iter().map(|&x| x.clamp(-limit, limit)).collect()
}

/// Splits aligned channels into non-overlapping fixed-length windows,
/// discarding the trailing remainder.
pub fn window_session(
    channels: &[Vec<f64>],
    subject_id: &str,
    session_index: u32,
    len: usize,
) -> Vec<ChannelWindow> {
    let n = channels.first().map_or(0, Vec::len);
    let count = n / len;
    (0..count)
        .map(|w| ChannelWindow {
            subject_id: subject_id.to_string(),
            session_index,
            window_index: w,
            channels: channels
                .iter()
                .map(|c| c[w * len..(w + 1) * len].to_vec())
                .collect(),
        })
        .collect()
}

fn kahan_add(sum: &mut f64, comp: &mut f64, value: f64) {
    let y = value - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

/// Fits per-gaze-channel mean and population standard deviation over every
/// sample of the training windows (NaN samples are skipped); motion channels
/// get identity stats. Accumulation is compensated, so the result does not
/// depend on reduction order.
pub fn fit_norm_stats<'a, I>(
    windows: I,
    selection: &ChannelSelection,
) -> Result<NormStats, FeatureError>
where
    I: IntoIterator<Item = &'a ChannelWindow>,
    I::IntoIter: Clone,
{
    selection.validate()?;
    let iter = windows.into_iter();
    let channels = selection.channel_count();
    let gaze_channels = selection.gaze_channel_count();
    let mut per_channel = vec![(0.0, 1.0); channels];
    if gaze_channels == 0 {
        return Ok(NormStats { per_channel });
    }
    if iter.clone().next().is_none() {
        return Err(FeatureError::NoTrainingData);
    }

    for c in 0..gaze_channels {
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut count = 0u64;
        for w in iter.clone() {
            for &v in &w.channels[c] {
                if v.is_finite() {
                    kahan_add(&mut sum, &mut comp, v);
                    count += 1;
                }
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let mut sq = 0.0;
        let mut sq_comp = 0.0;
        for w in iter.clone() {
            for &v in &w.channels[c] {
                if v.is_finite() {
                    let d = v - mean;
                    kahan_add(&mut sq, &mut sq_comp, d * d);
                }
            }
        }
        let std = if count > 0 { (sq / count as f64).sqrt() } else { 0.0 };
        per_channel[c] = (mean, if std < DEGENERATE_STD { 1.0 } else { std });
    }
    Ok(NormStats { per_channel })
}

/// Standardizes gaze channels with the training stats, leaves motion
/// channels untouched, and zeroes every non-finite sample. Output windows
/// never contain NaN.
pub fn normalize_window(
    w: &ChannelWindow,
    stats: &NormStats,
) -> Result<ChannelWindow, FeatureError> {
    if stats.per_channel.len() != w.channels.len() {
        return Err(FeatureError::ArityMismatch {
            expected: stats.per_channel.len(),
            got: w.channels.len(),
        });
    }
    let mut out = w.clone();
    for (c, channel) in out.channels.iter_mut().enumerate() {
        let (mean, std) = stats.per_channel[c];
        for v in channel.iter_mut() {
            let x = (*v - mean) / std;
            *v = if x.is_finite() { x } else { 0.0 };
        }
    }
    Ok(out)
}

/// Full-length NaN-carrying channels for one recording under a selection.
fn assemble_channels(
    r: &SessionRecording,
    selection: &ChannelSelection,
) -> Result<Vec<Vec<f64>>, FeatureError> {
    let mut channels = Vec::with_capacity(selection.channel_count());
    if selection.include_gaze {
        let gaze = r.stream(StreamKind::Gaze).ok_or(FeatureError::MissingStream(StreamKind::Gaze))?;
        let angles = gaze_to_angles(gaze)?;
        for c in 0..2 {
            let with_nan = angles.component_with_nan(c);
            let vel = sg_derivative(&with_nan, SG_ORDER, SG_WINDOW, angles.rate_hz)?;
            channels.push(clamp_velocity(&vel, VELOCITY_CLAMP_DEG_S));
        }
    }
    if selection.include_head {
        let head = r.stream(StreamKind::Head).ok_or(FeatureError::MissingStream(StreamKind::Head))?;
        for c in 0..3 {
            channels.push(head.component_with_nan(c));
        }
    }
    if selection.include_hands {
        for kind in [StreamKind::LeftHand, StreamKind::RightHand] {
            let hand = r.stream(kind).ok_or(FeatureError::MissingStream(kind))?;
            for c in 0..3 {
                channels.push(hand.component_with_nan(c));
            }
        }
    }
    Ok(channels)
}

/// Runs the full pipeline for one recording. With `stats = None` the windows
/// come back unnormalized (and may contain NaN), which is how training
/// windows are produced before [`fit_norm_stats`]; passing stats yields
/// normalized NaN-free windows.
pub fn build_windows(
    r: &SessionRecording,
    selection: &ChannelSelection,
    stats: Option<&NormStats>,
) -> Result<Vec<ChannelWindow>, FeatureError> {
    selection.validate()?;
    let channels = assemble_channels(r, selection)?;
    let windows = window_session(&channels, &r.subject_id, r.session_index, WINDOW_LEN);
    match stats {
        None => Ok(windows),
        Some(s) => windows.iter().map(|w| normalize_window(w, s)).collect(),
    }
}

/// Debug export: one row per sample with the channel order documented in a
/// leading comment line.
pub fn windows_to_csv(windows: &[ChannelWindow], names: &[&str]) -> String {
    let mut out = format!("# channels: {}\n", names.join(","));
    out += "subject,session,window,sample";
    for n in names {
        out += &format!(",{n}");
    }
    out.push('\n');
    for w in windows {
        for t in 0..WINDOW_LEN.min(w.channels.first().map_or(0, Vec::len)) {
            out += &format!("{},{},{},{t}", w.subject_id, w.session_index, w.window_index);
            for c in &w.channels {
                out += &format!(",{}", c[t]);
            }
            out.push('\n');
        }
    }
    out
}
