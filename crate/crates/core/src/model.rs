//! Telemetry data model: streams, session recordings, datasets, and the
//! subject inclusion rules applied before any evaluation runs.
//!
//! Positional streams store components in `[horizontal x, vertical y,
//! depth z]` order, in meters. Gaze streams carry either a 3-component
//! direction vector in the same axes or a pre-computed pair of angles in
//! degrees; everything downstream of [`crate::features::gaze_to_angles`]
//! works on angles.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Nominal sample rate of the telemetry this crate works with.
pub const NOMINAL_RATE_HZ: f64 = 90.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("column {0:?} is missing from the input header")]
    MissingColumn(String),
    #[error("no valid rows found in the input")]
    EmptyDataset,
    #[error(
        "declared rate {declared} Hz differs from inferred rate {inferred:.2} Hz by more than 5%"
    )]
    RateMismatch { declared: f64, inferred: f64 },
    #[error("session has no samples after alignment")]
    EmptySession,
    #[error("duplicate recording for subject {subject} session {session}")]
    DuplicateRecording { subject: String, session: u32 },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The four telemetry streams a session can carry.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Gaze,
    Head,
    LeftHand,
    RightHand,
}

impl StreamKind {
    pub const ALL: [StreamKind; 4] = [
        StreamKind::Gaze,
        StreamKind::Head,
        StreamKind::LeftHand,
        StreamKind::RightHand,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StreamKind::Gaze => "gaze",
            StreamKind::Head => "head",
            StreamKind::LeftHand => "left_hand",
            StreamKind::RightHand => "right_hand",
        }
    }
}

/// One sensor stream: column-major samples plus a per-sample missing mask.
///
/// `components[c][t]` is component `c` of the sample at index `t`; the
/// timestamp of sample `t` is `t / rate_hz`. A masked sample keeps a `0.0`
/// placeholder value that no computation reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub kind: StreamKind,
    pub rate_hz: f64,
    pub components: Vec<Vec<f64>>,
    pub missing: Vec<bool>,
}

impl TimeSeries {
    pub fn new(
        kind: StreamKind,
        rate_hz: f64,
        components: Vec<Vec<f64>>,
        missing: Vec<bool>,
    ) -> Self {
        assert!(rate_hz > 0.0, "rate_hz must be positive");
        assert!(!components.is_empty(), "a stream needs at least one component");
        for c in &components {
            assert_eq!(c.len(), missing.len(), "component/mask length mismatch");
        }
        Self { kind, rate_hz, components, missing }
    }

    /// Convenience constructor for a fully observed stream.
    pub fn dense(kind: StreamKind, rate_hz: f64, components: Vec<Vec<f64>>) -> Self {
        let n = components.first().map_or(0, Vec::len);
        Self::new(kind, rate_hz, components, vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz
    }

    pub fn truncate(&mut self, len: usize) {
        for c in &mut self.components {
            c.truncate(len);
        }
        self.missing.truncate(len);
    }

    /// One component as a vector with masked samples replaced by NaN.
    pub fn component_with_nan(&self, c: usize) -> Vec<f64> {
        self.components[c]
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { f64::NAN } else { v })
            .collect()
    }
}

/// One subject's one-session telemetry; all streams share a sample count
/// once [`align_streams`] has run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecording {
    pub subject_id: String,
    pub session_index: u32,
    pub streams: BTreeMap<StreamKind, TimeSeries>,
}

impl SessionRecording {
    pub fn stream(&self, kind: StreamKind) -> Option<&TimeSeries> {
        self.streams.get(&kind)
    }

    /// Shortest sample count across streams (they are equal after alignment).
    pub fn sample_count(&self) -> usize {
        self.streams.values().map(TimeSeries::len).min().unwrap_or(0)
    }

    pub fn duration_s(&self) -> f64 {
        self.streams
            .values()
            .next()
            .map_or(0.0, |s| self.sample_count() as f64 / s.rate_hz)
    }
}

/// A collection of session recordings across subjects.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub recordings: Vec<SessionRecording>,
}

impl Dataset {
    /// Sorted unique subject ids.
    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&str> =
            self.recordings.iter().map(|r| r.subject_id.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// A subject's recordings ordered by session index.
    pub fn sessions_of(&self, subject: &str) -> Vec<&SessionRecording> {
        let mut v: Vec<&SessionRecording> = self
            .recordings
            .iter()
            .filter(|r| r.subject_id == subject)
            .collect();
        v.sort_by_key(|r| r.session_index);
        v
    }

    /// Rejects datasets where two recordings share (subject, session).
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for r in &self.recordings {
            if !seen.insert((r.subject_id.clone(), r.session_index)) {
                return Err(ModelError::DuplicateRecording {
                    subject: r.subject_id.clone(),
                    session: r.session_index,
                });
            }
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.recordings.iter().map(SessionRecording::duration_s).sum()
    }
}

/// Keeps only subjects with at least `min_sessions` recordings, every one of
/// which lasts at least `min_duration_s`. Order-preserving. The boundary is
/// inclusive: a recording of exactly `min_duration_s` qualifies.
pub fn filter_subjects(d: &Dataset, min_sessions: usize, min_duration_s: f64) -> Dataset {
    let mut session_count: BTreeMap<&str, usize> = BTreeMap::new();
    let mut all_long_enough: BTreeMap<&str, bool> = BTreeMap::new();
    for r in &d.recordings {
        *session_count.entry(&r.subject_id).or_insert(0) += 1;
        let ok = r.duration_s() >= min_duration_s;
        all_long_enough
            .entry(&r.subject_id)
            .and_modify(|v| *v &= ok)
            .or_insert(ok);
    }
    let keep: BTreeSet<&str> = session_count
        .iter()
        .filter(|(s, &n)| n >= min_sessions && all_long_enough[*s])
        .map(|(&s, _)| s)
        .collect();
    Dataset {
        recordings: d
            .recordings
            .iter()
            .filter(|r| keep.contains(r.subject_id.as_str()))
            .cloned()
            .collect(),
    }
}

/// Truncates every stream to the shortest common length, preserving masks.
pub fn align_streams(r: &SessionRecording) -> Result<SessionRecording, ModelError> {
    let min_len = r.streams.values().map(TimeSeries::len).min().unwrap_or(0);
    if min_len == 0 {
        return Err(ModelError::EmptySession);
    }
    let mut out = r.clone();
    for s in out.streams.values_mut() {
        s.truncate(min_len);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(kind: StreamKind, n: usize) -> TimeSeries {
        TimeSeries::dense(kind, NOMINAL_RATE_HZ, vec![vec![0.0; n]; 3])
    }

    fn recording(subject: &str, session: u32, n: usize) -> SessionRecording {
        let mut streams = BTreeMap::new();
        for kind in StreamKind::ALL {
            streams.insert(kind, series(kind, n));
        }
        SessionRecording { subject_id: subject.into(), session_index: session, streams }
    }

    #[test]
    fn filter_drops_subject_with_one_short_session() {
        // 20 s and 14 s at 90 Hz
        let d = Dataset {
            recordings: vec![recording("a", 1, 1800), recording("a", 2, 1260)],
        };
        let out = filter_subjects(&d, 2, 15.0);
        assert!(out.recordings.is_empty());
    }

    #[test]
    fn filter_boundary_is_inclusive() {
        // exactly 15 s twice
        let d = Dataset {
            recordings: vec![recording("a", 1, 1350), recording("a", 2, 1350)],
        };
        let out = filter_subjects(&d, 2, 15.0);
        assert_eq!(out.recordings.len(), 2);
    }

    #[test]
    fn filter_is_identity_on_compliant_data() {
        let d = Dataset {
            recordings: vec![
                recording("a", 1, 1800),
                recording("a", 2, 1800),
                recording("b", 1, 2700),
                recording("b", 2, 1350),
            ],
        };
        let out = filter_subjects(&d, 2, 15.0);
        assert_eq!(out, d);
    }

    #[test]
    fn filter_result_passes_a_rescan() {
        let d = Dataset {
            recordings: vec![
                recording("a", 1, 1800),
                recording("a", 2, 900),
                recording("b", 1, 1800),
                recording("b", 2, 1800),
                recording("c", 1, 1800),
            ],
        };
        let out = filter_subjects(&d, 2, 15.0);
        for subject in out.subjects() {
            let sessions = out.sessions_of(&subject);
            assert!(sessions.len() >= 2);
            assert!(sessions.iter().all(|r| r.duration_s() >= 15.0));
        }
        assert_eq!(out.subjects(), vec!["b".to_string()]);
    }

    #[test]
    fn align_truncates_to_min_length() {
        let mut r = recording("a", 1, 900);
        r.streams.get_mut(&StreamKind::Head).unwrap().truncate(899);
        let out = align_streams(&r).unwrap();
        let lens: Vec<usize> = out.streams.values().map(TimeSeries::len).collect();
        assert_eq!(lens, vec![899; 4]);
    }

    #[test]
    fn align_is_identity_for_equal_lengths() {
        let r = recording("a", 1, 900);
        assert_eq!(align_streams(&r).unwrap(), r);
    }

    #[test]
    fn align_rejects_empty_stream() {
        let mut r = recording("a", 1, 900);
        r.streams.get_mut(&StreamKind::Head).unwrap().truncate(0);
        assert!(matches!(align_streams(&r), Err(ModelError::EmptySession)));
    }

    #[test]
    fn duplicate_recordings_are_rejected() {
        let d = Dataset {
            recordings: vec![recording("a", 1, 90), recording("a", 1, 90)],
        };
        assert!(matches!(
            d.validate(),
            Err(ModelError::DuplicateRecording { .. })
        ));
    }
}
