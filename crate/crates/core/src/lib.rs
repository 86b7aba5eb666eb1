//! Desk-scale evaluation of cross-sensor privacy leakage in VR telemetry.
//!
//! The crate ingests (or synthesizes) gaze/head/hand recordings, applies
//! per-stream privacy mechanisms, turns sessions into fixed-length
//! multichannel windows, runs template-based verification and identification
//! over every privatized/unprotected stream combination, and reports EER and
//! Rank-1 identification rate per experiment.
//!
//! Module map:
//!
//! - [`model`]: stream/session/dataset types and the subject inclusion rules
//! - [`io`]: CSV ingestion and export with a declarative column schema
//! - [`synth`]: seeded synthetic populations with a tunable identity signal
//! - [`privacy`]: gaze smoothing and bounded-Laplace motion privatization
//! - [`features`]: gaze-velocity/window/normalization pipeline
//! - [`biometric`]: statistical embedder, templates, cosine matching, folds
//! - [`metrics`]: ROC, EER, Rank-1 IR, fold aggregation
//! - [`experiment`]: the E01-E20 matrix, runner, and report emission
//!
//! All randomness flows through [`rng`]: ChaCha12 streams keyed by seeds
//! derived from (master seed, subject id, session index, purpose tag), so
//! results are reproducible regardless of thread count.

pub mod biometric;
pub mod experiment;
pub mod features;
pub mod io;
pub mod metrics;
pub mod model;
pub mod privacy;
pub mod rng;
pub mod synth;

pub use biometric::{EmbeddingVector, EnrollmentTemplate, FoldAssignment};
pub use experiment::{ExperimentResult, ExperimentSpec, Report, StreamState};
pub use features::{ChannelSelection, ChannelWindow, NormStats};
pub use metrics::{MetricSummary, ScoreSet};
pub use model::{Dataset, SessionRecording, StreamKind, TimeSeries};
pub use privacy::{AnthropometricEstimate, PrivacyConfig};
pub use synth::{GeneratorConfig, SubjectProfile};
