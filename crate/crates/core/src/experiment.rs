//! The E01-E20 experiment matrix: stream-state specs, the parity rule,
//! fold orchestration, metric aggregation, and report emission.
//!
//! Protocol per experiment: privacy is applied to every session (train and
//! test alike) before windows are built, with anthropometrics always
//! estimated from each subject's raw first session. Per fold, normalization
//! stats and the feature scaler are fit on training-subject windows only;
//! every subject is enrolled on their first session's windows and the
//! held-out subjects' second sessions supply the probes, so identification
//! runs against the full population gallery and chance is 1/n.

use crate::biometric::{
    assign_folds, embed_window, enroll, BiometricError, Embedder, EnrollmentTemplate,
    FeatureScaler, StatEmbedder,
};
use crate::features::{
    build_windows, fit_norm_stats, normalize_window, ChannelSelection, ChannelWindow,
    FeatureError,
};
use crate::metrics::{
    aggregate_folds, chance_levels, compute_eer, compute_rank1, FoldMetrics,
    IdentificationTrial, MetricError, MetricSummary, ScoreSet,
};
use crate::model::{Dataset, ModelError, SessionRecording};
use crate::privacy::{
    apply_privacy, estimate_anthropometrics, AnthropometricEstimate, MechanismParams,
    PrivacyConfig, PrivacyError,
};
use crate::rng::{content_hash, derive_seed, derive_seed_str};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub const REPORT_SCHEMA: &str = "leakage-report/v1";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("head and hand streams must share a privatization state, got {0}")]
    ParityViolation(String),
    #[error("experiment selects no streams")]
    EmptySelection,
    #[error("subject {0} lacks the two sessions needed for enroll/probe")]
    InsufficientSessions(String),
    #[error("duplicate experiment id {0}")]
    DuplicateExperimentId(String),
    #[error("runtime audit failed: {0}")]
    Audit(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Biometric(#[from] BiometricError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

/// How one stream enters an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamState {
    Unused,
    Unmodified,
    Privatized,
}

impl fmt::Display for StreamState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamState::Unused => "unused",
            StreamState::Unmodified => "unmodified",
            StreamState::Privatized => "privatized",
        })
    }
}

/// One cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment_id: String,
    pub gaze: StreamState,
    pub head: StreamState,
    /// Covers both hands.
    pub hand: StreamState,
    #[serde(default)]
    pub privacy: MechanismParams,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn selection(&self) -> ChannelSelection {
        ChannelSelection {
            include_gaze: self.gaze != StreamState::Unused,
            include_head: self.head != StreamState::Unused,
            include_hands: self.hand != StreamState::Unused,
        }
    }
}

/// Rejects parity violations and empty selections.
pub fn validate_spec(spec: &ExperimentSpec) -> Result<(), ExperimentError> {
    if spec.gaze == StreamState::Unused
        && spec.head == StreamState::Unused
        && spec.hand == StreamState::Unused
    {
        return Err(ExperimentError::EmptySelection);
    }
    if spec.head != StreamState::Unused
        && spec.hand != StreamState::Unused
        && spec.head != spec.hand
    {
        return Err(ExperimentError::ParityViolation(format!(
            "head {} vs hand {}",
            spec.head, spec.hand
        )));
    }
    spec.privacy.validate()?;
    Ok(())
}

/// The twenty configurations of the standard matrix: E01-E07 unmodified over
/// the seven stream subsets, E08-E14 the same subsets fully privatized,
/// E15-E20 the six mixed rows. Each spec derives its seed from its id, so
/// results do not depend on matrix order.
pub fn build_standard_matrix(seed: u64, params: &MechanismParams) -> Vec<ExperimentSpec> {
    use StreamState::{Privatized as P, Unmodified as U, Unused as N};
    let rows: [(&str, StreamState, StreamState, StreamState); 20] = [
        ("E01", U, N, N),
        ("E02", N, U, N),
        ("E03", N, N, U),
        ("E04", N, U, U),
        ("E05", U, U, N),
        ("E06", U, N, U),
        ("E07", U, U, U),
        ("E08", P, N, N),
        ("E09", N, P, N),
        ("E10", N, N, P),
        ("E11", N, P, P),
        ("E12", P, P, N),
        ("E13", P, N, P),
        ("E14", P, P, P),
        ("E15", P, U, N),
        ("E16", P, N, U),
        ("E17", P, U, U),
        ("E18", U, P, N),
        ("E19", U, N, P),
        ("E20", U, P, P),
    ];
    rows.iter()
        .map(|&(id, gaze, head, hand)| ExperimentSpec {
            experiment_id: id.to_string(),
            gaze,
            head,
            hand,
            privacy: *params,
            seed: derive_seed_str(seed, "experiment", id),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub eer_pct: f64,
    pub rank1_ir_pct: f64,
    pub genuine_scores: usize,
    pub impostor_scores: usize,
    pub identification_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub embedder: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment_id: String,
    pub gaze: StreamState,
    pub head: StreamState,
    pub hand: StreamState,
    pub folds: Vec<FoldOutcome>,
    pub summary: MetricSummary,
    pub chance_eer_pct: f64,
    pub chance_ir_pct: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub subjects: usize,
    pub recordings: usize,
    pub total_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub dataset: DatasetDescriptor,
    pub timestamp_s: u64,
    pub results: Vec<ExperimentResult>,
}

/// Per-fold score sets, exposed for ROC export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub fold: usize,
    pub scores: ScoreSet,
}

/// Runs one experiment over k subject-disjoint folds.
pub fn run_experiment(
    d: &Dataset,
    spec: &ExperimentSpec,
    k: usize,
) -> Result<ExperimentResult, ExperimentError> {
    run_experiment_with_scores(d, spec, k).map(|(result, _)| result)
}

/// Privatizes the dataset per the spec's stream states and restricts each
/// recording to the selected streams.
fn prepare_sessions(
    d: &Dataset,
    spec: &ExperimentSpec,
) -> Result<Vec<SessionRecording>, ExperimentError> {
    let motion_private =
        spec.head == StreamState::Privatized || spec.hand == StreamState::Privatized;
    let cfg = PrivacyConfig {
        gaze_private: spec.gaze == StreamState::Privatized,
        motion_private,
        params: spec.privacy,
        noise_seed: derive_seed(spec.seed, "noise"),
    };

    // Anthropometrics always come from each subject's raw first session.
    let mut estimates: BTreeMap<String, AnthropometricEstimate> = BTreeMap::new();
    if motion_private {
        for subject in d.subjects() {
            let first = d.sessions_of(&subject)[0];
            estimates
                .insert(subject.clone(), estimate_anthropometrics(first, cfg.params.bounds_m)?);
        }
    }

    let sel = spec.selection();
    let mut out = Vec::with_capacity(d.recordings.len());
    for r in &d.recordings {
        let privatized = apply_privacy(r, &cfg, estimates.get(&r.subject_id))?;
        let mut restricted = privatized;
        let wanted = sel.streams();
        restricted.streams.retain(|kind, _| wanted.contains(kind));
        out.push(restricted);
    }
    Ok(out)
}

/// As [`run_experiment`] but also returns the pooled genuine/impostor scores
/// per fold, for ROC export.
pub fn run_experiment_with_scores(
    d: &Dataset,
    spec: &ExperimentSpec,
    k: usize,
) -> Result<(ExperimentResult, Vec<FoldScores>), ExperimentError> {
    validate_spec(spec)?;
    let sel = spec.selection();
    let embedder = StatEmbedder;

    let sessions = prepare_sessions(d, spec)?;
    let mut windows: BTreeMap<(String, u32), Vec<ChannelWindow>> = BTreeMap::new();
    for r in &sessions {
        windows.insert(
            (r.subject_id.clone(), r.session_index),
            build_windows(r, &sel, None)?,
        );
    }

    let subjects = d.subjects();
    let folds = assign_folds(&subjects, k, derive_seed(spec.seed, "folds"))?;

    let mut fold_metrics = Vec::with_capacity(k);
    let mut fold_scores = Vec::with_capacity(k);
    for (fold_idx, fold) in folds.folds.iter().enumerate() {
        for t in &fold.test {
            if fold.train.contains(t) {
                return Err(ExperimentError::Audit(format!(
                    "subject {t} appears in both train and test of fold {fold_idx}"
                )));
            }
        }

        // Fit normalization stats and the feature scaler on training-subject
        // windows only.
        let train_windows: Vec<&ChannelWindow> = fold
            .train
            .iter()
            .flat_map(|s| {
                windows
                    .iter()
                    .filter(move |((subj, _), _)| subj == s)
                    .flat_map(|(_, w)| w.iter())
            })
            .collect();
        let stats = fit_norm_stats(train_windows.iter().copied(), &sel)?;
        let train_rows: Vec<Vec<f64>> = train_windows
            .iter()
            .map(|w| Ok(embedder.raw_features(&normalize_window(w, &stats)?)))
            .collect::<Result<_, ExperimentError>>()?;
        let scaler = FeatureScaler::fit(&train_rows)?;

        // Enroll every subject on their first session.
        let mut gallery: Vec<EnrollmentTemplate> = Vec::with_capacity(subjects.len());
        for subject in &subjects {
            let sessions_of = d.sessions_of(subject);
            let first = sessions_of
                .first()
                .ok_or_else(|| ExperimentError::InsufficientSessions(subject.clone()))?;
            let key = (subject.clone(), first.session_index);
            let embeddings = embed_all(&windows[&key], &stats, &scaler)?;
            gallery.push(enroll(subject, &embeddings)?);
        }

        // Probe with the held-out subjects' second sessions.
        let mut scores = ScoreSet::default();
        let mut trials = Vec::new();
        for subject in &fold.test {
            let sessions_of = d.sessions_of(subject);
            if sessions_of.len() < 2 {
                return Err(ExperimentError::InsufficientSessions(subject.clone()));
            }
            let key = (subject.clone(), sessions_of[1].session_index);
            for probe in embed_all(&windows[&key], &stats, &scaler)? {
                let ranked = crate::biometric::identify(&probe, &gallery)?;
                for (id, score) in &ranked {
                    if id == subject {
                        scores.genuine.push(*score);
                    } else {
                        scores.impostor.push(*score);
                    }
                }
                trials.push(IdentificationTrial {
                    true_subject: subject.clone(),
                    ranked_subjects: ranked.into_iter().map(|(id, _)| id).collect(),
                });
            }
        }

        let eer = compute_eer(&scores)?;
        let ir = compute_rank1(&trials)?;
        fold_metrics.push(FoldMetrics { eer_pct: eer, rank1_ir_pct: ir });
        fold_scores.push(FoldScores { fold: fold_idx, scores: scores.clone() });
    }

    let (chance_eer, chance_ir) = chance_levels(subjects.len());
    let summary = aggregate_folds(&fold_metrics);
    let spec_json = serde_json::to_string(spec)?;
    let result = ExperimentResult {
        experiment_id: spec.experiment_id.clone(),
        gaze: spec.gaze,
        head: spec.head,
        hand: spec.hand,
        folds: fold_metrics
            .iter()
            .enumerate()
            .map(|(i, m)| FoldOutcome {
                fold: i,
                eer_pct: m.eer_pct,
                rank1_ir_pct: m.rank1_ir_pct,
                genuine_scores: fold_scores[i].scores.genuine.len(),
                impostor_scores: fold_scores[i].scores.impostor.len(),
                identification_trials: fold_scores[i].scores.genuine.len(),
            })
            .collect(),
        summary,
        chance_eer_pct: chance_eer,
        chance_ir_pct: chance_ir,
        provenance: Provenance {
            seed: spec.seed,
            embedder: embedder.id().to_string(),
            config_hash: format!("{:016x}", content_hash(spec_json.as_bytes())),
        },
    };
    Ok((result, fold_scores))
}

fn embed_all(
    windows: &[ChannelWindow],
    stats: &crate::features::NormStats,
    scaler: &FeatureScaler,
) -> Result<Vec<crate::biometric::EmbeddingVector>, ExperimentError> {
    windows
        .iter()
        .map(|w| {
            let normalized = normalize_window(w, stats)?;
            for c in &normalized.channels {
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(ExperimentError::Audit(
                        "normalized window contains a non-finite sample".into(),
                    ));
                }
            }
            Ok(embed_window(&normalized, scaler))
        })
        .collect()
}

/// Runs every spec (results are independent of order) and assembles the
/// report. Experiments execute in parallel; each derives an isolated seed.
pub fn run_matrix(
    d: &Dataset,
    specs: &[ExperimentSpec],
    k: usize,
) -> Result<Report, ExperimentError> {
    let mut seen = std::collections::BTreeSet::new();
    for spec in specs {
        if !seen.insert(spec.experiment_id.clone()) {
            return Err(ExperimentError::DuplicateExperimentId(spec.experiment_id.clone()));
        }
        validate_spec(spec)?;
    }
    let results: Result<Vec<ExperimentResult>, ExperimentError> =
        specs.par_iter().map(|spec| run_experiment(d, spec, k)).collect();
    Ok(Report {
        schema: REPORT_SCHEMA.to_string(),
        dataset: DatasetDescriptor {
            subjects: d.subjects().len(),
            recordings: d.recordings.len(),
            total_duration_s: d.total_duration_s(),
        },
        timestamp_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        results: results?,
    })
}

/// What the data-hygiene audit inspected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HygieneAudit {
    pub folds_checked: usize,
    pub windows_checked: usize,
    pub samples_checked: usize,
}

/// Walks the exact data flow of a matrix run and verifies, for every spec
/// and fold, that train/test subject sets are disjoint, that test sets
/// partition the population, and that no normalized window contains a
/// non-finite sample.
pub fn audit_hygiene(
    d: &Dataset,
    specs: &[ExperimentSpec],
    k: usize,
) -> Result<HygieneAudit, ExperimentError> {
    let subjects = d.subjects();
    let mut audit = HygieneAudit { folds_checked: 0, windows_checked: 0, samples_checked: 0 };
    for spec in specs {
        validate_spec(spec)?;
        let sel = spec.selection();
        let sessions = prepare_sessions(d, spec)?;
        let mut unnorm: BTreeMap<(String, u32), Vec<ChannelWindow>> = BTreeMap::new();
        for r in &sessions {
            unnorm.insert(
                (r.subject_id.clone(), r.session_index),
                build_windows(r, &sel, None)?,
            );
        }

        let folds = assign_folds(&subjects, k, derive_seed(spec.seed, "folds"))?;
        let mut tested: Vec<&String> = Vec::new();
        for fold in &folds.folds {
            audit.folds_checked += 1;
            for t in &fold.test {
                if fold.train.contains(t) {
                    return Err(ExperimentError::Audit(format!(
                        "{}: subject {t} in both train and test",
                        spec.experiment_id
                    )));
                }
            }
            tested.extend(fold.test.iter());

            let train_windows: Vec<&ChannelWindow> = fold
                .train
                .iter()
                .flat_map(|s| {
                    unnorm
                        .iter()
                        .filter(move |((subj, _), _)| subj == s)
                        .flat_map(|(_, w)| w.iter())
                })
                .collect();
            let stats = fit_norm_stats(train_windows.iter().copied(), &sel)?;
            for windows in unnorm.values() {
                for w in windows {
                    let normalized = normalize_window(w, &stats)?;
                    audit.windows_checked += 1;
                    for c in &normalized.channels {
                        audit.samples_checked += c.len();
                        if c.iter().any(|v| !v.is_finite()) {
                            return Err(ExperimentError::Audit(format!(
                                "{}: non-finite sample in a normalized window",
                                spec.experiment_id
                            )));
                        }
                    }
                }
            }
        }
        let mut sorted: Vec<&String> = tested.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != tested.len() || sorted.len() != subjects.len() {
            return Err(ExperimentError::Audit(format!(
                "{}: test sets do not partition the population",
                spec.experiment_id
            )));
        }
    }
    Ok(audit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

/// Aggregate rows, one per experiment, mirroring the matrix tables.
pub fn report_to_csv(r: &Report) -> String {
    let mut out = String::from(
        "experiment_id,gaze_state,head_state,hand_state,eer_mean,eer_std,ir_mean,ir_std,chance_eer,chance_ir\n",
    );
    for res in &r.results {
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            res.experiment_id,
            res.gaze,
            res.head,
            res.hand,
            res.summary.eer_mean_pct,
            res.summary.eer_std_pct,
            res.summary.ir_mean_pct,
            res.summary.ir_std_pct,
            res.chance_eer_pct,
            res.chance_ir_pct,
        );
    }
    out
}

pub fn report_to_json(r: &Report) -> Result<String, ExperimentError> {
    Ok(serde_json::to_string_pretty(r)? + "\n")
}

/// Writes the report in the requested format.
pub fn emit_report(r: &Report, format: ReportFormat, path: &Path) -> Result<(), ExperimentError> {
    let body = match format {
        ReportFormat::Json => report_to_json(r)?,
        ReportFormat::Csv => report_to_csv(r),
    };
    std::fs::write(path, body)?;
    Ok(())
}
