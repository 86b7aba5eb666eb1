//! Verification and identification metrics: ROC sweeps, interpolated EER,
//! Rank-1 identification rate, chance levels, and fold aggregation.
//!
//! Conventions, pinned so numbers agree across implementations: a probe is
//! accepted iff score >= threshold; the threshold grid consists of the
//! midpoints between consecutive distinct scores plus ±infinity sentinels;
//! EER is linearly interpolated at the FAR/FRR crossing; fold aggregates use
//! the sample (n-1) standard deviation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("score set needs non-empty genuine and impostor lists")]
    EmptyScores,
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("rank-1 rate needs at least one trial")]
    EmptyTrials,
}

/// Genuine (probe vs. true template) and impostor (probe vs. other
/// templates) score lists.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// One identification attempt: the true identity and the ranked gallery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationTrial {
    pub true_subject: String,
    pub ranked_subjects: Vec<String>,
}

/// Per-fold metric pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub eer_pct: f64,
    pub rank1_ir_pct: f64,
}

/// Fold aggregate: mean and sample standard deviation per metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub per_fold: Vec<FoldMetrics>,
    pub eer_mean_pct: f64,
    pub eer_std_pct: f64,
    pub ir_mean_pct: f64,
    pub ir_std_pct: f64,
}

fn check_scores(s: &ScoreSet) -> Result<(), MetricError> {
    if s.genuine.is_empty() || s.impostor.is_empty() {
        return Err(MetricError::EmptyScores);
    }
    if s.genuine.iter().chain(&s.impostor).any(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteScore);
    }
    Ok(())
}

/// Sweeps every achievable operating point. FAR is non-increasing and FRR
/// non-decreasing in the threshold; the sentinels give (FAR 1, FRR 0) and
/// (FAR 0, FRR 1).
pub fn compute_roc(s: &ScoreSet) -> Result<Vec<RocPoint>, MetricError> {
    check_scores(s)?;
    let mut genuine = s.genuine.clone();
    let mut impostor = s.impostor.clone();
    genuine.sort_by(f64::total_cmp);
    impostor.sort_by(f64::total_cmp);

    let mut distinct: Vec<f64> = genuine.iter().chain(&impostor).copied().collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();

    let mut thresholds = vec![f64::NEG_INFINITY];
    thresholds.extend(distinct.windows(2).map(|p| (p[0] + p[1]) / 2.0));
    thresholds.push(f64::INFINITY);

    // fraction of values >= t in a sorted slice
    let frac_ge = |sorted: &[f64], t: f64| -> f64 {
        let idx = sorted.partition_point(|&v| v < t);
        (sorted.len() - idx) as f64 / sorted.len() as f64
    };

    Ok(thresholds
        .into_iter()
        .map(|t| RocPoint {
            threshold: t,
            far: frac_ge(&impostor, t),
            frr: 1.0 - frac_ge(&genuine, t),
        })
        .collect())
}

/// Equal Error Rate in percent: the FAR=FRR crossing of the ROC, linearly
/// interpolated between the bracketing points. If the curve touches
/// FAR = FRR over a run of thresholds, the midpoint of the touched values
/// is returned.
pub fn compute_eer(s: &ScoreSet) -> Result<f64, MetricError> {
    let roc = compute_roc(s)?;
    eer_from_roc(&roc)
}

fn eer_from_roc(roc: &[RocPoint]) -> Result<f64, MetricError> {
    let touched: Vec<&RocPoint> =
        roc.iter().filter(|p| (p.far - p.frr).abs() < 1e-15).collect();
    if !touched.is_empty() {
        let lo = touched.iter().map(|p| p.far).fold(f64::INFINITY, f64::min);
        let hi = touched.iter().map(|p| p.far).fold(f64::NEG_INFINITY, f64::max);
        return Ok(100.0 * (lo + hi) / 2.0);
    }
    // d = FAR - FRR is non-increasing along the sweep: find the sign change.
    for pair in roc.windows(2) {
        let d0 = pair[0].far - pair[0].frr;
        let d1 = pair[1].far - pair[1].frr;
        if d0 > 0.0 && d1 < 0.0 {
            let alpha = d0 / (d0 - d1);
            return Ok(100.0 * (pair[0].far + alpha * (pair[1].far - pair[0].far)));
        }
    }
    Err(MetricError::EmptyScores)
}

/// Percentage of trials whose top-ranked identity is the true one.
pub fn compute_rank1(trials: &[IdentificationTrial]) -> Result<f64, MetricError> {
    if trials.is_empty() {
        return Err(MetricError::EmptyTrials);
    }
    let hits = trials
        .iter()
        .filter(|t| t.ranked_subjects.first() == Some(&t.true_subject))
        .count();
    Ok(100.0 * hits as f64 / trials.len() as f64)
}

/// Expected metrics when the data carries no identity signal.
pub fn chance_levels(n_subjects: usize) -> (f64, f64) {
    assert!(n_subjects >= 2, "chance levels need at least two subjects");
    (50.0, 100.0 / n_subjects as f64)
}

/// Mean and sample (n-1) standard deviation per metric; one fold yields a
/// standard deviation of 0 by convention.
pub fn aggregate_folds(per_fold: &[FoldMetrics]) -> MetricSummary {
    let n = per_fold.len() as f64;
    let mean = |f: fn(&FoldMetrics) -> f64| per_fold.iter().map(f).sum::<f64>() / n;
    let eer_mean = mean(|m| m.eer_pct);
    let ir_mean = mean(|m| m.rank1_ir_pct);
    let sample_std = |f: fn(&FoldMetrics) -> f64, mu: f64| {
        if per_fold.len() < 2 {
            return 0.0;
        }
        (per_fold.iter().map(|m| (f(m) - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MetricSummary {
        per_fold: per_fold.to_vec(),
        eer_mean_pct: eer_mean,
        eer_std_pct: sample_std(|m| m.eer_pct, eer_mean),
        ir_mean_pct: ir_mean,
        ir_std_pct: sample_std(|m| m.rank1_ir_pct, ir_mean),
    }
}

/// ROC rows as CSV for external plotting.
pub fn roc_to_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,far,frr\n");
    for p in points {
        out += &format!("{},{},{}\n", p.threshold, p.far, p.frr);
    }
    out
}
