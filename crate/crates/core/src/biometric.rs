//! The pluggable authentication model: statistical window embeddings,
//! centroid enrollment templates, cosine verification/identification, and
//! subject-disjoint fold assignment.
//!
//! The default embedder computes ten summary statistics per channel —
//! mean, std, median, interquartile range, skewness, excess kurtosis,
//! mean |first difference|, lag-1 autocorrelation, min, max — and
//! standardizes each feature with training-fit statistics. Degenerate
//! moments of a zero-variance channel are defined as 0 so embeddings stay
//! finite. Anything window-shaped can slot in behind the [`Embedder`] trait.

use crate::features::ChannelWindow;
use crate::rng::rng_for;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier recorded in report provenance.
pub const EMBEDDER_ID: &str = "channel-stats/v1";
pub const FEATURES_PER_CHANNEL: usize = 10;

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum BiometricError {
    #[error("enrollment needs at least one window")]
    EmptyEnrollment,
    #[error("embedding lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("identification gallery is empty")]
    EmptyGallery,
    #[error("need at least {k} subjects for {k} folds, got {n}")]
    TooFewSubjects { n: usize, k: usize },
    #[error("scaler fit needs at least one embedding")]
    EmptyFit,
}

/// A fixed-length real feature vector; entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

/// A subject's gallery representation: the mean of enrollment embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentTemplate {
    pub subject_id: String,
    pub centroid: EmbeddingVector,
    pub window_count: usize,
}

/// Maps windows to raw feature vectors. Implementations must be pure:
/// the embedding depends only on channel values, never on window metadata.
pub trait Embedder: Sync {
    fn raw_features(&self, w: &ChannelWindow) -> Vec<f64>;
    fn id(&self) -> &'static str;
}

/// The default feature-statistics embedder.
#[derive(Debug, Clone, Default)]
pub struct StatEmbedder;

impl Embedder for StatEmbedder {
    fn raw_features(&self, w: &ChannelWindow) -> Vec<f64> {
        let mut out = Vec::with_capacity(w.channels.len() * FEATURES_PER_CHANNEL);
        for c in &w.channels {
            out.extend_from_slice(&channel_features(c));
        }
        out
    }

    fn id(&self) -> &'static str {
        EMBEDDER_ID
    }
}

/// Ten summary statistics of one channel, in the documented order.
pub fn channel_features(x: &[f64]) -> [f64; FEATURES_PER_CHANNEL] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();

    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = quantile(&sorted, 0.5);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);

    let (skew, kurt) = if std < DEGENERATE {
        (0.0, 0.0)
    } else {
        let m3 = x.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        (m3 / std.powi(3), m4 / (var * var) - 3.0)
    };

    let mean_abs_diff = if x.len() > 1 {
        x.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };

    let min = *sorted.first().unwrap_or(&0.0);
    let max = *sorted.last().unwrap_or(&0.0);
    [
        mean,
        std,
        median,
        iqr,
        skew,
        kurt,
        mean_abs_diff,
        lag1_autocorrelation(x),
        min,
        max,
    ]
}

/// Linear-interpolated quantile of an already sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Pearson correlation of consecutive sample pairs (x_t, x_{t+1}); a
/// perfectly alternating channel scores exactly -1. Zero-variance input
/// scores 0 by convention.
pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let a = &x[..x.len() - 1];
    let b = &x[1..];
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va < DEGENERATE || vb < DEGENERATE {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Per-feature standardization statistics fit on training embeddings.
/// Degenerate features (training std below 1e-12) map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, BiometricError> {
        let Some(first) = rows.first() else {
            return Err(BiometricError::EmptyFit);
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
        }
        Ok(FeatureScaler { mean, std })
    }

    pub fn apply(&self, raw: &[f64]) -> EmbeddingVector {
        let values = raw
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s < DEGENERATE { 0.0 } else { (v - m) / s })
            .collect();
        EmbeddingVector { values }
    }
}

/// Embeds one window with the default embedder and a training-fit scaler.
pub fn embed_window(w: &ChannelWindow, scaler: &FeatureScaler) -> EmbeddingVector {
    scaler.apply(&StatEmbedder.raw_features(w))
}

/// Centroid of the enrollment embeddings.
pub fn enroll(
    subject_id: &str,
    embeddings: &[EmbeddingVector],
) -> Result<EnrollmentTemplate, BiometricError> {
    let Some(first) = embeddings.first() else {
        return Err(BiometricError::EmptyEnrollment);
    };
    let dim = first.values.len();
    let mut centroid = vec![0.0; dim];
    for e in embeddings {
        if e.values.len() != dim {
            return Err(BiometricError::LengthMismatch(dim, e.values.len()));
        }
        for (c, v) in centroid.iter_mut().zip(&e.values) {
            *c += v;
        }
    }
    for c in &mut centroid {
        *c /= embeddings.len() as f64;
    }
    Ok(EnrollmentTemplate {
        subject_id: subject_id.to_string(),
        centroid: EmbeddingVector { values: centroid },
        window_count: embeddings.len(),
    })
}

/// Cosine similarity; zero-norm vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < DEGENERATE || nb < DEGENERATE {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Verification score of a probe against a claimed identity's template.
pub fn verify(
    probe: &EmbeddingVector,
    template: &EnrollmentTemplate,
) -> Result<f64, BiometricError> {
    if probe.values.len() != template.centroid.values.len() {
        return Err(BiometricError::LengthMismatch(
            probe.values.len(),
            template.centroid.values.len(),
        ));
    }
    Ok(cosine(&probe.values, &template.centroid.values))
}

/// Ranks gallery identities by similarity to the probe, ties broken by
/// ascending subject id so the ranking is deterministic.
pub fn identify(
    probe: &EmbeddingVector,
    gallery: &[EnrollmentTemplate],
) -> Result<Vec<(String, f64)>, BiometricError> {
    if gallery.is_empty() {
        return Err(BiometricError::EmptyGallery);
    }
    let mut ranked: Vec<(String, f64)> = gallery
        .iter()
        .map(|t| Ok((t.subject_id.clone(), verify(probe, t)?)))
        .collect::<Result<_, BiometricError>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Subject-disjoint k-fold assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Shuffles the (sorted) subject list with a seeded generator and cuts it
/// into k contiguous test sets whose sizes differ by at most one; train is
/// the complement. Test sets partition the population.
pub fn assign_folds(
    subjects: &[String],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment, BiometricError> {
    if subjects.len() < k || k == 0 {
        return Err(BiometricError::TooFewSubjects { n: subjects.len(), k });
    }
    let mut order: Vec<String> = subjects.to_vec();
    order.sort();
    order.dedup();
    if order.len() < k {
        return Err(BiometricError::TooFewSubjects { n: order.len(), k });
    }
    order.shuffle(&mut rng_for(seed));

    let n = order.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let test: Vec<String> = order[start..start + size].to_vec();
        let mut train: Vec<String> =
            order[..start].iter().chain(&order[start + size..]).cloned().collect();
        train.sort();
        let mut test = test;
        test.sort();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(FoldAssignment { folds, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn window_with(values: Vec<f64>) -> ChannelWindow {
        ChannelWindow {
            subject_id: "a".into(),
            session_index: 1,
            window_index: 0,
            channels: vec![values],
        }
    }

    #[test]
    fn constant_channel_features_follow_the_conventions() {
        let f = channel_features(&[2.5; 450]);
        assert_eq!(
            f,
            [2.5, 0.0, 2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 2.5, 2.5]
        );
    }

    #[test]
    fn alternating_channel_has_autocorrelation_minus_one() {
        let x: Vec<f64> = (0..450).map(|t| (t % 2) as f64).collect();
        assert_relative_eq!(lag1_autocorrelation(&x), -1.0, epsilon = 1e-12);
    }

    /// Direct oracle on the alternating sequence: the pairs are exactly
    /// (0,1) and (1,0), so the correlation is -1 by construction.
    #[test]
    fn autocorrelation_matches_direct_pair_oracle() {
        let x: Vec<f64> = (0..100).map(|t| ((t * 7) % 5) as f64 * 0.3 - 0.1).collect();
        let a = &x[..x.len() - 1];
        let b = &x[1..];
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        let oracle = cov / (va.sqrt() * vb.sqrt());
        assert_relative_eq!(lag1_autocorrelation(&x), oracle, epsilon = 1e-12);
    }

    #[test]
    fn identical_windows_embed_identically() {
        let w1 = window_with((0..450).map(|t| (t as f64).sin()).collect());
        let mut w2 = w1.clone();
        w2.subject_id = "someone-else".into();
        w2.window_index = 9;
        let e1 = StatEmbedder.raw_features(&w1);
        let e2 = StatEmbedder.raw_features(&w2);
        assert_eq!(e1, e2);
    }

    #[test]
    fn scaler_zeroes_degenerate_features_and_standardizes_the_rest() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let scaler = FeatureScaler::fit(&rows).unwrap();
        let e = scaler.apply(&[3.0, 5.0]);
        assert_relative_eq!(e.values[0], 1.0); // (3-2)/1
        assert_relative_eq!(e.values[1], 0.0); // degenerate feature
    }

    #[test]
    fn enrollment_centroid_behaves_like_a_mean() {
        let e = EmbeddingVector { values: vec![1.0, 2.0] };
        let one = enroll("a", &[e.clone()]).unwrap();
        assert_eq!(one.centroid, e);
        assert_eq!(one.window_count, 1);

        let two = enroll("a", &[e.clone(), e.clone()]).unwrap();
        assert_eq!(two.centroid, e);

        let neg = EmbeddingVector { values: vec![-1.0, -2.0] };
        let zero = enroll("a", &[e, neg]).unwrap();
        assert_eq!(zero.centroid.values, vec![0.0, 0.0]);
    }

    #[test]
    fn verify_scores_the_three_canonical_cases() {
        let t = enroll("a", &[EmbeddingVector { values: vec![1.0, 0.0] }]).unwrap();
        let same = EmbeddingVector { values: vec![2.0, 0.0] };
        let orth = EmbeddingVector { values: vec![0.0, 1.0] };
        let anti = EmbeddingVector { values: vec![-1.0, 0.0] };
        assert_relative_eq!(verify(&same, &t).unwrap(), 1.0);
        assert_relative_eq!(verify(&orth, &t).unwrap(), 0.0);
        assert_relative_eq!(verify(&anti, &t).unwrap(), -1.0);
        let zero = EmbeddingVector { values: vec![0.0, 0.0] };
        assert_relative_eq!(verify(&zero, &t).unwrap(), 0.0);
    }

    #[test]
    fn identify_ranks_own_centroid_first_and_breaks_ties_by_id() {
        let probe = EmbeddingVector { values: vec![1.0, 0.0] };
        let gallery = vec![
            enroll("b", &[EmbeddingVector { values: vec![0.0, 1.0] }]).unwrap(),
            enroll("a", &[probe.clone()]).unwrap(),
        ];
        let ranked = identify(&probe, &gallery).unwrap();
        assert_eq!(ranked[0].0, "a");

        let tied = vec![
            enroll("z", &[probe.clone()]).unwrap(),
            enroll("m", &[probe.clone()]).unwrap(),
        ];
        let ranked = identify(&probe, &tied).unwrap();
        assert_eq!(ranked[0].0, "m");
        assert_eq!(ranked[1].0, "z");
    }

    #[test]
    fn identify_matches_exhaustive_pairwise_oracle() {
        let probe = EmbeddingVector { values: vec![0.6, 0.8, 0.0] };
        let gallery = vec![
            enroll("a", &[EmbeddingVector { values: vec![1.0, 0.0, 0.0] }]).unwrap(),
            enroll("b", &[EmbeddingVector { values: vec![0.5, 0.9, 0.1] }]).unwrap(),
            enroll("c", &[EmbeddingVector { values: vec![0.0, 0.0, 1.0] }]).unwrap(),
        ];
        let ranked = identify(&probe, &gallery).unwrap();
        let mut oracle: Vec<(String, f64)> = gallery
            .iter()
            .map(|t| (t.subject_id.clone(), cosine(&probe.values, &t.centroid.values)))
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1));
        let ids: Vec<&str> = ranked.iter().map(|(s, _)| s.as_str()).collect();
        let oracle_ids: Vec<&str> = oracle.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(ids, oracle_ids);
    }

    fn subject_names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("S{i:03}")).collect()
    }

    #[test]
    fn thirty_eight_subjects_split_ten_ten_nine_nine() {
        let fa = assign_folds(&subject_names(38), 4, 7).unwrap();
        let mut sizes: Vec<usize> = fa.folds.iter().map(|f| f.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![9, 9, 10, 10]);
        for f in &fa.folds {
            assert_eq!(f.train.len() + f.test.len(), 38);
        }
    }

    #[test]
    fn four_subjects_four_folds_is_one_test_subject_each() {
        let fa = assign_folds(&subject_names(4), 4, 7).unwrap();
        assert!(fa.folds.iter().all(|f| f.test.len() == 1));
    }

    #[test]
    fn fold_assignment_is_deterministic_and_disjoint() {
        let names = subject_names(19);
        let a = assign_folds(&names, 4, 11).unwrap();
        let b = assign_folds(&names, 4, 11).unwrap();
        assert_eq!(a, b);

        let mut seen = BTreeSet::new();
        for f in &a.folds {
            let train: BTreeSet<&String> = f.train.iter().collect();
            for t in &f.test {
                assert!(!train.contains(t), "train/test overlap on {t}");
                assert!(seen.insert(t.clone()), "{t} tested twice");
            }
        }
        assert_eq!(seen.len(), 19);
    }

    #[test]
    fn too_few_subjects_is_an_error() {
        assert!(matches!(
            assign_folds(&subject_names(3), 4, 7),
            Err(BiometricError::TooFewSubjects { .. })
        ));
    }

    proptest! {
        #[test]
        fn ranking_is_invariant_to_positive_scaling(
            scale in 0.01f64..100.0,
            probe in proptest::collection::vec(-1.0f64..1.0, 4),
            g1 in proptest::collection::vec(-1.0f64..1.0, 4),
            g2 in proptest::collection::vec(-1.0f64..1.0, 4),
            g3 in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            let gallery: Vec<EnrollmentTemplate> = [("a", g1), ("b", g2), ("c", g3)]
                .into_iter()
                .map(|(id, v)| enroll(id, &[EmbeddingVector { values: v }]).unwrap())
                .collect();
            let scaled: Vec<EnrollmentTemplate> = gallery
                .iter()
                .map(|t| EnrollmentTemplate {
                    subject_id: t.subject_id.clone(),
                    centroid: EmbeddingVector {
                        values: t.centroid.values.iter().map(|v| v * scale).collect(),
                    },
                    window_count: t.window_count,
                })
                .collect();
            let p = EmbeddingVector { values: probe.clone() };
            let ps = EmbeddingVector { values: probe.iter().map(|v| v * scale).collect() };
            let r1: Vec<String> = identify(&p, &gallery).unwrap().into_iter().map(|x| x.0).collect();
            let r2: Vec<String> = identify(&ps, &scaled).unwrap().into_iter().map(|x| x.0).collect();
            prop_assert_eq!(r1, r2);
        }

        #[test]
        fn identify_is_permutation_equivariant(
            perm_seed in 0u64..32,
            vals in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 5),
        ) {
            let probe = EmbeddingVector { values: vec![0.3, -0.2, 0.9] };
            let gallery: Vec<EnrollmentTemplate> = vals
                .iter()
                .enumerate()
                .map(|(i, v)| enroll(&format!("s{i}"), &[EmbeddingVector { values: v.clone() }]).unwrap())
                .collect();
            let mut permuted = gallery.clone();
            permuted.shuffle(&mut rng_for(perm_seed));
            let a = identify(&probe, &gallery).unwrap();
            let b = identify(&probe, &permuted).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
