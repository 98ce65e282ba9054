//! Distinct-value, intersection, and containment estimators over sketches.
//!
//! A sketch doubles as a bottom-k synopsis of its key set: the retained unit
//! hashes are the k minimum values, so the classic k-minimum-value estimators
//! apply directly. When a sketch retained every distinct key the statistics
//! are exact and reported as such.

use thiserror::Error;

use crate::hashing::{selection_rank, unit_hash};
use crate::sketch::CorrelationSketch;

/// Distinct-value estimator choice.
///
/// `Basic` is `k / U(k)`; `Unbiased` is `(k - 1) / U(k)`, which has lower
/// mean squared error and is the default everywhere downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvEstimator {
    Basic,
    Unbiased,
}

#[derive(Debug, Error)]
pub enum SetStatsError {
    #[error("cannot estimate cardinality of an empty sketch")]
    EmptySketch,
}

/// Set-overlap statistics for a (query, candidate) sketch pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetEstimates {
    /// Estimated distinct keys in the query column.
    pub distinct_x: f64,
    /// Estimated distinct keys in the candidate column.
    pub distinct_y: f64,
    /// Estimated distinct keys in the key intersection.
    pub intersection: f64,
    /// Estimated containment of the query key set in the candidate, in [0,1].
    pub containment: f64,
    /// Common hashes within the combined bottom-k synopsis (the K of the
    /// intersection estimator), not the sketch-join size.
    pub overlap_count: u64,
    /// The k used by the intersection estimator.
    pub k_used: usize,
    /// True when both sketches retained every distinct key, making
    /// `intersection` and `containment` exact counts.
    pub exact: bool,
}

/// Estimates the number of distinct keys streamed into the sketch.
///
/// Exact when the sketch retained every key; otherwise applies the chosen
/// estimator with `k` = retained entries and `U(k)` = largest retained unit.
pub fn estimate_distinct(
    sketch: &CorrelationSketch,
    estimator: DvEstimator,
) -> Result<f64, SetStatsError> {
    if sketch.is_empty() {
        return Err(SetStatsError::EmptySketch);
    }
    if sketch.is_exact() {
        return Ok(sketch.len() as f64);
    }
    let k = sketch.len() as f64;
    let u = positive_unit(sketch.kth_unit().expect("non-empty sketch").value());
    Ok(match estimator {
        DvEstimator::Basic => k / u,
        DvEstimator::Unbiased => (k - 1.0) / u,
    })
}

/// Estimates the number of distinct keys common to both inputs.
///
/// Uses the combined bottom-k synopsis of the two key sets: with
/// `k = min(|a|, |b|)`, the k smallest units of the union are scanned for
/// hashes present in both sketches, and the count feeds
/// `(K / k) * (k - 1) / U(k)`. The result is clamped to
/// `[0, min(distinct estimates)]`. Exact when both sketches are exact.
pub fn estimate_intersection(a: &CorrelationSketch, b: &CorrelationSketch) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    if a.is_exact() && b.is_exact() {
        return exact_overlap(a, b) as f64;
    }
    let (overlap, k, u) = combined_bottom_k(a, b);
    let estimate = (overlap as f64 / k as f64) * (k as f64 - 1.0) / positive_unit(u);
    let cap_a = estimate_distinct(a, DvEstimator::Unbiased).expect("non-empty");
    let cap_b = estimate_distinct(b, DvEstimator::Unbiased).expect("non-empty");
    estimate.clamp(0.0, cap_a.min(cap_b))
}

/// Estimates |query keys ∩ candidate keys| / |query keys|, clamped to [0,1].
pub fn estimate_containment(query: &CorrelationSketch, candidate: &CorrelationSketch) -> f64 {
    if query.is_empty() || candidate.is_empty() {
        return 0.0;
    }
    let inter = estimate_intersection(query, candidate);
    let denom = estimate_distinct(query, DvEstimator::Unbiased).expect("non-empty");
    if denom <= 0.0 {
        return 0.0;
    }
    (inter / denom).clamp(0.0, 1.0)
}

/// Computes the full set-statistics bundle for a sketch pair.
pub fn set_estimates(query: &CorrelationSketch, candidate: &CorrelationSketch) -> SetEstimates {
    let exact = query.is_exact() && candidate.is_exact();
    let (overlap_count, k_used) = if query.is_empty() || candidate.is_empty() {
        (0, 0)
    } else {
        let (overlap, k, _) = combined_bottom_k(query, candidate);
        (overlap, k)
    };
    let distinct_x = estimate_distinct(query, DvEstimator::Unbiased).unwrap_or(0.0);
    let distinct_y = estimate_distinct(candidate, DvEstimator::Unbiased).unwrap_or(0.0);
    SetEstimates {
        distinct_x,
        distinct_y,
        intersection: estimate_intersection(query, candidate),
        containment: estimate_containment(query, candidate),
        overlap_count,
        k_used,
        exact,
    }
}

fn positive_unit(u: f64) -> f64 {
    // A retained unit of exactly 0 requires key hash 0; avoid division by
    // zero in that corner.
    u.max(2f64.powi(-64))
}

fn exact_overlap(a: &CorrelationSketch, b: &CorrelationSketch) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let keys: std::collections::HashSet<_> =
        small.entries().iter().map(|e| e.key_hash).collect();
    large
        .entries()
        .iter()
        .filter(|e| keys.contains(&e.key_hash))
        .count()
}

/// Merges the two retained key sets into the combined bottom-k synopsis and
/// returns (common hashes within it, k, U(k)).
fn combined_bottom_k(a: &CorrelationSketch, b: &CorrelationSketch) -> (u64, usize, f64) {
    let k = a.len().min(b.len());
    debug_assert!(k >= 1);
    let ea = a.entries();
    let eb = b.entries();
    let (mut i, mut j) = (0, 0);
    let mut taken = 0usize;
    let mut overlap = 0u64;
    let mut last_unit = 0.0f64;
    // Entries are rank-sorted, so the union's bottom k is a linear merge.
    while taken < k {
        let ra = ea.get(i).map(|e| selection_rank(e.key_hash));
        let rb = eb.get(j).map(|e| selection_rank(e.key_hash));
        let (rank, common) = match (ra, rb) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
                (x, true)
            }
            (Some(x), Some(y)) if x < y => {
                i += 1;
                (x, false)
            }
            (Some(_), Some(y)) => {
                j += 1;
                (y, false)
            }
            (Some(x), None) => {
                i += 1;
                (x, false)
            }
            (None, Some(y)) => {
                j += 1;
                (y, false)
            }
            (None, None) => break,
        };
        taken += 1;
        overlap += common as u64;
        last_unit = rank.0.value();
    }
    (overlap, taken, last_unit)
}
