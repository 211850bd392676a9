//! Per-pixel class logits to normalized uncertainty maps.
//!
//! Uncertainty is the Shannon entropy of the per-pixel class distribution,
//! divided by ln(C) so that 0 means a one-hot (confident) pixel and 1 a
//! uniform (maximally uncertain) one. The complement (1 - U) weights the
//! reconstruction loss.

use crate::error::{Error, Result};
use crate::types::DenseMap;

/// Tolerance on the per-pixel probability sum accepted by [`entropy_map`].
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-4;

/// Per-pixel normalized entropy, every value in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    pub map: DenseMap,
}

impl UncertaintyMap {
    /// A fully confident map (U = 0 everywhere).
    pub fn full_confidence(width: usize, height: usize) -> Self {
        Self {
            map: DenseMap::zeros(width, height, 1),
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.map.data[y * self.map.width + x]
    }
}

/// Sum in value order so the result does not depend on channel order.
fn order_independent_sum(values: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_by(f64::total_cmp);
    scratch.iter().sum()
}

/// Per-pixel softmax over the channel axis, stabilized by max-subtraction.
/// Permuting channels permutes the output exactly.
pub fn softmax_probs(logits: &DenseMap) -> Result<DenseMap> {
    let c = logits.channels;
    if c < 2 {
        return Err(Error::NeedTwoClasses { got: c });
    }
    let mut out = logits.clone();
    let mut scratch = Vec::with_capacity(c);
    for px in out.data.chunks_exact_mut(c) {
        let max = px.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        for v in px.iter_mut() {
            *v = (*v - max).exp();
        }
        let sum = order_independent_sum(px, &mut scratch);
        for v in px.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Shannon entropy per pixel, natural log, with 0 * log 0 := 0. With
/// `normalize` set the result is divided by ln(C) and clamped into [0, 1].
/// Rejects inputs whose per-pixel sum strays from 1, naming the worst pixel.
pub fn entropy_map(probs: &DenseMap, normalize: bool) -> Result<UncertaintyMap> {
    let c = probs.channels;
    if c < 2 {
        return Err(Error::NeedTwoClasses { got: c });
    }
    let mut worst: (usize, f64) = (0, 0.0);
    for (i, px) in probs.data.chunks_exact(c).enumerate() {
        let sum: f64 = px.iter().sum();
        let dev = (sum - 1.0).abs();
        if dev > worst.1 {
            worst = (i, dev);
        }
    }
    if worst.1 > PROBABILITY_SUM_TOLERANCE {
        let (i, _) = worst;
        let px = &probs.data[i * c..(i + 1) * c];
        return Err(Error::ProbabilitySum {
            x: i % probs.width,
            y: i / probs.width,
            sum: px.iter().sum(),
            tolerance: PROBABILITY_SUM_TOLERANCE,
        });
    }

    let ln_c = (c as f64).ln();
    let mut data = Vec::with_capacity(probs.width * probs.height);
    let mut terms = Vec::with_capacity(c);
    let mut scratch = Vec::with_capacity(c);
    for px in probs.data.chunks_exact(c) {
        terms.clear();
        for &p in px {
            terms.push(if p > 0.0 { p * p.ln() } else { 0.0 });
        }
        let mut h = -order_independent_sum(&terms, &mut scratch);
        if normalize {
            h = (h / ln_c).clamp(0.0, 1.0);
        }
        data.push(h);
    }
    Ok(UncertaintyMap {
        map: DenseMap::from_vec(probs.width, probs.height, 1, data)?,
    })
}

/// Softmax then normalized entropy: the full logits-to-uncertainty pipeline.
pub fn uncertainty_from_logits(logits: &DenseMap) -> Result<UncertaintyMap> {
    entropy_map(&softmax_probs(logits)?, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map_from_pixels(width: usize, height: usize, pixels: &[&[f64]]) -> DenseMap {
        let c = pixels[0].len();
        let mut data = Vec::new();
        for px in pixels {
            data.extend_from_slice(px);
        }
        DenseMap::from_vec(width, height, c, data).unwrap()
    }

    #[test]
    fn softmax_symmetry() {
        let probs = softmax_probs(&map_from_pixels(1, 1, &[&[0.0, 0.0]])).unwrap();
        assert_eq!(probs.data, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_stabilized_limit() {
        let probs = softmax_probs(&map_from_pixels(1, 1, &[&[1000.0, 0.0]])).unwrap();
        assert!((probs.data[0] - 1.0).abs() < 1e-9);
        assert!(probs.data[1] < 1e-9);
        assert!(probs.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_three_class_values() {
        // exp(1)/(exp(1)+exp(2)+exp(3)) etc.
        let probs = softmax_probs(&map_from_pixels(1, 1, &[&[1.0, 2.0, 3.0]])).unwrap();
        let expected = [0.09003057, 0.24472847, 0.66524096];
        for (p, e) in probs.data.iter().zip(&expected) {
            assert!((p - e).abs() < 1e-4, "got {p}, want {e}");
        }
    }

    #[test]
    fn softmax_needs_two_classes() {
        let err = softmax_probs(&DenseMap::zeros(2, 2, 1)).unwrap_err();
        assert!(err.to_string().contains("at least two classes"));
    }

    #[test]
    fn entropy_one_hot_is_zero() {
        let u = entropy_map(&map_from_pixels(1, 1, &[&[1.0, 0.0, 0.0]]), true).unwrap();
        assert_eq!(u.map.data, vec![0.0]);
    }

    #[test]
    fn entropy_uniform_is_max() {
        for c in [2usize, 5, 21] {
            let px: Vec<f64> = vec![1.0 / c as f64; c];
            let pixels: Vec<&[f64]> = vec![&px[..]];
            let raw = entropy_map(&map_from_pixels(1, 1, &pixels), false).unwrap();
            assert!((raw.map.data[0] - (c as f64).ln()).abs() < 1e-12);
            let norm = entropy_map(&map_from_pixels(1, 1, &pixels), true).unwrap();
            assert!((norm.map.data[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_binary_frozen_value() {
        // -0.9 ln 0.9 - 0.1 ln 0.1 = 0.325083...
        let raw = entropy_map(&map_from_pixels(1, 1, &[&[0.9, 0.1]]), false).unwrap();
        assert!((raw.map.data[0] - 0.3251).abs() < 1e-3);
        let norm = entropy_map(&map_from_pixels(1, 1, &[&[0.9, 0.1]]), true).unwrap();
        assert!((norm.map.data[0] - 0.4690).abs() < 1e-3);
    }

    #[test]
    fn entropy_names_worst_pixel() {
        let err =
            entropy_map(&map_from_pixels(2, 1, &[&[0.5, 0.5], &[0.9, 0.3]]), true).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(1, 0)"), "message should name pixel: {msg}");
    }

    #[test]
    fn logits_pipeline_checkerboard() {
        let confident: &[f64] = &[1000.0, 0.0, 0.0];
        let uniform: &[f64] = &[3.0, 3.0, 3.0];
        let logits = map_from_pixels(2, 2, &[confident, uniform, uniform, confident]);
        let u = uncertainty_from_logits(&logits).unwrap();
        assert!(u.map.data[0] < 1e-6);
        assert!((u.map.data[1] - 1.0).abs() < 1e-9);
        assert!((u.map.data[2] - 1.0).abs() < 1e-9);
        assert!(u.map.data[3] < 1e-6);
    }

    proptest! {
        #[test]
        fn entropy_permutation_invariant(
            logits in proptest::collection::vec(-8.0f64..8.0, 4),
            swap_a in 0usize..4,
            swap_b in 0usize..4,
        ) {
            let base = map_from_pixels(1, 1, &[&logits]);
            let mut permuted = logits.clone();
            permuted.swap(swap_a, swap_b);
            let perm = map_from_pixels(1, 1, &[&permuted]);
            let ua = uncertainty_from_logits(&base).unwrap();
            let ub = uncertainty_from_logits(&perm).unwrap();
            prop_assert_eq!(ua.map.data, ub.map.data);
        }

        #[test]
        fn normalized_entropy_in_unit_interval(
            raw in proptest::collection::vec(0.001f64..1.0, 6),
        ) {
            // Random simplex point via normalization.
            let sum: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / sum).collect();
            let pixels: Vec<&[f64]> = vec![&probs[..]];
            let u = entropy_map(&map_from_pixels(1, 1, &pixels), true).unwrap();
            prop_assert!(u.map.data[0] >= 0.0);
            prop_assert!(u.map.data[0] <= 1.0 + 1e-9);
        }

        #[test]
        fn entropy_zero_iff_one_hot(hot in 0usize..4, spread in 0.0f64..1.0) {
            // One-hot within softmax saturation: entropy ~ 0.
            let mut logits = vec![0.0; 4];
            logits[hot] = 60.0 + spread;
            let u = uncertainty_from_logits(&map_from_pixels(1, 1, &[&logits])).unwrap();
            prop_assert!(u.map.data[0] < 1e-6);

            // Anything meaningfully spread is strictly positive.
            let mixed = map_from_pixels(1, 1, &[&[1.0, 1.0 - spread, 0.0, 0.0]]);
            let um = uncertainty_from_logits(&mixed).unwrap();
            prop_assert!(um.map.data[0] > 1e-6);
        }
    }
}
