//! Adaptive densification and pruning.
//!
//! Gaussians whose mean screen-space position gradient exceeds the threshold
//! are densified: small ones are cloned with an offset sampled inside their
//! own 1-sigma ellipsoid, large ones are split into children with reduced
//! scales and positions sampled from the parent. Gaussians whose activated
//! opacity falls below the prune threshold are removed.

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::types::{quat_to_rotation, Gaussian3D, GaussianScene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdpConfig {
    pub enabled: bool,
    /// First step (1-based) at which densification may run.
    pub densify_start: usize,
    /// Last step at which densification may run.
    pub densify_end: usize,
    pub densify_interval: usize,
    /// Mean accumulated screen-space position-gradient norm above which a
    /// Gaussian is densified.
    pub grad_threshold: f64,
    /// Gaussians whose max scale is below this fraction of the scene extent
    /// are cloned rather than split.
    pub split_scale_fraction: f64,
    /// Activated-opacity floor; anything below is pruned.
    pub prune_opacity: f64,
    pub split_count: usize,
}

impl Default for AdpConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            densify_start: 100,
            densify_end: 800,
            densify_interval: 100,
            grad_threshold: 2e-4,
            split_scale_fraction: 0.01,
            prune_opacity: 0.005,
            split_count: 2,
        }
    }
}

/// Scale divisor applied to split children.
pub const SPLIT_SCALE_DIVISOR: f64 = 1.6;

#[derive(Debug, Clone, Default)]
pub struct AdpOutcome {
    /// For every surviving slot, the index it came from (None for created
    /// Gaussians). Drives optimizer-state remapping.
    pub keep: Vec<Option<usize>>,
    pub cloned: usize,
    pub split: usize,
    pub pruned: usize,
}

fn standard_normal3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// Sample from the Gaussian's own distribution: R (scale ⊙ n).
fn offset_from(g: &Gaussian3D, n: Vector3<f64>) -> Vector3<f64> {
    let q = crate::types::normalize_quaternion(g.rotation).expect("non-zero rotation");
    quat_to_rotation(q) * g.scale().component_mul(&n)
}

/// One densify/prune pass. `mean_stats` is the per-Gaussian screen-space
/// gradient statistic averaged over the steps since the previous pass.
pub fn adp_step(
    scene: &mut GaussianScene,
    mean_stats: &[f64],
    cfg: &AdpConfig,
    rng: &mut ChaCha8Rng,
) -> AdpOutcome {
    assert_eq!(mean_stats.len(), scene.len());
    let extent = scene.scene_extent();
    let clone_limit = cfg.split_scale_fraction * extent;
    let scale_shift = -SPLIT_SCALE_DIVISOR.ln();

    let mut gaussians = Vec::with_capacity(scene.len() + 8);
    let mut outcome = AdpOutcome::default();
    for (i, g) in scene.gaussians.iter().enumerate() {
        if g.opacity() < cfg.prune_opacity {
            outcome.pruned += 1;
            continue;
        }
        let densify = mean_stats[i] > cfg.grad_threshold;
        if !densify {
            gaussians.push(g.clone());
            outcome.keep.push(Some(i));
            continue;
        }
        if g.scale().max() <= clone_limit {
            // Clone: keep the original, add a copy offset within 1 sigma.
            gaussians.push(g.clone());
            outcome.keep.push(Some(i));
            let mut n = standard_normal3(rng);
            let norm = n.norm();
            if norm > 1.0 {
                n /= norm;
            }
            let mut copy = g.clone();
            copy.position += offset_from(g, n);
            gaussians.push(copy);
            outcome.keep.push(None);
            outcome.cloned += 1;
        } else {
            // Split: replace with children at reduced scale.
            for _ in 0..cfg.split_count {
                let mut child = g.clone();
                child.position += offset_from(g, standard_normal3(rng));
                child.log_scale += Vector3::from_element(scale_shift);
                gaussians.push(child);
                outcome.keep.push(None);
            }
            outcome.split += 1;
        }
    }
    scene.rebuild(gaussians, &outcome.keep);
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::logit;
    use rand::SeedableRng;

    fn base_scene(n: usize) -> GaussianScene {
        GaussianScene::new(
            (0..n)
                .map(|i| Gaussian3D {
                    position: Vector3::new(i as f64, 0.0, 0.0),
                    rotation: [1.0, 0.0, 0.0, 0.0],
                    log_scale: Vector3::from_element(-4.0),
                    opacity_logit: logit(0.8),
                    color: Vector3::new(0.5, 0.5, 0.5),
                })
                .collect(),
        )
    }

    #[test]
    fn quiet_scene_unchanged() {
        let mut scene = base_scene(5);
        let before = scene.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = adp_step(&mut scene, &[0.0; 5], &AdpConfig::default(), &mut rng);
        assert_eq!(scene, before);
        assert_eq!((out.cloned, out.split, out.pruned), (0, 0, 0));
        assert!(out.keep.iter().enumerate().all(|(j, k)| *k == Some(j)));
    }

    #[test]
    fn transparent_gaussian_pruned() {
        let mut scene = base_scene(4);
        scene.gaussians[2].opacity_logit = logit(0.001);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = adp_step(&mut scene, &[0.0; 4], &AdpConfig::default(), &mut rng);
        assert_eq!(scene.len(), 3);
        assert_eq!(out.pruned, 1);
        assert_eq!(out.keep, vec![Some(0), Some(1), Some(3)]);
    }

    #[test]
    fn small_high_gradient_gaussian_cloned_within_one_sigma() {
        // Statistical check over seeds: the clone lands inside the parent's
        // 1-sigma ellipsoid (isotropic here, radius = scale).
        for seed in 0..50u64 {
            let mut scene = base_scene(2);
            let stats = [1.0, 0.0];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let parent_pos = scene.gaussians[0].position;
            let sigma = scene.gaussians[0].scale().x;
            let out = adp_step(&mut scene, &stats, &AdpConfig::default(), &mut rng);
            assert_eq!(out.cloned, 1);
            assert_eq!(scene.len(), 3);
            assert_eq!(out.keep, vec![Some(0), None, Some(1)]);
            let clone_pos = scene.gaussians[1].position;
            let dist = (clone_pos - parent_pos).norm();
            assert!(dist <= sigma + 1e-12, "clone {dist} beyond sigma {sigma}");
        }
    }

    #[test]
    fn large_high_gradient_gaussian_split() {
        let mut scene = base_scene(2);
        // Scale above split_scale_fraction * extent: extent is 0.5 here.
        scene.gaussians[0].log_scale = Vector3::from_element(-2.0);
        let ls_before = scene.gaussians[0].log_scale;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = adp_step(&mut scene, &[1.0, 0.0], &AdpConfig::default(), &mut rng);
        assert_eq!(out.split, 1);
        assert_eq!(scene.len(), 3);
        assert_eq!(out.keep, vec![None, None, Some(1)]);
        for child in &scene.gaussians[..2] {
            let expected = ls_before + Vector3::from_element(-SPLIT_SCALE_DIVISOR.ln());
            assert!((child.log_scale - expected).norm() < 1e-12);
        }
        // New snapshots equal the creation scales.
        assert_eq!(scene.initial_scale(0), scene.gaussians[0].scale());
    }
}
