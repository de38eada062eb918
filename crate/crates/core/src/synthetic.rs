//! Small generated scenes with known class layout, used by tests, the demo
//! and quick command-line smoke runs.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{EsmlrError, Result};
use crate::hsi_data::{write_cube, write_ground_truth, GroundTruth, HsiCube};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    /// Standard deviation of the per-band Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            height: 40,
            width: 40,
            bands: 20,
            classes: 3,
            noise: 0.04,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub cube: HsiCube,
    pub ground_truth: GroundTruth,
    /// `classes x bands` mean spectra.
    pub means: Vec<Vec<f64>>,
}

/// Mean spectrum of class `k`: a smooth curve with a class-specific phase
/// and offset, kept well inside `(0, 1)`.
fn class_mean(k: usize, classes: usize, bands: usize) -> Vec<f64> {
    let phase = std::f64::consts::TAU * k as f64 / classes as f64;
    (0..bands)
        .map(|b| {
            let t = b as f64 / bands.max(2) as f64;
            0.45 + 0.2 * (std::f64::consts::TAU * t + phase).sin() + 0.05 * (k as f64 - 1.0) * t
        })
        .collect()
}

/// Voronoi layout: one site per class, each pixel takes the nearest site.
/// Every region is a single connected blob.
fn layout(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<u16> {
    let sites: Vec<(f64, f64)> = (0..spec.classes)
        .map(|k| {
            // spread the sites around the center so no region vanishes
            let angle = std::f64::consts::TAU * k as f64 / spec.classes as f64 + rng.random_range(-0.3..0.3);
            let r = 0.3 * spec.height.min(spec.width) as f64;
            (
                spec.height as f64 / 2.0 + r * angle.sin(),
                spec.width as f64 / 2.0 + r * angle.cos(),
            )
        })
        .collect();
    (0..spec.height * spec.width)
        .map(|p| {
            let (y, x) = ((p / spec.width) as f64, (p % spec.width) as f64);
            let nearest = (0..spec.classes)
                .min_by(|&a, &b| {
                    let da = (sites[a].0 - y).powi(2) + (sites[a].1 - x).powi(2);
                    let db = (sites[b].0 - y).powi(2) + (sites[b].1 - x).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap_or(0);
            nearest as u16 + 1
        })
        .collect()
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    if spec.classes < 2 || spec.classes > u16::MAX as usize {
        return Err(EsmlrError::Config(format!("need at least 2 classes, got {}", spec.classes)));
    }
    if spec.height == 0 || spec.width == 0 || spec.bands == 0 {
        return Err(EsmlrError::Config("scene dimensions must be positive".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(EsmlrError::Config(format!("noise must be >= 0, got {}", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = layout(spec, &mut rng);
    let means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|k| class_mean(k, spec.classes, spec.bands))
        .collect();
    let n = spec.height * spec.width;
    let mut values = vec![0.0; n * spec.bands];
    for p in 0..n {
        let mean = &means[labels[p] as usize - 1];
        for b in 0..spec.bands {
            let z: f64 = rng.sample(StandardNormal);
            values[b * n + p] = (mean[b] + spec.noise * z).max(0.0);
        }
    }
    Ok(Scene {
        cube: HsiCube::new(spec.height, spec.width, spec.bands, values)?,
        ground_truth: GroundTruth::new(spec.height, spec.width, labels)?,
        means,
    })
}

/// Writes `<dir>/<name>.bsq` and `<dir>/<name>_gt.labels` with their sidecars.
pub fn write_scene(scene: &Scene, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    let cube = dir.join(format!("{name}.bsq"));
    let gt = dir.join(format!("{name}_gt.labels"));
    write_cube(&scene.cube, &cube)?;
    write_ground_truth(&scene.ground_truth, &gt)?;
    Ok((cube, gt))
}
