//! Browser bindings for three small interactive views of the library:
//! area attribute filtering of a grayscale image, classification of a
//! generated scene, and activation function curves.
//!
//! Each export is a thin wrapper over a plain Rust function so the logic can
//! be tested natively.

use esmlr::emaps::{area_thickening, area_thinning, Connectivity, GrayImage};
use esmlr::esmlr::{KernelInput, LorsalConfig, RidgeConfig};
use esmlr::evaluation::{confusion, kappa, oa};
use esmlr::feature_maps::ActivationKind;
use esmlr::hsi_data::{flatten_labeled, normalize_unit_max, split_per_class, select_columns, SplitMode, SplitSpec};
use esmlr::synthetic::{generate_scene, SceneSpec};
use esmlr::{predict, train, FeatureMode, PipelineSpec, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

pub const IMAGE_SIDE: usize = 96;

/// A gray background gradient with bright and dark squares of many sizes,
/// so each area threshold visibly removes a different set of structures.
pub fn pattern_image(seed: u64) -> Vec<u8> {
    let side = IMAGE_SIDE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img: Vec<u8> = (0..side * side)
        .map(|p| (60 + (p % side) * 100 / side) as u8)
        .collect();
    for _ in 0..40 {
        let size = rng.random_range(1..=14usize);
        let r0 = rng.random_range(0..side - size);
        let c0 = rng.random_range(0..side - size);
        let level = if rng.random_bool(0.5) {
            rng.random_range(190..=255u8)
        } else {
            rng.random_range(0..=40u8)
        };
        for r in r0..r0 + size {
            for c in c0..c0 + size {
                img[r * side + c] = level;
            }
        }
    }
    img
}

pub fn filter_levels(
    levels: &[u8],
    height: usize,
    width: usize,
    lambda: usize,
    thickening: bool,
    connectivity: u32,
) -> Result<Vec<u8>, String> {
    let conn = Connectivity::from_count(connectivity)
        .ok_or_else(|| format!("connectivity must be 4 or 8, got {connectivity}"))?;
    let img = GrayImage::new(height, width, levels.to_vec()).map_err(|e| e.to_string())?;
    let out = if thickening {
        area_thickening(&img, lambda, conn)
    } else {
        area_thinning(&img, lambda, conn)
    };
    Ok(out.levels)
}

/// Outcome of fitting one classifier on a generated scene.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Classification {
    height: usize,
    width: usize,
    truth: Vec<u8>,
    predicted: Vec<u8>,
    train_mask: Vec<u8>,
    oa: f64,
    kappa: f64,
}

#[wasm_bindgen]
impl Classification {
    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    /// Reference class of every pixel, row-major.
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<u8> {
        self.truth.clone()
    }

    /// Predicted class of every pixel, row-major.
    #[wasm_bindgen(getter)]
    pub fn predicted(&self) -> Vec<u8> {
        self.predicted.clone()
    }

    /// 1 where the pixel was used for training.
    #[wasm_bindgen(getter)]
    pub fn train_mask(&self) -> Vec<u8> {
        self.train_mask.clone()
    }

    /// Overall accuracy on the held-out pixels.
    #[wasm_bindgen(getter)]
    pub fn oa(&self) -> f64 {
        self.oa
    }

    #[wasm_bindgen(getter)]
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

#[derive(Debug, Clone)]
pub struct SceneRequest {
    pub variant: String,
    pub classes: usize,
    pub noise: f64,
    pub per_class: usize,
    pub hidden: usize,
    pub seed: u64,
}

pub fn classify(req: &SceneRequest) -> Result<Classification, String> {
    let err = |e: esmlr::EsmlrError| e.to_string();
    let variant: Variant = req.variant.parse().map_err(err)?;
    let scene = generate_scene(&SceneSpec {
        height: 48,
        width: 48,
        bands: 24,
        classes: req.classes,
        noise: req.noise,
        seed: req.seed,
    })
    .map_err(err)?;
    let cube = normalize_unit_max(scene.cube).map_err(err)?;
    let ds = flatten_labeled(&cube, &scene.ground_truth).map_err(err)?;
    let split = split_per_class(
        &ds,
        &SplitSpec {
            mode: SplitMode::PerClass(req.per_class),
            seed: req.seed,
            cap_rule: true,
        },
    )
    .map_err(err)?;
    let spec = PipelineSpec {
        variant,
        mode: FeatureMode::Spectral,
        activation: ActivationKind::Sigmoid,
        hidden: req.hidden,
        map_seed: req.seed,
        sigma: 0.85,
        ridge: RidgeConfig::from_exponent(10),
        lorsal: LorsalConfig::from_exponent(-10),
        kernel_input: KernelInput::Raw,
    };
    let labels_of = |idx: &[usize]| idx.iter().map(|&i| ds.labels[i]).collect::<Vec<_>>();
    let model = train(
        &spec,
        &select_columns(&ds.features, &split.train_idx),
        &labels_of(&split.train_idx),
        ds.class_count,
    )
    .map_err(err)?;
    let test_pred = predict(&model, &select_columns(&ds.features, &split.test_idx)).map_err(err)?;
    let cm = confusion(&labels_of(&split.test_idx), &test_pred, ds.class_count).map_err(err)?;

    let all = predict(&model, &cube.to_matrix()).map_err(err)?;
    let mut train_mask = vec![0u8; cube.pixels()];
    for &i in &split.train_idx {
        let (r, c) = ds.pixel_index[i];
        train_mask[r * cube.width() + c] = 1;
    }
    Ok(Classification {
        height: cube.height(),
        width: cube.width(),
        truth: scene.ground_truth.labels().iter().map(|&l| l as u8).collect(),
        predicted: all.iter().map(|&l| l as u8).collect(),
        train_mask,
        oa: oa(&cm).map_err(err)?,
        kappa: kappa(&cm).map_err(err)?,
    })
}

/// Samples `activation(t)` on `samples` evenly spaced points of `[from, to]`,
/// using `t` as the projection and `t²` as the squared distance.
pub fn sample_activation(name: &str, bias: f64, from: f64, to: f64, samples: usize) -> Result<Vec<f64>, String> {
    let kind = ActivationKind::ALL
        .into_iter()
        .find(|k| k.name() == name.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown activation `{name}`"))?;
    if samples < 2 || !(to > from) {
        return Err("need at least 2 samples over a non-empty range".into());
    }
    let step = (to - from) / (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            let t = from + step * i as f64;
            kind.eval(t, bias, t * t)
        })
        .collect())
}

#[wasm_bindgen(js_name = patternImage)]
pub fn pattern_image_js(seed: u64) -> Vec<u8> {
    pattern_image(seed)
}

#[wasm_bindgen(js_name = imageSide)]
pub fn image_side_js() -> usize {
    IMAGE_SIDE
}

#[wasm_bindgen(js_name = areaFilter)]
pub fn area_filter_js(
    levels: &[u8],
    height: usize,
    width: usize,
    lambda: usize,
    thickening: bool,
    connectivity: u32,
) -> Result<Vec<u8>, JsError> {
    filter_levels(levels, height, width, lambda, thickening, connectivity).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = classifyScene)]
pub fn classify_scene_js(
    variant: &str,
    classes: usize,
    noise: f64,
    per_class: usize,
    hidden: usize,
    seed: u64,
) -> Result<Classification, JsError> {
    classify(&SceneRequest {
        variant: variant.to_string(),
        classes,
        noise,
        per_class,
        hidden,
        seed,
    })
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = activationCurve)]
pub fn activation_curve_js(name: &str, bias: f64, from: f64, to: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    sample_activation(name, bias, from, to, samples).map_err(|e| JsError::new(&e))
}
