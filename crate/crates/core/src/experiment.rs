//! Multi-trial experiments, parameter sweeps and EMAP dumps driven by a JSON
//! config.
//!
//! A config file is one JSON object; `--field value` overrides replace
//! fields before deserialization (`--sweep.axis b` reaches into nested
//! objects). Values are parsed as JSON first and fall back to plain strings.
//! Trial `k` uses seed `base_seed + k` for both its split and its random map.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::emaps::{build_emaps, ApSpec, Connectivity, EmapStack};
use crate::error::{EsmlrError, Result};
use crate::esmlr::{
    predict, train, FeatureMode, KernelInput, LorsalConfig, PipelineSpec, RidgeConfig, TrainInput,
    Variant,
};
use crate::evaluation::{aggregate, confusion, trials_csv, MetricsReport, Summary};
use crate::feature_maps::ActivationKind;
use crate::hsi_data::{
    flatten_labeled, load_cube, load_ground_truth, normalize_unit_max, select_columns,
    split_per_class, GroundTruth, HsiCube, LabeledDataset, SplitMode, SplitSpec,
    INDIAN_PINES_TRAIN_COUNTS, PAVIA_TRAIN_COUNTS,
};
use crate::synthetic::{generate_scene, SceneSpec};

/// Per-class training counts: a list, or `"indian_pines"` / `"pavia"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TrainCounts {
    Preset(String),
    List(Vec<usize>),
}

impl TrainCounts {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            TrainCounts::List(v) => Ok(v.clone()),
            TrainCounts::Preset(name) => match name.to_ascii_lowercase().replace('-', "_").as_str() {
                "indian_pines" => Ok(INDIAN_PINES_TRAIN_COUNTS.to_vec()),
                "pavia" | "pavia_university" => Ok(PAVIA_TRAIN_COUNTS.to_vec()),
                _ => {
                    // "3,71,41" from the command line
                    let parsed: std::result::Result<Vec<usize>, _> =
                        name.split(',').map(|s| s.trim().parse()).collect();
                    parsed.map_err(|_| EsmlrError::Config(format!("unknown training-count preset '{name}'")))
                }
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "L", alias = "l")]
    L,
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "Q", alias = "q")]
    Q,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::L => "L",
            SweepAxis::A => "a",
            SweepAxis::B => "b",
            SweepAxis::Q => "Q",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(EsmlrError::Config("sweep has no values".into()));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(EsmlrError::Config("sweep values must be strictly increasing".into()));
        }
        if matches!(self.axis, SweepAxis::L | SweepAxis::Q)
            && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0)
        {
            return Err(EsmlrError::Config(format!(
                "{} sweep values must be positive integers",
                self.axis.name()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(EsmlrError::Config("sweep values must be finite".into()));
        }
        Ok(())
    }

    /// The L sweep grid {50, 100, ..., 1500}.
    pub fn hidden_grid() -> Self {
        SweepSpec {
            axis: SweepAxis::L,
            values: (1..=30).map(|k| 50.0 * k as f64).collect(),
        }
    }
}

fn default_variant() -> Variant {
    Variant::Esmlr
}
fn default_mode() -> FeatureMode {
    FeatureMode::Spectral
}
fn default_a() -> f64 {
    10.0
}
fn default_b() -> f64 {
    -10.0
}
fn default_sigma() -> f64 {
    0.85
}
fn default_max_iter() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-6
}
fn default_sweeps() -> usize {
    10
}
fn default_thresholds() -> Vec<usize> {
    ApSpec::default().thresholds
}
fn default_connectivity() -> u32 {
    4
}
fn default_share() -> f64 {
    crate::emaps::DEFAULT_SHARE
}
fn default_true() -> bool {
    true
}
fn default_trials() -> usize {
    10
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("esmlr_out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Band-sequential cube; needs `ground_truth` too.
    #[serde(default)]
    pub cube: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    /// Generated scene used instead of files.
    #[serde(default)]
    pub synthetic: Option<SceneSpec>,
    #[serde(default)]
    pub class_names: Option<Vec<String>>,

    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_mode")]
    pub mode: FeatureMode,
    #[serde(default)]
    pub activation: ActivationKind,
    /// Random feature dimension; 300, or 500 under MFL, when absent.
    #[serde(default)]
    pub l: Option<usize>,
    /// `C = 2^a`.
    #[serde(default = "default_a")]
    pub a: f64,
    /// `λ = 2^b`.
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub kernel_input: KernelInput,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_sweeps")]
    pub admm_sweeps: usize,

    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<usize>,
    #[serde(default = "default_connectivity")]
    pub connectivity: u32,
    #[serde(default = "default_share")]
    pub pca_share: f64,

    /// Training samples per class; 10 when neither this nor `train_counts` is set.
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub train_counts: Option<TrainCounts>,
    #[serde(default = "default_true")]
    pub cap_rule: bool,

    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_true")]
    pub write_maps: bool,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Map::new())).expect("all fields have defaults")
    }
}

fn config_err(e: impl std::fmt::Display) -> EsmlrError {
    EsmlrError::Config(e.to_string())
}

/// Applies `--key value` / `--key=value` pairs to a JSON object.
pub fn apply_overrides(doc: &mut Value, overrides: &[String]) -> Result<()> {
    let mut it = overrides.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| config_err(format!("expected --field, got '{arg}'")))?;
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k.to_owned(), v.to_owned()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| config_err(format!("--{key} needs a value")))?;
                (key.to_owned(), v.clone())
            }
        };
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        let path: Vec<String> = key.split('.').map(|s| s.replace('-', "_")).collect();
        let mut node = &mut *doc;
        for (i, part) in path.iter().enumerate() {
            let obj = match node {
                Value::Object(m) => m,
                other => {
                    *other = Value::Object(Map::new());
                    other.as_object_mut().expect("just made an object")
                }
            };
            if i + 1 == path.len() {
                obj.insert(part.clone(), value.clone());
                break;
            }
            node = obj.entry(part.clone()).or_insert_with(|| Value::Object(Map::new()));
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads a JSON config, applies overrides and validates the result.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Value =
            serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        if !doc.is_object() {
            return Err(config_err("config must be a JSON object"));
        }
        apply_overrides(&mut doc, overrides)?;
        Self::from_value(doc)
    }

    pub fn from_value(doc: Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn hidden(&self) -> usize {
        self.l.unwrap_or(match self.mode {
            FeatureMode::Mfl => 500,
            _ => 300,
        })
    }

    pub fn ap_spec(&self) -> Result<ApSpec> {
        let connectivity = Connectivity::from_count(self.connectivity)
            .ok_or_else(|| config_err(format!("connectivity must be 4 or 8, got {}", self.connectivity)))?;
        let spec = ApSpec {
            thresholds: self.thresholds.clone(),
            connectivity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn split_mode(&self) -> Result<SplitMode> {
        match (&self.train_counts, self.q) {
            (Some(_), Some(_)) => Err(config_err("set either q or train_counts, not both")),
            (Some(c), None) => Ok(SplitMode::Explicit(c.resolve()?)),
            (None, q) => Ok(SplitMode::PerClass(q.unwrap_or(10))),
        }
    }

    /// Pipeline of trial `seed`.
    pub fn pipeline(&self, seed: u64) -> PipelineSpec {
        let mut lorsal = LorsalConfig::new(2f64.powf(self.b));
        lorsal.mu = self.mu;
        lorsal.max_iter = self.max_iter;
        lorsal.tol = self.tol;
        lorsal.admm_sweeps = self.admm_sweeps;
        PipelineSpec {
            variant: self.variant,
            mode: self.mode,
            activation: self.activation,
            hidden: self.hidden(),
            map_seed: seed,
            sigma: self.sigma,
            ridge: RidgeConfig { c: 2f64.powf(self.a) },
            lorsal,
            kernel_input: self.kernel_input,
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be >= 1"));
        }
        match (&self.cube, &self.ground_truth, &self.synthetic) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => {}
            (None, None, None) => return Err(config_err("no dataset: set cube and ground_truth, or synthetic")),
            (_, _, Some(_)) => return Err(config_err("synthetic excludes cube and ground_truth")),
            _ => return Err(config_err("cube and ground_truth go together")),
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(config_err("a and b must be finite"));
        }
        if !(self.pca_share > 0.0 && self.pca_share <= 1.0) {
            return Err(config_err(format!("pca_share must be in (0, 1], got {}", self.pca_share)));
        }
        self.ap_spec()?;
        self.split_mode()?;
        self.pipeline(self.base_seed).validate()?;
        if !(self.sigma > 0.0) {
            return Err(config_err(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if let Some(s) = &self.sweep {
            s.validate()?;
        }
        Ok(())
    }

    fn with_axis(&self, axis: SweepAxis, value: f64) -> Self {
        let mut cfg = self.clone();
        match axis {
            SweepAxis::L => cfg.l = Some(value as usize),
            SweepAxis::A => cfg.a = value,
            SweepAxis::B => cfg.b = value,
            SweepAxis::Q => {
                cfg.q = Some(value as usize);
                cfg.train_counts = None;
            }
        }
        cfg
    }
}

/// Normalized, flattened data shared by every trial.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub height: usize,
    pub width: usize,
    pub dataset: LabeledDataset,
    pub spatial: Option<DMatrix<f64>>,
    pub ground_truth: GroundTruth,
}

impl PreparedData {
    pub fn class_count(&self) -> usize {
        self.dataset.class_count
    }

    fn inputs(&self, mode: FeatureMode) -> Result<DMatrix<f64>> {
        TrainInput {
            spectral: Some(&self.dataset.features),
            spatial: self.spatial.as_ref(),
        }
        .assemble(mode)
    }
}

/// Loads (or generates) the cube and ground truth, normalizing the cube.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(HsiCube, GroundTruth)> {
    let (cube, gt) = match (&cfg.synthetic, &cfg.cube, &cfg.ground_truth) {
        (Some(spec), _, _) => {
            let s = generate_scene(spec)?;
            (s.cube, s.ground_truth)
        }
        (None, Some(c), Some(g)) => (load_cube(c)?, load_ground_truth(g)?),
        _ => return Err(config_err("no dataset configured")),
    };
    Ok((normalize_unit_max(cube)?, gt))
}

fn emaps_of(cube: &HsiCube, cfg: &ExperimentConfig) -> Result<EmapStack> {
    build_emaps(cube, &cfg.ap_spec()?, cfg.pca_share)
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (cube, gt) = load_data(cfg)?;
    let dataset = flatten_labeled(&cube, &gt)?;
    let spatial = if cfg.mode.needs_spatial() {
        Some(emaps_of(&cube, cfg)?.feature_block(&dataset.pixel_index).h)
    } else {
        None
    };
    Ok(PreparedData {
        height: cube.height(),
        width: cube.width(),
        dataset,
        spatial,
        ground_truth: gt,
    })
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub report: MetricsReport,
    /// `(row-major pixel, predicted label)` for every test sample.
    pub predictions: Vec<(usize, usize)>,
}

pub fn run_trial(cfg: &ExperimentConfig, data: &PreparedData, trial: usize) -> Result<TrialOutcome> {
    let seed = cfg.trial_seed(trial);
    let ds = &data.dataset;
    let split = split_per_class(
        ds,
        &SplitSpec {
            mode: cfg.split_mode()?,
            seed,
            cap_rule: cfg.cap_rule,
        },
    )?;
    let x = data.inputs(cfg.mode)?;
    let x_train = select_columns(&x, &split.train_idx);
    let y_train: Vec<usize> = split.train_idx.iter().map(|&j| ds.labels[j]).collect();
    let x_test = select_columns(&x, &split.test_idx);
    let y_test: Vec<usize> = split.test_idx.iter().map(|&j| ds.labels[j]).collect();

    let spec = cfg.pipeline(seed);
    let t0 = Instant::now();
    let model = train(&spec, &x_train, &y_train, ds.class_count)?;
    let train_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let pred = predict(&model, &x_test)?;
    let test_seconds = t1.elapsed().as_secs_f64();

    let cm = confusion(&y_test, &pred, ds.class_count)?;
    let mut report = MetricsReport::from_confusion(cm, cfg.variant.name(), cfg.mode.name(), trial, seed)?;
    report.train_seconds = train_seconds;
    report.test_seconds = test_seconds;
    let predictions = split
        .test_idx
        .iter()
        .zip(&pred)
        .map(|(&j, &p)| {
            let (r, c) = ds.pixel_index[j];
            (r * data.width + c, p)
        })
        .collect();
    Ok(TrialOutcome { report, predictions })
}

/// Worker count from `ESMLR_THREADS`, or all cores when unset.
pub fn thread_count() -> Result<usize> {
    match std::env::var("ESMLR_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(config_err(format!("ESMLR_THREADS must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs every trial; results come back in trial order whatever the
/// scheduling.
pub fn run_trials(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Vec<Result<TrialOutcome>>> {
    run_trials_on(cfg, data, thread_count()?)
}

/// [`run_trials`] with an explicit worker count.
pub fn run_trials_on(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    threads: usize,
) -> Result<Vec<Result<TrialOutcome>>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EsmlrError::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|k| run_trial(cfg, data, k))
            .collect()
    }))
}

/// Binary PGM (P5) with one label per byte.
pub fn write_label_map(path: &Path, height: usize, width: usize, labels: &[u8]) -> Result<()> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(labels);
    fs::write(path, bytes).map_err(|e| EsmlrError::io(path, e))
}

/// Reads a map written by [`write_label_map`]: `(height, width, labels)`.
pub fn read_label_map(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| EsmlrError::io(path, e))?;
    let bad = || EsmlrError::Format(format!("{}: not a P5 graymap", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let dim = |s: &str| s.parse::<usize>().map_err(|_| bad());
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let (w, h) = (dim(&fields[1])?, dim(&fields[2])?);
    if bytes.len() < pos || bytes.len() - pos != w * h {
        return Err(bad());
    }
    Ok((h, w, bytes[pos..].to_vec()))
}

/// Distinct colors: a fixed table, then evenly spaced hues.
fn class_color(label: usize) -> (u8, u8, u8) {
    const TABLE: [(u8, u8, u8); 16] = [
        (230, 25, 75),
        (60, 180, 75),
        (255, 225, 25),
        (0, 130, 200),
        (245, 130, 48),
        (145, 30, 180),
        (70, 240, 240),
        (240, 50, 230),
        (210, 245, 60),
        (250, 190, 212),
        (0, 128, 128),
        (220, 190, 255),
        (170, 110, 40),
        (255, 250, 200),
        (128, 0, 0),
        (170, 255, 195),
    ];
    if label == 0 {
        return (0, 0, 0);
    }
    if let Some(&c) = TABLE.get(label - 1) {
        return c;
    }
    let hue = ((label * 137) % 360) as f64 / 60.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |v: f64| (v * 255.0).round() as u8;
    (q(r), q(g), q(b))
}

pub fn legend_csv(class_count: usize, names: Option<&[String]>) -> String {
    let mut out = String::from("label,class_name,r,g,b\n0,unclassified,0,0,0\n");
    for k in 1..=class_count {
        let name = names
            .and_then(|n| n.get(k - 1))
            .cloned()
            .unwrap_or_else(|| format!("class_{k}"));
        let (r, g, b) = class_color(k);
        let _ = writeln!(out, "{k},{},{r},{g},{b}", name.replace(',', ";"));
    }
    out
}

fn timings_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("trial,seed,train_s,test_s,total_s\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.trial,
            r.trial_seed,
            r.train_seconds,
            r.test_seconds,
            r.total_seconds()
        );
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| EsmlrError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value).expect("serializable"))
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    status: &'static str,
    failed_trials: Vec<usize>,
    config: &'a ExperimentConfig,
    trial_seeds: Vec<u64>,
    files: Vec<String>,
}

fn manifest<'a>(
    command: &'static str,
    cfg: &'a ExperimentConfig,
    failed: Vec<usize>,
    files: Vec<String>,
) -> Manifest<'a> {
    Manifest {
        tool: "esmlr",
        version: env!("CARGO_PKG_VERSION"),
        command,
        status: if failed.is_empty() { "complete" } else { "partial" },
        failed_trials: failed,
        config: cfg,
        trial_seeds: (0..cfg.trials).map(|k| cfg.trial_seed(k)).collect(),
        files,
    }
}

#[derive(Debug, Clone, Serialize)]
struct SummaryFile<'a> {
    variant: &'a str,
    mode: &'a str,
    summary: Option<Summary>,
    reports: &'a [MetricsReport],
}

/// What a finished experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub reports: Vec<MetricsReport>,
    pub summary: Summary,
    pub out_dir: PathBuf,
}

fn split_outcomes(outcomes: Vec<Result<TrialOutcome>>) -> (Vec<TrialOutcome>, Vec<(usize, EsmlrError)>) {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(t) => ok.push(t),
            Err(e) => failed.push((k, e)),
        }
    }
    (ok, failed)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| EsmlrError::io(dir, e))
}

/// Runs `cfg.trials` trials and writes `trials.csv`, `timings.csv`,
/// `summary.json`, `map_trial<k>.pgm`, `legend.csv` and `manifest.json`.
///
/// If any trial fails, the successful ones are still written, the manifest
/// is marked partial and the first error is returned.
pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let data = prepare(cfg)?;
    if data.class_count() > 255 {
        return Err(EsmlrError::InvalidInput("label maps hold at most 255 classes".into()));
    }
    let (outcomes, failed) = split_outcomes(run_trials(cfg, &data)?);
    let out = &cfg.out_dir;
    create_dir(out)?;

    let mut files = vec![
        "trials.csv".to_owned(),
        "timings.csv".to_owned(),
        "summary.json".to_owned(),
        "legend.csv".to_owned(),
    ];
    let n = data.height * data.width;
    if cfg.write_maps {
        for o in &outcomes {
            let mut map = vec![0u8; n];
            for &(p, l) in &o.predictions {
                map[p] = l as u8;
            }
            let name = format!("map_trial{}.pgm", o.report.trial);
            write_label_map(&out.join(&name), data.height, data.width, &map)?;
            files.push(name);
        }
    }
    let reports: Vec<MetricsReport> = outcomes.into_iter().map(|o| o.report).collect();
    write_text(&out.join("trials.csv"), &trials_csv(&reports, false))?;
    write_text(&out.join("timings.csv"), &timings_csv(&reports))?;
    write_text(
        &out.join("legend.csv"),
        &legend_csv(data.class_count(), cfg.class_names.as_deref()),
    )?;
    let summary = aggregate(&reports).ok();
    write_json(
        &out.join("summary.json"),
        &SummaryFile {
            variant: cfg.variant.name(),
            mode: cfg.mode.name(),
            summary: summary.clone(),
            reports: &reports,
        },
    )?;
    let failed_idx: Vec<usize> = failed.iter().map(|f| f.0).collect();
    write_json(&out.join("manifest.json"), &manifest("experiment", cfg, failed_idx, files))?;

    if let Some((k, e)) = failed.into_iter().next() {
        eprintln!("trial {k} failed; outputs in {} are partial", out.display());
        return Err(e);
    }
    Ok(ExperimentResult {
        reports,
        summary: summary.expect("at least one trial succeeded"),
        out_dir: out.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: Summary,
}

/// One experiment per axis value on shared data; writes `sweep.csv`,
/// `sweep_timings.csv`, `sweep_summary.json` and `manifest.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig, sweep: &SweepSpec) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    sweep.validate()?;
    let variants: Vec<ExperimentConfig> = sweep
        .values
        .iter()
        .map(|&v| cfg.with_axis(sweep.axis, v))
        .collect();
    for v in &variants {
        v.validate()?;
    }
    let data = prepare(cfg)?;
    let mut csv = String::new();
    let mut timing = String::from("axis,value,trial,seed,train_s,test_s,total_s\n");
    let mut points = Vec::new();
    for (value, vcfg) in sweep.values.iter().zip(&variants) {
        let mut reports = Vec::with_capacity(vcfg.trials);
        for o in run_trials(vcfg, &data)? {
            reports.push(o?.report);
        }
        let block = trials_csv(&reports, false);
        let mut lines = block.lines();
        let header = lines.next().unwrap_or_default();
        if csv.is_empty() {
            let _ = writeln!(csv, "axis,value,{header}");
        }
        for line in lines {
            let _ = writeln!(csv, "{},{value},{line}", sweep.axis.name());
        }
        for r in &reports {
            let _ = writeln!(
                timing,
                "{},{value},{},{},{},{},{}",
                sweep.axis.name(),
                r.trial,
                r.trial_seed,
                r.train_seconds,
                r.test_seconds,
                r.total_seconds()
            );
        }
        eprintln!("{} = {value}: done", sweep.axis.name());
        points.push(SweepPoint {
            value: *value,
            summary: aggregate(&reports)?,
        });
    }
    let out = &cfg.out_dir;
    create_dir(out)?;
    write_text(&out.join("sweep.csv"), &csv)?;
    write_text(&out.join("sweep_timings.csv"), &timing)?;
    write_json(&out.join("sweep_summary.json"), &(sweep, &points))?;
    let files = ["sweep.csv", "sweep_timings.csv", "sweep_summary.json"]
        .map(String::from)
        .to_vec();
    write_json(&out.join("manifest.json"), &manifest("sweep", cfg, Vec::new(), files))?;
    Ok(points)
}

/// Writes the EMAP stack of the configured cube to `<out_dir>/emaps.f32`
/// with its manifest `emaps.json`.
pub fn cmd_emaps(cfg: &ExperimentConfig) -> Result<EmapStack> {
    cfg.validate()?;
    let (cube, _) = load_data(cfg)?;
    let stack = emaps_of(&cube, cfg)?;
    create_dir(&cfg.out_dir)?;
    stack.write(&cfg.out_dir.join("emaps.f32"))?;
    let files = vec!["emaps.f32".to_owned(), "emaps.json".to_owned()];
    write_json(&cfg.out_dir.join("manifest.json"), &manifest("emaps", cfg, Vec::new(), files))?;
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn synthetic_cfg(out: &Path) -> ExperimentConfig {
        ExperimentConfig::from_value(json!({
            "synthetic": {"height": 16, "width": 16, "bands": 8, "classes": 3, "noise": 0.03, "seed": 2},
            "trials": 2,
            "l": 40,
            "q": 5,
            "out_dir": out,
        }))
        .unwrap()
    }

    #[test]
    fn overrides_set_nested_and_typed_fields() {
        let mut doc = json!({"trials": 10, "sweep": {"axis": "L", "values": [50]}});
        let args: Vec<String> = ["--trials", "3", "--variant=k-esmlr", "--sweep.axis", "b", "--base-seed", "9"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        apply_overrides(&mut doc, &args).unwrap();
        assert_eq!(doc["trials"], 3);
        assert_eq!(doc["variant"], "k-esmlr");
        assert_eq!(doc["sweep"]["axis"], "b");
        assert_eq!(doc["base_seed"], 9);
        assert!(apply_overrides(&mut doc, &["--trials".into()]).is_err());
        assert!(apply_overrides(&mut doc, &["trials".into(), "1".into()]).is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = ExperimentConfig::default();
        assert_eq!((cfg.a, cfg.b, cfg.trials, cfg.hidden()), (10.0, -10.0, 10, 300));
        assert!(cfg.validate().is_err(), "no dataset");
        let bad = |v: Value| ExperimentConfig::from_value(v).unwrap_err().exit_code();
        let base = json!({"synthetic": {"height": 4, "width": 4, "bands": 2, "classes": 2, "noise": 0.0, "seed": 0}});
        let with = |k: &str, v: Value| {
            let mut d = base.clone();
            d[k] = v;
            d
        };
        assert_eq!(bad(with("trials", json!(0))), 1);
        assert_eq!(bad(with("connectivity", json!(6))), 1);
        assert_eq!(bad(with("unknown_field", json!(1))), 1);
        assert_eq!(bad(with("cube", json!("x.raw"))), 1);
        let mut both = with("q", json!(3));
        both["train_counts"] = json!("pavia");
        assert_eq!(bad(both), 1);
        let mut mfl = with("variant", json!("k-smlr"));
        mfl["mode"] = json!("mfl");
        assert_eq!(bad(mfl), 1);
        assert_eq!(
            ExperimentConfig::from_value(with("mode", json!("mfl"))).unwrap().hidden(),
            500
        );
    }

    #[test]
    fn train_count_presets() {
        assert_eq!(TrainCounts::Preset("indian_pines".into()).resolve().unwrap().iter().sum::<usize>(), 515);
        assert_eq!(TrainCounts::Preset("pavia".into()).resolve().unwrap().len(), 9);
        assert_eq!(TrainCounts::Preset("1,2,3".into()).resolve().unwrap(), vec![1, 2, 3]);
        assert!(TrainCounts::Preset("mars".into()).resolve().is_err());
    }

    #[test]
    fn sweep_validation() {
        assert_eq!(SweepSpec::hidden_grid().values.len(), 30);
        assert_eq!(SweepSpec::hidden_grid().values[29], 1500.0);
        let s = |axis, values: Vec<f64>| SweepSpec { axis, values }.validate();
        assert!(s(SweepAxis::B, vec![-15.0, -12.0, 0.0]).is_ok());
        assert!(s(SweepAxis::B, vec![]).is_err());
        assert!(s(SweepAxis::A, vec![2.0, 1.0]).is_err());
        assert!(s(SweepAxis::L, vec![10.5]).is_err());
        assert!(s(SweepAxis::Q, vec![0.0]).is_err());
    }

    #[test]
    fn label_map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        let labels: Vec<u8> = (0..12).map(|i| (i % 4) as u8).collect();
        write_label_map(&p, 3, 4, &labels).unwrap();
        assert_eq!(read_label_map(&p).unwrap(), (3, 4, labels));
        fs::write(&p, b"P6\n1 1\n255\n\0").unwrap();
        assert!(read_label_map(&p).is_err());
    }

    #[test]
    fn legend_lists_every_class() {
        let names = vec!["corn".to_owned(), "a,b".to_owned()];
        let l = legend_csv(3, Some(&names));
        let lines: Vec<&str> = l.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "1,corn,230,25,75");
        assert!(lines[3].starts_with("2,a;b,"));
        assert!(lines[4].starts_with("3,class_3,"));
        let colors: std::collections::HashSet<_> = (1..=40).map(class_color).collect();
        assert!(colors.len() > 30);
    }

    #[test]
    fn experiment_writes_consistent_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_cfg(dir.path());
        let res = cmd_experiment(&cfg).unwrap();
        assert_eq!(res.reports.len(), 2);
        for f in ["trials.csv", "timings.csv", "summary.json", "legend.csv", "manifest.json", "map_trial0.pgm", "map_trial1.pgm"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let gt = generate_scene(cfg.synthetic.as_ref().unwrap()).unwrap().ground_truth;
        for r in &res.reports {
            let (_, _, map) = read_label_map(&dir.path().join(format!("map_trial{}.pgm", r.trial))).unwrap();
            let scored: Vec<(usize, usize)> = map
                .iter()
                .zip(gt.labels())
                .filter(|(&m, _)| m != 0)
                .map(|(&m, &g)| (g as usize, m as usize))
                .collect();
            let correct = scored.iter().filter(|(g, m)| g == m).count();
            assert_eq!(correct as f64 / scored.len() as f64, r.oa);
            assert_eq!(scored.len() as u64, r.confusion.total());
        }
        let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["status"], "complete");
        assert_eq!(manifest["trial_seeds"], json!([0, 1]));
    }

    #[test]
    fn mfl_and_emaps_commands() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synthetic_cfg(dir.path());
        cfg.mode = FeatureMode::Mfl;
        cfg.thresholds = vec![5, 20];
        cfg.trials = 1;
        let res = cmd_experiment(&cfg).unwrap();
        assert!(res.summary.oa.mean > 0.8);
        let stack = cmd_emaps(&cfg).unwrap();
        assert_eq!(stack.feature_count() % 5, 0);
        let bytes = fs::metadata(dir.path().join("emaps.f32")).unwrap().len();
        assert_eq!(bytes as usize, stack.feature_count() * 16 * 16 * 4);
    }

    #[test]
    fn degenerate_sweep_matches_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = synthetic_cfg(&dir.path().join("exp"));
        cmd_experiment(&cfg).unwrap();
        let mut scfg = cfg.clone();
        scfg.out_dir = dir.path().join("sweep");
        let sweep = SweepSpec { axis: SweepAxis::B, values: vec![cfg.b] };
        cmd_sweep(&scfg, &sweep).unwrap();
        let trials = fs::read_to_string(dir.path().join("exp/trials.csv")).unwrap();
        let swept = fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
        let stripped: Vec<String> = swept
            .lines()
            .map(|l| l.splitn(3, ',').nth(2).unwrap().to_owned())
            .collect();
        assert_eq!(stripped, trials.lines().map(str::to_owned).collect::<Vec<_>>());
    }

    #[test]
    fn sweep_rows_per_value() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synthetic_cfg(dir.path());
        cfg.trials = 1;
        let sweep = SweepSpec { axis: SweepAxis::L, values: vec![10.0, 20.0, 30.0] };
        let pts = cmd_sweep(&cfg, &sweep).unwrap();
        assert_eq!(pts.len(), 3);
        let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(3).unwrap().starts_with("L,30,0,"));
    }

    #[test]
    fn missing_data_file_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_value(json!({
            "cube": dir.path().join("nope.raw"),
            "ground_truth": dir.path().join("nope.labels"),
            "out_dir": dir.path(),
        }))
        .unwrap();
        assert_eq!(cmd_emaps(&cfg).unwrap_err().exit_code(), 2);
        assert_eq!(cmd_experiment(&cfg).unwrap_err().exit_code(), 2);
    }
}
