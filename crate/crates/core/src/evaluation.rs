//! Confusion matrices, accuracy metrics and multi-trial aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{EsmlrError, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_count: usize,
    /// Row-major `M x M` counts.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(class_count: usize) -> Self {
        ConfusionMatrix {
            class_count,
            counts: vec![0; class_count * class_count],
        }
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[(truth - 1) * self.class_count + (pred - 1)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_count)
            .map(|m| self.counts[m * self.class_count + m])
            .sum()
    }

    pub fn row_sum(&self, m: usize) -> u64 {
        let k = self.class_count;
        self.counts[m * k..(m + 1) * k].iter().sum()
    }

    pub fn col_sum(&self, m: usize) -> u64 {
        let k = self.class_count;
        (0..k).map(|r| self.counts[r * k + m]).sum()
    }
}

/// Tallies label pairs; labels are 1-based.
pub fn confusion(y_true: &[usize], y_pred: &[usize], class_count: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(EsmlrError::Dimension(format!(
            "{} true labels vs {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(class_count);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == 0 || t > class_count || p == 0 || p > class_count {
            return Err(EsmlrError::InvalidInput(format!(
                "label pair ({t}, {p}) outside 1..={class_count}"
            )));
        }
        cm.counts[(t - 1) * class_count + (p - 1)] += 1;
    }
    Ok(cm)
}

fn nonempty(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(EsmlrError::InvalidInput("confusion matrix is empty".into())),
        n => Ok(n as f64),
    }
}

pub fn oa(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(cm.trace() as f64 / nonempty(cm)?)
}

/// Accuracy of every true class; fails if some class has no samples.
pub fn per_class(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    nonempty(cm)?;
    (0..cm.class_count)
        .map(|m| match cm.row_sum(m) {
            0 => Err(EsmlrError::InvalidInput(format!("class {} has no samples", m + 1))),
            r => Ok(cm.counts[m * cm.class_count + m] as f64 / r as f64),
        })
        .collect()
}

pub fn aa(cm: &ConfusionMatrix) -> Result<f64> {
    let acc = per_class(cm)?;
    Ok(acc.iter().sum::<f64>() / acc.len() as f64)
}

/// Cohen's kappa. When chance agreement is 1 the value is 1 for perfect
/// agreement and 0 otherwise.
///
/// Evaluated as `(N·trace - Σ row·col) / (N² - Σ row·col)` in integers, so
/// the only rounding is the final division.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    nonempty(cm)?;
    let n = cm.total() as i128;
    let trace = cm.trace() as i128;
    let chance: i128 = (0..cm.class_count)
        .map(|m| cm.row_sum(m) as i128 * cm.col_sum(m) as i128)
        .sum();
    if chance == n * n {
        return Ok(if trace == n { 1.0 } else { 0.0 });
    }
    Ok((n * trace - chance) as f64 / (n * n - chance) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub variant: String,
    pub mode: String,
    pub trial: usize,
    pub trial_seed: u64,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub per_class: Vec<f64>,
    pub train_seconds: f64,
    pub test_seconds: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(
        cm: ConfusionMatrix,
        variant: impl Into<String>,
        mode: impl Into<String>,
        trial: usize,
        trial_seed: u64,
    ) -> Result<Self> {
        Ok(MetricsReport {
            variant: variant.into(),
            mode: mode.into(),
            trial,
            trial_seed,
            oa: oa(&cm)?,
            aa: aa(&cm)?,
            kappa: kappa(&cm)?,
            per_class: per_class(&cm)?,
            train_seconds: 0.0,
            test_seconds: 0.0,
            confusion: cm,
        })
    }

    pub fn total_seconds(&self) -> f64 {
        self.train_seconds + self.test_seconds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Arithmetic mean and sample (n - 1) standard deviation; std is 0 for one value.
    pub fn of(values: &[f64]) -> Self {
        if let Some(&first) = values.first() {
            if values.iter().all(|&v| v == first) {
                return MeanStd { mean: first, std: 0.0 };
            }
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub oa: MeanStd,
    pub aa: MeanStd,
    pub kappa: MeanStd,
    pub per_class: Vec<MeanStd>,
    pub mean_train_seconds: f64,
    pub mean_test_seconds: f64,
    pub mean_total_seconds: f64,
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Summary> {
    let first = reports
        .first()
        .ok_or_else(|| EsmlrError::InvalidInput("no reports to aggregate".into()))?;
    let m = first.per_class.len();
    if reports.iter().any(|r| r.per_class.len() != m) {
        return Err(EsmlrError::InvalidInput("reports disagree on class count".into()));
    }
    let pick = |f: &dyn Fn(&MetricsReport) -> f64| -> Vec<f64> { reports.iter().map(f).collect() };
    let mean = |v: Vec<f64>| MeanStd::of(&v).mean;
    Ok(Summary {
        trials: reports.len(),
        oa: MeanStd::of(&pick(&|r| r.oa)),
        aa: MeanStd::of(&pick(&|r| r.aa)),
        kappa: MeanStd::of(&pick(&|r| r.kappa)),
        per_class: (0..m).map(|c| MeanStd::of(&pick(&|r| r.per_class[c]))).collect(),
        mean_train_seconds: mean(pick(&|r| r.train_seconds)),
        mean_test_seconds: mean(pick(&|r| r.test_seconds)),
        mean_total_seconds: mean(pick(&|r| r.total_seconds())),
    })
}

/// One CSV row per report. Timing columns make the output run-dependent,
/// so they are opt-in.
pub fn trials_csv(reports: &[MetricsReport], with_timings: bool) -> String {
    let m = reports.first().map_or(0, |r| r.per_class.len());
    let mut out = String::from("trial,variant,mode,seed,oa,aa,kappa");
    for c in 1..=m {
        let _ = write!(out, ",class_{c}");
    }
    if with_timings {
        out.push_str(",train_s,test_s,total_s");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.trial, r.variant, r.mode, r.trial_seed, r.oa, r.aa, r.kappa
        );
        for v in &r.per_class {
            let _ = write!(out, ",{v}");
        }
        if with_timings {
            let _ = write!(out, ",{},{},{}", r.train_seconds, r.test_seconds, r.total_seconds());
        }
        out.push('\n');
    }
    out
}
