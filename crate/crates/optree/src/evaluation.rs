//! Metrics (accuracy, RAE, RRSE), per-model evaluation, and the
//! repeated-split experiment protocol: split, tune, retrain, test, and
//! aggregate over seeded runs.

use serde::Serialize;

use crate::data::{apply_standardize, split, Dataset, SplitSpec, Task};
use crate::error::{Error, Result};
use crate::tree::{ModelTree, Prediction};
use crate::tuner::{tune, TunerConfig};
use crate::data::PreprocessParams;

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(predictions: &[T], actuals: &[T]) -> Result<f64> {
    if predictions.len() != actuals.len() {
        return Err(Error::dimension(format!(
            "{} predictions vs {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::data("accuracy of an empty list"));
    }
    let hits = predictions
        .iter()
        .zip(actuals)
        .filter(|(p, a)| p == a)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Relative absolute error: total absolute error normalized by the error
/// of predicting the actuals' own mean.
pub fn rae(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    let (num, den) = deviation_sums(predictions, actuals, |d| d.abs())?;
    Ok(num / den)
}

/// Root relative squared error, normalized like [`rae`].
pub fn rrse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    let (num, den) = deviation_sums(predictions, actuals, |d| d * d)?;
    Ok((num / den).sqrt())
}

fn deviation_sums(
    predictions: &[f64],
    actuals: &[f64],
    loss: impl Fn(f64) -> f64,
) -> Result<(f64, f64)> {
    if predictions.len() != actuals.len() {
        return Err(Error::dimension(format!(
            "{} predictions vs {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::data("error metric of an empty list"));
    }
    let mean = actuals.iter().sum::<f64>() / actuals.len() as f64;
    let num: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| loss(p - a))
        .sum();
    let den: f64 = actuals.iter().map(|a| loss(a - mean)).sum();
    if den <= 0.0 {
        return Err(Error::data(
            "relative error undefined: actuals are all identical",
        ));
    }
    Ok((num, den))
}

/// Test metrics of one trained tree.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub task: Task,
    pub accuracy: Option<f64>,
    pub rae: Option<f64>,
    pub rrse: Option<f64>,
    pub leaf_count: usize,
    pub solver_status: String,
    pub solver_gap: f64,
    pub wall_time: f64,
}

/// Evaluates a tree on encoded (not yet standardized) labeled data using
/// the tree's own stored preprocessing.
pub fn evaluate(tree: &ModelTree, test: &Dataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::data("empty evaluation set"));
    }
    let test_s = apply_standardize(test, &tree.preprocess.standardization)?;
    let mut preds_num = Vec::new();
    let mut preds_cls = Vec::new();
    for row in &test_s.features {
        match tree.predict_encoded(row)? {
            Prediction::Value(v) => preds_num.push(v),
            Prediction::Class(k) => preds_cls.push(k),
        }
    }
    let (acc, rae_v, rrse_v) = match test.task {
        Task::Regression => {
            let y = test.labels.numeric();
            (None, Some(rae(&preds_num, y)?), Some(rrse(&preds_num, y)?))
        }
        Task::Binary | Task::Multiclass => {
            (Some(accuracy(&preds_cls, test.labels.classes())?), None, None)
        }
    };
    Ok(MetricsReport {
        task: test.task,
        accuracy: acc,
        rae: rae_v,
        rrse: rrse_v,
        leaf_count: tree.count_leaves(),
        solver_status: tree.provenance.status.clone(),
        solver_gap: tree.provenance.gap,
        wall_time: tree.provenance.wall_time,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Number of repeated splits (seeds base_seed..base_seed+runs).
    pub runs: usize,
    pub base_seed: u64,
    /// Interpreted by [`SplitSpec`]; the protocol default (0.8, 0.2, 0.2)
    /// nests as 0.64/0.16/0.20 train/validation/test.
    pub proportions: (f64, f64, f64),
    pub tuner: TunerConfig,
    /// Worker threads across runs.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            runs: 30,
            base_seed: 0,
            proportions: (0.8, 0.2, 0.2),
            tuner: TunerConfig::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    pub selected: Option<(u32, u32, f64)>,
    pub metrics: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Population mean and standard deviation over completed runs.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub stddev: f64,
}

/// Streaming (Welford) accumulator; the tests cross-check it against a
/// two-pass computation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn aggregate(&self) -> Aggregate {
        Aggregate {
            mean: self.mean,
            stddev: if self.n == 0 {
                f64::NAN
            } else {
                (self.m2 / self.n as f64).sqrt()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub task: Task,
    pub requested_runs: usize,
    pub completed_runs: usize,
    /// False when any run failed; aggregates cover completed runs only.
    pub complete: bool,
    pub accuracy: Option<Aggregate>,
    pub rae: Option<Aggregate>,
    pub rrse: Option<Aggregate>,
    pub leaves: Option<Aggregate>,
    pub wall_time: Option<Aggregate>,
    pub runs: Vec<RunResult>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned Avg/StDev table over the aggregated metrics.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(&str, Aggregate)> = Vec::new();
        if let Some(a) = self.accuracy {
            rows.push(("Accuracy", a));
        }
        if let Some(a) = self.rae {
            rows.push(("RAE", a));
        }
        if let Some(a) = self.rrse {
            rows.push(("RRSE", a));
        }
        if let Some(a) = self.leaves {
            rows.push(("Leaves", a));
        }
        if let Some(a) = self.wall_time {
            rows.push(("Seconds", a));
        }
        let mut out = String::new();
        out.push_str(&format!(
            "runs: {}/{} completed\n",
            self.completed_runs, self.requested_runs
        ));
        out.push_str(&format!("{:<10} {:>12} {:>12}\n", "Metric", "Avg", "StDev"));
        for (name, agg) in rows {
            out.push_str(&format!(
                "{:<10} {:>12.4} {:>12.4}\n",
                name, agg.mean, agg.stddev
            ));
        }
        out
    }
}

/// Repeated-split protocol: for run r with seed base+r, carve
/// train/validation/test, tune (including the merged retrain), evaluate
/// on the held-out test fold, and aggregate across runs.
pub fn run_experiment(
    data: &Dataset,
    preprocess: &PreprocessParams,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if cfg.runs == 0 {
        return Err(Error::config("experiment needs at least one run"));
    }
    let runs: Vec<usize> = (0..cfg.runs).collect();
    let jobs = cfg.jobs.max(1).min(cfg.runs);
    let results: Vec<RunResult> = if jobs <= 1 {
        runs.iter()
            .map(|&r| single_run(r, data, preprocess, cfg))
            .collect()
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let mut slots: Vec<Option<RunResult>> = Vec::new();
        slots.resize_with(cfg.runs, || None);
        let slots = std::sync::Mutex::new(slots);
        std::thread::scope(|scope| {
            for _ in 0..jobs {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= cfg.runs {
                        break;
                    }
                    let result = single_run(i, data, preprocess, cfg);
                    slots.lock().unwrap()[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|s| s.expect("run completed"))
            .collect()
    };

    let mut acc = Welford::default();
    let mut rae_w = Welford::default();
    let mut rrse_w = Welford::default();
    let mut leaves = Welford::default();
    let mut wall = Welford::default();
    let mut completed = 0usize;
    for r in &results {
        if let Some(m) = &r.metrics {
            completed += 1;
            if let Some(v) = m.accuracy {
                acc.push(v);
            }
            if let Some(v) = m.rae {
                rae_w.push(v);
            }
            if let Some(v) = m.rrse {
                rrse_w.push(v);
            }
            leaves.push(m.leaf_count as f64);
            wall.push(m.wall_time);
        }
    }
    if completed == 0 {
        return Err(Error::NoSolution(format!(
            "all {} experiment runs failed; first error: {}",
            cfg.runs,
            results[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    let is_classification = matches!(data.task, Task::Binary | Task::Multiclass);
    Ok(ExperimentReport {
        task: data.task,
        requested_runs: cfg.runs,
        completed_runs: completed,
        complete: completed == cfg.runs,
        accuracy: is_classification.then(|| acc.aggregate()),
        rae: (!is_classification).then(|| rae_w.aggregate()),
        rrse: (!is_classification).then(|| rrse_w.aggregate()),
        leaves: Some(leaves.aggregate()),
        wall_time: Some(wall.aggregate()),
        runs: results,
    })
}

fn single_run(
    run: usize,
    data: &Dataset,
    preprocess: &PreprocessParams,
    cfg: &ExperimentConfig,
) -> RunResult {
    let seed = cfg.base_seed + run as u64;
    let attempt = (|| -> Result<(Option<(u32, u32, f64)>, MetricsReport)> {
        let spec = SplitSpec {
            seed,
            proportions: cfg.proportions,
        };
        let (train, val, test) = split(data, &spec)?;
        let tuner_cfg = TunerConfig {
            seed,
            jobs: 1,
            ..cfg.tuner.clone()
        };
        let (tree, trace) = tune(&train, &val, preprocess, &tuner_cfg)?;
        let metrics = evaluate(&tree, &test)?;
        Ok((Some(trace.selected), metrics))
    })();
    match attempt {
        Ok((selected, metrics)) => RunResult {
            run,
            seed,
            selected,
            metrics: Some(metrics),
            error: None,
        },
        Err(e) => RunResult {
            run,
            seed,
            selected: None,
            metrics: None,
            error: Some(e.to_string()),
        },
    }
}
