//! Hyperparameter search: a progressive depth/splits schedule crossed
//! with a C grid, validation-scored, with warm starts shared along the C
//! loop at a fixed (depth, splits) cell, and a final retrain on the
//! merged train+validation data seeded from the selected solution.

use std::time::Instant;

use crate::bnb::{self, SolveStatus, SolverConfig};
use crate::data::{apply_standardize, fit_standardize, Dataset, PreprocessParams, Task};
use crate::error::{Error, Result};
use crate::evaluation;
use crate::formulation::{
    assignment_for_tree, build_for_task, extract_tree, FeatureRoles, FormulationConstants,
};
use crate::milp::WarmStart;
use crate::topology::TreeTopology;
use crate::tree::ModelTree;

#[derive(Debug, Clone)]
pub struct TunerConfig {
    pub max_depth: u32,
    pub c_grid: Vec<f64>,
    /// Per-solve wall-clock limit, seconds.
    pub time_limit: f64,
    pub multivariate: bool,
    /// None means every feature both splits and enters leaf models.
    pub roles: Option<FeatureRoles>,
    pub seed: u64,
    /// Seed each C solve with the previous C's solution at the same cell.
    pub warm_starts: bool,
    /// Worker threads across (depth, splits) cells.
    pub jobs: usize,
    /// Per-solve progress lines from the tuner itself.
    pub verbose: bool,
    /// Node-level progress from the underlying solver.
    pub solver_verbose: bool,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            max_depth: 2,
            c_grid: vec![0.1, 1.0, 10.0, 100.0],
            time_limit: 3600.0,
            multivariate: false,
            roles: None,
            seed: 0,
            warm_starts: true,
            jobs: 1,
            verbose: false,
            solver_verbose: false,
        }
    }
}

/// One tuning solve: hyperparameters, solver state, validation score.
#[derive(Debug, Clone)]
pub struct TuneRecord {
    pub depth: u32,
    pub splits: u32,
    pub c: f64,
    pub status: SolveStatus,
    pub gap: f64,
    pub seconds: f64,
    pub objective: f64,
    /// Accuracy (classification) or RAE (regression) on validation;
    /// None when no feasible solution or no validation data.
    pub val_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TuneTrace {
    pub records: Vec<TuneRecord>,
    /// Selected (depth, splits, C).
    pub selected: (u32, u32, f64),
}

impl TuneTrace {
    /// Flat CSV: one row per tuning solve.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("D,S,C,status,gap,seconds,val_score\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.depth,
                r.splits,
                r.c,
                status_name(r.status),
                r.gap,
                r.seconds,
                r.val_score.map_or(String::new(), |s| s.to_string()),
            ));
        }
        out
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Feasible => "feasible",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::NoSolutionTimeout => "no-solution-timeout",
    }
}

/// Progressive depth/splits schedule: depth 0 tests S = 0, each deeper
/// level adds the split counts its new layer makes possible, so depth n
/// contributes S in [2^(n-1), 2^n).
pub fn schedule(max_depth: u32) -> Vec<(u32, Vec<u32>)> {
    let mut out = vec![(0, vec![0])];
    for d in 1..=max_depth {
        out.push((d, ((1 << (d - 1))..(1 << d)).collect()));
    }
    out
}

/// Picks the best record: highest accuracy (classification) or lowest
/// RAE (regression), ties broken by fewer splits, then smaller C, then
/// smaller depth. Returns the record index, or None when nothing scored.
pub fn select(records: &[TuneRecord], task: Task) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in records.iter().enumerate() {
        if r.val_score.is_none() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                if better(r, &records[b], task) {
                    best = Some(i);
                }
            }
        }
    }
    best
}

fn better(a: &TuneRecord, b: &TuneRecord, task: Task) -> bool {
    let (sa, sb) = (a.val_score.unwrap(), b.val_score.unwrap());
    let improved = match task {
        Task::Regression => sa < sb,
        Task::Binary | Task::Multiclass => sa > sb,
    };
    if sa != sb {
        return improved;
    }
    if a.splits != b.splits {
        return a.splits < b.splits;
    }
    if a.c != b.c {
        return a.c < b.c;
    }
    a.depth < b.depth
}

struct CellOutput {
    records: Vec<TuneRecord>,
    trees: Vec<Option<ModelTree>>,
}

/// Runs the full loop and returns the final tree (retrained on
/// train + validation at the selected hyperparameters) plus the trace.
pub fn tune(
    train: &Dataset,
    val: &Dataset,
    preprocess: &PreprocessParams,
    cfg: &TunerConfig,
) -> Result<(ModelTree, TuneTrace)> {
    if cfg.c_grid.is_empty() || cfg.c_grid.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::config("C grid must be non-empty and strictly positive"));
    }
    if train.is_empty() {
        return Err(Error::data("empty training set"));
    }
    let cells = schedule(cfg.max_depth);
    let total_solves: usize = cells.iter().map(|(_, ss)| ss.len() * cfg.c_grid.len()).sum();
    if val.is_empty() && total_solves > 1 {
        return Err(Error::config(
            "empty validation set requires a singleton schedule and C grid; \
             nothing could be selected otherwise",
        ));
    }

    let std = fit_standardize(train)?;
    let mut params = preprocess.clone();
    params.standardization = std.clone();
    let train_s = apply_standardize(train, &std)?;
    let val_s = if val.is_empty() {
        val.clone()
    } else {
        apply_standardize(val, &std)?
    };
    let roles = cfg
        .roles
        .clone()
        .unwrap_or_else(|| FeatureRoles::all(train.num_features()));

    // Flatten (depth, S) cells; the C loop inside each cell is sequential
    // because of warm-start chaining, cells themselves are independent.
    let flat_cells: Vec<(u32, u32)> = cells
        .iter()
        .flat_map(|(d, ss)| ss.iter().map(move |&s| (*d, s)))
        .collect();
    let outputs = run_cells(&flat_cells, &train_s, &val_s, &params, &roles, cfg)?;

    let mut records = Vec::new();
    let mut trees = Vec::new();
    for out in outputs {
        records.extend(out.records);
        trees.extend(out.trees);
    }

    let sel = select(&records, train.task).ok_or_else(|| {
        Error::NoSolution("every tuning solve ended without a usable solution".into())
    })?;
    let (sel_d, sel_s, sel_c) = (records[sel].depth, records[sel].splits, records[sel].c);

    // Retrain on the merged data, warm-started from the selected tree.
    let merged = train_s.concat(&val_s)?;
    let topo = TreeTopology::new(sel_d);
    let consts = FormulationConstants::from_data(&merged, &roles, sel_c, sel_s, cfg.multivariate)?;
    let (model, layout) = build_for_task(&merged, &topo, &consts, &roles)?;
    let warm = trees[sel].as_ref().and_then(|tree| {
        assignment_for_tree(tree, &merged, &layout, &model)
            .ok()
            .map(|assignment| WarmStart { assignment })
    });
    let solver_cfg = SolverConfig {
        time_limit: cfg.time_limit,
        warm_start: warm,
        seed: cfg.seed,
        verbose: cfg.solver_verbose,
        ..SolverConfig::default()
    };
    let outcome = bnb::solve(&model, &solver_cfg)?;
    if outcome.assignment.is_none() {
        return Err(Error::NoSolution(format!(
            "final retrain at (D={sel_d}, S={sel_s}, C={sel_c}) found no feasible solution \
             within the time limit"
        )));
    }
    let tree = extract_tree(&layout, &outcome, &merged, &topo, &consts, &params)?;
    Ok((
        tree,
        TuneTrace {
            records,
            selected: (sel_d, sel_s, sel_c),
        },
    ))
}

fn run_cells(
    flat_cells: &[(u32, u32)],
    train_s: &Dataset,
    val_s: &Dataset,
    params: &PreprocessParams,
    roles: &FeatureRoles,
    cfg: &TunerConfig,
) -> Result<Vec<CellOutput>> {
    let jobs = cfg.jobs.max(1).min(flat_cells.len().max(1));
    if jobs <= 1 {
        return flat_cells
            .iter()
            .map(|&(d, s)| run_cell(d, s, train_s, val_s, params, roles, cfg))
            .collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<CellOutput>>> = Vec::new();
    slots.resize_with(flat_cells.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= flat_cells.len() {
                    break;
                }
                let (d, s) = flat_cells[i];
                let result = run_cell(d, s, train_s, val_s, params, roles, cfg);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("cell completed"))
        .collect()
}

fn run_cell(
    depth: u32,
    splits: u32,
    train_s: &Dataset,
    val_s: &Dataset,
    params: &PreprocessParams,
    roles: &FeatureRoles,
    cfg: &TunerConfig,
) -> Result<CellOutput> {
    let topo = TreeTopology::new(depth);
    let mut records = Vec::with_capacity(cfg.c_grid.len());
    let mut trees = Vec::with_capacity(cfg.c_grid.len());
    let mut warm: Option<Vec<f64>> = None;
    for &c in &cfg.c_grid {
        let consts = FormulationConstants::from_data(train_s, roles, c, splits, cfg.multivariate)?;
        let (model, layout) = build_for_task(train_s, &topo, &consts, roles)?;
        let solver_cfg = SolverConfig {
            time_limit: cfg.time_limit,
            warm_start: warm
                .clone()
                .map(|assignment| WarmStart { assignment }),
            seed: cfg.seed,
            verbose: cfg.solver_verbose,
            ..SolverConfig::default()
        };
        let started = Instant::now();
        let outcome = bnb::solve(&model, &solver_cfg)?;
        let seconds = started.elapsed().as_secs_f64();
        let mut record = TuneRecord {
            depth,
            splits,
            c,
            status: outcome.status,
            gap: if outcome.gap.is_finite() { outcome.gap } else { f64::NAN },
            seconds,
            objective: outcome.objective,
            val_score: None,
        };
        let mut tree_slot = None;
        if outcome.assignment.is_some() {
            let tree = extract_tree(&layout, &outcome, train_s, &topo, &consts, params)?;
            record.val_score = score_on(&tree, val_s);
            if cfg.warm_starts {
                warm = outcome.assignment.clone();
            }
            tree_slot = Some(tree);
        }
        if cfg.verbose {
            eprintln!(
                "[tune] D={depth} S={splits} C={c} status={} gap={:.4} t={seconds:.2}s score={:?}",
                status_name(record.status),
                record.gap,
                record.val_score
            );
        }
        records.push(record);
        trees.push(tree_slot);
    }
    Ok(CellOutput { records, trees })
}

/// Validation score of a candidate: accuracy for classification
/// (higher better), RAE for regression (lower better). With no
/// validation data the score stays None and selection falls back to the
/// singleton record.
fn score_on(tree: &ModelTree, val_s: &Dataset) -> Option<f64> {
    if val_s.is_empty() {
        // Singleton configurations carry a sentinel so selection works.
        return Some(0.0);
    }
    let mut preds_num = Vec::new();
    let mut preds_cls = Vec::new();
    for row in &val_s.features {
        match tree.predict_encoded(row) {
            Ok(crate::tree::Prediction::Value(v)) => preds_num.push(v),
            Ok(crate::tree::Prediction::Class(k)) => preds_cls.push(k),
            Err(_) => return None,
        }
    }
    match val_s.task {
        Task::Regression => evaluation::rae(&preds_num, val_s.labels.numeric()).ok(),
        Task::Binary | Task::Multiclass => {
            evaluation::accuracy(&preds_cls, val_s.labels.classes()).ok()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ColumnSpec, SplitSpec, Standardization};

    fn preprocess_for(data: &Dataset) -> PreprocessParams {
        PreprocessParams {
            columns: data
                .feature_names
                .iter()
                .map(|n| ColumnSpec::Numeric { name: n.clone() })
                .collect(),
            label: "y".into(),
            standardization: Standardization::identity(data.num_features()),
        }
    }

    #[test]
    fn schedule_progression() {
        assert_eq!(schedule(0), vec![(0, vec![0])]);
        assert_eq!(schedule(2), vec![(0, vec![0]), (1, vec![1]), (2, vec![2, 3])]);
        assert_eq!(
            schedule(3),
            vec![
                (0, vec![0]),
                (1, vec![1]),
                (2, vec![2, 3]),
                (3, vec![4, 5, 6, 7])
            ]
        );
    }

    #[test]
    fn singleton_grid_single_solve() {
        let data = crate::synth::piecewise_regression(15, 2);
        let (train, val, _test) = crate::data::split(
            &data,
            &SplitSpec {
                seed: 1,
                proportions: (0.7, 0.0, 0.3),
            },
        )
        .unwrap();
        let cfg = TunerConfig {
            max_depth: 0,
            c_grid: vec![1.0],
            time_limit: 60.0,
            ..TunerConfig::default()
        };
        let pre = preprocess_for(&train);
        let (tree, trace) = tune(&train, &val, &pre, &cfg).unwrap();
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.selected, (0, 0, 1.0));
        assert_eq!(tree.count_leaves(), 1);
    }

    #[test]
    fn empty_validation_with_grid_rejected() {
        let data = crate::synth::piecewise_regression(15, 2);
        let (train, val, _) = crate::data::split(
            &data,
            &SplitSpec {
                seed: 1,
                proportions: (0.8, 0.0, 0.2),
            },
        )
        .unwrap();
        let cfg = TunerConfig {
            max_depth: 1,
            c_grid: vec![1.0],
            time_limit: 30.0,
            ..TunerConfig::default()
        };
        let pre = preprocess_for(&train);
        assert!(tune(&train, &val, &pre, &cfg).is_err());
    }

    #[test]
    fn solve_count_matches_schedule_arithmetic() {
        let data = crate::synth::piecewise_regression(20, 7);
        let (train, val, _) = crate::data::split(
            &data,
            &SplitSpec {
                seed: 3,
                proportions: (0.7, 0.3, 0.0),
            },
        )
        .unwrap();
        let cfg = TunerConfig {
            max_depth: 1,
            c_grid: vec![0.1, 1.0],
            time_limit: 60.0,
            ..TunerConfig::default()
        };
        let pre = preprocess_for(&train);
        let (_, trace) = tune(&train, &val, &pre, &cfg).unwrap();
        // (0,{0}) and (1,{1}) each crossed with two C values.
        assert_eq!(trace.records.len(), 4);
    }

    #[test]
    fn selection_prefers_fewer_splits_then_smaller_c() {
        let mk = |splits: u32, c: f64, score: f64| TuneRecord {
            depth: if splits == 0 { 0 } else { 1 },
            splits,
            c,
            status: SolveStatus::Optimal,
            gap: 0.0,
            seconds: 0.0,
            objective: 0.0,
            val_score: Some(score),
        };
        // Classification: higher is better; exact ties fall to fewer
        // splits, then smaller C.
        let records = vec![mk(1, 0.1, 0.9), mk(0, 10.0, 0.9), mk(0, 1.0, 0.9)];
        let sel = select(&records, Task::Binary).unwrap();
        assert_eq!((records[sel].splits, records[sel].c), (0, 1.0));
        // Regression: lower is better.
        let records = vec![mk(0, 1.0, 0.4), mk(1, 1.0, 0.2)];
        let sel = select(&records, Task::Regression).unwrap();
        assert_eq!(records[sel].splits, 1);
    }

    #[test]
    fn selection_is_reproducible_from_trace() {
        let data = crate::synth::piecewise_regression(18, 4);
        let (train, val, _) = crate::data::split(
            &data,
            &SplitSpec {
                seed: 5,
                proportions: (0.7, 0.3, 0.0),
            },
        )
        .unwrap();
        let cfg = TunerConfig {
            max_depth: 1,
            c_grid: vec![1.0, 10.0],
            time_limit: 60.0,
            ..TunerConfig::default()
        };
        let pre = preprocess_for(&train);
        let (_, trace) = tune(&train, &val, &pre, &cfg).unwrap();
        let again = select(&trace.records, Task::Regression).unwrap();
        let r = &trace.records[again];
        assert_eq!((r.depth, r.splits, r.c), trace.selected);
    }

    #[test]
    fn warm_starts_do_not_change_selection_when_all_optimal() {
        let data = crate::synth::piecewise_regression(16, 9);
        let (train, val, _) = crate::data::split(
            &data,
            &SplitSpec {
                seed: 2,
                proportions: (0.75, 0.25, 0.0),
            },
        )
        .unwrap();
        let pre = preprocess_for(&train);
        let base = TunerConfig {
            max_depth: 1,
            c_grid: vec![0.1, 1.0, 10.0],
            time_limit: 120.0,
            ..TunerConfig::default()
        };
        let with = tune(&train, &val, &pre, &base).unwrap();
        let without = tune(
            &train,
            &val,
            &pre,
            &TunerConfig {
                warm_starts: false,
                ..base
            },
        )
        .unwrap();
        assert!(with
            .1
            .records
            .iter()
            .all(|r| r.status == SolveStatus::Optimal));
        assert!(without
            .1
            .records
            .iter()
            .all(|r| r.status == SolveStatus::Optimal));
        assert_eq!(with.1.selected, without.1.selected);
    }

    #[test]
    fn final_tree_uses_selected_constants_and_merged_data() {
        let data = crate::synth::piecewise_regression(20, 13);
        let (train, val, _) = crate::data::split(
            &data,
            &SplitSpec {
                seed: 8,
                proportions: (0.7, 0.3, 0.0),
            },
        )
        .unwrap();
        let cfg = TunerConfig {
            max_depth: 1,
            c_grid: vec![1.0, 10.0],
            time_limit: 120.0,
            ..TunerConfig::default()
        };
        let pre = preprocess_for(&train);
        let (tree, trace) = tune(&train, &val, &pre, &cfg).unwrap();
        let (_, sel_s, sel_c) = trace.selected;
        assert_eq!(tree.constants.c, sel_c);
        assert_eq!(tree.constants.max_splits, sel_s);
        // Piecewise data wants the split.
        assert_eq!(trace.selected.1, 1);
        assert!(tree.active_splits() <= sel_s as usize);
    }

    #[test]
    fn trace_csv_shape() {
        let trace = TuneTrace {
            records: vec![TuneRecord {
                depth: 1,
                splits: 1,
                c: 0.1,
                status: SolveStatus::Optimal,
                gap: 0.0,
                seconds: 0.5,
                objective: 1.25,
                val_score: Some(0.75),
            }],
            selected: (1, 1, 0.1),
        };
        let csv = trace.to_csv();
        assert!(csv.starts_with("D,S,C,status,gap,seconds,val_score\n"));
        assert!(csv.contains("1,1,0.1,optimal,0,0.5,0.75"));
    }
}
