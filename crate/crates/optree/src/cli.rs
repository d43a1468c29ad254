//! Command-line front end: train, tune, predict, evaluate, experiment,
//! and export-lp, wired over the library with reproducible settings.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver found no
//! solution. Diagnostics go to stderr (volume controlled by OPTREE_LOG in
//! {quiet, info, debug}); results go to stdout or output files.

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::bnb::{self, SolverConfig};
use crate::data::{
    apply_standardize, encode, fit_standardize, load_csv, read_csv_table, Dataset,
    FeatureOrigin, PreprocessParams, SplitSpec, Task,
};
use crate::error::{Error, Result};
use crate::evaluation::{self, ExperimentConfig};
use crate::formulation::{build_for_task, extract_tree, FeatureRoles, FormulationConstants};
use crate::topology::TreeTopology;
use crate::tree::{ModelTree, Prediction};
use crate::tuner::{tune, TunerConfig};

#[derive(Parser)]
#[command(
    name = "optree",
    version,
    about = "Globally optimal model trees (linear SVM leaves) via an embedded MILP solver"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model tree at fixed depth, split budget, and C
    Train(TrainArgs),
    /// Search depth/splits/C with a validation split, then retrain
    Tune(TuneArgs),
    /// Predict each row of a CSV with a saved model
    Predict(PredictArgs),
    /// Evaluate a saved model on labeled data
    Evaluate(EvaluateArgs),
    /// Repeated-split protocol: split, tune, test, aggregate
    Experiment(ExperimentArgs),
    /// Write the MILP in CPLEX-LP format without solving
    ExportLp(ExportLpArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV with a header row
    #[arg(long)]
    data: String,
    /// Name of the label column
    #[arg(long)]
    label: String,
    /// Learning task: regression, binary, or multiclass
    #[arg(long)]
    task: Task,
}

#[derive(Args)]
struct RolesArgs {
    /// Source columns eligible for splits (comma-separated; default all)
    #[arg(long, value_delimiter = ',')]
    split_features: Vec<String>,
    /// Source columns used by leaf models (comma-separated; default all)
    #[arg(long, value_delimiter = ',')]
    leaf_features: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Tree depth D
    #[arg(long, default_value_t = 2)]
    depth: u32,
    /// Maximum number of splits S (default: all branch nodes, 2^D - 1)
    #[arg(long)]
    splits: Option<u32>,
    /// SVM regularization weight C
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Use multivariate (linear combination) splits
    #[arg(long, default_value_t = false)]
    multivariate: bool,
    #[command(flatten)]
    roles: RolesArgs,
    /// Solver time limit in seconds
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Seed for reproducibility bookkeeping
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the trained model (JSON)
    #[arg(long)]
    model_out: String,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Largest tree depth to consider
    #[arg(long, default_value_t = 2)]
    max_depth: u32,
    /// C grid (comma-separated)
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 1.0, 10.0, 100.0])]
    c_grid: Vec<f64>,
    /// Use multivariate (linear combination) splits
    #[arg(long, default_value_t = false)]
    multivariate: bool,
    #[command(flatten)]
    roles: RolesArgs,
    /// Per-solve time limit in seconds
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Seed of the internal 0.8/0.2 train/validation split
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads across (depth, splits) cells
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Where to write the final model (JSON)
    #[arg(long)]
    model_out: String,
    /// Optional CSV trace of every tuning solve
    #[arg(long)]
    trace_out: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    /// Saved model file (JSON)
    #[arg(long)]
    model: String,
    /// CSV whose rows to predict (label column optional and ignored)
    #[arg(long)]
    data: String,
    /// Output format: plain or json
    #[arg(long, default_value = "plain")]
    format: String,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model file (JSON)
    #[arg(long)]
    model: String,
    /// Labeled CSV; the label column name comes from the model
    #[arg(long)]
    data: String,
    /// Output format: json or table
    #[arg(long, default_value = "table")]
    format: String,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of repeated splits
    #[arg(long, default_value_t = 30)]
    runs: usize,
    /// Base seed; run r uses seed base + r
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest tree depth to consider
    #[arg(long, default_value_t = 2)]
    max_depth: u32,
    /// C grid (comma-separated)
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 1.0, 10.0, 100.0])]
    c_grid: Vec<f64>,
    /// Use multivariate (linear combination) splits
    #[arg(long, default_value_t = false)]
    multivariate: bool,
    #[command(flatten)]
    roles: RolesArgs,
    /// Per-solve time limit in seconds
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Worker threads across runs
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output format: json or table
    #[arg(long, default_value = "table")]
    format: String,
    /// Optional file for the JSON report
    #[arg(long)]
    report_out: Option<String>,
}

#[derive(Args)]
struct ExportLpArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Tree depth D
    #[arg(long, default_value_t = 2)]
    depth: u32,
    /// Maximum number of splits S (default: all branch nodes)
    #[arg(long)]
    splits: Option<u32>,
    /// SVM regularization weight C
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Use multivariate (linear combination) splits
    #[arg(long, default_value_t = false)]
    multivariate: bool,
    #[command(flatten)]
    roles: RolesArgs,
    /// Output .lp path
    #[arg(long)]
    out: String,
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum LogLevel {
    Quiet,
    Info,
    Debug,
}

fn log_level() -> LogLevel {
    match std::env::var("OPTREE_LOG").as_deref() {
        Ok("quiet") => LogLevel::Quiet,
        Ok("debug") => LogLevel::Debug,
        _ => LogLevel::Info,
    }
}

/// Parses argv and runs; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::ExportLp(args) => cmd_export_lp(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 1,
        Error::NoSolution(_) | Error::SolverBreakdown(_) => 3,
        _ => 2,
    }
}

/// Maps source-column name lists to encoded feature index roles; empty
/// lists mean "every feature".
fn resolve_roles(
    split_names: &[String],
    leaf_names: &[String],
    data: &Dataset,
) -> Result<Option<FeatureRoles>> {
    if split_names.is_empty() && leaf_names.is_empty() {
        return Ok(None);
    }
    let indices_for = |names: &[String]| -> Result<Vec<usize>> {
        if names.is_empty() {
            return Ok((0..data.num_features()).collect());
        }
        let mut out = Vec::new();
        for name in names {
            let before = out.len();
            for (j, origin) in data.origins.iter().enumerate() {
                let source = match origin {
                    FeatureOrigin::Numeric { source } => source,
                    FeatureOrigin::OneHot { source, .. } => source,
                };
                if source == name {
                    out.push(j);
                }
            }
            if out.len() == before {
                return Err(Error::config(format!(
                    "feature-role column '{name}' not found in the dataset"
                )));
            }
        }
        Ok(out)
    };
    Ok(Some(FeatureRoles::new(
        indices_for(split_names)?,
        indices_for(leaf_names)?,
    )?))
}

fn load_encoded(args: &DataArgs) -> Result<(Dataset, PreprocessParams)> {
    let table = load_csv(&args.data, &args.label, args.task)?;
    encode(&table, args.task)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (data, mut params) = load_encoded(&args.data)?;
    let level = log_level();
    let std = fit_standardize(&data)?;
    params.standardization = std.clone();
    let data_s = apply_standardize(&data, &std)?;
    let roles = resolve_roles(&args.roles.split_features, &args.roles.leaf_features, &data)?
        .unwrap_or_else(|| FeatureRoles::all(data.num_features()));
    let topo = TreeTopology::new(args.depth);
    let splits = args.splits.unwrap_or(topo.branch_count() as u32);
    let consts = FormulationConstants::from_data(&data_s, &roles, args.c, splits, args.multivariate)?;
    let (model, layout) = build_for_task(&data_s, &topo, &consts, &roles)?;
    if level >= LogLevel::Info {
        eprintln!(
            "solving: {} variables, {} constraints, time limit {}s",
            model.num_vars(),
            model.num_constraints(),
            args.time_limit
        );
    }
    let outcome = bnb::solve(
        &model,
        &SolverConfig {
            time_limit: args.time_limit,
            seed: args.seed,
            verbose: level >= LogLevel::Debug,
            ..SolverConfig::default()
        },
    )?;
    if outcome.assignment.is_none() {
        return Err(Error::NoSolution(
            "no feasible tree found within the time limit".into(),
        ));
    }
    let tree = extract_tree(&layout, &outcome, &data_s, &topo, &consts, &params)?;
    tree.save(&args.model_out)?;
    if level >= LogLevel::Info {
        eprintln!(
            "status {} gap {:.6} objective {:.6} nodes {}",
            tree.provenance.status, tree.provenance.gap, outcome.objective, outcome.nodes
        );
    }
    print!("{}", tree.describe());
    Ok(())
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    let (data, params) = load_encoded(&args.data)?;
    let level = log_level();
    let (train, val, _empty) = crate::data::split(
        &data,
        &SplitSpec {
            seed: args.seed,
            proportions: (0.8, 0.2, 0.0),
        },
    )?;
    let roles = resolve_roles(&args.roles.split_features, &args.roles.leaf_features, &data)?;
    let cfg = TunerConfig {
        max_depth: args.max_depth,
        c_grid: args.c_grid.clone(),
        time_limit: args.time_limit,
        multivariate: args.multivariate,
        roles,
        seed: args.seed,
        warm_starts: true,
        jobs: args.jobs,
        verbose: level >= LogLevel::Info,
        solver_verbose: level >= LogLevel::Debug,
    };
    let (tree, trace) = tune(&train, &val, &params, &cfg)?;
    tree.save(&args.model_out)?;
    if let Some(path) = &args.trace_out {
        std::fs::write(path, trace.to_csv())?;
    }
    let (d, s, c) = trace.selected;
    println!("selected D={d} S={s} C={c}");
    print!("{}", tree.describe());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let tree = ModelTree::load(&args.model)?;
    let (headers, rows) = read_csv_table(&args.data)?;
    let column_pos = prediction_columns(&tree, &headers)?;
    for row in &rows {
        let values: Vec<&str> = column_pos.iter().map(|&p| row[p].as_str()).collect();
        let out = tree.predict_raw(&values)?;
        let rendered = match &out.prediction {
            Prediction::Value(v) => format!("{v}"),
            Prediction::Class(k) => tree.class_label(*k).to_string(),
        };
        match args.format.as_str() {
            "json" => println!(
                "{}",
                serde_json::json!({
                    "prediction": rendered,
                    "unknown_category": out.unknown_category,
                })
            ),
            _ => {
                if out.unknown_category {
                    println!("{rendered} # unknown-category");
                } else {
                    println!("{rendered}");
                }
            }
        }
    }
    Ok(())
}

/// Positions of the model's source columns within a CSV header.
fn prediction_columns(tree: &ModelTree, headers: &[String]) -> Result<Vec<usize>> {
    tree.preprocess
        .columns
        .iter()
        .map(|col| {
            headers
                .iter()
                .position(|h| h == col.name())
                .ok_or_else(|| {
                    Error::data(format!("input is missing model column '{}'", col.name()))
                })
        })
        .collect()
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let tree = ModelTree::load(&args.model)?;
    let (headers, rows) = read_csv_table(&args.data)?;
    let label_pos = headers
        .iter()
        .position(|h| h == &tree.preprocess.label)
        .ok_or_else(|| {
            Error::data(format!(
                "label column '{}' not present in the evaluation data",
                tree.preprocess.label
            ))
        })?;
    let column_pos = prediction_columns(&tree, &headers)?;
    let mut preds_num = Vec::new();
    let mut preds_cls = Vec::new();
    let mut actual_num = Vec::new();
    let mut actual_cls = Vec::new();
    for (ri, row) in rows.iter().enumerate() {
        let values: Vec<&str> = column_pos.iter().map(|&p| row[p].as_str()).collect();
        match tree.predict_raw(&values)?.prediction {
            Prediction::Value(v) => {
                preds_num.push(v);
                actual_num.push(row[label_pos].trim().parse::<f64>().map_err(|_| {
                    Error::data(format!("label '{}' in row {} is not numeric", row[label_pos], ri + 2))
                })?);
            }
            Prediction::Class(k) => {
                preds_cls.push(k);
                let actual = tree
                    .class_names
                    .iter()
                    .position(|c| c == row[label_pos].trim())
                    .ok_or_else(|| {
                        Error::data(format!(
                            "label '{}' in row {} is not one of the model's classes",
                            row[label_pos],
                            ri + 2
                        ))
                    })?;
                actual_cls.push(actual);
            }
        }
    }
    let report = match tree.task {
        Task::Regression => evaluation::MetricsReport {
            task: tree.task,
            accuracy: None,
            rae: Some(evaluation::rae(&preds_num, &actual_num)?),
            rrse: Some(evaluation::rrse(&preds_num, &actual_num)?),
            leaf_count: tree.count_leaves(),
            solver_status: tree.provenance.status.clone(),
            solver_gap: tree.provenance.gap,
            wall_time: tree.provenance.wall_time,
        },
        _ => evaluation::MetricsReport {
            task: tree.task,
            accuracy: Some(evaluation::accuracy(&preds_cls, &actual_cls)?),
            rae: None,
            rrse: None,
            leaf_count: tree.count_leaves(),
            solver_status: tree.provenance.status.clone(),
            solver_gap: tree.provenance.gap,
            wall_time: tree.provenance.wall_time,
        },
    };
    match args.format.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(&report).unwrap()),
        _ => {
            if let Some(a) = report.accuracy {
                println!("accuracy  {a:.6}");
            }
            if let Some(r) = report.rae {
                println!("rae       {r:.6}");
            }
            if let Some(r) = report.rrse {
                println!("rrse      {r:.6}");
            }
            println!("leaves    {}", report.leaf_count);
            println!("status    {}", report.solver_status);
        }
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let (data, params) = load_encoded(&args.data)?;
    let level = log_level();
    let roles = resolve_roles(&args.roles.split_features, &args.roles.leaf_features, &data)?;
    let cfg = ExperimentConfig {
        runs: args.runs,
        base_seed: args.seed,
        proportions: (0.8, 0.2, 0.2),
        tuner: TunerConfig {
            max_depth: args.max_depth,
            c_grid: args.c_grid.clone(),
            time_limit: args.time_limit,
            multivariate: args.multivariate,
            roles,
            warm_starts: true,
            jobs: 1,
            verbose: level >= LogLevel::Debug,
            solver_verbose: level >= LogLevel::Debug,
            ..TunerConfig::default()
        },
        jobs: args.jobs,
    };
    let report = evaluation::run_experiment(&data, &params, &cfg)?;
    if let Some(path) = &args.report_out {
        std::fs::write(path, report.to_json())?;
    }
    match args.format.as_str() {
        "json" => println!("{}", report.to_json()),
        _ => print!("{}", report.to_table()),
    }
    Ok(())
}

fn cmd_export_lp(args: ExportLpArgs) -> Result<()> {
    let (data, _params) = load_encoded(&args.data)?;
    let std = fit_standardize(&data)?;
    let data_s = apply_standardize(&data, &std)?;
    let roles = resolve_roles(&args.roles.split_features, &args.roles.leaf_features, &data)?
        .unwrap_or_else(|| FeatureRoles::all(data.num_features()));
    let topo = TreeTopology::new(args.depth);
    let splits = args.splits.unwrap_or(topo.branch_count() as u32);
    let consts = FormulationConstants::from_data(&data_s, &roles, args.c, splits, args.multivariate)?;
    let (model, _layout) = build_for_task(&data_s, &topo, &consts, &roles)?;
    model.export_lp(&args.out)?;
    eprintln!(
        "wrote {} ({} variables, {} constraints)",
        args.out,
        model.num_vars(),
        model.num_constraints()
    );
    Ok(())
}

/// Clap command tree, exposed for the help-coverage test.
pub fn command() -> clap::Command {
    Cli::command()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_flag_documents_itself() {
        let cmd = command();
        for sub in cmd.get_subcommands() {
            for arg in sub.get_arguments() {
                if arg.get_id() == "help" || arg.get_id() == "version" {
                    continue;
                }
                assert!(
                    arg.get_help().is_some(),
                    "flag --{} of `{}` has no help text",
                    arg.get_id(),
                    sub.get_name()
                );
            }
        }
    }

    #[test]
    fn defaults_render_in_help() {
        let mut cmd = command();
        for name in ["tune", "experiment", "train"] {
            let sub = cmd.find_subcommand_mut(name).unwrap();
            let help = sub.render_long_help().to_string();
            assert!(help.contains("default"), "{name} help shows no defaults");
        }
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["optree", "definitely-not-a-command"]), 1);
        assert_eq!(run(["optree", "tune", "--data", "x.csv"]), 1); // missing flags
        assert_eq!(run(["optree", "--help"]), 0);
    }

    #[test]
    fn missing_file_is_a_data_error() {
        let code = run([
            "optree",
            "train",
            "--data",
            "/nonexistent/nope.csv",
            "--label",
            "y",
            "--task",
            "regression",
            "--model-out",
            "/tmp/optree-test-model.json",
        ]);
        assert_eq!(code, 2);
    }
}
