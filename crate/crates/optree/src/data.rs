//! Tabular data ingestion: CSV loading, one-hot encoding, standardization,
//! reproducible splits, and the per-feature separation constants used to
//! turn strict routing inequalities into weak ones.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Binary,
    Multiclass,
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "binary" => Ok(Task::Binary),
            "multiclass" => Ok(Task::Multiclass),
            other => Err(Error::config(format!(
                "unknown task '{other}' (expected regression, binary, or multiclass)"
            ))),
        }
    }
}

/// Raw CSV contents: header names plus untyped text cells.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    Numeric(Vec<f64>),
    Classes(Vec<usize>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Numeric(v) => v.len(),
            Labels::Classes(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn numeric(&self) -> &[f64] {
        match self {
            Labels::Numeric(v) => v,
            Labels::Classes(_) => panic!("expected numeric labels"),
        }
    }

    pub fn classes(&self) -> &[usize] {
        match self {
            Labels::Classes(v) => v,
            Labels::Numeric(_) => panic!("expected class labels"),
        }
    }
}

/// Origin of an encoded feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureOrigin {
    Numeric { source: String },
    OneHot { source: String, category: String },
}

/// Encoded dataset: numeric feature matrix plus labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// Row-major, one row per data point.
    pub features: Vec<Vec<f64>>,
    pub labels: Labels,
    pub task: Task,
    /// 1 for regression, 2 for binary, >= 3 for multiclass.
    pub class_count: usize,
    /// Original label tokens in class-index order (empty for regression).
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub origins: Vec<FeatureOrigin>,
}

impl Dataset {
    pub fn num_points(&self) -> usize {
        self.features.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn take_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: match &self.labels {
                Labels::Numeric(v) => Labels::Numeric(idx.iter().map(|&i| v[i]).collect()),
                Labels::Classes(v) => Labels::Classes(idx.iter().map(|&i| v[i]).collect()),
            },
            task: self.task,
            class_count: self.class_count,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
            origins: self.origins.clone(),
        }
    }

    /// Concatenates two datasets over the same schema.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.num_features() != other.num_features() {
            return Err(Error::dimension("concat: feature counts differ"));
        }
        let mut out = self.clone();
        out.features.extend(other.features.iter().cloned());
        match (&mut out.labels, &other.labels) {
            (Labels::Numeric(a), Labels::Numeric(b)) => a.extend_from_slice(b),
            (Labels::Classes(a), Labels::Classes(b)) => a.extend_from_slice(b),
            _ => return Err(Error::dimension("concat: label kinds differ")),
        }
        Ok(out)
    }
}

/// One source column of the pre-encoding schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnSpec {
    Numeric { name: String },
    /// Ordered category list; one indicator column per category.
    Categorical { name: String, categories: Vec<String> },
}

impl ColumnSpec {
    pub fn name(&self) -> &str {
        match self {
            ColumnSpec::Numeric { name } => name,
            ColumnSpec::Categorical { name, .. } => name,
        }
    }
}

/// Per-encoded-column standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    /// Stored stds are > 0; constant columns record 1 and a flag.
    pub stds: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Standardization {
    pub fn identity(n: usize) -> Self {
        Standardization {
            means: vec![0.0; n],
            stds: vec![1.0; n],
            constant: vec![false; n],
        }
    }
}

/// Everything needed to map a raw row into model space: source-column
/// schema (with one-hot category order) and standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub columns: Vec<ColumnSpec>,
    pub label: String,
    pub standardization: Standardization,
}

/// Train/validation/test split request. Proportions summing to 1 are
/// used directly; `(a, b, c)` with `a + b = 1` and a larger total is read
/// as nested — `c` of the data held out for test, then `a`/`b` of the
/// remainder — so `(0.8, 0.2, 0.2)` yields 0.64/0.16/0.20.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub seed: u64,
    pub proportions: (f64, f64, f64),
}

/// Per-feature separation constants on a standardized dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGaps {
    /// Smallest nonzero gap between two values of the feature (1 for
    /// constant features).
    pub mu: Vec<f64>,
    /// False for constant features, which are barred from splitting.
    pub splittable: Vec<bool>,
}

/// Reads a headered CSV into column names and untyped text cells,
/// rejecting ragged rows and empty (missing) cells.
pub fn read_csv_table(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::data(format!("cannot open {}: {e}", path.display())),
            _ => Error::Csv(e),
        })?;
    let columns: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::data(format!("ragged or invalid row: {e}")))?;
        let row: Vec<String> = record.iter().map(|c| c.to_string()).collect();
        if row.iter().any(|c| c.trim().is_empty()) {
            return Err(Error::data(format!(
                "missing value in row {} (empty cell)",
                rows.len() + 2
            )));
        }
        rows.push(row);
    }
    Ok((columns, rows))
}

/// Reads a CSV file with a header row; all cells stay untyped text.
pub fn load_csv(path: impl AsRef<Path>, label: &str, _task: Task) -> Result<RawTable> {
    let (columns, rows) = read_csv_table(path)?;
    let label_count = columns.iter().filter(|c| c.as_str() == label).count();
    if label_count == 0 {
        return Err(Error::data(format!(
            "label column '{label}' not found in header [{}]",
            columns.join(", ")
        )));
    }
    if label_count > 1 {
        return Err(Error::data(format!(
            "label column '{label}' appears {label_count} times in header"
        )));
    }
    if rows.is_empty() {
        return Err(Error::data("table has a header but no data rows"));
    }
    Ok(RawTable {
        columns,
        rows,
        label: label.to_string(),
    })
}

/// One-hot encodes categorical columns (any column that does not parse as
/// numeric throughout) and maps labels. Standardization is NOT applied
/// here; fit it on the training portion afterwards.
pub fn encode(table: &RawTable, task: Task) -> Result<(Dataset, PreprocessParams)> {
    if table.rows.is_empty() {
        return Err(Error::data("cannot encode an empty table"));
    }
    let label_idx = table
        .columns
        .iter()
        .position(|c| c == &table.label)
        .ok_or_else(|| Error::data("label column missing"))?;

    let mut columns = Vec::new();
    let mut feature_names = Vec::new();
    let mut origins = Vec::new();
    let mut encoders: Vec<(usize, ColumnSpec)> = Vec::new();
    for (ci, name) in table.columns.iter().enumerate() {
        if ci == label_idx {
            continue;
        }
        let numeric = table.rows.iter().all(|r| parse_num(&r[ci]).is_some());
        let spec = if numeric {
            feature_names.push(name.clone());
            origins.push(FeatureOrigin::Numeric {
                source: name.clone(),
            });
            ColumnSpec::Numeric { name: name.clone() }
        } else {
            let mut cats: Vec<String> = table.rows.iter().map(|r| r[ci].clone()).collect();
            cats.sort();
            cats.dedup();
            for cat in &cats {
                feature_names.push(format!("{name}={cat}"));
                origins.push(FeatureOrigin::OneHot {
                    source: name.clone(),
                    category: cat.clone(),
                });
            }
            ColumnSpec::Categorical {
                name: name.clone(),
                categories: cats,
            }
        };
        columns.push(spec.clone());
        encoders.push((ci, spec));
    }

    let mut features = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let mut out = Vec::with_capacity(feature_names.len());
        for (ci, spec) in &encoders {
            match spec {
                ColumnSpec::Numeric { .. } => out.push(parse_num(&row[*ci]).unwrap()),
                ColumnSpec::Categorical { categories, .. } => {
                    for cat in categories {
                        out.push(if &row[*ci] == cat { 1.0 } else { 0.0 });
                    }
                }
            }
        }
        features.push(out);
    }

    let (labels, class_count, class_names) = match task {
        Task::Regression => {
            let mut v = Vec::with_capacity(table.rows.len());
            for (ri, row) in table.rows.iter().enumerate() {
                let y = parse_num(&row[label_idx]).ok_or_else(|| {
                    Error::data(format!(
                        "regression label '{}' in row {} is not numeric",
                        row[label_idx],
                        ri + 2
                    ))
                })?;
                v.push(y);
            }
            (Labels::Numeric(v), 1, Vec::new())
        }
        Task::Binary | Task::Multiclass => {
            let mut names: Vec<String> =
                table.rows.iter().map(|r| r[label_idx].clone()).collect();
            names.sort();
            names.dedup();
            if names.len() < 2 {
                return Err(Error::data(
                    "classification task with a single label class",
                ));
            }
            if task == Task::Binary && names.len() != 2 {
                return Err(Error::data(format!(
                    "binary task but {} label classes found",
                    names.len()
                )));
            }
            if task == Task::Multiclass && names.len() < 3 {
                return Err(Error::data(format!(
                    "multiclass task needs at least 3 classes, found {}",
                    names.len()
                )));
            }
            let idx = |tok: &str| names.iter().position(|n| n == tok).unwrap();
            let v: Vec<usize> = table.rows.iter().map(|r| idx(&r[label_idx])).collect();
            let k = names.len();
            (Labels::Classes(v), k, names)
        }
    };

    let n = feature_names.len();
    let dataset = Dataset {
        features,
        labels,
        task,
        class_count,
        class_names,
        feature_names,
        origins,
    };
    let params = PreprocessParams {
        columns,
        label: table.label.clone(),
        standardization: Standardization::identity(n),
    };
    Ok((dataset, params))
}

fn parse_num(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Per-column mean and population standard deviation of the fitting data.
pub fn fit_standardize(data: &Dataset) -> Result<Standardization> {
    if data.is_empty() {
        return Err(Error::data("cannot standardize an empty dataset"));
    }
    let n = data.num_features();
    let count = data.num_points() as f64;
    let mut means = vec![0.0; n];
    for row in &data.features {
        for (m, x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in means.iter_mut() {
        *m /= count;
    }
    let mut vars = vec![0.0; n];
    for row in &data.features {
        for j in 0..n {
            let d = row[j] - means[j];
            vars[j] += d * d;
        }
    }
    let mut stds = vec![0.0; n];
    let mut constant = vec![false; n];
    for j in 0..n {
        let std = (vars[j] / count).sqrt();
        if std <= 1e-12 * (1.0 + means[j].abs()) {
            stds[j] = 1.0;
            constant[j] = true;
        } else {
            stds[j] = std;
        }
    }
    Ok(Standardization {
        means,
        stds,
        constant,
    })
}

/// Applies `(x - mean) / std` column-wise; constant columns keep std 1,
/// so fitting-data values map to zero.
pub fn apply_standardize(data: &Dataset, params: &Standardization) -> Result<Dataset> {
    if params.means.len() != data.num_features() {
        return Err(Error::dimension(format!(
            "standardization has {} columns, dataset has {}",
            params.means.len(),
            data.num_features()
        )));
    }
    let mut out = data.clone();
    for row in &mut out.features {
        for j in 0..row.len() {
            row[j] = (row[j] - params.means[j]) / params.stds[j];
        }
    }
    Ok(out)
}

/// Deterministic seeded shuffle-and-carve split. See [`SplitSpec`] for
/// how the proportions are interpreted.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let n = data.num_points();
    if n < 5 {
        return Err(Error::data(format!("need at least 5 points to split, have {n}")));
    }
    let (p_train, p_val, p_test) = spec.proportions;
    for p in [p_train, p_val, p_test] {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!("split proportion {p} outside [0, 1)")));
        }
    }
    let total = p_train + p_val + p_test;
    let (n_train, n_val, n_test) = if (total - 1.0).abs() <= 1e-9 {
        let t = (p_train * n as f64).round() as usize;
        let v = (p_val * n as f64).round() as usize;
        if t + v > n {
            return Err(Error::config("split proportions overflow the dataset"));
        }
        (t, v, n - t - v)
    } else if ((p_train + p_val) - 1.0).abs() <= 1e-9 {
        // Nested: test share of the whole, then train/val of the remainder.
        let te = (p_test * n as f64).round() as usize;
        let rem = n - te;
        let t = (p_train * rem as f64).round() as usize;
        (t, rem - t, te)
    } else {
        return Err(Error::config(format!(
            "split proportions ({p_train}, {p_val}, {p_test}) must sum to 1 or nest as (a, b, c) with a + b = 1"
        )));
    };
    for (count, p) in [(n_train, p_train), (n_val, p_val), (n_test, p_test)] {
        if p > 0.0 && count == 0 {
            return Err(Error::config(format!(
                "split proportion {p} yields an empty subset for {n} points"
            )));
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // Fisher-Yates with an explicit index draw so the permutation is pinned
    // to the ChaCha stream, independent of helper-library internals.
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    let train = data.take_rows(&idx[..n_train]);
    let val = data.take_rows(&idx[n_train..n_train + n_val]);
    let test = data.take_rows(&idx[n_train + n_val..]);
    Ok((train, val, test))
}

/// Smallest nonzero pairwise gap per feature on a standardized dataset;
/// constant features get 1 and are flagged as not splittable.
pub fn feature_gaps(data: &Dataset) -> FeatureGaps {
    let n = data.num_features();
    let mut mu = vec![1.0; n];
    let mut splittable = vec![false; n];
    for j in 0..n {
        let mut values: Vec<f64> = data.features.iter().map(|r| r[j]).collect();
        values.sort_by(f64::total_cmp);
        let mut best = f64::INFINITY;
        for w in values.windows(2) {
            let gap = w[1] - w[0];
            if gap > 0.0 && gap < best {
                best = gap;
            }
        }
        if best.is_finite() {
            mu[j] = best;
            splittable[j] = true;
        }
    }
    FeatureGaps { mu, splittable }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn toy_numeric(values: Vec<Vec<f64>>, labels: Vec<f64>) -> Dataset {
        let n = values[0].len();
        Dataset {
            features: values,
            labels: Labels::Numeric(labels),
            task: Task::Regression,
            class_count: 1,
            class_names: Vec::new(),
            feature_names: (0..n).map(|j| format!("f{j}")).collect(),
            origins: (0..n)
                .map(|j| FeatureOrigin::Numeric {
                    source: format!("f{j}"),
                })
                .collect(),
        }
    }

    #[test]
    fn load_basic_csv() {
        let f = write_csv("a,b,y\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n");
        let t = load_csv(f.path(), "y", Task::Regression).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.columns, vec!["a", "b", "y"]);
        assert_eq!(t.label, "y");
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let f = write_csv("a,b,y\n1,2,3\n4,5\n");
        assert!(load_csv(f.path(), "y", Task::Regression).is_err());
    }

    #[test]
    fn load_rejects_absent_label() {
        let f = write_csv("a,b,c\n1,2,3\n");
        let err = load_csv(f.path(), "y", Task::Regression).unwrap_err();
        assert!(err.to_string().contains("label"));
    }

    #[test]
    fn load_rejects_missing_values() {
        let f = write_csv("a,y\n1,2\n,3\n");
        assert!(load_csv(f.path(), "y", Task::Regression).is_err());
    }

    #[test]
    fn encode_one_hot() {
        let t = RawTable {
            columns: vec!["color".into(), "y".into()],
            rows: vec![
                vec!["red".into(), "1.0".into()],
                vec!["green".into(), "2.0".into()],
                vec!["blue".into(), "3.0".into()],
            ],
            label: "y".into(),
        };
        let (d, p) = encode(&t, Task::Regression).unwrap();
        assert_eq!(d.feature_names, vec!["color=blue", "color=green", "color=red"]);
        assert_eq!(d.features[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(d.features[2], vec![1.0, 0.0, 0.0]);
        match &p.columns[0] {
            ColumnSpec::Categorical { categories, .. } => {
                assert_eq!(categories, &vec!["blue".to_string(), "green".into(), "red".into()]);
            }
            _ => panic!("expected categorical"),
        }
    }

    #[test]
    fn encode_numeric_passthrough_lossless() {
        let t = RawTable {
            columns: vec!["x".into(), "y".into()],
            rows: vec![
                vec!["3.5".into(), "0".into()],
                vec!["2.0".into(), "1".into()],
            ],
            label: "y".into(),
        };
        let (d, _) = encode(&t, Task::Regression).unwrap();
        assert_eq!(d.features, vec![vec![3.5], vec![2.0]]);
    }

    #[test]
    fn encode_classification_labels_lexicographic() {
        let t = RawTable {
            columns: vec!["x".into(), "y".into()],
            rows: vec![
                vec!["1".into(), "yes".into()],
                vec!["2".into(), "no".into()],
                vec!["3".into(), "yes".into()],
            ],
            label: "y".into(),
        };
        let (d, _) = encode(&t, Task::Binary).unwrap();
        assert_eq!(d.labels.classes(), &[1, 0, 1]);
        assert_eq!(d.class_names, vec!["no", "yes"]);
    }

    #[test]
    fn encode_rejects_single_class_and_bad_regression_label() {
        let t = RawTable {
            columns: vec!["x".into(), "y".into()],
            rows: vec![vec!["1".into(), "a".into()], vec!["2".into(), "a".into()]],
            label: "y".into(),
        };
        assert!(encode(&t, Task::Binary).is_err());
        assert!(encode(&t, Task::Regression).is_err());
    }

    #[test]
    fn standardize_closed_forms() {
        let d = toy_numeric(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0.0; 3]);
        let s = fit_standardize(&d).unwrap();
        assert!((s.means[0] - 2.0).abs() < 1e-12);
        assert!((s.stds[0] - 0.816496580927726).abs() < 1e-12);

        let d2 = toy_numeric(
            vec![vec![1.0, 0.0], vec![2.0, 10.0], vec![3.0, 20.0]],
            vec![0.0; 3],
        );
        let s2 = fit_standardize(&d2).unwrap();
        assert!((s2.means[1] - 10.0).abs() < 1e-12);
        assert!((s2.stds[1] - 8.16496580927726).abs() < 1e-11);
    }

    #[test]
    fn standardize_constant_column() {
        let d = toy_numeric(vec![vec![5.0], vec![5.0], vec![5.0]], vec![0.0; 3]);
        let s = fit_standardize(&d).unwrap();
        assert!(s.constant[0]);
        assert_eq!(s.stds[0], 1.0);
        let out = apply_standardize(&d, &s).unwrap();
        assert!(out.features.iter().all(|r| r[0] == 0.0));
    }

    #[test]
    fn apply_standardize_values() {
        let d = toy_numeric(vec![vec![1.0], vec![2.0], vec![3.0]], vec![0.0; 3]);
        let s = fit_standardize(&d).unwrap();
        let out = apply_standardize(&d, &s).unwrap();
        assert!((out.features[0][0] + 1.224744871391589).abs() < 1e-12);
        assert!(out.features[1][0].abs() < 1e-12);
        // A test row equal to the train mean centers to zero.
        let test = toy_numeric(vec![vec![2.0]], vec![0.0]);
        let tout = apply_standardize(&test, &s).unwrap();
        assert_eq!(tout.features[0][0], 0.0);
    }

    #[test]
    fn standardize_invariant_on_fit_data() {
        let d = toy_numeric(
            (0..17)
                .map(|i| vec![i as f64 * 1.3 - 4.0, (i * i) as f64, 7.7])
                .collect(),
            vec![0.0; 17],
        );
        let s = fit_standardize(&d).unwrap();
        let out = apply_standardize(&d, &s).unwrap();
        let n = out.num_points() as f64;
        for j in 0..3 {
            let mean: f64 = out.features.iter().map(|r| r[j]).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "col {j} mean {mean}");
            if !s.constant[j] {
                let var: f64 = out.features.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
                assert!((var.sqrt() - 1.0).abs() < 1e-9, "col {j} std {}", var.sqrt());
            }
        }
    }

    #[test]
    fn split_counts_and_determinism() {
        let d = toy_numeric((0..10).map(|i| vec![i as f64]).collect(), (0..10).map(|i| i as f64).collect());
        let spec = SplitSpec {
            seed: 7,
            proportions: (0.8, 0.0, 0.2),
        };
        let (tr, va, te) = split(&d, &spec).unwrap();
        assert_eq!((tr.num_points(), va.num_points(), te.num_points()), (8, 0, 2));
        let (tr2, _, te2) = split(&d, &spec).unwrap();
        assert_eq!(tr.features, tr2.features);
        assert_eq!(te.features, te2.features);
    }

    #[test]
    fn split_nested_proportions() {
        let d = toy_numeric(
            (0..100).map(|i| vec![i as f64]).collect(),
            (0..100).map(|i| i as f64).collect(),
        );
        let spec = SplitSpec {
            seed: 3,
            proportions: (0.8, 0.2, 0.2),
        };
        let (tr, va, te) = split(&d, &spec).unwrap();
        assert_eq!((tr.num_points(), va.num_points(), te.num_points()), (64, 16, 20));
    }

    #[test]
    fn split_partitions_everything() {
        let d = toy_numeric(
            (0..37).map(|i| vec![i as f64]).collect(),
            (0..37).map(|i| i as f64).collect(),
        );
        let spec = SplitSpec {
            seed: 11,
            proportions: (0.6, 0.2, 0.2),
        };
        let (tr, va, te) = split(&d, &spec).unwrap();
        let mut seen: Vec<i64> = tr
            .features
            .iter()
            .chain(&va.features)
            .chain(&te.features)
            .map(|r| r[0] as i64)
            .collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..37).collect::<Vec<i64>>());
    }

    #[test]
    fn split_rejects_empty_subset() {
        let d = toy_numeric(
            (0..6).map(|i| vec![i as f64]).collect(),
            (0..6).map(|i| i as f64).collect(),
        );
        let spec = SplitSpec {
            seed: 0,
            proportions: (0.9, 0.05, 0.05),
        };
        assert!(split(&d, &spec).is_err());
    }

    #[test]
    fn feature_gap_values() {
        let d = toy_numeric(
            vec![vec![0.0], vec![0.5], vec![0.5], vec![2.0]],
            vec![0.0; 4],
        );
        let g = feature_gaps(&d);
        assert_eq!(g.mu[0], 0.5);
        assert!(g.splittable[0]);

        let c = toy_numeric(vec![vec![1.0], vec![1.0], vec![1.0]], vec![0.0; 3]);
        let gc = feature_gaps(&c);
        assert_eq!(gc.mu[0], 1.0);
        assert!(!gc.splittable[0]);

        let two = toy_numeric(vec![vec![0.0, 1.0], vec![0.0, 3.0]], vec![0.0; 2]);
        let g2 = feature_gaps(&two);
        assert_eq!(g2.mu, vec![1.0, 2.0]);
        assert_eq!(g2.splittable, vec![false, true]);
    }

    #[test]
    fn feature_gap_lower_bounds_all_pairs() {
        let d = toy_numeric(
            (0..23)
                .map(|i| vec![(i * i % 7) as f64, (i % 5) as f64 * 0.3])
                .collect(),
            vec![0.0; 23],
        );
        let g = feature_gaps(&d);
        for j in 0..2 {
            for a in 0..23 {
                for b in 0..23 {
                    let diff = (d.features[a][j] - d.features[b][j]).abs();
                    if diff > 0.0 {
                        assert!(diff >= g.mu[j] - 1e-12);
                    }
                }
            }
        }
    }
}
