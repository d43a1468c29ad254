//! MILP formulations for optimal model trees over a fixed perfect-tree
//! topology: univariate and multivariate variants for regression, binary
//! classification, and multiclass classification, plus extraction of the
//! learned tree from a solver assignment.
//!
//! Conventions shared by all variants (standardized features assumed):
//!
//! * binary `d_n` marks branch node `n` as splitting; a non-splitting node
//!   passes every point to its right child, which is enforced by barring
//!   occupied leaves from having a non-splitting left-turn ancestor;
//! * binaries `z_(i,n)` assign each point to exactly one leaf and activate
//!   that leaf's SVM constraints through big-M guards;
//! * routing uses per-feature separation constants `mu_f` to express the
//!   strict left-side inequality weakly;
//! * the objective is the L1-regularized SVM loss summed over all leaves.

use serde::{Deserialize, Serialize};

use crate::bnb::{SolveOutcome, SolveStatus};
use crate::data::{feature_gaps, Dataset, PreprocessParams, Task};
use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense, VarRef};
use crate::topology::TreeTopology;
use crate::tree::{LeafModel, ModelTree, Provenance, SplitRule};

/// Scalar separation constant and routing big-M for multivariate splits.
const MULTIVARIATE_MU: f64 = 0.001;
const MULTIVARIATE_M: f64 = 10000.0;
/// Default big-M deactivating leaf SVM constraints for unassigned points.
const DEFAULT_M_SVM: f64 = 10000.0;

/// Which encoded features may appear in split rules and in leaf models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRoles {
    pub split: Vec<usize>,
    pub leaf: Vec<usize>,
}

impl FeatureRoles {
    /// Every feature plays both roles.
    pub fn all(num_features: usize) -> Self {
        FeatureRoles {
            split: (0..num_features).collect(),
            leaf: (0..num_features).collect(),
        }
    }

    pub fn new(mut split: Vec<usize>, mut leaf: Vec<usize>) -> Result<Self> {
        split.sort_unstable();
        split.dedup();
        leaf.sort_unstable();
        leaf.dedup();
        if split.is_empty() || leaf.is_empty() {
            return Err(Error::config(
                "feature roles: split and leaf sets must both be non-empty",
            ));
        }
        Ok(FeatureRoles { split, leaf })
    }
}

/// Data-derived constants of one formulation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationConstants {
    /// SVM regularization weight on the loss term.
    pub c: f64,
    /// Maximum number of splits S.
    pub max_splits: u32,
    pub multivariate: bool,
    /// Per-feature separation constants (1 for constant features).
    pub mu: Vec<f64>,
    /// Features a univariate split may use (constant columns barred).
    pub splittable: Vec<bool>,
    /// Big-M of the routing constraints.
    pub m_split: f64,
    /// Big-M of the leaf SVM constraints.
    pub m_svm: f64,
    /// Split threshold bounds.
    pub b_lower: f64,
    pub b_upper: f64,
}

impl FormulationConstants {
    /// Derives constants from a standardized training set.
    ///
    /// Univariate: `mu_f` is the feature's smallest nonzero gap and the
    /// routing big-M is the largest split-feature range plus the largest
    /// `mu_f` — the smallest value that vacates the routing constraints
    /// for unassigned points given the threshold bounds below.
    /// Multivariate: fixed `mu = 0.001` and `M = 10000`.
    pub fn from_data(
        data: &Dataset,
        roles: &FeatureRoles,
        c: f64,
        max_splits: u32,
        multivariate: bool,
    ) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::config(format!("C must be positive, got {c}")));
        }
        if data.is_empty() {
            return Err(Error::data("cannot build constants from an empty dataset"));
        }
        let gaps = feature_gaps(data);
        let nf = data.num_features();
        if multivariate {
            return Ok(FormulationConstants {
                c,
                max_splits,
                multivariate,
                mu: vec![MULTIVARIATE_MU; nf],
                splittable: gaps.splittable,
                m_split: MULTIVARIATE_M,
                m_svm: DEFAULT_M_SVM,
                b_lower: -(roles.split.len() as f64),
                b_upper: roles.split.len() as f64,
            });
        }
        let mut max_range: f64 = 0.0;
        let mut max_mu: f64 = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &f in &roles.split {
            if f >= nf {
                return Err(Error::config(format!("split feature {f} out of range")));
            }
            if !gaps.splittable[f] {
                continue;
            }
            let mut fmin = f64::INFINITY;
            let mut fmax = f64::NEG_INFINITY;
            for row in &data.features {
                fmin = fmin.min(row[f]);
                fmax = fmax.max(row[f]);
            }
            max_range = max_range.max(fmax - fmin);
            max_mu = max_mu.max(gaps.mu[f]);
            lo = lo.min(fmin);
            hi = hi.max(fmax);
        }
        if !lo.is_finite() {
            // All split candidates constant; thresholds are never active.
            lo = 0.0;
            hi = 0.0;
            max_mu = 1.0;
            max_range = 1.0;
        }
        Ok(FormulationConstants {
            c,
            max_splits,
            multivariate,
            mu: gaps.mu,
            splittable: gaps.splittable,
            m_split: max_range + max_mu,
            m_svm: DEFAULT_M_SVM,
            // Zero must stay inside the interval: thresholds of
            // non-splitting nodes settle at 0 so that right-routing stays
            // satisfiable. On standardized data this is the plain
            // [min - 1, max + 1] window.
            b_lower: (lo - 1.0).min(0.0),
            b_upper: (hi + 1.0).max(0.0),
        })
    }

    /// Hand-assembled constants, used by tests and by models built outside
    /// the data pipeline.
    pub fn manual(c: f64, _depth: u32, multivariate: bool, num_features: usize) -> Self {
        FormulationConstants {
            c,
            max_splits: 0,
            multivariate,
            mu: vec![if multivariate { MULTIVARIATE_MU } else { 1e-4 }; num_features],
            splittable: vec![true; num_features],
            m_split: if multivariate { MULTIVARIATE_M } else { 100.0 },
            m_svm: DEFAULT_M_SVM,
            b_lower: -100.0,
            b_upper: 100.0,
        }
    }

    pub fn mu_multivariate(&self) -> f64 {
        MULTIVARIATE_MU
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    Ormt,
    OcmtBinary,
    OcmtMulticlass,
}

/// Map from formulation symbols to model variables.
///
/// Indexing: branch nodes and leaves in heap order, points in dataset
/// order, split/leaf features by position in the respective role lists,
/// class slots 0..K (a single slot for regression and binary).
#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub kind: FormulationKind,
    pub multivariate: bool,
    /// Split-eligible features actually carrying `a` variables
    /// (role list minus constant columns).
    pub split_features: Vec<usize>,
    pub leaf_features: Vec<usize>,
    pub class_slots: usize,
    pub d: Vec<VarRef>,
    pub a: Vec<Vec<VarRef>>,
    /// Multivariate coefficient indicators (empty otherwise).
    pub s: Vec<Vec<VarRef>>,
    /// Multivariate coefficient magnitude auxiliaries (empty otherwise).
    pub a_abs: Vec<Vec<VarRef>>,
    pub b: Vec<VarRef>,
    pub z: Vec<Vec<VarRef>>,
    pub l: Vec<VarRef>,
    pub beta: Vec<Vec<Vec<VarRef>>>,
    pub beta_abs: Vec<Vec<Vec<VarRef>>>,
    pub delta: Vec<Vec<VarRef>>,
    /// `eps[i][leaf][slot]`; None where the slot is the point's own class
    /// (multiclass sums only over k != y_i).
    pub eps: Vec<Vec<Vec<Option<VarRef>>>>,
    /// Absolute-value auxiliaries of the residuals (regression only).
    pub eps_abs: Vec<Vec<Vec<Option<VarRef>>>>,
}

/// Builds the regression formulation (free residuals, absolute-error
/// objective).
pub fn build_ormt(
    data: &Dataset,
    topo: &TreeTopology,
    consts: &FormulationConstants,
    roles: &FeatureRoles,
) -> Result<(MilpModel, VariableLayout)> {
    if data.task != Task::Regression {
        return Err(Error::config("regression formulation on a non-regression task"));
    }
    build(data, topo, consts, roles, FormulationKind::Ormt)
}

/// Builds the binary classification formulation (non-negative hinge
/// slacks, labels mapped to -1/+1).
pub fn build_ocmt_binary(
    data: &Dataset,
    topo: &TreeTopology,
    consts: &FormulationConstants,
    roles: &FeatureRoles,
) -> Result<(MilpModel, VariableLayout)> {
    if data.task != Task::Binary {
        return Err(Error::config("binary formulation on a non-binary task"));
    }
    build(data, topo, consts, roles, FormulationKind::OcmtBinary)
}

/// Builds the multiclass formulation: K linear models per leaf with
/// pairwise margin-2 constraints against every other class.
pub fn build_ocmt_multiclass(
    data: &Dataset,
    topo: &TreeTopology,
    consts: &FormulationConstants,
    roles: &FeatureRoles,
) -> Result<(MilpModel, VariableLayout)> {
    if data.task != Task::Multiclass || data.class_count < 3 {
        return Err(Error::config(
            "multiclass formulation needs 3 or more classes; use the binary variant for 2",
        ));
    }
    build(data, topo, consts, roles, FormulationKind::OcmtMulticlass)
}

/// Dispatches on the dataset's task.
pub fn build_for_task(
    data: &Dataset,
    topo: &TreeTopology,
    consts: &FormulationConstants,
    roles: &FeatureRoles,
) -> Result<(MilpModel, VariableLayout)> {
    match data.task {
        Task::Regression => build_ormt(data, topo, consts, roles),
        Task::Binary => build_ocmt_binary(data, topo, consts, roles),
        Task::Multiclass => build_ocmt_multiclass(data, topo, consts, roles),
    }
}

fn build(
    data: &Dataset,
    topo: &TreeTopology,
    consts: &FormulationConstants,
    roles: &FeatureRoles,
    kind: FormulationKind,
) -> Result<(MilpModel, VariableLayout)> {
    if data.is_empty() {
        return Err(Error::data("cannot formulate over an empty dataset"));
    }
    if consts.max_splits as usize > topo.branch_count() {
        return Err(Error::config(format!(
            "S = {} exceeds the {} branch nodes of a depth-{} tree",
            consts.max_splits,
            topo.branch_count(),
            topo.depth()
        )));
    }
    let split_features: Vec<usize> = roles
        .split
        .iter()
        .copied()
        .filter(|&f| *consts.splittable.get(f).unwrap_or(&false))
        .collect();
    if topo.branch_count() > 0 && split_features.is_empty() {
        return Err(Error::config(
            "no split-eligible features remain after barring constant columns",
        ));
    }
    for &f in roles.leaf.iter().chain(roles.split.iter()) {
        if f >= data.num_features() {
            return Err(Error::config(format!("feature role index {f} out of range")));
        }
    }

    let class_slots = match kind {
        FormulationKind::Ormt | FormulationKind::OcmtBinary => 1,
        FormulationKind::OcmtMulticlass => data.class_count,
    };
    let npoints = data.num_points();
    let nleaves = topo.leaf_count();
    let first_leaf = topo.leaves().start;
    let mut model = MilpModel::new();

    // --- Tree-structure variables ---
    let d: Vec<VarRef> = topo
        .branch_nodes()
        .map(|n| model.add_binary(format!("d_{n}")))
        .collect::<Result<_>>()?;
    let mut a = Vec::with_capacity(topo.branch_count());
    let mut s = Vec::new();
    let mut a_abs = Vec::new();
    for n in topo.branch_nodes() {
        if consts.multivariate {
            let row: Vec<VarRef> = split_features
                .iter()
                .map(|f| model.add_continuous(-1.0, 1.0, format!("a_{f}_{n}")))
                .collect::<Result<_>>()?;
            a.push(row);
        } else {
            let row: Vec<VarRef> = split_features
                .iter()
                .map(|f| model.add_binary(format!("a_{f}_{n}")))
                .collect::<Result<_>>()?;
            a.push(row);
        }
    }
    if consts.multivariate {
        for n in topo.branch_nodes() {
            let row: Vec<VarRef> = split_features
                .iter()
                .map(|f| model.add_binary(format!("s_{f}_{n}")))
                .collect::<Result<_>>()?;
            s.push(row);
        }
        for n in topo.branch_nodes() {
            let row: Vec<VarRef> = split_features
                .iter()
                .map(|f| model.add_continuous(0.0, 1.0, format!("amag_{f}_{n}")))
                .collect::<Result<_>>()?;
            a_abs.push(row);
        }
    }
    let b: Vec<VarRef> = topo
        .branch_nodes()
        .map(|n| model.add_continuous(consts.b_lower, consts.b_upper, format!("b_{n}")))
        .collect::<Result<_>>()?;
    let z: Vec<Vec<VarRef>> = (0..npoints)
        .map(|i| {
            topo.leaves()
                .map(|n| model.add_binary(format!("z_{i}_{n}")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let l: Vec<VarRef> = topo
        .leaves()
        .map(|n| model.add_binary(format!("l_{n}")))
        .collect::<Result<_>>()?;

    // --- Leaf SVM variables ---
    let inf = f64::INFINITY;
    let mut beta = Vec::with_capacity(nleaves);
    let mut delta = Vec::with_capacity(nleaves);
    for n in topo.leaves() {
        let mut slots_w = Vec::with_capacity(class_slots);
        let mut slots_d = Vec::with_capacity(class_slots);
        for k in 0..class_slots {
            let row: Vec<VarRef> = roles
                .leaf
                .iter()
                .map(|f| model.add_continuous(-inf, inf, format!("beta_{k}_{f}_{n}")))
                .collect::<Result<_>>()?;
            slots_w.push(row);
            slots_d.push(model.add_continuous(-inf, inf, format!("delta_{k}_{n}"))?);
        }
        beta.push(slots_w);
        delta.push(slots_d);
    }
    let mut eps = vec![vec![vec![None; class_slots]; nleaves]; npoints];
    for i in 0..npoints {
        for (lp, n) in topo.leaves().enumerate() {
            for k in 0..class_slots {
                let var = match kind {
                    FormulationKind::Ormt => {
                        Some(model.add_continuous(-inf, inf, format!("eps_{i}_{n}"))?)
                    }
                    FormulationKind::OcmtBinary => {
                        Some(model.add_continuous(0.0, inf, format!("eps_{i}_{n}"))?)
                    }
                    FormulationKind::OcmtMulticlass => {
                        if k == data.labels.classes()[i] {
                            None
                        } else {
                            Some(model.add_continuous(0.0, inf, format!("eps_{k}_{i}_{n}"))?)
                        }
                    }
                };
                eps[i][lp][k] = var;
            }
        }
    }

    // --- Tree-structure constraints ---
    if topo.branch_count() > 0 {
        // Split budget.
        let terms: Vec<_> = d.iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint(&terms, Sense::Le, consts.max_splits as f64, "max_splits")?;
    }
    for (bp, n) in topo.branch_nodes().enumerate() {
        if consts.multivariate {
            apply_multivariate(&mut model, &a[bp], &s[bp], &a_abs[bp], d[bp], n)?;
        } else {
            // Exactly one split feature when the node splits.
            let mut terms: Vec<_> = a[bp].iter().map(|&v| (v, 1.0)).collect();
            terms.push((d[bp], -1.0));
            model.add_constraint(&terms, Sense::Eq, 0.0, format!("one_feature_{n}"))?;
        }
        if let Some(parent) = topo.parent(n) {
            if n != topo.root() {
                let pp = parent - 1;
                model.add_constraint(
                    &[(d[bp], 1.0), (d[pp], -1.0)],
                    Sense::Le,
                    0.0,
                    format!("split_if_parent_{n}"),
                )?;
            }
        }
    }
    for i in 0..npoints {
        // Each point lands in exactly one leaf.
        let terms: Vec<_> = z[i].iter().map(|&v| (v, 1.0)).collect();
        model.add_constraint(&terms, Sense::Eq, 1.0, format!("one_leaf_{i}"))?;
    }
    for (lp, n) in topo.leaves().enumerate() {
        for zrow in z.iter() {
            model.add_constraint(
                &[(zrow[lp], 1.0), (l[lp], -1.0)],
                Sense::Le,
                0.0,
                format!("occupied_if_used_{n}"),
            )?;
        }
        let mut terms: Vec<_> = z.iter().map(|zrow| (zrow[lp], 1.0)).collect();
        terms.push((l[lp], -1.0));
        model.add_constraint(&terms, Sense::Ge, 0.0, format!("used_if_occupied_{n}"))?;
        // A leaf reached through a left turn needs every such ancestor to
        // split; combined with the right-routing of the constraints below
        // this pins non-splitting subtrees to their rightmost leaf.
        for anc in topo.left_ancestors(n) {
            model.add_constraint(
                &[(l[lp], 1.0), (d[anc - 1], -1.0)],
                Sense::Le,
                0.0,
                format!("left_entry_split_{n}_{anc}"),
            )?;
        }
    }
    for (bp, n) in topo.branch_nodes().enumerate() {
        // Splits must be meaningful: both subtrees occupied.
        for (name, subtree) in [
            ("effective_left", topo.left_subtree_leaves(n)),
            ("effective_right", topo.right_subtree_leaves(n)),
        ] {
            let mut terms = vec![(d[bp], 1.0)];
            for leaf in subtree {
                terms.push((l[leaf - first_leaf], -1.0));
            }
            model.add_constraint(&terms, Sense::Le, 0.0, format!("{name}_{n}"))?;
        }
    }
    // Routing: left ancestors test strictly below the threshold (weakened
    // by mu), right ancestors at or above it. Univariate splits carry the
    // chosen feature's mu inside the coefficient; multivariate splits add
    // the scalar mu outside the weighted sum, which also rules out
    // zero-coefficient "splits" that would otherwise route points freely.
    for i in 0..npoints {
        for (lp, n) in topo.leaves().enumerate() {
            for anc in topo.left_ancestors(n) {
                let bp = anc - 1;
                let mut terms: Vec<(VarRef, f64)> = split_features
                    .iter()
                    .enumerate()
                    .map(|(fp, &f)| {
                        let mu = if consts.multivariate { 0.0 } else { consts.mu[f] };
                        (a[bp][fp], data.features[i][f] + mu)
                    })
                    .collect();
                terms.push((b[bp], -1.0));
                let rhs = if consts.multivariate { -MULTIVARIATE_MU } else { 0.0 };
                model.add_indicator_leq(&terms, rhs, z[i][lp], consts.m_split)?;
            }
            for anc in topo.right_ancestors(n) {
                let bp = anc - 1;
                let mut terms: Vec<(VarRef, f64)> = split_features
                    .iter()
                    .enumerate()
                    .map(|(fp, &f)| (a[bp][fp], data.features[i][f]))
                    .collect();
                terms.push((b[bp], -1.0));
                model.add_indicator_geq(&terms, 0.0, z[i][lp], consts.m_split)?;
            }
        }
    }

    // --- Leaf SVM constraints ---
    match kind {
        FormulationKind::Ormt => {
            let y = data.labels.numeric();
            for i in 0..npoints {
                for lp in 0..nleaves {
                    let e = eps[i][lp][0].unwrap();
                    let mut terms: Vec<(VarRef, f64)> = roles
                        .leaf
                        .iter()
                        .enumerate()
                        .map(|(fp, &f)| (beta[lp][0][fp], data.features[i][f]))
                        .collect();
                    terms.push((delta[lp][0], 1.0));
                    terms.push((e, -1.0));
                    // Active constraints pin eps to the signed residual.
                    model.add_indicator_geq(&terms, y[i], z[i][lp], consts.m_svm)?;
                    model.add_indicator_leq(&terms, y[i], z[i][lp], consts.m_svm)?;
                }
            }
        }
        FormulationKind::OcmtBinary => {
            let labels = data.labels.classes();
            for i in 0..npoints {
                let y = if labels[i] == 1 { 1.0 } else { -1.0 };
                for lp in 0..nleaves {
                    let e = eps[i][lp][0].unwrap();
                    let mut terms: Vec<(VarRef, f64)> = roles
                        .leaf
                        .iter()
                        .enumerate()
                        .map(|(fp, &f)| (beta[lp][0][fp], y * data.features[i][f]))
                        .collect();
                    terms.push((delta[lp][0], y));
                    terms.push((e, 1.0));
                    // y (beta x + delta) >= 1 - eps when the point is here.
                    model.add_indicator_geq(&terms, 1.0, z[i][lp], consts.m_svm)?;
                }
            }
        }
        FormulationKind::OcmtMulticlass => {
            let labels = data.labels.classes();
            for i in 0..npoints {
                let yi = labels[i];
                for lp in 0..nleaves {
                    for k in 0..class_slots {
                        if k == yi {
                            continue;
                        }
                        let e = eps[i][lp][k].unwrap();
                        let mut terms: Vec<(VarRef, f64)> = Vec::new();
                        for (fp, &f) in roles.leaf.iter().enumerate() {
                            let x = data.features[i][f];
                            terms.push((beta[lp][yi][fp], x));
                            terms.push((beta[lp][k][fp], -x));
                        }
                        terms.push((delta[lp][yi], 1.0));
                        terms.push((delta[lp][k], -1.0));
                        terms.push((e, 1.0));
                        // Own-class score beats class k by the margin 2,
                        // short of slack, when the point is in this leaf.
                        model.add_indicator_geq(&terms, 2.0, z[i][lp], consts.m_svm)?;
                    }
                }
            }
        }
    }

    // --- Objective: sum |beta| + C * loss ---
    let mut beta_abs = vec![vec![Vec::new(); class_slots]; nleaves];
    for lp in 0..nleaves {
        for k in 0..class_slots {
            for fp in 0..roles.leaf.len() {
                let t = model.add_abs_objective_term(beta[lp][k][fp], 1.0)?;
                beta_abs[lp][k].push(t);
            }
        }
    }
    let mut eps_abs = vec![vec![vec![None; class_slots]; nleaves]; npoints];
    for i in 0..npoints {
        for lp in 0..nleaves {
            for k in 0..class_slots {
                if let Some(e) = eps[i][lp][k] {
                    match kind {
                        FormulationKind::Ormt => {
                            let t = model.add_abs_objective_term(e, consts.c)?;
                            eps_abs[i][lp][k] = Some(t);
                        }
                        _ => model.add_objective_term(e, consts.c)?,
                    }
                }
            }
        }
    }

    let layout = VariableLayout {
        kind,
        multivariate: consts.multivariate,
        split_features,
        leaf_features: roles.leaf.clone(),
        class_slots,
        d,
        a,
        s,
        a_abs,
        b,
        z,
        l,
        beta,
        beta_abs,
        delta,
        eps,
        eps_abs,
    };
    Ok((model, layout))
}

/// Multivariate split block replacing the one-feature-per-split equality:
/// coefficients live in [-1, 1], indicator binaries mark nonzero ones, the
/// coefficient magnitudes sum to at most `d_n`, and a splitting node has
/// at least one nonzero coefficient.
fn apply_multivariate(
    model: &mut MilpModel,
    a_row: &[VarRef],
    s_row: &[VarRef],
    abs_row: &[VarRef],
    d_n: VarRef,
    node: usize,
) -> Result<()> {
    for ((&av, &sv), &tv) in a_row.iter().zip(s_row).zip(abs_row) {
        model.add_constraint(&[(av, 1.0), (sv, -1.0)], Sense::Le, 0.0, "s_ge_a")?;
        model.add_constraint(&[(av, -1.0), (sv, -1.0)], Sense::Le, 0.0, "s_ge_neg_a")?;
        model.add_constraint(&[(av, 1.0), (tv, -1.0)], Sense::Le, 0.0, "mag_ge_a")?;
        model.add_constraint(&[(av, -1.0), (tv, -1.0)], Sense::Le, 0.0, "mag_ge_neg_a")?;
        model.add_constraint(&[(sv, 1.0), (d_n, -1.0)], Sense::Le, 0.0, "s_le_d")?;
    }
    let mut mag_sum: Vec<(VarRef, f64)> = abs_row.iter().map(|&t| (t, 1.0)).collect();
    mag_sum.push((d_n, -1.0));
    model.add_constraint(&mag_sum, Sense::Le, 0.0, format!("coeff_budget_{node}"))?;
    let mut s_sum: Vec<(VarRef, f64)> = s_row.iter().map(|&s| (s, 1.0)).collect();
    s_sum.push((d_n, -1.0));
    model.add_constraint(&s_sum, Sense::Ge, 0.0, format!("some_coeff_{node}"))?;
    Ok(())
}

/// Reads the learned tree out of a solver assignment: branch nodes with
/// `d >= 0.5` become splits, the rest pass right; leaf SVMs come from the
/// beta/delta values, with unoccupied leaves zeroed.
pub fn extract_tree(
    layout: &VariableLayout,
    outcome: &SolveOutcome,
    data: &Dataset,
    topo: &TreeTopology,
    consts: &FormulationConstants,
    preprocess: &PreprocessParams,
) -> Result<ModelTree> {
    let x = outcome
        .assignment
        .as_ref()
        .ok_or_else(|| Error::NoSolution("cannot extract a tree without an assignment".into()))?;
    let val = |v: VarRef| x[v.0];

    // Points routed right through each branch node according to z: used to
    // de-noise thresholds the solver parked within roundoff of a data
    // value, which would otherwise flip that point under the strict
    // less-than prediction rule.
    let first_leaf = topo.leaves().start;
    let mut right_traffic: Vec<Vec<usize>> = vec![Vec::new(); topo.branch_count()];
    for (i, zrow) in layout.z.iter().enumerate() {
        if let Some(lp) = zrow.iter().position(|&zv| val(zv) >= 0.5) {
            for anc in topo.right_ancestors(first_leaf + lp) {
                right_traffic[anc - 1].push(i);
            }
        }
    }

    let mut splits = Vec::with_capacity(topo.branch_count());
    for (bp, n) in topo.branch_nodes().enumerate() {
        if val(layout.d[bp]) >= 0.5 {
            if layout.multivariate {
                let weights: Vec<(usize, f64)> = layout
                    .split_features
                    .iter()
                    .enumerate()
                    .filter_map(|(fp, &f)| {
                        let w = val(layout.a[bp][fp]);
                        (w.abs() > 1e-9).then_some((f, w))
                    })
                    .collect();
                if weights.is_empty() {
                    // A "split" with no coefficients routes like a
                    // non-splitting node.
                    splits.push(SplitRule::PassRight);
                } else {
                    let threshold = snap_threshold(
                        val(layout.b[bp]),
                        right_traffic[bp].iter().map(|&i| {
                            weights
                                .iter()
                                .map(|&(f, w)| w * data.features[i][f])
                                .sum::<f64>()
                        }),
                    );
                    splits.push(SplitRule::Multivariate { weights, threshold });
                }
            } else {
                let feature = layout
                    .split_features
                    .iter()
                    .enumerate()
                    .find(|(fp, _)| val(layout.a[bp][*fp]) >= 0.5)
                    .map(|(_, &f)| f);
                match feature {
                    Some(f) => splits.push(SplitRule::Univariate {
                        feature: f,
                        threshold: snap_threshold(
                            val(layout.b[bp]),
                            right_traffic[bp].iter().map(|&i| data.features[i][f]),
                        ),
                    }),
                    None => {
                        return Err(Error::model(format!(
                            "node {n} splits but no feature indicator is set; \
                             solver integrality tolerance failure"
                        )))
                    }
                }
            }
        } else {
            splits.push(SplitRule::PassRight);
        }
    }

    let mut leaves = Vec::with_capacity(topo.leaf_count());
    for lp in 0..topo.leaf_count() {
        if val(layout.l[lp]) >= 0.5 {
            let weights: Vec<Vec<f64>> = layout.beta[lp]
                .iter()
                .map(|row| row.iter().map(|&v| val(v)).collect())
                .collect();
            let intercepts: Vec<f64> = layout.delta[lp].iter().map(|&v| val(v)).collect();
            leaves.push(LeafModel {
                weights,
                intercepts,
            });
        } else {
            leaves.push(LeafModel::zero(layout.class_slots, layout.leaf_features.len()));
        }
    }

    let tree = ModelTree {
        topology: *topo,
        splits,
        leaves,
        task: data.task,
        class_names: data.class_names.clone(),
        feature_names: data.feature_names.clone(),
        roles: FeatureRoles {
            split: layout.split_features.clone(),
            leaf: layout.leaf_features.clone(),
        },
        constants: consts.clone(),
        preprocess: preprocess.clone(),
        provenance: Provenance {
            status: status_str(outcome.status).to_string(),
            gap: outcome.gap,
            objective: outcome.objective,
            nodes: outcome.nodes,
            wall_time: outcome.wall_time,
        },
    };
    tree.validate()?;
    Ok(tree)
}

/// The routing constraints put right-routed points at or above the
/// threshold, so the smallest right-routed split value is itself a valid
/// threshold and keeps the strict less-than rule exact at the boundary.
fn snap_threshold(raw: f64, right_values: impl Iterator<Item = f64>) -> f64 {
    let min_right = right_values.fold(f64::INFINITY, f64::min);
    if min_right.is_finite() && (min_right - raw).abs() <= 1e-6 * (1.0 + raw.abs()) {
        min_right
    } else {
        raw
    }
}

fn status_str(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Feasible => "feasible",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::NoSolutionTimeout => "no-solution-timeout",
    }
}

/// Recomputes the training objective of an extracted tree directly from
/// the data: routes every point, then sums the leaf-weight magnitudes and
/// the C-weighted losses. Independent of any solver state.
pub fn training_objective(
    tree: &ModelTree,
    data: &Dataset,
    consts: &FormulationConstants,
) -> Result<f64> {
    if data.num_features() != tree.feature_names.len() {
        return Err(Error::dimension(
            "tree and dataset feature spaces differ",
        ));
    }
    let mut weight_term = 0.0;
    for leaf in &tree.leaves {
        for row in &leaf.weights {
            weight_term += row.iter().map(|w| w.abs()).sum::<f64>();
        }
    }
    let mut loss = 0.0;
    for (i, xrow) in data.features.iter().enumerate() {
        let leaf = tree.route(xrow)?;
        let scores = tree.leaf_scores(leaf, xrow);
        match data.task {
            Task::Regression => {
                loss += (scores[0] - data.labels.numeric()[i]).abs();
            }
            Task::Binary => {
                let y = if data.labels.classes()[i] == 1 { 1.0 } else { -1.0 };
                loss += (1.0 - y * scores[0]).max(0.0);
            }
            Task::Multiclass => {
                let yi = data.labels.classes()[i];
                for (k, s) in scores.iter().enumerate() {
                    if k != yi {
                        loss += (s + 2.0 - scores[yi]).max(0.0);
                    }
                }
            }
        }
    }
    Ok(weight_term + consts.c * loss)
}

/// Builds a full assignment vector realizing `tree` on `data` under the
/// given layout, for use as a branch-and-bound warm start. The result is
/// not guaranteed feasible (thresholds may sit inside another dataset's
/// separation bands); callers validate and discard accordingly.
pub fn assignment_for_tree(
    tree: &ModelTree,
    data: &Dataset,
    layout: &VariableLayout,
    model: &MilpModel,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; model.num_vars()];
    let topo = &tree.topology;
    if layout.d.len() != topo.branch_count() || layout.z.len() != data.num_points() {
        return Err(Error::dimension(
            "layout does not match the tree topology or dataset",
        ));
    }
    let feature_pos = |f: usize| layout.split_features.iter().position(|&g| g == f);
    for (bp, rule) in tree.splits.iter().enumerate() {
        match rule {
            SplitRule::Univariate { feature, threshold } => {
                let fp = feature_pos(*feature).ok_or_else(|| {
                    Error::model(format!("split feature {feature} missing from layout"))
                })?;
                x[layout.d[bp].0] = 1.0;
                x[layout.a[bp][fp].0] = 1.0;
                x[layout.b[bp].0] = *threshold;
            }
            SplitRule::Multivariate { weights, threshold } => {
                x[layout.d[bp].0] = 1.0;
                x[layout.b[bp].0] = *threshold;
                for &(f, w) in weights {
                    let fp = feature_pos(f).ok_or_else(|| {
                        Error::model(format!("split feature {f} missing from layout"))
                    })?;
                    x[layout.a[bp][fp].0] = w;
                    x[layout.s[bp][fp].0] = 1.0;
                    x[layout.a_abs[bp][fp].0] = w.abs();
                }
            }
            SplitRule::PassRight => {}
        }
    }
    for lp in 0..topo.leaf_count() {
        for (k, row) in layout.beta[lp].iter().enumerate() {
            for (fp, &v) in row.iter().enumerate() {
                let w = tree.leaves[lp].weights[k][fp];
                x[v.0] = w;
                x[layout.beta_abs[lp][k][fp].0] = w.abs();
            }
            x[layout.delta[lp][k].0] = tree.leaves[lp].intercepts[k];
        }
    }
    let first_leaf = topo.leaves().start;
    for (i, xrow) in data.features.iter().enumerate() {
        let leaf = tree.route(xrow)?;
        let lp = leaf - first_leaf;
        x[layout.z[i][lp].0] = 1.0;
        x[layout.l[lp].0] = 1.0;
        let scores = tree.leaf_scores(leaf, xrow);
        match layout.kind {
            FormulationKind::Ormt => {
                let resid = scores[0] - data.labels.numeric()[i];
                let e = layout.eps[i][lp][0].unwrap();
                x[e.0] = resid;
                x[layout.eps_abs[i][lp][0].unwrap().0] = resid.abs();
            }
            FormulationKind::OcmtBinary => {
                let y = if data.labels.classes()[i] == 1 { 1.0 } else { -1.0 };
                let e = layout.eps[i][lp][0].unwrap();
                x[e.0] = (1.0 - y * scores[0]).max(0.0);
            }
            FormulationKind::OcmtMulticlass => {
                let yi = data.labels.classes()[i];
                for k in 0..layout.class_slots {
                    if k == yi {
                        continue;
                    }
                    let e = layout.eps[i][lp][k].unwrap();
                    x[e.0] = (scores[k] + 2.0 - scores[yi]).max(0.0);
                }
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnb::{self, SolverConfig};
    use crate::data::{FeatureOrigin, Labels, Standardization};
    use crate::milp::VarKind;
    use crate::data::{ColumnSpec, PreprocessParams};

    fn regression_data(points: &[(Vec<f64>, f64)]) -> Dataset {
        let nf = points[0].0.len();
        Dataset {
            features: points.iter().map(|(x, _)| x.clone()).collect(),
            labels: Labels::Numeric(points.iter().map(|(_, y)| *y).collect()),
            task: Task::Regression,
            class_count: 1,
            class_names: Vec::new(),
            feature_names: (0..nf).map(|j| format!("x{j}")).collect(),
            origins: (0..nf)
                .map(|j| FeatureOrigin::Numeric {
                    source: format!("x{j}"),
                })
                .collect(),
        }
    }

    fn classification_data(points: &[(Vec<f64>, usize)], k: usize, task: Task) -> Dataset {
        let nf = points[0].0.len();
        Dataset {
            features: points.iter().map(|(x, _)| x.clone()).collect(),
            labels: Labels::Classes(points.iter().map(|(_, y)| *y).collect()),
            task,
            class_count: k,
            class_names: (0..k).map(|c| format!("c{c}")).collect(),
            feature_names: (0..nf).map(|j| format!("x{j}")).collect(),
            origins: (0..nf)
                .map(|j| FeatureOrigin::Numeric {
                    source: format!("x{j}"),
                })
                .collect(),
        }
    }

    fn passthrough_preprocess(n: usize) -> PreprocessParams {
        PreprocessParams {
            columns: (0..n)
                .map(|j| ColumnSpec::Numeric {
                    name: format!("x{j}"),
                })
                .collect(),
            label: "y".into(),
            standardization: Standardization::identity(n),
        }
    }

    fn quick_solve(model: &MilpModel) -> SolveOutcome {
        let cfg = SolverConfig {
            time_limit: 120.0,
            ..SolverConfig::default()
        };
        bnb::solve(model, &cfg).expect("solve")
    }

    /// Directly formulated single L1 regression SVM (absolute error loss).
    fn l1_svm_regression_objective(data: &Dataset, c: f64) -> f64 {
        let mut m = MilpModel::new();
        let inf = f64::INFINITY;
        let betas: Vec<VarRef> = (0..data.num_features())
            .map(|f| m.add_continuous(-inf, inf, format!("w{f}")).unwrap())
            .collect();
        let delta = m.add_continuous(-inf, inf, "d").unwrap();
        for (i, row) in data.features.iter().enumerate() {
            let e = m.add_continuous(-inf, inf, format!("e{i}")).unwrap();
            let mut terms: Vec<(VarRef, f64)> =
                betas.iter().zip(row).map(|(&b, &x)| (b, x)).collect();
            terms.push((delta, 1.0));
            terms.push((e, -1.0));
            m.add_constraint(&terms, Sense::Eq, data.labels.numeric()[i], "fit")
                .unwrap();
            m.add_abs_objective_term(e, c).unwrap();
        }
        for &b in &betas {
            m.add_abs_objective_term(b, 1.0).unwrap();
        }
        crate::simplex::solve_lp(&m, &[]).unwrap().objective
    }

    /// Directly formulated single L1 hinge SVM for +-1 labels.
    fn l1_svm_hinge_objective(xs: &[Vec<f64>], ys: &[f64], c: f64) -> f64 {
        let mut m = MilpModel::new();
        let inf = f64::INFINITY;
        let nf = xs[0].len();
        let betas: Vec<VarRef> = (0..nf)
            .map(|f| m.add_continuous(-inf, inf, format!("w{f}")).unwrap())
            .collect();
        let delta = m.add_continuous(-inf, inf, "d").unwrap();
        for (i, row) in xs.iter().enumerate() {
            let e = m.add_continuous(0.0, inf, format!("e{i}")).unwrap();
            let mut terms: Vec<(VarRef, f64)> = betas
                .iter()
                .zip(row)
                .map(|(&b, &x)| (b, ys[i] * x))
                .collect();
            terms.push((delta, ys[i]));
            terms.push((e, 1.0));
            m.add_constraint(&terms, Sense::Ge, 1.0, "margin").unwrap();
            m.add_objective_term(e, c).unwrap();
        }
        for &b in &betas {
            m.add_abs_objective_term(b, 1.0).unwrap();
        }
        crate::simplex::solve_lp(&m, &[]).unwrap().objective
    }

    /// Checks routing, partition, split-monotonicity, and occupancy
    /// invariants of a solved instance.
    fn assert_solution_invariants(
        layout: &VariableLayout,
        outcome: &SolveOutcome,
        data: &Dataset,
        topo: &TreeTopology,
        consts: &FormulationConstants,
    ) {
        let x = outcome.assignment.as_ref().unwrap();
        let val = |v: VarRef| x[v.0];
        // Partition: exactly one leaf per point.
        for zrow in &layout.z {
            let total: f64 = zrow.iter().map(|&z| val(z)).sum();
            assert!((total - 1.0).abs() < 1e-6, "partition violated");
        }
        // Split monotonicity and budget.
        let mut total_d = 0.0;
        for (bp, n) in topo.branch_nodes().enumerate() {
            total_d += val(layout.d[bp]);
            if n != topo.root() {
                let parent = topo.parent(n).unwrap();
                assert!(val(layout.d[bp]) <= val(layout.d[parent - 1]) + 1e-6);
            }
        }
        assert!(total_d <= consts.max_splits as f64 + 1e-6);
        // Meaningful splits: both subtrees of a splitting node occupied.
        let first_leaf = topo.leaves().start;
        for (bp, n) in topo.branch_nodes().enumerate() {
            if val(layout.d[bp]) >= 0.5 {
                for side in [topo.left_subtree_leaves(n), topo.right_subtree_leaves(n)] {
                    let occ: f64 = side.iter().map(|&lf| val(layout.l[lf - first_leaf])).sum();
                    assert!(occ >= 0.5, "split at {n} with an empty side");
                }
            }
        }
        // Routing consistency against the assigned leaf.
        for (i, zrow) in layout.z.iter().enumerate() {
            let lp = zrow.iter().position(|&z| val(z) >= 0.5).unwrap();
            let leaf = first_leaf + lp;
            for anc in topo.left_ancestors(leaf) {
                let bp = anc - 1;
                let mut lhs: f64 = layout
                    .split_features
                    .iter()
                    .enumerate()
                    .map(|(fp, &f)| {
                        let mu = if consts.multivariate { 0.0 } else { consts.mu[f] };
                        val(layout.a[bp][fp]) * (data.features[i][f] + mu)
                    })
                    .sum();
                if consts.multivariate {
                    lhs += consts.mu_multivariate();
                }
                assert!(lhs <= val(layout.b[bp]) + 1e-6, "left routing violated");
            }
            for anc in topo.right_ancestors(leaf) {
                let bp = anc - 1;
                let lhs: f64 = layout
                    .split_features
                    .iter()
                    .enumerate()
                    .map(|(fp, &f)| val(layout.a[bp][fp]) * data.features[i][f])
                    .sum();
                assert!(lhs >= val(layout.b[bp]) - 1e-6, "right routing violated");
            }
        }
    }

    #[test]
    fn ormt_binary_variable_count() {
        // Depth 2, 3 features, 10 points: 3 d + 9 a + 40 z + 4 l binaries.
        let points: Vec<(Vec<f64>, f64)> = (0..10)
            .map(|i| {
                let t = i as f64;
                (vec![t, t * 0.5 - 2.0, (t * t) % 3.0], t)
            })
            .collect();
        let data = regression_data(&points);
        let topo = TreeTopology::new(2);
        let roles = FeatureRoles::all(3);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 3, false).unwrap();
        let (model, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        let binaries = model
            .variables()
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count();
        assert_eq!(binaries, 56);
        assert_eq!(layout.d.len(), 3);
        assert_eq!(layout.z.len(), 10);
        assert_eq!(layout.z[0].len(), 4);
    }

    #[test]
    fn multiclass_epsilon_count() {
        // 10 points, 3 classes, 4 leaves: eps only for k != y_i -> 80.
        let points: Vec<(Vec<f64>, usize)> = (0..10)
            .map(|i| (vec![i as f64, (i % 4) as f64], i % 3))
            .collect();
        let data = classification_data(&points, 3, Task::Multiclass);
        let topo = TreeTopology::new(2);
        let roles = FeatureRoles::all(2);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 3, false).unwrap();
        let (_, layout) = build_ocmt_multiclass(&data, &topo, &consts, &roles).unwrap();
        let eps_count: usize = layout
            .eps
            .iter()
            .flatten()
            .flatten()
            .filter(|e| e.is_some())
            .count();
        assert_eq!(eps_count, 80);
    }

    #[test]
    fn multivariate_adds_indicators_and_magnitudes() {
        let points: Vec<(Vec<f64>, f64)> = (0..6)
            .map(|i| (vec![i as f64, -(i as f64), (i * i) as f64 * 0.1], i as f64))
            .collect();
        let data = regression_data(&points);
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(3);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 1, true).unwrap();
        let (_, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        assert_eq!(layout.s.len(), 1);
        assert_eq!(layout.s[0].len(), 3);
        assert_eq!(layout.a_abs[0].len(), 3);
    }

    #[test]
    fn rejects_bad_configurations() {
        let data = regression_data(&[(vec![0.0], 0.0), (vec![1.0], 1.0)]);
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(1);
        // S exceeding branch count.
        assert!(FormulationConstants::from_data(&data, &roles, 1.0, 2, false)
            .and_then(|c| build_ormt(&data, &topo, &c, &roles))
            .is_err());
        // Wrong task dispatch.
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 1, false).unwrap();
        assert!(build_ocmt_binary(&data, &topo, &consts, &roles).is_err());
        // Multiclass needs K >= 3.
        let bdata = classification_data(&[(vec![0.0], 0), (vec![1.0], 1)], 2, Task::Binary);
        assert!(build_ocmt_multiclass(&bdata, &topo, &consts, &roles).is_err());
    }

    #[test]
    fn depth0_binary_two_points() {
        // Optimal separating model: beta = 1, delta = 0, objective 1.
        let data = classification_data(&[(vec![-1.0], 0), (vec![1.0], 1)], 2, Task::Binary);
        let topo = TreeTopology::new(0);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 0, false).unwrap();
        let (model, layout) = build_ocmt_binary(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);
        assert!((out.objective - 1.0).abs() < 1e-6, "objective {}", out.objective);
        let x = out.assignment.as_ref().unwrap();
        assert!((x[layout.beta[0][0][0].0] - 1.0).abs() < 1e-6);
        assert!(x[layout.delta[0][0].0].abs() < 1e-6);
    }

    #[test]
    fn depth0_single_point_costs_nothing() {
        let data = classification_data(&[(vec![2.0], 1)], 2, Task::Binary);
        let topo = TreeTopology::new(0);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 0, false).unwrap();
        let (model, _) = build_ocmt_binary(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert!(out.objective.abs() < 1e-7);
    }

    #[test]
    fn split_budget_zero_routes_all_points_right() {
        let data = regression_data(&[
            (vec![-1.0], -1.0),
            (vec![0.0], 0.5),
            (vec![1.0], 2.0),
            (vec![2.0], 3.0),
        ]);
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 0, false).unwrap();
        let (model, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);
        let x = out.assignment.as_ref().unwrap();
        // Rightmost leaf holds everything.
        for zrow in &layout.z {
            assert!(x[zrow[1].0] >= 0.5);
            assert!(x[zrow[0].0] < 0.5);
        }
        // Matches a directly formulated single SVM.
        let direct = l1_svm_regression_objective(&data, 1.0);
        assert!(
            (out.objective - direct).abs() <= 1e-6 * direct.abs().max(1.0),
            "milp {} vs direct {}",
            out.objective,
            direct
        );
        // Extraction collapses to one reachable leaf.
        let preprocess = passthrough_preprocess(1);
        let tree = extract_tree(&layout, &out, &data, &topo, &consts, &preprocess).unwrap();
        assert_eq!(tree.count_leaves(), 1);
        assert_eq!(tree.active_splits(), 0);
    }

    #[test]
    fn one_dim_xor_split_with_oracle() {
        // Labels +, -, + along one feature: one split must isolate a region.
        let xs = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let ys_pm = [1.0, -1.0, 1.0];
        let c = 10.0;
        let data = classification_data(
            &[(vec![-1.0], 1), (vec![0.0], 0), (vec![1.0], 1)],
            2,
            Task::Binary,
        );
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, c, 1, false).unwrap();
        let (model, layout) = build_ocmt_binary(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);

        // Oracle: no split, or a split between consecutive distinct values;
        // each leaf is an independent hinge LP.
        let mut candidates = vec![l1_svm_hinge_objective(&xs, &ys_pm, c)];
        for threshold in [1usize, 2] {
            let left = l1_svm_hinge_objective(&xs[..threshold].to_vec(), &ys_pm[..threshold], c);
            let right = l1_svm_hinge_objective(&xs[threshold..].to_vec(), &ys_pm[threshold..], c);
            candidates.push(left + right);
        }
        let oracle = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            (out.objective - oracle).abs() <= 1e-4 * oracle.abs().max(1.0),
            "milp {} vs oracle {}",
            out.objective,
            oracle
        );

        let preprocess = passthrough_preprocess(1);
        let tree = extract_tree(&layout, &out, &data, &topo, &consts, &preprocess).unwrap();
        assert_eq!(tree.count_leaves(), 2);
        // Zero training errors.
        for (row, &y) in data.features.iter().zip(data.labels.classes()) {
            let p = tree.predict_encoded(row).unwrap();
            assert_eq!(p.class(), y);
        }
        assert_solution_invariants(&layout, &out, &data, &topo, &consts);
    }

    #[test]
    fn multiclass_three_points_perfectly_classified() {
        let data = classification_data(
            &[(vec![-1.0], 0), (vec![0.0], 1), (vec![1.0], 2)],
            3,
            Task::Multiclass,
        );
        let topo = TreeTopology::new(0);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 10.0, 0, false).unwrap();
        let (model, layout) = build_ocmt_multiclass(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);
        let preprocess = passthrough_preprocess(1);
        let tree = extract_tree(&layout, &out, &data, &topo, &consts, &preprocess).unwrap();
        for (row, &y) in data.features.iter().zip(data.labels.classes()) {
            assert_eq!(tree.predict_encoded(row).unwrap().class(), y);
        }
    }

    #[test]
    fn extraction_matches_split_pattern() {
        // Fabricated assignment with splits at nodes 1, 2, 4 of a depth-3
        // tree; reachable leaves must be 8, 9, 11, 15.
        let points: Vec<(Vec<f64>, f64)> = (0..6).map(|i| (vec![i as f64], i as f64)).collect();
        let data = regression_data(&points);
        let topo = TreeTopology::new(3);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 7, false).unwrap();
        let (model, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        let mut x = vec![0.0; model.num_vars()];
        for n in [1usize, 2, 4] {
            x[layout.d[n - 1].0] = 1.0;
            x[layout.a[n - 1][0].0] = 1.0;
        }
        for leaf in [8usize, 9, 11, 15] {
            x[layout.l[leaf - 8].0] = 1.0;
        }
        let outcome = SolveOutcome {
            status: SolveStatus::Feasible,
            assignment: Some(x),
            objective: 0.0,
            best_bound: 0.0,
            gap: 0.0,
            nodes: 0,
            wall_time: 0.0,
        };
        let preprocess = passthrough_preprocess(1);
        let tree = extract_tree(&layout, &outcome, &data, &topo, &consts, &preprocess).unwrap();
        assert_eq!(tree.count_leaves(), 4);
        let reachable = topo.reachable_leaves(|n| {
            !matches!(tree.splits[n - 1], SplitRule::PassRight)
        });
        assert_eq!(reachable, vec![8, 9, 11, 15]);

        // Two active splits leave three reachable leaves.
        let topo2 = TreeTopology::new(2);
        let consts2 = FormulationConstants::from_data(&data, &roles, 1.0, 3, false).unwrap();
        let (model2, layout2) = build_ormt(&data, &topo2, &consts2, &roles).unwrap();
        let mut x2 = vec![0.0; model2.num_vars()];
        for n in [1usize, 2] {
            x2[layout2.d[n - 1].0] = 1.0;
            x2[layout2.a[n - 1][0].0] = 1.0;
        }
        let outcome2 = SolveOutcome {
            assignment: Some(x2),
            ..outcome
        };
        let tree2 =
            extract_tree(&layout2, &outcome2, &data, &topo2, &consts2, &preprocess).unwrap();
        assert_eq!(tree2.count_leaves(), 3);
    }

    #[test]
    fn training_objective_matches_solver() {
        let data = regression_data(&[
            (vec![-2.0], -2.1),
            (vec![-1.0], -0.9),
            (vec![0.5], 1.4),
            (vec![1.5], 4.6),
            (vec![2.0], 6.0),
        ]);
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 1, false).unwrap();
        let (model, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);
        let preprocess = passthrough_preprocess(1);
        let tree = extract_tree(&layout, &out, &data, &topo, &consts, &preprocess).unwrap();
        let recomputed = training_objective(&tree, &data, &consts).unwrap();
        assert!(
            (recomputed - out.objective).abs() <= 1e-5 * out.objective.abs().max(1.0),
            "recomputed {} vs solver {}",
            recomputed,
            out.objective
        );
        assert_solution_invariants(&layout, &out, &data, &topo, &consts);
    }

    #[test]
    fn more_splits_never_hurt() {
        let data = crate::synth::piecewise_regression(12, 3);
        let roles = FeatureRoles::all(1);
        let mut objectives = Vec::new();
        for s in 0..=1u32 {
            let topo = TreeTopology::new(1);
            let consts = FormulationConstants::from_data(&data, &roles, 1.0, s, false).unwrap();
            let (model, _) = build_ormt(&data, &topo, &consts, &roles).unwrap();
            let out = quick_solve(&model);
            assert_eq!(out.status, bnb::SolveStatus::Optimal);
            objectives.push(out.objective);
        }
        assert!(objectives[1] <= objectives[0] + 1e-9);
    }

    #[test]
    fn warm_start_from_extracted_tree_is_feasible() {
        let data = crate::synth::piecewise_regression(10, 11);
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(1);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 1, false).unwrap();
        let (model, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);
        let preprocess = passthrough_preprocess(1);
        let tree = extract_tree(&layout, &out, &data, &topo, &consts, &preprocess).unwrap();
        let warm = assignment_for_tree(&tree, &data, &layout, &model).unwrap();
        let feas = bnb::check_feasible(&model, &warm).unwrap();
        assert!(feas.feasible, "violation {}", feas.max_violation);
        let warm_obj = model.objective_value(&warm);
        assert!((warm_obj - out.objective).abs() <= 1e-5 * out.objective.abs().max(1.0));
    }

    #[test]
    fn multivariate_diagonal_split() {
        let data = crate::synth::diagonal_regression(14, 5);
        let topo = TreeTopology::new(1);
        let roles = FeatureRoles::all(2);
        let consts = FormulationConstants::from_data(&data, &roles, 1.0, 1, true).unwrap();
        let (model, layout) = build_ormt(&data, &topo, &consts, &roles).unwrap();
        let out = quick_solve(&model);
        assert_eq!(out.status, bnb::SolveStatus::Optimal);
        let x = out.assignment.as_ref().unwrap();
        // Coefficient discipline: s >= |a|, sum |a| <= d, s <= d.
        for bp in 0..1 {
            let d = x[layout.d[bp].0];
            let mut mag = 0.0;
            for fp in 0..2 {
                let a = x[layout.a[bp][fp].0];
                let s = x[layout.s[bp][fp].0];
                assert!(s + 1e-6 >= a.abs());
                assert!(s <= d + 1e-6);
                mag += a.abs();
            }
            assert!(mag <= d + 1e-6);
        }
        let preprocess = passthrough_preprocess(2);
        let tree = extract_tree(&layout, &out, &data, &topo, &consts, &preprocess).unwrap();
        // The level jump sits on a diagonal: only a multivariate split
        // can give both leaves an exactly-linear region.
        match &tree.splits[0] {
            SplitRule::Multivariate { weights, .. } => {
                let total: f64 = weights.iter().map(|(_, w)| w.abs()).sum();
                assert!(total <= 1.0 + 1e-6);
            }
            other => panic!("expected multivariate split, got {other:?}"),
        }
        // Near-exact piecewise-linear fit.
        for (row, &y) in data.features.iter().zip(data.labels.numeric().iter()) {
            let leaf = tree.route(row).unwrap();
            let pred = tree.leaf_scores(leaf, row)[0];
            assert!((pred - y).abs() < 0.05, "pred {pred} vs {y}");
        }
        assert_solution_invariants(&layout, &out, &data, &topo, &consts);
    }
}
