//! Mixed-integer linear program representation.
//!
//! A [`MilpModel`] holds variables (binary/continuous with bounds), linear
//! constraints, and a linear minimization objective. Helpers cover the two
//! modelling idioms used throughout the tree formulations: absolute values
//! in the objective (one auxiliary plus two inequalities) and big-M
//! indicator constraints. Models export to CPLEX-LP text for use with
//! external solvers.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense 0-based handle to a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct LinearConstraint {
    /// Coefficient per variable, pre-merged: no duplicate `VarRef`.
    pub terms: Vec<(VarRef, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

/// A candidate assignment used to seed the branch-and-bound incumbent.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub assignment: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<LinearConstraint>,
    /// Minimized; one coefficient per variable (zero-filled).
    objective: Vec<f64>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn variable(&self, v: VarRef) -> &Variable {
        &self.variables[v.0]
    }

    /// Objective coefficients, one per variable.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn binary_vars(&self) -> impl Iterator<Item = VarRef> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarRef(i))
    }

    pub fn add_variable(
        &mut self,
        kind: VarKind,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarRef> {
        if lower > upper {
            return Err(Error::model(format!(
                "inverted bounds [{lower}, {upper}] for variable"
            )));
        }
        if kind == VarKind::Binary && (lower < -0.0 || upper > 1.0) {
            return Err(Error::model(format!(
                "binary variable bounds [{lower}, {upper}] outside [0, 1]"
            )));
        }
        let idx = self.variables.len();
        self.variables.push(Variable {
            kind,
            lower,
            upper,
            name: name.into(),
        });
        self.objective.push(0.0);
        Ok(VarRef(idx))
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarRef> {
        self.add_variable(VarKind::Binary, 0.0, 1.0, name)
    }

    pub fn add_continuous(
        &mut self,
        lower: f64,
        upper: f64,
        name: impl Into<String>,
    ) -> Result<VarRef> {
        self.add_variable(VarKind::Continuous, lower, upper, name)
    }

    /// Appends a constraint, merging coefficients of repeated variables
    /// (first-occurrence order). Returns the constraint index.
    pub fn add_constraint(
        &mut self,
        terms: &[(VarRef, f64)],
        sense: Sense,
        rhs: f64,
        name: impl Into<String>,
    ) -> Result<usize> {
        if !rhs.is_finite() {
            return Err(Error::model("constraint rhs is not finite"));
        }
        let mut merged: Vec<(VarRef, f64)> = Vec::with_capacity(terms.len());
        for &(v, c) in terms {
            if v.0 >= self.variables.len() {
                return Err(Error::model(format!(
                    "constraint references variable {} out of range ({} declared)",
                    v.0,
                    self.variables.len()
                )));
            }
            if !c.is_finite() {
                return Err(Error::model(format!(
                    "non-finite coefficient {c} on variable {}",
                    self.variables[v.0].name
                )));
            }
            match merged.iter_mut().find(|(mv, _)| *mv == v) {
                Some((_, mc)) => *mc += c,
                None => merged.push((v, c)),
            }
        }
        let idx = self.constraints.len();
        self.constraints.push(LinearConstraint {
            terms: merged,
            sense,
            rhs,
            name: name.into(),
        });
        Ok(idx)
    }

    /// Adds `weight` to the objective coefficient of `v`.
    pub fn add_objective_term(&mut self, v: VarRef, weight: f64) -> Result<()> {
        if v.0 >= self.variables.len() {
            return Err(Error::model("objective references variable out of range"));
        }
        if !weight.is_finite() {
            return Err(Error::model("non-finite objective coefficient"));
        }
        self.objective[v.0] += weight;
        Ok(())
    }

    /// Contributes `weight * |x|` to the minimized objective.
    ///
    /// Creates an auxiliary `t >= 0` with `t >= x` and `t >= -x` and puts
    /// `weight * t` in the objective. At any optimum with positive weight
    /// the auxiliary settles at `|x|` exactly.
    pub fn add_abs_objective_term(&mut self, x: VarRef, weight: f64) -> Result<VarRef> {
        if !(weight > 0.0) {
            return Err(Error::model(format!(
                "absolute-value objective weight must be positive, got {weight}"
            )));
        }
        let name = format!("abs_{}", self.variables[x.0].name);
        let t = self.add_continuous(0.0, f64::INFINITY, name)?;
        // t >= x  <=>  x - t <= 0
        self.add_constraint(&[(x, 1.0), (t, -1.0)], Sense::Le, 0.0, "")?;
        // t >= -x <=>  -x - t <= 0
        self.add_constraint(&[(x, -1.0), (t, -1.0)], Sense::Le, 0.0, "")?;
        self.add_objective_term(t, weight)?;
        Ok(t)
    }

    /// Adds `terms . x <= rhs + bigM * (1 - guard)`: active when the binary
    /// guard is 1, vacuous (slack `bigM`) when it is 0.
    pub fn add_indicator_leq(
        &mut self,
        terms: &[(VarRef, f64)],
        rhs: f64,
        guard: VarRef,
        big_m: f64,
    ) -> Result<usize> {
        self.check_indicator(guard, big_m)?;
        let mut all = terms.to_vec();
        all.push((guard, big_m));
        self.add_constraint(&all, Sense::Le, rhs + big_m, "")
    }

    /// Adds `terms . x >= rhs - bigM * (1 - guard)`.
    pub fn add_indicator_geq(
        &mut self,
        terms: &[(VarRef, f64)],
        rhs: f64,
        guard: VarRef,
        big_m: f64,
    ) -> Result<usize> {
        self.check_indicator(guard, big_m)?;
        let mut all = terms.to_vec();
        all.push((guard, -big_m));
        self.add_constraint(&all, Sense::Ge, rhs - big_m, "")
    }

    fn check_indicator(&self, guard: VarRef, big_m: f64) -> Result<()> {
        if guard.0 >= self.variables.len() {
            return Err(Error::model("indicator guard out of range"));
        }
        if self.variables[guard.0].kind != VarKind::Binary {
            return Err(Error::model(format!(
                "indicator guard {} is not binary",
                self.variables[guard.0].name
            )));
        }
        if !(big_m > 0.0) || !big_m.is_finite() {
            return Err(Error::model(format!("big-M must be positive, got {big_m}")));
        }
        Ok(())
    }

    /// Objective value of an assignment (no feasibility checking).
    pub fn objective_value(&self, assignment: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(assignment)
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Serializes the model in CPLEX-LP text format.
    pub fn to_lp_string(&self) -> String {
        let names = self.sanitized_names();
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        let mut first = true;
        for (i, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                push_term(&mut out, c, &names[i], first);
                first = false;
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (ci, con) in self.constraints.iter().enumerate() {
            let _ = write!(out, " c{ci}:");
            let mut first = true;
            for &(v, c) in &con.terms {
                if c != 0.0 {
                    push_term(&mut out, c, &names[v.0], first);
                    first = false;
                }
            }
            if first {
                out.push_str(" 0");
            }
            let op = match con.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = write!(out, " {op} {}\n", fmt_num(con.rhs));
        }
        out.push_str("Bounds\n");
        for (i, v) in self.variables.iter().enumerate() {
            let lo = if v.lower == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                fmt_num(v.lower)
            };
            let hi = if v.upper == f64::INFINITY {
                "+inf".to_string()
            } else {
                fmt_num(v.upper)
            };
            let _ = write!(out, " {lo} <= {} <= {hi}\n", names[i]);
        }
        let binaries: Vec<&str> = self
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| names[i].as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binaries\n");
            for chunk in binaries.chunks(16) {
                out.push(' ');
                out.push_str(&chunk.join(" "));
                out.push('\n');
            }
        }
        out.push_str("End\n");
        out
    }

    /// Writes the model to `path` in CPLEX-LP format.
    pub fn export_lp(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_lp_string())?;
        Ok(())
    }

    /// Variable names restricted to `[A-Za-z0-9_]`, uniqued, never starting
    /// with a digit (LP format would read that as a number).
    fn sanitized_names(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::with_capacity(self.variables.len());
        for (i, v) in self.variables.iter().enumerate() {
            let mut s: String = v
                .name
                .chars()
                .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
                .collect();
            if s.is_empty() || s.as_bytes()[0].is_ascii_digit() {
                s = format!("x{i}_{s}");
            }
            if !seen.insert(s.clone()) {
                s = format!("{s}__{i}");
                seen.insert(s.clone());
            }
            out.push(s);
        }
        out
    }
}

fn push_term(out: &mut String, c: f64, name: &str, first: bool) {
    if first {
        if c < 0.0 {
            out.push_str(" -");
        }
    } else if c < 0.0 {
        out.push_str(" -");
    } else {
        out.push_str(" +");
    }
    let mag = c.abs();
    if mag == 1.0 {
        let _ = write!(out, " {name}");
    } else {
        let _ = write!(out, " {} {name}", fmt_num(mag));
    }
}

fn fmt_num(x: f64) -> String {
    // Shortest representation that round-trips through f64 parsing.
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_indices() {
        let mut m = MilpModel::new();
        let d1 = m.add_binary("d_1").unwrap();
        assert_eq!(d1, VarRef(0));
        let b1 = m
            .add_continuous(f64::NEG_INFINITY, f64::INFINITY, "b_1")
            .unwrap();
        assert_eq!(b1, VarRef(1));
        assert_eq!(m.num_vars(), 2);
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = MilpModel::new();
        assert!(m.add_continuous(2.0, 1.0, "bad").is_err());
    }

    #[test]
    fn duplicate_terms_merge() {
        let mut m = MilpModel::new();
        let v = m.add_continuous(0.0, 10.0, "v").unwrap();
        m.add_constraint(&[(v, 1.0), (v, 2.0)], Sense::Le, 3.0, "c")
            .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(v, 3.0)]);
    }

    #[test]
    fn empty_terms_allowed_nan_rejected() {
        let mut m = MilpModel::new();
        let v = m.add_continuous(0.0, 1.0, "v").unwrap();
        // 0 <= -1 is storable; the solver reports it infeasible later.
        assert!(m.add_constraint(&[], Sense::Le, -1.0, "c").is_ok());
        assert!(m
            .add_constraint(&[(v, f64::NAN)], Sense::Le, 0.0, "c")
            .is_err());
    }

    #[test]
    fn out_of_range_var_rejected() {
        let mut m = MilpModel::new();
        assert!(m
            .add_constraint(&[(VarRef(3), 1.0)], Sense::Ge, 0.0, "c")
            .is_err());
    }

    #[test]
    fn abs_term_rejects_nonpositive_weight() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(-5.0, 5.0, "x").unwrap();
        assert!(m.add_abs_objective_term(x, 0.0).is_err());
        assert!(m.add_abs_objective_term(x, -1.0).is_err());
        assert!(m.add_abs_objective_term(x, 2.0).is_ok());
    }

    #[test]
    fn indicator_guard_must_be_binary() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(0.0, 1.0, "x").unwrap();
        let g = m.add_binary("g").unwrap();
        assert!(m.add_indicator_leq(&[(x, 1.0)], 0.5, x, 10.0).is_err());
        assert!(m.add_indicator_leq(&[(x, 1.0)], 0.5, g, -1.0).is_err());
        assert!(m.add_indicator_leq(&[(x, 1.0)], 0.5, g, 10.0).is_ok());
    }

    #[test]
    fn lp_export_skeleton() {
        let mut m = MilpModel::new();
        let v = m.add_binary("v").unwrap();
        m.add_objective_term(v, 1.0).unwrap();
        let text = m.to_lp_string();
        assert!(text.contains("Minimize"));
        assert!(text.contains("Binaries"));
        assert!(text.contains(" 0 <= v <= 1"));
    }

    #[test]
    fn lp_export_constraint_line() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(0.0, 10.0, "x").unwrap();
        let y = m.add_continuous(0.0, 10.0, "y").unwrap();
        m.add_constraint(&[(x, 1.0), (y, 2.0)], Sense::Le, 3.0, "c")
            .unwrap();
        let text = m.to_lp_string();
        assert!(text.contains("c0: x + 2 y <= 3"), "got:\n{text}");
    }

    #[test]
    fn lp_export_free_bounds() {
        let mut m = MilpModel::new();
        m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, "b1")
            .unwrap();
        let text = m.to_lp_string();
        assert!(text.contains("-inf <= b1 <= +inf"), "got:\n{text}");
    }

    #[test]
    fn serialization_is_deterministic() {
        let build = || {
            let mut m = MilpModel::new();
            let x = m.add_continuous(0.0, 4.0, "x").unwrap();
            let y = m.add_binary("y").unwrap();
            m.add_constraint(&[(x, 1.0), (y, -2.0), (x, 0.5)], Sense::Ge, 1.0, "c")
                .unwrap();
            m.add_objective_term(x, 1.5).unwrap();
            m.to_lp_string()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn name_sanitization() {
        let mut m = MilpModel::new();
        m.add_continuous(0.0, 1.0, "z[3,7]").unwrap();
        m.add_continuous(0.0, 1.0, "2bad").unwrap();
        let text = m.to_lp_string();
        assert!(text.contains("z_3_7_"));
        assert!(!text.contains(" 2bad "));
    }
}
