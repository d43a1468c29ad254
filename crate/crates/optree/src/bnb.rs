//! Branch-and-bound MILP solver over the simplex engine.
//!
//! Node selection is best-bound with depth-first plunging until a first
//! incumbent exists; branching picks the most fractional binary with ties
//! to the lowest variable index. Child nodes warm-start from the parent's
//! basis. A rounding check and a fixing dive harvest incumbents early,
//! which matters because the tree formulations routinely hit their time
//! limit with open gaps.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense, WarmStart};
use crate::simplex::{BasisSnapshot, LpStatus, SimplexEngine};

/// Run a fixing dive every this many explored nodes (and at the root).
const DIVE_EVERY: u64 = 400;
/// Maximum LP solves inside one dive.
const DIVE_ROUNDS: usize = 64;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    /// Relative optimality gap at which the search stops.
    pub gap_tol: f64,
    /// Maximum distance from an integer for a binary to count as integral.
    pub int_tol: f64,
    pub warm_start: Option<WarmStart>,
    pub node_limit: Option<u64>,
    /// Reserved for tie-breaking; the default rules are already
    /// deterministic, so the seed currently has no effect.
    pub seed: u64,
    /// Progress log to stderr, one line per 100 nodes.
    pub verbose: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: 3600.0,
            gap_tol: 1e-6,
            int_tol: 1e-6,
            warm_start: None,
            node_limit: None,
            seed: 0,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// Proven optimal within the gap tolerance.
    Optimal,
    /// Feasible incumbent returned at a time or node limit.
    Feasible,
    Infeasible,
    /// The limit was hit before any feasible assignment was found.
    NoSolutionTimeout,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Best feasible assignment (absent for infeasible / no-solution).
    pub assignment: Option<Vec<f64>>,
    /// Objective of `assignment`; NaN when absent.
    pub objective: f64,
    /// Proven lower bound on the optimum (minimization).
    pub best_bound: f64,
    /// `(objective - best_bound) / max(|objective|, 1e-10)`, clamped at 0.
    pub gap: f64,
    pub nodes: u64,
    pub wall_time: f64,
}

/// Feasibility report for a candidate assignment.
#[derive(Debug, Clone, Copy)]
pub struct Feasibility {
    pub feasible: bool,
    /// Largest constraint or bound violation.
    pub max_violation: f64,
    /// Largest distance of a binary from {0, 1}.
    pub max_integrality: f64,
}

/// Checks an assignment against all constraints, variable bounds, and
/// binary integrality.
pub fn check_feasible(model: &MilpModel, assignment: &[f64]) -> Result<Feasibility> {
    if assignment.len() != model.num_vars() {
        return Err(Error::dimension(format!(
            "assignment has {} entries, model has {} variables",
            assignment.len(),
            model.num_vars()
        )));
    }
    let mut viol: f64 = 0.0;
    for con in model.constraints() {
        let lhs: f64 = con.terms.iter().map(|&(v, c)| c * assignment[v.0]).sum();
        let v = match con.sense {
            Sense::Le => lhs - con.rhs,
            Sense::Ge => con.rhs - lhs,
            Sense::Eq => (lhs - con.rhs).abs(),
        };
        viol = viol.max(v);
    }
    let mut integ: f64 = 0.0;
    for (j, var) in model.variables().iter().enumerate() {
        let x = assignment[j];
        if var.lower.is_finite() {
            viol = viol.max(var.lower - x);
        }
        if var.upper.is_finite() {
            viol = viol.max(x - var.upper);
        }
        if var.kind == crate::milp::VarKind::Binary {
            integ = integ.max((x - x.round()).abs());
        }
    }
    Ok(Feasibility {
        feasible: viol <= 1e-7 && integ <= 1e-6,
        max_violation: viol.max(0.0),
        max_integrality: integ,
    })
}

struct Node {
    fixings: Vec<(u32, bool)>,
    bound: f64,
    depth: u32,
    id: u64,
    basis: Option<Rc<BasisSnapshot>>,
}

/// Heap ordering: smallest bound first, then deepest, then oldest.
struct HeapNode(Node);

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert so the best node is "max".
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then_with(|| self.0.depth.cmp(&other.0.depth))
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    engine: SimplexEngine,
    binaries: Vec<usize>,
    config: &'a SolverConfig,
    start: Instant,
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: u64,
    next_id: u64,
}

/// Solves the MILP to the configured gap, returning the incumbent and
/// bound state at termination. Models whose LP relaxation is unbounded
/// are rejected as a solver breakdown.
pub fn solve(model: &MilpModel, config: &SolverConfig) -> Result<SolveOutcome> {
    if !(config.time_limit > 0.0) {
        return Err(Error::config("time limit must be positive"));
    }
    for (name, t) in [("gap", config.gap_tol), ("integrality", config.int_tol)] {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::config(format!("{name} tolerance must lie in (0, 1)")));
        }
    }
    let mut search = Search {
        model,
        engine: SimplexEngine::new(model)?,
        binaries: model.binary_vars().map(|v| v.0).collect(),
        config,
        start: Instant::now(),
        incumbent: None,
        nodes: 0,
        next_id: 1,
    };
    if let Some(ws) = &config.warm_start {
        if ws.assignment.len() == model.num_vars() {
            if let Ok(f) = check_feasible(model, &ws.assignment) {
                if f.feasible {
                    let obj = model.objective_value(&ws.assignment);
                    search.incumbent = Some((obj, ws.assignment.clone()));
                }
            }
        }
    }
    search.run()
}

impl<'a> Search<'a> {
    fn run(&mut self) -> Result<SolveOutcome> {
        let root = Node {
            fixings: Vec::new(),
            bound: f64::NEG_INFINITY,
            depth: 0,
            id: 0,
            basis: None,
        };
        let mut dfs: Vec<Node> = vec![root];
        let mut heap: BinaryHeap<HeapNode> = BinaryHeap::new();
        let mut hit_limit = false;

        loop {
            // Once an incumbent exists, switch to best-bound selection.
            if self.incumbent.is_some() && !dfs.is_empty() {
                for n in dfs.drain(..) {
                    heap.push(HeapNode(n));
                }
            }
            let node = if let Some(n) = dfs.pop() {
                n
            } else if let Some(HeapNode(n)) = heap.pop() {
                n
            } else {
                break;
            };

            if let Some((inc, _)) = &self.incumbent {
                if node.bound >= inc - prune_margin(*inc) {
                    continue; // cannot improve
                }
                // Heap pops the smallest bound, so this is the global gap.
                if node.bound.is_finite() && rel_gap(*inc, node.bound) <= self.config.gap_tol {
                    let bound = node.bound;
                    drop(node);
                    heap.clear();
                    return Ok(self.outcome(false, Some(bound)));
                }
            }
            if self.out_of_time() || self.node_limited() {
                hit_limit = true;
                heap.push(HeapNode(node));
                for n in dfs.drain(..) {
                    heap.push(HeapNode(n));
                }
                break;
            }

            self.nodes += 1;
            self.log_progress(&heap);

            let lp = self.solve_node(&node.fixings, node.basis.as_deref())?;
            let (lp_obj, primal, basis) = match lp {
                NodeLp::Infeasible => continue,
                NodeLp::Solved {
                    objective,
                    primal,
                    basis,
                } => (objective, primal, basis),
            };
            if let Some((inc, _)) = &self.incumbent {
                if lp_obj >= inc - prune_margin(*inc) {
                    continue;
                }
            }

            let frac = self.most_fractional(&primal);
            match frac {
                None => {
                    let cleaned = self.clean_assignment(primal);
                    self.offer_incumbent(cleaned);
                }
                Some((branch_var, _)) => {
                    self.rounding_repair(&primal);
                    if self.nodes == 1 || self.nodes % DIVE_EVERY == 0 {
                        self.dive(&node.fixings, basis.clone())?;
                    }
                    let shared = Rc::new(basis);
                    let prefer_one = primal[branch_var] >= 0.5;
                    let mut children = Vec::with_capacity(2);
                    for &value in &[!prefer_one, prefer_one] {
                        let mut fixings = node.fixings.clone();
                        fixings.push((branch_var as u32, value));
                        children.push(Node {
                            fixings,
                            bound: lp_obj,
                            depth: node.depth + 1,
                            id: self.next_id,
                            basis: Some(shared.clone()),
                        });
                        self.next_id += 1;
                    }
                    if self.incumbent.is_none() {
                        // LIFO: the preferred child was pushed last.
                        dfs.extend(children);
                    } else {
                        for c in children {
                            heap.push(HeapNode(c));
                        }
                    }
                }
            }
        }

        let remaining = heap
            .iter()
            .map(|HeapNode(n)| n.bound)
            .fold(f64::INFINITY, f64::min);
        Ok(self.outcome(hit_limit, if hit_limit { Some(remaining) } else { None }))
    }

    fn outcome(&self, hit_limit: bool, open_bound: Option<f64>) -> SolveOutcome {
        let wall_time = self.start.elapsed().as_secs_f64();
        match (&self.incumbent, open_bound) {
            (Some((obj, x)), open) => {
                let mut bound = match open {
                    Some(b) if hit_limit => b,
                    Some(b) => b,
                    None => *obj,
                };
                if !bound.is_finite() {
                    bound = if hit_limit { f64::NEG_INFINITY } else { *obj };
                }
                bound = bound.min(*obj);
                let gap = rel_gap(*obj, bound);
                let status = if gap <= self.config.gap_tol {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::Feasible
                };
                SolveOutcome {
                    status,
                    assignment: Some(x.clone()),
                    objective: *obj,
                    best_bound: bound,
                    gap,
                    nodes: self.nodes,
                    wall_time,
                }
            }
            (None, _) => SolveOutcome {
                status: if hit_limit {
                    SolveStatus::NoSolutionTimeout
                } else {
                    SolveStatus::Infeasible
                },
                assignment: None,
                objective: f64::NAN,
                best_bound: open_bound.unwrap_or(f64::INFINITY),
                gap: f64::NAN,
                nodes: self.nodes,
                wall_time,
            },
        }
    }

    fn out_of_time(&self) -> bool {
        self.start.elapsed().as_secs_f64() >= self.config.time_limit
    }

    fn node_limited(&self) -> bool {
        self.config
            .node_limit
            .is_some_and(|limit| self.nodes >= limit)
    }

    fn log_progress(&self, heap: &BinaryHeap<HeapNode>) {
        if self.config.verbose && self.nodes % 100 == 0 {
            let inc = self
                .incumbent
                .as_ref()
                .map_or(f64::NAN, |(obj, _)| *obj);
            let bound = heap
                .iter()
                .map(|HeapNode(n)| n.bound)
                .fold(f64::INFINITY, f64::min);
            eprintln!(
                "[bnb] nodes={} incumbent={:.6} bound={:.6} gap={:.4} elapsed={:.1}s",
                self.nodes,
                inc,
                bound,
                rel_gap(inc, bound),
                self.start.elapsed().as_secs_f64()
            );
        }
    }

    fn solve_node(
        &mut self,
        fixings: &[(u32, bool)],
        basis: Option<&BasisSnapshot>,
    ) -> Result<NodeLp> {
        self.engine.reset_bounds();
        for &(v, val) in fixings {
            let b = if val { 1.0 } else { 0.0 };
            self.engine.set_bounds(v as usize, b, b);
        }
        let sol = self.engine.solve(basis)?;
        match sol.status {
            LpStatus::Infeasible => Ok(NodeLp::Infeasible),
            LpStatus::Unbounded => Err(Error::SolverBreakdown(
                "LP relaxation is unbounded; bound the model variables".into(),
            )),
            LpStatus::Optimal => Ok(NodeLp::Solved {
                objective: sol.objective,
                primal: sol.primal,
                basis: sol.basis.expect("optimal solve returns a basis"),
            }),
        }
    }

    /// Most fractional binary, ties to the lowest index.
    fn most_fractional(&self, primal: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let dist = (primal[j] - primal[j].round()).abs();
            if dist > self.config.int_tol {
                match best {
                    Some((_, d)) if d >= dist => {}
                    _ => best = Some((j, dist)),
                }
            }
        }
        best
    }

    /// Snaps near-integral binaries to exact {0, 1} values.
    fn clean_assignment(&self, mut primal: Vec<f64>) -> Vec<f64> {
        for &j in &self.binaries {
            primal[j] = primal[j].round();
        }
        primal
    }

    fn offer_incumbent(&mut self, assignment: Vec<f64>) {
        let obj = self.model.objective_value(&assignment);
        let better = match &self.incumbent {
            Some((cur, _)) => obj < cur - 1e-12,
            None => true,
        };
        if better {
            self.incumbent = Some((obj, assignment));
        }
    }

    /// Rounds every binary in the LP solution and keeps the result if it
    /// happens to be feasible as-is.
    fn rounding_repair(&mut self, primal: &[f64]) {
        let candidate = self.clean_assignment(primal.to_vec());
        if let Ok(f) = check_feasible(self.model, &candidate) {
            if f.feasible {
                self.offer_incumbent(candidate);
            }
        }
    }

    /// Fixing dive: repeatedly fix near-integral binaries at their rounded
    /// values (always at least one) and re-solve, hoping to land on an
    /// integral feasible point.
    fn dive(&mut self, base: &[(u32, bool)], basis: BasisSnapshot) -> Result<()> {
        let mut fixings = base.to_vec();
        let mut fixed = vec![false; self.model.num_vars()];
        for &(v, _) in base {
            fixed[v as usize] = true;
        }
        let mut snap = basis;
        for _ in 0..DIVE_ROUNDS {
            if self.out_of_time() {
                return Ok(());
            }
            let lp = self.solve_node(&fixings, Some(&snap))?;
            let (primal, new_snap) = match lp {
                NodeLp::Infeasible => return Ok(()),
                NodeLp::Solved { primal, basis, .. } => (primal, basis),
            };
            snap = new_snap;
            if self.most_fractional(&primal).is_none() {
                let cleaned = self.clean_assignment(primal);
                self.offer_incumbent(cleaned);
                return Ok(());
            }
            let mut progressed = false;
            let mut closest: Option<(usize, f64)> = None;
            for &j in &self.binaries {
                if fixed[j] {
                    continue;
                }
                let dist = (primal[j] - primal[j].round()).abs();
                if dist <= 0.1 {
                    fixings.push((j as u32, primal[j].round() >= 1.0));
                    fixed[j] = true;
                    progressed = true;
                } else {
                    match closest {
                        Some((_, d)) if d <= dist => {}
                        _ => closest = Some((j, dist)),
                    }
                }
            }
            if !progressed {
                match closest {
                    Some((j, _)) => {
                        fixings.push((j as u32, primal[j].round() >= 1.0));
                        fixed[j] = true;
                    }
                    None => return Ok(()),
                }
            }
        }
        Ok(())
    }
}

enum NodeLp {
    Infeasible,
    Solved {
        objective: f64,
        primal: Vec<f64>,
        basis: BasisSnapshot,
    },
}

fn prune_margin(incumbent: f64) -> f64 {
    1e-9 * incumbent.abs().max(1.0)
}

fn rel_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() || !bound.is_finite() {
        return f64::INFINITY;
    }
    ((incumbent - bound) / incumbent.abs().max(1e-10)).max(0.0)
}
