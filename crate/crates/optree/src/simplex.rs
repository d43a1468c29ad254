//! Bounded-variable primal simplex for the LP relaxation of a
//! [`MilpModel`].
//!
//! Constraints become equalities with one bounded slack per row; a cold
//! solve starts from an all-artificial basis and minimizes the
//! infeasibility sum (phase 1), then the true objective (phase 2). Warm
//! solves restart from a caller-supplied basis after bound changes,
//! repairing primal feasibility with a composite phase 1 before
//! reoptimizing; any trouble on the warm path falls back to a cold solve.
//! Dantzig pricing with a switch to Bland's rule after a run of
//! degenerate pivots keeps the iteration cycle-free.

use crate::error::{Error, Result};
use crate::lu::Lu;
use crate::milp::{MilpModel, Sense, VarRef};

/// Dual feasibility (reduced cost) tolerance.
const DUAL_TOL: f64 = 1e-9;
/// Primal bound tolerance.
const PRIMAL_TOL: f64 = 1e-9;
/// Smallest pivot element admitted in the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Phase-1 infeasibility level accepted as feasible.
const FEAS_TOL: f64 = 1e-7;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: u32 = 1000;
/// Basis refactorization cadence (pivots).
const REFACTOR_EVERY: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of an LP relaxation solve. `primal` and `objective` are only
/// meaningful when the status is optimal.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
}

/// Solves the LP relaxation of `model` (integrality dropped), with
/// per-variable bound overrides replacing the declared bounds.
pub fn solve_lp(model: &MilpModel, overrides: &[(VarRef, f64, f64)]) -> Result<LpSolution> {
    let mut engine = SimplexEngine::new(model)?;
    engine.reset_bounds();
    for &(v, lo, hi) in overrides {
        engine.set_bounds(v.0, lo, hi);
    }
    let out = engine.solve(None)?;
    Ok(LpSolution {
        status: out.status,
        primal: out.primal,
        objective: out.objective,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum VStat {
    Basic,
    Lower,
    Upper,
    Free,
}

/// Basis and nonbasic statuses, sufficient to warm-restart a solve.
#[derive(Debug, Clone)]
pub(crate) struct BasisSnapshot {
    basic: Vec<usize>,
    vstat: Vec<VStat>,
}

pub(crate) struct EngineSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub basis: Option<BasisSnapshot>,
}

/// Reusable solver instance: the constraint matrix is built once per
/// model; bounds can be tightened per solve (branch-and-bound fixings).
pub(crate) struct SimplexEngine {
    nrows: usize,
    nstruct: usize,
    ncols: usize,
    cols: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    base_lo: Vec<f64>,
    base_hi: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Work {
    basic: Vec<usize>,
    pos: Vec<isize>,
    vstat: Vec<VStat>,
    x: Vec<f64>,
    lu: Lu,
    etas: Vec<(usize, Vec<f64>)>,
    bland: bool,
    degen: u32,
    pivots: usize,
}

enum LoopEnd {
    Optimal,
    Unbounded,
}

enum Step {
    Moved { degenerate: bool },
    Unbounded,
}

impl SimplexEngine {
    pub fn new(model: &MilpModel) -> Result<Self> {
        let nstruct = model.num_vars();
        let nrows = model.num_constraints();
        let ncols = nstruct + 2 * nrows;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        let mut rhs = vec![0.0; nrows];
        let mut base_lo = vec![0.0; ncols];
        let mut base_hi = vec![0.0; ncols];
        for (j, v) in model.variables().iter().enumerate() {
            base_lo[j] = v.lower;
            base_hi[j] = v.upper;
        }
        for (i, con) in model.constraints().iter().enumerate() {
            for &(v, c) in &con.terms {
                if c != 0.0 {
                    cols[v.0].push((i, c));
                }
            }
            rhs[i] = con.rhs;
            let s = nstruct + i;
            cols[s].push((i, 1.0));
            match con.sense {
                Sense::Le => {
                    base_lo[s] = 0.0;
                    base_hi[s] = f64::INFINITY;
                }
                Sense::Ge => {
                    base_lo[s] = f64::NEG_INFINITY;
                    base_hi[s] = 0.0;
                }
                Sense::Eq => {
                    base_lo[s] = 0.0;
                    base_hi[s] = 0.0;
                }
            }
            // Artificial column, fixed at zero outside cold phase 1.
            let a = nstruct + nrows + i;
            cols[a].push((i, 1.0));
            base_lo[a] = 0.0;
            base_hi[a] = 0.0;
        }
        let mut cost = vec![0.0; ncols];
        cost[..nstruct].copy_from_slice(model.objective());
        let lo = base_lo.clone();
        let hi = base_hi.clone();
        Ok(SimplexEngine {
            nrows,
            nstruct,
            ncols,
            cols,
            rhs,
            cost,
            base_lo,
            base_hi,
            lo,
            hi,
        })
    }

    pub fn reset_bounds(&mut self) {
        self.lo.copy_from_slice(&self.base_lo);
        self.hi.copy_from_slice(&self.base_hi);
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lo[var] = lo;
        self.hi[var] = hi;
    }

    /// Solves with the current bounds, warm-starting from `basis` when
    /// given. Falls back to a cold start if the warm path stalls.
    pub fn solve(&mut self, basis: Option<&BasisSnapshot>) -> Result<EngineSolution> {
        for j in 0..self.ncols {
            if self.lo[j] > self.hi[j] {
                return Ok(EngineSolution {
                    status: LpStatus::Infeasible,
                    primal: Vec::new(),
                    objective: f64::NAN,
                    basis: None,
                });
            }
        }
        if let Some(snap) = basis {
            if let Ok(Some(sol)) = self.try_warm(snap) {
                return Ok(sol);
            }
        }
        self.solve_cold()
    }

    fn try_warm(&mut self, snap: &BasisSnapshot) -> Result<Option<EngineSolution>> {
        if snap.basic.len() != self.nrows || snap.vstat.len() != self.ncols {
            return Ok(None);
        }
        let mut w = match self.init_from_snapshot(snap) {
            Some(w) => w,
            None => return Ok(None),
        };
        match self.composite_phase1(&mut w) {
            Ok(true) => {}
            Ok(false) => {
                return Ok(Some(EngineSolution {
                    status: LpStatus::Infeasible,
                    primal: Vec::new(),
                    objective: f64::NAN,
                    basis: None,
                }))
            }
            Err(_) => return Ok(None),
        }
        let cost = self.cost.clone();
        match self.primal_loop(&mut w, &cost) {
            Ok(LoopEnd::Optimal) => {
                if self.refine(&mut w).is_err() {
                    return Ok(None);
                }
                Ok(Some(self.extract(&w, LpStatus::Optimal)))
            }
            Ok(LoopEnd::Unbounded) => Ok(Some(EngineSolution {
                status: LpStatus::Unbounded,
                primal: Vec::new(),
                objective: f64::NAN,
                basis: None,
            })),
            Err(_) => Ok(None),
        }
    }

    fn solve_cold(&mut self) -> Result<EngineSolution> {
        let mut w = self.init_cold()?;

        // Phase 1: minimize the artificial infeasibility sum.
        let mut phase1 = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let a = self.nstruct + self.nrows + i;
            phase1[a] = if self.lo[a] == 0.0 { 1.0 } else { -1.0 };
        }
        match self.primal_loop(&mut w, &phase1)? {
            LoopEnd::Optimal => {}
            LoopEnd::Unbounded => {
                return Err(Error::SolverBreakdown(
                    "phase-1 objective unbounded".into(),
                ))
            }
        }
        let infeas: f64 = (0..self.nrows)
            .map(|i| w.x[self.nstruct + self.nrows + i].abs())
            .sum();
        if infeas > FEAS_TOL {
            return Ok(EngineSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                objective: f64::NAN,
                basis: None,
            });
        }
        self.evict_artificials(&mut w)?;
        for i in 0..self.nrows {
            let a = self.nstruct + self.nrows + i;
            self.lo[a] = 0.0;
            self.hi[a] = 0.0;
        }

        let cost = self.cost.clone();
        match self.primal_loop(&mut w, &cost)? {
            LoopEnd::Optimal => {
                self.refine(&mut w)?;
                Ok(self.extract(&w, LpStatus::Optimal))
            }
            LoopEnd::Unbounded => Ok(EngineSolution {
                status: LpStatus::Unbounded,
                primal: Vec::new(),
                objective: f64::NAN,
                basis: None,
            }),
        }
    }

    fn nonbasic_value(&self, j: usize, stat: VStat) -> f64 {
        match stat {
            VStat::Lower => self.lo[j],
            VStat::Upper => self.hi[j],
            VStat::Free => 0.0,
            VStat::Basic => unreachable!("nonbasic value of basic variable"),
        }
    }

    fn init_cold(&mut self) -> Result<Work> {
        let mut vstat = vec![VStat::Free; self.ncols];
        let mut x = vec![0.0; self.ncols];
        for j in 0..self.nstruct + self.nrows {
            if self.lo[j].is_finite() {
                vstat[j] = VStat::Lower;
            } else if self.hi[j].is_finite() {
                vstat[j] = VStat::Upper;
            } else {
                vstat[j] = VStat::Free;
            }
            x[j] = self.nonbasic_value(j, vstat[j]);
        }
        // Row residuals determine the artificial signs and values.
        let mut resid = self.rhs.clone();
        for j in 0..self.nstruct + self.nrows {
            if x[j] != 0.0 {
                for &(i, c) in &self.cols[j] {
                    resid[i] -= c * x[j];
                }
            }
        }
        let mut basic = Vec::with_capacity(self.nrows);
        let mut pos = vec![-1isize; self.ncols];
        for i in 0..self.nrows {
            let a = self.nstruct + self.nrows + i;
            if resid[i] >= 0.0 {
                self.lo[a] = 0.0;
                self.hi[a] = f64::INFINITY;
            } else {
                self.lo[a] = f64::NEG_INFINITY;
                self.hi[a] = 0.0;
            }
            vstat[a] = VStat::Basic;
            x[a] = resid[i];
            pos[a] = i as isize;
            basic.push(a);
        }
        let lu = self.factorize(&basic)?;
        Ok(Work {
            basic,
            pos,
            vstat,
            x,
            lu,
            etas: Vec::new(),
            bland: false,
            degen: 0,
            pivots: 0,
        })
    }

    fn init_from_snapshot(&mut self, snap: &BasisSnapshot) -> Option<Work> {
        let mut vstat = snap.vstat.clone();
        let mut pos = vec![-1isize; self.ncols];
        for (r, &j) in snap.basic.iter().enumerate() {
            if j >= self.ncols || vstat[j] != VStat::Basic {
                return None;
            }
            pos[j] = r as isize;
        }
        let mut x = vec![0.0; self.ncols];
        for j in 0..self.ncols {
            if vstat[j] == VStat::Basic {
                continue;
            }
            // Bound changes since the snapshot may have removed the bound a
            // status refers to; remap to something consistent.
            match vstat[j] {
                VStat::Lower if !self.lo[j].is_finite() => {
                    vstat[j] = if self.hi[j].is_finite() {
                        VStat::Upper
                    } else {
                        VStat::Free
                    };
                }
                VStat::Upper if !self.hi[j].is_finite() => {
                    vstat[j] = if self.lo[j].is_finite() {
                        VStat::Lower
                    } else {
                        VStat::Free
                    };
                }
                _ => {}
            }
            x[j] = self.nonbasic_value(j, vstat[j]);
        }
        let lu = self.factorize(&snap.basic).ok()?;
        let mut w = Work {
            basic: snap.basic.clone(),
            pos,
            vstat,
            x,
            lu,
            etas: Vec::new(),
            bland: false,
            degen: 0,
            pivots: 0,
        };
        self.compute_basics(&mut w);
        Some(w)
    }

    /// Repairs primal feasibility from the current basis by minimizing the
    /// sum of bound violations of basic variables. Returns false when the
    /// LP is infeasible.
    fn composite_phase1(&mut self, w: &mut Work) -> Result<bool> {
        let mut c1 = vec![0.0; self.ncols];
        let limit = 5000 + 10 * (self.nrows + self.ncols);
        let mut iters = 0usize;
        loop {
            let mut any = false;
            for v in c1.iter_mut() {
                *v = 0.0;
            }
            for &j in &w.basic {
                if w.x[j] < self.lo[j] - PRIMAL_TOL {
                    c1[j] = -1.0;
                    any = true;
                } else if w.x[j] > self.hi[j] + PRIMAL_TOL {
                    c1[j] = 1.0;
                    any = true;
                }
            }
            if !any {
                return Ok(true);
            }
            iters += 1;
            if iters > limit {
                return Err(Error::SolverBreakdown("composite phase 1 stalled".into()));
            }
            let entering = self.price(w, &c1);
            let (enter, dir) = match entering {
                Some(e) => e,
                // No descent direction for the (convex) violation sum:
                // the minimum is positive, hence the LP is infeasible.
                None => return Ok(false),
            };
            match self.ratio_and_step(w, enter, dir, true)? {
                Step::Moved { degenerate } => self.track_degeneracy(w, degenerate),
                Step::Unbounded => {
                    return Err(Error::SolverBreakdown(
                        "unbounded direction in composite phase 1".into(),
                    ))
                }
            }
        }
    }

    fn primal_loop(&mut self, w: &mut Work, costs: &[f64]) -> Result<LoopEnd> {
        let limit = 20_000 + 40 * (self.nrows + self.ncols);
        let mut iters = 0usize;
        loop {
            iters += 1;
            if iters > limit {
                return Err(Error::SolverBreakdown(format!(
                    "simplex iteration limit {limit} exceeded"
                )));
            }
            let entering = self.price(w, costs);
            let (enter, dir) = match entering {
                Some(e) => e,
                None => return Ok(LoopEnd::Optimal),
            };
            match self.ratio_and_step(w, enter, dir, false)? {
                Step::Moved { degenerate } => self.track_degeneracy(w, degenerate),
                Step::Unbounded => return Ok(LoopEnd::Unbounded),
            }
        }
    }

    fn track_degeneracy(&self, w: &mut Work, degenerate: bool) {
        if degenerate {
            w.degen += 1;
            if w.degen >= BLAND_TRIGGER {
                w.bland = true;
            }
        } else {
            w.degen = 0;
            w.bland = false;
        }
    }

    /// Entering-variable selection. Returns the column and the movement
    /// direction (+1 increases, -1 decreases).
    fn price(&self, w: &Work, costs: &[f64]) -> Option<(usize, f64)> {
        let mut y = vec![0.0; self.nrows];
        for (r, &j) in w.basic.iter().enumerate() {
            y[r] = costs[j];
        }
        self.btran(w, &mut y);
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if w.vstat[j] == VStat::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let mut d = costs[j];
            for &(i, c) in &self.cols[j] {
                d -= y[i] * c;
            }
            let dir = match w.vstat[j] {
                VStat::Lower => {
                    if d < -DUAL_TOL {
                        1.0
                    } else {
                        continue;
                    }
                }
                VStat::Upper => {
                    if d > DUAL_TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
                VStat::Free => {
                    if d < -DUAL_TOL {
                        1.0
                    } else if d > DUAL_TOL {
                        -1.0
                    } else {
                        continue;
                    }
                }
                VStat::Basic => unreachable!(),
            };
            if w.bland {
                // Bland: smallest eligible index.
                return Some((j, dir));
            }
            let score = d.abs();
            match best {
                Some((_, _, s)) if s >= score => {}
                _ => best = Some((j, dir, score)),
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Working ratio-test bounds for basic variable `j`: a variable outside
    /// its true bounds (composite phase 1) is driven toward the violated
    /// bound and may not overshoot it.
    fn working_bounds(&self, w: &Work, j: usize, composite: bool) -> (f64, f64) {
        if composite {
            if w.x[j] < self.lo[j] - PRIMAL_TOL {
                return (f64::NEG_INFINITY, self.lo[j]);
            }
            if w.x[j] > self.hi[j] + PRIMAL_TOL {
                return (self.hi[j], f64::INFINITY);
            }
        }
        (self.lo[j], self.hi[j])
    }

    fn ratio_and_step(
        &mut self,
        w: &mut Work,
        enter: usize,
        dir: f64,
        composite: bool,
    ) -> Result<Step> {
        // Direction of basic variables: x_B -= dir * delta * col_dir.
        let mut col_dir = vec![0.0; self.nrows];
        for &(i, c) in &self.cols[enter] {
            col_dir[i] = c;
        }
        self.ftran(w, &mut col_dir);

        // The entering variable may move to its own opposite bound.
        let span = self.hi[enter] - self.lo[enter];
        let mut best_delta = if span.is_finite() { span } else { f64::INFINITY };
        let mut leaving: Option<(usize, f64, f64)> = None; // (row, |pivot|, bound hit)
        for r in 0..self.nrows {
            let wr = col_dir[r];
            if wr.abs() <= PIVOT_TOL {
                continue;
            }
            let j = w.basic[r];
            let (wlo, whi) = self.working_bounds(w, j, composite);
            let slope = dir * wr; // positive: basic value decreases
            let (delta, bound) = if slope > 0.0 {
                if !wlo.is_finite() {
                    continue;
                }
                (((w.x[j] - wlo) / slope).max(0.0), wlo)
            } else {
                if !whi.is_finite() {
                    continue;
                }
                (((whi - w.x[j]) / -slope).max(0.0), whi)
            };
            let replace = match leaving {
                None => delta < best_delta - 1e-12,
                Some((lr, lw, _)) => {
                    if delta < best_delta - 1e-12 {
                        true
                    } else if delta <= best_delta + 1e-12 {
                        if w.bland {
                            // Bland: smallest variable index leaves.
                            w.basic[r] < w.basic[lr]
                        } else {
                            // Stability: biggest pivot magnitude.
                            wr.abs() > lw
                        }
                    } else {
                        false
                    }
                }
            };
            if replace {
                best_delta = best_delta.min(delta);
                leaving = Some((r, wr.abs(), bound));
            } else if leaving.is_none() && delta <= best_delta {
                // Bound flip still governs; keep best_delta in sync.
                best_delta = best_delta.min(delta);
            }
        }

        if best_delta.is_infinite() {
            return Ok(Step::Unbounded);
        }
        let delta = best_delta.max(0.0);
        let degenerate = delta <= 1e-12;

        // Move the entering variable and update basic values.
        let enter_from = w.x[enter];
        if delta != 0.0 {
            for r in 0..self.nrows {
                if col_dir[r] != 0.0 {
                    let j = w.basic[r];
                    w.x[j] -= dir * delta * col_dir[r];
                }
            }
        }
        match leaving {
            None => {
                // Bound flip: entering travels its whole span.
                w.x[enter] = enter_from + dir * delta;
                w.vstat[enter] = match w.vstat[enter] {
                    VStat::Lower => VStat::Upper,
                    VStat::Upper => VStat::Lower,
                    other => other,
                };
                // Snap to the exact bound.
                w.x[enter] = self.nonbasic_value(enter, w.vstat[enter]);
                Ok(Step::Moved { degenerate })
            }
            Some((r, _, bound_hit)) => {
                let out = w.basic[r];
                w.x[out] = bound_hit;
                w.vstat[out] = if (bound_hit - self.lo[out]).abs() <= (bound_hit - self.hi[out]).abs()
                {
                    VStat::Lower
                } else {
                    VStat::Upper
                };
                w.x[enter] = enter_from + dir * delta;
                w.vstat[enter] = VStat::Basic;
                w.basic[r] = enter;
                w.pos[out] = -1;
                w.pos[enter] = r as isize;
                w.etas.push((r, col_dir));
                w.pivots += 1;
                if w.etas.len() >= REFACTOR_EVERY {
                    self.refactor(w)?;
                }
                Ok(Step::Moved { degenerate })
            }
        }
    }

    fn factorize(&self, basic: &[usize]) -> Result<Lu> {
        let n = self.nrows;
        let mut mat = vec![0.0; n * n];
        for (c, &j) in basic.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                mat[i * n + c] = v;
            }
        }
        Lu::factorize(n, mat).map_err(|_| Error::SolverBreakdown("singular basis".into()))
    }

    fn refactor(&self, w: &mut Work) -> Result<()> {
        w.lu = self.factorize(&w.basic)?;
        w.etas.clear();
        self.compute_basics(w);
        Ok(())
    }

    /// Recomputes basic values from nonbasic ones: x_B = B^-1 (b - N x_N).
    fn compute_basics(&self, w: &mut Work) {
        let mut resid = self.rhs.clone();
        for j in 0..self.ncols {
            if w.vstat[j] != VStat::Basic && w.x[j] != 0.0 {
                for &(i, c) in &self.cols[j] {
                    resid[i] -= c * w.x[j];
                }
            }
        }
        self.ftran(w, &mut resid);
        for (r, &j) in w.basic.iter().enumerate() {
            w.x[j] = resid[r];
        }
    }

    fn ftran(&self, w: &Work, v: &mut Vec<f64>) {
        w.lu.solve(v);
        for (r, eta) in &w.etas {
            let vr = v[*r] / eta[*r];
            for i in 0..v.len() {
                if i == *r {
                    continue;
                }
                if eta[i] != 0.0 {
                    v[i] -= eta[i] * vr;
                }
            }
            v[*r] = vr;
        }
    }

    fn btran(&self, w: &Work, v: &mut Vec<f64>) {
        for (r, eta) in w.etas.iter().rev() {
            let mut s = v[*r];
            for i in 0..v.len() {
                if i != *r && eta[i] != 0.0 {
                    s -= eta[i] * v[i];
                }
            }
            v[*r] = s / eta[*r];
        }
        w.lu.solve_t(v);
    }

    /// Pivots zero-valued artificials out of the phase-1 basis where a
    /// replacement column exists; rows admitting none are redundant and
    /// keep their (fixed) artificial.
    fn evict_artificials(&mut self, w: &mut Work) -> Result<()> {
        let art_start = self.nstruct + self.nrows;
        for r in 0..self.nrows {
            let j = w.basic[r];
            if j < art_start {
                continue;
            }
            let mut e_r = vec![0.0; self.nrows];
            e_r[r] = 1.0;
            self.btran(w, &mut e_r);
            let mut found = None;
            for cand in 0..art_start {
                if w.vstat[cand] == VStat::Basic || self.lo[cand] == self.hi[cand] {
                    continue;
                }
                let alpha: f64 = self.cols[cand].iter().map(|&(i, c)| e_r[i] * c).sum();
                if alpha.abs() > 1e-7 {
                    found = Some(cand);
                    break;
                }
            }
            if let Some(cand) = found {
                let mut col_dir = vec![0.0; self.nrows];
                for &(i, c) in &self.cols[cand] {
                    col_dir[i] = c;
                }
                self.ftran(w, &mut col_dir);
                let out = w.basic[r];
                w.vstat[out] = VStat::Lower;
                w.x[out] = 0.0;
                w.x[cand] = self.nonbasic_value(cand, w.vstat[cand]);
                w.vstat[cand] = VStat::Basic;
                w.basic[r] = cand;
                w.pos[out] = -1;
                w.pos[cand] = r as isize;
                w.etas.push((r, col_dir));
                if w.etas.len() >= REFACTOR_EVERY {
                    self.refactor(w)?;
                }
                // The departing artificial was at zero: re-derive the new
                // basic value for the incoming column.
                self.compute_basics(w);
            }
        }
        Ok(())
    }

    /// Final clean-up: refactor, recompute and verify primal feasibility.
    fn refine(&mut self, w: &mut Work) -> Result<()> {
        self.refactor(w)?;
        for &j in &w.basic {
            if w.x[j] < self.lo[j] - 1e-7 || w.x[j] > self.hi[j] + 1e-7 {
                return Err(Error::SolverBreakdown(format!(
                    "basic variable {j} outside bounds after clean-up"
                )));
            }
            // Snap tiny bound violations from accumulated roundoff.
            if w.x[j] < self.lo[j] {
                w.x[j] = self.lo[j];
            } else if w.x[j] > self.hi[j] {
                w.x[j] = self.hi[j];
            }
        }
        Ok(())
    }

    fn extract(&self, w: &Work, status: LpStatus) -> EngineSolution {
        let primal: Vec<f64> = w.x[..self.nstruct].to_vec();
        let objective = primal
            .iter()
            .zip(&self.cost[..self.nstruct])
            .map(|(x, c)| x * c)
            .sum();
        EngineSolution {
            status,
            primal,
            objective,
            basis: Some(BasisSnapshot {
                basic: w.basic.clone(),
                vstat: w.vstat.clone(),
            }),
        }
    }
}
