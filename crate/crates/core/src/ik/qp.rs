//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//!     minimize     ½ xᵀ H x + gᵀ x
//!     subject to   G x ≤ h
//!                  A x = b
//! ```
//!
//! with a dual active-set method in the Goldfarb–Idnani family: start at
//! the unconstrained minimizer, then repeatedly pick the most violated
//! inequality and move along the dual path until it becomes active,
//! dropping constraints whose multipliers hit zero on the way. Every
//! iterate is dual feasible, so no phase-1 feasible point is needed and
//! infeasibility falls out as an unbounded dual ray.
//!
//! Each step solves the KKT system of the current working set directly.
//! The problems here are small (tens of variables and constraints), so
//! the factorization cost is negligible next to the clarity it buys.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Primal feasibility tolerance on unit-normalized rows.
const FEAS_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub g_ineq: DMatrix<f64>,
    pub h_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpProblem {
    /// An unconstrained problem.
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            g_ineq: DMatrix::zeros(0, n),
            h_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, g_ineq: DMatrix<f64>, h_ineq: DVector<f64>) -> Self {
        self.g_ineq = g_ineq;
        self.h_ineq = h_ineq;
        self
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.h_ineq.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn check_dimensions(&self) -> Result<(), String> {
        let n = self.n();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(format!("H is {}x{}, expected {n}x{n}", self.h.nrows(), self.h.ncols()));
        }
        if self.g_ineq.ncols() != n || self.g_ineq.nrows() != self.h_ineq.len() {
            return Err("inequality block has inconsistent dimensions".into());
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err("equality block has inconsistent dimensions".into());
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

/// First-order optimality residuals, all in ∞-norm.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }

    pub fn evaluate(p: &QpProblem, x: &DVector<f64>, mu: &DVector<f64>, nu: &DVector<f64>) -> Self {
        let grad = &p.h * x + &p.g + p.g_ineq.transpose() * mu + p.a_eq.transpose() * nu;
        let slack = &p.g_ineq * x - &p.h_ineq;
        let eq = &p.a_eq * x - &p.b_eq;
        let primal = slack.iter().fold(0.0f64, |m, s| m.max(*s)).max(eq.amax());
        let dual = mu.iter().fold(0.0f64, |m, u| m.max(-*u));
        let complementarity = mu.iter().zip(slack.iter()).fold(0.0f64, |m, (u, s)| m.max((u * s).abs()));
        Self { stationarity: grad.amax(), primal, dual, complementarity }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    /// Multipliers for `G x ≤ h` (nonnegative at optimality).
    pub mu: DVector<f64>,
    /// Multipliers for `A x = b`.
    pub nu: DVector<f64>,
    pub kkt: KktResiduals,
    /// Indices of active inequalities.
    pub active_set: Vec<usize>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn kkt_residual(&self) -> f64 {
        self.kkt.max()
    }

    pub fn active_set_size(&self) -> usize {
        self.active_set.len()
    }
}

/// Anything that can solve a [`QpProblem`].
pub trait QpSolver {
    fn solve(&mut self, problem: &QpProblem) -> QpSolution;

    /// Forget any warm-start state.
    fn reset(&mut self) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Row {
    Eq(usize),
    Ineq(usize),
}

/// Dual active-set solver with working-set warm start.
#[derive(Clone, Debug, Default)]
pub struct DualActiveSet {
    warm: Option<(usize, usize, Vec<usize>)>,
    pub max_iterations: Option<usize>,
}

impl DualActiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// The working set carried to the next solve, if any.
    pub fn warm_start_set(&self) -> Option<&[usize]> {
        self.warm.as_ref().map(|(_, _, s)| s.as_slice())
    }
}

impl QpSolver for DualActiveSet {
    fn solve(&mut self, problem: &QpProblem) -> QpSolution {
        let warm = match &self.warm {
            Some((n, m, set)) if *n == problem.n() && *m == problem.n_ineq() => Some(set.as_slice()),
            _ => None,
        };
        let sol = Engine::new(problem, self.max_iterations).run(warm);
        self.warm = match sol.status {
            QpStatus::Optimal => Some((problem.n(), problem.n_ineq(), sol.active_set.clone())),
            _ => None,
        };
        sol
    }

    fn reset(&mut self) {
        self.warm = None;
    }
}

/// Cold-start solve.
pub fn solve_qp(problem: &QpProblem) -> QpSolution {
    DualActiveSet::new().solve(problem)
}

struct Engine<'p> {
    p: &'p QpProblem,
    /// Unit-normalized rows and right-hand sides.
    ineq_rows: Vec<DVector<f64>>,
    ineq_rhs: Vec<f64>,
    eq_rows: Vec<DVector<f64>>,
    eq_rhs: Vec<f64>,
    ineq_scale: Vec<f64>,
    eq_scale: Vec<f64>,
    /// Threshold below which a step direction counts as degenerate.
    degenerate_tol: f64,
    max_iterations: usize,
    x: DVector<f64>,
    active: Vec<Row>,
    u: Vec<f64>,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Infeasible,
    MaxIterations,
}

fn normalize(row: DVector<f64>, rhs: f64) -> (DVector<f64>, f64, f64) {
    let norm = row.norm();
    if norm > 0.0 {
        (row / norm, rhs / norm, norm)
    } else {
        (row, rhs, 0.0)
    }
}

impl<'p> Engine<'p> {
    fn new(p: &'p QpProblem, max_iterations: Option<usize>) -> Self {
        let n = p.n();
        let (mut ineq_rows, mut ineq_rhs, mut ineq_scale) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..p.n_ineq() {
            let (r, b, s) = normalize(p.g_ineq.row(i).transpose(), p.h_ineq[i]);
            ineq_rows.push(r);
            ineq_rhs.push(b);
            ineq_scale.push(s);
        }
        let (mut eq_rows, mut eq_rhs, mut eq_scale) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..p.n_eq() {
            let (r, b, s) = normalize(p.a_eq.row(i).transpose(), p.b_eq[i]);
            eq_rows.push(r);
            eq_rhs.push(b);
            eq_scale.push(s);
        }
        let h_max = p.h.diagonal().amax().max(f64::MIN_POSITIVE);
        Self {
            p,
            ineq_rows,
            ineq_rhs,
            eq_rows,
            eq_rhs,
            ineq_scale,
            eq_scale,
            degenerate_tol: 1e-14 / h_max,
            max_iterations: max_iterations.unwrap_or(20 * (n + p.n_ineq() + p.n_eq()) + 100),
            x: DVector::zeros(n),
            active: Vec::new(),
            u: Vec::new(),
            iterations: 0,
        }
    }

    fn row(&self, r: Row) -> &DVector<f64> {
        match r {
            Row::Eq(i) => &self.eq_rows[i],
            Row::Ineq(i) => &self.ineq_rows[i],
        }
    }

    fn kkt_matrix(&self, active: &[Row]) -> DMatrix<f64> {
        let n = self.p.n();
        let k = active.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&self.p.h);
        for (j, r) in active.iter().enumerate() {
            let row = self.row(*r);
            kkt.view_mut((0, n + j), (n, 1)).copy_from(row);
            kkt.view_mut((n + j, 0), (1, n)).copy_from(&row.transpose());
        }
        kkt
    }

    /// Solves `[H Aᵀ; A 0] [x; u] = rhs` with one round of iterative refinement.
    fn kkt_solve(&self, active: &[Row], rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let kkt = self.kkt_matrix(active);
        let lu = kkt.clone().lu();
        let mut sol = lu.solve(rhs)?;
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        let resid = rhs - &kkt * &sol;
        if let Some(corr) = lu.solve(&resid) {
            if corr.iter().all(|v| v.is_finite()) {
                sol += corr;
            }
        }
        Some(sol)
    }

    /// Primal and dual step directions for raising the multiplier of `normal`.
    fn direction(&self, normal: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let n = self.p.n();
        let mut rhs = DVector::zeros(n + self.active.len());
        rhs.rows_mut(0, n).copy_from(&(-normal));
        let sol = self.kkt_solve(&self.active, &rhs)?;
        Some((sol.rows(0, n).into_owned(), sol.rows(n, self.active.len()).into_owned()))
    }

    /// Minimizer on the face defined by `active`, with its multipliers.
    fn face_solution(&self, active: &[Row]) -> Option<(DVector<f64>, Vec<f64>)> {
        let n = self.p.n();
        let mut rhs = DVector::zeros(n + active.len());
        rhs.rows_mut(0, n).copy_from(&(-&self.p.g));
        for (j, r) in active.iter().enumerate() {
            rhs[n + j] = match *r {
                Row::Eq(i) => self.eq_rhs[i],
                Row::Ineq(i) => self.ineq_rhs[i],
            };
        }
        let sol = self.kkt_solve(active, &rhs)?;
        Some((sol.rows(0, n).into_owned(), sol.rows(n, active.len()).iter().copied().collect()))
    }

    fn violation(&self, i: usize) -> f64 {
        self.ineq_rows[i].dot(&self.x) - self.ineq_rhs[i]
    }

    fn run(mut self, warm: Option<&[usize]>) -> QpSolution {
        let outcome = self.solve_inner(warm);
        self.finish(outcome)
    }

    fn solve_inner(&mut self, warm: Option<&[usize]>) -> Outcome {
        // Rows that vanished under normalization are either trivially
        // satisfied or make the problem infeasible outright.
        for i in 0..self.ineq_rows.len() {
            if self.ineq_scale[i] == 0.0 && self.ineq_rhs[i] < -FEAS_TOL {
                return Outcome::Infeasible;
            }
        }
        for i in 0..self.eq_rows.len() {
            if self.eq_scale[i] == 0.0 && self.eq_rhs[i].abs() > FEAS_TOL {
                return Outcome::Infeasible;
            }
        }

        if let Some(set) = warm {
            if self.warm_start(set) {
                return self.main_loop();
            }
        }
        self.active.clear();
        self.u.clear();
        match self.face_solution(&[]) {
            Some((x, _)) => self.x = x,
            None => return Outcome::Infeasible,
        }
        if let Some(out) = self.add_equalities() {
            return out;
        }
        self.main_loop()
    }

    /// Starts from the face of the previous working set, shedding
    /// constraints with negative multipliers until the point is dual
    /// feasible. Returns false when the set cannot be used.
    fn warm_start(&mut self, set: &[usize]) -> bool {
        let mut active: Vec<Row> = (0..self.eq_rows.len())
            .filter(|&i| self.eq_scale[i] > 0.0)
            .map(Row::Eq)
            .chain(set.iter().filter(|&&i| i < self.ineq_rows.len() && self.ineq_scale[i] > 0.0).map(|&i| Row::Ineq(i)))
            .collect();
        loop {
            let Some((x, u)) = self.face_solution(&active) else {
                return false;
            };
            // Reject near-singular faces: the multipliers blow up.
            if u.iter().any(|v| v.abs() > 1e12) {
                return false;
            }
            let worst = active
                .iter()
                .zip(&u)
                .enumerate()
                .filter(|(_, (r, v))| matches!(r, Row::Ineq(_)) && **v < 0.0)
                .min_by(|a, b| a.1 .1.total_cmp(b.1 .1))
                .map(|(k, _)| k);
            match worst {
                Some(k) => {
                    active.remove(k);
                }
                None => {
                    self.x = x;
                    self.active = active;
                    self.u = u;
                    return true;
                }
            }
        }
    }

    fn add_equalities(&mut self) -> Option<Outcome> {
        for i in 0..self.eq_rows.len() {
            if self.eq_scale[i] == 0.0 {
                continue;
            }
            let s = self.eq_rows[i].dot(&self.x) - self.eq_rhs[i];
            let sign = if s >= 0.0 { 1.0 } else { -1.0 };
            let normal = &self.eq_rows[i] * sign;
            let Some((z, r)) = self.direction(&normal) else {
                return Some(Outcome::Infeasible);
            };
            let curvature = -normal.dot(&z);
            if curvature <= self.degenerate_tol {
                // Linearly dependent on rows already held.
                if s.abs() > 1e-9 {
                    return Some(Outcome::Infeasible);
                }
                continue;
            }
            let t = s.abs() / curvature;
            self.x += &z * t;
            for (uk, rk) in self.u.iter_mut().zip(r.iter()) {
                *uk += t * rk;
            }
            self.active.push(Row::Eq(i));
            self.u.push(sign * t);
            self.iterations += 1;
        }
        None
    }

    fn main_loop(&mut self) -> Outcome {
        loop {
            if self.iterations >= self.max_iterations {
                return Outcome::MaxIterations;
            }
            let candidate = (0..self.ineq_rows.len())
                .filter(|i| self.ineq_scale[*i] > 0.0 && !self.active.contains(&Row::Ineq(*i)))
                .map(|i| (i, self.violation(i)))
                .filter(|(_, s)| *s > FEAS_TOL)
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            let Some((p, _)) = candidate else {
                return Outcome::Optimal;
            };
            if let Some(out) = self.enforce(p) {
                return out;
            }
        }
    }

    /// Moves along the dual path of inequality `p` until it is active.
    fn enforce(&mut self, p: usize) -> Option<Outcome> {
        let mut t_p = 0.0;
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Some(Outcome::MaxIterations);
            }
            let normal = self.ineq_rows[p].clone();
            let Some((z, r)) = self.direction(&normal) else {
                return Some(Outcome::Infeasible);
            };
            let curvature = -normal.dot(&z);
            let primal_step = if curvature > self.degenerate_tol {
                Some(self.violation(p).max(0.0) / curvature)
            } else {
                None
            };
            let mut dual_step: Option<(f64, usize)> = None;
            for (k, row) in self.active.iter().enumerate() {
                if let Row::Ineq(_) = row {
                    if r[k] < 0.0 {
                        let step = (self.u[k] / -r[k]).max(0.0);
                        if dual_step.is_none_or(|(best, _)| step < best) {
                            dual_step = Some((step, k));
                        }
                    }
                }
            }
            let (t, full) = match (primal_step, dual_step) {
                (None, None) => return Some(Outcome::Infeasible),
                (Some(tp), None) => (tp, true),
                (None, Some((td, _))) => (td, false),
                (Some(tp), Some((td, _))) => {
                    if tp <= td {
                        (tp, true)
                    } else {
                        (td, false)
                    }
                }
            };
            if primal_step.is_some() {
                self.x += &z * t;
            }
            for (uk, rk) in self.u.iter_mut().zip(r.iter()) {
                *uk += t * rk;
            }
            t_p += t;
            if full {
                self.active.push(Row::Ineq(p));
                self.u.push(t_p);
                return None;
            }
            let (_, k) = dual_step.expect("partial step has a blocking constraint");
            self.active.remove(k);
            self.u.remove(k);
        }
    }

    fn finish(mut self, outcome: Outcome) -> QpSolution {
        let n = self.p.n();
        let status = match outcome {
            Outcome::Optimal => QpStatus::Optimal,
            Outcome::Infeasible => QpStatus::Infeasible,
            Outcome::MaxIterations => QpStatus::MaxIterations,
        };

        if status == QpStatus::Optimal {
            // Re-solve on the final face to shed drift from the path updates.
            if let Some((x, u)) = self.face_solution(&self.active.clone()) {
                let feasible = (0..self.ineq_rows.len()).all(|i| self.ineq_rows[i].dot(&x) - self.ineq_rhs[i] <= FEAS_TOL);
                if feasible && x.iter().all(|v| v.is_finite()) {
                    self.x = x;
                    self.u = u;
                }
            }
        }

        let mut mu = DVector::zeros(self.p.n_ineq());
        let mut nu = DVector::zeros(self.p.n_eq());
        let mut active_set = Vec::new();
        for (row, u) in self.active.iter().zip(&self.u) {
            match *row {
                Row::Ineq(i) => {
                    mu[i] = u / self.ineq_scale[i];
                    active_set.push(i);
                }
                Row::Eq(i) => nu[i] = u / self.eq_scale[i],
            }
        }
        active_set.sort_unstable();

        let x = if status == QpStatus::Infeasible { DVector::zeros(n) } else { self.x };
        let kkt = KktResiduals::evaluate(self.p, &x, &mu, &nu);
        QpSolution { x, status, mu, nu, kkt, active_set, iterations: self.iterations }
    }
}
