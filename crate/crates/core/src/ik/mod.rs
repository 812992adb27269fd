//! Whole-body differential IK.
//!
//! Every tick the Cartesian targets are turned into a dense QP over the
//! generalized velocity `Δq` (see [`assemble_qp`]) and solved with a
//! warm-started active-set method (see [`qp`]).

mod assemble;
mod profile;
pub mod qp;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{integrate, GeneralizedState, GeneralizedVelocity, ModelError, RobotModel};
use crate::se3::{Pose, Rotation};

pub use assemble::{
    assemble_qp, com_offset_and_jacobian, Assembly, ConstraintKind, ConstraintRow, CostTerm, LEFT_EE, RIGHT_EE,
};
pub use profile::{IkProfile, UprightMode, DELIVERY_JSON, LAUNDRY_JSON, TABLESCAPE_JSON};
pub use qp::{solve_qp, DualActiveSet, KktResiduals, QpProblem, QpSolution, QpSolver, QpStatus};

#[derive(Debug, Error)]
pub enum IkError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("profile error: {0}")]
    Profile(String),
    #[error("unknown frozen joint `{0}`")]
    UnknownFrozenJoint(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dt must be positive, got {0}")]
    BadTimestep(f64),
}

/// Cartesian targets for one tick, in the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingTargets {
    pub left_ee: Pose,
    pub right_ee: Pose,
    /// Head orientation target; when present it is tracked by a QP cost.
    #[serde(default)]
    pub head_rotation: Option<Rotation>,
}

/// Per-tick solver diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct IkDiagnostics {
    pub status: QpStatus,
    pub kkt: KktResiduals,
    pub iterations: usize,
    pub active_set_size: usize,
    /// Cost term values at the returned `Δq`.
    pub costs: Vec<(String, f64)>,
    /// Smallest slack per constraint family, `h − G Δq`.
    pub margins: Vec<(String, f64)>,
    /// Position and orientation error of each end effector before the step.
    pub ee_position_error: [f64; 2],
    pub ee_rotation_error: [f64; 2],
    /// Collision rows dropped to recover feasibility.
    pub dropped_collision_rows: usize,
    /// Residual of the upright equality, `|Σ Δq|` over the upright joints.
    pub upright_residual: f64,
    /// Factor applied to the QP step to keep collision pairs at `d_safe`
    /// after integration; 1 unless the linearized rows overshot. Costs and
    /// margins above describe the unscaled QP solution.
    pub step_scale: f64,
}

#[derive(Clone, Debug)]
pub struct IkStep {
    pub dq: GeneralizedVelocity,
    pub q_next: GeneralizedState,
    pub diagnostics: IkDiagnostics,
}

/// Stateful whole-body IK: owns the warm-started solver for one control loop.
pub struct WholeBodyIk {
    profile: IkProfile,
    solver: Box<dyn QpSolver + Send>,
}

impl WholeBodyIk {
    pub fn new(profile: IkProfile) -> Self {
        Self::with_solver(profile, Box::new(DualActiveSet::new()))
    }

    pub fn with_solver(profile: IkProfile, solver: Box<dyn QpSolver + Send>) -> Self {
        Self { profile, solver }
    }

    pub fn profile(&self) -> &IkProfile {
        &self.profile
    }

    pub fn reset(&mut self) {
        self.solver.reset();
    }

    /// Assembles, solves and integrates one tick.
    pub fn step(
        &mut self,
        model: &RobotModel,
        q: &GeneralizedState,
        targets: &TrackingTargets,
        dt: f64,
    ) -> Result<IkStep, IkError> {
        let assembly = assemble_qp(model, q, targets, &self.profile, dt)?;
        let (solution, dropped) = self.solve_with_fallback(&assembly);
        let mut dq = GeneralizedVelocity(solution.x.clone());
        let scale = collision_step_scale(model, q, &dq, self.profile.d_safe)?;
        if scale < 1.0 {
            dq.0 *= scale;
        }
        let q_next = integrate(model, q, &dq);
        let mut diagnostics = assembly.diagnostics(&solution, dropped);
        diagnostics.step_scale = scale;
        Ok(IkStep { dq, q_next, diagnostics })
    }

    /// Solves the assembled QP; when infeasible, drops collision rows one at a
    /// time (farthest pair first) and retries. If nothing helps the returned
    /// `Δq` is zero with infeasible status.
    fn solve_with_fallback(&mut self, assembly: &Assembly) -> (QpSolution, usize) {
        let first = self.solver.solve(&assembly.problem);
        if first.status != QpStatus::Infeasible {
            return (first, 0);
        }
        let mut order: Vec<usize> = assembly
            .rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| matches!(r.kind, ConstraintKind::Collision { .. }).then_some(i))
            .collect();
        // Farthest pairs first.
        order.sort_by(|&a, &b| assembly.rows[b].distance().total_cmp(&assembly.rows[a].distance()).then(a.cmp(&b)));
        let mut keep: Vec<bool> = vec![true; assembly.rows.len()];
        for (dropped, &row) in order.iter().enumerate() {
            keep[row] = false;
            let reduced = assembly.problem_without(&keep);
            self.solver.reset();
            let sol = self.solver.solve(&reduced);
            if sol.status != QpStatus::Infeasible {
                return (assembly.expand_solution(sol, &keep), dropped + 1);
            }
        }
        self.solver.reset();
        (first, order.len())
    }
}

/// Largest `α ∈ [0, 1]` such that `q + α Δq` keeps every pair that starts
/// at or above `d_safe` there. The collision rows are linearized, so near
/// contact the full step can overshoot slightly; every other constraint is
/// convex and holds at `Δq = 0`, so shortening the step keeps them.
fn collision_step_scale(
    model: &RobotModel,
    q: &GeneralizedState,
    dq: &GeneralizedVelocity,
    d_safe: f64,
) -> Result<f64, IkError> {
    let guarded: Vec<(usize, usize)> = model
        .kinematics(q)?
        .all_collision_distances()
        .into_iter()
        .filter(|d| d.distance >= d_safe)
        .map(|d| d.pair)
        .collect();
    let ok = |alpha: f64| -> Result<bool, IkError> {
        let trial = integrate(model, q, &GeneralizedVelocity(&dq.0 * alpha));
        let kin = model.kinematics(&trial)?;
        Ok(guarded.iter().all(|&(a, b)| kin.collision_distance(a, b).distance >= d_safe))
    };
    if guarded.is_empty() || ok(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// One tick with a fresh (cold) solver.
pub fn step_ik(
    model: &RobotModel,
    q: &GeneralizedState,
    targets: &TrackingTargets,
    profile: &IkProfile,
    dt: f64,
) -> Result<IkStep, IkError> {
    WholeBodyIk::new(profile.clone()).step(model, q, targets, dt)
}

/// End-effector tracking errors (position m, rotation rad) at `q`.
pub fn tracking_errors(model: &RobotModel, q: &GeneralizedState, targets: &TrackingTargets) -> Result<[(f64, f64); 2], IkError> {
    let kin = model.kinematics(q)?;
    let mut out = [(0.0, 0.0); 2];
    for (slot, (frame, target)) in out.iter_mut().zip([(LEFT_EE, &targets.left_ee), (RIGHT_EE, &targets.right_ee)]) {
        let current = kin.frame_pose(model.frame(frame)?);
        *slot = ((target.translation - current.translation).norm(), current.rotation.angle_to(&target.rotation));
    }
    Ok(out)
}

pub(crate) fn zeros(n: usize) -> DVector<f64> {
    DVector::zeros(n)
}
