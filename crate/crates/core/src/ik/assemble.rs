use nalgebra::{DMatrix, DVector, Matrix2xX, Vector2, Vector3};

use super::{zeros, IkDiagnostics, IkError, IkProfile, QpProblem, QpSolution, TrackingTargets, UprightMode};
use crate::model::{GeneralizedState, Kinematics, RobotModel};
use crate::se3::Pose;

pub const LEFT_EE: &str = "left_gripper";
pub const RIGHT_EE: &str = "right_gripper";
const HEAD: &str = "head";
const TORSO_REF: &str = "torso_ref";
const BASE_REF: &str = "base_ref";

/// A weighted least-squares term `Σ w_k ((J Δq − b)_k)²`.
#[derive(Clone, Debug)]
pub struct CostTerm {
    pub name: &'static str,
    pub jacobian: DMatrix<f64>,
    pub target: DVector<f64>,
    pub weights: DVector<f64>,
}

impl CostTerm {
    pub fn value(&self, dq: &DVector<f64>) -> f64 {
        let r = &self.jacobian * dq - &self.target;
        r.iter().zip(self.weights.iter()).map(|(r, w)| w * r * r).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    /// `q + Δq` within a joint position limit.
    Position { coord: usize, upper: bool },
    /// Scaled joint velocity limit.
    Velocity { coord: usize, upper: bool },
    /// Scaled base velocity limit.
    BaseVelocity { coord: usize, upper: bool },
    /// Torso-over-base offset bound along x (0) or y (1).
    Com { axis: usize, upper: bool },
    /// Velocity damper for a primitive pair at the given distance.
    Collision { pair: (usize, usize), distance: f64 },
}

impl ConstraintKind {
    pub fn family(&self) -> &'static str {
        match self {
            ConstraintKind::Position { .. } => "position",
            ConstraintKind::Velocity { .. } => "velocity",
            ConstraintKind::BaseVelocity { .. } => "base_velocity",
            ConstraintKind::Com { .. } => "com",
            ConstraintKind::Collision { .. } => "collision",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRow {
    pub kind: ConstraintKind,
}

impl ConstraintRow {
    pub(crate) fn distance(&self) -> f64 {
        match self.kind {
            ConstraintKind::Collision { distance, .. } => distance,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// The assembled QP together with the bookkeeping needed for diagnostics.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub problem: QpProblem,
    /// One entry per inequality row of `problem`.
    pub rows: Vec<ConstraintRow>,
    /// One label per equality row.
    pub eq_labels: Vec<String>,
    pub terms: Vec<CostTerm>,
    pub damping: f64,
    pub upright_coords: Vec<usize>,
    pub ee_position_error: [f64; 2],
    pub ee_rotation_error: [f64; 2],
    /// Torso-over-base offset minus the desired offset.
    pub com_error: Vector2<f64>,
}

/// World-frame torso-minus-base XY offset and its Jacobian.
pub fn com_offset_and_jacobian(kin: &Kinematics<'_>) -> Result<(Vector2<f64>, Matrix2xX<f64>), IkError> {
    let model = kin.model();
    let torso_id = model.frame(TORSO_REF)?;
    let base_id = model.frame(BASE_REF)?;
    let torso = kin.frame_pose(torso_id).translation;
    let base = kin.frame_pose(base_id).translation;
    let jt = kin.frame_jacobian(torso_id);
    let jb = kin.frame_jacobian(base_id);
    let n = model.n_v();
    let mut jac = Matrix2xX::zeros(n);
    for col in 0..n {
        jac[(0, col)] = jt[(0, col)] - jb[(0, col)];
        jac[(1, col)] = jt[(1, col)] - jb[(1, col)];
    }
    Ok((Vector2::new(torso.x - base.x, torso.y - base.y), jac))
}

/// World-frame pose error `[p_t − p; log(R_t Rᵀ)]`.
fn pose_error(current: &Pose, target: &Pose) -> (Vector3<f64>, Vector3<f64>) {
    (target.translation - current.translation, (target.rotation * current.rotation.inverse()).log())
}

fn unit_row(n: usize, coord: usize, sign: f64) -> DVector<f64> {
    let mut r = zeros(n);
    r[coord] = sign;
    r
}

/// Builds the per-tick QP.
///
/// Costs: bimanual pose tracking, nominal and current posture, torso over
/// base, optional head orientation, plus `λ‖Δq‖²` damping. Inequalities:
/// position limits on `q + Δq`, scaled joint and base velocity limits,
/// torso-over-base bounds and collision velocity dampers for pairs inside
/// the influence distance. Equalities: the upright rows and frozen joints.
pub fn assemble_qp(
    model: &RobotModel,
    q: &GeneralizedState,
    targets: &TrackingTargets,
    profile: &IkProfile,
    dt: f64,
) -> Result<Assembly, IkError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(IkError::BadTimestep(dt));
    }
    model.check_state(q)?;
    profile.validate()?;
    let n = model.n_v();
    let kin = model.kinematics(q)?;

    let mut terms = Vec::new();

    // Pose tracking.
    let mut ee_position_error = [0.0; 2];
    let mut ee_rotation_error = [0.0; 2];
    for (i, (frame, target, name)) in
        [(LEFT_EE, &targets.left_ee, "ee_left"), (RIGHT_EE, &targets.right_ee, "ee_right")].into_iter().enumerate()
    {
        let id = model.frame(frame)?;
        let current = kin.frame_pose(id);
        let (dp, dr) = pose_error(&current, target);
        ee_position_error[i] = dp.norm();
        ee_rotation_error[i] = dr.norm();
        let jac = kin.frame_jacobian(id);
        let mut v = zeros(6);
        v.rows_mut(0, 3).copy_from(&dp);
        v.rows_mut(3, 3).copy_from(&dr);
        let weights = DVector::from_vec(vec![profile.w_p, profile.w_p, profile.w_p, profile.w_o, profile.w_o, profile.w_o]);
        terms.push(CostTerm { name, jacobian: DMatrix::from_iterator(6, n, jac.iter().copied()), target: v, weights });
    }

    // Head orientation, when requested.
    if let Some(head_rot) = targets.head_rotation {
        let id = model.frame(HEAD)?;
        let current = kin.frame_pose(id);
        let err = (head_rot * current.rotation.inverse()).log();
        let jac = kin.frame_jacobian(id);
        let mut rows = DMatrix::zeros(3, n);
        rows.copy_from(&jac.rows(3, 3));
        terms.push(CostTerm {
            name: "head",
            jacobian: rows,
            target: DVector::from_column_slice(err.as_slice()),
            weights: DVector::from_element(3, profile.w_head),
        });
    }

    // Nominal posture on torso and arm coordinates.
    let coords_of = |group: &str| model.group_coordinates(group).unwrap_or_default();
    let torso = coords_of("torso");
    let arms: Vec<usize> = coords_of("left_arm").into_iter().chain(coords_of("right_arm")).collect();
    let nominal = model.nominal_posture();
    let mut nom_w = zeros(n);
    for &c in &torso {
        nom_w[c] = profile.w_nom_torso;
    }
    for &c in &arms {
        nom_w[c] = profile.w_nom_arm;
    }
    terms.push(CostTerm {
        name: "nominal",
        jacobian: DMatrix::identity(n, n),
        target: &nominal.0 - &q.0,
        weights: nom_w,
    });

    // Current posture: w_curr on joints, separate base weights.
    let mut curr_w = DVector::from_element(n, profile.w_curr);
    let base_coords: Vec<usize> = match model.base_joint() {
        Some(b) => {
            let s = model.q_index(b);
            curr_w[s] = profile.w_base_pos;
            curr_w[s + 1] = profile.w_base_pos;
            curr_w[s + 2] = profile.w_base_ori;
            vec![s, s + 1, s + 2]
        }
        None => Vec::new(),
    };
    terms.push(CostTerm { name: "current", jacobian: DMatrix::identity(n, n), target: zeros(n), weights: curr_w });

    // Torso over base.
    let (offset, com_jac) = com_offset_and_jacobian(&kin)?;
    let r_star = match profile.com_offset {
        Some(r) => Vector2::new(r[0], r[1]),
        None => {
            let nominal_kin = model.kinematics(nominal)?;
            com_offset_and_jacobian(&nominal_kin)?.0
        }
    };
    let com_error = offset - r_star;
    let com_jac_d = DMatrix::from_iterator(2, n, com_jac.iter().copied());
    terms.push(CostTerm {
        name: "com",
        jacobian: com_jac_d.clone(),
        target: DVector::from_vec(vec![-com_error.x, -com_error.y]),
        weights: DVector::from_element(2, profile.w_com),
    });

    // Quadratic form.
    let mut h = DMatrix::identity(n, n) * profile.lambda;
    let mut g = zeros(n);
    for t in &terms {
        let jw = t.jacobian.transpose() * DMatrix::from_diagonal(&t.weights);
        h += &jw * &t.jacobian;
        g -= &jw * &t.target;
    }
    h *= 2.0;
    g *= 2.0;
    h = (&h + h.transpose()) * 0.5;

    // Inequalities.
    let mut g_rows: Vec<DVector<f64>> = Vec::new();
    let mut h_vals: Vec<f64> = Vec::new();
    let mut rows: Vec<ConstraintRow> = Vec::new();
    let mut push = |row: DVector<f64>, rhs: f64, kind: ConstraintKind| {
        g_rows.push(row);
        h_vals.push(rhs);
        rows.push(ConstraintRow { kind });
    };

    for (coord, lim) in model.position_limits().into_iter().enumerate() {
        if let Some([lo, hi]) = lim {
            push(unit_row(n, coord, 1.0), hi - q[coord], ConstraintKind::Position { coord, upper: true });
            push(unit_row(n, coord, -1.0), q[coord] - lo, ConstraintKind::Position { coord, upper: false });
        }
    }
    for (coord, lim) in model.velocity_limits().into_iter().enumerate() {
        if let Some(v) = lim {
            let bound = profile.velocity_safety * v * dt;
            push(unit_row(n, coord, 1.0), bound, ConstraintKind::Velocity { coord, upper: true });
            push(unit_row(n, coord, -1.0), bound, ConstraintKind::Velocity { coord, upper: false });
        }
    }
    for (k, &coord) in base_coords.iter().enumerate() {
        let limit = if k < 2 { profile.base_vel_limits[0] } else { profile.base_vel_limits[1] };
        let bound = profile.velocity_safety * limit * dt;
        push(unit_row(n, coord, 1.0), bound, ConstraintKind::BaseVelocity { coord, upper: true });
        push(unit_row(n, coord, -1.0), bound, ConstraintKind::BaseVelocity { coord, upper: false });
    }
    for axis in 0..2 {
        let b = if axis == 0 { profile.b_x } else { profile.b_y };
        let row: DVector<f64> = com_jac_d.row(axis).transpose();
        push(row.clone(), b - com_error[axis], ConstraintKind::Com { axis, upper: true });
        push(-row, b + com_error[axis], ConstraintKind::Com { axis, upper: false });
    }
    for &(a, b) in model.collision_pairs() {
        let d = kin.collision_distance(a, b);
        if d.distance >= profile.d_inf {
            continue;
        }
        let bodies = model.collision_bodies();
        let ja = kin.point_jacobian(bodies[a].link_index(), &d.core_a);
        let jb = kin.point_jacobian(bodies[b].link_index(), &d.core_b);
        let rel = (ja - jb).transpose() * d.normal;
        push(
            -DVector::from_column_slice(rel.as_slice()),
            profile.collision_gain * (d.distance - profile.d_safe),
            ConstraintKind::Collision { pair: (a, b), distance: d.distance },
        );
    }

    // Equalities.
    let mut a_rows: Vec<DVector<f64>> = Vec::new();
    let mut eq_labels = Vec::new();
    let upright_coords = profile
        .upright_joints
        .iter()
        .map(|j| model.coordinate(j).map_err(|_| IkError::UnknownFrozenJoint(j.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    match profile.upright_mode {
        UprightMode::SumZero => {
            if !upright_coords.is_empty() {
                let mut r = zeros(n);
                for &c in &upright_coords {
                    r[c] = 1.0;
                }
                a_rows.push(r);
                eq_labels.push("upright_sum".to_string());
            }
        }
        UprightMode::IndividuallyFixed => {
            for (c, name) in upright_coords.iter().zip(&profile.upright_joints) {
                a_rows.push(unit_row(n, *c, 1.0));
                eq_labels.push(format!("upright_fixed:{name}"));
            }
        }
    }
    for name in &profile.frozen_joints {
        let c = model.coordinate(name).map_err(|_| IkError::UnknownFrozenJoint(name.clone()))?;
        a_rows.push(unit_row(n, c, 1.0));
        eq_labels.push(format!("frozen:{name}"));
    }

    let g_ineq = stack(&g_rows, n);
    let a_eq = stack(&a_rows, n);
    let problem = QpProblem {
        h,
        g,
        g_ineq,
        h_ineq: DVector::from_vec(h_vals),
        b_eq: zeros(a_rows.len()),
        a_eq,
    };
    problem.check_dimensions().map_err(IkError::Dimension)?;

    Ok(Assembly {
        problem,
        rows,
        eq_labels,
        terms,
        damping: profile.lambda,
        upright_coords,
        ee_position_error,
        ee_rotation_error,
        com_error,
    })
}

fn stack(rows: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    m
}

impl Assembly {
    /// Copy of the problem keeping only inequality rows flagged in `keep`.
    pub fn problem_without(&self, keep: &[bool]) -> QpProblem {
        let idx: Vec<usize> = (0..self.rows.len()).filter(|&i| keep[i]).collect();
        let n = self.problem.n();
        let mut g = DMatrix::zeros(idx.len(), n);
        let mut h = zeros(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            g.set_row(k, &self.problem.g_ineq.row(i));
            h[k] = self.problem.h_ineq[i];
        }
        QpProblem { g_ineq: g, h_ineq: h, ..self.problem.clone() }
    }

    /// Maps a solution of a reduced problem back onto the full row indexing.
    pub fn expand_solution(&self, sol: QpSolution, keep: &[bool]) -> QpSolution {
        let idx: Vec<usize> = (0..self.rows.len()).filter(|&i| keep[i]).collect();
        let mut mu = zeros(self.rows.len());
        for (k, &i) in idx.iter().enumerate() {
            mu[i] = sol.mu[k];
        }
        let active_set = sol.active_set.iter().map(|&k| idx[k]).collect();
        QpSolution { mu, active_set, ..sol }
    }

    pub fn objective_terms(&self, dq: &DVector<f64>) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self.terms.iter().map(|t| (t.name.to_string(), t.value(dq))).collect();
        out.push(("damping".into(), self.damping * dq.norm_squared()));
        out
    }

    /// Slack `h − G Δq` per inequality row.
    pub fn slacks(&self, dq: &DVector<f64>) -> DVector<f64> {
        &self.problem.h_ineq - &self.problem.g_ineq * dq
    }

    pub fn family_margins(&self, dq: &DVector<f64>) -> Vec<(String, f64)> {
        let slacks = self.slacks(dq);
        let mut out: Vec<(String, f64)> = Vec::new();
        for (row, s) in self.rows.iter().zip(slacks.iter()) {
            let fam = row.kind.family();
            match out.iter_mut().find(|(f, _)| f == fam) {
                Some((_, m)) => *m = m.min(*s),
                None => out.push((fam.to_string(), *s)),
            }
        }
        out
    }

    pub(crate) fn diagnostics(&self, sol: &QpSolution, dropped: usize) -> IkDiagnostics {
        let upright_residual = self.upright_coords.iter().map(|&c| sol.x[c]).sum::<f64>().abs();
        IkDiagnostics {
            status: sol.status,
            kkt: sol.kkt,
            iterations: sol.iterations,
            active_set_size: sol.active_set_size(),
            costs: self.objective_terms(&sol.x),
            margins: self.family_margins(&sol.x),
            ee_position_error: self.ee_position_error,
            ee_rotation_error: self.ee_rotation_error,
            dropped_collision_rows: dropped,
            upright_residual,
            step_scale: 1.0,
        }
    }
}
