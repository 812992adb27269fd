//! C ABI for the whole-body controller.
//!
//! Every function returns a [`WbcStatus`]; on failure a message is kept per
//! thread and can be fetched with [`wbc_last_error`]. Handles are opaque and
//! must be released with the matching `*_free` function. Poses are 7 doubles
//! (x, y, z, qw, qx, qy, qz); rotations are 9 doubles, row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use wbc_core::gaze::{look_at_rotation, WORLD_UP};
use wbc_core::ik::{IkProfile, QpStatus, TrackingTargets, WholeBodyIk};
use wbc_core::model::{load_model, GeneralizedState, RobotModel};
use wbc_core::se3::{Pose, Rotation};
use wbc_core::sim::{run_scenario, Scenario};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Model = 4,
    Infeasible = 5,
    Degenerate = 6,
    Io = 7,
    Violation = 8,
    Panic = 9,
}

/// A validated kinematic model.
pub struct WbcModel {
    model: Arc<RobotModel>,
}

/// A warm-started whole-body IK loop bound to one model and profile.
pub struct WbcController {
    model: Arc<RobotModel>,
    ik: WholeBodyIk,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("no interior nul"));
}

fn fail(status: WbcStatus, msg: impl Into<String>) -> WbcStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> WbcStatus) -> WbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == WbcStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(WbcStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, WbcStatus> {
    if p.is_null() {
        return Err(fail(WbcStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(WbcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], WbcStatus> {
    if p.is_null() {
        return Err(fail(WbcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], WbcStatus> {
    if p.is_null() {
        return Err(fail(WbcStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn pose_arg(p: *const f64, what: &str) -> Result<Pose, WbcStatus> {
    let s = slice_arg(p, 7, what)?;
    let a: [f64; 7] = s.try_into().expect("length 7");
    Pose::from_array(a).map_err(|e| fail(WbcStatus::InvalidArgument, format!("{what}: {e}")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wbc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// always NUL-terminated when `len > 0`). Returns the length the full message
/// needs, including the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn wbc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

/// The bundled 25-coordinate reference model.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn wbc_model_reference(out: *mut *mut WbcModel) -> WbcStatus {
    guard(|| {
        if out.is_null() {
            return fail(WbcStatus::NullPointer, "out is null");
        }
        *out = Box::into_raw(Box::new(WbcModel { model: Arc::new(RobotModel::reference()) }));
        WbcStatus::Ok
    })
}

/// Parses and validates a model document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn wbc_model_from_json(json: *const c_char, out: *mut *mut WbcModel) -> WbcStatus {
    guard(|| {
        let text = tri!(str_arg(json, "json"));
        if out.is_null() {
            return fail(WbcStatus::NullPointer, "out is null");
        }
        match load_model(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(WbcModel { model: Arc::new(m) }));
                WbcStatus::Ok
            }
            Err(e) => fail(WbcStatus::Model, e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wbc_model_free(model: *mut WbcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of generalized coordinates.
///
/// # Safety
/// `model` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn wbc_model_dof(model: *const WbcModel, out: *mut usize) -> WbcStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail(WbcStatus::NullPointer, "model or out is null");
        }
        *out = (*model).model.n_v();
        WbcStatus::Ok
    })
}

/// Writes the nominal posture into `q_out`, which must hold exactly `len`
/// values with `len` equal to the model's coordinate count.
///
/// # Safety
/// `model` must be a live handle; `q_out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wbc_model_nominal_posture(model: *const WbcModel, q_out: *mut f64, len: usize) -> WbcStatus {
    guard(|| {
        if model.is_null() {
            return fail(WbcStatus::NullPointer, "model is null");
        }
        let m = &(*model).model;
        if len != m.n_v() {
            return fail(WbcStatus::InvalidArgument, format!("expected {} values, got {len}", m.n_v()));
        }
        tri!(out_slice(q_out, len, "q_out")).copy_from_slice(m.nominal_posture().as_slice());
        WbcStatus::Ok
    })
}

/// World pose of a named frame or link at configuration `q`.
///
/// # Safety
/// `model` must be a live handle, `q` must point to `len` doubles, `frame`
/// must be NUL-terminated and `pose_out` must hold 7 doubles.
#[no_mangle]
pub unsafe extern "C" fn wbc_model_frame_pose(
    model: *const WbcModel,
    q: *const f64,
    len: usize,
    frame: *const c_char,
    pose_out: *mut f64,
) -> WbcStatus {
    guard(|| {
        if model.is_null() {
            return fail(WbcStatus::NullPointer, "model is null");
        }
        let m = &(*model).model;
        let q = GeneralizedState::from_slice(tri!(slice_arg(q, len, "q")));
        let name = tri!(str_arg(frame, "frame"));
        let out = tri!(out_slice(pose_out, 7, "pose_out"));
        match wbc_core::model::forward_kinematics(m, &q, name) {
            Ok(p) => {
                out.copy_from_slice(&p.to_array());
                WbcStatus::Ok
            }
            Err(e) => fail(WbcStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Creates a controller. `profile` is a bundled profile name (`laundry`,
/// `delivery`, `tablescape`) or a profile JSON document.
///
/// # Safety
/// `model` must be a live handle, `profile` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn wbc_controller_new(
    model: *const WbcModel,
    profile: *const c_char,
    out: *mut *mut WbcController,
) -> WbcStatus {
    guard(|| {
        if model.is_null() || out.is_null() {
            return fail(WbcStatus::NullPointer, "model or out is null");
        }
        let text = tri!(str_arg(profile, "profile"));
        let profile = match IkProfile::bundled(text) {
            Some(p) => p,
            None => match IkProfile::from_json(text) {
                Ok(p) => p,
                Err(e) => return fail(WbcStatus::Parse, e.to_string()),
            },
        };
        let model = Arc::clone(&(*model).model);
        *out = Box::into_raw(Box::new(WbcController { model, ik: WholeBodyIk::new(profile) }));
        WbcStatus::Ok
    })
}

/// # Safety
/// `ctrl` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wbc_controller_free(ctrl: *mut WbcController) {
    if !ctrl.is_null() {
        drop(Box::from_raw(ctrl));
    }
}

/// Runs one IK tick toward the gripper targets. `head_rotation` may be null;
/// otherwise it is a 9-double row-major rotation tracked by the head cost.
/// On `WBC_STATUS_INFEASIBLE` the outputs hold a zero step and `q`.
///
/// # Safety
/// `ctrl` must be a live handle; `q`, `dq_out` and `q_next_out` must point to
/// `len` doubles; `left` and `right` to 7 doubles.
#[no_mangle]
pub unsafe extern "C" fn wbc_controller_step(
    ctrl: *mut WbcController,
    q: *const f64,
    len: usize,
    left: *const f64,
    right: *const f64,
    head_rotation: *const f64,
    dt: f64,
    dq_out: *mut f64,
    q_next_out: *mut f64,
) -> WbcStatus {
    guard(|| {
        if ctrl.is_null() {
            return fail(WbcStatus::NullPointer, "controller is null");
        }
        let c = &mut *ctrl;
        let q = GeneralizedState::from_slice(tri!(slice_arg(q, len, "q")));
        let head_rotation = if head_rotation.is_null() { None } else { Some(tri!(rotation_arg(head_rotation, "head_rotation"))) };
        let targets = TrackingTargets {
            left_ee: tri!(pose_arg(left, "left")),
            right_ee: tri!(pose_arg(right, "right")),
            head_rotation,
        };
        let dq_out = tri!(out_slice(dq_out, len, "dq_out"));
        let q_next_out = tri!(out_slice(q_next_out, len, "q_next_out"));
        match c.ik.step(&c.model, &q, &targets, dt) {
            Ok(step) => {
                dq_out.copy_from_slice(step.dq.as_slice());
                q_next_out.copy_from_slice(step.q_next.as_slice());
                if step.diagnostics.status == QpStatus::Infeasible {
                    fail(WbcStatus::Infeasible, "QP infeasible")
                } else {
                    WbcStatus::Ok
                }
            }
            Err(e) => fail(WbcStatus::InvalidArgument, e.to_string()),
        }
    })
}

unsafe fn rotation_arg(p: *const f64, what: &str) -> Result<Rotation, WbcStatus> {
    let s = slice_arg(p, 9, what)?;
    Rotation::from_matrix(Matrix3::from_row_slice(s)).map_err(|e| fail(WbcStatus::InvalidArgument, format!("{what}: {e}")))
}

/// Head rotation whose z axis points from `head` to `target` while keeping
/// the current roll where possible. Returns `WBC_STATUS_DEGENERATE` when the
/// target coincides with the head.
///
/// # Safety
/// `head` and `target` must point to 3 doubles, `current` and `out` to 9.
#[no_mangle]
pub unsafe extern "C" fn wbc_look_at_rotation(
    head: *const f64,
    current: *const f64,
    target: *const f64,
    out: *mut f64,
) -> WbcStatus {
    guard(|| {
        let h = Vector3::from_column_slice(tri!(slice_arg(head, 3, "head")));
        let t = Vector3::from_column_slice(tri!(slice_arg(target, 3, "target")));
        let r = tri!(rotation_arg(current, "current"));
        let out = tri!(out_slice(out, 9, "out"));
        match look_at_rotation(&h, &r, &t, &WORLD_UP) {
            Ok(rot) => {
                let m = rot.matrix();
                for (i, v) in out.iter_mut().enumerate() {
                    *v = m[(i / 3, i % 3)];
                }
                WbcStatus::Ok
            }
            Err(e) => fail(WbcStatus::Degenerate, e.to_string()),
        }
    })
}

/// Runs a bundled scenario (by name) or a scenario JSON document and writes
/// the trajectory CSV and metrics JSON to the given paths (either may be
/// null). `violations_out`, when non-null, receives the violation count.
/// Returns `WBC_STATUS_VIOLATION` when constraints were violated.
///
/// # Safety
/// String arguments must be null (paths only) or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn wbc_run_scenario(
    scenario: *const c_char,
    csv_path: *const c_char,
    metrics_path: *const c_char,
    violations_out: *mut usize,
) -> WbcStatus {
    guard(|| {
        let text = tri!(str_arg(scenario, "scenario"));
        let s = match Scenario::bundled(text) {
            Some(s) => s,
            None => match Scenario::from_json(text) {
                Ok(s) => s,
                Err(e) => return fail(WbcStatus::Parse, e.to_string()),
            },
        };
        let (result, report) = match run_scenario(&s, None, None) {
            Ok(r) => r,
            Err(e) => return fail(WbcStatus::Model, e.to_string()),
        };
        for (path, contents) in [(csv_path, result.log.to_csv_string()), (metrics_path, report.to_json())] {
            if path.is_null() {
                continue;
            }
            let p = tri!(str_arg(path, "path"));
            if let Err(e) = std::fs::write(p, contents) {
                return fail(WbcStatus::Io, format!("{p}: {e}"));
            }
        }
        if !violations_out.is_null() {
            *violations_out = report.metrics.constraint_violations;
        }
        if report.metrics.constraint_violations > 0 {
            return fail(WbcStatus::Violation, "constraint violations");
        }
        WbcStatus::Ok
    })
}
