//! Gripper-centric frames and pointmap geometry.

use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::Pose;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("pointmap grids disagree: {0}")]
    Dimension(String),
    #[error("patch {patch} does not divide {width}x{height}")]
    NotDivisible { patch: usize, width: usize, height: usize },
    #[error("pointmap has no valid points")]
    Empty,
    #[error("valid point at ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("bad pointmap file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameTag {
    World,
    Camera,
    LeftGripper,
    RightGripper,
}

/// A value together with the frame it is expressed in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tagged<T> {
    pub frame: FrameTag,
    pub value: T,
}

impl<T> Tagged<T> {
    pub fn new(frame: FrameTag, value: T) -> Self {
        Self { frame, value }
    }
}

/// Row-major H×W grid of camera-frame points with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Pointmap {
    width: usize,
    height: usize,
    points: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl Pointmap {
    pub fn new(width: usize, height: usize, points: Vec<Vector3<f64>>, valid: Vec<bool>) -> Result<Self, GeometryError> {
        let n = width * height;
        if points.len() != n || valid.len() != n {
            return Err(GeometryError::Dimension(format!(
                "{width}x{height} needs {n} entries, got {} points and {} flags",
                points.len(),
                valid.len()
            )));
        }
        for (i, (p, v)) in points.iter().zip(&valid).enumerate() {
            if *v && !p.iter().all(|c| c.is_finite()) {
                return Err(GeometryError::NonFinite { row: i / width, col: i % width });
            }
        }
        Ok(Self { width, height, points, valid })
    }

    /// Builds a fully valid pointmap from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Vector3<f64>) -> Self {
        let points = (0..width * height).map(|i| f(i / width, i % width)).collect();
        Self { width, height, points, valid: vec![true; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn point(&self, row: usize, col: usize) -> &Vector3<f64> {
        &self.points[row * self.width + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.width + col]
    }

    pub fn set_valid(&mut self, row: usize, col: usize, valid: bool) {
        self.valid[row * self.width + col] = valid;
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Valid points in row-major order.
    pub fn valid_points(&self) -> impl Iterator<Item = &Vector3<f64>> {
        self.points.iter().zip(&self.valid).filter_map(|(p, v)| v.then_some(p))
    }

    /// Applies a rigid transform to every point; validity is unchanged.
    pub fn transformed(&self, t: &Pose) -> Self {
        Self {
            width: self.width,
            height: self.height,
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            valid: self.valid.clone(),
        }
    }

    /// Binary container: `PMAP`, u32 width, u32 height, H·W·3 f32, then the
    /// validity bits packed LSB-first, all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), GeometryError> {
        let dim = |v: usize| u32::try_from(v).map_err(|_| GeometryError::Format("dimension exceeds u32".into()));
        w.write_all(b"PMAP")?;
        w.write_all(&dim(self.width)?.to_le_bytes())?;
        w.write_all(&dim(self.height)?.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.points.len() * 12);
        for p in &self.points {
            for c in p.iter() {
                buf.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        let mut bits = vec![0u8; self.valid.len().div_ceil(8)];
        for (i, v) in self.valid.iter().enumerate() {
            if *v {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bits)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, GeometryError> {
        let mut header = [0u8; 12];
        r.read_exact(&mut header).map_err(|_| GeometryError::Format("truncated header".into()))?;
        if &header[..4] != b"PMAP" {
            return Err(GeometryError::Format("missing PMAP magic".into()));
        }
        let width = u32::from_le_bytes(header[4..8].try_into().expect("4 bytes")) as usize;
        let height = u32::from_le_bytes(header[8..12].try_into().expect("4 bytes")) as usize;
        let n = width
            .checked_mul(height)
            .filter(|n| *n <= 1 << 28)
            .ok_or_else(|| GeometryError::Format("dimensions too large".into()))?;
        let mut data = vec![0u8; n * 12];
        r.read_exact(&mut data).map_err(|_| GeometryError::Format("truncated point data".into()))?;
        let mut bits = vec![0u8; n.div_ceil(8)];
        r.read_exact(&mut bits).map_err(|_| GeometryError::Format("truncated validity mask".into()))?;
        let f = |i: usize| f32::from_le_bytes(data[i * 4..i * 4 + 4].try_into().expect("4 bytes")) as f64;
        let points = (0..n).map(|i| Vector3::new(f(3 * i), f(3 * i + 1), f(3 * i + 2))).collect();
        let valid = (0..n).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
        Self::new(width, height, points, valid)
    }
}

/// Anything that can be moved between frames by a rigid transform.
pub trait RigidTransform: Sized {
    fn transformed_by(&self, t: &Pose) -> Self;
}

impl RigidTransform for Pose {
    fn transformed_by(&self, t: &Pose) -> Self {
        *t * *self
    }
}

impl RigidTransform for Vector3<f64> {
    fn transformed_by(&self, t: &Pose) -> Self {
        t.transform_point(self)
    }
}

impl RigidTransform for Pointmap {
    fn transformed_by(&self, t: &Pose) -> Self {
        self.transformed(t)
    }
}

/// Re-expresses `item` (given in the frame `item_frame_in_world`) in the
/// gripper frame.
pub fn to_gripper_frame<T: RigidTransform>(
    item: &T,
    item_frame_in_world: &Pose,
    gripper_in_world: &Pose,
    gripper: FrameTag,
) -> Tagged<T> {
    let t = gripper_in_world.inverse() * *item_frame_in_world;
    Tagged::new(gripper, item.transformed_by(&t))
}

/// Invalidates every point lying behind either gripper (`z < 0` in that
/// gripper's frame). Points stay in the camera frame.
pub fn mask_arm_points(pm: &Pointmap, camera_in_world: &Pose, left_in_world: &Pose, right_in_world: &Pose) -> Pointmap {
    let to_left = left_in_world.inverse() * *camera_in_world;
    let to_right = right_in_world.inverse() * *camera_in_world;
    let mut out = pm.clone();
    for (p, v) in out.points.iter().zip(out.valid.iter_mut()) {
        if *v && (to_left.transform_point(p).z < 0.0 || to_right.transform_point(p).z < 0.0) {
            *v = false;
        }
    }
    out
}

/// Nearest-neighbour downsampling: one sample per `patch`×`patch` block,
/// taken at index `patch / 2` inside the block.
pub fn downsample_pointmap(pm: &Pointmap, patch: usize) -> Result<Pointmap, GeometryError> {
    if patch == 0 || !pm.width.is_multiple_of(patch) || !pm.height.is_multiple_of(patch) {
        return Err(GeometryError::NotDivisible { patch, width: pm.width, height: pm.height });
    }
    let (w, h) = (pm.width / patch, pm.height / patch);
    let off = patch / 2;
    let mut points = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let idx = (r * patch + off) * pm.width + c * patch + off;
            points.push(pm.points[idx]);
            valid.push(pm.valid[idx]);
        }
    }
    Ok(Pointmap { width: w, height: h, points, valid })
}

/// Pixel used as the image centre: `(height / 2, width / 2)`.
pub fn center_pixel(pm: &Pointmap) -> (usize, usize) {
    (pm.height / 2, pm.width / 2)
}

/// Valid pixel closest (Euclidean, in pixels) to the image centre; ties go
/// to the smaller `(row, col)`. Searches outward ring by ring.
pub fn nearest_valid_to_center(pm: &Pointmap) -> Option<(usize, usize)> {
    let (cr, cc) = center_pixel(pm);
    let (cr, cc) = (cr as i64, cc as i64);
    let (h, w) = (pm.height as i64, pm.width as i64);
    let max_ring = cr.max(h - 1 - cr).max(cc).max(w - 1 - cc);
    let mut best: Option<(i64, i64, i64)> = None;
    for k in 0..=max_ring {
        if let Some((d2, _, _)) = best {
            // Every pixel on ring k is at least k away.
            if d2 < k * k {
                break;
            }
        }
        for r in (cr - k).max(0)..=(cr + k).min(h - 1) {
            let on_edge_row = (r - cr).abs() == k;
            let cols: Vec<i64> = if on_edge_row { ((cc - k).max(0)..=(cc + k).min(w - 1)).collect() } else { vec![cc - k, cc + k] };
            for c in cols {
                if c < 0 || c >= w || (k == 0 && c != cc) {
                    continue;
                }
                if !pm.valid[(r * w + c) as usize] {
                    continue;
                }
                let d2 = (r - cr).pow(2) + (c - cc).pow(2);
                if best.is_none_or(|b| (d2, r, c) < b) {
                    best = Some((d2, r, c));
                }
            }
        }
    }
    best.map(|(_, r, c)| (r as usize, c as usize))
}

/// World-frame look-at point: the valid sample nearest the image centre,
/// i.e. where the central camera ray meets the scene.
pub fn extract_lookat_point(pm: &Pointmap, camera_in_world: &Pose) -> Result<Vector3<f64>, GeometryError> {
    let (r, c) = nearest_valid_to_center(pm).ok_or(GeometryError::Empty)?;
    Ok(camera_in_world.transform_point(pm.point(r, c)))
}
