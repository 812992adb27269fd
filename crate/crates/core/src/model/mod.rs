//! Kinematic tree description of a mobile manipulator.
//!
//! A model is loaded from a JSON document (see [`ModelDocument`]) and
//! validated once; afterwards it is immutable and can be shared freely.
//! The generalized coordinate layout follows the joint order of the
//! document, with a planar base contributing three coordinates
//! (x, y, yaw).

mod collision;
mod kinematics;

use std::collections::{BTreeMap, HashMap};
use std::ops::{Index, IndexMut};

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::se3::{wrap_angle, Pose};

pub use collision::{segment_closest_points, CollisionDistance, CollisionPrimitive, Shape};
pub use kinematics::Kinematics;

/// The bundled 25-DoF reference morphology. Link lengths and joint
/// origins are placeholder geometry, not measured values.
pub const REFERENCE_MODEL_JSON: &str = include_str!("../../data/reference_rby1.json");

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema error: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("kinematic cycle through link `{0}`")]
    Cycle(String),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointType {
    Revolute,
    Prismatic,
    PlanarBase,
}

impl JointType {
    pub fn dof(self) -> usize {
        match self {
            JointType::PlanarBase => 3,
            _ => 1,
        }
    }
}

fn default_axis() -> Vector3<f64> {
    Vector3::z()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent_link: String,
    /// Defaults to the joint name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child_link: Option<String>,
    #[serde(rename = "type")]
    pub joint_type: JointType,
    #[serde(default = "default_axis")]
    pub axis: Vector3<f64>,
    #[serde(default)]
    pub origin: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_limits: Option<[f64; 2]>,
    /// rad/s or m/s. Unused for planar bases, whose limits come from the IK profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_limit: Option<f64>,
}

impl JointSpec {
    pub fn child_link_name(&self) -> &str {
        self.child_link.as_deref().unwrap_or(&self.name)
    }
}

/// A named frame: a link plus an optional fixed offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NamedFrameSpec {
    Link(String),
    Offset {
        link: String,
        #[serde(default)]
        offset: Pose,
    },
}

/// Serialized form of a [`RobotModel`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default, rename = "_comment", skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
    pub joints: Vec<JointSpec>,
    #[serde(default)]
    pub collision_bodies: Vec<collision::CollisionBodySpec>,
    /// Pairs of collision groups checked against each other.
    #[serde(default)]
    pub collision_pairs: Vec<[String; 2]>,
    /// Group name to joint names.
    #[serde(default)]
    pub groups: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub named_frames: BTreeMap<String, NamedFrameSpec>,
    #[serde(default)]
    pub nominal_posture: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub(crate) struct Joint {
    pub spec: JointSpec,
    pub parent: usize,
    pub child: usize,
    pub q_index: usize,
}

impl Joint {
    pub fn dof(&self) -> usize {
        self.spec.joint_type.dof()
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Link {
    pub name: String,
    pub parent_joint: Option<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct NamedFrame {
    pub link: usize,
    pub offset: Pose,
}

/// Identifies either a link or a named frame once resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameId {
    pub(crate) link: usize,
    pub(crate) named: Option<usize>,
}

/// Validated kinematic tree.
#[derive(Clone, Debug)]
pub struct RobotModel {
    name: String,
    pub(crate) joints: Vec<Joint>,
    pub(crate) links: Vec<Link>,
    /// Joint indices in parent-before-child order.
    pub(crate) topo_order: Vec<usize>,
    /// For each link, the joints from the root down to it.
    pub(crate) link_paths: Vec<Vec<usize>>,
    pub(crate) named: Vec<(String, NamedFrame)>,
    pub(crate) collision_bodies: Vec<CollisionPrimitive>,
    collision_pairs: Vec<(usize, usize)>,
    groups: BTreeMap<String, Vec<usize>>,
    nominal: GeneralizedState,
    n_v: usize,
    document: ModelDocument,
}

/// Configuration `q` over all velocity degrees of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedState(pub DVector<f64>);

/// Per-tick displacement `Δq`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedVelocity(pub DVector<f64>);

macro_rules! vector_newtype {
    ($t:ident) => {
        impl $t {
            pub fn zeros(n: usize) -> Self {
                Self(DVector::zeros(n))
            }

            pub fn from_slice(v: &[f64]) -> Self {
                Self(DVector::from_column_slice(v))
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }

            pub fn as_vector(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl Index<usize> for $t {
            type Output = f64;

            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $t {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }

        /// Serialized as a flat array of numbers.
        impl Serialize for $t {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                self.as_slice().serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                Ok(Self::from_slice(&Vec::<f64>::deserialize(d)?))
            }
        }
    };
}

vector_newtype!(GeneralizedState);
vector_newtype!(GeneralizedVelocity);

fn validation(msg: impl Into<String>) -> ModelError {
    ModelError::Validation(msg.into())
}

/// Parses and validates a model document.
pub fn load_model(document: &str) -> Result<RobotModel, ModelError> {
    let doc: ModelDocument = serde_json::from_str(document)?;
    RobotModel::from_document(doc)
}

impl RobotModel {
    /// The bundled reference model.
    pub fn reference() -> Self {
        load_model(REFERENCE_MODEL_JSON).expect("bundled reference model is valid")
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self, ModelError> {
        if doc.joints.is_empty() {
            return Err(validation("model has no joints"));
        }

        // Link table: every parent and child name becomes a link.
        let mut link_index: HashMap<String, usize> = HashMap::new();
        let mut links: Vec<Link> = Vec::new();
        let mut intern = |name: &str, links: &mut Vec<Link>| -> usize {
            *link_index.entry(name.to_string()).or_insert_with(|| {
                links.push(Link { name: name.to_string(), parent_joint: None });
                links.len() - 1
            })
        };

        let mut joints = Vec::with_capacity(doc.joints.len());
        let mut seen_names = HashMap::new();
        let mut q_index = 0;
        for (ji, spec) in doc.joints.iter().enumerate() {
            if seen_names.insert(spec.name.clone(), ji).is_some() {
                return Err(validation(format!("duplicate joint name `{}`", spec.name)));
            }
            validate_joint(spec)?;
            if spec.parent_link == spec.child_link_name() {
                return Err(ModelError::Cycle(spec.parent_link.clone()));
            }
            let parent = intern(&spec.parent_link, &mut links);
            let child = intern(spec.child_link_name(), &mut links);
            if let Some(other) = links[child].parent_joint {
                return Err(validation(format!(
                    "link `{}` has two parent joints (`{}` and `{}`)",
                    links[child].name, doc.joints[other].name, spec.name
                )));
            }
            links[child].parent_joint = Some(ji);
            joints.push(Joint { spec: spec.clone(), parent, child, q_index });
            q_index += spec.joint_type.dof();
        }
        let n_v = q_index;

        let roots: Vec<usize> = (0..links.len()).filter(|&l| links[l].parent_joint.is_none()).collect();
        if roots.is_empty() {
            return Err(ModelError::Cycle(links[joints[0].parent].name.clone()));
        }
        if roots.len() > 1 {
            let names: Vec<_> = roots.iter().map(|&l| links[l].name.as_str()).collect();
            return Err(validation(format!("tree has multiple roots: {names:?}")));
        }

        // Breadth-first from the root; joints never reached sit on a cycle.
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        for (ji, j) in joints.iter().enumerate() {
            children[j.parent].push(ji);
        }
        let mut topo_order = Vec::with_capacity(joints.len());
        let mut link_paths: Vec<Vec<usize>> = vec![Vec::new(); links.len()];
        let mut queue = std::collections::VecDeque::from([roots[0]]);
        while let Some(l) = queue.pop_front() {
            for &ji in &children[l] {
                let mut path = link_paths[l].clone();
                path.push(ji);
                link_paths[joints[ji].child] = path;
                topo_order.push(ji);
                queue.push_back(joints[ji].child);
            }
        }
        if topo_order.len() != joints.len() {
            let stuck = (0..joints.len()).find(|j| !topo_order.contains(j)).unwrap();
            return Err(ModelError::Cycle(links[joints[stuck].child].name.clone()));
        }

        let resolve_link = |name: &str| -> Result<usize, ModelError> {
            links
                .iter()
                .position(|l| l.name == name)
                .ok_or_else(|| validation(format!("unresolved link `{name}`")))
        };

        let mut named = Vec::new();
        for (name, spec) in &doc.named_frames {
            let (link, offset) = match spec {
                NamedFrameSpec::Link(link) => (link.as_str(), Pose::identity()),
                NamedFrameSpec::Offset { link, offset } => (link.as_str(), *offset),
            };
            if link_index_of(&links, name).is_some() && link != name {
                return Err(validation(format!("named frame `{name}` shadows a link")));
            }
            named.push((name.clone(), NamedFrame { link: resolve_link(link)?, offset }));
        }

        let mut collision_bodies = Vec::new();
        for body in &doc.collision_bodies {
            collision_bodies.push(CollisionPrimitive::from_spec(body, resolve_link(&body.link)?)?);
        }
        let mut collision_pairs = Vec::new();
        for [ga, gb] in &doc.collision_pairs {
            for g in [ga, gb] {
                if !collision_bodies.iter().any(|b| &b.group == g) {
                    return Err(validation(format!("collision pair names unknown group `{g}`")));
                }
            }
            for (a, pa) in collision_bodies.iter().enumerate() {
                for (b, pb) in collision_bodies.iter().enumerate() {
                    let ordered = if ga == gb { a < b } else { true };
                    if ordered && &pa.group == ga && &pb.group == gb && pa.link != pb.link {
                        collision_pairs.push((a, b));
                    }
                }
            }
        }

        let mut groups = BTreeMap::new();
        for (gname, members) in &doc.groups {
            let mut idx = Vec::new();
            for m in members {
                let ji = seen_names.get(m).ok_or_else(|| ModelError::UnknownJoint(m.clone()))?;
                idx.push(*ji);
            }
            groups.insert(gname.clone(), idx);
        }

        let nominal = match &doc.nominal_posture {
            Some(v) if v.len() != n_v => {
                return Err(ModelError::Dimension { expected: n_v, got: v.len() });
            }
            Some(v) => {
                if !v.iter().all(|x| x.is_finite()) {
                    return Err(validation("nominal posture contains non-finite values"));
                }
                GeneralizedState::from_slice(v)
            }
            None => GeneralizedState::zeros(n_v),
        };

        Ok(Self {
            name: doc.name.clone().unwrap_or_else(|| "robot".into()),
            joints,
            links,
            topo_order,
            link_paths,
            named,
            collision_bodies,
            collision_pairs,
            groups,
            nominal,
            n_v,
            document: doc,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Total velocity degrees of freedom.
    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn document(&self) -> &ModelDocument {
        &self.document
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.document).expect("model document serializes")
    }

    pub fn nominal_posture(&self) -> &GeneralizedState {
        &self.nominal
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_spec(&self, joint: usize) -> &JointSpec {
        &self.joints[joint].spec
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.spec.name == name)
    }

    /// First generalized coordinate of `joint`.
    pub fn q_index(&self, joint: usize) -> usize {
        self.joints[joint].q_index
    }

    /// Coordinate index of a single-DoF joint by name.
    pub fn coordinate(&self, name: &str) -> Result<usize, ModelError> {
        let j = self.joint_index(name).ok_or_else(|| ModelError::UnknownJoint(name.to_string()))?;
        Ok(self.joints[j].q_index)
    }

    /// Index of the planar base joint, if the model has one.
    pub fn base_joint(&self) -> Option<usize> {
        self.joints.iter().position(|j| j.spec.joint_type == JointType::PlanarBase)
    }

    /// Joint indices of a named group.
    pub fn group(&self, name: &str) -> Option<&[usize]> {
        self.groups.get(name).map(Vec::as_slice)
    }

    /// Generalized coordinates covered by a named group.
    pub fn group_coordinates(&self, name: &str) -> Option<Vec<usize>> {
        self.group(name).map(|js| {
            js.iter()
                .flat_map(|&j| {
                    let start = self.joints[j].q_index;
                    start..start + self.joints[j].dof()
                })
                .collect()
        })
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn link_names(&self) -> impl Iterator<Item = &str> {
        self.links.iter().map(|l| l.name.as_str())
    }

    pub fn named_frame_names(&self) -> impl Iterator<Item = &str> {
        self.named.iter().map(|(n, _)| n.as_str())
    }

    /// Resolves a named frame first, then a link name.
    pub fn frame(&self, name: &str) -> Result<FrameId, ModelError> {
        if let Some(i) = self.named.iter().position(|(n, _)| n == name) {
            return Ok(FrameId { link: self.named[i].1.link, named: Some(i) });
        }
        link_index_of(&self.links, name)
            .map(|link| FrameId { link, named: None })
            .ok_or_else(|| ModelError::UnknownFrame(name.to_string()))
    }

    pub fn has_frame(&self, name: &str) -> bool {
        self.frame(name).is_ok()
    }

    pub fn root_link(&self) -> &str {
        let root = self.links.iter().position(|l| l.parent_joint.is_none()).unwrap();
        &self.links[root].name
    }

    pub fn collision_bodies(&self) -> &[CollisionPrimitive] {
        &self.collision_bodies
    }

    /// All primitive pairs drawn from the configured group pairs.
    pub fn collision_pairs(&self) -> &[(usize, usize)] {
        &self.collision_pairs
    }

    /// Per-coordinate position limits; `None` for unbounded coordinates.
    pub fn position_limits(&self) -> Vec<Option<[f64; 2]>> {
        let mut out = vec![None; self.n_v];
        for j in &self.joints {
            if j.spec.joint_type != JointType::PlanarBase {
                out[j.q_index] = j.spec.position_limits;
            }
        }
        out
    }

    /// Per-coordinate velocity limits; `None` for base coordinates.
    pub fn velocity_limits(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.n_v];
        for j in &self.joints {
            if j.spec.joint_type != JointType::PlanarBase {
                out[j.q_index] = j.spec.velocity_limit;
            }
        }
        out
    }

    pub fn check_state(&self, q: &GeneralizedState) -> Result<(), ModelError> {
        if q.len() != self.n_v {
            return Err(ModelError::Dimension { expected: self.n_v, got: q.len() });
        }
        Ok(())
    }

    /// Evaluates all link poses at `q`.
    pub fn kinematics(&self, q: &GeneralizedState) -> Result<Kinematics<'_>, ModelError> {
        self.check_state(q)?;
        Ok(Kinematics::new(self, q))
    }
}

fn link_index_of(links: &[Link], name: &str) -> Option<usize> {
    links.iter().position(|l| l.name == name)
}

fn validate_joint(spec: &JointSpec) -> Result<(), ModelError> {
    let name = &spec.name;
    if spec.joint_type != JointType::PlanarBase {
        if (spec.axis.norm() - 1.0).abs() > 1e-9 {
            return Err(validation(format!("joint `{name}` axis is not unit length")));
        }
        match spec.velocity_limit {
            Some(v) if v > 0.0 && v.is_finite() => {}
            _ => return Err(validation(format!("joint `{name}` needs a positive velocity_limit"))),
        }
        if let Some([lo, hi]) = spec.position_limits {
            if !(lo <= hi) {
                return Err(validation(format!("joint `{name}` has lo > hi")));
            }
        }
    } else if spec.position_limits.is_some() {
        return Err(validation(format!("planar base `{name}` cannot carry position limits")));
    }
    Ok(())
}

/// Per-coordinate addition with the base yaw wrapped to `(−π, π]`.
/// Joint positions are not clamped.
pub fn integrate(model: &RobotModel, q: &GeneralizedState, dq: &GeneralizedVelocity) -> GeneralizedState {
    assert_eq!(q.len(), model.n_v(), "state length");
    assert_eq!(dq.len(), model.n_v(), "velocity length");
    let mut out = GeneralizedState(&q.0 + &dq.0);
    for j in &model.joints {
        if j.spec.joint_type == JointType::PlanarBase && dq[j.q_index + 2] != 0.0 {
            let yaw = j.q_index + 2;
            out[yaw] = wrap_angle(out[yaw]);
        }
    }
    out
}

/// World pose of `frame` at configuration `q`.
pub fn forward_kinematics(model: &RobotModel, q: &GeneralizedState, frame: &str) -> Result<Pose, ModelError> {
    let id = model.frame(frame)?;
    Ok(model.kinematics(q)?.frame_pose(id))
}

/// World-frame geometric Jacobian (linear rows on top) of `frame`.
pub fn frame_jacobian(
    model: &RobotModel,
    q: &GeneralizedState,
    frame: &str,
) -> Result<nalgebra::Matrix6xX<f64>, ModelError> {
    let id = model.frame(frame)?;
    Ok(model.kinematics(q)?.frame_jacobian(id))
}

/// Signed distances for the given primitive index pairs.
pub fn collision_distances(
    model: &RobotModel,
    q: &GeneralizedState,
    pairs: &[(usize, usize)],
) -> Result<Vec<CollisionDistance>, ModelError> {
    let kin = model.kinematics(q)?;
    Ok(pairs.iter().map(|&(a, b)| kin.collision_distance(a, b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_revolute() -> &'static str {
        r#"{
            "joints": [
                {"name": "j0", "parent_link": "root", "type": "revolute", "axis": [0,0,1],
                 "position_limits": [-1, 1], "velocity_limit": 1.0}
            ]
        }"#
    }

    #[test]
    fn reference_model_has_25_dof() {
        let m = RobotModel::reference();
        assert_eq!(m.n_v(), 25);
        assert_eq!(m.group_coordinates("torso").unwrap().len(), 6);
        assert_eq!(m.group_coordinates("left_arm").unwrap().len(), 7);
        assert_eq!(m.group_coordinates("right_arm").unwrap().len(), 7);
        assert_eq!(m.group_coordinates("neck").unwrap().len(), 2);
        assert_eq!(m.group_coordinates("base").unwrap(), vec![0, 1, 2]);
        for f in ["left_gripper", "right_gripper", "head", "torso_ref", "base_ref", "neck_mount"] {
            assert!(m.has_frame(f), "{f}");
        }
        for i in 0..6 {
            assert!(m.joint_index(&format!("torso_{i}")).is_some());
        }
    }

    #[test]
    fn single_joint_document() {
        let m = load_model(single_revolute()).unwrap();
        assert_eq!(m.n_v(), 1);
        assert_eq!(m.root_link(), "root");
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let doc = r#"{"joints": [{"name": "j", "parent_link": "j", "type": "revolute",
            "axis": [0,0,1], "velocity_limit": 1.0}]}"#;
        assert!(matches!(load_model(doc), Err(ModelError::Cycle(_))));
    }

    #[test]
    fn two_link_loop_is_a_cycle() {
        let doc = r#"{"joints": [
            {"name": "a", "parent_link": "root", "child_link": "l1", "type": "revolute", "axis": [0,0,1], "velocity_limit": 1.0},
            {"name": "b", "parent_link": "l2", "child_link": "l3", "type": "revolute", "axis": [0,0,1], "velocity_limit": 1.0},
            {"name": "c", "parent_link": "l3", "child_link": "l2", "type": "revolute", "axis": [0,0,1], "velocity_limit": 1.0}
        ]}"#;
        assert!(matches!(load_model(doc), Err(ModelError::Cycle(_))));
    }

    #[test]
    fn rejects_bad_limits_and_axes() {
        let bad_limits = r#"{"joints": [{"name": "j", "parent_link": "r", "type": "revolute",
            "axis": [0,0,1], "position_limits": [1, -1], "velocity_limit": 1.0}]}"#;
        assert!(matches!(load_model(bad_limits), Err(ModelError::Validation(_))));
        let bad_axis = r#"{"joints": [{"name": "j", "parent_link": "r", "type": "revolute",
            "axis": [0,0,2], "velocity_limit": 1.0}]}"#;
        assert!(matches!(load_model(bad_axis), Err(ModelError::Validation(_))));
        let bad_vel = r#"{"joints": [{"name": "j", "parent_link": "r", "type": "prismatic",
            "axis": [1,0,0], "velocity_limit": 0.0}]}"#;
        assert!(matches!(load_model(bad_vel), Err(ModelError::Validation(_))));
    }

    #[test]
    fn rejects_unresolved_named_frame_and_schema_errors() {
        let doc = r#"{"joints": [{"name": "j", "parent_link": "r", "type": "revolute",
            "axis": [0,0,1], "velocity_limit": 1.0}], "named_frames": {"tip": "nowhere"}}"#;
        assert!(matches!(load_model(doc), Err(ModelError::Validation(_))));
        assert!(matches!(load_model(r#"{"joints": 3}"#), Err(ModelError::Schema(_))));
        assert!(matches!(load_model(r#"{}"#), Err(ModelError::Schema(_))));
    }

    #[test]
    fn nominal_posture_length_checked() {
        let doc = r#"{"joints": [{"name": "j", "parent_link": "r", "type": "revolute",
            "axis": [0,0,1], "velocity_limit": 1.0}], "nominal_posture": [0, 1]}"#;
        assert!(matches!(load_model(doc), Err(ModelError::Dimension { expected: 1, got: 2 })));
    }

    #[test]
    fn integrate_examples() {
        let m = load_model(single_revolute()).unwrap();
        let q = GeneralizedState::from_slice(&[0.5]);
        assert_eq!(integrate(&m, &q, &GeneralizedVelocity::zeros(1)), q);
        let next = integrate(&m, &q, &GeneralizedVelocity::from_slice(&[0.25]));
        assert_eq!(next[0], 0.75);
        // Not clamped.
        let past = integrate(&m, &q, &GeneralizedVelocity::from_slice(&[2.0]));
        assert_eq!(past[0], 2.5);
    }

    #[test]
    fn integrate_wraps_yaw() {
        let m = RobotModel::reference();
        let mut q = m.nominal_posture().clone();
        q[2] = 3.1;
        let mut dq = GeneralizedVelocity::zeros(25);
        dq[2] = 0.1;
        let next = integrate(&m, &q, &dq);
        assert!((next[2] - (-2.0 * std::f64::consts::PI + 3.2)).abs() < 1e-12);
        assert!((next[2] + 3.083).abs() < 1e-3);
        assert_eq!(integrate(&m, &q, &GeneralizedVelocity::zeros(25)), q);
    }

    #[test]
    fn reference_document_roundtrips() {
        let m = RobotModel::reference();
        let again = load_model(&m.to_json()).unwrap();
        assert_eq!(again.n_v(), m.n_v());
        assert_eq!(again.collision_pairs(), m.collision_pairs());
    }
}
