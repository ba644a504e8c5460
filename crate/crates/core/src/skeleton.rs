//! Skeleton topology, poses, pose sequences and per-coordinate joint signals.
//!
//! Poses are stored as `P` rows of `D` coordinates. The flattened form used by
//! the dictionary and the lifter is joint-major, axis-minor:
//! `x1 y1 z1 x2 y2 z2 ...`.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint names of the default 15-joint model, in storage order.
pub const CANONICAL_JOINTS: [&str; 15] = [
    "hip",
    "neck",
    "head",
    "l-shoulder",
    "l-elbow",
    "l-hand",
    "r-shoulder",
    "r-elbow",
    "r-hand",
    "l-hip",
    "l-knee",
    "l-foot",
    "r-hip",
    "r-knee",
    "r-foot",
];

const CANONICAL_PARENTS: [Option<usize>; 15] = [
    None,
    Some(0),
    Some(1),
    Some(1),
    Some(3),
    Some(4),
    Some(1),
    Some(6),
    Some(7),
    Some(0),
    Some(9),
    Some(10),
    Some(0),
    Some(12),
    Some(13),
];

/// Named joints connected into a single tree by parent links.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyDoc", into = "TopologyDoc")]
pub struct JointTopology {
    joints: Vec<String>,
    parents: Vec<Option<usize>>,
    limbs: Vec<(usize, usize)>,
    root: usize,
}

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    joints: Vec<String>,
    parents: Vec<Option<usize>>,
}

impl TryFrom<TopologyDoc> for JointTopology {
    type Error = Error;

    fn try_from(doc: TopologyDoc) -> Result<Self> {
        JointTopology::new(doc.joints, doc.parents)
    }
}

impl From<JointTopology> for TopologyDoc {
    fn from(t: JointTopology) -> Self {
        TopologyDoc {
            joints: t.joints,
            parents: t.parents,
        }
    }
}

impl JointTopology {
    pub fn new(joints: Vec<String>, parents: Vec<Option<usize>>) -> Result<Self> {
        let p = joints.len();
        if p < 2 {
            return Err(Error::Structural(format!(
                "topology needs at least 2 joints, got {p}"
            )));
        }
        if parents.len() != p {
            return Err(Error::Structural(format!(
                "topology has {p} joints but {} parent links",
                parents.len()
            )));
        }
        let mut seen = HashSet::with_capacity(p);
        for name in &joints {
            if !seen.insert(name.as_str()) {
                return Err(Error::Structural(format!("duplicate joint name '{name}'")));
            }
        }

        let mut root = None;
        let mut limbs = Vec::with_capacity(p - 1);
        for (child, parent) in parents.iter().enumerate() {
            match *parent {
                None => {
                    if let Some(prev) = root {
                        return Err(Error::Structural(format!(
                            "topology has more than one root ('{}' and '{}')",
                            joints[prev], joints[child]
                        )));
                    }
                    root = Some(child);
                }
                Some(parent) if parent >= p => {
                    return Err(Error::Structural(format!(
                        "joint '{}' has parent index {parent} out of range",
                        joints[child]
                    )));
                }
                Some(parent) if parent == child => {
                    return Err(Error::Structural(format!(
                        "joint '{}' is its own parent",
                        joints[child]
                    )));
                }
                Some(parent) => limbs.push((parent, child)),
            }
        }
        let root = root.ok_or_else(|| Error::Structural("topology has no root joint".into()))?;

        // every joint must reach the root within p steps
        for start in 0..p {
            let mut at = start;
            let mut steps = 0;
            while let Some(parent) = parents[at] {
                at = parent;
                steps += 1;
                if steps > p {
                    return Err(Error::Structural(format!(
                        "parent links through '{}' form a cycle",
                        joints[start]
                    )));
                }
            }
        }

        Ok(JointTopology {
            joints,
            parents,
            limbs,
            root,
        })
    }

    /// The shipped 15-joint model rooted at the hip.
    pub fn canonical() -> Self {
        JointTopology::new(
            CANONICAL_JOINTS.iter().map(|s| s.to_string()).collect(),
            CANONICAL_PARENTS.to_vec(),
        )
        .expect("canonical topology is well formed")
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn joints(&self) -> &[String] {
        &self.joints
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    /// Bones as `(parent, child)` index pairs.
    pub fn limbs(&self) -> &[(usize, usize)] {
        &self.limbs
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn name(&self, joint: usize) -> &str {
        &self.joints[joint]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j == name)
    }

    /// True when `a` and `b` are joined by a bone, in either direction.
    pub fn is_limb(&self, a: usize, b: usize) -> bool {
        self.parents.get(b) == Some(&Some(a)) || self.parents.get(a) == Some(&Some(b))
    }
}

pub(crate) fn same_topology(a: &Arc<JointTopology>, b: &Arc<JointTopology>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Per-frame joint positions with `D` coordinates per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose<const D: usize> {
    topology: Arc<JointTopology>,
    coords: Vec<[f64; D]>,
}

pub type Pose2D = Pose<2>;
pub type Pose3D = Pose<3>;

impl<const D: usize> Pose<D> {
    pub fn new(topology: Arc<JointTopology>, coords: Vec<[f64; D]>) -> Result<Self> {
        if coords.len() != topology.len() {
            return Err(Error::Structural(format!(
                "pose has {} joints, topology has {}",
                coords.len(),
                topology.len()
            )));
        }
        if let Some(j) = coords.iter().position(|c| c.iter().any(|v| !v.is_finite())) {
            return Err(Error::Structural(format!(
                "joint '{}' has a non-finite coordinate",
                topology.name(j)
            )));
        }
        Ok(Pose { topology, coords })
    }

    /// Joint-major flattening, length `D * P`.
    pub fn from_flat(topology: Arc<JointTopology>, flat: &[f64]) -> Result<Self> {
        if flat.len() != D * topology.len() {
            return Err(Error::Structural(format!(
                "flattened pose has length {}, expected {}",
                flat.len(),
                D * topology.len()
            )));
        }
        let coords = flat
            .chunks_exact(D)
            .map(|c| {
                let mut row = [0.0; D];
                row.copy_from_slice(c);
                row
            })
            .collect();
        Pose::new(topology, coords)
    }

    pub fn to_flat(&self) -> DVector<f64> {
        DVector::from_iterator(
            D * self.coords.len(),
            self.coords.iter().flat_map(|c| c.iter().copied()),
        )
    }

    pub fn topology(&self) -> &Arc<JointTopology> {
        &self.topology
    }

    pub fn coords(&self) -> &[[f64; D]] {
        &self.coords
    }

    pub fn joint(&self, j: usize) -> [f64; D] {
        self.coords[j]
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// Frames sharing a single topology; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence<const D: usize> {
    topology: Arc<JointTopology>,
    frames: Vec<Pose<D>>,
}

pub type PoseSequence2D = PoseSequence<2>;
pub type PoseSequence3D = PoseSequence<3>;

impl<const D: usize> PoseSequence<D> {
    pub fn new(frames: Vec<Pose<D>>) -> Result<Self> {
        let topology = frames
            .first()
            .map(|f| f.topology.clone())
            .ok_or_else(|| Error::Structural("pose sequence must have at least one frame".into()))?;
        if let Some(t) = frames
            .iter()
            .position(|f| !same_topology(&f.topology, &topology))
        {
            return Err(Error::Structural(format!(
                "frame {t} uses a different topology from frame 0"
            )));
        }
        Ok(PoseSequence { topology, frames })
    }

    /// Builds a sequence from raw coordinate rows, one `Vec` per frame.
    pub fn from_coords(topology: Arc<JointTopology>, frames: Vec<Vec<[f64; D]>>) -> Result<Self> {
        let frames = frames
            .into_iter()
            .enumerate()
            .map(|(t, c)| Pose::new(topology.clone(), c).map_err(|e| e.in_frame(t)))
            .collect::<Result<Vec<_>>>()?;
        PoseSequence::new(frames)
    }

    pub fn topology(&self) -> &Arc<JointTopology> {
        &self.topology
    }

    pub fn frames(&self) -> &[Pose<D>] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Pose<D>> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// One joint coordinate followed through time.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSignal {
    pub values: Vec<f64>,
    pub joint: usize,
    pub axis: Axis,
}

/// Splits a 3D sequence into `3 * P` signals, ordered joint-major then axis.
pub fn sequence_to_signals(seq: &PoseSequence3D) -> Vec<JointSignal> {
    let p = seq.topology.len();
    let mut signals = Vec::with_capacity(3 * p);
    for joint in 0..p {
        for axis in Axis::ALL {
            signals.push(JointSignal {
                values: seq
                    .frames
                    .iter()
                    .map(|f| f.coords[joint][axis.index()])
                    .collect(),
                joint,
                axis,
            });
        }
    }
    signals
}

/// Inverse of [`sequence_to_signals`]; signals may arrive in any order.
pub fn signals_to_sequence(
    signals: &[JointSignal],
    topology: Arc<JointTopology>,
) -> Result<PoseSequence3D> {
    let p = topology.len();
    if signals.len() != 3 * p {
        return Err(Error::Structural(format!(
            "expected {} signals for {p} joints, got {}",
            3 * p,
            signals.len()
        )));
    }
    let n = signals[0].values.len();
    if n == 0 {
        return Err(Error::Structural("signals are empty".into()));
    }
    let mut slot: Vec<Option<&JointSignal>> = vec![None; 3 * p];
    for s in signals {
        if s.joint >= p {
            return Err(Error::Structural(format!(
                "signal references joint {} but topology has {p}",
                s.joint
            )));
        }
        if s.values.len() != n {
            return Err(Error::Structural(format!(
                "signal ({}, {}) has length {}, expected {n}",
                topology.name(s.joint),
                s.axis,
                s.values.len()
            )));
        }
        let k = 3 * s.joint + s.axis.index();
        if slot[k].replace(s).is_some() {
            return Err(Error::Structural(format!(
                "duplicate signal for ({}, {})",
                topology.name(s.joint),
                s.axis
            )));
        }
    }
    let slot: Vec<&JointSignal> = slot.into_iter().map(|s| s.expect("all slots filled")).collect();

    let frames = (0..n)
        .map(|t| {
            (0..p)
                .map(|j| {
                    [
                        slot[3 * j].values[t],
                        slot[3 * j + 1].values[t],
                        slot[3 * j + 2].values[t],
                    ]
                })
                .collect()
        })
        .collect();
    PoseSequence::from_coords(topology, frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_sequence(n: usize) -> PoseSequence3D {
        let topo = Arc::new(JointTopology::canonical());
        let frames = (0..n)
            .map(|t| {
                (0..topo.len())
                    .map(|j| [t as f64, j as f64 * 0.5, -(t as f64) - j as f64])
                    .collect()
            })
            .collect();
        PoseSequence::from_coords(topo, frames).unwrap()
    }

    #[test]
    fn canonical_topology_is_hip_rooted() {
        let t = JointTopology::canonical();
        assert_eq!(t.len(), 15);
        assert_eq!(t.name(t.root()), "hip");
        assert_eq!(t.limbs().len(), 14);
        assert!(t.is_limb(t.index_of("l-elbow").unwrap(), t.index_of("l-hand").unwrap()));
    }

    #[test]
    fn topology_rejects_bad_trees() {
        let names = |n: usize| (0..n).map(|i| format!("j{i}")).collect::<Vec<_>>();
        assert!(JointTopology::new(names(1), vec![None]).is_err());
        assert!(JointTopology::new(names(3), vec![None, None, Some(0)]).is_err());
        assert!(JointTopology::new(names(3), vec![Some(1), Some(0), Some(0)]).is_err());
        assert!(JointTopology::new(names(3), vec![None, Some(2), Some(1)]).is_err());
        assert!(JointTopology::new(names(2), vec![None, Some(1)]).is_err());
        assert!(
            JointTopology::new(vec!["a".into(), "a".into()], vec![None, Some(0)]).is_err()
        );
    }

    #[test]
    fn signals_count_and_values() {
        let seq = ramp_sequence(10);
        let sig = sequence_to_signals(&seq);
        assert_eq!(sig.len(), 45);
        assert!(sig.iter().all(|s| s.values.len() == 10));
        let hip_x = &sig[0];
        assert_eq!((hip_x.joint, hip_x.axis), (0, Axis::X));
        assert_eq!(hip_x.values[..3], [0.0, 1.0, 2.0]);
    }

    #[test]
    fn single_frame_signals() {
        let seq = ramp_sequence(1);
        for s in sequence_to_signals(&seq) {
            assert_eq!(s.values, vec![seq.frames()[0].joint(s.joint)[s.axis.index()]]);
        }
    }

    #[test]
    fn signal_round_trip_is_exact() {
        let seq = ramp_sequence(7);
        let back = signals_to_sequence(&sequence_to_signals(&seq), seq.topology().clone()).unwrap();
        assert_eq!(back, seq);

        let mut shuffled = sequence_to_signals(&seq);
        shuffled.reverse();
        assert_eq!(
            signals_to_sequence(&shuffled, seq.topology().clone()).unwrap(),
            seq
        );
    }

    #[test]
    fn signal_structure_errors() {
        let seq = ramp_sequence(4);
        let topo = seq.topology().clone();
        let mut sig = sequence_to_signals(&seq);

        let short = &sig[..44];
        assert!(matches!(
            signals_to_sequence(short, topo.clone()),
            Err(Error::Structural(_))
        ));

        sig[1].axis = Axis::X;
        assert!(matches!(
            signals_to_sequence(&sig, topo.clone()),
            Err(Error::Structural(_))
        ));

        let mut sig = sequence_to_signals(&seq);
        sig[5].values.pop();
        assert!(signals_to_sequence(&sig, topo).is_err());
    }

    #[test]
    fn flatten_is_joint_major() {
        let topo = Arc::new(JointTopology::canonical());
        let coords: Vec<[f64; 3]> = (0..15).map(|j| [j as f64, 10.0 + j as f64, 20.0]).collect();
        let pose = Pose::new(topo.clone(), coords).unwrap();
        let flat = pose.to_flat();
        assert_eq!(flat.len(), 45);
        assert_eq!(&flat.as_slice()[..6], &[0.0, 10.0, 20.0, 1.0, 11.0, 20.0]);
        assert_eq!(Pose::from_flat(topo, flat.as_slice()).unwrap(), pose);
    }

    #[test]
    fn pose_rejects_non_finite_and_wrong_size() {
        let topo = Arc::new(JointTopology::canonical());
        let mut c = vec![[0.0; 2]; 15];
        assert!(Pose::new(topo.clone(), c[..14].to_vec()).is_err());
        c[3][1] = f64::NAN;
        assert!(Pose::new(topo, c).is_err());
    }

    #[test]
    fn sequence_requires_shared_topology() {
        let a = Arc::new(JointTopology::canonical());
        let b = Arc::new(
            JointTopology::new(vec!["r".into(), "c".into()], vec![None, Some(0)]).unwrap(),
        );
        let f0 = Pose::new(a, vec![[0.0; 3]; 15]).unwrap();
        let f1 = Pose::new(b, vec![[0.0; 3]; 2]).unwrap();
        assert!(PoseSequence::new(vec![f0, f1]).is_err());
        assert!(PoseSequence::<3>::new(vec![]).is_err());
    }
}
