//! Per-joint validity from a static table of hinge-angle limits.
//!
//! A hinge is two bones meeting at a vertex joint; its interior angle is the
//! angle between the directions from the vertex to the two far joints, so a
//! straight limb measures 180 degrees.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{same_topology, JointTopology, Pose3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitsMode {
    /// Joints without an entry are invalid.
    Strict,
    /// Joints without an entry are valid.
    Permissive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeLimit {
    pub vertex: usize,
    /// Far end of the first bone.
    pub a: usize,
    /// Far end of the second bone.
    pub b: usize,
    pub min_deg: f64,
    pub max_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsModel {
    topology: Arc<JointTopology>,
    mode: LimitsMode,
    entries: Vec<HingeLimit>,
}

impl LimitsModel {
    pub fn new(
        topology: Arc<JointTopology>,
        mode: LimitsMode,
        entries: Vec<HingeLimit>,
    ) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            let p = topology.len();
            if e.vertex >= p || e.a >= p || e.b >= p {
                return Err(Error::Structural(format!(
                    "limit entry {k} references a joint outside the topology"
                )));
            }
            if e.a == e.b || !topology.is_limb(e.a, e.vertex) || !topology.is_limb(e.vertex, e.b) {
                return Err(Error::Structural(format!(
                    "limit entry {k} at '{}' does not name two distinct bones",
                    topology.name(e.vertex)
                )));
            }
            if !(0.0..=180.0).contains(&e.min_deg)
                || !(0.0..=180.0).contains(&e.max_deg)
                || e.min_deg > e.max_deg
            {
                return Err(Error::Structural(format!(
                    "limit entry {k} has bounds [{}, {}], need 0 <= min <= max <= 180",
                    e.min_deg, e.max_deg
                )));
            }
        }
        Ok(LimitsModel {
            topology,
            mode,
            entries,
        })
    }

    /// No entries; every joint is valid.
    pub fn permissive(topology: Arc<JointTopology>) -> Self {
        LimitsModel {
            topology,
            mode: LimitsMode::Permissive,
            entries: Vec::new(),
        }
    }

    /// Elbows and knees limited to an interior angle of [30, 180] degrees,
    /// everything else permissive. Hinges whose joints are missing from the
    /// topology are left out.
    pub fn default_for(topology: Arc<JointTopology>) -> Self {
        let mut entries = Vec::new();
        for side in ["l", "r"] {
            for (upper, mid, lower) in [("shoulder", "elbow", "hand"), ("hip", "knee", "foot")] {
                let idx = |n: &str| topology.index_of(&format!("{side}-{n}"));
                if let (Some(a), Some(v), Some(b)) = (idx(upper), idx(mid), idx(lower)) {
                    if topology.is_limb(a, v) && topology.is_limb(v, b) {
                        entries.push(HingeLimit {
                            vertex: v,
                            a,
                            b,
                            min_deg: 30.0,
                            max_deg: 180.0,
                        });
                    }
                }
            }
        }
        LimitsModel {
            topology,
            mode: LimitsMode::Permissive,
            entries,
        }
    }

    pub fn topology(&self) -> &Arc<JointTopology> {
        &self.topology
    }

    pub fn mode(&self) -> LimitsMode {
        self.mode
    }

    pub fn entries(&self) -> &[HingeLimit] {
        &self.entries
    }
}

/// Angle at `vertex` between the bones towards `a` and `b`, in degrees.
/// `None` when either bone has zero length.
pub fn interior_angle(a: [f64; 3], vertex: [f64; 3], b: [f64; 3]) -> Option<f64> {
    let u: [f64; 3] = std::array::from_fn(|i| a[i] - vertex[i]);
    let v: [f64; 3] = std::array::from_fn(|i| b[i] - vertex[i]);
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 || !(nu * nv).is_finite() {
        return None;
    }
    let cos = u.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() / (nu * nv);
    Some(cos.clamp(-1.0, 1.0).acos().to_degrees())
}

/// Per-joint verdicts, `true` meaning valid.
pub fn is_valid(pose: &Pose3D, model: &LimitsModel) -> Result<Vec<bool>> {
    if !same_topology(pose.topology(), &model.topology) {
        return Err(Error::Structural(
            "limits model and pose use different topologies".into(),
        ));
    }
    let default = model.mode == LimitsMode::Permissive;
    let mut covered = vec![false; pose.len()];
    let mut valid = vec![true; pose.len()];
    for e in &model.entries {
        covered[e.vertex] = true;
        let ok = interior_angle(pose.joint(e.a), pose.joint(e.vertex), pose.joint(e.b))
            .is_some_and(|deg| deg >= e.min_deg && deg <= e.max_deg);
        valid[e.vertex] &= ok;
    }
    for (v, c) in valid.iter_mut().zip(&covered) {
        if !c {
            *v = default;
        }
    }
    Ok(valid)
}

pub fn pose_is_valid(pose: &Pose3D, model: &LimitsModel) -> Result<bool> {
    Ok(is_valid(pose, model)?.into_iter().all(|v| v))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LimitsDoc {
    mode: LimitsMode,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    vertex_joint: String,
    limb_a: [String; 2],
    limb_b: [String; 2],
    min_deg: f64,
    max_deg: f64,
}

pub fn limits_to_json(model: &LimitsModel) -> String {
    let name = |j: usize| model.topology.name(j).to_string();
    let doc = LimitsDoc {
        mode: model.mode,
        entries: model
            .entries
            .iter()
            .map(|e| EntryDoc {
                vertex_joint: name(e.vertex),
                limb_a: [name(e.a), name(e.vertex)],
                limb_b: [name(e.vertex), name(e.b)],
                min_deg: e.min_deg,
                max_deg: e.max_deg,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("limits serialize")
}

pub fn limits_from_json(
    text: &str,
    source_name: &str,
    topology: Arc<JointTopology>,
) -> Result<LimitsModel> {
    let doc: LimitsDoc =
        serde_json::from_str(text).map_err(|e| Error::load(source_name, e.to_string()))?;
    let fail = |k: usize, msg: String| Error::load(source_name, format!("entries[{k}]: {msg}"));
    let mut entries = Vec::with_capacity(doc.entries.len());
    for (k, e) in doc.entries.iter().enumerate() {
        let idx = |n: &str| {
            topology
                .index_of(n)
                .ok_or_else(|| fail(k, format!("unknown joint '{n}'")))
        };
        let vertex = idx(&e.vertex_joint)?;
        if e.limb_a[1] != e.vertex_joint || e.limb_b[0] != e.vertex_joint {
            return Err(fail(
                k,
                format!("limbs must meet at vertex '{}'", e.vertex_joint),
            ));
        }
        entries.push(HingeLimit {
            vertex,
            a: idx(&e.limb_a[0])?,
            b: idx(&e.limb_b[1])?,
            min_deg: e.min_deg,
            max_deg: e.max_deg,
        });
    }
    LimitsModel::new(topology, doc.mode, entries).map_err(|e| Error::load(source_name, e.to_string()))
}

pub fn load_limits(path: &Path, topology: Arc<JointTopology>) -> Result<LimitsModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    limits_from_json(&text, &path.display().to_string(), topology)
}

pub fn save_limits(model: &LimitsModel, path: &Path) -> Result<()> {
    std::fs::write(path, limits_to_json(model) + "\n").map_err(|e| Error::io(path, e))
}
