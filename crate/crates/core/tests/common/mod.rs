//! Synthetic skeletons, motions, cameras and dictionaries shared by the
//! integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, UnitQuaternion, Vector3, Vector4};
use poselift::camera::CameraParams;
use poselift::dictionary::{build_dictionary, CorpusGroup, PoseDictionary};
use poselift::skeleton::{JointTopology, Pose3D, PoseSequence, PoseSequence3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn topology() -> Arc<JointTopology> {
    Arc::new(JointTopology::canonical())
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    loop {
        let q = Vector4::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from_vector(q / n));
            return q.to_rotation_matrix().into_inner();
        }
    }
}

pub fn random_camera(rng: &mut ChaCha8Rng) -> CameraParams {
    let s = rng.random_range(0.5..2.0);
    CameraParams::new(s, random_rotation(rng)).unwrap()
}

/// Random point cloud with the first point at the origin; generic (rank 3).
pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    let mut pts: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]
        })
        .collect();
    pts[0] = [0.0; 3];
    pts
}

pub fn flatten(pts: &[[f64; 3]]) -> Vec<f64> {
    pts.iter().flatten().copied().collect()
}

// Bone offsets of the rest pose (child relative to parent), metres-ish.
const REST_OFFSETS: [[f64; 3]; 15] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.52, 0.0],
    [0.0, 0.22, 0.03],
    [0.19, -0.03, 0.0],
    [0.0, -0.29, 0.0],
    [0.0, -0.26, 0.0],
    [-0.19, -0.03, 0.0],
    [0.0, -0.29, 0.0],
    [0.0, -0.26, 0.0],
    [0.1, -0.03, 0.0],
    [0.0, -0.43, 0.0],
    [0.0, -0.42, 0.0],
    [-0.1, -0.03, 0.0],
    [0.0, -0.43, 0.0],
    [0.0, -0.42, 0.0],
];

/// Joint-angle channels driving the forward-kinematic skeleton.
#[derive(Clone, Copy, Debug)]
pub struct MotionParams {
    pub freq: f64,
    pub arm_swing: f64,
    pub leg_swing: f64,
    pub elbow_bend: f64,
    pub knee_bend: f64,
    pub lean: f64,
    pub turn: f64,
    pub phase: f64,
}

impl MotionParams {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        MotionParams {
            freq: rng.random_range(0.004..0.012),
            arm_swing: rng.random_range(0.2..0.9),
            leg_swing: rng.random_range(0.1..0.6),
            elbow_bend: rng.random_range(0.2..1.2),
            knee_bend: rng.random_range(0.1..0.9),
            lean: rng.random_range(0.0..0.3),
            turn: rng.random_range(0.0..0.8),
            phase: rng.random_range(0.0..2.0 * PI),
        }
    }
}

fn rot(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner()
}

/// Forward kinematics at time `t` (frames); band-limited joint angles.
pub fn fk_pose(m: &MotionParams, t: f64) -> [[f64; 3]; 15] {
    let w = 2.0 * PI * m.freq;
    let a = w * t + m.phase;
    let x = Vector3::x();
    let y = Vector3::y();
    let z = Vector3::z();

    let root = rot(y, m.turn * (0.5 * a).sin()) * rot(x, m.lean * (0.7 * a).sin());
    // local rotation of each joint relative to its parent
    let mut local = [Matrix3::identity(); 15];
    local[1] = rot(z, 0.1 * (1.3 * a).sin());
    local[2] = rot(x, 0.2 * (0.9 * a).cos());
    local[3] = rot(x, m.arm_swing * a.sin()) * rot(z, 0.3 + 0.2 * (0.6 * a).sin());
    local[4] = rot(x, -(m.elbow_bend * (0.5 + 0.5 * (a + 0.4).sin())));
    local[6] = rot(x, -m.arm_swing * a.sin()) * rot(z, -0.3 - 0.2 * (0.6 * a).cos());
    local[7] = rot(x, -(m.elbow_bend * (0.5 + 0.5 * (a + 2.0).sin())));
    local[9] = rot(x, m.leg_swing * (a + PI).sin()) * rot(z, 0.05 * (0.8 * a).sin());
    local[10] = rot(x, m.knee_bend * (0.5 + 0.5 * (a + 1.0).sin()));
    local[12] = rot(x, m.leg_swing * a.sin()) * rot(z, -0.05 * (0.8 * a).cos());
    local[13] = rot(x, m.knee_bend * (0.5 + 0.5 * (a + 4.0).sin()));

    let topo = JointTopology::canonical();
    let mut global = [Matrix3::identity(); 15];
    let mut pos = [Vector3::zeros(); 15];
    global[0] = root;
    for j in 1..15 {
        let p = topo.parents()[j].unwrap();
        // a bone's offset is rotated by the parent's frame
        pos[j] = pos[p] + global[p] * Vector3::from(REST_OFFSETS[j]);
        global[j] = global[p] * local[j];
    }
    let mut out = [[0.0; 3]; 15];
    for j in 0..15 {
        out[j] = [pos[j].x, pos[j].y, pos[j].z];
    }
    out
}

pub fn motion_sequence(m: &MotionParams, n: usize, t0: f64) -> PoseSequence3D {
    let topo = topology();
    let frames = (0..n)
        .map(|t| fk_pose(m, t0 + t as f64).to_vec())
        .collect();
    PoseSequence::from_coords(topo, frames).unwrap()
}

/// PCA dictionary from several synthetic action groups.
pub fn synthetic_dictionary(seed: u64, groups: usize, bases: usize) -> PoseDictionary {
    let mut r = rng(seed);
    let corpus: Vec<CorpusGroup> = (0..groups)
        .map(|g| {
            let base = MotionParams::random(&mut r);
            let sequences = (0..3)
                .map(|k| {
                    let mut m = base;
                    m.phase += k as f64;
                    m.freq *= 1.0 + 0.2 * k as f64;
                    motion_sequence(&m, 200, 0.0)
                })
                .collect();
            CorpusGroup {
                label: format!("action{g}"),
                sequences,
            }
        })
        .collect();
    build_dictionary(&corpus, bases).unwrap().dictionary
}

/// Rest pose at the origin plus random unit-norm columns (root rows zero).
pub fn random_dictionary(rng: &mut ChaCha8Rng, columns: usize) -> PoseDictionary {
    let topo = topology();
    let mean = DVector::from_vec(flatten(&fk_pose(
        &MotionParams {
            freq: 0.0,
            arm_swing: 0.0,
            leg_swing: 0.0,
            elbow_bend: 0.6,
            knee_bend: 0.3,
            lean: 0.0,
            turn: 0.0,
            phase: 0.0,
        },
        0.0,
    )));
    let mut basis = DMatrix::zeros(45, columns);
    for c in 0..columns {
        for r in 3..45 {
            basis[(r, c)] = rng.random_range(-1.0..1.0);
        }
        let n = basis.column(c).norm();
        basis.column_mut(c).unscale_mut(n);
    }
    PoseDictionary::new(topo, mean, basis, vec!["random".into(); columns]).unwrap()
}

pub fn pose(flat: &[f64]) -> Pose3D {
    Pose3D::from_flat(topology(), flat).unwrap()
}
