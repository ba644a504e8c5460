//! Weak-perspective camera: `x_j = s * R[0..2] * X_j`.
//!
//! Rotations follow the frame (passive) convention: a +90 degree turn about
//! x maps +z onto +y, so after projection the image y coordinate reads the
//! model's z coordinate.

use nalgebra::{Matrix2x3, Matrix3, Matrix4, Rotation3, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{Pose, PoseSequence, PoseSequence2D, PoseSequence3D};

const ORTHO_TOL: f64 = 1e-9;
pub const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera", into = "RawCamera")]
pub struct CameraParams {
    scale: f64,
    rotation: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawCamera {
    scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    euler_deg: Option<[f64; 3]>,
}

impl TryFrom<RawCamera> for CameraParams {
    type Error = Error;

    fn try_from(raw: RawCamera) -> Result<Self> {
        match (raw.rotation, raw.euler_deg) {
            (Some(rows), None) => {
                let r = Matrix3::from_fn(|i, j| rows[i][j]);
                CameraParams::new(raw.scale, r)
            }
            (None, Some(e)) => CameraParams::from_euler_deg(raw.scale, e),
            (None, None) => CameraParams::new(raw.scale, Matrix3::identity()),
            (Some(_), Some(_)) => Err(Error::Config(
                "camera takes either 'rotation' or 'euler_deg', not both".into(),
            )),
        }
    }
}

impl From<CameraParams> for RawCamera {
    fn from(c: CameraParams) -> Self {
        RawCamera {
            scale: c.scale,
            rotation: Some(std::array::from_fn(|i| {
                std::array::from_fn(|j| c.rotation[(i, j)])
            })),
            euler_deg: None,
        }
    }
}

impl CameraParams {
    pub fn new(scale: f64, rotation: Matrix3<f64>) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Structural(format!(
                "camera scale must be positive and finite, got {scale}"
            )));
        }
        if rotation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("camera rotation is not finite".into()));
        }
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if gram_err > ORTHO_TOL {
            return Err(Error::Structural(format!(
                "camera rotation is not orthonormal (|R^T R - I| = {gram_err:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::Structural(format!(
                "camera rotation must have determinant +1, got {det}"
            )));
        }
        Ok(CameraParams { scale, rotation })
    }

    pub fn identity() -> Self {
        CameraParams {
            scale: 1.0,
            rotation: Matrix3::identity(),
        }
    }

    /// Rotation about x, then y, then z (angles in degrees).
    pub fn from_euler_deg(scale: f64, angles: [f64; 3]) -> Result<Self> {
        let r = rotation_z(angles[2]) * rotation_y(angles[1]) * rotation_x(angles[0]);
        CameraParams::new(scale, r)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// First two rows of the rotation.
    pub fn image_rows(&self) -> Matrix2x3<f64> {
        self.rotation.fixed_rows::<2>(0).into_owned()
    }

    pub fn project_point(&self, p: [f64; 3]) -> [f64; 2] {
        let v = self.scale * self.image_rows() * Vector3::from(p);
        [v.x, v.y]
    }
}

pub fn rotation_x(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c)
}

pub fn rotation_y(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

pub fn rotation_z(deg: f64) -> Matrix3<f64> {
    let (s, c) = deg.to_radians().sin_cos();
    Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Projects a flattened 3D pose (joint-major, length `3P`) to `P` image points.
pub fn project(pose: &[f64], cam: &CameraParams) -> Vec<[f64; 2]> {
    debug_assert_eq!(pose.len() % 3, 0);
    pose.chunks_exact(3)
        .map(|c| cam.project_point([c[0], c[1], c[2]]))
        .collect()
}

pub fn orthographic_project_sequence(seq: &PoseSequence3D, view: &CameraParams) -> PoseSequence2D {
    let frames = seq
        .frames()
        .iter()
        .map(|f| {
            let coords = f.coords().iter().map(|&p| view.project_point(p)).collect();
            Pose::new(seq.topology().clone(), coords).expect("projection keeps joint count")
        })
        .collect();
    PoseSequence::new(frames).expect("projection keeps frame count")
}

/// Sum of squared image residuals after anchoring both point sets at `root`.
pub fn reprojection_error(
    observed: &[[f64; 2]],
    model: &[f64],
    root: usize,
    cam: &CameraParams,
) -> f64 {
    let (obs, pts) = anchored(observed, model, root);
    let m = cam.scale * cam.image_rows();
    obs.iter()
        .zip(&pts)
        .map(|(x, p)| (x - m * p).norm_squared())
        .sum()
}

fn anchored(observed: &[[f64; 2]], model: &[f64], root: usize) -> (Vec<Vector2<f64>>, Vec<Vector3<f64>>) {
    let o = Vector2::from(observed[root]);
    let m = Vector3::new(model[3 * root], model[3 * root + 1], model[3 * root + 2]);
    let obs = observed.iter().map(|&x| Vector2::from(x) - o).collect();
    let pts = model
        .chunks_exact(3)
        .map(|c| Vector3::new(c[0], c[1], c[2]) - m)
        .collect();
    (obs, pts)
}

/// Least-squares weak-perspective camera mapping `model` onto `observed`.
///
/// Both point sets are anchored at the root joint. The rotation is seeded
/// from the unconstrained linear fit and from the orthogonal Procrustes
/// solution of the cross-covariance, each projected onto scaled orthonormal
/// rows and completed to a proper rotation; the better seed is then polished
/// with damped Gauss-Newton steps on (rotation, scale).
pub fn fit_camera(observed: &[[f64; 2]], model: &[f64], root: usize) -> Result<CameraParams> {
    let p = observed.len();
    if model.len() != 3 * p {
        return Err(Error::Structural(format!(
            "model pose has length {}, expected {}",
            model.len(),
            3 * p
        )));
    }
    if p < 3 {
        return Err(Error::CameraFit(format!("need at least 3 joints, got {p}")));
    }
    let (obs, pts) = anchored(observed, model, root);

    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix2x3::zeros();
    for (x, q) in obs.iter().zip(&pts) {
        scatter += q * q.transpose();
        cross += x * q.transpose();
    }

    let sv = scatter.svd(true, true);
    let mut sigma: Vec<f64> = sv.singular_values.iter().copied().collect();
    sigma.sort_by(|a, b| b.total_cmp(a));
    if !(sigma[0] > 0.0) || sigma[1] <= 1e-12 * sigma[0] {
        return Err(Error::CameraFit(
            "model pose is degenerate (root-anchored joints are collinear)".into(),
        ));
    }

    let mut seeds = Vec::with_capacity(2);
    if let Ok(pinv) = sv.pseudo_inverse(1e-12 * sigma[0]) {
        seeds.push(cross * pinv);
    }
    seeds.push(cross);

    let mut best: Option<(f64, CameraParams)> = None;
    for seed in seeds {
        let Some(rows) = nearest_orthonormal_rows(&seed) else {
            continue;
        };
        let rotation = complete_rotation(&rows);
        let scale = optimal_scale(&obs, &pts, &rotation);
        let (cost, cam) = refine(&obs, &pts, rotation, scale);
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, cam));
        }
    }
    match best {
        Some((_, cam)) => Ok(cam),
        None => Err(Error::CameraFit("no usable rotation seed".into())),
    }
}

fn nearest_orthonormal_rows(m: &Matrix2x3<f64>) -> Option<Matrix2x3<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if m.amax() == 0.0 {
        return Some(Matrix2x3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
    }
    let svd = m.svd(true, true);
    let u = svd.u?;
    let v_t = svd.v_t?;
    Some(u * v_t)
}

fn complete_rotation(rows: &Matrix2x3<f64>) -> Matrix3<f64> {
    let r1 = rows.row(0).transpose().normalize();
    let mut r2 = rows.row(1).transpose();
    r2 = (r2 - r1 * r1.dot(&r2)).normalize();
    let r3 = r1.cross(&r2);
    Matrix3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()])
}

fn optimal_scale(obs: &[Vector2<f64>], pts: &[Vector3<f64>], rotation: &Matrix3<f64>) -> f64 {
    let rows = rotation.fixed_rows::<2>(0);
    let (mut num, mut den) = (0.0, 0.0);
    for (x, q) in obs.iter().zip(pts) {
        let y = rows * q;
        num += x.dot(&y);
        den += y.norm_squared();
    }
    if den > 0.0 {
        (num / den).max(MIN_SCALE)
    } else {
        MIN_SCALE
    }
}

fn cost(obs: &[Vector2<f64>], pts: &[Vector3<f64>], rotation: &Matrix3<f64>, scale: f64) -> f64 {
    let m = scale * rotation.fixed_rows::<2>(0);
    obs.iter()
        .zip(pts)
        .map(|(x, q)| (x - m * q).norm_squared())
        .sum()
}

fn refine(
    obs: &[Vector2<f64>],
    pts: &[Vector3<f64>],
    mut rotation: Matrix3<f64>,
    mut scale: f64,
) -> (f64, CameraParams) {
    let mut current = cost(obs, pts, &rotation, scale);
    let mut damping: f64 = 1e-6;
    for _ in 0..100 {
        if current == 0.0 {
            break;
        }
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (x, q) in obs.iter().zip(pts) {
            let y = rotation * q;
            let r = x - scale * Vector2::new(y.x, y.y);
            // d r / d(delta): s * P * [y]x ; d r / d s: -P y
            let cols = [
                Vector2::new(0.0, -y.z) * scale,
                Vector2::new(y.z, 0.0) * scale,
                Vector2::new(-y.y, y.x) * scale,
                Vector2::new(-y.x, -y.y),
            ];
            for a in 0..4 {
                jtr[a] += cols[a].dot(&r);
                for b in 0..4 {
                    jtj[(a, b)] += cols[a].dot(&cols[b]);
                }
            }
        }
        let mut improved = false;
        for _ in 0..8 {
            let mut lhs = jtj;
            for d in 0..4 {
                lhs[(d, d)] += damping * (1.0 + jtj[(d, d)]);
            }
            let Some(step): Option<Vector4<f64>> = lhs.cholesky().map(|c| c.solve(&(-jtr))) else {
                damping *= 10.0;
                continue;
            };
            let delta = Vector3::new(step[0], step[1], step[2]);
            let cand_rot = Rotation3::new(delta).into_inner() * rotation;
            let cand_scale = (scale + step[3]).max(MIN_SCALE);
            let cand = cost(obs, pts, &cand_rot, cand_scale);
            if cand < current {
                let gain = current - cand;
                rotation = cand_rot;
                scale = cand_scale;
                current = cand;
                damping = (damping * 0.1).max(1e-12);
                improved = gain > 1e-15 * current.max(1e-300);
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let cam = CameraParams {
        scale,
        rotation: reorthonormalize(&rotation),
    };
    (cost(obs, pts, &cam.rotation, cam.scale), cam)
}

fn reorthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    complete_rotation(&r.fixed_rows::<2>(0).into_owned())
}
