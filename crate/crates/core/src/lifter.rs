//! Per-frame 2D-to-3D lifting by greedy matching pursuit over the pose
//! dictionary.
//!
//! The model pose is `mean + B* w` and is observed through a weak-perspective
//! camera. The objective is the squared image residual plus a limb-length
//! penalty keeping bones near the mean pose's lengths. Image points and model
//! joints are both anchored at the root joint, which removes translation.
//!
//! Each greedy step adds the column whose least-squares coefficient (at the
//! current camera) lowers the objective most, then alternates a joint
//! coefficient refit with a camera refit and finishes with a joint polish.
//! Updates that would raise the objective are rejected, so the objective never
//! increases between steps. The whole pursuit is repeated from several
//! initial camera orientations because a poor first camera leads the greedy
//! choice astray.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{fit_camera, rotation_x, rotation_y, CameraParams};
use crate::dictionary::{reconstruct_pose, PoseDictionary, SparseCode};
use crate::error::{Error, Result};
use crate::limits::{pose_is_valid, LimitsModel};
use crate::skeleton::{same_topology, JointTopology, Pose2D, Pose3D, PoseSequence2D};

/// Size of the fixed set of start orientations.
pub const MAX_CAMERA_STARTS: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftConfig {
    /// Maximum number of dictionary columns in the code.
    pub max_bases: usize,
    /// Stop when the best greedy decrease, or the change over one
    /// coefficient/camera alternation, falls below this.
    pub residual_tol: f64,
    /// Weight of the limb-length penalty.
    pub anthro_weight: f64,
    pub max_alternations: usize,
    /// Also consider the depth-mirrored pose as a candidate.
    pub candidate_flips: bool,
    /// Number of initial camera orientations the pursuit is started from.
    /// Start `q` turns the mean-pose camera by `30 (q mod 12)` degrees about
    /// the image vertical axis and `90 (q / 12)` degrees about the image
    /// horizontal axis. The lowest final objective wins.
    pub camera_starts: usize,
    /// Code size at which the starts are compared.
    pub probe_bases: usize,
    /// Starts pursued to `max_bases` after the comparison.
    pub finalists: usize,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig {
            max_bases: 10,
            residual_tol: 1e-8,
            anthro_weight: 0.1,
            max_alternations: 10,
            candidate_flips: true,
            camera_starts: MAX_CAMERA_STARTS,
            probe_bases: 3,
            finalists: 2,
        }
    }
}

impl LiftConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol >= 0.0 && self.residual_tol.is_finite()) {
            return Err(Error::Config(format!(
                "residual_tol must be a non-negative number, got {}",
                self.residual_tol
            )));
        }
        if !(self.anthro_weight >= 0.0 && self.anthro_weight.is_finite()) {
            return Err(Error::Config(format!(
                "anthro_weight must be a non-negative number, got {}",
                self.anthro_weight
            )));
        }
        if self.max_alternations == 0 {
            return Err(Error::Config("max_alternations must be at least 1".into()));
        }
        if self.probe_bases == 0 || self.finalists == 0 {
            return Err(Error::Config("probe_bases and finalists must be at least 1".into()));
        }
        if !(1..=MAX_CAMERA_STARTS).contains(&self.camera_starts) {
            return Err(Error::Config(format!(
                "camera_starts must be between 1 and {MAX_CAMERA_STARTS}, got {}",
                self.camera_starts
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftResult {
    /// Recovered pose in camera coordinates.
    pub pose: Pose3D,
    pub code: SparseCode,
    pub camera: CameraParams,
    /// Objective value of the returned candidate.
    pub residual: f64,
    /// Verdict of the limits gate for the returned candidate.
    pub valid: bool,
    /// Greedy steps taken.
    pub iterations: usize,
    /// Objective after initialization and after every greedy step.
    pub objective_trace: Vec<f64>,
    /// True when the depth-mirrored candidate was returned.
    pub flipped: bool,
}

/// Objective of a code/camera pair against an observation.
pub fn objective(
    obs: &Pose2D,
    code: &SparseCode,
    cam: &CameraParams,
    dict: &PoseDictionary,
    anthro_weight: f64,
) -> Result<f64> {
    if !same_topology(obs.topology(), dict.topology()) {
        return Err(Error::Structural(
            "observation and dictionary use different topologies".into(),
        ));
    }
    let model = reconstruct_pose(dict, code)?;
    let topo = dict.topology();
    let root = topo.root();
    let image = obs.coords();
    let m = cam.scale() * cam.image_rows();
    let joint = |v: &DVector<f64>, j: usize| Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]);
    let mut total = 0.0;
    for j in 0..topo.len() {
        let x = nalgebra::Vector2::new(image[j][0] - image[root][0], image[j][1] - image[root][1]);
        total += (x - m * (joint(&model, j) - joint(&model, root))).norm_squared();
    }
    if anthro_weight > 0.0 {
        let mean = dict.mean();
        for &(p, c) in topo.limbs() {
            let len = (joint(&model, c) - joint(&model, p)).norm();
            let reference = (joint(mean, c) - joint(mean, p)).norm();
            total += anthro_weight * (len - reference).powi(2);
        }
    }
    Ok(total)
}

/// Dictionary data re-anchored at the root joint, shared by every frame.
pub struct Lifter<'a> {
    dict: &'a PoseDictionary,
    limits: &'a LimitsModel,
    cfg: LiftConfig,
    root: usize,
    joints: usize,
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    limbs: Vec<(usize, usize)>,
    ref_lengths: Vec<f64>,
}

struct Pursuit {
    st: State,
    trace: Vec<f64>,
    steps: usize,
    finished: bool,
}

struct State {
    indices: Vec<usize>,
    weights: Vec<f64>,
    cam: CameraParams,
    model: DVector<f64>,
    objective: f64,
}

impl<'a> Lifter<'a> {
    pub fn new(dict: &'a PoseDictionary, limits: &'a LimitsModel, cfg: LiftConfig) -> Result<Self> {
        cfg.validate()?;
        if !same_topology(dict.topology(), limits.topology()) {
            return Err(Error::Structural(
                "dictionary and limits model use different topologies".into(),
            ));
        }
        let topo: &JointTopology = dict.topology();
        let root = topo.root();
        let joints = topo.len();
        let mut mean = dict.mean().clone();
        let mut basis = dict.basis().clone();
        anchor_rows(&mut mean, root, joints);
        for mut col in basis.column_iter_mut() {
            let anchor: Vector3<f64> = col.fixed_rows::<3>(3 * root).into_owned();
            for j in 0..joints {
                let mut r = col.fixed_rows_mut::<3>(3 * j);
                r -= anchor;
            }
        }
        let limbs = topo.limbs().to_vec();
        let ref_lengths = limbs
            .iter()
            .map(|&(p, c)| (point(&mean, c) - point(&mean, p)).norm())
            .collect();
        Ok(Lifter {
            dict,
            limits,
            cfg,
            root,
            joints,
            mean,
            basis,
            limbs,
            ref_lengths,
        })
    }

    pub fn config(&self) -> &LiftConfig {
        &self.cfg
    }

    fn anchored_obs(&self, obs: &Pose2D) -> Vec<[f64; 2]> {
        let o = obs.joint(self.root);
        obs.coords()
            .iter()
            .map(|c| [c[0] - o[0], c[1] - o[1]])
            .collect()
    }

    fn model(&self, indices: &[usize], weights: &[f64]) -> DVector<f64> {
        let mut m = self.mean.clone();
        for (&i, &w) in indices.iter().zip(weights) {
            m.axpy(w, &self.basis.column(i), 1.0);
        }
        m
    }

    fn reprojection(&self, obs: &[[f64; 2]], model: &DVector<f64>, cam: &CameraParams) -> f64 {
        let m = cam.scale() * cam.image_rows();
        (0..self.joints)
            .map(|j| {
                let p = m * point(model, j);
                (obs[j][0] - p.x).powi(2) + (obs[j][1] - p.y).powi(2)
            })
            .sum()
    }

    fn limb_penalty(&self, model: &DVector<f64>) -> f64 {
        if self.cfg.anthro_weight == 0.0 {
            return 0.0;
        }
        let dev: f64 = self
            .limbs
            .iter()
            .zip(&self.ref_lengths)
            .map(|(&(p, c), r)| ((point(model, c) - point(model, p)).norm() - r).powi(2))
            .sum();
        self.cfg.anthro_weight * dev
    }

    fn evaluate(&self, obs: &[[f64; 2]], model: &DVector<f64>, cam: &CameraParams) -> f64 {
        self.reprojection(obs, model, cam) + self.limb_penalty(model)
    }

    /// Image-space residual `obs - s R12 model`, stacked as a `2P` vector.
    fn image_residual(&self, obs: &[[f64; 2]], model: &DVector<f64>, cam: &CameraParams) -> DVector<f64> {
        let m = cam.scale() * cam.image_rows();
        DVector::from_iterator(
            2 * self.joints,
            (0..self.joints).flat_map(|j| {
                let p = m * point(model, j);
                [obs[j][0] - p.x, obs[j][1] - p.y]
            }),
        )
    }

    /// `s (I x R12) b_i` for each listed column.
    fn projected_columns(&self, cam: &CameraParams, indices: &[usize]) -> DMatrix<f64> {
        let m = cam.scale() * cam.image_rows();
        let mut out = DMatrix::zeros(2 * self.joints, indices.len());
        for (k, &i) in indices.iter().enumerate() {
            let col = self.basis.column(i);
            for j in 0..self.joints {
                let p = m * col.fixed_rows::<3>(3 * j);
                out[(2 * j, k)] = p.x;
                out[(2 * j + 1, k)] = p.y;
            }
        }
        out
    }

    fn state(&self, obs: &[[f64; 2]], indices: Vec<usize>, weights: Vec<f64>, cam: CameraParams) -> State {
        let model = self.model(&indices, &weights);
        let objective = self.evaluate(obs, &model, &cam);
        State {
            indices,
            weights,
            cam,
            model,
            objective,
        }
    }

    /// Unselected columns as `(index, coefficient, decrease)`, best first;
    /// ties keep the lower index first.
    fn ranked_columns(&self, obs: &[[f64; 2]], st: &State) -> Vec<(usize, f64, f64)> {
        let residual = self.image_residual(obs, &st.model, &st.cam);
        let unselected: Vec<usize> = (0..self.basis.ncols())
            .filter(|i| !st.indices.contains(i))
            .collect();
        let projected = self.projected_columns(&st.cam, &unselected);
        let mut ranked = Vec::with_capacity(unselected.len());
        for (k, &i) in unselected.iter().enumerate() {
            let a = projected.column(k);
            let den = a.norm_squared();
            if !(den > 1e-300) {
                continue;
            }
            let coef = a.dot(&residual) / den;
            let decrease = if self.cfg.anthro_weight == 0.0 {
                coef * coef * den
            } else {
                let mut model = st.model.clone();
                model.axpy(coef, &self.basis.column(i), 1.0);
                st.objective - self.evaluate(obs, &model, &st.cam)
            };
            ranked.push((i, coef, decrease));
        }
        ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
        ranked
    }

    /// Coefficients minimizing the objective at a fixed camera.
    fn refit_coefficients(&self, obs: &[[f64; 2]], st: &State) -> Vec<f64> {
        let a = self.projected_columns(&st.cam, &st.indices);
        let base = self.image_residual(obs, &self.mean, &st.cam);
        let linear = least_squares(&a, &base).unwrap_or_else(|| st.weights.clone());
        if self.cfg.anthro_weight == 0.0 {
            return linear;
        }

        // Damped Gauss-Newton on the stacked image and limb residuals, started
        // from whichever of the current and unregularized weights is better.
        let cost = |w: &[f64]| self.evaluate(obs, &self.model(&st.indices, w), &st.cam);
        let (mut w, mut current) = {
            let c_lin = cost(&linear);
            if c_lin < st.objective {
                (linear, c_lin)
            } else {
                (st.weights.clone(), st.objective)
            }
        };
        let sqrt_l = self.cfg.anthro_weight.sqrt();
        let k = w.len();
        let mut damping = 1e-6;
        for _ in 0..30 {
            let model = self.model(&st.indices, &w);
            let rows = 2 * self.joints + self.limbs.len();
            let mut jac = DMatrix::zeros(rows, k);
            let mut res = DVector::zeros(rows);
            let img = self.image_residual(obs, &model, &st.cam);
            res.rows_mut(0, 2 * self.joints).copy_from(&img);
            jac.view_mut((0, 0), (2 * self.joints, k)).copy_from(&(-&a));
            for (l, (&(p, c), r)) in self.limbs.iter().zip(&self.ref_lengths).enumerate() {
                let d = point(&model, c) - point(&model, p);
                let len = d.norm();
                let row = 2 * self.joints + l;
                res[row] = sqrt_l * (len - r);
                if len > 0.0 {
                    let u = d / len;
                    for (kk, &i) in st.indices.iter().enumerate() {
                        let col = self.basis.column(i);
                        let db = col.fixed_rows::<3>(3 * c) - col.fixed_rows::<3>(3 * p);
                        jac[(row, kk)] = sqrt_l * u.dot(&db);
                    }
                }
            }
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &res;
            let mut improved = false;
            for _ in 0..8 {
                let mut lhs = jtj.clone();
                for d in 0..k {
                    lhs[(d, d)] += damping * (1.0 + jtj[(d, d)]);
                }
                let Some(step) = lhs.cholesky().map(|ch| ch.solve(&(-&jtr))) else {
                    damping *= 10.0;
                    continue;
                };
                let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let c = cost(&cand);
                if c < current {
                    improved = current - c > 1e-15 * current.max(1e-300);
                    w = cand;
                    current = c;
                    damping = (damping * 0.1).max(1e-12);
                    break;
                }
                damping *= 10.0;
            }
            if !improved {
                break;
            }
        }
        w
    }

    /// Alternates coefficient and camera refits, keeping only improvements.
    fn alternate(&self, obs: &[[f64; 2]], mut st: State) -> State {
        for _ in 0..self.cfg.max_alternations {
            let before = st.objective;
            let weights = self.refit_coefficients(obs, &st);
            let cand = self.state(obs, st.indices.clone(), weights, st.cam);
            if cand.objective <= st.objective {
                st = cand;
            }
            let flat: Vec<f64> = st.model.iter().copied().collect();
            if let Ok(cam) = fit_camera(obs, &flat, self.root) {
                let obj = self.evaluate(obs, &st.model, &cam);
                if obj <= st.objective {
                    st.cam = cam;
                    st.objective = obj;
                }
            }
            if before - st.objective < self.cfg.residual_tol {
                break;
            }
        }
        self.polish(obs, st)
    }

    /// Damped Gauss-Newton over coefficients, rotation and scale together.
    /// Block alternation crawls along the coupled valley between camera and
    /// shape; a joint step does not.
    fn polish(&self, obs: &[[f64; 2]], mut st: State) -> State {
        let k = st.indices.len();
        let n = k + 4;
        let sqrt_l = self.cfg.anthro_weight.sqrt();
        let rows = 2 * self.joints + if sqrt_l > 0.0 { self.limbs.len() } else { 0 };
        let mut damping = 1e-4;
        for _ in 0..100 {
            let r = *st.cam.rotation();
            let s = st.cam.scale();
            let mut jac = DMatrix::zeros(rows, n);
            let mut res = DVector::zeros(rows);
            res.rows_mut(0, 2 * self.joints)
                .copy_from(&self.image_residual(obs, &st.model, &st.cam));
            for j in 0..self.joints {
                let rm = r * point(&st.model, j);
                for (kk, &i) in st.indices.iter().enumerate() {
                    let rb = r * self.basis.column(i).fixed_rows::<3>(3 * j);
                    jac[(2 * j, kk)] = -s * rb.x;
                    jac[(2 * j + 1, kk)] = -s * rb.y;
                }
                // rotation perturbed as exp([d]x) R, so d(R m) = d x (R m)
                jac[(2 * j, k)] = 0.0;
                jac[(2 * j, k + 1)] = -s * rm.z;
                jac[(2 * j, k + 2)] = s * rm.y;
                jac[(2 * j + 1, k)] = s * rm.z;
                jac[(2 * j + 1, k + 1)] = 0.0;
                jac[(2 * j + 1, k + 2)] = -s * rm.x;
                jac[(2 * j, k + 3)] = -rm.x;
                jac[(2 * j + 1, k + 3)] = -rm.y;
            }
            if sqrt_l > 0.0 {
                for (l, (&(p, c), len_ref)) in self.limbs.iter().zip(&self.ref_lengths).enumerate() {
                    let d = point(&st.model, c) - point(&st.model, p);
                    let len = d.norm();
                    let row = 2 * self.joints + l;
                    res[row] = sqrt_l * (len - len_ref);
                    if len > 0.0 {
                        let u = d / len;
                        for (kk, &i) in st.indices.iter().enumerate() {
                            let col = self.basis.column(i);
                            let db = col.fixed_rows::<3>(3 * c) - col.fixed_rows::<3>(3 * p);
                            jac[(row, kk)] = sqrt_l * u.dot(&db);
                        }
                    }
                }
            }
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * &res;
            let mut improved = false;
            for _ in 0..10 {
                let mut lhs = jtj.clone();
                for d in 0..n {
                    lhs[(d, d)] += damping * (1.0 + jtj[(d, d)]);
                }
                let Some(step) = lhs.cholesky().map(|ch| ch.solve(&(-&jtr))) else {
                    damping *= 10.0;
                    continue;
                };
                let weights: Vec<f64> = st.weights.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let turn = nalgebra::Rotation3::new(Vector3::new(step[k], step[k + 1], step[k + 2]));
                let scale = s + step[k + 3];
                let cam = match CameraParams::new(scale, turn.into_inner() * r) {
                    Ok(cam) if scale > 0.0 => cam,
                    _ => {
                        damping *= 10.0;
                        continue;
                    }
                };
                let cand = self.state(obs, st.indices.clone(), weights, cam);
                if cand.objective < st.objective {
                    improved = st.objective - cand.objective > 1e-14 * st.objective;
                    st = cand;
                    damping = (damping * 0.1).max(1e-12);
                    break;
                }
                damping *= 10.0;
            }
            if !improved {
                break;
            }
        }
        st
    }

    fn start(&self, x: &[[f64; 2]], cam: CameraParams) -> Pursuit {
        let st = self.state(x, Vec::new(), Vec::new(), cam);
        Pursuit {
            trace: vec![st.objective],
            st,
            steps: 0,
            finished: false,
        }
    }

    /// Greedy steps until the code holds `limit` columns or no column helps.
    fn advance(&self, x: &[[f64; 2]], run: &mut Pursuit, limit: usize) {
        while !run.finished && run.st.indices.len() < limit {
            let st = &run.st;
            let next = self.ranked_columns(x, st).first().copied();
            let Some((col, coef, _)) =
                next.filter(|&(_, _, d)| d >= self.cfg.residual_tol && d > 0.0)
            else {
                run.finished = true;
                break;
            };
            let mut indices = st.indices.clone();
            let mut weights = st.weights.clone();
            indices.push(col);
            weights.push(coef);
            let grown = self.state(x, indices, weights, st.cam);
            debug_assert!(grown.objective <= st.objective + 1e-12 * st.objective.max(1.0));
            run.st = self.alternate(x, grown);
            debug_assert!(run.st.objective <= *run.trace.last().expect("trace starts non-empty"));
            run.trace.push(run.st.objective);
            run.steps += 1;
        }
        if run.st.indices.len() >= self.cfg.max_bases {
            run.finished = true;
        }
    }

    pub fn lift(&self, obs: &Pose2D) -> Result<LiftResult> {
        if !same_topology(obs.topology(), self.dict.topology()) {
            return Err(Error::Structural(
                "observation and dictionary use different topologies".into(),
            ));
        }
        let x = self.anchored_obs(obs);
        let mean_flat: Vec<f64> = self.mean.iter().copied().collect();
        let cam = fit_camera(&x, &mean_flat, self.root).map_err(|e| {
            Error::Lift(format!("cannot fit a camera to the mean pose: {e}"))
        })?;
        // Every start is probed with a short pursuit; the most promising
        // ones are then pursued to the full code size.
        let probe = self.cfg.probe_bases.min(self.cfg.max_bases);
        let mut runs: Vec<Pursuit> = Vec::with_capacity(self.cfg.camera_starts);
        for q in 0..self.cfg.camera_starts {
            let turn = rotation_x(90.0 * (q / 12) as f64) * rotation_y(30.0 * (q % 12) as f64);
            let Ok(cam) = CameraParams::new(cam.scale(), turn * cam.rotation()) else {
                continue;
            };
            let mut run = self.start(&x, cam);
            self.advance(&x, &mut run, probe);
            let exact = run.st.objective <= self.cfg.residual_tol;
            runs.push(run);
            // nothing meaningfully lower remains to be found
            if exact {
                break;
            }
        }
        // stable sort keeps start order among ties
        runs.sort_by(|a, b| a.st.objective.total_cmp(&b.st.objective));
        runs.truncate(self.cfg.finalists);
        for run in &mut runs {
            self.advance(&x, run, self.cfg.max_bases);
        }
        let Pursuit { st, trace, steps, .. } = runs
            .into_iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.st.objective.total_cmp(&b.st.objective).then(i.cmp(j)))
            .map(|(_, r)| r)
            .expect("the unturned start always exists");

        let code = SparseCode::new(st.indices.clone(), st.weights.clone())?;
        let full = reconstruct_pose(self.dict, &code)?;
        let topo = self.dict.topology().clone();

        let mut candidates = vec![(
            rotate(&full, st.cam.rotation(), &topo)?,
            st.cam,
            st.objective,
            false,
        )];
        if self.cfg.candidate_flips {
            // mirror depth in the camera frame and express it back in the model frame
            let r = st.cam.rotation();
            let mirror = r.transpose() * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)) * r;
            let mirrored = transform_points(&st.model, &mirror);
            let flat: Vec<f64> = mirrored.iter().copied().collect();
            if let Ok(cam) = fit_camera(&x, &flat, self.root) {
                let residual = self.evaluate(&x, &mirrored, &cam);
                let mirrored_full = transform_points(&full, &mirror);
                candidates.push((rotate(&mirrored_full, cam.rotation(), &topo)?, cam, residual, true));
            }
        }

        let mut verdicts = Vec::with_capacity(candidates.len());
        for (pose, ..) in &candidates {
            verdicts.push(pose_is_valid(pose, self.limits)?);
        }
        let pick = |want_valid: bool| {
            candidates
                .iter()
                .zip(&verdicts)
                .enumerate()
                .filter(|(_, (_, v))| !want_valid || **v)
                .min_by(|(ia, (a, _)), (ib, (b, _))| a.2.total_cmp(&b.2).then(ia.cmp(ib)))
                .map(|(i, _)| i)
        };
        let chosen = pick(true).or_else(|| pick(false)).expect("at least one candidate");
        let (pose, camera, residual, flipped) = candidates.swap_remove(chosen);
        Ok(LiftResult {
            pose,
            code,
            camera,
            residual,
            valid: verdicts[chosen],
            iterations: steps,
            objective_trace: trace,
            flipped,
        })
    }
}

fn point(v: &DVector<f64>, j: usize) -> Vector3<f64> {
    Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2])
}

fn anchor_rows(v: &mut DVector<f64>, root: usize, joints: usize) {
    let anchor = point(v, root);
    for j in 0..joints {
        let mut r = v.fixed_rows_mut::<3>(3 * j);
        r -= anchor;
    }
}

fn transform_points(v: &DVector<f64>, m: &Matrix3<f64>) -> DVector<f64> {
    let mut out = v.clone();
    for j in 0..v.len() / 3 {
        out.fixed_rows_mut::<3>(3 * j).copy_from(&(m * point(v, j)));
    }
    out
}

fn rotate(flat: &DVector<f64>, r: &Matrix3<f64>, topo: &Arc<JointTopology>) -> Result<Pose3D> {
    let rotated = transform_points(flat, r);
    Pose3D::from_flat(topo.clone(), rotated.as_slice())
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vec<f64>> {
    if a.ncols() == 0 {
        return Some(Vec::new());
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.max();
    let x = svd.solve(b, 1e-12 * top.max(f64::MIN_POSITIVE)).ok()?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

pub fn lift_frame(
    obs: &Pose2D,
    dict: &PoseDictionary,
    limits: &LimitsModel,
    cfg: &LiftConfig,
) -> Result<LiftResult> {
    Lifter::new(dict, limits, *cfg)?.lift(obs)
}

/// Lifts every frame independently; results keep input order. On failure the
/// error of the earliest failing frame is returned.
pub fn lift_sequence(
    seq: &PoseSequence2D,
    dict: &PoseDictionary,
    limits: &LimitsModel,
    cfg: &LiftConfig,
) -> Result<Vec<LiftResult>> {
    let lifter = Lifter::new(dict, limits, *cfg)?;
    let results: Vec<Result<LiftResult>> = seq
        .frames()
        .par_iter()
        .enumerate()
        .map(|(t, f)| lifter.lift(f).map_err(|e| e.in_frame(t)))
        .collect();
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::project;
    use crate::skeleton::Pose;

    fn mean_pose() -> Vec<f64> {
        // loosely a standing 15-joint skeleton, hip at the origin
        let pts: [[f64; 3]; 15] = [
            [0.0, 0.0, 0.0],
            [0.0, 0.5, 0.02],
            [0.0, 0.72, 0.05],
            [0.18, 0.48, 0.0],
            [0.22, 0.2, 0.05],
            [0.2, -0.05, 0.12],
            [-0.18, 0.48, 0.0],
            [-0.24, 0.22, -0.03],
            [-0.25, -0.02, 0.04],
            [0.1, -0.02, 0.0],
            [0.12, -0.45, 0.06],
            [0.11, -0.88, 0.0],
            [-0.1, -0.02, 0.0],
            [-0.12, -0.46, 0.03],
            [-0.1, -0.9, -0.04],
        ];
        pts.iter().flatten().copied().collect()
    }

    fn dictionary(columns: usize) -> PoseDictionary {
        let topo = Arc::new(JointTopology::canonical());
        let mut basis = DMatrix::zeros(45, columns);
        for c in 0..columns {
            for r in 3..45 {
                basis[(r, c)] = ((r * 7 + c * 13) as f64 * 0.61).sin();
            }
            let n = basis.column(c).norm();
            basis.column_mut(c).unscale_mut(n);
        }
        PoseDictionary::new(
            topo,
            DVector::from_vec(mean_pose()),
            basis,
            vec!["g".into(); columns],
        )
        .unwrap()
    }

    fn observe(dict: &PoseDictionary, flat: &[f64], cam: &CameraParams) -> Pose2D {
        Pose::new(dict.topology().clone(), project(flat, cam)).unwrap()
    }

    #[test]
    fn mean_pose_observation_needs_no_columns() {
        let dict = dictionary(6);
        let limits = LimitsModel::permissive(dict.topology().clone());
        let cam = CameraParams::from_euler_deg(1.3, [10.0, 40.0, -5.0]).unwrap();
        let obs = observe(&dict, dict.mean().as_slice(), &cam);
        let res = lift_frame(&obs, &dict, &limits, &LiftConfig::default()).unwrap();
        assert!(res.residual <= 1e-6);
        assert!(res.code.is_empty());
        let expected = Pose3D::from_flat(
            dict.topology().clone(),
            transform_points(dict.mean(), cam.rotation()).as_slice(),
        )
        .unwrap();
        let err = crate::metrics::procrustes_align(&res.pose, &expected)
            .unwrap()
            .sum_squared();
        assert!(err < 1e-8);
    }

    #[test]
    fn zero_bases_returns_rotated_mean() {
        let dict = dictionary(4);
        let limits = LimitsModel::permissive(dict.topology().clone());
        let cam = CameraParams::from_euler_deg(0.8, [0.0, 25.0, 0.0]).unwrap();
        let mut target = dict.mean().clone();
        target.axpy(0.4, &dict.basis().column(1), 1.0);
        let obs = observe(&dict, target.as_slice(), &cam);
        let cfg = LiftConfig {
            max_bases: 0,
            ..LiftConfig::default()
        };
        let res = lift_frame(&obs, &dict, &limits, &cfg).unwrap();
        assert!(res.code.is_empty());
        let expected = transform_points(dict.mean(), res.camera.rotation());
        assert!((res.pose.to_flat() - expected).amax() < 1e-12);
        assert_eq!(res.objective_trace.len(), 1);
    }

    #[test]
    fn recovers_single_column_pose() {
        let dict = dictionary(8);
        let limits = LimitsModel::permissive(dict.topology().clone());
        let cam = CameraParams::from_euler_deg(1.1, [15.0, -30.0, 10.0]).unwrap();
        let mut target = dict.mean().clone();
        target.axpy(0.5, &dict.basis().column(0), 1.0);
        let obs = observe(&dict, target.as_slice(), &cam);
        let cfg = LiftConfig {
            anthro_weight: 0.0,
            ..LiftConfig::default()
        };
        let res = lift_frame(&obs, &dict, &limits, &cfg).unwrap();
        assert!(res.residual <= 1e-6, "residual {}", res.residual);
        let gt = Pose3D::from_flat(dict.topology().clone(), target.as_slice()).unwrap();
        let aligned = crate::metrics::procrustes_align(&res.pose, &gt).unwrap();
        assert!(aligned.distances().iter().all(|d| *d <= 1e-3));
        assert!(res.objective_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn objective_is_zero_for_exact_observation() {
        let dict = dictionary(5);
        let cam = CameraParams::from_euler_deg(2.0, [5.0, 5.0, 5.0]).unwrap();
        let code = SparseCode::new(vec![2, 4], vec![0.3, -0.2]).unwrap();
        let pose = reconstruct_pose(&dict, &code).unwrap();
        let obs = observe(&dict, pose.as_slice(), &cam);
        assert!(objective(&obs, &code, &cam, &dict, 0.0).unwrap() < 1e-24);

        let slice = observe(&dict, dict.mean().as_slice(), &CameraParams::identity());
        let v = objective(&slice, &SparseCode::empty(), &CameraParams::identity(), &dict, 0.1)
            .unwrap();
        assert!(v < 1e-24);
    }

    #[test]
    fn rejects_bad_config_and_topology() {
        let dict = dictionary(3);
        let limits = LimitsModel::permissive(dict.topology().clone());
        let bad = LiftConfig {
            max_alternations: 0,
            ..LiftConfig::default()
        };
        assert!(Lifter::new(&dict, &limits, bad).is_err());

        let other = Arc::new(
            JointTopology::new(
                vec!["a".into(), "b".into(), "c".into()],
                vec![None, Some(0), Some(0)],
            )
            .unwrap(),
        );
        let obs = Pose::new(other, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            lift_frame(&obs, &dict, &limits, &LiftConfig::default()),
            Err(Error::Structural(_))
        ));
    }
}
