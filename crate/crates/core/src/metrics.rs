//! Similarity-aligned reconstruction error and joint-by-joint percentage tables.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{same_topology, Pose3D, PoseSequence3D};

/// Label of the reference column in percentage tables.
pub const BASELINE: &str = "baseline";

/// Marker written for cells whose baseline error is zero.
pub const UNDEFINED_CELL: &str = "n/a";

/// Result of aligning `rec` onto `gt` with translation, orthogonal transform
/// (reflections allowed) and uniform scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rec: Vec<[f64; 3]>,
    pub gt: Vec<[f64; 3]>,
    pub scale: f64,
    pub transform: Matrix3<f64>,
}

impl Alignment {
    /// Per-joint Euclidean distances between the aligned point sets.
    pub fn distances(&self) -> Vec<f64> {
        self.rec
            .iter()
            .zip(&self.gt)
            .map(|(a, b)| (Vector3::from(*a) - Vector3::from(*b)).norm())
            .collect()
    }

    pub fn sum_squared(&self) -> f64 {
        self.distances().iter().map(|d| d * d).sum()
    }
}

/// Least-squares similarity alignment of two corresponding point sets.
/// Both outputs are centered on the ground truth's centroid frame.
pub fn align_points(rec: &[[f64; 3]], gt: &[[f64; 3]]) -> Result<Alignment> {
    if rec.len() != gt.len() || rec.is_empty() {
        return Err(Error::Structural(format!(
            "cannot align {} points onto {}",
            rec.len(),
            gt.len()
        )));
    }
    let n = rec.len() as f64;
    let centroid = |pts: &[[f64; 3]]| pts.iter().map(|p| Vector3::from(*p)).sum::<Vector3<f64>>() / n;
    let cr = centroid(rec);
    let cg = centroid(gt);
    let r: Vec<Vector3<f64>> = rec.iter().map(|p| Vector3::from(*p) - cr).collect();
    let g: Vec<Vector3<f64>> = gt.iter().map(|p| Vector3::from(*p) - cg).collect();

    let gt_scatter: Matrix3<f64> = g.iter().map(|v| v * v.transpose()).sum();
    let mut sv = gt_scatter.singular_values().iter().copied().collect::<Vec<_>>();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= 1e-12 * sv[0] {
        return Err(Error::Alignment(
            "ground-truth pose is degenerate (centered points are collinear)".into(),
        ));
    }

    let cross: Matrix3<f64> = g.iter().zip(&r).map(|(a, b)| a * b.transpose()).sum();
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Alignment("SVD did not converge".into())),
    };
    let transform = u * v_t;
    let rec_energy: f64 = r.iter().map(|v| v.norm_squared()).sum();
    let scale = if rec_energy > 0.0 {
        svd.singular_values.sum() / rec_energy
    } else {
        0.0
    };

    let to_arr = |v: Vector3<f64>| [v.x, v.y, v.z];
    Ok(Alignment {
        rec: r.iter().map(|v| to_arr(scale * transform * v)).collect(),
        gt: g.into_iter().map(to_arr).collect(),
        scale,
        transform,
    })
}

pub fn procrustes_align(rec: &Pose3D, gt: &Pose3D) -> Result<Alignment> {
    if !same_topology(rec.topology(), gt.topology()) {
        return Err(Error::Structural(
            "reconstruction and ground truth use different topologies".into(),
        ));
    }
    align_points(rec.coords(), gt.coords())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub joints: Vec<String>,
    /// Mean aligned distance per joint over all frames.
    pub per_joint_error: Vec<f64>,
    /// Mean of `per_joint_error`.
    pub mean_error: f64,
    /// Mean aligned distance over joints, per frame.
    pub per_frame_error: Vec<f64>,
}

pub fn sequence_error(rec: &PoseSequence3D, gt: &PoseSequence3D) -> Result<ErrorReport> {
    if rec.len() != gt.len() {
        return Err(Error::Structural(format!(
            "reconstruction has {} frames, ground truth has {}",
            rec.len(),
            gt.len()
        )));
    }
    let per_frame: Vec<Vec<f64>> = rec
        .frames()
        .par_iter()
        .zip(gt.frames().par_iter())
        .enumerate()
        .map(|(t, (r, g))| {
            procrustes_align(r, g)
                .map(|a| a.distances())
                .map_err(|e| e.in_frame(t))
        })
        .collect::<Result<_>>()?;

    let p = gt.topology().len();
    let n = per_frame.len() as f64;
    let mut per_joint_error = vec![0.0; p];
    for frame in &per_frame {
        for (acc, d) in per_joint_error.iter_mut().zip(frame) {
            *acc += d;
        }
    }
    for e in &mut per_joint_error {
        *e /= n;
    }
    let mean_error = per_joint_error.iter().sum::<f64>() / p as f64;
    let per_frame_error = per_frame
        .iter()
        .map(|f| f.iter().sum::<f64>() / p as f64)
        .collect();
    Ok(ErrorReport {
        joints: gt.topology().joints().to_vec(),
        per_joint_error,
        mean_error,
        per_frame_error,
    })
}

/// Per-joint errors of each method as a percentage of the baseline's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentageTable {
    pub joints: Vec<String>,
    /// Column labels; the first is always [`BASELINE`].
    pub methods: Vec<String>,
    /// `cells[joint][method]`; `None` where the baseline error is zero.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Mean over the defined cells of each column.
    pub average: Vec<Option<f64>>,
}

pub fn percentage_table(
    baseline: &ErrorReport,
    methods: &[(String, ErrorReport)],
) -> Result<PercentageTable> {
    for (name, r) in methods {
        if r.joints != baseline.joints {
            return Err(Error::Structural(format!(
                "method '{name}' reports a different joint set from the baseline"
            )));
        }
    }
    let columns: Vec<&ErrorReport> = std::iter::once(baseline)
        .chain(methods.iter().map(|(_, r)| r))
        .collect();
    let cells: Vec<Vec<Option<f64>>> = baseline
        .per_joint_error
        .iter()
        .enumerate()
        .map(|(j, &base)| {
            columns
                .iter()
                .map(|r| (base > 0.0).then(|| 100.0 * r.per_joint_error[j] / base))
                .collect()
        })
        .collect();
    let average = (0..columns.len())
        .map(|m| {
            let defined: Vec<f64> = cells.iter().filter_map(|row| row[m]).collect();
            (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
        })
        .collect();
    Ok(PercentageTable {
        joints: baseline.joints.clone(),
        methods: std::iter::once(BASELINE.to_string())
            .chain(methods.iter().map(|(n, _)| n.clone()))
            .collect(),
        cells,
        average,
    })
}

impl PercentageTable {
    pub fn average_of(&self, method: &str) -> Option<f64> {
        let m = self.methods.iter().position(|n| n == method)?;
        self.average[m]
    }

    /// CSV with two-decimal percentages and a trailing AVERAGE row.
    pub fn to_csv(&self) -> String {
        let fmt = |c: &Option<f64>| match c {
            Some(v) => format!("{v:.2}"),
            None => UNDEFINED_CELL.to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "joint,{}", self.methods.join(","));
        for (joint, row) in self.joints.iter().zip(&self.cells) {
            let cells: Vec<String> = row.iter().map(fmt).collect();
            let _ = writeln!(out, "{joint},{}", cells.join(","));
        }
        let avg: Vec<String> = self.average.iter().map(fmt).collect();
        let _ = writeln!(out, "AVERAGE,{}", avg.join(","));
        out
    }
}

/// Absolute per-joint errors, one column per method, plus the grand mean row.
pub fn errors_csv(methods: &[(String, ErrorReport)]) -> String {
    let mut out = String::new();
    let names: Vec<&str> = methods.iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(out, "joint,{}", names.join(","));
    if let Some((_, first)) = methods.first() {
        for (j, joint) in first.joints.iter().enumerate() {
            let row: Vec<String> = methods
                .iter()
                .map(|(_, r)| format!("{:?}", r.per_joint_error[j]))
                .collect();
            let _ = writeln!(out, "{joint},{}", row.join(","));
        }
    }
    let avg: Vec<String> = methods.iter().map(|(_, r)| format!("{:?}", r.mean_error)).collect();
    let _ = writeln!(out, "AVERAGE,{}", avg.join(","));
    out
}
