//! Mean pose plus an over-complete dictionary of unit-norm basis poses.
//!
//! The dictionary is built per action group: each group's frames are centered
//! on the grand mean of the whole corpus and its leading principal directions
//! become dictionary columns tagged with the group label.

use std::path::Path;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{same_topology, JointTopology, PoseSequence3D};

pub const DEFAULT_BASES_PER_GROUP: usize = 12;

const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseDictionary {
    topology: Arc<JointTopology>,
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    group_labels: Vec<String>,
}

impl PoseDictionary {
    /// Validates shapes, finiteness and unit-norm columns. A dictionary with
    /// zero columns is allowed; it can only reproduce the mean pose.
    pub fn new(
        topology: Arc<JointTopology>,
        mean: DVector<f64>,
        basis: DMatrix<f64>,
        group_labels: Vec<String>,
    ) -> Result<Self> {
        let dim = 3 * topology.len();
        if mean.len() != dim {
            return Err(Error::Structural(format!(
                "mean pose has length {}, expected {dim}",
                mean.len()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Structural("mean pose has non-finite entries".into()));
        }
        if basis.nrows() != dim {
            return Err(Error::Structural(format!(
                "basis has {} rows, expected {dim}",
                basis.nrows()
            )));
        }
        if group_labels.len() != basis.ncols() {
            return Err(Error::Structural(format!(
                "{} group labels for {} basis columns",
                group_labels.len(),
                basis.ncols()
            )));
        }
        for (i, col) in basis.column_iter().enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Structural(format!(
                    "basis column {i} has non-finite entries"
                )));
            }
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::Structural(format!(
                    "basis column {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(PoseDictionary {
            topology,
            mean,
            basis,
            group_labels,
        })
    }

    pub fn topology(&self) -> &Arc<JointTopology> {
        &self.topology
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    /// Number of basis columns.
    pub fn len(&self) -> usize {
        self.basis.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.ncols() == 0
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Selected dictionary columns with their weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseCode {
    indices: Vec<usize>,
    coefficients: Vec<f64>,
}

impl SparseCode {
    pub fn new(indices: Vec<usize>, coefficients: Vec<f64>) -> Result<Self> {
        if indices.len() != coefficients.len() {
            return Err(Error::Structural(format!(
                "{} indices but {} coefficients",
                indices.len(),
                coefficients.len()
            )));
        }
        for (k, i) in indices.iter().enumerate() {
            if indices[..k].contains(i) {
                return Err(Error::Structural(format!("column {i} selected twice")));
            }
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Structural("non-finite coefficient".into()));
        }
        Ok(SparseCode {
            indices,
            coefficients,
        })
    }

    pub fn empty() -> Self {
        SparseCode::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// `mean + sum_i w_i * b_i` over the code's columns.
pub fn reconstruct_pose(dict: &PoseDictionary, code: &SparseCode) -> Result<DVector<f64>> {
    let mut pose = dict.mean.clone();
    for (&i, &w) in code.indices.iter().zip(&code.coefficients) {
        if i >= dict.len() {
            return Err(Error::Structural(format!(
                "code references column {i} but dictionary has {}",
                dict.len()
            )));
        }
        pose.axpy(w, &dict.basis.column(i), 1.0);
    }
    Ok(pose)
}

/// Training sequences sharing one action label.
#[derive(Debug, Clone)]
pub struct CorpusGroup {
    pub label: String,
    pub sequences: Vec<PoseSequence3D>,
}

#[derive(Debug, Clone)]
pub struct DictionaryBuild {
    pub dictionary: PoseDictionary,
    /// Columns contributed by each group, in corpus order.
    pub columns_per_group: Vec<(String, usize)>,
    pub warnings: Vec<String>,
}

/// Per-group PCA dictionary around the grand mean pose.
pub fn build_dictionary(corpus: &[CorpusGroup], bases_per_group: usize) -> Result<DictionaryBuild> {
    let topology = corpus
        .iter()
        .flat_map(|g| g.sequences.first())
        .map(|s| s.topology().clone())
        .next()
        .ok_or_else(|| Error::Structural("corpus has no frames".into()))?;
    let dim = 3 * topology.len();
    if bases_per_group == 0 || bases_per_group > dim {
        return Err(Error::Config(format!(
            "bases per group must be in 1..={dim}, got {bases_per_group}"
        )));
    }
    for g in corpus {
        if g.sequences.iter().any(|s| !same_topology(s.topology(), &topology)) {
            return Err(Error::Structural(format!(
                "group '{}' uses a different topology",
                g.label
            )));
        }
    }

    let flattened: Vec<Vec<DVector<f64>>> = corpus
        .iter()
        .map(|g| {
            g.sequences
                .iter()
                .flat_map(|s| s.frames().iter().map(|f| f.to_flat()))
                .collect()
        })
        .collect();

    let total: usize = flattened.iter().map(Vec::len).sum();
    let mut mean = DVector::zeros(dim);
    for frame in flattened.iter().flatten() {
        mean += frame;
    }
    mean /= total as f64;

    let mut warnings = Vec::new();
    for (g, frames) in corpus.iter().zip(&flattened) {
        if frames.is_empty() {
            let msg = format!("group '{}' has no frames; skipped", g.label);
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let per_group: Vec<Vec<DVector<f64>>> = flattened
        .par_iter()
        .map(|frames| principal_directions(frames, &mean, bases_per_group.min(frames.len())))
        .collect();

    let mut columns = Vec::new();
    let mut group_labels = Vec::new();
    let mut columns_per_group = Vec::new();
    for ((g, frames), dirs) in corpus.iter().zip(&flattened).zip(per_group) {
        if dirs.is_empty() && !frames.is_empty() {
            let msg = format!("group '{}' has no variance; contributes no columns", g.label);
            warn!("{msg}");
            warnings.push(msg);
        }
        columns_per_group.push((g.label.clone(), dirs.len()));
        group_labels.extend(std::iter::repeat_n(g.label.clone(), dirs.len()));
        columns.extend(dirs);
    }

    let basis = if columns.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    let dictionary = PoseDictionary::new(topology, mean, basis, group_labels)?;
    Ok(DictionaryBuild {
        dictionary,
        columns_per_group,
        warnings,
    })
}

// Leading eigenvectors of the scatter of `frames` around `mean`, dropping
// directions with negligible variance.
fn principal_directions(
    frames: &[DVector<f64>],
    mean: &DVector<f64>,
    count: usize,
) -> Vec<DVector<f64>> {
    if frames.is_empty() || count == 0 {
        return Vec::new();
    }
    let dim = mean.len();
    let mut scatter = DMatrix::zeros(dim, dim);
    let mut energy = 0.0;
    for f in frames {
        let d = f - mean;
        scatter.syger(1.0, &d, &d, 1.0);
        energy += f.norm_squared();
    }
    scatter.fill_upper_triangle_with_lower_triangle();

    let eig = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let top = eig.eigenvalues[order[0]];
    if top <= 1e-20 * energy.max(1.0) {
        return Vec::new();
    }
    order
        .into_iter()
        .take(count)
        .take_while(|&k| eig.eigenvalues[k] > 1e-10 * top)
        .map(|k| {
            let mut v = eig.eigenvectors.column(k).normalize();
            let lead = v.iamax();
            if v[lead] < 0.0 {
                v = -v;
            }
            v
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DictionaryDoc {
    topology: JointTopology,
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    group_labels: Vec<String>,
}

pub fn dictionary_to_json(dict: &PoseDictionary) -> String {
    let doc = DictionaryDoc {
        topology: (*dict.topology).clone(),
        mean: dict.mean.iter().copied().collect(),
        basis: dict
            .basis
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
        group_labels: dict.group_labels.clone(),
    };
    serde_json::to_string(&doc).expect("dictionary serializes")
}

/// Parses a dictionary document. `source_name` labels diagnostics; when
/// `expected` is given the embedded topology must match it.
pub fn dictionary_from_json(
    text: &str,
    source_name: &str,
    expected: Option<&JointTopology>,
) -> Result<PoseDictionary> {
    let doc: DictionaryDoc =
        serde_json::from_str(text).map_err(|e| Error::load(source_name, e.to_string()))?;
    let fail = |msg: String| Error::load(source_name, msg);
    if let Some(t) = expected {
        if *t != doc.topology {
            return Err(fail("topology does not match the expected skeleton".into()));
        }
    }
    let dim = 3 * doc.topology.len();
    if doc.mean.len() != dim {
        return Err(fail(format!(
            "field 'mean' has length {}, expected {dim}",
            doc.mean.len()
        )));
    }
    if let Some(k) = doc.mean.iter().position(|v| !v.is_finite()) {
        return Err(fail(format!("field 'mean[{k}]' is not finite")));
    }
    for (i, col) in doc.basis.iter().enumerate() {
        if col.len() != dim {
            return Err(fail(format!(
                "basis column {i} has length {}, expected {dim}",
                col.len()
            )));
        }
        if let Some(k) = col.iter().position(|v| !v.is_finite()) {
            return Err(fail(format!("basis column {i} entry {k} is not finite")));
        }
    }
    if doc.group_labels.len() != doc.basis.len() {
        return Err(fail(format!(
            "field 'group_labels' has {} entries for {} basis columns",
            doc.group_labels.len(),
            doc.basis.len()
        )));
    }
    let basis = DMatrix::from_fn(dim, doc.basis.len(), |r, c| doc.basis[c][r]);
    PoseDictionary::new(
        Arc::new(doc.topology),
        DVector::from_vec(doc.mean),
        basis,
        doc.group_labels,
    )
    .map_err(|e| fail(e.to_string()))
}

pub fn save_dictionary(dict: &PoseDictionary, path: &Path) -> Result<()> {
    std::fs::write(path, dictionary_to_json(dict) + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_dictionary(path: &Path, expected: Option<&JointTopology>) -> Result<PoseDictionary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dictionary_from_json(&text, &path.display().to_string(), expected)
}
