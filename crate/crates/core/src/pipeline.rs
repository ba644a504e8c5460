//! End-to-end runs: lift a 2D sequence and smooth it, score variants against
//! ground truth, sweep noise levels, and build dictionaries from a corpus.
//!
//! Output layout under the configured directory:
//! `<variant>/sequence.{csv,json}`, `report.{csv,json}`, `manifest.json`.
//! Nothing depends on wall-clock time or thread scheduling, so reruns with
//! the same configuration produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{orthographic_project_sequence, CameraParams};
use crate::dictionary::{
    build_dictionary, load_dictionary, save_dictionary, CorpusGroup, DictionaryBuild,
    PoseDictionary, DEFAULT_BASES_PER_GROUP,
};
use crate::error::{Error, Result};
use crate::io::{
    load_sequence, save_json, save_sequence, write_text, SequenceFile, SequenceFormat,
};
use crate::lifter::{lift_sequence, LiftConfig, LiftResult};
use crate::limits::{load_limits, LimitsModel};
use crate::metrics::{errors_csv, percentage_table, sequence_error, ErrorReport, PercentageTable, BASELINE};
use crate::noise::{add_noise, snr_sweep_points, NoiseSpec};
use crate::skeleton::{JointTopology, Pose, PoseSequence, PoseSequence2D, PoseSequence3D};
use crate::temporal::{smooth_sequence, FilterKind, FilterSpec, DEFAULT_WINDOW};

/// Repeat trials per SNR point in a noise sweep.
pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dictionary JSON; its topology is the skeleton for every input.
    pub dictionary: PathBuf,
    /// Limits JSON; without one every pose passes the gate.
    pub limits: Option<PathBuf>,
    pub lift: LiftConfig,
    pub filters: Vec<FilterSpec>,
    /// Run with no filters, producing only the unsmoothed lift.
    pub baseline_only: bool,
    /// Noise added to the 2D input; `None` leaves it clean.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    /// View used to project ground truth in `compare` and `noise-sweep`.
    pub camera: CameraParams,
    /// Sweep points; `None` uses the defaults.
    pub snr_points: Option<Vec<f64>>,
    pub repeats: usize,
    pub output_format: SequenceFormat,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            dictionary: PathBuf::from("dictionary.json"),
            limits: None,
            lift: LiftConfig::default(),
            filters: FilterKind::ALL
                .iter()
                .map(|&k| FilterSpec { kind: k, window: DEFAULT_WINDOW })
                .collect(),
            baseline_only: false,
            snr_db: None,
            seed: 0,
            out: PathBuf::from("out"),
            camera: CameraParams::identity(),
            snr_points: None,
            repeats: DEFAULT_REPEATS,
            output_format: SequenceFormat::Csv,
        }
    }
}

/// Command-line replacements for configuration fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub filters: Option<Vec<FilterKind>>,
    pub window: Option<usize>,
    pub snr: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("{source_name}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    /// `--filter` replaces the filter list, `--window` resizes every filter,
    /// `--snr` sets the input noise (one value) and the sweep points.
    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(kinds) = &o.filters {
            let window = o.window.unwrap_or(DEFAULT_WINDOW);
            self.filters = kinds
                .iter()
                .map(|&k| FilterSpec::new(k, window))
                .collect::<Result<_>>()?;
            self.baseline_only = false;
        } else if let Some(w) = o.window {
            self.filters = self
                .filters
                .iter()
                .map(|f| FilterSpec::new(f.kind, w))
                .collect::<Result<_>>()?;
        }
        if let Some(snr) = &o.snr {
            if let [one] = snr.as_slice() {
                self.snr_db = Some(*one);
            }
            self.snr_points = Some(snr.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.lift.validate()?;
        if self.filters.is_empty() && !self.baseline_only {
            return Err(Error::Config(
                "no filters configured; list some or set baseline_only".into(),
            ));
        }
        let mut labels: Vec<String> = self.filters.iter().map(FilterSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("filter {} listed twice", w[0])));
        }
        if let Some(snr) = self.snr_db {
            NoiseSpec::new(snr, self.seed)?;
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        snr_sweep_points(self.snr_points.as_deref())?;
        if !self.dictionary.is_file() {
            return Err(Error::Config(format!(
                "dictionary file {} does not exist",
                self.dictionary.display()
            )));
        }
        if let Some(l) = self.limits.as_ref().filter(|l| !l.is_file()) {
            return Err(Error::Config(format!("limits file {} does not exist", l.display())));
        }
        Ok(())
    }

    /// Filters actually applied.
    pub fn active_filters(&self) -> &[FilterSpec] {
        if self.baseline_only {
            &[]
        } else {
            &self.filters
        }
    }

    fn load_models(&self) -> Result<(PoseDictionary, LimitsModel)> {
        let dict = load_dictionary(&self.dictionary, None)?;
        let limits = match &self.limits {
            Some(path) => load_limits(path, dict.topology().clone())?,
            None => LimitsModel::permissive(dict.topology().clone()),
        };
        Ok((dict, limits))
    }
}

/// Per-frame outcome of the lift, as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub residual: f64,
    pub valid: bool,
    pub flipped: bool,
    pub bases: Vec<usize>,
}

/// A lift plus its smoothed variants, in output order (baseline first).
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub variants: Vec<(String, PoseSequence3D)>,
    pub frames: Vec<FrameRecord>,
}

impl Reconstruction {
    pub fn baseline(&self) -> &PoseSequence3D {
        &self.variants[0].1
    }

    pub fn variant(&self, label: &str) -> Option<&PoseSequence3D> {
        self.variants.iter().find(|(l, _)| l == label).map(|(_, s)| s)
    }
}

/// Lifts every frame and smooths the result with each filter.
pub fn reconstruct(
    input: &PoseSequence2D,
    dict: &PoseDictionary,
    limits: &LimitsModel,
    lift: &LiftConfig,
    filters: &[FilterSpec],
) -> Result<Reconstruction> {
    let results = lift_sequence(input, dict, limits, lift).map_err(|e| e.in_stage("lift"))?;
    let frames = results
        .iter()
        .map(|r| FrameRecord {
            residual: r.residual,
            valid: r.valid,
            flipped: r.flipped,
            bases: r.code.indices().to_vec(),
        })
        .collect();
    let baseline = lifted_sequence(results).map_err(|e| e.in_stage("lift"))?;
    let smoothed: Vec<(String, PoseSequence3D)> = filters
        .par_iter()
        .map(|f| (f.label(), smooth_sequence(&baseline, *f)))
        .collect();
    let mut variants = vec![(BASELINE.to_string(), baseline)];
    variants.extend(smoothed);
    Ok(Reconstruction { variants, frames })
}

fn lifted_sequence(results: Vec<LiftResult>) -> Result<PoseSequence3D> {
    PoseSequence::new(results.into_iter().map(|r| r.pose).collect::<Vec<Pose<3>>>())
}

/// Files written so far, removed again if the run fails part-way.
struct Outputs {
    written: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Outputs { written: Vec::new(), dirs: Vec::new() }
    }

    fn track_dir(&mut self, dir: &Path) {
        let mut missing = Vec::new();
        let mut d = Some(dir);
        while let Some(p) = d.filter(|p| !p.as_os_str().is_empty() && !p.exists()) {
            missing.push(p.to_path_buf());
            d = p.parent();
        }
        // deepest first, so removal can go in order
        self.dirs.extend(missing);
    }

    fn text(&mut self, path: PathBuf, text: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            self.track_dir(dir);
        }
        self.written.push(path.clone());
        write_text(&path, text)
    }

    fn json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<()> {
        if let Some(dir) = path.parent() {
            self.track_dir(dir);
        }
        self.written.push(path.clone());
        save_json(value, &path)
    }

    fn sequence(&mut self, path: PathBuf, seq: &PoseSequence3D, format: SequenceFormat) -> Result<()> {
        if let Some(dir) = path.parent() {
            self.track_dir(dir);
        }
        self.written.push(path.clone());
        save_sequence(seq, &path, SequenceFile::new(format, 3)?)
    }

    fn roll_back(&self) {
        for f in self.written.iter().rev() {
            let _ = fs::remove_file(f);
        }
        for d in &self.dirs {
            let _ = fs::remove_dir(d);
        }
    }
}

/// Runs `body` with an output tracker; on failure everything it wrote is
/// removed before the error is returned.
fn with_outputs<T>(body: impl FnOnce(&mut Outputs) -> Result<T>) -> Result<T> {
    let mut out = Outputs::new();
    let result = body(&mut out);
    if result.is_err() {
        out.roll_back();
    }
    result
}

fn write_variants(out: &mut Outputs, cfg: &PipelineConfig, rec: &Reconstruction) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(rec.variants.len());
    for (label, seq) in &rec.variants {
        let path = cfg
            .out
            .join(label)
            .join(format!("sequence.{}", cfg.output_format.extension()));
        out.sequence(path.clone(), seq, cfg.output_format)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructManifest {
    pub command: String,
    pub input: PathBuf,
    pub config: PipelineConfig,
    pub variants: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone)]
pub struct ReconstructOutput {
    pub reconstruction: Reconstruction,
    pub manifest: ReconstructManifest,
}

fn maybe_noisy(seq: PoseSequence2D, snr_db: Option<f64>, seed: u64) -> Result<PoseSequence2D> {
    match snr_db {
        Some(snr) => add_noise(&seq, &NoiseSpec::new(snr, seed)?),
        None => Ok(seq),
    }
}

/// Lifts the 2D sequence at `input`, writes the baseline and every smoothed
/// variant, and records the per-frame lift outcome in the manifest.
pub fn run_reconstruct(cfg: &PipelineConfig, input: &Path) -> Result<ReconstructOutput> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let (dict, limits) = cfg.load_models().map_err(|e| e.in_stage("load"))?;
    let seq: PoseSequence2D = load_sequence(input, dict.topology()).map_err(|e| e.in_stage("load"))?;
    let seq = maybe_noisy(seq, cfg.snr_db, cfg.seed).map_err(|e| e.in_stage("noise"))?;
    let rec = reconstruct(&seq, &dict, &limits, &cfg.lift, cfg.active_filters())?;

    with_outputs(|out| {
        let outputs = write_variants(out, cfg, &rec).map_err(|e| e.in_stage("write"))?;
        let manifest = ReconstructManifest {
            command: "reconstruct".into(),
            input: input.to_path_buf(),
            config: cfg.clone(),
            variants: rec.variants.iter().map(|(l, _)| l.clone()).collect(),
            outputs,
            frames: rec.frames.clone(),
        };
        out.json(cfg.out.join("manifest.json"), &manifest)
            .map_err(|e| e.in_stage("write"))?;
        Ok(ReconstructOutput {
            reconstruction: rec,
            manifest,
        })
    })
}

/// Scores of every variant against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub table: PercentageTable,
    pub errors: Vec<(String, ErrorReport)>,
}

impl CompareReport {
    pub fn error_of(&self, label: &str) -> Option<&ErrorReport> {
        self.errors.iter().find(|(l, _)| l == label).map(|(_, r)| r)
    }
}

/// Scores each variant and tabulates it against the unsmoothed baseline.
pub fn score(rec: &Reconstruction, gt: &PoseSequence3D) -> Result<CompareReport> {
    let errors: Vec<(String, ErrorReport)> = rec
        .variants
        .par_iter()
        .map(|(label, seq)| sequence_error(seq, gt).map(|r| (label.clone(), r)))
        .collect::<Result<_>>()?;
    let table = percentage_table(&errors[0].1, &errors[1..])?;
    Ok(CompareReport { table, errors })
}

/// Projects ground truth through the configured camera, adds the configured
/// noise, lifts and smooths it, and scores every variant.
pub fn compare_in_memory(
    gt: &PoseSequence3D,
    dict: &PoseDictionary,
    limits: &LimitsModel,
    cfg: &PipelineConfig,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<(Reconstruction, CompareReport)> {
    let projected = orthographic_project_sequence(gt, &cfg.camera);
    let input = maybe_noisy(projected, snr_db, seed).map_err(|e| e.in_stage("noise"))?;
    let rec = reconstruct(&input, dict, limits, &cfg.lift, cfg.active_filters())?;
    let report = score(&rec, gt).map_err(|e| e.in_stage("score"))?;
    Ok((rec, report))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareManifest {
    pub command: String,
    pub ground_truth: PathBuf,
    pub config: PipelineConfig,
    pub variants: Vec<String>,
    pub mean_errors: Vec<f64>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub reconstruction: Reconstruction,
    pub report: CompareReport,
}

fn load_ground_truth(cfg: &PipelineConfig, gt_path: &Path) -> Result<(PoseDictionary, LimitsModel, PoseSequence3D)> {
    let (dict, limits) = cfg.load_models()?;
    let gt = load_sequence(gt_path, dict.topology())?;
    Ok((dict, limits, gt))
}

/// Compares the unsmoothed lift and each filter against ground truth.
/// Writes the variants, `report.csv` (percentages), `errors.csv` (absolute),
/// `report.json` and the manifest.
pub fn run_compare(cfg: &PipelineConfig, gt_path: &Path) -> Result<CompareOutput> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let (dict, limits, gt) = load_ground_truth(cfg, gt_path).map_err(|e| e.in_stage("load"))?;
    let (rec, report) = compare_in_memory(&gt, &dict, &limits, cfg, cfg.snr_db, cfg.seed)?;

    with_outputs(|out| {
        let write = |e: Error| e.in_stage("write");
        write_variants(out, cfg, &rec).map_err(write)?;
        out.text(cfg.out.join("report.csv"), &report.table.to_csv()).map_err(write)?;
        out.text(cfg.out.join("errors.csv"), &errors_csv(&report.errors)).map_err(write)?;
        out.json(cfg.out.join("report.json"), &report).map_err(write)?;
        let manifest = CompareManifest {
            command: "compare".into(),
            ground_truth: gt_path.to_path_buf(),
            config: cfg.clone(),
            variants: report.errors.iter().map(|(l, _)| l.clone()).collect(),
            mean_errors: report.errors.iter().map(|(_, r)| r.mean_error).collect(),
            frames: rec.frames.clone(),
        };
        out.json(cfg.out.join("manifest.json"), &manifest).map_err(write)?;
        Ok(CompareOutput {
            reconstruction: rec,
            report,
        })
    })
}

/// Mean error of one variant at one SNR over the repeat trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: String,
    pub snr_db: f64,
    pub mean_error: f64,
    /// Sample standard deviation over trials; 0 for a single trial.
    pub stdev: f64,
    pub trials: Vec<f64>,
}

fn mean_stdev(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Repeats the comparison at each SNR point. Trial `r` uses seed `seed + r`
/// at every SNR, so the points differ only in noise level.
pub fn noise_sweep_in_memory(
    gt: &PoseSequence3D,
    dict: &PoseDictionary,
    limits: &LimitsModel,
    cfg: &PipelineConfig,
) -> Result<Vec<SweepRow>> {
    let points = snr_sweep_points(cfg.snr_points.as_deref())?;
    let mut trials: Vec<Vec<Vec<f64>>> = Vec::with_capacity(points.len());
    let mut labels = Vec::new();
    for &snr in &points {
        let mut per_trial = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let seed = cfg.seed.wrapping_add(r as u64);
            log::debug!("noise sweep: {snr} dB, trial {r}");
            let (_, report) = compare_in_memory(gt, dict, limits, cfg, Some(snr), seed)?;
            if labels.is_empty() {
                labels = report.errors.iter().map(|(l, _)| l.clone()).collect();
            }
            per_trial.push(report.errors.iter().map(|(_, e)| e.mean_error).collect());
        }
        trials.push(per_trial);
    }
    let mut rows = Vec::new();
    for (v, label) in labels.iter().enumerate() {
        for (p, &snr) in points.iter().enumerate() {
            let values: Vec<f64> = trials[p].iter().map(|t| t[v]).collect();
            let (mean_error, stdev) = mean_stdev(&values);
            rows.push(SweepRow {
                variant: label.clone(),
                snr_db: snr,
                mean_error,
                stdev,
                trials: values,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("variant,snr_db,mean_error,stdev,trials\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:?},{:?},{:?},{}\n",
            r.variant,
            r.snr_db,
            r.mean_error,
            r.stdev,
            r.trials.len()
        ));
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepManifest {
    pub command: String,
    pub ground_truth: PathBuf,
    pub config: PipelineConfig,
    pub snr_points: Vec<f64>,
    pub seeds: Vec<u64>,
}

/// Error-versus-SNR series, written as `report.csv` and `report.json`.
pub fn run_noise_sweep(cfg: &PipelineConfig, gt_path: &Path) -> Result<Vec<SweepRow>> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let (dict, limits, gt) = load_ground_truth(cfg, gt_path).map_err(|e| e.in_stage("load"))?;
    let rows = noise_sweep_in_memory(&gt, &dict, &limits, cfg)?;

    with_outputs(|out| {
        let write = |e: Error| e.in_stage("write");
        out.text(cfg.out.join("report.csv"), &sweep_csv(&rows)).map_err(write)?;
        out.json(cfg.out.join("report.json"), &rows).map_err(write)?;
        let manifest = SweepManifest {
            command: "noise-sweep".into(),
            ground_truth: gt_path.to_path_buf(),
            config: cfg.clone(),
            snr_points: snr_sweep_points(cfg.snr_points.as_deref())?,
            seeds: (0..cfg.repeats as u64).map(|r| cfg.seed.wrapping_add(r)).collect(),
        };
        out.json(cfg.out.join("manifest.json"), &manifest).map_err(write)?;
        Ok(rows)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildDictConfig {
    /// Directory the manifest's file names are relative to.
    pub corpus_dir: PathBuf,
    /// JSON object mapping group names to lists of 3D sequence files.
    pub manifest: PathBuf,
    pub bases_per_group: usize,
    /// Topology JSON (`{joints, parents}`) for CSV corpus files; the
    /// built-in 15-joint skeleton when absent.
    pub topology: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for BuildDictConfig {
    fn default() -> Self {
        BuildDictConfig {
            corpus_dir: PathBuf::from("."),
            manifest: PathBuf::from("groups.json"),
            bases_per_group: DEFAULT_BASES_PER_GROUP,
            topology: None,
            out: PathBuf::from("dictionary.json"),
        }
    }
}

impl BuildDictConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct BuildDictOutput {
    pub build: DictionaryBuild,
    /// Corpus files that failed to load, with the reason; they were skipped.
    pub skipped: Vec<(PathBuf, String)>,
}

/// Loads the grouped corpus, builds the dictionary and saves it. Files that
/// exist but fail to parse are skipped and listed; a missing file is an
/// error, as is a corpus where no group has any usable sequence.
pub fn run_build_dictionary(cfg: &BuildDictConfig) -> Result<BuildDictOutput> {
    let topology = match &cfg.topology {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let t: JointTopology = serde_json::from_str(&text)
                .map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
            Arc::new(t)
        }
        None => Arc::new(JointTopology::canonical()),
    };
    let groups: BTreeMap<String, Vec<PathBuf>> = {
        let text = fs::read_to_string(&cfg.manifest).map_err(|e| Error::io(&cfg.manifest, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::load(cfg.manifest.display().to_string(), e.to_string()))?
    };

    let mut corpus = Vec::with_capacity(groups.len());
    let mut skipped = Vec::new();
    for (label, files) in groups {
        let mut sequences = Vec::with_capacity(files.len());
        for file in files {
            let path = cfg.corpus_dir.join(&file);
            if !path.is_file() {
                return Err(Error::load(
                    cfg.manifest.display().to_string(),
                    format!("group '{label}' references missing file {}", path.display()),
                )
                .in_stage("load"));
            }
            match load_sequence::<3>(&path, &topology) {
                Ok(seq) => sequences.push(seq),
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    skipped.push((path, e.to_string()));
                }
            }
        }
        corpus.push(CorpusGroup { label, sequences });
    }
    if corpus.iter().all(|g| g.sequences.is_empty()) {
        let listed: Vec<String> = skipped.iter().map(|(p, _)| p.display().to_string()).collect();
        return Err(Error::load(
            cfg.manifest.display().to_string(),
            format!("no usable corpus sequences (skipped: {})", listed.join(", ")),
        )
        .in_stage("load"));
    }
    let build = build_dictionary(&corpus, cfg.bases_per_group).map_err(|e| e.in_stage("build"))?;
    with_outputs(|out| {
        if let Some(dir) = cfg.out.parent() {
            out.track_dir(dir);
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).in_stage("write"))?;
            }
        }
        out.written.push(cfg.out.clone());
        save_dictionary(&build.dictionary, &cfg.out).map_err(|e| e.in_stage("write"))
    })?;
    Ok(BuildDictOutput { build, skipped })
}
