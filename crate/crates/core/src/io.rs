//! Pose sequences on disk, plus JSON helpers for reports and manifests.
//!
//! CSV rows are `frame,joint,x,y[,z]` under a mandatory header; the joint
//! names resolve against a topology supplied by the caller. The JSON form
//! carries its own topology: `{topology: {joints, parents}, frames: [...]}`.
//! Numbers are written as shortest round-trip decimals, so loading a saved
//! sequence gives back identical values.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::{JointTopology, Pose, PoseSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceFormat {
    Csv,
    Json,
}

impl SequenceFormat {
    /// Format implied by the file extension.
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(ext) if ext == "csv" => Ok(SequenceFormat::Csv),
            Some(ext) if ext == "json" => Ok(SequenceFormat::Json),
            _ => Err(Error::load(
                path.display().to_string(),
                "unrecognized extension; expected .csv or .json",
            )),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            SequenceFormat::Csv => "csv",
            SequenceFormat::Json => "json",
        }
    }
}

/// On-disk shape of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceFile {
    pub format: SequenceFormat,
    pub dims: usize,
}

impl SequenceFile {
    pub fn new(format: SequenceFormat, dims: usize) -> Result<Self> {
        if dims != 2 && dims != 3 {
            return Err(Error::Config(format!("sequences have 2 or 3 dims, not {dims}")));
        }
        Ok(SequenceFile { format, dims })
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn csv_header(dims: usize) -> Vec<&'static str> {
    let mut h = vec!["frame", "joint"];
    h.extend(&AXES[..dims]);
    h
}

/// Shortest decimal that parses back to the same value.
fn number(v: f64) -> String {
    format!("{v:?}")
}

pub fn sequence_to_csv<const D: usize>(seq: &PoseSequence<D>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(csv_header(D))?;
        let topo = seq.topology();
        for (t, frame) in seq.frames().iter().enumerate() {
            for (j, c) in frame.coords().iter().enumerate() {
                let mut row = vec![t.to_string(), topo.name(j).to_string()];
                row.extend(c.iter().map(|&v| number(v)));
                w.write_record(&row)?;
            }
        }
        Ok(())
    };
    write(&mut w).expect("writing to memory cannot fail");
    String::from_utf8(w.into_inner().expect("in-memory buffer")).expect("CSV output is UTF-8")
}

/// Parses the CSV form. Rows of one frame are consecutive, frames count up
/// from 0 without gaps, and every frame names each joint exactly once.
pub fn sequence_from_csv<const D: usize>(
    text: &str,
    source_name: &str,
    topology: &Arc<JointTopology>,
) -> Result<PoseSequence<D>> {
    let fail = |msg: String| Error::load(source_name, msg);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found.len() != D + 2 && (found.len() == 4 || found.len() == 5) {
        return Err(fail(format!(
            "expected {D}D coordinates but the header has {} axes",
            found.len() - 2
        )));
    }
    if found != csv_header(D) {
        return Err(fail(format!(
            "header must be '{}', found '{}'",
            csv_header(D).join(","),
            found.join(",")
        )));
    }

    let p = topology.len();
    let mut frames: Vec<Vec<[f64; D]>> = Vec::new();
    let mut current: Vec<Option<[f64; D]>> = vec![None; p];
    let mut current_frame: Option<usize> = None;

    let finish = |t: usize, slots: &mut Vec<Option<[f64; D]>>, frames: &mut Vec<Vec<[f64; D]>>| {
        if let Some(j) = slots.iter().position(Option::is_none) {
            return Err(fail(format!("frame {t} is missing joint '{}'", topology.name(j))));
        }
        frames.push(slots.iter().map(|c| c.expect("checked above")).collect());
        slots.iter_mut().for_each(|c| *c = None);
        Ok(())
    };

    for (i, record) in reader.records().enumerate() {
        // line 1 is the header
        let row = i + 2;
        let record = record.map_err(|e| fail(format!("row {row}: {e}")))?;
        if record.len() != D + 2 {
            return Err(fail(format!(
                "row {row}: expected {} fields, found {}",
                D + 2,
                record.len()
            )));
        }
        let t: usize = record[0]
            .parse()
            .map_err(|_| fail(format!("row {row}: frame '{}' is not an index", &record[0])))?;
        match current_frame {
            None if t != 0 => {
                return Err(fail(format!("row {row}: frames must start at 0, found {t}")));
            }
            None => current_frame = Some(0),
            Some(c) if t == c => {}
            Some(c) if t == c + 1 => {
                finish(c, &mut current, &mut frames)?;
                current_frame = Some(t);
            }
            Some(c) => {
                return Err(fail(format!(
                    "row {row}: frame {t} follows frame {c}; frame indices must be contiguous"
                )));
            }
        }
        let name = &record[1];
        let j = topology
            .index_of(name)
            .ok_or_else(|| fail(format!("row {row}: unknown joint '{name}'")))?;
        if current[j].is_some() {
            return Err(fail(format!("row {row}: joint '{name}' repeated in frame {t}")));
        }
        let mut c = [0.0f64; D];
        for (d, v) in c.iter_mut().enumerate() {
            let field = &record[d + 2];
            *v = field.parse().map_err(|_| {
                fail(format!("row {row}: field '{}' = '{field}' is not a number", AXES[d]))
            })?;
            if !v.is_finite() {
                return Err(fail(format!(
                    "row {row}: field '{}' is not finite ({field})",
                    AXES[d]
                )));
            }
        }
        current[j] = Some(c);
    }
    match current_frame {
        Some(c) => finish(c, &mut current, &mut frames)?,
        None => return Err(fail("no frames".into())),
    }
    PoseSequence::from_coords(topology.clone(), frames).map_err(|e| fail(e.to_string()))
}

#[derive(Serialize)]
struct SequenceDocOut<'a, const D: usize> {
    topology: &'a JointTopology,
    #[serde(serialize_with = "serialize_frames")]
    frames: Vec<&'a [[f64; D]]>,
}

fn serialize_frames<S: serde::Serializer, const D: usize>(
    frames: &[&[[f64; D]]],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(frames.len()))?;
    for f in frames {
        let points: Vec<&[f64]> = f.iter().map(|c| c.as_slice()).collect();
        seq.serialize_element(&points)?;
    }
    seq.end()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceDocIn {
    topology: JointTopology,
    frames: Vec<Vec<Vec<f64>>>,
}

pub fn sequence_to_json<const D: usize>(seq: &PoseSequence<D>) -> String {
    let doc = SequenceDocOut {
        topology: seq.topology(),
        frames: seq.frames().iter().map(|f| f.coords()).collect(),
    };
    serde_json::to_string(&doc).expect("sequence serializes")
}

/// Parses the JSON form. When `expected` is given, the embedded topology must
/// match it and the loaded sequence shares that instance.
pub fn sequence_from_json<const D: usize>(
    text: &str,
    source_name: &str,
    expected: Option<&Arc<JointTopology>>,
) -> Result<PoseSequence<D>> {
    let fail = |msg: String| Error::load(source_name, msg);
    let doc: SequenceDocIn = serde_json::from_str(text).map_err(|e| fail(e.to_string()))?;
    let topology = match expected {
        Some(t) if **t != doc.topology => {
            return Err(fail("topology differs from the expected skeleton".into()));
        }
        Some(t) => t.clone(),
        None => Arc::new(doc.topology),
    };
    if doc.frames.is_empty() {
        return Err(fail("no frames".into()));
    }
    let p = topology.len();
    let mut frames = Vec::with_capacity(doc.frames.len());
    for (t, frame) in doc.frames.into_iter().enumerate() {
        if frame.len() != p {
            return Err(fail(format!("frames[{t}] has {} joints, expected {p}", frame.len())));
        }
        let mut coords = Vec::with_capacity(p);
        for (j, point) in frame.into_iter().enumerate() {
            if point.len() != D {
                return Err(fail(format!(
                    "frames[{t}][{j}] ('{}') has {} coordinates, expected {D}",
                    topology.name(j),
                    point.len()
                )));
            }
            let mut c = [0.0; D];
            c.copy_from_slice(&point);
            coords.push(c);
        }
        frames.push(coords);
    }
    PoseSequence::from_coords(topology, frames).map_err(|e| fail(e.to_string()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `text`, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a sequence, picking the format from the extension. CSV joint names
/// resolve against `topology`; a JSON file must carry the same topology.
pub fn load_sequence<const D: usize>(
    path: &Path,
    topology: &Arc<JointTopology>,
) -> Result<PoseSequence<D>> {
    let format = SequenceFormat::from_path(path)?;
    let text = read_text(path)?;
    let name = path.display().to_string();
    match format {
        SequenceFormat::Csv => sequence_from_csv(&text, &name, topology),
        SequenceFormat::Json => sequence_from_json(&text, &name, Some(topology)),
    }
}

/// Loads a JSON sequence with whatever topology it declares.
pub fn load_sequence_json<const D: usize>(path: &Path) -> Result<PoseSequence<D>> {
    let text = read_text(path)?;
    sequence_from_json(&text, &path.display().to_string(), None)
}

pub fn save_sequence<const D: usize>(
    seq: &PoseSequence<D>,
    path: &Path,
    file: SequenceFile,
) -> Result<()> {
    if file.dims != D {
        return Err(Error::Structural(format!(
            "cannot save a {D}D sequence as {}D",
            file.dims
        )));
    }
    let text = match file.format {
        SequenceFormat::Csv => sequence_to_csv(seq),
        SequenceFormat::Json => sequence_to_json(seq),
    };
    write_text(path, &text)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_text(path, &to_json_pretty(value))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::load(path.display().to_string(), e.to_string()))
}

/// Sequence with every frame checked against `topology`; used where frames
/// are assembled by hand.
pub fn sequence_of<const D: usize>(
    topology: &Arc<JointTopology>,
    frames: Vec<Vec<[f64; D]>>,
) -> Result<PoseSequence<D>> {
    let poses = frames
        .into_iter()
        .map(|c| Pose::new(topology.clone(), c))
        .collect::<Result<Vec<_>>>()?;
    PoseSequence::new(poses)
}
