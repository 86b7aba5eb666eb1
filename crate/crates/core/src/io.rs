//! CSV ingestion and export with a declarative column-mapping schema.
//!
//! Input files carry one row per sample with a header row. A
//! [`SchemaConfig`] maps column names to subject/session identifiers and to
//! stream components, so the loader is not tied to one export format.
//! Cells that are empty, `NaN`, non-finite, or unparseable mask the sample
//! for that stream rather than failing the load.

use crate::model::{
    align_streams, Dataset, ModelError, SessionRecording, StreamKind, TimeSeries,
    NOMINAL_RATE_HZ,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

fn default_rate() -> f64 {
    NOMINAL_RATE_HZ
}

/// Maps CSV columns to the data model.
///
/// `gaze` may list two columns (pre-computed angles in degrees) or three
/// (a direction vector); head and hand streams always list three position
/// columns in `[x, y, z]` order with `y` vertical. An optional `time`
/// column (seconds) lets the loader cross-check the declared sample rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub subject: String,
    pub session: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<String>,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_hand: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_hand: Option<Vec<String>>,
}

impl SchemaConfig {
    /// The schema used by [`write_dataset`]: canonical column names for
    /// every stream, 90 Hz, gaze arity as given.
    pub fn canonical(gaze_arity: usize) -> Self {
        let gaze = match gaze_arity {
            2 => vec!["gaze_h".into(), "gaze_v".into()],
            _ => vec!["gaze_x".into(), "gaze_y".into(), "gaze_z".into()],
        };
        SchemaConfig {
            subject: "subject".into(),
            session: "session".into(),
            time: None,
            rate_hz: NOMINAL_RATE_HZ,
            gaze: Some(gaze),
            head: Some(vec!["head_x".into(), "head_y".into(), "head_z".into()]),
            left_hand: Some(vec![
                "left_hand_x".into(),
                "left_hand_y".into(),
                "left_hand_z".into(),
            ]),
            right_hand: Some(vec![
                "right_hand_x".into(),
                "right_hand_y".into(),
                "right_hand_z".into(),
            ]),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, ModelError> {
        let schema: SchemaConfig = serde_json::from_str(json)
            .map_err(|e| ModelError::InvalidSchema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.rate_hz <= 0.0 {
            return Err(ModelError::InvalidSchema("rate_hz must be positive".into()));
        }
        let mut any = false;
        if let Some(g) = &self.gaze {
            if g.len() != 2 && g.len() != 3 {
                return Err(ModelError::InvalidSchema(
                    "gaze must map 2 (angles) or 3 (vector) columns".into(),
                ));
            }
            any = true;
        }
        for (name, cols) in [
            ("head", &self.head),
            ("left_hand", &self.left_hand),
            ("right_hand", &self.right_hand),
        ] {
            if let Some(c) = cols {
                if c.len() != 3 {
                    return Err(ModelError::InvalidSchema(format!(
                        "{name} must map exactly 3 columns"
                    )));
                }
                any = true;
            }
        }
        if !any {
            return Err(ModelError::InvalidSchema("no stream columns mapped".into()));
        }
        Ok(())
    }

    fn stream_columns(&self) -> Vec<(StreamKind, &[String])> {
        let mut out = Vec::new();
        if let Some(c) = &self.gaze {
            out.push((StreamKind::Gaze, c.as_slice()));
        }
        if let Some(c) = &self.head {
            out.push((StreamKind::Head, c.as_slice()));
        }
        if let Some(c) = &self.left_hand {
            out.push((StreamKind::LeftHand, c.as_slice()));
        }
        if let Some(c) = &self.right_hand {
            out.push((StreamKind::RightHand, c.as_slice()));
        }
        out
    }
}

/// Parses a numeric cell; `None` marks the sample missing.
fn parse_cell(cell: &str) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() || t.eq_ignore_ascii_case("nan") {
        return None;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

fn parse_session(cell: &str) -> Result<u32, ModelError> {
    let t = cell.trim();
    if let Ok(v) = t.parse::<u32>() {
        return Ok(v);
    }
    if let Ok(v) = t.parse::<f64>() {
        if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
            return Ok(v as u32);
        }
    }
    Err(ModelError::InvalidSchema(format!("session value {t:?} is not an ordinal")))
}

#[derive(Default)]
struct SessionAccumulator {
    /// per stream: (column-major values, per-sample mask)
    streams: BTreeMap<StreamKind, (Vec<Vec<f64>>, Vec<bool>)>,
    times: Vec<f64>,
    rows: usize,
}

/// Loads a dataset from a CSV file or a directory of CSV files.
///
/// Rows are grouped by (subject, session); groups spanning multiple files
/// are concatenated in file order. Streams whose samples are all masked are
/// dropped, and every recording is stream-aligned before it is returned.
pub fn load_dataset(path: &Path, schema: &SchemaConfig) -> Result<Dataset, ModelError> {
    schema.validate()?;
    let files = csv_files(path)?;
    if files.is_empty() {
        return Err(ModelError::EmptyDataset);
    }

    let mut order: Vec<(String, u32)> = Vec::new();
    let mut groups: BTreeMap<(String, u32), SessionAccumulator> = BTreeMap::new();
    for file in &files {
        load_file(file, schema, &mut order, &mut groups)?;
    }

    let mut recordings = Vec::new();
    for key in order {
        let acc = groups.remove(&key).expect("group recorded in order list");
        let (subject_id, session_index) = key;
        check_rate(schema, &acc)?;
        let mut streams = BTreeMap::new();
        for (kind, (components, missing)) in acc.streams {
            if missing.iter().all(|&m| m) {
                continue; // a fully masked stream is treated as absent
            }
            streams.insert(
                kind,
                TimeSeries::new(kind, schema.rate_hz, components, missing),
            );
        }
        if streams.is_empty() {
            continue;
        }
        let rec = SessionRecording { subject_id, session_index, streams };
        recordings.push(align_streams(&rec)?);
    }
    if recordings.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let d = Dataset { recordings };
    d.validate()?;
    Ok(d)
}

fn csv_files(path: &Path) -> Result<Vec<PathBuf>, ModelError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        Ok(files)
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        Err(ModelError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} not found", path.display()),
        )))
    }
}

fn load_file(
    file: &Path,
    schema: &SchemaConfig,
    order: &mut Vec<(String, u32)>,
    groups: &mut BTreeMap<(String, u32), SessionAccumulator>,
) -> Result<(), ModelError> {
    let mut reader = csv::Reader::from_path(file)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, ModelError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ModelError::MissingColumn(name.to_string()))
    };

    let subject_col = col(&schema.subject)?;
    let session_col = col(&schema.session)?;
    let time_col = schema.time.as_deref().map(col).transpose()?;
    let mut stream_cols: Vec<(StreamKind, Vec<usize>)> = Vec::new();
    for (kind, names) in schema.stream_columns() {
        let idx: Result<Vec<usize>, ModelError> = names.iter().map(|n| col(n)).collect();
        stream_cols.push((kind, idx?));
    }

    for record in reader.records() {
        let record = record?;
        let subject = record.get(subject_col).unwrap_or("").trim().to_string();
        if subject.is_empty() {
            continue;
        }
        let session = parse_session(record.get(session_col).unwrap_or(""))?;
        let key = (subject, session);
        if !groups.contains_key(&key) {
            order.push(key.clone());
            groups.insert(key.clone(), SessionAccumulator::default());
        }
        let acc = groups.get_mut(&key).expect("group just inserted");
        acc.rows += 1;
        if let Some(tc) = time_col {
            if let Some(t) = parse_cell(record.get(tc).unwrap_or("")) {
                acc.times.push(t);
            }
        }
        for (kind, cols) in &stream_cols {
            let entry = acc
                .streams
                .entry(*kind)
                .or_insert_with(|| (vec![Vec::new(); cols.len()], Vec::new()));
            let cells: Vec<Option<f64>> = cols
                .iter()
                .map(|&c| parse_cell(record.get(c).unwrap_or("")))
                .collect();
            let masked = cells.iter().any(Option::is_none);
            for (comp, cell) in entry.0.iter_mut().zip(cells) {
                comp.push(cell.unwrap_or(0.0));
            }
            entry.1.push(masked);
        }
    }
    Ok(())
}

/// Rejects sessions whose time column implies a rate more than 5% away from
/// the declared one. Without a time column no inference is possible.
fn check_rate(schema: &SchemaConfig, acc: &SessionAccumulator) -> Result<(), ModelError> {
    if acc.times.len() < 2 {
        return Ok(());
    }
    let span = acc.times.last().unwrap() - acc.times.first().unwrap();
    if span <= 0.0 {
        return Ok(());
    }
    let inferred = (acc.times.len() - 1) as f64 / span;
    if (inferred - schema.rate_hz).abs() / schema.rate_hz > 0.05 {
        return Err(ModelError::RateMismatch { declared: schema.rate_hz, inferred });
    }
    Ok(())
}

/// Writes a dataset as one canonical CSV per recording plus a `schema.json`
/// that [`load_dataset`] accepts. Masked samples become `NaN` cells, and a
/// stream absent from a recording is written fully masked (the loader drops
/// it again on reload).
pub fn write_dataset(d: &Dataset, dir: &Path) -> Result<(), ModelError> {
    let gaze_arity = d
        .recordings
        .iter()
        .filter_map(|r| r.stream(StreamKind::Gaze))
        .map(TimeSeries::arity)
        .max()
        .unwrap_or(3);
    for r in &d.recordings {
        if let Some(g) = r.stream(StreamKind::Gaze) {
            if g.arity() != gaze_arity {
                return Err(ModelError::InvalidSchema(
                    "mixed gaze arity across recordings cannot be exported".into(),
                ));
            }
        }
    }

    fs::create_dir_all(dir)?;
    let schema = SchemaConfig::canonical(gaze_arity);
    let schema_json = serde_json::to_string_pretty(&schema)
        .map_err(|e| ModelError::InvalidSchema(e.to_string()))?;
    fs::write(dir.join("schema.json"), schema_json + "\n")?;

    for (i, r) in d.recordings.iter().enumerate() {
        let path = dir.join(format!("recording_{i:04}.csv"));
        write_recording(r, &schema, gaze_arity, &path)?;
    }
    Ok(())
}

fn write_recording(
    r: &SessionRecording,
    schema: &SchemaConfig,
    gaze_arity: usize,
    path: &Path,
) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![schema.subject.clone(), schema.session.clone()];
    for (kind, cols) in schema.stream_columns() {
        let arity = if kind == StreamKind::Gaze { gaze_arity } else { 3 };
        header.extend(cols.iter().take(arity).cloned());
    }
    w.write_record(&header)?;

    let n = r.sample_count();
    for t in 0..n {
        let mut row = vec![r.subject_id.clone(), r.session_index.to_string()];
        for (kind, cols) in schema.stream_columns() {
            let arity = if kind == StreamKind::Gaze { gaze_arity } else { 3 };
            match r.stream(kind) {
                Some(s) if !s.missing[t] => {
                    for c in 0..arity {
                        row.push(format!("{}", s.components[c][t]));
                    }
                }
                _ => row.extend(std::iter::repeat_n("NaN".to_string(), cols.len().min(arity))),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Loads a dataset from a canonical directory written by [`write_dataset`],
/// reading the schema from `schema.json` inside it.
pub fn load_canonical(dir: &Path) -> Result<Dataset, ModelError> {
    let schema_path = dir.join("schema.json");
    let json = fs::read_to_string(&schema_path)?;
    let schema = SchemaConfig::from_json(&json)?;
    load_dataset(dir, &schema)
}
