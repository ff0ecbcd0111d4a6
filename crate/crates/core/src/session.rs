//! Line-delimited session files.
//!
//! Every line is a JSON object tagged by `"type"`. The first line is the
//! header; frame and label lines follow in any order (frames are written
//! first, then labels, but live recordings may interleave them).
//!
//! ```text
//! {"type":"header","schema_version":1,"subject":3,"session":2,"rate":20.0,"provenance":"simulated","metadata":{...}}
//! {"type":"frame","counter":0,"t":0,"mag":498.7,"phase":-2.31}
//! {"type":"label","class":3,"start_ms":1500,"end_ms":3420}
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gesture::GestureClass;
use crate::protocol::SampleFrame;
use crate::stream::{LabelInterval, LabeledStream, StreamSample};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Simulated,
    Replayed,
    LiveConsole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub schema_version: u32,
    pub subject_id: u32,
    pub session_id: u32,
    pub sample_rate: f64,
    pub frames: Vec<SampleFrame>,
    pub labels: Vec<LabelInterval>,
    pub provenance: Provenance,
    /// Free-form provenance payload: run configuration, seeds.
    pub metadata: serde_json::Value,
}

impl SessionRecord {
    /// Quantizes a stream to the on-wire `f32` representation.
    pub fn from_stream(stream: &LabeledStream, subject_id: u32, session_id: u32, provenance: Provenance) -> Self {
        let frames = stream
            .frames
            .iter()
            .enumerate()
            .map(|(i, s)| SampleFrame {
                counter: i as u32,
                timestamp_ms: s.timestamp_ms,
                magnitude: s.magnitude as f32,
                phase: s.phase_deg as f32,
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            subject_id,
            session_id,
            sample_rate: stream.sample_rate,
            frames,
            labels: stream.labels.clone(),
            provenance,
            metadata: serde_json::Value::Null,
        }
    }

    pub fn to_stream(&self) -> LabeledStream {
        LabeledStream {
            sample_rate: self.sample_rate,
            frames: self
                .frames
                .iter()
                .map(|f| StreamSample {
                    timestamp_ms: f.timestamp_ms,
                    magnitude: f64::from(f.magnitude),
                    phase_deg: f64::from(f.phase),
                })
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: unsupported schema version {found} (expected {SCHEMA_VERSION})")]
    SchemaMismatch { path: PathBuf, found: u32 },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

impl SessionError {
    /// 1-based line number of a parse error.
    pub fn line(&self) -> Option<usize> {
        match self {
            SessionError::Parse { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header {
        schema_version: u32,
        subject: u32,
        session: u32,
        rate: f64,
        provenance: Provenance,
        #[serde(default)]
        metadata: serde_json::Value,
    },
    Frame {
        counter: u32,
        t: u32,
        mag: f32,
        phase: f32,
    },
    Label {
        class: GestureClass,
        start_ms: u32,
        end_ms: u32,
    },
}

pub fn header_line(rec: &SessionRecord) -> String {
    line_json(&Line::Header {
        schema_version: rec.schema_version,
        subject: rec.subject_id,
        session: rec.session_id,
        rate: rec.sample_rate,
        provenance: rec.provenance,
        metadata: rec.metadata.clone(),
    })
}

pub fn frame_line(f: &SampleFrame) -> String {
    line_json(&Line::Frame { counter: f.counter, t: f.timestamp_ms, mag: f.magnitude, phase: f.phase })
}

pub fn label_line(l: &LabelInterval) -> String {
    line_json(&Line::Label { class: l.class, start_ms: l.start_ms, end_ms: l.end_ms })
}

fn line_json(line: &Line) -> String {
    serde_json::to_string(line).expect("session lines always serialize")
}

pub fn write_session<W: Write>(rec: &SessionRecord, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", header_line(rec))?;
    for f in &rec.frames {
        writeln!(w, "{}", frame_line(f))?;
    }
    for l in &rec.labels {
        writeln!(w, "{}", label_line(l))?;
    }
    w.flush()
}

pub fn save_session(rec: &SessionRecord, path: &Path) -> Result<(), SessionError> {
    let io = |source| SessionError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    write_session(rec, BufWriter::new(file)).map_err(io)
}

pub fn read_session<R: BufRead>(reader: R, path: &Path) -> Result<SessionRecord, SessionError> {
    let parse = |line: usize, msg: String| SessionError::Parse { path: path.to_path_buf(), line, msg };
    let mut rec: Option<SessionRecord> = None;
    for (i, text) in reader.lines().enumerate() {
        let line_no = i + 1;
        let text = text.map_err(|source| SessionError::Io { path: path.to_path_buf(), source })?;
        if text.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(&text).map_err(|e| parse(line_no, e.to_string()))?;
        match (line, rec.as_mut()) {
            (Line::Header { schema_version, subject, session, rate, provenance, metadata }, None) => {
                if schema_version != SCHEMA_VERSION {
                    return Err(SessionError::SchemaMismatch { path: path.to_path_buf(), found: schema_version });
                }
                rec = Some(SessionRecord {
                    schema_version,
                    subject_id: subject,
                    session_id: session,
                    sample_rate: rate,
                    frames: Vec::new(),
                    labels: Vec::new(),
                    provenance,
                    metadata,
                });
            }
            (Line::Header { .. }, Some(_)) => return Err(parse(line_no, "duplicate header".into())),
            (_, None) => return Err(parse(line_no, "expected header line first".into())),
            (Line::Frame { counter, t, mag, phase }, Some(r)) => {
                r.frames.push(SampleFrame { counter, timestamp_ms: t, magnitude: mag, phase })
            }
            (Line::Label { class, start_ms, end_ms }, Some(r)) => {
                if end_ms < start_ms {
                    return Err(parse(line_no, format!("label ends before it starts ({start_ms} > {end_ms})")));
                }
                r.labels.push(LabelInterval { class, start_ms, end_ms })
            }
        }
    }
    rec.ok_or_else(|| parse(1, "missing header".into()))
}

pub fn load_session(path: &Path) -> Result<SessionRecord, SessionError> {
    let file = File::open(path).map_err(|source| SessionError::Io { path: path.to_path_buf(), source })?;
    read_session(BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: u32) -> SessionRecord {
        SessionRecord {
            schema_version: SCHEMA_VERSION,
            subject_id: 4,
            session_id: 2,
            sample_rate: 20.0,
            frames: (0..n)
                .map(|i| SampleFrame { counter: i, timestamp_ms: i * 50, magnitude: 500.0 - i as f32 * 0.1, phase: -2.3 })
                .collect(),
            labels: vec![LabelInterval { class: GestureClass::Boredom, start_ms: 100, end_ms: 300 }],
            provenance: Provenance::Simulated,
            metadata: serde_json::json!({"seed": 7}),
        }
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let rec = record(25);
        save_session(&rec, &path).unwrap();
        assert_eq!(load_session(&path).unwrap(), rec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 25 + 1);
        assert!(text.lines().next().unwrap().starts_with(r#"{"type":"header""#));
    }

    #[test]
    fn empty_session_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        let rec = SessionRecord { labels: vec![], ..record(0) };
        save_session(&rec, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        assert_eq!(load_session(&path).unwrap(), rec);
    }

    #[test]
    fn corrupted_line_reports_its_number() {
        let mut buf = Vec::new();
        write_session(&record(10), &mut buf).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf).unwrap().lines().map(String::from).collect();
        lines[4] = r#"{"type":"frame","counter":3,"t":"#.into();
        let text = lines.join("\n");
        let err = read_session(text.as_bytes(), Path::new("x")).unwrap_err();
        assert_eq!(err.line(), Some(5), "{err}");
    }

    #[test]
    fn schema_mismatch() {
        let text = r#"{"type":"header","schema_version":9,"subject":1,"session":1,"rate":20.0,"provenance":"simulated"}"#;
        let err = read_session(text.as_bytes(), Path::new("x")).unwrap_err();
        assert!(matches!(err, SessionError::SchemaMismatch { found: 9, .. }));
    }

    #[test]
    fn frames_before_header_rejected() {
        let text = r#"{"type":"frame","counter":0,"t":0,"mag":1.0,"phase":0.0}"#;
        let err = read_session(text.as_bytes(), Path::new("x")).unwrap_err();
        assert_eq!(err.line(), Some(1));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_session(Path::new("/nonexistent/dir/s.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/s.jsonl"));
    }
}
