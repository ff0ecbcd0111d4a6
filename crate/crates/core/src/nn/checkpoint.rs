//! Checkpoint file: one JSON header line followed by every parameter tensor in
//! declaration order as little-endian `f64`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig};
use super::NnError;

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;
const FORMAT_TAG: &str = "handface-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub schema_version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub param_count: usize,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Model,
}

impl Checkpoint {
    pub fn new(model: Model, seed: u64, metadata: serde_json::Value) -> Self {
        let header = CheckpointHeader {
            format: FORMAT_TAG.to_string(),
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            config: model.config.clone(),
            seed,
            param_count: model.config.param_count(),
            metadata,
        };
        Self { header, model }
    }
}

fn bad(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> Result<(), NnError> {
    let header = serde_json::to_string(&ckpt.header).map_err(|e| bad(e.to_string()))?;
    let io = |e: std::io::Error| bad(e.to_string());
    w.write_all(header.as_bytes()).map_err(io)?;
    w.write_all(b"\n").map_err(io)?;
    for p in ckpt.model.params() {
        for v in p.data() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint, NnError> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(|e| bad(e.to_string()))?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end()).map_err(|e| bad(format!("header: {e}")))?;
    if header.format != FORMAT_TAG {
        return Err(bad(format!("unexpected format tag {:?}", header.format)));
    }
    if header.schema_version != CHECKPOINT_SCHEMA_VERSION {
        return Err(bad(format!("unsupported schema version {}", header.schema_version)));
    }
    if header.param_count != header.config.param_count() {
        return Err(bad(format!("header declares {} parameters, config implies {}", header.param_count, header.config.param_count())));
    }
    let mut model = Model::zeros(&header.config)?;
    let mut buf = [0u8; 8];
    for p in model.params_mut() {
        for v in p.data_mut() {
            reader.read_exact(&mut buf).map_err(|_| bad("parameter buffer truncated"))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if reader.read(&mut buf).map_err(|e| bad(e.to_string()))? != 0 {
        return Err(bad("trailing bytes after parameter buffer"));
    }
    Ok(Checkpoint { header, model })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), NnError> {
    let file = std::fs::File::create(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    write_checkpoint(ckpt, std::io::BufWriter::new(file))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, NnError> {
    let file = std::fs::File::open(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    read_checkpoint(file)
}
