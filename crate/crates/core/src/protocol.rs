//! Device frame format and stream synchronization.
//!
//! Frame layout, 20 bytes, all multi-byte fields little-endian:
//!
//! ```text
//! 0..2    sync      0xA5 0x5A
//! 2..6    counter   u32
//! 6..10   timestamp u32, milliseconds
//! 10..14  magnitude f32, ohms
//! 14..18  phase     f32, degrees
//! 18..20  crc       u16, CRC-16/CCITT-FALSE over bytes 2..18
//! ```

use serde::{Deserialize, Serialize};

pub const SYNC: [u8; 2] = [0xA5, 0x5A];
pub const FRAME_LEN: usize = 20;
const PAYLOAD: std::ops::Range<usize> = 2..18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleFrame {
    pub counter: u32,
    pub timestamp_ms: u32,
    pub magnitude: f32,
    pub phase: f32,
}

impl SampleFrame {
    /// Bitwise equality, so NaN payloads compare equal to themselves.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.counter == other.counter
            && self.timestamp_ms == other.timestamp_ms
            && self.magnitude.to_bits() == other.magnitude.to_bits()
            && self.phase.to_bits() == other.phase.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("need {FRAME_LEN} bytes, got {0}")]
    Truncated(usize),
    #[error("bad sync bytes {0:#04x} {1:#04x}")]
    BadSync(u8, u8),
    #[error("crc mismatch: computed {computed:#06x}, frame carries {carried:#06x}")]
    BadCrc { computed: u16, carried: u16 },
}

const CRC_POLY: u16 = 0x1021;

const CRC_TABLE: [u16; 256] = {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ CRC_POLY } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
};

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
pub fn crc16_ccitt_false(bytes: &[u8]) -> u16 {
    bytes
        .iter()
        .fold(0xFFFF, |crc, &b| (crc << 8) ^ CRC_TABLE[usize::from((crc >> 8) as u8 ^ b)])
}

pub fn encode_frame(f: &SampleFrame) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[..2].copy_from_slice(&SYNC);
    out[2..6].copy_from_slice(&f.counter.to_le_bytes());
    out[6..10].copy_from_slice(&f.timestamp_ms.to_le_bytes());
    out[10..14].copy_from_slice(&f.magnitude.to_le_bytes());
    out[14..18].copy_from_slice(&f.phase.to_le_bytes());
    let crc = crc16_ccitt_false(&out[PAYLOAD]);
    out[18..20].copy_from_slice(&crc.to_le_bytes());
    out
}

/// Decodes the first [`FRAME_LEN`] bytes of `b`.
pub fn decode_frame(b: &[u8]) -> Result<SampleFrame, FrameError> {
    if b.len() < FRAME_LEN {
        return Err(FrameError::Truncated(b.len()));
    }
    if b[..2] != SYNC {
        return Err(FrameError::BadSync(b[0], b[1]));
    }
    let computed = crc16_ccitt_false(&b[PAYLOAD]);
    let carried = u16::from_le_bytes([b[18], b[19]]);
    if computed != carried {
        return Err(FrameError::BadCrc { computed, carried });
    }
    let word = |i: usize| [b[i], b[i + 1], b[i + 2], b[i + 3]];
    Ok(SampleFrame {
        counter: u32::from_le_bytes(word(2)),
        timestamp_ms: u32::from_le_bytes(word(6)),
        magnitude: f32::from_le_bytes(word(10)),
        phase: f32::from_le_bytes(word(14)),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoderStats {
    pub frames: u64,
    pub crc_errors: u64,
    pub bytes_skipped: u64,
}

/// Incremental byte-stream decoder. Scans for the sync word; a frame with a
/// bad CRC is dropped, counted, and scanning resumes one byte past its sync
/// so a false sync inside garbage cannot swallow a real frame.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    stats: DecoderStats,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> DecoderStats {
        self.stats
    }

    /// Feeds bytes and returns every complete valid frame found so far.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<SampleFrame> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut pos = 0;
        while self.buf.len() - pos >= FRAME_LEN {
            match decode_frame(&self.buf[pos..]) {
                Ok(f) => {
                    out.push(f);
                    self.stats.frames += 1;
                    pos += FRAME_LEN;
                }
                Err(FrameError::BadCrc { .. }) => {
                    self.stats.crc_errors += 1;
                    self.stats.bytes_skipped += 1;
                    pos += 1;
                }
                Err(_) => {
                    self.stats.bytes_skipped += 1;
                    pos += 1;
                }
            }
        }
        self.buf.drain(..pos);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SyncError {
    #[error("empty stream")]
    EmptyStream,
    #[error("target rate must be positive and finite")]
    BadRate,
    #[error("timestamps decrease at index {0}")]
    Decreasing(usize),
}

/// Interval between two consecutive input samples that spans at least one
/// whole missing grid slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after_ms: u32,
    pub before_ms: u32,
    /// Grid points inside the gap that were filled by holding `after_ms`'s value.
    pub filled: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synchronized {
    pub frames: Vec<SampleFrame>,
    pub gaps: Vec<Gap>,
}

/// Resamples onto an exact `1000 / target_rate` ms grid starting at the first
/// timestamp.
///
/// Each grid point takes the nearest input sample (ties go to the earlier
/// one). Inside a gap, an input interval of two or more periods, grid points
/// hold the last value before the gap instead. Output counters are
/// renumbered consecutively from the first input counter.
pub fn synchronize_stream(frames: &[SampleFrame], target_rate: f64) -> Result<Synchronized, SyncError> {
    if !(target_rate.is_finite() && target_rate > 0.0) {
        return Err(SyncError::BadRate);
    }
    let first = frames.first().ok_or(SyncError::EmptyStream)?;
    if let Some(i) = frames.windows(2).position(|w| w[1].timestamp_ms < w[0].timestamp_ms) {
        return Err(SyncError::Decreasing(i + 1));
    }
    let period = 1000.0 / target_rate;
    let gap_threshold = 2.0 * period - 1e-9;
    let t0 = f64::from(first.timestamp_ms);
    let span = f64::from(frames[frames.len() - 1].timestamp_ms) - t0;
    let n = (span / period + 1e-9).floor() as usize + 1;

    let mut out = Vec::with_capacity(n);
    let mut gaps: Vec<Gap> = Vec::new();
    let mut j = 0; // frames[j] is the last sample with timestamp <= grid point
    for k in 0..n {
        let g = t0 + k as f64 * period;
        while j + 1 < frames.len() && f64::from(frames[j + 1].timestamp_ms) <= g {
            j += 1;
        }
        let before = &frames[j];
        let src = match frames.get(j + 1) {
            Some(after) => {
                let (tb, ta) = (f64::from(before.timestamp_ms), f64::from(after.timestamp_ms));
                if ta - tb >= gap_threshold {
                    if g > tb {
                        match gaps.last_mut() {
                            Some(gap) if gap.after_ms == before.timestamp_ms => gap.filled += 1,
                            _ => gaps.push(Gap { after_ms: before.timestamp_ms, before_ms: after.timestamp_ms, filled: 1 }),
                        }
                    }
                    before
                } else if ta - g < g - tb {
                    after
                } else {
                    before
                }
            }
            None => before,
        };
        out.push(SampleFrame {
            counter: first.counter.wrapping_add(k as u32),
            timestamp_ms: g.round() as u32,
            magnitude: src.magnitude,
            phase: src.phase,
        });
    }
    Ok(Synchronized { frames: out, gaps })
}
