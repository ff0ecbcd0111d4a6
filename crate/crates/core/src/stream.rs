use serde::{Deserialize, Serialize};

use crate::gesture::GestureClass;

/// One synchronized (magnitude, phase) reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamSample {
    pub timestamp_ms: u32,
    pub magnitude: f64,
    pub phase_deg: f64,
}

/// Ground-truth gesture interval, half-open `[start_ms, end_ms)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub class: GestureClass,
    pub start_ms: u32,
    pub end_ms: u32,
}

impl LabelInterval {
    pub fn contains(&self, t_ms: u32) -> bool {
        self.start_ms <= t_ms && t_ms < self.end_ms
    }

    pub fn duration_ms(&self) -> u32 {
        self.end_ms.saturating_sub(self.start_ms)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StreamError {
    #[error("sample rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("timestamps not strictly increasing at index {0}")]
    NonMonotonic(usize),
    #[error("label {index} is empty or overlaps its predecessor")]
    BadLabel { index: usize },
}

/// A session's sample sequence plus its gesture label intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabeledStream {
    pub sample_rate: f64,
    pub frames: Vec<StreamSample>,
    pub labels: Vec<LabelInterval>,
}

impl LabeledStream {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.sample_rate
    }

    /// Class of the sample at `t_ms`; `Null` where no interval covers it.
    pub fn label_at(&self, t_ms: u32) -> GestureClass {
        self.labels.iter().find(|l| l.contains(t_ms)).map_or(GestureClass::Null, |l| l.class)
    }

    /// Per-sample ground truth, computed in one merge pass over the sorted
    /// label list.
    pub fn sample_labels(&self) -> Vec<GestureClass> {
        let mut labels = self.labels.clone();
        labels.sort_by_key(|l| l.start_ms);
        let mut out = Vec::with_capacity(self.frames.len());
        let mut li = 0;
        for f in &self.frames {
            while li < labels.len() && labels[li].end_ms <= f.timestamp_ms {
                li += 1;
            }
            let class = match labels.get(li) {
                Some(l) if l.contains(f.timestamp_ms) => l.class,
                _ => GestureClass::Null,
            };
            out.push(class);
        }
        out
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().map(|f| f.magnitude)
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(StreamError::BadRate(self.sample_rate));
        }
        for (i, w) in self.frames.windows(2).enumerate() {
            if w[1].timestamp_ms <= w[0].timestamp_ms {
                return Err(StreamError::NonMonotonic(i + 1));
            }
        }
        let mut sorted = self.labels.clone();
        sorted.sort_by_key(|l| l.start_ms);
        for (i, l) in sorted.iter().enumerate() {
            if l.end_ms <= l.start_ms || (i > 0 && sorted[i - 1].end_ms > l.start_ms) {
                return Err(StreamError::BadLabel { index: i });
            }
        }
        Ok(())
    }
}
