//! Sliding windows, per-window channel-wise normalization and class weights.

use rayon::prelude::*;

use crate::gesture::GestureClass;
use crate::stream::LabeledStream;

pub const CHANNELS: usize = 2;
pub const MIN_WINDOW: usize = 50;
pub const MAX_WINDOW: usize = 120;
pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("stream has {len} samples, shorter than window {window}")]
    StreamTooShort { len: usize, window: usize },
    #[error("window size {0} outside [{MIN_WINDOW}, {MAX_WINDOW}]")]
    BadWindow(usize),
    #[error("step must be at least 1")]
    BadStep,
    #[error("no labeled samples to weight")]
    EmptyDataset,
    #[error("cannot concatenate batches with window sizes {0} and {1}")]
    WindowMismatch(usize, usize),
}

/// `N × 2 × W` windows (magnitude, phase) in row-major order with one class
/// label per window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowBatch {
    pub data: Vec<f64>,
    pub labels: Vec<GestureClass>,
    pub window_size: usize,
    pub step: usize,
}

impl WindowBatch {
    pub fn empty(window_size: usize, step: usize) -> Self {
        Self { data: Vec::new(), labels: Vec::new(), window_size, step }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_len(&self) -> usize {
        CHANNELS * self.window_size
    }

    /// Both channels of window `i`, magnitude first.
    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.window_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn label_counts(&self) -> [usize; GestureClass::COUNT] {
        let mut counts = [0; GestureClass::COUNT];
        for l in &self.labels {
            counts[l.index()] += 1;
        }
        counts
    }

    pub fn push(&mut self, window: &[f64], label: GestureClass) {
        debug_assert_eq!(window.len(), self.window_len());
        self.data.extend_from_slice(window);
        self.labels.push(label);
    }

    pub fn append(&mut self, other: &WindowBatch) -> Result<(), PreprocessError> {
        if !other.is_empty() && self.window_size != other.window_size {
            return Err(PreprocessError::WindowMismatch(self.window_size, other.window_size));
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        Ok(())
    }

    pub fn concat<'a>(batches: impl IntoIterator<Item = &'a WindowBatch>) -> Result<WindowBatch, PreprocessError> {
        let mut iter = batches.into_iter();
        let Some(first) = iter.next() else {
            return Ok(WindowBatch::default());
        };
        let mut out = first.clone();
        for b in iter {
            out.append(b)?;
        }
        Ok(out)
    }

    /// Normalizes every window in place.
    pub fn normalize(&mut self) {
        let w = self.window_size;
        self.data.par_chunks_mut(w).for_each(normalize_channel);
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }
}

pub fn window_count(n: usize, w: usize, step: usize) -> usize {
    if n < w || step == 0 {
        0
    } else {
        (n - w) / step + 1
    }
}

/// Extracts (unnormalized) windows `[i·step, i·step + w)`. Each window is
/// labeled with the ground-truth class of its center sample
/// `i·step + ⌊w/2⌋`.
pub fn sliding_windows(stream: &LabeledStream, w: usize, step: usize) -> Result<WindowBatch, PreprocessError> {
    if !(MIN_WINDOW..=MAX_WINDOW).contains(&w) {
        return Err(PreprocessError::BadWindow(w));
    }
    if step == 0 {
        return Err(PreprocessError::BadStep);
    }
    let n = stream.len();
    if n < w {
        return Err(PreprocessError::StreamTooShort { len: n, window: w });
    }
    let per_sample = stream.sample_labels();
    let count = window_count(n, w, step);
    let mut batch = WindowBatch { data: Vec::with_capacity(count * CHANNELS * w), labels: Vec::with_capacity(count), window_size: w, step };
    for i in 0..count {
        let start = i * step;
        let frames = &stream.frames[start..start + w];
        batch.data.extend(frames.iter().map(|f| f.magnitude));
        batch.data.extend(frames.iter().map(|f| f.phase_deg));
        batch.labels.push(per_sample[start + w / 2]);
    }
    Ok(batch)
}

/// Z-scores one channel in place with the population standard deviation,
/// `(x - mean) / max(std, ε)`. A constant channel becomes all zeros.
pub fn normalize_channel(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let first = x[0];
    if x.iter().all(|&v| v == first) {
        x.fill(0.0);
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = var.sqrt().max(NORM_EPS);
    for v in x.iter_mut() {
        *v = (*v - mean) / denom;
    }
}

/// Normalizes a `channels × w` window, each channel independently.
pub fn normalize_window(window: &[f64], w: usize) -> Vec<f64> {
    let mut out = window.to_vec();
    out.chunks_mut(w).for_each(normalize_channel);
    out
}

/// Inverse-frequency weights `total / (K_present · count_c)`; classes with
/// zero count get weight 0.
pub fn class_weights(counts: &[usize]) -> Result<Vec<f64>, PreprocessError> {
    let total: usize = counts.iter().sum();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if total == 0 {
        return Err(PreprocessError::EmptyDataset);
    }
    Ok(counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { total as f64 / (present as f64 * c as f64) })
        .collect())
}
