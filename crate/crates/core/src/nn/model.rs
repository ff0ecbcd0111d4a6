use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::layers::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, to_channel_major, Conv1d, ConvCache, Linear,
};
use super::loss::weighted_cross_entropy;
use super::tensor::Tensor;
use super::NnError;
use crate::gesture::GestureClass;
use crate::preprocess::{WindowBatch, CHANNELS, MAX_WINDOW, MIN_WINDOW};
use crate::seed::Rng;

/// Architecture of the window classifier: three stride-1 same-length
/// convolutions with rectifiers, global average pooling over time, then a
/// rectified hidden linear layer and a linear output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub window_size: usize,
    pub in_channels: usize,
    pub conv_channels: [usize; 3],
    pub kernel_size: usize,
    pub hidden_units: usize,
    pub num_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window_size: 80,
            in_channels: CHANNELS,
            conv_channels: [16, 32, 64],
            kernel_size: 5,
            hidden_units: 32,
            num_classes: GestureClass::COUNT,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let ok = (MIN_WINDOW..=MAX_WINDOW).contains(&self.window_size)
            && self.in_channels == CHANNELS
            && self.num_classes == GestureClass::COUNT
            && self.kernel_size >= 1
            && self.hidden_units >= 1
            && self.conv_channels.iter().all(|&c| c >= 1);
        if ok {
            Ok(())
        } else {
            Err(NnError::InvalidConfig(format!("{self:?}")))
        }
    }

    pub fn with_window(&self, window_size: usize) -> Self {
        Self { window_size, ..self.clone() }
    }

    /// Parameter shapes in declaration order.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let [c1, c2, c3] = self.conv_channels;
        let k = self.kernel_size;
        vec![
            vec![c1, self.in_channels, k],
            vec![c1],
            vec![c2, c1, k],
            vec![c2],
            vec![c3, c2, k],
            vec![c3],
            vec![self.hidden_units, c3],
            vec![self.hidden_units],
            vec![self.num_classes, self.hidden_units],
            vec![self.num_classes],
        ]
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub conv: [Conv1d; 3],
    pub fc1: Linear,
    pub fc2: Linear,
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache {
    n: usize,
    conv_caches: Vec<ConvCache>,
    conv_pre: Vec<Tensor>,
    pooled: Tensor,
    hidden_pre: Tensor,
    hidden: Tensor,
}

impl Model {
    pub fn zeros(config: &ModelConfig) -> Result<Self, NnError> {
        config.validate()?;
        let [c1, c2, c3] = config.conv_channels;
        let k = config.kernel_size;
        Ok(Self {
            config: config.clone(),
            conv: [Conv1d::zeros(config.in_channels, c1, k), Conv1d::zeros(c1, c2, k), Conv1d::zeros(c2, c3, k)],
            fc1: Linear::zeros(c3, config.hidden_units),
            fc2: Linear::zeros(config.hidden_units, config.num_classes),
        })
    }

    /// Fan-in scaled uniform initialization: every weight and bias of a layer
    /// is drawn from `U(-1/√fan_in, 1/√fan_in)`, layers in declaration order.
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Self, NnError> {
        let mut model = Self::zeros(config)?;
        let fans: Vec<usize> = model
            .conv
            .iter()
            .map(|c| c.in_channels() * c.kernel())
            .chain([model.fc1.inputs(), model.fc2.inputs()])
            .collect();
        for (pair, fan_in) in model.params_mut().chunks_mut(2).zip(fans) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for t in pair.iter_mut() {
                t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
            }
        }
        Ok(model)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(10);
        for c in &self.conv {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        out.extend([&self.fc1.weight, &self.fc1.bias, &self.fc2.weight, &self.fc2.bias]);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::with_capacity(10);
        for c in self.conv.iter_mut() {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.extend([&mut self.fc1.weight, &mut self.fc1.bias, &mut self.fc2.weight, &mut self.fc2.bias]);
        out
    }

    fn check_batch(&self, batch: &[f64], n: usize) -> Result<(), NnError> {
        let w = self.config.window_size;
        if batch.len() != n * self.config.in_channels * w {
            return Err(NnError::ShapeMismatch { expected: vec![n, self.config.in_channels, w], got: vec![batch.len()] });
        }
        Ok(())
    }

    /// `batch`: `N × 2 × W` row-major. Returns `N × classes` logits.
    pub fn forward(&self, batch: &[f64], n: usize) -> Result<(Tensor, ForwardCache), NnError> {
        self.check_batch(batch, n)?;
        let w = self.config.window_size;
        let mut act = to_channel_major(batch, n, self.config.in_channels, w);
        let mut conv_caches = Vec::with_capacity(3);
        let mut conv_pre = Vec::with_capacity(3);
        for conv in &self.conv {
            let (pre, cache) = conv.forward(&act)?;
            act = relu(&pre);
            conv_caches.push(cache);
            conv_pre.push(pre);
        }
        let pooled = global_avg_pool(&act);
        let hidden_pre = self.fc1.forward(&pooled)?;
        let hidden = relu(&hidden_pre);
        let logits = self.fc2.forward(&hidden)?;
        Ok((logits, ForwardCache { n, conv_caches, conv_pre, pooled, hidden_pre, hidden }))
    }

    pub fn logits(&self, batch: &[f64], n: usize) -> Result<Tensor, NnError> {
        self.forward(batch, n).map(|(l, _)| l)
    }

    /// Gradients of a scalar loss w.r.t. all parameters, given `dL/dlogits`.
    /// Returned in declaration order.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Tensor) -> Result<Vec<Tensor>, NnError> {
        dlogits.expect_shape(&[cache.n, self.config.num_classes])?;
        let g2 = self.fc2.backward(&cache.hidden, dlogits)?;
        let dhidden = relu_backward(&cache.hidden_pre, &g2.input);
        let g1 = self.fc1.backward(&cache.pooled, &dhidden)?;
        let mut dact = global_avg_pool_backward(&g1.input, self.config.window_size);

        let mut conv_grads = Vec::with_capacity(3);
        for i in (0..3).rev() {
            let dpre = relu_backward(&cache.conv_pre[i], &dact);
            let g = self.conv[i].backward(&cache.conv_caches[i], &dpre, i > 0)?;
            if let Some(dx) = g.input {
                dact = dx;
            }
            conv_grads.push((g.weight, g.bias));
        }
        conv_grads.reverse();
        let mut out = Vec::with_capacity(10);
        for (w, b) in conv_grads {
            out.push(w);
            out.push(b);
        }
        out.extend([g1.weight, g1.bias, g2.weight, g2.bias]);
        Ok(out)
    }

    /// Weighted cross-entropy on a minibatch and its parameter gradients.
    pub fn loss_and_grad(&self, batch: &[f64], labels: &[usize], weights: &[f64]) -> Result<(f64, f64, Vec<Tensor>), NnError> {
        let n = labels.len();
        let (logits, cache) = self.forward(batch, n)?;
        let loss = weighted_cross_entropy(&logits, labels, weights)?;
        let grads = self.backward(&cache, &loss.grad)?;
        Ok((loss.loss, loss.weight_sum, grads))
    }

    /// Arg-max class per window (ties go to the lower code).
    pub fn predict(&self, windows: &WindowBatch) -> Result<Vec<GestureClass>, NnError> {
        const CHUNK: usize = 256;
        if windows.window_size != self.config.window_size {
            return Err(NnError::ShapeMismatch {
                expected: vec![self.config.window_size],
                got: vec![windows.window_size],
            });
        }
        let per = windows.window_len();
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.data.chunks(CHUNK * per) {
            let n = chunk.len() / per;
            let logits = self.logits(chunk, n)?;
            for row in logits.data().chunks(self.config.num_classes) {
                let best = row
                    .iter()
                    .enumerate()
                    .fold(0, |best, (i, &v)| if v > row[best] { i } else { best });
                out.push(GestureClass::from_code(best as u8).expect("num_classes is 7"));
            }
        }
        Ok(out)
    }
}
