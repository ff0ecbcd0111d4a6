//! Layer primitives with explicit forward caches and reverse-mode backward.
//!
//! Convolution activations use a channel-major batch layout `[C, N, W]` so a
//! whole minibatch convolves as one matrix product over an unfolded
//! (`im2col`) buffer.

use serde::{Deserialize, Serialize};

use super::tensor::{gemm, Layout, Tensor};
use super::NnError;

/// Stride-1 1-D convolution with zero padding that preserves length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    /// `[out, in, kernel]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

pub struct ConvCache {
    cols: Vec<f64>,
    n: usize,
    w: usize,
}

pub struct ConvGrads {
    pub weight: Tensor,
    pub bias: Tensor,
    pub input: Option<Tensor>,
}

impl Conv1d {
    pub fn zeros(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        Self { weight: Tensor::zeros(&[out_ch, in_ch, kernel]), bias: Tensor::zeros(&[out_ch]) }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn kernel(&self) -> usize {
        self.weight.dim(2)
    }

    fn pad_left(&self) -> usize {
        (self.kernel() - 1) / 2
    }

    /// `x`: `[in, N, W]` -> `[out, N, W]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ConvCache), NnError> {
        let (c_in, k, c_out) = (self.in_channels(), self.kernel(), self.out_channels());
        if x.shape().len() != 3 || x.dim(0) != c_in {
            return Err(NnError::ShapeMismatch { expected: vec![c_in, 0, 0], got: x.shape().to_vec() });
        }
        let (n, w) = (x.dim(1), x.dim(2));
        let nw = n * w;
        let pad = self.pad_left() as isize;
        let xd = x.data();

        let mut cols = vec![0.0; c_in * k * nw];
        for c in 0..c_in {
            for kk in 0..k {
                let row = &mut cols[(c * k + kk) * nw..(c * k + kk + 1) * nw];
                let shift = kk as isize - pad;
                let (lo, hi) = (0isize.max(-shift) as usize, (w as isize).min(w as isize - shift).max(0) as usize);
                for s in 0..n {
                    let src = &xd[c * nw + s * w..c * nw + (s + 1) * w];
                    let dst = &mut row[s * w..(s + 1) * w];
                    if lo < hi {
                        let from = (lo as isize + shift) as usize;
                        dst[lo..hi].copy_from_slice(&src[from..from + (hi - lo)]);
                    }
                }
            }
        }

        let mut out = vec![0.0; c_out * nw];
        for (o, row) in out.chunks_mut(nw).enumerate() {
            row.fill(self.bias.data()[o]);
        }
        gemm(
            self.weight.data(),
            Layout::row_major(c_out, c_in * k),
            &cols,
            Layout::row_major(c_in * k, nw),
            1.0,
            &mut out,
            Layout::row_major(c_out, nw),
        );
        Ok((Tensor::from_vec(&[c_out, n, w], out)?, ConvCache { cols, n, w }))
    }

    /// `dout`: `[out, N, W]`. The input gradient is only formed when asked for.
    pub fn backward(&self, cache: &ConvCache, dout: &Tensor, need_input: bool) -> Result<ConvGrads, NnError> {
        let (c_in, k, c_out) = (self.in_channels(), self.kernel(), self.out_channels());
        let (n, w) = (cache.n, cache.w);
        let nw = n * w;
        dout.expect_shape(&[c_out, n, w])?;
        let dd = dout.data();

        let mut dw = Tensor::zeros(&[c_out, c_in, k]);
        gemm(
            dd,
            Layout::row_major(c_out, nw),
            &cache.cols,
            Layout::row_major(c_in * k, nw).transposed(),
            0.0,
            dw.data_mut(),
            Layout::row_major(c_out, c_in * k),
        );
        let mut db = Tensor::zeros(&[c_out]);
        for (o, row) in dd.chunks(nw).enumerate() {
            db.data_mut()[o] = row.iter().sum();
        }

        let input = if need_input {
            let mut dcols = vec![0.0; c_in * k * nw];
            gemm(
                self.weight.data(),
                Layout::row_major(c_out, c_in * k).transposed(),
                dd,
                Layout::row_major(c_out, nw),
                0.0,
                &mut dcols,
                Layout::row_major(c_in * k, nw),
            );
            let pad = self.pad_left() as isize;
            let mut dx = vec![0.0; c_in * nw];
            for c in 0..c_in {
                for kk in 0..k {
                    let row = &dcols[(c * k + kk) * nw..(c * k + kk + 1) * nw];
                    let shift = kk as isize - pad;
                    let (lo, hi) = (0isize.max(-shift) as usize, (w as isize).min(w as isize - shift).max(0) as usize);
                    if lo >= hi {
                        continue;
                    }
                    for s in 0..n {
                        let src = &row[s * w + lo..s * w + hi];
                        let from = (lo as isize + shift) as usize;
                        let dst = &mut dx[c * nw + s * w + from..c * nw + s * w + from + (hi - lo)];
                        for (d, v) in dst.iter_mut().zip(src) {
                            *d += v;
                        }
                    }
                }
            }
            Some(Tensor::from_vec(&[c_in, n, w], dx)?)
        } else {
            None
        };
        Ok(ConvGrads { weight: dw, bias: db, input })
    }
}

/// Fully connected layer on `[N, in]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `[out, in]`
    pub weight: Tensor,
    /// `[out]`
    pub bias: Tensor,
}

pub struct LinearGrads {
    pub weight: Tensor,
    pub bias: Tensor,
    pub input: Tensor,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Tensor::zeros(&[outputs, inputs]), bias: Tensor::zeros(&[outputs]) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.dim(1)
    }

    pub fn outputs(&self) -> usize {
        self.weight.dim(0)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (i, o) = (self.inputs(), self.outputs());
        if x.shape().len() != 2 || x.dim(1) != i {
            return Err(NnError::ShapeMismatch { expected: vec![0, i], got: x.shape().to_vec() });
        }
        let n = x.dim(0);
        let mut out = Tensor::zeros(&[n, o]);
        for row in out.data_mut().chunks_mut(o) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(x.data(), Layout::row_major(n, i), self.weight.data(), Layout::row_major(o, i).transposed(), 1.0, out.data_mut(), Layout::row_major(n, o));
        Ok(out)
    }

    pub fn backward(&self, x: &Tensor, dout: &Tensor) -> Result<LinearGrads, NnError> {
        let (i, o, n) = (self.inputs(), self.outputs(), x.dim(0));
        dout.expect_shape(&[n, o])?;
        let mut dw = Tensor::zeros(&[o, i]);
        gemm(dout.data(), Layout::row_major(n, o).transposed(), x.data(), Layout::row_major(n, i), 0.0, dw.data_mut(), Layout::row_major(o, i));
        let mut db = Tensor::zeros(&[o]);
        for row in dout.data().chunks(o) {
            for (b, v) in db.data_mut().iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = Tensor::zeros(&[n, i]);
        gemm(dout.data(), Layout::row_major(n, o), self.weight.data(), Layout::row_major(o, i), 0.0, dx.data_mut(), Layout::row_major(n, i));
        Ok(LinearGrads { weight: dw, bias: db, input: dx })
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    out.map_inplace(|v| v.max(0.0));
    out
}

/// Gradient through a rectifier given its pre-activation input.
pub fn relu_backward(pre: &Tensor, dout: &Tensor) -> Tensor {
    let mut dx = dout.clone();
    for (d, &p) in dx.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *d = 0.0;
        }
    }
    dx
}

/// `[C, N, W]` -> `[N, C]`, mean over time.
pub fn global_avg_pool(x: &Tensor) -> Tensor {
    let (c, n, w) = (x.dim(0), x.dim(1), x.dim(2));
    let mut out = Tensor::zeros(&[n, c]);
    let inv = 1.0 / w as f64;
    for ch in 0..c {
        for s in 0..n {
            let seg = &x.data()[(ch * n + s) * w..(ch * n + s + 1) * w];
            out.data_mut()[s * c + ch] = seg.iter().sum::<f64>() * inv;
        }
    }
    out
}

pub fn global_avg_pool_backward(dout: &Tensor, w: usize) -> Tensor {
    let (n, c) = (dout.dim(0), dout.dim(1));
    let mut dx = Tensor::zeros(&[c, n, w]);
    let inv = 1.0 / w as f64;
    for ch in 0..c {
        for s in 0..n {
            let g = dout.data()[s * c + ch] * inv;
            dx.data_mut()[(ch * n + s) * w..(ch * n + s + 1) * w].fill(g);
        }
    }
    dx
}

/// `[N, C, W]` sample-major batch -> `[C, N, W]` channel-major.
pub fn to_channel_major(batch: &[f64], n: usize, c: usize, w: usize) -> Tensor {
    let mut out = vec![0.0; n * c * w];
    for s in 0..n {
        for ch in 0..c {
            out[(ch * n + s) * w..(ch * n + s + 1) * w].copy_from_slice(&batch[(s * c + ch) * w..(s * c + ch + 1) * w]);
        }
    }
    Tensor::from_vec(&[c, n, w], out).expect("sizes agree")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct-summation convolution used as an independent reference.
    fn conv_direct(conv: &Conv1d, x: &Tensor) -> Tensor {
        let (ci, k, co) = (conv.in_channels(), conv.kernel(), conv.out_channels());
        let (n, w) = (x.dim(1), x.dim(2));
        let pad = (k - 1) / 2;
        let mut out = Tensor::zeros(&[co, n, w]);
        for o in 0..co {
            for s in 0..n {
                for t in 0..w {
                    let mut acc = conv.bias.data()[o];
                    for c in 0..ci {
                        for kk in 0..k {
                            let src = t as isize + kk as isize - pad as isize;
                            if src >= 0 && (src as usize) < w {
                                acc += conv.weight.data()[(o * ci + c) * k + kk] * x.data()[(c * n + s) * w + src as usize];
                            }
                        }
                    }
                    out.data_mut()[(o * n + s) * w + t] = acc;
                }
            }
        }
        out
    }

    fn filled(shape: &[usize], f: impl Fn(usize) -> f64) -> Tensor {
        let len = shape.iter().product();
        Tensor::from_vec(shape, (0..len).map(f).collect()).unwrap()
    }

    #[test]
    fn identity_impulse_kernel_reproduces_input() {
        let mut conv = Conv1d::zeros(1, 1, 5);
        conv.weight.data_mut()[2] = 1.0;
        let seq = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, -6.0];
        let x = Tensor::from_vec(&[1, 1, 8], seq.to_vec()).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.data(), &seq);
    }

    #[test]
    fn conv_matches_direct_sum() {
        for k in [1, 3, 4, 5] {
            let mut conv = Conv1d::zeros(3, 4, k);
            conv.weight = filled(&[4, 3, k], |i| ((i * 7 % 11) as f64 - 5.0) * 0.1);
            conv.bias = filled(&[4], |i| i as f64 * 0.3 - 0.5);
            let x = filled(&[3, 2, 9], |i| ((i * 13 % 17) as f64 - 8.0) * 0.25);
            let (y, _) = conv.forward(&x).unwrap();
            let want = conv_direct(&conv, &x);
            for (a, b) in y.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn conv_rejects_wrong_channels() {
        let conv = Conv1d::zeros(2, 4, 5);
        assert!(matches!(conv.forward(&Tensor::zeros(&[3, 1, 10])), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn channel_major_round_trip_layout() {
        let batch: Vec<f64> = (0..12).map(f64::from).collect(); // N=2, C=2, W=3
        let t = to_channel_major(&batch, 2, 2, 3);
        assert_eq!(t.data(), &[0., 1., 2., 6., 7., 8., 3., 4., 5., 9., 10., 11.]);
    }

    #[test]
    fn pool_averages_over_time() {
        let x = filled(&[2, 1, 4], |i| i as f64);
        let p = global_avg_pool(&x);
        assert_eq!(p.shape(), &[1, 2]);
        assert_eq!(p.data(), &[1.5, 5.5]);
    }
}
