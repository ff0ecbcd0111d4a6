use serde::{Deserialize, Serialize};

use super::NnError;

/// Dense row-major `f64` tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(NnError::ShapeMismatch { expected: shape.to_vec(), got: vec![data.len()] });
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self, i: usize) -> usize {
        self.shape[i]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<(), NnError> {
        if self.shape == shape {
            Ok(())
        } else {
            Err(NnError::ShapeMismatch { expected: shape.to_vec(), got: self.shape.clone() })
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(f64) -> f64) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }
}

/// Strided matrix view description: `(rows, cols, row_stride, col_stride)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl Layout {
    pub fn row_major(rows: usize, cols: usize) -> Self {
        Self { rows, cols, rs: cols, cs: 1 }
    }

    pub fn transposed(self) -> Self {
        Self { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    fn span(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            0
        } else {
            (self.rows - 1) * self.rs + (self.cols - 1) * self.cs + 1
        }
    }
}

/// `c = a · b + beta · c`.
pub(crate) fn gemm(a: &[f64], la: Layout, b: &[f64], lb: Layout, beta: f64, c: &mut [f64], lc: Layout) {
    assert_eq!(la.cols, lb.rows, "gemm inner dimension");
    assert_eq!((la.rows, lb.cols), (lc.rows, lc.cols), "gemm output shape");
    assert!(a.len() >= la.span() && b.len() >= lb.span() && c.len() >= lc.span(), "gemm operand bounds");
    if lc.rows == 0 || lc.cols == 0 {
        return;
    }
    // SAFETY: every accessed element lies within the asserted spans; strides
    // are non-negative and the output does not alias the inputs.
    unsafe {
        matrixmultiply::dgemm(
            la.rows,
            la.cols,
            lb.cols,
            1.0,
            a.as_ptr(),
            la.rs as isize,
            la.cs as isize,
            b.as_ptr(),
            lb.rs as isize,
            lb.cs as isize,
            beta,
            c.as_mut_ptr(),
            lc.rs as isize,
            lc.cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(matches!(Tensor::from_vec(&[2, 3], vec![0.0; 5]), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn gemm_matches_naive_with_transposes() {
        let a: Vec<f64> = (0..6).map(f64::from).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|i| f64::from(i) * 0.5 - 1.0).collect(); // 3x4
        let mut c = vec![1.0; 8];
        gemm(&a, Layout::row_major(2, 3), &b, Layout::row_major(3, 4), 1.0, &mut c, Layout::row_major(2, 4));
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = 1.0 + (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum::<f64>();
                assert_eq!(c[i * 4 + j], want);
            }
        }
        // aᵀ (3x2) · a (2x3)
        let mut g = vec![0.0; 9];
        gemm(&a, Layout::row_major(2, 3).transposed(), &a, Layout::row_major(2, 3), 0.0, &mut g, Layout::row_major(3, 3));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g[i * 3 + j], a[i] * a[j] + a[3 + i] * a[3 + j]);
            }
        }
    }
}
