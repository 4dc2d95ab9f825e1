//! Dense row-major tensors over a generic float scalar.
//!
//! The whole numeric core is written against [`Scalar`] so the same code
//! runs in `f64` (the pipeline default) or `f32`. Concrete aliases live at
//! the crate root.

use std::fmt;

use num_traits::{Float, FromPrimitive};

use crate::error::TensorError;

/// Floating-point scalar usable by the numeric core.
pub trait Scalar:
    Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion for logging and serialization.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

/// Dense N-dimensional array, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![F::zero(); len],
        }
    }

    /// Builds a tensor from a flat buffer, checking the shape product.
    pub fn from_data(shape: &[usize], data: Vec<F>) -> Result<Self, TensorError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::Dimension(format!(
                "shape {:?} implies {} elements, buffer has {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Like [`Tensor::from_data`] but also rejects NaN/Inf, for data that
    /// crosses an external boundary.
    pub fn from_external(shape: &[usize], data: Vec<F>) -> Result<Self, TensorError> {
        let t = Self::from_data(shape, data)?;
        t.validate_finite()?;
        Ok(t)
    }

    pub fn validate_finite(&self) -> Result<(), TensorError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(TensorError::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<F> {
        self.data
    }

    pub fn fill(&mut self, value: F) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// Flat offset of a 2-D index. Caller guarantees a rank-2 shape.
    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> usize {
        i * self.shape[1] + j
    }

    /// Flat offset of a 3-D index. Caller guarantees a rank-3 shape.
    #[inline]
    pub fn at3(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    #[inline]
    pub fn get2(&self, i: usize, j: usize) -> F {
        self.data[self.at2(i, j)]
    }

    #[inline]
    pub fn set2(&mut self, i: usize, j: usize, value: F) {
        let idx = self.at2(i, j);
        self.data[idx] = value;
    }

    /// Flat offset of a 4-D index. Caller guarantees a rank-4 shape.
    #[inline]
    pub fn at4(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.shape[1] + j) * self.shape[2] + k) * self.shape[3] + l
    }

    #[inline]
    pub fn get3(&self, i: usize, j: usize, k: usize) -> F {
        self.data[self.at3(i, j, k)]
    }

    #[inline]
    pub fn set3(&mut self, i: usize, j: usize, k: usize, value: F) {
        let idx = self.at3(i, j, k);
        self.data[idx] = value;
    }

    #[inline]
    pub fn get4(&self, i: usize, j: usize, k: usize, l: usize) -> F {
        self.data[self.at4(i, j, k, l)]
    }

    #[inline]
    pub fn set4(&mut self, i: usize, j: usize, k: usize, l: usize, value: F) {
        let idx = self.at4(i, j, k, l);
        self.data[idx] = value;
    }

    fn require_square(&self, op: &str) -> Result<usize, TensorError> {
        if self.shape.len() != 2 || self.shape[0] != self.shape[1] {
            return Err(TensorError::Dimension(format!(
                "{op} requires a square matrix, got shape {:?}",
                self.shape
            )));
        }
        Ok(self.shape[0])
    }

    /// Standard matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        if self.shape.len() != 2 || other.shape.len() != 2 {
            return Err(TensorError::Dimension(format!(
                "matmul requires rank-2 operands, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, p) = (other.shape[0], other.shape[1]);
        if k != k2 {
            return Err(TensorError::Dimension(format!(
                "matmul inner dimensions disagree: {:?} x {:?}",
                self.shape, other.shape
            )));
        }
        let mut out = Tensor::zeros(&[m, p]);
        for i in 0..m {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == F::zero() {
                    continue;
                }
                let row = &other.data[l * p..(l + 1) * p];
                let dst = &mut out.data[i * p..(i + 1) * p];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d = *d + a * b;
                }
            }
        }
        Ok(out)
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
        if self.shape != other.shape {
            return Err(TensorError::Dimension(format!(
                "hadamard requires equal shapes, got {:?} and {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Tensor::from_data(&self.shape, data)
    }

    pub fn transpose2(&self) -> Result<Tensor<F>, TensorError> {
        if self.shape.len() != 2 {
            return Err(TensorError::Dimension(format!(
                "transpose2 requires rank 2, got {:?}",
                self.shape
            )));
        }
        let (m, p) = (self.shape[0], self.shape[1]);
        let mut out = Tensor::zeros(&[p, m]);
        for i in 0..m {
            for j in 0..p {
                out.data[j * m + i] = self.data[i * p + j];
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> Result<F, TensorError> {
        let n = self.require_square("trace")?;
        let mut acc = F::zero();
        for i in 0..n {
            acc = acc + self.data[i * n + i];
        }
        Ok(acc)
    }

    /// Matrix 1-norm (maximum absolute column sum) of a square matrix.
    pub fn one_norm(&self) -> Result<F, TensorError> {
        let n = self.require_square("one_norm")?;
        let mut best = F::zero();
        for j in 0..n {
            let mut col = F::zero();
            for i in 0..n {
                col = col + self.data[i * n + j].abs();
            }
            if col > best {
                best = col;
            }
        }
        Ok(best)
    }

    pub fn scale(&mut self, factor: F) {
        self.data.iter_mut().for_each(|v| *v = *v * factor);
    }

    /// Sum of absolute values over all entries.
    pub fn l1_norm(&self) -> F {
        self.data
            .iter()
            .fold(F::zero(), |acc, v| acc + v.abs())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = F::one();
        }
        t
    }
}
