//! Matrix exponential and the trace-exponential acyclicity function.
//!
//! `h(W) = tr(e^{W∘W}) − n` is zero exactly when the weighted digraph of `W`
//! is acyclic (self-loops included), and its analytic gradient is
//! `∇h = (e^{W∘W})ᵀ ∘ 2W`.

use crate::error::TensorError;
use crate::tensor::{Scalar, Tensor};

const TAYLOR_TERMS: usize = 18;
const MAX_SQUARINGS: u32 = 60;

/// Matrix exponential via scaling-and-squaring with a truncated Taylor
/// series. Accurate to well below 1e-10 relative error for the small,
/// moderate-norm matrices this crate works with.
pub fn expm<F: Scalar>(a: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
    if a.shape().len() != 2 || a.shape()[0] != a.shape()[1] {
        return Err(TensorError::Dimension(format!(
            "expm requires a square matrix, got shape {:?}",
            a.shape()
        )));
    }
    let n = a.shape()[0];
    if n == 0 {
        return Ok(Tensor::zeros(&[0, 0]));
    }

    // Scale until the 1-norm is below 0.5, then square back up.
    let norm = a.one_norm()?;
    let half = F::from_f64(0.5).unwrap();
    let mut squarings = 0u32;
    let mut scaled = a.clone();
    if norm > half {
        let ratio = (norm / half).to_f64_lossy();
        squarings = (ratio.log2().ceil() as u32).min(MAX_SQUARINGS);
        let factor = F::from_f64((0.5f64).powi(squarings as i32)).unwrap();
        scaled.scale(factor);
    }

    let mut result = Tensor::identity(n);
    let mut term = Tensor::identity(n);
    for k in 1..=TAYLOR_TERMS {
        term = term.matmul(&scaled)?;
        term.scale(F::one() / F::from_usize(k).unwrap());
        for (r, t) in result.data_mut().iter_mut().zip(term.data()) {
            *r = *r + *t;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result)?;
    }
    Ok(result)
}

/// Trace of the matrix exponential, `tr(e^A)`.
pub fn trace_expm<F: Scalar>(a: &Tensor<F>) -> Result<F, TensorError> {
    expm(a)?.trace()
}

/// Acyclicity function `h(W) = tr(e^{W∘W}) − n` of a contemporaneous
/// weight matrix. Non-negative; zero iff the digraph of `W` is acyclic.
pub fn acyclicity_h<F: Scalar>(w_contemp: &Tensor<F>) -> Result<F, TensorError> {
    Ok(acyclicity_h_and_grad(w_contemp)?.0)
}

/// Gradient of [`acyclicity_h`]: `(e^{W∘W})ᵀ ∘ 2W`.
pub fn acyclicity_grad<F: Scalar>(w_contemp: &Tensor<F>) -> Result<Tensor<F>, TensorError> {
    Ok(acyclicity_h_and_grad(w_contemp)?.1)
}

/// Computes `h` and its gradient from a single matrix exponential.
pub fn acyclicity_h_and_grad<F: Scalar>(
    w_contemp: &Tensor<F>,
) -> Result<(F, Tensor<F>), TensorError> {
    let squared = w_contemp.hadamard(w_contemp)?;
    let exp = expm(&squared)?;
    let n = F::from_usize(w_contemp.shape()[0]).unwrap();
    // Roundoff can leave the trace a hair under n; h is mathematically >= 0.
    let h = (exp.trace()? - n).max(F::zero());
    let mut grad = exp.transpose2()?;
    let two = F::from_f64(2.0).unwrap();
    for (g, &w) in grad.data_mut().iter_mut().zip(w_contemp.data()) {
        *g = *g * two * w;
    }
    Ok((h, grad))
}
