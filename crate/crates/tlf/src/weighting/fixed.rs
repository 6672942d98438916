//! Input-independent channel weighting: two scalars squashed through a
//! sigmoid.
//!
//! The layer learns `alpha` and `beta`; the effective scales are
//! `σ(alpha)` on the temporal plane and `σ(beta)` on the difference
//! plane, so they can never leave (0, 1) and never touch RGB.

use super::{check_layer_input, logit, sigmoid, Tensor3, DIFFERENCE, TEMPORAL};
use crate::error::{Error, Result};

/// The two learnable scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl FixedWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !v.is_finite() {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        Ok(FixedWeights { alpha, beta })
    }

    /// Neutral initialization: both effective scales are 0.5.
    pub fn zeros() -> Self {
        FixedWeights { alpha: 0.0, beta: 0.0 }
    }

    /// Recover parameters from the effective scales they should produce,
    /// e.g. `from_effective(0.288, 0.824)` for a pair of trained values.
    pub fn from_effective(temporal_scale: f64, difference_scale: f64) -> Result<Self> {
        Ok(FixedWeights {
            alpha: logit(temporal_scale)?,
            beta: logit(difference_scale)?,
        })
    }

    /// `(σ(alpha), σ(beta))` — the multipliers actually applied.
    pub fn effective_scales(&self) -> (f64, f64) {
        (sigmoid(self.alpha), sigmoid(self.beta))
    }
}

/// Gradients with respect to the two parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedGrads {
    pub alpha: f64,
    pub beta: f64,
}

/// Scale plane 4 by `σ(alpha)` and plane 5 by `σ(beta)`; RGB planes are
/// copied through unchanged.
pub fn fixed_forward(stack: &Tensor3, p: &FixedWeights) -> Result<Tensor3> {
    check_layer_input(stack, "fixed-weighting input")?;
    let (w_t, w_d) = p.effective_scales();
    let mut out = stack.clone();
    out.index_axis_mut(ndarray::Axis(0), TEMPORAL)
        .mapv_inplace(|v| v * w_t);
    out.index_axis_mut(ndarray::Axis(0), DIFFERENCE)
        .mapv_inplace(|v| v * w_d);
    Ok(out)
}

/// Reverse-mode gradients for [`fixed_forward`].
///
/// With `s = σ(alpha)`: `∂L/∂alpha = s(1−s) · Σ upstream⊙input` over the
/// temporal plane (analogously for `beta` on the difference plane), and
/// the input gradient routes `upstream` through the same scaling the
/// forward pass applied.
pub fn fixed_backward(
    stack: &Tensor3,
    p: &FixedWeights,
    upstream: &Tensor3,
) -> Result<(FixedGrads, Tensor3)> {
    check_layer_input(stack, "fixed-weighting input")?;
    check_layer_input(upstream, "fixed-weighting upstream gradient")?;
    if stack.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch(format!(
            "input shape {:?} does not match upstream shape {:?}",
            stack.shape(),
            upstream.shape()
        )));
    }
    let (w_t, w_d) = p.effective_scales();

    let dot = |c: usize| -> f64 {
        upstream
            .index_axis(ndarray::Axis(0), c)
            .iter()
            .zip(stack.index_axis(ndarray::Axis(0), c).iter())
            .map(|(&u, &v)| u * v)
            .sum()
    };
    let grads = FixedGrads {
        alpha: w_t * (1.0 - w_t) * dot(TEMPORAL),
        beta: w_d * (1.0 - w_d) * dot(DIFFERENCE),
    };

    let mut grad_stack = upstream.clone();
    grad_stack
        .index_axis_mut(ndarray::Axis(0), TEMPORAL)
        .mapv_inplace(|v| v * w_t);
    grad_stack
        .index_axis_mut(ndarray::Axis(0), DIFFERENCE)
        .mapv_inplace(|v| v * w_d);
    Ok((grads, grad_stack))
}
