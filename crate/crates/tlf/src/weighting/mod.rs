//! Learnable channel weighting for the temporal and difference planes.
//!
//! Two schemes share one contract — scale plane 4 (temporal background)
//! and plane 5 (difference mask) by values in (0, 1) while passing the
//! RGB planes through untouched:
//!
//! * [`fixed`]: two scalar parameters squashed through a sigmoid,
//!   independent of the input;
//! * [`se`]: a modified squeeze-and-excitation block that computes the
//!   two scales from the input itself.
//!
//! Both provide hand-written backward passes returning exact reverse-mode
//! gradients, validated against central finite differences in
//! [`gradcheck`]. Tensors are `f64` throughout so the finite-difference
//! comparisons are meaningful.

pub mod fixed;
pub mod gradcheck;
pub mod io;
pub mod se;

pub use fixed::{fixed_backward, fixed_forward, FixedGrads, FixedWeights};
pub use gradcheck::{check_fixed_gradients, check_se_gradients, BlockReport, GradCheckReport};
pub use io::{load_params, save_params};
pub use se::{se_backward, se_forward, SeCache, SeGrads, SeParams};

use ndarray::Array3;

use crate::error::{Error, Result};

/// Channel count at this layer's boundary.
pub const LAYER_CHANNELS: usize = 5;

/// Index of the temporal-background plane.
pub const TEMPORAL: usize = 3;

/// Index of the difference-mask plane.
pub const DIFFERENCE: usize = 4;

/// A dense (channels, height, width) activation tensor.
pub type Tensor3 = Array3<f64>;

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Inverse sigmoid; defined on the open interval (0, 1).
pub fn logit(p: f64) -> Result<f64> {
    if !(p.is_finite() && 0.0 < p && p < 1.0) {
        return Err(Error::OutOfRange {
            name: "effective weight",
            value: p,
        });
    }
    Ok((p / (1.0 - p)).ln())
}

/// Either scheme's parameters, behind one init/save/load surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Fixed(FixedWeights),
    Se(SeParams),
}

/// Which weighting scheme to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Fixed,
    Se,
}

/// Fresh parameters: fixed weights start at zero (both effective scales
/// 0.5); the SE block draws fan-in-scaled uniform values from a
/// deterministic generator.
pub fn init_params(scheme: Scheme, seed: u64) -> Params {
    match scheme {
        Scheme::Fixed => Params::Fixed(FixedWeights::zeros()),
        Scheme::Se => Params::Se(SeParams::init(seed)),
    }
}

pub(crate) fn check_layer_input(t: &Tensor3, what: &str) -> Result<()> {
    let shape = t.shape();
    if shape[0] != LAYER_CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "{what} must have {LAYER_CHANNELS} channels, got {}",
            shape[0]
        )));
    }
    if shape[1] == 0 || shape[2] == 0 {
        return Err(Error::ShapeMismatch(format!(
            "{what} must have non-empty spatial dimensions, got {shape:?}"
        )));
    }
    if let Some(&bad) = t.iter().find(|v| !v.is_finite()) {
        return Err(Error::OutOfRange {
            name: "layer input value",
            value: bad,
        });
    }
    Ok(())
}
