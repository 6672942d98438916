//! Scalar fitness score for comparing trained detector variants.
//!
//! Two standard detection metrics are blended into one number: mean
//! average precision at a 0.5 IoU threshold, and mean average precision
//! averaged over IoU thresholds 0.05 to 0.95. The strict multi-threshold
//! metric dominates with weight 0.9; the lenient single-threshold metric
//! contributes the remaining 0.1, so models that merely localize roughly
//! cannot outrank models that localize tightly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight on mAP at IoU 0.5.
pub const WEIGHT_MAP_50: f64 = 0.1;
/// Weight on mAP averaged over IoU 0.05..0.95.
pub const WEIGHT_MAP_05_95: f64 = 0.9;

/// The two detection metrics the score is built from, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessInput {
    /// Mean average precision at IoU threshold 0.5.
    pub map_50: f64,
    /// Mean average precision averaged over IoU thresholds 0.05..0.95.
    pub map_05_95: f64,
}

impl FitnessInput {
    pub fn new(map_50: f64, map_05_95: f64) -> Result<Self> {
        for (name, value) in [("map_50", map_50), ("map_05_95", map_05_95)] {
            if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
                return Err(Error::OutOfRange { name, value });
            }
        }
        Ok(FitnessInput { map_50, map_05_95 })
    }
}

/// Weighted blend `0.1 * map_50 + 0.9 * map_05_95`.
pub fn fitness(input: FitnessInput) -> f64 {
    WEIGHT_MAP_50 * input.map_50 + WEIGHT_MAP_05_95 * input.map_05_95
}
