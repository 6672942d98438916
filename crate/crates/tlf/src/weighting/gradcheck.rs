//! Finite-difference validation of the hand-written backward passes.
//!
//! The scalar probe loss is `L = Σ G ⊙ forward(input)` for a fixed random
//! tensor `G`, so `∂L/∂θ` is exactly the backward pass run with upstream
//! gradient `G`. Each gradient coordinate is compared against the central
//! difference `(L(θ+h) − L(θ−h)) / 2h`.
//!
//! ReLU makes the loss piecewise-smooth: a finite difference straddling a
//! kink is meaningless. A coordinate is skipped when either perturbed
//! evaluation changes any ReLU argument's sign or brings one within
//! [`KINK_WINDOW`] of zero.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::fixed::{fixed_backward, fixed_forward, FixedWeights};
use super::se::{se_backward, se_forward, SeParams};
use super::Tensor3;
use crate::error::Result;

/// Central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative-error tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Exclusion window around ReLU kinks.
pub const KINK_WINDOW: f64 = 1e-6;

/// Absolute floor below which two gradients count as equal; sits above
/// the ~1e-10 arithmetic noise of a central difference at step 1e-5 so
/// near-zero coordinates are not judged on rounding error.
const ABSOLUTE_FLOOR: f64 = 1e-8;

/// Comparison outcome for one named parameter block.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BlockReport {
    pub name: String,
    /// Coordinates compared against finite differences.
    pub checked: usize,
    /// Coordinates excluded by the kink rule.
    pub skipped: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl BlockReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error <= self.tolerance
    }
}

/// All block reports of one gradient-check instance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckReport {
    pub scheme: &'static str,
    pub seed: u64,
    pub blocks: Vec<BlockReport>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        !self.blocks.is_empty() && self.blocks.iter().all(BlockReport::passed)
    }

    /// One printable line per block.
    pub fn summary_lines(&self) -> Vec<String> {
        self.blocks
            .iter()
            .map(|b| {
                format!(
                    "{} seed={} block={} checked={} skipped={} max_rel={:.3e} tol={:.1e} => {}",
                    self.scheme,
                    self.seed,
                    b.name,
                    b.checked,
                    b.skipped,
                    b.max_rel_error,
                    b.tolerance,
                    if b.passed() { "pass" } else { "FAIL" }
                )
            })
            .collect()
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff <= ABSOLUTE_FLOOR {
        0.0
    } else {
        diff / analytic.abs().max(numeric.abs())
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Tensor3 {
    Array3::from_shape_fn((5, h, w), |_| rng.gen_range(-1.0..1.0))
}

/// Check the fixed scheme's three gradient blocks (alpha, beta, input) on
/// a random instance. The scheme has no ReLUs, so nothing is skipped.
pub fn check_fixed_gradients(
    seed: u64,
    height: usize,
    width: usize,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = random_tensor(&mut rng, height, width);
    let probe = random_tensor(&mut rng, height, width);
    let params = FixedWeights::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))?;

    let loss = |p: &FixedWeights, inp: &Tensor3| -> Result<f64> {
        let out = fixed_forward(inp, p)?;
        Ok(out.iter().zip(probe.iter()).map(|(&o, &g)| o * g).sum())
    };

    let (grads, grad_input) = fixed_backward(&input, &params, &probe)?;

    let mut blocks = Vec::new();
    for (name, analytic, plus, minus) in [
        (
            "alpha",
            grads.alpha,
            FixedWeights { alpha: params.alpha + step, ..params },
            FixedWeights { alpha: params.alpha - step, ..params },
        ),
        (
            "beta",
            grads.beta,
            FixedWeights { beta: params.beta + step, ..params },
            FixedWeights { beta: params.beta - step, ..params },
        ),
    ] {
        let numeric = (loss(&plus, &input)? - loss(&minus, &input)?) / (2.0 * step);
        blocks.push(BlockReport {
            name: name.into(),
            checked: 1,
            skipped: 0,
            max_rel_error: relative_error(analytic, numeric),
            tolerance,
        });
    }

    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut perturbed = input.clone();
    for idx in 0..input.len() {
        let base = input.as_slice().expect("standard layout")[idx];
        let slice = perturbed.as_slice_mut().expect("standard layout");
        slice[idx] = base + step;
        let l_plus = loss(&params, &perturbed)?;
        let slice = perturbed.as_slice_mut().expect("standard layout");
        slice[idx] = base - step;
        let l_minus = loss(&params, &perturbed)?;
        let slice = perturbed.as_slice_mut().expect("standard layout");
        slice[idx] = base;
        let numeric = (l_plus - l_minus) / (2.0 * step);
        let analytic = grad_input.as_slice().expect("standard layout")[idx];
        max_rel = max_rel.max(relative_error(analytic, numeric));
        checked += 1;
    }
    blocks.push(BlockReport {
        name: "input".into(),
        checked,
        skipped: 0,
        max_rel_error: max_rel,
        tolerance,
    });

    Ok(GradCheckReport { scheme: "fixed", seed, blocks })
}

/// Loss plus the ReLU-region fingerprint of the evaluation.
struct SeEval {
    loss: f64,
    signs: Vec<bool>,
    min_kink: f64,
}

fn se_loss(params: &SeParams, input: &Tensor3, probe: &Tensor3) -> Result<SeEval> {
    let (out, cache) = se_forward(input, params)?;
    Ok(SeEval {
        loss: out.iter().zip(probe.iter()).map(|(&o, &g)| o * g).sum(),
        signs: cache.kink_signs(),
        min_kink: cache.min_kink_distance(),
    })
}

/// Check every SE gradient block (conv1, conv2, w1, w2, input) on a
/// random instance, applying the kink-exclusion rule per coordinate.
pub fn check_se_gradients(
    seed: u64,
    height: usize,
    width: usize,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    // redraw if the base point itself sits on a kink — finite differences
    // would be invalid for a large share of coordinates
    let mut draw_seed = seed;
    let (input, probe, params) = loop {
        let mut rng = ChaCha8Rng::seed_from_u64(draw_seed);
        let input = random_tensor(&mut rng, height, width);
        let probe = random_tensor(&mut rng, height, width);
        let params = SeParams::init(rng.gen());
        let (_, cache) = se_forward(&input, &params)?;
        if cache.min_kink_distance() > 10.0 * KINK_WINDOW {
            break (input, probe, params);
        }
        draw_seed = draw_seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    };

    let base = se_loss(&params, &input, &probe)?;
    let (_, cache) = se_forward(&input, &params)?;
    let (grads, grad_input) = se_backward(&cache, &probe)?;

    let mut blocks = Vec::new();

    // each closure extracts one block's flat storage from a params copy
    type Extract = fn(&mut SeParams) -> &mut [f64];
    let param_blocks: [(&str, Extract, Vec<f64>); 4] = [
        (
            "conv1",
            |p| p.conv1.as_slice_mut().expect("standard layout"),
            grads.conv1.iter().copied().collect(),
        ),
        (
            "conv2",
            |p| p.conv2.as_slice_mut().expect("standard layout"),
            grads.conv2.iter().copied().collect(),
        ),
        (
            "w1",
            |p| p.w1.as_slice_mut().expect("standard layout"),
            grads.w1.iter().copied().collect(),
        ),
        (
            "w2",
            |p| p.w2.as_slice_mut().expect("standard layout"),
            grads.w2.iter().copied().collect(),
        ),
    ];

    for (name, extract, analytic) in param_blocks {
        let mut work = params.clone();
        let mut max_rel = 0.0f64;
        let mut checked = 0usize;
        let mut skipped = 0usize;
        for idx in 0..analytic.len() {
            let base_value = extract(&mut work)[idx];
            extract(&mut work)[idx] = base_value + step;
            let plus = se_loss(&work, &input, &probe)?;
            extract(&mut work)[idx] = base_value - step;
            let minus = se_loss(&work, &input, &probe)?;
            extract(&mut work)[idx] = base_value;
            if plus.signs != base.signs
                || minus.signs != base.signs
                || plus.min_kink < KINK_WINDOW
                || minus.min_kink < KINK_WINDOW
            {
                skipped += 1;
                continue;
            }
            let numeric = (plus.loss - minus.loss) / (2.0 * step);
            max_rel = max_rel.max(relative_error(analytic[idx], numeric));
            checked += 1;
        }
        blocks.push(BlockReport {
            name: name.into(),
            checked,
            skipped,
            max_rel_error: max_rel,
            tolerance,
        });
    }

    let mut work = input.clone();
    let analytic: Vec<f64> = grad_input.iter().copied().collect();
    let mut max_rel = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for idx in 0..analytic.len() {
        let base_value = work.as_slice().expect("standard layout")[idx];
        work.as_slice_mut().expect("standard layout")[idx] = base_value + step;
        let plus = se_loss(&params, &work, &probe)?;
        work.as_slice_mut().expect("standard layout")[idx] = base_value - step;
        let minus = se_loss(&params, &work, &probe)?;
        work.as_slice_mut().expect("standard layout")[idx] = base_value;
        if plus.signs != base.signs
            || minus.signs != base.signs
            || plus.min_kink < KINK_WINDOW
            || minus.min_kink < KINK_WINDOW
        {
            skipped += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * step);
        max_rel = max_rel.max(relative_error(analytic[idx], numeric));
        checked += 1;
    }
    blocks.push(BlockReport {
        name: "input".into(),
        checked,
        skipped,
        max_rel_error: max_rel,
        tolerance,
    });

    Ok(GradCheckReport { scheme: "se", seed, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_gradients_match_finite_differences() {
        for seed in 0..4 {
            let report =
                check_fixed_gradients(seed, 8, 8, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
            assert!(report.all_passed(), "{:#?}", report);
            assert!(report.blocks.iter().all(|b| b.skipped == 0));
        }
    }

    #[test]
    fn se_gradients_match_finite_differences() {
        for seed in 0..3 {
            let report = check_se_gradients(seed, 8, 8, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
            assert!(report.all_passed(), "{:#?}", report);
            let names: Vec<_> = report.blocks.iter().map(|b| b.name.as_str()).collect();
            assert_eq!(names, ["conv1", "conv2", "w1", "w2", "input"]);
            for block in &report.blocks {
                assert!(block.checked > 0, "block {} checked nothing", block.name);
                // exclusions must stay rare on smooth random instances
                assert!(
                    block.skipped * 10 <= block.checked + block.skipped,
                    "block {} skipped {} of {}",
                    block.name,
                    block.skipped,
                    block.checked + block.skipped
                );
            }
        }
    }

    #[test]
    fn coarse_step_degrades_the_comparison() {
        // sanity check that the harness can fail: a huge step makes the
        // central difference a poor derivative estimate
        let fine = check_se_gradients(1, 6, 6, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        let coarse = check_se_gradients(1, 6, 6, 0.5, DEFAULT_TOLERANCE).unwrap();
        let fine_max = fine
            .blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0f64, f64::max);
        let coarse_max = coarse
            .blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0f64, f64::max);
        assert!(coarse_max > fine_max * 10.0, "fine {fine_max} coarse {coarse_max}");
    }

    #[test]
    fn summary_lines_mention_every_block() {
        let report = check_fixed_gradients(2, 4, 4, DEFAULT_STEP, DEFAULT_TOLERANCE).unwrap();
        let lines = report.summary_lines();
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.contains("pass")));
    }
}
