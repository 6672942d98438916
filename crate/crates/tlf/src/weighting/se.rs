//! Input-aware channel weighting: a squeeze-and-excitation block reduced
//! to two output gates.
//!
//! Forward graph (all convolutions 3×3, stride 1, zero padding, no bias;
//! no bias anywhere in the block):
//!
//! ```text
//! input ──conv1──ReLU──conv2──► X ──spatial mean──► z (5)
//!   │                                                │
//!   │                               w1·z ──ReLU──► w2·(…) ──σ──► s (2)
//!   │                                                            │
//!   └──► out = input, plane 4 × s₁, plane 5 × s₂ ◄───────────────┘
//! ```
//!
//! The gates therefore depend on the image content, but the values they
//! scale are the *original* input planes — the conv path only decides
//! how strongly the temporal and difference planes are expressed, and the
//! RGB planes always pass through bit-for-bit.
//!
//! [`se_backward`] is a hand-written reverse-mode pass over this graph;
//! it returns exact gradients for both convolution kernels, both linear
//! maps, and the input (pass-through path plus conv path).

use ndarray::{Array1, Array2, Array3, Array4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_layer_input, sigmoid, Tensor3, DIFFERENCE, LAYER_CHANNELS, TEMPORAL};
use crate::error::{Error, Result};

const KERNEL: usize = 3;

/// All learnable tensors of the block.
#[derive(Debug, Clone, PartialEq)]
pub struct SeParams {
    /// First convolution kernel, shape (5, 5, 3, 3) as (out, in, ky, kx).
    pub conv1: Array4<f64>,
    /// Second convolution kernel, same shape.
    pub conv2: Array4<f64>,
    /// First linear map of the gate network, shape (5, 5).
    pub w1: Array2<f64>,
    /// Second linear map, shape (2, 5): five pooled features → two gates.
    pub w2: Array2<f64>,
}

impl SeParams {
    pub fn zeros() -> Self {
        SeParams {
            conv1: Array4::zeros((LAYER_CHANNELS, LAYER_CHANNELS, KERNEL, KERNEL)),
            conv2: Array4::zeros((LAYER_CHANNELS, LAYER_CHANNELS, KERNEL, KERNEL)),
            w1: Array2::zeros((LAYER_CHANNELS, LAYER_CHANNELS)),
            w2: Array2::zeros((2, LAYER_CHANNELS)),
        }
    }

    /// Fan-in-scaled uniform initialization (bound `√(6 / fan_in)`) from
    /// a seeded deterministic generator; the same seed always produces
    /// the same parameters.
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |count: usize, fan_in: usize| -> Vec<f64> {
            let bound = (6.0 / fan_in as f64).sqrt();
            (0..count).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let conv_len = LAYER_CHANNELS * LAYER_CHANNELS * KERNEL * KERNEL;
        let conv_fan_in = LAYER_CHANNELS * KERNEL * KERNEL;
        SeParams {
            conv1: Array4::from_shape_vec(
                (LAYER_CHANNELS, LAYER_CHANNELS, KERNEL, KERNEL),
                draw(conv_len, conv_fan_in),
            )
            .expect("length matches shape"),
            conv2: Array4::from_shape_vec(
                (LAYER_CHANNELS, LAYER_CHANNELS, KERNEL, KERNEL),
                draw(conv_len, conv_fan_in),
            )
            .expect("length matches shape"),
            w1: Array2::from_shape_vec(
                (LAYER_CHANNELS, LAYER_CHANNELS),
                draw(LAYER_CHANNELS * LAYER_CHANNELS, LAYER_CHANNELS),
            )
            .expect("length matches shape"),
            w2: Array2::from_shape_vec(
                (2, LAYER_CHANNELS),
                draw(2 * LAYER_CHANNELS, LAYER_CHANNELS),
            )
            .expect("length matches shape"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let conv_shape = [LAYER_CHANNELS, LAYER_CHANNELS, KERNEL, KERNEL];
        for (name, shape) in [
            ("conv1", self.conv1.shape()),
            ("conv2", self.conv2.shape()),
        ] {
            if shape != conv_shape {
                return Err(Error::ShapeMismatch(format!(
                    "{name} must be {conv_shape:?}, got {shape:?}"
                )));
            }
        }
        if self.w1.shape() != [LAYER_CHANNELS, LAYER_CHANNELS] {
            return Err(Error::ShapeMismatch(format!(
                "w1 must be [{LAYER_CHANNELS}, {LAYER_CHANNELS}], got {:?}",
                self.w1.shape()
            )));
        }
        if self.w2.shape() != [2, LAYER_CHANNELS] {
            return Err(Error::ShapeMismatch(format!(
                "w2 must be [2, {LAYER_CHANNELS}], got {:?}",
                self.w2.shape()
            )));
        }
        let finite = self.conv1.iter().all(|v| v.is_finite())
            && self.conv2.iter().all(|v| v.is_finite())
            && self.w1.iter().all(|v| v.is_finite())
            && self.w2.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("SE parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Total scalar parameter count (2·5·5·3·3 + 5·5 + 2·5 = 485).
    pub fn parameter_count() -> usize {
        2 * LAYER_CHANNELS * LAYER_CHANNELS * KERNEL * KERNEL
            + LAYER_CHANNELS * LAYER_CHANNELS
            + 2 * LAYER_CHANNELS
    }
}

/// Gradients mirroring [`SeParams`] field-for-field.
#[derive(Debug, Clone, PartialEq)]
pub struct SeGrads {
    pub conv1: Array4<f64>,
    pub conv2: Array4<f64>,
    pub w1: Array2<f64>,
    pub w2: Array2<f64>,
}

/// Intermediates retained by [`se_forward`] for the backward pass.
///
/// Single-use with its matching upstream gradient; it owns a copy of the
/// parameters so backward needs no separate handle.
#[derive(Debug, Clone)]
pub struct SeCache {
    params: SeParams,
    input: Tensor3,
    /// conv1 output, pre-ReLU.
    a1: Tensor3,
    /// ReLU(a1).
    r1: Tensor3,
    /// conv2 output (the tensor the squeeze pools over).
    x: Tensor3,
    /// Per-channel spatial means of `x`.
    z: Array1<f64>,
    /// w1·z, pre-ReLU.
    h: Array1<f64>,
    /// ReLU(h).
    hr: Array1<f64>,
    /// The two gate values σ(w2·hr).
    s: [f64; 2],
}

impl SeCache {
    /// The two gates applied to the temporal and difference planes.
    pub fn scales(&self) -> [f64; 2] {
        self.s
    }

    /// Smallest |pre-activation| over every ReLU argument; finite
    /// differences are untrustworthy when this is close to zero.
    pub fn min_kink_distance(&self) -> f64 {
        self.a1
            .iter()
            .chain(self.h.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v.abs()))
    }

    /// Sign pattern of every ReLU argument, for detecting region changes
    /// between finite-difference evaluations.
    pub fn kink_signs(&self) -> Vec<bool> {
        self.a1
            .iter()
            .chain(self.h.iter())
            .map(|&v| v > 0.0)
            .collect()
    }
}

/// Zero-padded stride-1 3×3 convolution, no bias.
fn conv3x3(input: &Tensor3, kernel: &Array4<f64>) -> Tensor3 {
    let (in_c, h, w) = input.dim();
    let out_c = kernel.shape()[0];
    let mut out = Array3::<f64>::zeros((out_c, h, w));
    for o in 0..out_c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for c in 0..in_c {
                    for p in 0..KERNEL {
                        let yy = y + p;
                        if yy < 1 || yy > h {
                            continue;
                        }
                        for q in 0..KERNEL {
                            let xx = x + q;
                            if xx < 1 || xx > w {
                                continue;
                            }
                            acc += input[(c, yy - 1, xx - 1)] * kernel[(o, c, p, q)];
                        }
                    }
                }
                out[(o, y, x)] = acc;
            }
        }
    }
    out
}

/// Gradient of the convolution with respect to its input.
fn conv3x3_backward_input(d_out: &Tensor3, kernel: &Array4<f64>, in_c: usize) -> Tensor3 {
    let (out_c, h, w) = d_out.dim();
    let mut d_in = Array3::<f64>::zeros((in_c, h, w));
    for c in 0..in_c {
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for o in 0..out_c {
                    for p in 0..KERNEL {
                        // forward read input[y + p - 1] for output row y,
                        // so input row y feeds output row y - p + 1
                        let yy = (y + 1).wrapping_sub(p);
                        if yy >= h {
                            continue;
                        }
                        for q in 0..KERNEL {
                            let xx = (x + 1).wrapping_sub(q);
                            if xx >= w {
                                continue;
                            }
                            acc += d_out[(o, yy, xx)] * kernel[(o, c, p, q)];
                        }
                    }
                }
                d_in[(c, y, x)] = acc;
            }
        }
    }
    d_in
}

/// Gradient of the convolution with respect to its kernel.
fn conv3x3_backward_kernel(d_out: &Tensor3, input: &Tensor3) -> Array4<f64> {
    let (out_c, h, w) = d_out.dim();
    let in_c = input.dim().0;
    let mut d_k = Array4::<f64>::zeros((out_c, in_c, KERNEL, KERNEL));
    for o in 0..out_c {
        for c in 0..in_c {
            for p in 0..KERNEL {
                for q in 0..KERNEL {
                    let mut acc = 0.0;
                    for y in 0..h {
                        let yy = y + p;
                        if yy < 1 || yy > h {
                            continue;
                        }
                        for x in 0..w {
                            let xx = x + q;
                            if xx < 1 || xx > w {
                                continue;
                            }
                            acc += d_out[(o, y, x)] * input[(c, yy - 1, xx - 1)];
                        }
                    }
                    d_k[(o, c, p, q)] = acc;
                }
            }
        }
    }
    d_k
}

fn relu(t: &Tensor3) -> Tensor3 {
    t.mapv(|v| v.max(0.0))
}

/// Run the block: compute the two gates from the input, scale planes 4–5
/// of the original input by them, and return the output with the cache
/// needed for [`se_backward`].
pub fn se_forward(stack: &Tensor3, p: &SeParams) -> Result<(Tensor3, SeCache)> {
    check_layer_input(stack, "SE input")?;
    p.validate()?;
    let (_, h, w) = stack.dim();
    let pixels = (h * w) as f64;

    let a1 = conv3x3(stack, &p.conv1);
    let r1 = relu(&a1);
    let x = conv3x3(&r1, &p.conv2);

    let z = Array1::from_iter(
        (0..LAYER_CHANNELS).map(|c| x.index_axis(ndarray::Axis(0), c).sum() / pixels),
    );
    let hvec = p.w1.dot(&z);
    let hr = hvec.mapv(|v| v.max(0.0));
    let u = p.w2.dot(&hr);
    let s = [sigmoid(u[0]), sigmoid(u[1])];

    let mut out = stack.clone();
    out.index_axis_mut(ndarray::Axis(0), TEMPORAL)
        .mapv_inplace(|v| v * s[0]);
    out.index_axis_mut(ndarray::Axis(0), DIFFERENCE)
        .mapv_inplace(|v| v * s[1]);

    Ok((
        out,
        SeCache {
            params: p.clone(),
            input: stack.clone(),
            a1,
            r1,
            x,
            z,
            h: hvec,
            hr,
            s,
        },
    ))
}

/// Reverse-mode pass matching [`se_forward`] exactly.
///
/// Returns gradients for every parameter block and for the input; the
/// input gradient combines the pass-through path (upstream routed through
/// the gates) with the conv path (how the input shaped the gates).
pub fn se_backward(cache: &SeCache, upstream: &Tensor3) -> Result<(SeGrads, Tensor3)> {
    check_layer_input(upstream, "SE upstream gradient")?;
    if upstream.shape() != cache.input.shape() {
        return Err(Error::ShapeMismatch(format!(
            "upstream shape {:?} does not match cached input shape {:?}",
            upstream.shape(),
            cache.input.shape()
        )));
    }
    let p = &cache.params;
    let (_, h, w) = cache.input.dim();
    let pixels = (h * w) as f64;

    // gates: out[3] = in[3]·s0, out[4] = in[4]·s1
    let plane_dot = |c: usize| -> f64 {
        upstream
            .index_axis(ndarray::Axis(0), c)
            .iter()
            .zip(cache.input.index_axis(ndarray::Axis(0), c).iter())
            .map(|(&u, &v)| u * v)
            .sum()
    };
    let d_s = [plane_dot(TEMPORAL), plane_dot(DIFFERENCE)];
    let d_u = [
        d_s[0] * cache.s[0] * (1.0 - cache.s[0]),
        d_s[1] * cache.s[1] * (1.0 - cache.s[1]),
    ];

    // u = w2·hr
    let mut d_w2 = Array2::<f64>::zeros((2, LAYER_CHANNELS));
    let mut d_hr = Array1::<f64>::zeros(LAYER_CHANNELS);
    for i in 0..2 {
        for j in 0..LAYER_CHANNELS {
            d_w2[(i, j)] = d_u[i] * cache.hr[j];
            d_hr[j] += d_u[i] * p.w2[(i, j)];
        }
    }

    // hr = ReLU(h), h = w1·z
    let d_h = Array1::from_iter(
        d_hr.iter()
            .zip(cache.h.iter())
            .map(|(&g, &pre)| if pre > 0.0 { g } else { 0.0 }),
    );
    let mut d_w1 = Array2::<f64>::zeros((LAYER_CHANNELS, LAYER_CHANNELS));
    let mut d_z = Array1::<f64>::zeros(LAYER_CHANNELS);
    for i in 0..LAYER_CHANNELS {
        for j in 0..LAYER_CHANNELS {
            d_w1[(i, j)] = d_h[i] * cache.z[j];
            d_z[j] += d_h[i] * p.w1[(i, j)];
        }
    }

    // z[c] = mean of x[c]: the gradient spreads evenly over the plane
    let mut d_x = Tensor3::zeros(cache.x.dim());
    for c in 0..LAYER_CHANNELS {
        let g = d_z[c] / pixels;
        d_x.index_axis_mut(ndarray::Axis(0), c).fill(g);
    }

    let d_r1 = conv3x3_backward_input(&d_x, &p.conv2, LAYER_CHANNELS);
    let d_conv2 = conv3x3_backward_kernel(&d_x, &cache.r1);

    let mut d_a1 = d_r1;
    d_a1.zip_mut_with(&cache.a1, |g, &pre| {
        if pre <= 0.0 {
            *g = 0.0;
        }
    });

    let d_in_conv = conv3x3_backward_input(&d_a1, &p.conv1, LAYER_CHANNELS);
    let d_conv1 = conv3x3_backward_kernel(&d_a1, &cache.input);

    // pass-through path, gated like the forward
    let mut grad_stack = upstream.clone();
    grad_stack
        .index_axis_mut(ndarray::Axis(0), TEMPORAL)
        .mapv_inplace(|v| v * cache.s[0]);
    grad_stack
        .index_axis_mut(ndarray::Axis(0), DIFFERENCE)
        .mapv_inplace(|v| v * cache.s[1]);
    grad_stack += &d_in_conv;

    Ok((
        SeGrads {
            conv1: d_conv1,
            conv2: d_conv2,
            w1: d_w1,
            w2: d_w2,
        },
        grad_stack,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn random_tensor(seed: u64, h: usize, w: usize) -> Tensor3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array3::from_shape_fn((5, h, w), |_| rng.gen_range(-1.0..1.0))
    }

    /// Independent convolution reference: pad explicitly, then correlate.
    fn conv_reference(input: &Tensor3, kernel: &Array4<f64>) -> Tensor3 {
        let (in_c, h, w) = input.dim();
        let mut padded = Array3::<f64>::zeros((in_c, h + 2, w + 2));
        for c in 0..in_c {
            for y in 0..h {
                for x in 0..w {
                    padded[(c, y + 1, x + 1)] = input[(c, y, x)];
                }
            }
        }
        let out_c = kernel.shape()[0];
        let mut out = Array3::<f64>::zeros((out_c, h, w));
        for o in 0..out_c {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for c in 0..in_c {
                        for p in 0..3 {
                            for q in 0..3 {
                                acc += padded[(c, y + p, x + q)] * kernel[(o, c, p, q)];
                            }
                        }
                    }
                    out[(o, y, x)] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn convolution_matches_padded_reference() {
        let input = random_tensor(31, 6, 7);
        let kernel = SeParams::init(32).conv1;
        assert_eq!(conv3x3(&input, &kernel), conv_reference(&input, &kernel));
    }

    #[test]
    fn zero_w2_gates_are_exactly_half() {
        let mut p = SeParams::init(5);
        p.w2.fill(0.0);
        for seed in [1, 2, 3] {
            let input = random_tensor(seed, 6, 6);
            let (out, cache) = se_forward(&input, &p).unwrap();
            assert_eq!(cache.scales(), [0.5, 0.5]);
            for (&o, &i) in out
                .index_axis(ndarray::Axis(0), TEMPORAL)
                .iter()
                .zip(input.index_axis(ndarray::Axis(0), TEMPORAL).iter())
            {
                assert_eq!(o, i * 0.5);
            }
        }
    }

    #[test]
    fn rgb_planes_pass_through_bit_for_bit() {
        let input = random_tensor(8, 16, 16);
        let p = SeParams::init(9);
        let (out, _) = se_forward(&input, &p).unwrap();
        for c in 0..3 {
            let a = out.index_axis(ndarray::Axis(0), c);
            let b = input.index_axis(ndarray::Axis(0), c);
            for (&x, &y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn gated_planes_are_scaled_by_one_constant_each() {
        let input = random_tensor(10, 16, 16);
        let p = SeParams::init(11);
        let (out, cache) = se_forward(&input, &p).unwrap();
        let [s0, s1] = cache.scales();
        assert!(s0 > 0.0 && s0 < 1.0);
        assert!(s1 > 0.0 && s1 < 1.0);
        for (c, s) in [(TEMPORAL, s0), (DIFFERENCE, s1)] {
            for (&o, &i) in out
                .index_axis(ndarray::Axis(0), c)
                .iter()
                .zip(input.index_axis(ndarray::Axis(0), c).iter())
            {
                assert_eq!(o, i * s);
            }
        }
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let input = random_tensor(12, 8, 8);
        let p = SeParams::init(13);
        let (out1, c1) = se_forward(&input, &p).unwrap();
        let (out2, c2) = se_forward(&input, &p).unwrap();
        assert_eq!(out1, out2);
        assert_eq!(c1.scales(), c2.scales());
    }

    #[test]
    fn zero_upstream_zeroes_every_gradient() {
        let input = random_tensor(14, 6, 6);
        let p = SeParams::init(15);
        let (_, cache) = se_forward(&input, &p).unwrap();
        let upstream = Tensor3::zeros((5, 6, 6));
        let (grads, grad_stack) = se_backward(&cache, &upstream).unwrap();
        assert!(grads.conv1.iter().all(|&v| v == 0.0));
        assert!(grads.conv2.iter().all(|&v| v == 0.0));
        assert!(grads.w1.iter().all(|&v| v == 0.0));
        assert!(grads.w2.iter().all(|&v| v == 0.0));
        assert!(grad_stack.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_kernels_reduce_input_gradient_to_gated_pass_through() {
        let input = random_tensor(16, 5, 5);
        let mut p = SeParams::init(17);
        p.conv1.fill(0.0);
        p.conv2.fill(0.0);
        let (_, cache) = se_forward(&input, &p).unwrap();
        let upstream = random_tensor(18, 5, 5);
        let (grads, grad_stack) = se_backward(&cache, &upstream).unwrap();
        let [s0, s1] = cache.scales();
        assert_eq!([s0, s1], [0.5, 0.5]);
        for c in 0..3 {
            assert_eq!(
                grad_stack.index_axis(ndarray::Axis(0), c),
                upstream.index_axis(ndarray::Axis(0), c)
            );
        }
        for (c, s) in [(TEMPORAL, s0), (DIFFERENCE, s1)] {
            for (&g, &u) in grad_stack
                .index_axis(ndarray::Axis(0), c)
                .iter()
                .zip(upstream.index_axis(ndarray::Axis(0), c).iter())
            {
                assert_eq!(g, u * s);
            }
        }
        // dead conv path contributes nothing to the kernels either
        assert!(grads.conv2.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_channel_count_is_rejected() {
        let bad = Tensor3::zeros((4, 4, 4));
        assert!(se_forward(&bad, &SeParams::init(1)).is_err());
    }

    #[test]
    fn upstream_shape_mismatch_is_rejected() {
        let input = random_tensor(19, 4, 4);
        let (_, cache) = se_forward(&input, &SeParams::init(20)).unwrap();
        let upstream = Tensor3::zeros((5, 3, 4));
        assert!(se_backward(&cache, &upstream).is_err());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let p = SeParams::init(42);
        let conv_bound = (6.0 / 45.0f64).sqrt();
        let fc_bound = (6.0 / 5.0f64).sqrt();
        assert!(p.conv1.iter().chain(p.conv2.iter()).all(|v| v.abs() < conv_bound));
        assert!(p.w1.iter().chain(p.w2.iter()).all(|v| v.abs() < fc_bound));
        assert_eq!(SeParams::parameter_count(), 485);
    }
}
