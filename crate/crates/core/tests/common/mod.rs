//! Reference implementations shared by the integration tests. Written
//! directly from the definitions, without any of the library's geometry
//! helpers.

#![allow(dead_code)]

use dualdrive::tensor::conv::conv2d_forward;
use dualdrive::tensor::separable::separable_conv2d_forward;
use dualdrive::tensor::{backward_layer, forward_layer, Activation, LayerKind, LayerSpec, Padding, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Output extent and leading pad for one axis.
pub fn axis(input: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => ((input - kernel) / stride + 1, 0),
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            (out, total / 2)
        }
    }
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => v.max(0.0),
        Activation::Linear => v,
    }
}

/// Input value at signed coordinates, zero outside.
fn at(x: &[f64], (h, w, c): (usize, usize, usize), y: isize, xx: isize, ch: usize) -> f64 {
    if y < 0 || xx < 0 || y as usize >= h || xx as usize >= w {
        0.0
    } else {
        x[(y as usize * w + xx as usize) * c + ch]
    }
}

/// Nested-loop convolution. Kernel `(kh, kw, cin, cout)`.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv(
    x: &[f64],
    shape: (usize, usize, usize),
    kernel: &[f64],
    k: usize,
    cout: usize,
    bias: &[f64],
    stride: usize,
    padding: Padding,
    activation: Activation,
) -> (Vec<f64>, (usize, usize, usize)) {
    let (h, w, cin) = shape;
    let (oh, pt) = axis(h, k, stride, padding);
    let (ow, pl) = axis(w, k, stride, padding);
    let mut out = vec![0.0; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let mut s = bias[co];
                for ky in 0..k {
                    for kx in 0..k {
                        for ci in 0..cin {
                            let iy = (oy * stride + ky) as isize - pt as isize;
                            let ix = (ox * stride + kx) as isize - pl as isize;
                            s += at(x, shape, iy, ix, ci) * kernel[((ky * k + kx) * cin + ci) * cout + co];
                        }
                    }
                }
                out[(oy * ow + ox) * cout + co] = act(activation, s);
            }
        }
    }
    (out, (oh, ow, cout))
}

/// Nested-loop depthwise-then-pointwise convolution.
#[allow(clippy::too_many_arguments)]
pub fn naive_separable(
    x: &[f64],
    shape: (usize, usize, usize),
    depthwise: &[f64],
    k: usize,
    pointwise: &[f64],
    cout: usize,
    bias: &[f64],
    stride: usize,
    padding: Padding,
    activation: Activation,
) -> (Vec<f64>, (usize, usize, usize)) {
    let (h, w, cin) = shape;
    let (oh, pt) = axis(h, k, stride, padding);
    let (ow, pl) = axis(w, k, stride, padding);
    let mut out = vec![0.0; oh * ow * cout];
    for oy in 0..oh {
        for ox in 0..ow {
            let mut mid = vec![0.0; cin];
            for (ci, m) in mid.iter_mut().enumerate() {
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * stride + ky) as isize - pt as isize;
                        let ix = (ox * stride + kx) as isize - pl as isize;
                        *m += at(x, shape, iy, ix, ci) * depthwise[(ky * k + kx) * cin + ci];
                    }
                }
            }
            for co in 0..cout {
                let s = bias[co] + (0..cin).map(|ci| mid[ci] * pointwise[ci * cout + co]).sum::<f64>();
                out[(oy * ow + ox) * cout + co] = act(activation, s);
            }
        }
    }
    (out, (oh, ow, cout))
}

/// Central difference of `f` at `x[i]`.
pub fn central_difference(x: &mut [f64], i: usize, step: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + step;
    let up = f(x);
    x[i] = orig - step;
    let down = f(x);
    x[i] = orig;
    (up - down) / (2.0 * step)
}

/// `|a - n| / max(|a|, |n|)`, or zero when both are negligible.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

pub struct Case {
    pub h: usize,
    pub w: usize,
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let k = rng.random_range(1..=5);
    let padding = if rng.random_bool(0.5) { Padding::Same } else { Padding::Valid };
    Case {
        h: rng.random_range(k..=k + 7),
        w: rng.random_range(k..=k + 7),
        cin: rng.random_range(1..=4),
        cout: rng.random_range(1..=4),
        k,
        stride: rng.random_range(1..=3),
        padding,
        activation: if rng.random_bool(0.5) { Activation::Relu } else { Activation::Linear },
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn f32_tensor(shape: &[usize], v: &[f64]) -> Tensor<f32> {
    Tensor::new(shape.to_vec(), v.iter().map(|&x| x as f32).collect()).unwrap()
}

fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (f64::from(x) - y).abs()).fold(0.0, f64::max)
}

/// Worst absolute error of the f32 convolution against [`naive_conv`] over
/// `cases` random geometries.
pub fn conv_worst_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = random_case(&mut rng);
        let layer = LayerSpec::conv2d(c.k, c.stride, c.padding, c.cin, c.cout).with_activation(c.activation);
        let x = uniform(&mut rng, c.h * c.w * c.cin);
        let kern = uniform(&mut rng, c.k * c.k * c.cin * c.cout);
        let bias = uniform(&mut rng, c.cout);
        let (want, shape) = naive_conv(&x, (c.h, c.w, c.cin), &kern, c.k, c.cout, &bias, c.stride, c.padding, c.activation);
        let got = conv2d_forward(
            &f32_tensor(&[c.h, c.w, c.cin], &x),
            &layer,
            &f32_tensor(&[c.k, c.k, c.cin, c.cout], &kern),
            &f32_tensor(&[c.cout], &bias),
        )
        .unwrap();
        assert_eq!(got.shape(), [shape.0, shape.1, shape.2]);
        worst = worst.max(max_abs_diff(got.data(), &want));
    }
    worst
}

/// Worst absolute error of the f32 separable convolution against
/// [`naive_separable`].
pub fn separable_worst_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = random_case(&mut rng);
        let layer = LayerSpec::separable(c.k, c.stride, c.padding, c.cin, c.cout).with_activation(c.activation);
        let x = uniform(&mut rng, c.h * c.w * c.cin);
        let dw = uniform(&mut rng, c.k * c.k * c.cin);
        let pw = uniform(&mut rng, c.cin * c.cout);
        let bias = uniform(&mut rng, c.cout);
        let (want, shape) =
            naive_separable(&x, (c.h, c.w, c.cin), &dw, c.k, &pw, c.cout, &bias, c.stride, c.padding, c.activation);
        let got = separable_conv2d_forward(
            &f32_tensor(&[c.h, c.w, c.cin], &x),
            &layer,
            &f32_tensor(&[c.k, c.k, c.cin], &dw),
            &f32_tensor(&[1, 1, c.cin, c.cout], &pw),
            &f32_tensor(&[c.cout], &bias),
        )
        .unwrap();
        assert_eq!(got.shape(), [shape.0, shape.1, shape.2]);
        worst = worst.max(max_abs_diff(got.data(), &want));
    }
    worst
}

/// Worst difference between a separable layer and the standard convolution
/// with the composed rank-1 kernel.
pub fn rank_one_worst_error(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = random_case(&mut rng);
        let x = f32_tensor(&[c.h, c.w, c.cin], &uniform(&mut rng, c.h * c.w * c.cin));
        let dw = uniform(&mut rng, c.k * c.k * c.cin);
        let pw = uniform(&mut rng, c.cin * c.cout);
        let bias = f32_tensor(&[c.cout], &uniform(&mut rng, c.cout));
        // W[ky, kx, ci, co] = D[ky, kx, ci] · P[ci, co]
        let mut composed = vec![0.0; c.k * c.k * c.cin * c.cout];
        for tap in 0..c.k * c.k {
            for ci in 0..c.cin {
                for co in 0..c.cout {
                    composed[(tap * c.cin + ci) * c.cout + co] = dw[tap * c.cin + ci] * pw[ci * c.cout + co];
                }
            }
        }
        let sep = separable_conv2d_forward(
            &x,
            &LayerSpec::separable(c.k, c.stride, c.padding, c.cin, c.cout).with_activation(c.activation),
            &f32_tensor(&[c.k, c.k, c.cin], &dw),
            &f32_tensor(&[1, 1, c.cin, c.cout], &pw),
            &bias,
        )
        .unwrap();
        let std = conv2d_forward(
            &x,
            &LayerSpec::conv2d(c.k, c.stride, c.padding, c.cin, c.cout).with_activation(c.activation),
            &f32_tensor(&[c.k, c.k, c.cin, c.cout], &composed),
            &bias,
        )
        .unwrap();
        assert_eq!(sep.shape(), std.shape());
        let diff = sep.data().iter().zip(std.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        worst = worst.max(f64::from(diff));
    }
    worst
}

/// Worst relative error of one layer's parameter and input gradients
/// against central differences of `L = Σ r·y` for a fixed random `r`.
pub fn gradient_worst_error(layer: LayerSpec, input_shape: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params: Vec<Tensor<f64>> = layer
        .param_shapes()
        .iter()
        .map(|s| Tensor::from_fn(s, |_| rng.random_range(-0.8..0.8)))
        .collect();
    let total: usize = params.iter().map(Tensor::len).sum();
    assert!(total <= 500, "{:?} has {total} params", layer.kind);
    let scale = if layer.kind == LayerKind::Normalization { 255.0 } else { 1.0 };
    let input = Tensor::from_fn(input_shape, |_| rng.random_range(-1.0..1.0) * scale + if scale > 1.0 { 127.5 } else { 0.0 });
    let out = forward_layer(&layer, &params, &input).unwrap();
    let r = Tensor::from_fn(out.shape(), |_| rng.random_range(-1.0..1.0));
    let loss = |params: &[Tensor<f64>], input: &Tensor<f64>| -> f64 {
        let y = forward_layer(&layer, params, input).unwrap();
        y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
    };

    let mut grads: Vec<Tensor<f64>> = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
    let gi = backward_layer(&layer, &params, &input, &out, &r, &mut grads, true)
        .unwrap()
        .expect("input gradient requested");

    let step = 1e-5;
    let mut worst = 0.0f64;
    for (slot, g) in grads.iter().enumerate() {
        for i in 0..params[slot].len() {
            let mut flat = params[slot].data().to_vec();
            let numeric = central_difference(&mut flat, i, step, |v| {
                let mut p = params.clone();
                p[slot] = Tensor::new(params[slot].shape().to_vec(), v.to_vec()).unwrap();
                loss(&p, &input)
            });
            worst = worst.max(relative_error(g.data()[i], numeric));
        }
    }
    let mut flat = input.data().to_vec();
    for i in 0..flat.len() {
        let numeric = central_difference(&mut flat, i, step, |v| {
            loss(&params, &Tensor::new(input.shape().to_vec(), v.to_vec()).unwrap())
        });
        worst = worst.max(relative_error(gi.data()[i], numeric));
    }
    worst
}

/// One instance of every layer kind (and padding/activation variant), each
/// at most 500 parameters: `(label, layer, input shape, seed)`.
pub fn gradient_suite() -> Vec<(&'static str, LayerSpec, Vec<usize>, u64)> {
    vec![
        ("conv valid stride 2", LayerSpec::conv2d(3, 2, Padding::Valid, 3, 4), vec![7, 8, 3], 1),
        ("conv same stride 2", LayerSpec::conv2d(5, 2, Padding::Same, 2, 3), vec![6, 5, 2], 2),
        ("conv 1x1", LayerSpec::conv2d(1, 1, Padding::Same, 4, 3), vec![3, 4, 4], 3),
        ("conv linear", LayerSpec::conv2d(3, 1, Padding::Valid, 2, 2).with_activation(Activation::Linear), vec![5, 5, 2], 4),
        ("separable same stride 2", LayerSpec::separable(5, 2, Padding::Same, 1, 6), vec![9, 10, 1], 5),
        ("separable same", LayerSpec::separable(3, 1, Padding::Same, 4, 5), vec![5, 6, 4], 6),
        (
            "separable valid linear",
            LayerSpec::separable(3, 2, Padding::Valid, 3, 4).with_activation(Activation::Linear),
            vec![7, 7, 3],
            7,
        ),
        ("dense relu", LayerSpec::dense(20, 10, Activation::Relu), vec![20], 8),
        ("dense linear", LayerSpec::dense(10, 1, Activation::Linear), vec![10], 9),
        ("normalization", LayerSpec::normalization(1), vec![4, 5, 1], 10),
        ("flatten", LayerSpec::flatten(3), vec![2, 3, 3], 11),
    ]
}
