//! Layer math for the steering networks.
//!
//! Everything operates on [`Tensor`], a row-major buffer with an explicit
//! shape. Image activations are rank 3 in `(height, width, channels)` order.
//! Kernels are generic over [`Scalar`] so the same code runs in `f32` for
//! inference/training and in `f64` for finite-difference gradient checks.

pub mod adam;
pub mod conv;
pub mod dense;
pub mod layer;
pub mod ops;
pub mod separable;

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

pub use adam::{AdamConfig, AdamState};
pub use layer::{Activation, LayerKind, LayerSpec, Padding};

/// Floating-point element type usable by every kernel.
pub trait Scalar:
    Float + FromPrimitive + Sum + Debug + Default + Send + Sync + 'static
{
    /// `c = alpha * a·b + beta * c` with explicit row/column strides.
    ///
    /// `a` is `m×k`, `b` is `k×n`, `c` is `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (isize, isize),
        b: &[Self],
        b_strides: (isize, isize),
        beta: Self,
        c: &mut [Self],
        c_strides: (isize, isize),
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts")
    }
}

fn check_extent(len: usize, rows: usize, cols: usize, (rs, cs): (isize, isize)) {
    if rows == 0 || cols == 0 {
        return;
    }
    let last = (rows as isize - 1) * rs + (cols as isize - 1) * cs;
    assert!(
        rs >= 0 && cs >= 0 && (last as usize) < len,
        "gemm operand out of bounds"
    );
}

macro_rules! impl_scalar {
    ($t:ty, $f:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (isize, isize),
                b: &[Self],
                b_strides: (isize, isize),
                beta: Self,
                c: &mut [Self],
                c_strides: (isize, isize),
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                check_extent(a.len(), m, k, a_strides);
                check_extent(b.len(), k, n, b_strides);
                check_extent(c.len(), m, n, c_strides);
                // SAFETY: every operand extent was bounds-checked above.
                unsafe {
                    $f(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0,
                        a_strides.1,
                        b.as_ptr(),
                        b_strides.0,
                        b_strides.1,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0,
                        c_strides.1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Shaped, row-major buffer. `data.len()` always equals the product of `shape`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape(format!("zero dimension in {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero dimension in {shape:?}");
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> T) -> Self {
        let mut t = Self::zeros(shape);
        for (i, v) in t.data.iter_mut().enumerate() {
            *v = f(i);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(h, w, c)` of a rank-3 image tensor.
    pub fn hwc(&self) -> Result<(usize, usize, usize)> {
        match *self.shape.as_slice() {
            [h, w, c] => Ok((h, w, c)),
            _ => Err(Error::shape(format!(
                "expected (h, w, c) tensor, got {:?}",
                self.shape
            ))),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.contains(&0) {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|&v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Runs one layer on a single sample. `params` are the layer's tensors in
/// [`LayerSpec::param_shapes`] order.
pub fn forward_layer<T: Scalar>(layer: &LayerSpec, params: &[Tensor<T>], input: &Tensor<T>) -> Result<Tensor<T>> {
    check_param_arity(layer, params)?;
    match layer.kind {
        LayerKind::Normalization => Ok(ops::normalize(input)),
        LayerKind::Flatten => input.clone().reshape(&[input.len()]),
        LayerKind::Conv2D => conv::conv2d_forward(input, layer, &params[0], &params[1]),
        LayerKind::SeparableConv2D => {
            separable::separable_conv2d_forward(input, layer, &params[0], &params[1], &params[2])
        }
        LayerKind::Dense => dense::dense_forward(input, layer, &params[0], &params[1]),
    }
}

/// Backward of [`forward_layer`]. Parameter gradients accumulate into
/// `grads` (same arity and shapes as `params`).
#[allow(clippy::too_many_arguments)]
pub fn backward_layer<T: Scalar>(
    layer: &LayerSpec,
    params: &[Tensor<T>],
    input: &Tensor<T>,
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
    grads: &mut [Tensor<T>],
    want_input_grad: bool,
) -> Result<Option<Tensor<T>>> {
    check_param_arity(layer, params)?;
    if grads.len() != params.len() {
        return Err(Error::shape("gradient arity differs from parameter arity"));
    }
    match layer.kind {
        LayerKind::Normalization => Ok(want_input_grad.then(|| ops::normalize_backward(grad_out))),
        LayerKind::Flatten => {
            if grad_out.len() != input.len() {
                return Err(Error::shape("flatten gradient length mismatch"));
            }
            want_input_grad
                .then(|| grad_out.clone().reshape(input.shape()))
                .transpose()
        }
        LayerKind::Conv2D => {
            let [gw, gb] = grads else { unreachable!() };
            conv::conv2d_backward_into(
                input,
                layer,
                &params[0],
                &params[1],
                output,
                grad_out,
                gw.data_mut(),
                gb.data_mut(),
                want_input_grad,
            )
        }
        LayerKind::SeparableConv2D => {
            let [gd, gp, gb] = grads else { unreachable!() };
            separable::separable_conv2d_backward_into(
                input,
                layer,
                &params[0],
                &params[1],
                &params[2],
                output,
                grad_out,
                [gd.data_mut(), gp.data_mut(), gb.data_mut()],
                want_input_grad,
            )
        }
        LayerKind::Dense => {
            let [gw, gb] = grads else { unreachable!() };
            dense::dense_backward_into(
                input,
                layer,
                &params[0],
                &params[1],
                output,
                grad_out,
                gw.data_mut(),
                gb.data_mut(),
                want_input_grad,
            )
        }
    }
}

fn check_param_arity<T: Scalar>(layer: &LayerSpec, params: &[Tensor<T>]) -> Result<()> {
    let shapes = layer.param_shapes();
    if shapes.len() != params.len() {
        return Err(Error::shape(format!(
            "{} takes {} parameter tensors, got {}",
            layer.kind.name(),
            shapes.len(),
            params.len()
        )));
    }
    Ok(())
}
