//! Dense row-major tensors and the numeric kernels every layer is built on.
//!
//! Image batches use the `(batch, height, width, channels)` layout and
//! convolution kernels use `(kh, kw, c_in, c_out)`, so a kernel reshaped to
//! `(kh * kw * c_in, c_out)` lines up with the rows produced by [`im2col`].

use crate::{Error, Float, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<Float>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: Float) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![value; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<Float>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape("Tensor::from_vec", format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Build a tensor by evaluating `f` at every flat index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> Float) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(f).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[Float] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Float] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Float> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape("Tensor::reshape", format!("cannot view {:?} as {shape:?}", self.shape)));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Rows and columns when the tensor is read as a matrix whose last axis
    /// is the column axis.
    pub fn as_matrix_dims(&self) -> (usize, usize) {
        let cols = self.shape.last().copied().unwrap_or(1);
        let rows = self.data.len().checked_div(cols).unwrap_or(0);
        (rows, cols)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> Float {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(Float) -> Float) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// `self += alpha * other`, shapes must agree.
    pub fn add_scaled(&mut self, other: &Tensor, alpha: Float) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("Tensor::add_scaled", format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn fill(&mut self, value: Float) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Float {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, Float::max)
    }
}

/// `c = alpha * a · b + beta * c` on strided row-major views.
///
/// Single-threaded with a fixed blocking, so results are bitwise repeatable
/// for identical inputs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: Float,
    a: &[Float],
    a_strides: (isize, isize),
    b: &[Float],
    b_strides: (isize, isize),
    beta: Float,
    c: &mut [Float],
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        (rows.saturating_sub(1) as isize * rs + cols.saturating_sub(1) as isize * cs) as usize
    };
    assert!(k == 0 || a.len() > last(m, k, a_strides), "gemm: lhs buffer too small");
    assert!(k == 0 || b.len() > last(k, n, b_strides), "gemm: rhs buffer too small");
    assert!(c.len() >= m * n, "gemm: output buffer too small");
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        #[cfg(not(feature = "f32"))]
        matrixmultiply::dgemm(
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
            n as isize,
            1,
        );
        #[cfg(feature = "f32")]
        matrixmultiply::sgemm(
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
            n as isize,
            1,
        );
    }
}

pub(crate) fn row_major(cols: usize) -> (isize, isize) {
    (cols as isize, 1)
}

/// Strides that read a row-major `(rows, cols)` buffer as its transpose.
pub(crate) fn transposed(cols: usize) -> (isize, isize) {
    (1, cols as isize)
}

/// Matrix product of `(m, k)` and `(k, n)` tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.ndim() != 2 || b.ndim() != 2 || a.shape[1] != b.shape[0] {
        return Err(Error::shape("matmul", format!("{:?} · {:?}", a.shape, b.shape)));
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    let mut out = Tensor::zeros(&[m, n]);
    gemm(m, k, n, 1.0, &a.data, row_major(k), &b.data, row_major(n), 0.0, &mut out.data);
    Ok(out)
}

/// Output length and leading padding of a "same" window along one axis.
///
/// The output has `ceil(len / stride)` cells; any odd padding goes after the
/// input, matching the usual TensorFlow convention.
pub fn same_padding(len: usize, window: usize, stride: usize) -> (usize, usize) {
    let out = len.div_ceil(stride);
    let total = ((out.saturating_sub(1)) * stride + window).saturating_sub(len);
    (out, total / 2)
}

fn image_dims(t: &Tensor, op: &'static str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [b, h, w, c] => Ok((b, h, w, c)),
        _ => Err(Error::shape(op, format!("expected (batch, h, w, c), got {:?}", t.shape()))),
    }
}

/// Expand every `kh × kw` same-padded neighbourhood of a
/// `(batch, h, w, c)` input into one row of a
/// `(batch * h * w, kh * kw * c)` matrix. Padding cells are zero.
pub fn im2col(input: &Tensor, kh: usize, kw: usize) -> Result<Tensor> {
    let (b, h, w, c) = image_dims(input, "im2col")?;
    let (_, pad_h) = same_padding(h, kh, 1);
    let (_, pad_w) = same_padding(w, kw, 1);
    let width = kh * kw * c;
    let mut out = vec![0.0; b * h * w * width];
    let src = input.data();
    for n in 0..b {
        for y in 0..h {
            for x in 0..w {
                let row = ((n * h + y) * w + x) * width;
                for dy in 0..kh {
                    let iy = y as isize + dy as isize - pad_h as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for dx in 0..kw {
                        let ix = x as isize + dx as isize - pad_w as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let s = ((n * h + iy as usize) * w + ix as usize) * c;
                        let d = row + (dy * kw + dx) * c;
                        out[d..d + c].copy_from_slice(&src[s..s + c]);
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[b * h * w, width], out)
}

/// Adjoint of [`im2col`]: scatter-add patch rows back onto a
/// `(batch, h, w, c)` image.
pub fn col2im(cols: &Tensor, shape: (usize, usize, usize, usize), kh: usize, kw: usize) -> Result<Tensor> {
    let (b, h, w, c) = shape;
    let width = kh * kw * c;
    if cols.shape() != [b * h * w, width] {
        return Err(Error::shape("col2im", format!("{:?} does not expand {shape:?} with a {kh}x{kw} window", cols.shape())));
    }
    let (_, pad_h) = same_padding(h, kh, 1);
    let (_, pad_w) = same_padding(w, kw, 1);
    let mut out = Tensor::zeros(&[b, h, w, c]);
    let src = cols.data();
    let dst = out.data_mut();
    for n in 0..b {
        for y in 0..h {
            for x in 0..w {
                let row = ((n * h + y) * w + x) * width;
                for dy in 0..kh {
                    let iy = y as isize + dy as isize - pad_h as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for dx in 0..kw {
                        let ix = x as isize + dx as isize - pad_w as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let d = ((n * h + iy as usize) * w + ix as usize) * c;
                        let s = row + (dy * kw + dx) * c;
                        for ch in 0..c {
                            dst[d + ch] += src[s + ch];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_conv_shapes(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<(usize, usize, usize)> {
    let (_, _, _, c_in) = image_dims(input, "conv2d_same")?;
    let [kh, kw, k_in, c_out] = *kernels.shape() else {
        return Err(Error::shape("conv2d_same", format!("kernel shape {:?}", kernels.shape())));
    };
    if k_in != c_in || bias.shape() != [c_out] {
        return Err(Error::shape(
            "conv2d_same",
            format!("input {:?}, kernels {:?}, bias {:?}", input.shape(), kernels.shape(), bias.shape()),
        ));
    }
    Ok((kh, kw, c_out))
}

/// Same-padded 2-D cross-correlation with per-channel bias.
///
/// Returns the output together with the expanded patch matrix, which the
/// convolution layer keeps for its backward pass.
pub fn conv2d_same_with_patches(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<(Tensor, Tensor)> {
    let (kh, kw, c_out) = check_conv_shapes(input, kernels, bias)?;
    let (b, h, w, _) = image_dims(input, "conv2d_same")?;
    let patches = im2col(input, kh, kw)?;
    let (rows, width) = (patches.shape()[0], patches.shape()[1]);
    let mut out = vec![0.0; rows * c_out];
    for row in out.chunks_exact_mut(c_out) {
        row.copy_from_slice(bias.data());
    }
    gemm(rows, width, c_out, 1.0, patches.data(), row_major(width), kernels.data(), row_major(c_out), 1.0, &mut out);
    Ok((Tensor::from_vec(&[b, h, w, c_out], out)?, patches))
}

pub fn conv2d_same(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    conv2d_same_with_patches(input, kernels, bias).map(|(out, _)| out)
}

/// Per-output-cell divisor of a same-padded average pool: the number of
/// window cells that fall inside the input.
fn pool_counts(len: usize, window: usize, stride: usize) -> Vec<(usize, usize)> {
    let (out, pad) = same_padding(len, window, stride);
    (0..out)
        .map(|o| {
            let start = (o * stride) as isize - pad as isize;
            let lo = start.max(0) as usize;
            let hi = ((start + window as isize) as usize).min(len);
            (lo, hi)
        })
        .collect()
}

/// Same-padded average pooling. Padding cells are excluded from both the
/// sum and the divisor, so constant inputs stay exactly constant.
pub fn avgpool_same(input: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    let (b, h, w, c) = image_dims(input, "avgpool_same")?;
    let rows = pool_counts(h, window, stride);
    let cols = pool_counts(w, window, stride);
    let (oh, ow) = (rows.len(), cols.len());
    let mut out = Tensor::zeros(&[b, oh, ow, c]);
    let src = input.data();
    let dst = out.data_mut();
    for n in 0..b {
        for (oy, &(y0, y1)) in rows.iter().enumerate() {
            for (ox, &(x0, x1)) in cols.iter().enumerate() {
                let d = ((n * oh + oy) * ow + ox) * c;
                let acc = &mut dst[d..d + c];
                for y in y0..y1 {
                    for x in x0..x1 {
                        let s = ((n * h + y) * w + x) * c;
                        for (a, v) in acc.iter_mut().zip(&src[s..s + c]) {
                            *a += v;
                        }
                    }
                }
                let inv = 1.0 / ((y1 - y0) * (x1 - x0)) as Float;
                acc.iter_mut().for_each(|a| *a *= inv);
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`avgpool_same`]: each output gradient is shared
/// equally among the input cells its window covered.
pub fn avgpool_same_backward(grad_out: &Tensor, input_shape: &[usize], window: usize, stride: usize) -> Result<Tensor> {
    let [b, h, w, c] = *input_shape else {
        return Err(Error::shape("avgpool_same_backward", format!("input shape {input_shape:?}")));
    };
    let rows = pool_counts(h, window, stride);
    let cols = pool_counts(w, window, stride);
    let (oh, ow) = (rows.len(), cols.len());
    if grad_out.shape() != [b, oh, ow, c] {
        return Err(Error::shape("avgpool_same_backward", format!("gradient {:?} for input {input_shape:?}", grad_out.shape())));
    }
    let mut grad_in = Tensor::zeros(input_shape);
    let src = grad_out.data();
    let dst = grad_in.data_mut();
    for n in 0..b {
        for (oy, &(y0, y1)) in rows.iter().enumerate() {
            for (ox, &(x0, x1)) in cols.iter().enumerate() {
                let s = ((n * oh + oy) * ow + ox) * c;
                let inv = 1.0 / ((y1 - y0) * (x1 - x0)) as Float;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let d = ((n * h + y) * w + x) * c;
                        for ch in 0..c {
                            dst[d + ch] += src[s + ch] * inv;
                        }
                    }
                }
            }
        }
    }
    Ok(grad_in)
}
