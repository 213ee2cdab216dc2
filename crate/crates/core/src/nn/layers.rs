//! Forward and backward kernels for a single CHW sample.

use super::Tensor;
use crate::error::{Error, Result};

/// `c = a * b + beta * c` for row/column-strided matrices
/// (`a` is m x k, `b` is k x n, `c` is m x n and row-major contiguous).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_strides: (usize, usize), b: &[f64], b_strides: (usize, usize), beta: f64, c: &mut [f64]) {
    let span = |rows: usize, cols: usize, (rs, cs): (usize, usize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs + (cols - 1) * cs + 1
        }
    };
    assert!(a.len() >= span(m, k, a_strides), "gemm: lhs too short");
    assert!(b.len() >= span(k, n, b_strides), "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `floor((in + 2p - k) / s) + 1`, or `None` when the kernel does not fit.
pub fn conv_output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    (padded >= kernel && stride > 0).then(|| (padded - kernel) / stride + 1)
}

/// Ceil-mode pooling size: `ceil((in - k) / s) + 1`; the last window may be
/// truncated at the border.
pub fn pool_output_dim(input: usize, kernel: usize, stride: usize) -> usize {
    if input <= kernel {
        1
    } else {
        (input - kernel).div_ceil(stride) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: [usize; 3], out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        let [c, h, w] = input;
        let dims = conv_output_dim(h, kernel, stride, padding).zip(conv_output_dim(w, kernel, stride, padding));
        let (out_h, out_w) = dims.ok_or_else(|| {
            Error::ShapeMismatch(format!("{kernel}x{kernel} kernel (pad {padding}) does not fit a {h}x{w} input"))
        })?;
        Ok(Self { in_channels: c, in_h: h, in_w: w, out_channels, kernel, stride, padding, out_h, out_w })
    }

    /// Rows of the unfolded patch matrix (`in_channels * k * k`).
    pub fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// Unfolds zero-padded input patches: row `(c, ky, kx)`, column `(oy, ox)`.
pub fn im2col(input: &[f64], g: &ConvGeometry, cols: &mut [f64]) {
    let p = g.positions();
    let pad = g.padding as isize;
    for c in 0..g.in_channels {
        let plane = &input[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    let out_row = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - pad;
                        *o = if ix < 0 || ix >= g.in_w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
pub fn col2im(cols: &[f64], g: &ConvGeometry, input_grad: &mut [f64]) {
    let p = g.positions();
    let pad = g.padding as isize;
    for c in 0..g.in_channels {
        let plane = &mut input_grad[c * g.in_h * g.in_w..(c + 1) * g.in_h * g.in_w];
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kx) as isize - pad;
                        if ix >= 0 && ix < g.in_w as isize {
                            dst[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution forward on unfolded patches: `out = W cols + b`.
pub fn conv_forward_cols(cols: &[f64], weights: &[f64], bias: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let p = g.positions();
    let r = g.patch_len();
    let mut out = vec![0.0; g.out_channels * p];
    for (oc, row) in out.chunks_exact_mut(p).enumerate() {
        row.fill(bias[oc]);
    }
    gemm(g.out_channels, r, p, weights, (r, 1), cols, (p, 1), 1.0, &mut out);
    out
}

/// Accumulates weight/bias gradients and optionally returns the input gradient.
pub fn conv_backward_cols(
    cols: &[f64],
    weights: &[f64],
    out_grad: &[f64],
    g: &ConvGeometry,
    weight_grad: &mut [f64],
    bias_grad: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let p = g.positions();
    let r = g.patch_len();
    // dW += dOut (oc x p) * cols^T (p x r)
    gemm(g.out_channels, p, r, out_grad, (p, 1), cols, (1, p), 1.0, weight_grad);
    for (oc, row) in out_grad.chunks_exact(p).enumerate() {
        bias_grad[oc] += row.iter().sum::<f64>();
    }
    if !want_input_grad {
        return None;
    }
    // dCols = W^T (r x oc) * dOut (oc x p)
    let mut dcols = vec![0.0; r * p];
    gemm(r, g.out_channels, p, weights, (1, r), out_grad, (p, 1), 0.0, &mut dcols);
    let mut input_grad = vec![0.0; g.in_channels * g.in_h * g.in_w];
    col2im(&dcols, g, &mut input_grad);
    Some(input_grad)
}

/// Single-sample convolution of a `[C, H, W]` tensor with `[O, C, k, k]`
/// weights and `[O]` bias (cross-correlation, zero padding).
pub fn conv2d_forward(input: &Tensor, weights: &Tensor, bias: &Tensor, stride: usize, padding: usize) -> Result<Tensor> {
    let (&[c, h, w], &[o, wc, kh, kw]) = (input.shape(), weights.shape()) else {
        return Err(Error::ShapeMismatch(format!("conv2d expects CHW input and OCKK weights, got {:?} and {:?}", input.shape(), weights.shape())));
    };
    if wc != c || kh != kw || bias.shape() != [o] {
        return Err(Error::ShapeMismatch(format!("weights {:?} / bias {:?} incompatible with input {:?}", weights.shape(), bias.shape(), input.shape())));
    }
    let g = ConvGeometry::new([c, h, w], o, kh, stride, padding)?;
    let mut cols = vec![0.0; g.patch_len() * g.positions()];
    im2col(input.data(), &g, &mut cols);
    Tensor::new(vec![o, g.out_h, g.out_w], conv_forward_cols(&cols, weights.data(), bias.data(), &g))
}

/// Ceil-mode max pooling. Returns the output and, per output cell, the flat
/// input index of the (first) maximum.
pub fn maxpool_forward(input: &[f64], shape: [usize; 3], kernel: usize, stride: usize) -> (Vec<f64>, Vec<usize>, [usize; 3]) {
    let [c, h, w] = shape;
    let oh = pool_output_dim(h, kernel, stride);
    let ow = pool_output_dim(w, kernel, stride);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            let y0 = oy * stride;
            let y1 = (y0 + kernel).min(h);
            for ox in 0..ow {
                let x0 = ox * stride;
                let x1 = (x0 + kernel).min(w);
                let mut best = base + y0 * w + x0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let i = base + y * w + x;
                        if input[i] > input[best] {
                            best = i;
                        }
                    }
                }
                out.push(input[best]);
                argmax.push(best);
            }
        }
    }
    (out, argmax, [c, oh, ow])
}

/// Routes each output gradient to its argmax input position.
pub fn maxpool_backward(out_grad: &[f64], argmax: &[usize], input_len: usize) -> Vec<f64> {
    let mut grad = vec![0.0; input_len];
    for (&g, &i) in out_grad.iter().zip(argmax) {
        grad[i] += g;
    }
    grad
}

pub fn relu(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&x| x.max(0.0)).collect()
}

/// Gradient through ReLU given the layer's forward output.
pub fn relu_backward(output: &[f64], out_grad: &[f64]) -> Vec<f64> {
    output.iter().zip(out_grad).map(|(&y, &g)| if y > 0.0 { g } else { 0.0 }).collect()
}

/// `y = W x + b` with `W` stored `[units, inputs]`.
pub fn dense_forward(input: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = input.len();
    bias.iter()
        .enumerate()
        .map(|(u, &b)| b + weights[u * n..(u + 1) * n].iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
        .collect()
}

pub fn dense_backward(
    input: &[f64],
    weights: &[f64],
    out_grad: &[f64],
    weight_grad: &mut [f64],
    bias_grad: &mut [f64],
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let n = input.len();
    for (u, &g) in out_grad.iter().enumerate() {
        bias_grad[u] += g;
        if g != 0.0 {
            for (wg, &x) in weight_grad[u * n..(u + 1) * n].iter_mut().zip(input) {
                *wg += g * x;
            }
        }
    }
    want_input_grad.then(|| {
        let mut dx = vec![0.0; n];
        for (u, &g) in out_grad.iter().enumerate() {
            for (d, &w) in dx.iter_mut().zip(&weights[u * n..(u + 1) * n]) {
                *d += g * w;
            }
        }
        dx
    })
}

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of `probs` against `label`, floored to avoid `ln(0)`.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(f64::MIN_POSITIVE).ln()
}

/// Gradient of cross-entropy w.r.t. the logits: `p - onehot(label)`.
pub fn softmax_cross_entropy_grad(probs: &[f64], label: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}
