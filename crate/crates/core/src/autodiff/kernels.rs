//! Dense kernels shared by the forward and backward passes.
//!
//! Each output row is computed by one closure with a fixed summation order,
//! so row-parallel and sequential execution agree bit for bit.

use crate::par::{self, Parallelism, KERNEL_PAR_THRESHOLD};

fn pick(mode: Parallelism, work: usize) -> Parallelism {
    if work >= KERNEL_PAR_THRESHOLD {
        mode
    } else {
        Parallelism::Sequential
    }
}

/// `a (m×k) · b (k×n)`.
pub(crate) fn matmul(mode: Parallelism, a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    par::for_each_row(pick(mode, m * k * n), &mut out, n, |i, row| {
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &av) in a_row.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    out
}

/// `a (m×k) · bᵀ` where `b` is `n×k`.
pub(crate) fn matmul_nt(mode: Parallelism, a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    par::for_each_row(pick(mode, m * k * n), &mut out, n, |i, row| {
        let a_row = &a[i * k..(i + 1) * k];
        for (j, o) in row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (x, y) in a_row.iter().zip(b_row) {
                acc += x * y;
            }
            *o = acc;
        }
    });
    out
}

/// `aᵀ · b` where `a` is `k×m` and `b` is `k×n`.
pub(crate) fn matmul_tn(mode: Parallelism, a: &[f64], b: &[f64], k: usize, m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    par::for_each_row(pick(mode, m * k * n), &mut out, n, |i, row| {
        for p in 0..k {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(b_row) {
                *o += av * bv;
            }
        }
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn out_h(&self) -> usize {
        (self.height + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.width + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    fn input_at(&self, y: usize, ky: usize, x: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (y * self.stride + ky).checked_sub(self.padding)?;
        let ix = (x * self.stride + kx).checked_sub(self.padding)?;
        (iy < self.height && ix < self.width).then_some((iy, ix))
    }
}

pub(crate) fn conv2d_forward(
    mode: Parallelism,
    geo: &ConvGeometry,
    input: &[f64],
    kernel: &[f64],
    bias: Option<&[f64]>,
) -> Vec<f64> {
    let (oh, ow) = (geo.out_h(), geo.out_w());
    let plane = oh * ow;
    let mut out = vec![0.0; geo.batch * geo.out_channels * plane];
    let work = out.len() * geo.in_channels * geo.kernel_h * geo.kernel_w;
    let (c_in, h, w) = (geo.in_channels, geo.height, geo.width);
    let ksz = geo.kernel_h * geo.kernel_w;
    par::for_each_row(pick(mode, work), &mut out, plane, |row_idx, row| {
        let n = row_idx / geo.out_channels;
        let o = row_idx % geo.out_channels;
        let b = bias.map_or(0.0, |b| b[o]);
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = b;
                for c in 0..c_in {
                    let in_base = (n * c_in + c) * h * w;
                    let k_base = (o * c_in + c) * ksz;
                    for ky in 0..geo.kernel_h {
                        for kx in 0..geo.kernel_w {
                            if let Some((iy, ix)) = geo.input_at(y, ky, x, kx) {
                                acc += input[in_base + iy * w + ix]
                                    * kernel[k_base + ky * geo.kernel_w + kx];
                            }
                        }
                    }
                }
                row[y * ow + x] = acc;
            }
        }
    });
    out
}

/// Gradient with respect to the input, one sample per parallel row.
pub(crate) fn conv2d_grad_input(mode: Parallelism, geo: &ConvGeometry, grad_out: &[f64], kernel: &[f64]) -> Vec<f64> {
    let (oh, ow) = (geo.out_h(), geo.out_w());
    let (c_in, h, w) = (geo.in_channels, geo.height, geo.width);
    let ksz = geo.kernel_h * geo.kernel_w;
    let sample = c_in * h * w;
    let mut out = vec![0.0; geo.batch * sample];
    let work = grad_out.len() * c_in * ksz;
    par::for_each_row(pick(mode, work), &mut out, sample, |n, gin| {
        for o in 0..geo.out_channels {
            let g_base = (n * geo.out_channels + o) * oh * ow;
            for y in 0..oh {
                for x in 0..ow {
                    let g = grad_out[g_base + y * ow + x];
                    if g == 0.0 {
                        continue;
                    }
                    for c in 0..c_in {
                        let k_base = (o * c_in + c) * ksz;
                        for ky in 0..geo.kernel_h {
                            for kx in 0..geo.kernel_w {
                                if let Some((iy, ix)) = geo.input_at(y, ky, x, kx) {
                                    gin[c * h * w + iy * w + ix] +=
                                        g * kernel[k_base + ky * geo.kernel_w + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    out
}

/// Gradient with respect to the kernel, one output channel per parallel row.
pub(crate) fn conv2d_grad_kernel(mode: Parallelism, geo: &ConvGeometry, grad_out: &[f64], input: &[f64]) -> Vec<f64> {
    let (oh, ow) = (geo.out_h(), geo.out_w());
    let (c_in, h, w) = (geo.in_channels, geo.height, geo.width);
    let ksz = geo.kernel_h * geo.kernel_w;
    let row_len = c_in * ksz;
    let mut out = vec![0.0; geo.out_channels * row_len];
    let work = grad_out.len() * row_len;
    par::for_each_row(pick(mode, work), &mut out, row_len, |o, gk| {
        for n in 0..geo.batch {
            let g_base = (n * geo.out_channels + o) * oh * ow;
            for y in 0..oh {
                for x in 0..ow {
                    let g = grad_out[g_base + y * ow + x];
                    if g == 0.0 {
                        continue;
                    }
                    for c in 0..c_in {
                        let in_base = (n * c_in + c) * h * w;
                        for ky in 0..geo.kernel_h {
                            for kx in 0..geo.kernel_w {
                                if let Some((iy, ix)) = geo.input_at(y, ky, x, kx) {
                                    gk[c * ksz + ky * geo.kernel_w + kx] +=
                                        g * input[in_base + iy * w + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    out
}
