//! Forward and backward kernels. Activations are NCHW, row-major.
//!
//! Per-sample work runs under the caller's [`Exec`]; every reduction across
//! samples is summed in sample order so both policies give identical bits.

use crate::exec::{self, Exec};

use super::gemm::gemm;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Unfolds a `c × h × w` map into `(c·9) × (h·w)` patches for a padded 3×3 kernel.
pub fn im2col(x: &[f64], c: usize, h: usize, w: usize, cols: &mut [f64]) {
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[(ci * 9 + ky * 3 + kx) * hw..(ci * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let out = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        out.fill(0.0);
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            out[0] = 0.0;
                            out[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => out.copy_from_slice(src),
                        _ => {
                            out[..w - 1].copy_from_slice(&src[1..]);
                            out[w - 1] = 0.0;
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patch gradients back onto the map.
pub fn col2im(cols: &[f64], c: usize, h: usize, w: usize, dx: &mut [f64]) {
    let hw = h * w;
    dx.fill(0.0);
    for ci in 0..c {
        let plane = &mut dx[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[(ci * 9 + ky * 3 + kx) * hw..(ci * 9 + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, s)| *d += s),
                        1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                        _ => dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, s)| *d += s),
                    }
                }
            }
        }
    }
}

pub struct ConvDims {
    pub in_c: usize,
    pub out_c: usize,
    pub h: usize,
    pub w: usize,
}

pub fn conv_forward(
    exec: Exec,
    d: &ConvDims,
    weight: &[f64],
    bias: Option<&[f64]>,
    x: &[f64],
    n: usize,
) -> Vec<f64> {
    let hw = d.h * d.w;
    let (in_len, out_len) = (d.in_c * hw, d.out_c * hw);
    let mut y = vec![0.0; n * out_len];
    exec::for_each_chunk_mut(exec, &mut y, out_len, |s, out| {
        let mut cols = vec![0.0; d.in_c * 9 * hw];
        im2col(&x[s * in_len..(s + 1) * in_len], d.in_c, d.h, d.w, &mut cols);
        gemm(d.out_c, d.in_c * 9, hw, weight, false, &cols, false, out, 0.0);
        if let Some(b) = bias {
            for (o, row) in out.chunks_mut(hw).enumerate() {
                row.iter_mut().for_each(|v| *v += b[o]);
            }
        }
    });
    y
}

pub struct ConvGrads {
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
    pub input: Option<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn conv_backward(
    exec: Exec,
    d: &ConvDims,
    weight: &[f64],
    has_bias: bool,
    x: &[f64],
    dy: &[f64],
    n: usize,
    need_input_grad: bool,
) -> ConvGrads {
    let hw = d.h * d.w;
    let (in_len, out_len) = (d.in_c * hw, d.out_c * hw);
    let k = d.in_c * 9;
    let samples: Vec<usize> = (0..n).collect();
    let per_sample = exec::map(exec, &samples, |&s| {
        let mut cols = vec![0.0; k * hw];
        im2col(&x[s * in_len..(s + 1) * in_len], d.in_c, d.h, d.w, &mut cols);
        let dys = &dy[s * out_len..(s + 1) * out_len];
        let mut dw = vec![0.0; d.out_c * k];
        gemm(d.out_c, hw, k, dys, false, &cols, true, &mut dw, 0.0);
        let db: Vec<f64> = if has_bias {
            dys.chunks(hw).map(|r| r.iter().sum()).collect()
        } else {
            Vec::new()
        };
        let dx = need_input_grad.then(|| {
            gemm(k, d.out_c, hw, weight, true, dys, false, &mut cols, 0.0);
            let mut dx = vec![0.0; in_len];
            col2im(&cols, d.in_c, d.h, d.w, &mut dx);
            dx
        });
        (dw, db, dx)
    });
    let mut weight_grad = vec![0.0; d.out_c * k];
    let mut bias_grad = vec![0.0; if has_bias { d.out_c } else { 0 }];
    let mut input_grad = need_input_grad.then(|| Vec::with_capacity(n * in_len));
    for (dw, db, dx) in per_sample {
        weight_grad.iter_mut().zip(&dw).for_each(|(a, b)| *a += b);
        bias_grad.iter_mut().zip(&db).for_each(|(a, b)| *a += b);
        if let (Some(acc), Some(dx)) = (input_grad.as_mut(), dx) {
            acc.extend_from_slice(&dx);
        }
    }
    ConvGrads {
        weight: weight_grad,
        bias: has_bias.then_some(bias_grad),
        input: input_grad,
    }
}

/// Per-channel mean and biased variance over samples and positions.
pub fn channel_stats(exec: Exec, x: &[f64], n: usize, c: usize, hw: usize) -> Vec<(f64, f64)> {
    let channels: Vec<usize> = (0..c).collect();
    let count = (n * hw) as f64;
    exec::map(exec, &channels, |&ch| {
        let mut sum = 0.0;
        for s in 0..n {
            sum += x[(s * c + ch) * hw..(s * c + ch + 1) * hw].iter().sum::<f64>();
        }
        let mean = sum / count;
        let mut sq = 0.0;
        for s in 0..n {
            sq += x[(s * c + ch) * hw..(s * c + ch + 1) * hw]
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>();
        }
        (mean, sq / count)
    })
}

/// Applies `y = gamma * (x - mean) * inv_std + beta` per channel; also returns
/// the normalized values.
#[allow(clippy::too_many_arguments)]
pub fn bn_apply(
    exec: Exec,
    x: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    beta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let len = c * hw;
    let mut xhat = vec![0.0; n * len];
    let mut y = vec![0.0; n * len];
    let fill = |s: usize, xh: &mut [f64], out: &mut [f64]| {
        for ch in 0..c {
            let src = &x[s * len + ch * hw..s * len + (ch + 1) * hw];
            let r = ch * hw..(ch + 1) * hw;
            let (m, k, g, b) = (mean[ch], inv_std[ch], gamma[ch], beta[ch]);
            for ((h, o), v) in xh[r.clone()].iter_mut().zip(&mut out[r]).zip(src) {
                *h = (v - m) * k;
                *o = g * *h + b;
            }
        }
    };
    let mut pairs: Vec<(&mut [f64], &mut [f64])> = xhat.chunks_mut(len).zip(y.chunks_mut(len)).collect();
    exec::for_each_chunk_mut(exec, &mut pairs, 1, |s, p| {
        let (xh, out) = &mut p[0];
        fill(s, xh, out);
    });
    (y, xhat)
}

pub struct BnGrads {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub input: Vec<f64>,
}

/// Backward through batch normalization. With `batch_stats` the statistics
/// were computed from this batch and their dependence on the input is
/// included; otherwise they are constants (running statistics).
#[allow(clippy::too_many_arguments)]
pub fn bn_backward(
    exec: Exec,
    dy: &[f64],
    xhat: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    gamma: &[f64],
    inv_std: &[f64],
    batch_stats: bool,
) -> BnGrads {
    let len = c * hw;
    let channels: Vec<usize> = (0..c).collect();
    let sums = exec::map(exec, &channels, |&ch| {
        let (mut sdy, mut sdyx) = (0.0, 0.0);
        for s in 0..n {
            let r = (s * c + ch) * hw..(s * c + ch + 1) * hw;
            for (g, xh) in dy[r.clone()].iter().zip(&xhat[r]) {
                sdy += g;
                sdyx += g * xh;
            }
        }
        (sdy, sdyx)
    });
    let m = (n * hw) as f64;
    let mut dx = vec![0.0; n * len];
    exec::for_each_chunk_mut(exec, &mut dx, len, |s, out| {
        for ch in 0..c {
            let r = s * len + ch * hw..s * len + (ch + 1) * hw;
            let scale = gamma[ch] * inv_std[ch];
            let (sdy, sdyx) = sums[ch];
            let o = &mut out[ch * hw..(ch + 1) * hw];
            if batch_stats {
                for ((d, g), xh) in o.iter_mut().zip(&dy[r.clone()]).zip(&xhat[r]) {
                    *d = scale * (g - sdy / m - xh * sdyx / m);
                }
            } else {
                for (d, g) in o.iter_mut().zip(&dy[r]) {
                    *d = scale * g;
                }
            }
        }
    });
    BnGrads {
        gamma: sums.iter().map(|s| s.1).collect(),
        beta: sums.iter().map(|s| s.0).collect(),
        input: dx,
    }
}

/// 2×2 stride-2 max pooling; returns outputs and the flat input index of each maximum.
pub fn maxpool_forward(x: &[f64], n: usize, c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<u32>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(n * c * oh * ow);
    let mut arg = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            let r0 = base + 2 * oy * w;
            let (top, bottom) = (&x[r0..r0 + w], &x[r0 + w..r0 + 2 * w]);
            for ox in 0..ow {
                let (i, j) = (2 * ox, 2 * ox + 1);
                let mut best = (top[i], r0 + i);
                for (v, idx) in [(top[j], r0 + j), (bottom[i], r0 + w + i), (bottom[j], r0 + w + j)] {
                    if v > best.0 {
                        best = (v, idx);
                    }
                }
                y.push(best.0);
                arg.push(best.1 as u32);
            }
        }
    }
    (y, arg)
}

pub fn maxpool_backward(dy: &[f64], arg: &[u32], input_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (g, &i) in dy.iter().zip(arg) {
        dx[i as usize] += g;
    }
    dx
}

/// `y = x · Wᵀ + b` for `x` of shape `n × in_f`.
pub fn linear_forward(weight: &[f64], bias: &[f64], x: &[f64], n: usize, in_f: usize, out_f: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * out_f];
    for row in y.chunks_mut(out_f) {
        row.copy_from_slice(bias);
    }
    gemm(n, in_f, out_f, x, false, weight, true, &mut y, 1.0);
    y
}

pub struct LinearGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Option<Vec<f64>>,
}

pub fn linear_backward(
    weight: &[f64],
    x: &[f64],
    dy: &[f64],
    n: usize,
    in_f: usize,
    out_f: usize,
    need_input_grad: bool,
) -> LinearGrads {
    let mut dw = vec![0.0; out_f * in_f];
    gemm(out_f, n, in_f, dy, true, x, false, &mut dw, 0.0);
    let mut db = vec![0.0; out_f];
    for row in dy.chunks(out_f) {
        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let dx = need_input_grad.then(|| {
        let mut dx = vec![0.0; n * in_f];
        gemm(n, out_f, in_f, dy, false, weight, false, &mut dx, 0.0);
        dx
    });
    LinearGrads {
        weight: dw,
        bias: db,
        input: dx,
    }
}

/// Mean softmax cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy(logits: &[f64], labels: &[usize], k: usize) -> (f64, Vec<f64>) {
    let n = labels.len();
    let mut grad = vec![0.0; n * k];
    let mut total = 0.0;
    for (s, &label) in labels.iter().enumerate() {
        let z = &logits[s * k..(s + 1) * k];
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - z[label];
        let g = &mut grad[s * k..(s + 1) * k];
        for (j, gv) in g.iter_mut().enumerate() {
            let p = (z[j] - lse).exp();
            *gv = (p - if j == label { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (total / n as f64, grad)
}
