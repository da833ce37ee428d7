//! Forward and backward kernels for the graph primitives.
//!
//! Plain functions over [`Tensor`] values; the graph in `graph.rs` decides
//! when to call them. Loop order keeps the innermost iteration contiguous so
//! the compiler can vectorize.

use super::Tensor;

/// Temporal padding policy for 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadMode {
    /// No padding; output length floor((T - w)/stride) + 1.
    Valid,
    /// Symmetric zero padding of w - stride total, so output length is
    /// exactly T/stride whenever T divides by the stride.
    SameStride,
}

impl PadMode {
    pub fn amounts(self, width: usize, stride: usize) -> (usize, usize) {
        match self {
            PadMode::Valid => (0, 0),
            PadMode::SameStride => {
                let total = width.saturating_sub(stride);
                (total / 2, total - total / 2)
            }
        }
    }
}

/// Output length of a 1-D convolution, if the input is long enough.
pub fn conv1d_out_len(t_in: usize, width: usize, stride: usize, pad: (usize, usize)) -> Option<usize> {
    let padded = t_in + pad.0 + pad.1;
    if padded < width {
        None
    } else {
        Some((padded - width) / stride + 1)
    }
}

/// `C[m,n] = A[m,k] · B[k,n]`
pub fn mm(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.dim(0), a.dim(1));
    let n = b.dim(1);
    debug_assert_eq!(k, b.dim(0));
    let (ad, bd) = (a.data(), b.data());
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let crow = &mut c[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], c).expect("mm shape")
}

/// `C[m,n] = A[m,k] · B[n,k]ᵀ`
pub fn mm_nt(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.dim(0), a.dim(1));
    let n = b.dim(0);
    debug_assert_eq!(k, b.dim(1));
    let (ad, bd) = (a.data(), b.data());
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &bd[j * k..(j + 1) * k];
            c[i * n + j] = arow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
        }
    }
    Tensor::new(vec![m, n], c).expect("mm_nt shape")
}

/// `C[k,n] = A[m,k]ᵀ · B[m,n]`
pub fn mm_tn(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = (a.dim(0), a.dim(1));
    let n = b.dim(1);
    debug_assert_eq!(m, b.dim(0));
    let (ad, bd) = (a.data(), b.data());
    let mut c = vec![0.0; k * n];
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let brow = &bd[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for (cv, &bv) in crow.iter_mut().zip(brow) {
                *cv += av * bv;
            }
        }
    }
    Tensor::new(vec![k, n], c).expect("mm_tn shape")
}

/// Cross-correlation along the time axis. x: [T, c_in], kernel: [w, c_in, c_out].
pub fn conv1d_forward(x: &Tensor, kernel: &Tensor, stride: usize, pad: (usize, usize)) -> Tensor {
    let (t_in, ci) = (x.dim(0), x.dim(1));
    let (w, co) = (kernel.dim(0), kernel.dim(2));
    let t_out = conv1d_out_len(t_in, w, stride, pad).expect("checked by caller");
    let (xd, kd) = (x.data(), kernel.data());
    let mut out = vec![0.0; t_out * co];
    for t in 0..t_out {
        let orow = &mut out[t * co..(t + 1) * co];
        for j in 0..w {
            let tin = (t * stride + j) as isize - pad.0 as isize;
            if tin < 0 || tin >= t_in as isize {
                continue;
            }
            let xrow = &xd[tin as usize * ci..(tin as usize + 1) * ci];
            let kbase = j * ci * co;
            for (i, &xv) in xrow.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let krow = &kd[kbase + i * co..kbase + (i + 1) * co];
                for (ov, &kv) in orow.iter_mut().zip(krow) {
                    *ov += xv * kv;
                }
            }
        }
    }
    Tensor::new(vec![t_out, co], out).expect("conv1d shape")
}

/// Gradients of conv1d w.r.t. input and kernel.
pub fn conv1d_backward(
    x: &Tensor,
    kernel: &Tensor,
    stride: usize,
    pad: (usize, usize),
    gout: &Tensor,
) -> (Tensor, Tensor) {
    let (t_in, ci) = (x.dim(0), x.dim(1));
    let (w, co) = (kernel.dim(0), kernel.dim(2));
    let t_out = gout.dim(0);
    let (xd, kd, gd) = (x.data(), kernel.data(), gout.data());
    let mut dx = vec![0.0; t_in * ci];
    let mut dk = vec![0.0; w * ci * co];
    for t in 0..t_out {
        let grow = &gd[t * co..(t + 1) * co];
        for j in 0..w {
            let tin = (t * stride + j) as isize - pad.0 as isize;
            if tin < 0 || tin >= t_in as isize {
                continue;
            }
            let tin = tin as usize;
            let xrow = &xd[tin * ci..(tin + 1) * ci];
            let dxrow = &mut dx[tin * ci..(tin + 1) * ci];
            let kbase = j * ci * co;
            for i in 0..ci {
                let krow = &kd[kbase + i * co..kbase + (i + 1) * co];
                let dkrow = &mut dk[kbase + i * co..kbase + (i + 1) * co];
                let xv = xrow[i];
                let mut acc = 0.0;
                for ((&g, &kv), dkv) in grow.iter().zip(krow).zip(dkrow.iter_mut()) {
                    acc += g * kv;
                    *dkv += xv * g;
                }
                dxrow[i] += acc;
            }
        }
    }
    (
        Tensor::new(vec![t_in, ci], dx).expect("dx shape"),
        Tensor::new(vec![w, ci, co], dk).expect("dk shape"),
    )
}

/// Repeat each time step `factor` times. x: [T, c] -> [T*factor, c].
pub fn upsample_forward(x: &Tensor, factor: usize) -> Tensor {
    let (t, c) = (x.dim(0), x.dim(1));
    let xd = x.data();
    let mut out = Vec::with_capacity(t * factor * c);
    for row in 0..t {
        let xrow = &xd[row * c..(row + 1) * c];
        for _ in 0..factor {
            out.extend_from_slice(xrow);
        }
    }
    Tensor::new(vec![t * factor, c], out).expect("upsample shape")
}

pub fn upsample_backward(gout: &Tensor, factor: usize) -> Tensor {
    let (tf, c) = (gout.dim(0), gout.dim(1));
    let t = tf / factor;
    let gd = gout.data();
    let mut dx = vec![0.0; t * c];
    for row in 0..tf {
        let src = &gd[row * c..(row + 1) * c];
        let dst = &mut dx[(row / factor) * c..(row / factor + 1) * c];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
    Tensor::new(vec![t, c], dx).expect("upsample grad shape")
}

/// Row-wise softmax with an optional visibility mask (true = key visible).
/// A fully masked row yields all zeros instead of NaN.
pub fn masked_softmax_forward(x: &Tensor, mask: Option<&[bool]>) -> Tensor {
    let (r, c) = (x.dim(0), x.dim(1));
    let xd = x.data();
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = &xd[i * c..(i + 1) * c];
        let orow = &mut out[i * c..(i + 1) * c];
        let visible = |j: usize| mask.is_none_or(|m| m[i * c + j]);
        let mut max = f64::NEG_INFINITY;
        for (j, &v) in row.iter().enumerate() {
            if visible(j) && v > max {
                max = v;
            }
        }
        if max == f64::NEG_INFINITY {
            continue; // fully masked row stays zero
        }
        let mut sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            if visible(j) {
                let e = (v - max).exp();
                orow[j] = e;
                sum += e;
            }
        }
        for o in orow.iter_mut() {
            *o /= sum;
        }
    }
    Tensor::new(vec![r, c], out).expect("softmax shape")
}

/// dx = y ⊙ (dy − ⟨y, dy⟩) per row, where y is the stored softmax output.
pub fn masked_softmax_backward(y: &Tensor, gout: &Tensor) -> Tensor {
    let (r, c) = (y.dim(0), y.dim(1));
    let (yd, gd) = (y.data(), gout.data());
    let mut dx = vec![0.0; r * c];
    for i in 0..r {
        let yrow = &yd[i * c..(i + 1) * c];
        let grow = &gd[i * c..(i + 1) * c];
        let dot: f64 = yrow.iter().zip(grow).map(|(&a, &b)| a * b).sum();
        let drow = &mut dx[i * c..(i + 1) * c];
        for ((d, &yv), &gv) in drow.iter_mut().zip(yrow).zip(grow) {
            *d = yv * (gv - dot);
        }
    }
    Tensor::new(vec![r, c], dx).expect("softmax grad shape")
}

/// Mean over rows of −log softmax(logits)[target], log-sum-exp stabilized.
pub fn softmax_xent_forward(logits: &Tensor, targets: &[usize]) -> f64 {
    let (m, c) = (logits.dim(0), logits.dim(1));
    debug_assert_eq!(m, targets.len());
    let ld = logits.data();
    let mut total = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = &ld[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[t];
    }
    total / m as f64
}

/// dlogits = (softmax − one_hot) · gout / m
pub fn softmax_xent_backward(logits: &Tensor, targets: &[usize], gout: f64) -> Tensor {
    let (m, c) = (logits.dim(0), logits.dim(1));
    let ld = logits.data();
    let mut dx = vec![0.0; m * c];
    let scale = gout / m as f64;
    for (i, &t) in targets.iter().enumerate() {
        let row = &ld[i * c..(i + 1) * c];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let drow = &mut dx[i * c..(i + 1) * c];
        for (j, (d, &v)) in drow.iter_mut().zip(row).enumerate() {
            let p = (v - max).exp() / sum;
            *d = (p - if j == t { 1.0 } else { 0.0 }) * scale;
        }
    }
    Tensor::new(vec![m, c], dx).expect("xent grad shape")
}

/// Row-wise layer normalization with learnable gain and bias.
pub fn layer_norm_forward(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Tensor {
    let (r, c) = (x.dim(0), x.dim(1));
    let (xd, gd, bd) = (x.data(), gain.data(), bias.data());
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = &xd[i * c..(i + 1) * c];
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + eps).sqrt();
        let orow = &mut out[i * c..(i + 1) * c];
        for (j, (o, &v)) in orow.iter_mut().zip(row).enumerate() {
            *o = (v - mean) * inv * gd[j] + bd[j];
        }
    }
    Tensor::new(vec![r, c], out).expect("layer_norm shape")
}

/// Gradients of layer norm w.r.t. (x, gain, bias).
pub fn layer_norm_backward(
    x: &Tensor,
    gain: &Tensor,
    eps: f64,
    gout: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (r, c) = (x.dim(0), x.dim(1));
    let (xd, gd, od) = (x.data(), gain.data(), gout.data());
    let mut dx = vec![0.0; r * c];
    let mut dgain = vec![0.0; c];
    let mut dbias = vec![0.0; c];
    for i in 0..r {
        let row = &xd[i * c..(i + 1) * c];
        let grow = &od[i * c..(i + 1) * c];
        let mean = row.iter().sum::<f64>() / c as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + eps).sqrt();
        // xhat and the two row means the dx formula needs
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        let mut xhat = vec![0.0; c];
        let mut dxhat = vec![0.0; c];
        for j in 0..c {
            xhat[j] = (row[j] - mean) * inv;
            dxhat[j] = grow[j] * gd[j];
            dgain[j] += grow[j] * xhat[j];
            dbias[j] += grow[j];
            mean_dxhat += dxhat[j];
            mean_dxhat_xhat += dxhat[j] * xhat[j];
        }
        mean_dxhat /= c as f64;
        mean_dxhat_xhat /= c as f64;
        let drow = &mut dx[i * c..(i + 1) * c];
        for j in 0..c {
            drow[j] = inv * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
        }
    }
    (
        Tensor::new(vec![r, c], dx).expect("dx shape"),
        Tensor::new(vec![c], dgain).expect("dgain shape"),
        Tensor::new(vec![c], dbias).expect("dbias shape"),
    )
}
