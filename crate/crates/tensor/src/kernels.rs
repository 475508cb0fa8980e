//! Slice-level forward/backward kernels behind the tape operations.
//!
//! Layout is NCHW throughout. Dense convolution is lowered to GEMM through an
//! im2col buffer; depthwise convolution and pooling run direct loops.

use crate::Float;

/// Geometry of a 2-D convolution or pooling window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Geom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Geom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.kh) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.kw) / self.stride + 1
    }

    /// True when the window fits at least once.
    pub fn valid(&self) -> bool {
        self.stride > 0 && self.h + 2 * self.pad >= self.kh && self.w + 2 * self.pad >= self.kw
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }

    /// Output index range `[lo, hi)` along one axis for kernel offset `k`
    /// such that the input coordinate `o*stride + k - pad` is inside `0..len`.
    fn out_range(len: usize, out: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
        // o*stride + k >= pad
        let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
        // o*stride + k - pad <= len - 1
        let hi = if len + pad > k {
            ((len + pad - k - 1) / stride + 1).min(out)
        } else {
            0
        };
        (lo.min(hi), hi)
    }
}

fn im2col<T: Float>(x: &[T], g: &Geom, cols: &mut [T]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    cols.iter_mut().for_each(|v| *v = T::zero());
    for c in 0..g.c {
        let xc = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            let (oy_lo, oy_hi) = Geom::out_range(g.h, ho, i, g.stride, g.pad);
            for j in 0..g.kw {
                let (ox_lo, ox_hi) = Geom::out_range(g.w, wo, j, g.stride, g.pad);
                let row = &mut cols[((c * g.kh + i) * g.kw + j) * plane..][..plane];
                for oy in oy_lo..oy_hi {
                    let iy = oy * g.stride + i - g.pad;
                    let src = &xc[iy * g.w..(iy + 1) * g.w];
                    let dst = &mut row[oy * wo..(oy + 1) * wo];
                    for ox in ox_lo..ox_hi {
                        dst[ox] = src[ox * g.stride + j - g.pad];
                    }
                }
            }
        }
    }
}

fn col2im_add<T: Float>(cols: &[T], g: &Geom, dx: &mut [T]) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    for c in 0..g.c {
        let dxc = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            let (oy_lo, oy_hi) = Geom::out_range(g.h, ho, i, g.stride, g.pad);
            for j in 0..g.kw {
                let (ox_lo, ox_hi) = Geom::out_range(g.w, wo, j, g.stride, g.pad);
                let row = &cols[((c * g.kh + i) * g.kw + j) * plane..][..plane];
                for oy in oy_lo..oy_hi {
                    let iy = oy * g.stride + i - g.pad;
                    let src = &row[oy * wo..(oy + 1) * wo];
                    let dst = &mut dxc[iy * g.w..(iy + 1) * g.w];
                    for ox in ox_lo..ox_hi {
                        dst[ox * g.stride + j - g.pad] += src[ox];
                    }
                }
            }
        }
    }
}

/// Dense cross-correlation. `w` has shape `[k, g.c, g.kh, g.kw]`.
pub fn conv2d_forward<T: Float>(x: &[T], w: &[T], k: usize, g: &Geom) -> Vec<T> {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    let ckk = g.c * g.kh * g.kw;
    let mut out = vec![T::zero(); g.n * k * plane];
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); ckk * plane]
    };
    for n in 0..g.n {
        let xn = &x[n * g.c * g.h * g.w..(n + 1) * g.c * g.h * g.w];
        let b: &[T] = if g.is_pointwise() {
            xn
        } else {
            im2col(xn, g, &mut cols);
            &cols
        };
        let on = &mut out[n * k * plane..(n + 1) * k * plane];
        T::gemm(
            k,
            ckk,
            plane,
            T::one(),
            w,
            ckk as isize,
            1,
            b,
            plane as isize,
            1,
            T::zero(),
            on,
            plane as isize,
            1,
        );
    }
    out
}

/// Gradients of [`conv2d_forward`] w.r.t. input and kernel.
pub fn conv2d_backward<T: Float>(
    x: &[T],
    w: &[T],
    k: usize,
    g: &Geom,
    gout: &[T],
    need_dx: bool,
    need_dw: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let plane = ho * wo;
    let ckk = g.c * g.kh * g.kw;
    let in_len = g.c * g.h * g.w;
    let mut dx = need_dx.then(|| vec![T::zero(); g.n * in_len]);
    let mut dw = need_dw.then(|| vec![T::zero(); k * ckk]);
    let mut cols = vec![T::zero(); if g.is_pointwise() { 0 } else { ckk * plane }];
    let mut dcols = vec![T::zero(); if need_dx && !g.is_pointwise() { ckk * plane } else { 0 }];
    for n in 0..g.n {
        let xn = &x[n * in_len..(n + 1) * in_len];
        let gn = &gout[n * k * plane..(n + 1) * k * plane];
        if let Some(dw) = dw.as_mut() {
            let b: &[T] = if g.is_pointwise() {
                xn
            } else {
                im2col(xn, g, &mut cols);
                &cols
            };
            T::gemm(
                k,
                plane,
                ckk,
                T::one(),
                gn,
                plane as isize,
                1,
                b,
                1,
                plane as isize,
                T::one(),
                dw,
                ckk as isize,
                1,
            );
        }
        if let Some(dx) = dx.as_mut() {
            let dxn = &mut dx[n * in_len..(n + 1) * in_len];
            if g.is_pointwise() {
                T::gemm(
                    ckk,
                    k,
                    plane,
                    T::one(),
                    w,
                    1,
                    ckk as isize,
                    gn,
                    plane as isize,
                    1,
                    T::one(),
                    dxn,
                    plane as isize,
                    1,
                );
            } else {
                T::gemm(
                    ckk,
                    k,
                    plane,
                    T::one(),
                    w,
                    1,
                    ckk as isize,
                    gn,
                    plane as isize,
                    1,
                    T::zero(),
                    &mut dcols,
                    plane as isize,
                    1,
                );
                col2im_add(&dcols, g, dxn);
            }
        }
    }
    (dx, dw)
}

/// Per-channel cross-correlation. `w` has shape `[g.c, 1, g.kh, g.kw]`.
pub fn depthwise_forward<T: Float>(x: &[T], w: &[T], g: &Geom) -> Vec<T> {
    let (ho, wo) = (g.out_h(), g.out_w());
    let mut out = vec![T::zero(); g.n * g.c * ho * wo];
    for n in 0..g.n {
        for c in 0..g.c {
            let xc = &x[(n * g.c + c) * g.h * g.w..][..g.h * g.w];
            let oc = &mut out[(n * g.c + c) * ho * wo..][..ho * wo];
            let wc = &w[c * g.kh * g.kw..(c + 1) * g.kh * g.kw];
            for i in 0..g.kh {
                let (oy_lo, oy_hi) = Geom::out_range(g.h, ho, i, g.stride, g.pad);
                for j in 0..g.kw {
                    let (ox_lo, ox_hi) = Geom::out_range(g.w, wo, j, g.stride, g.pad);
                    let wv = wc[i * g.kw + j];
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + i - g.pad;
                        let src = &xc[iy * g.w..(iy + 1) * g.w];
                        let dst = &mut oc[oy * wo..(oy + 1) * wo];
                        if g.stride == 1 {
                            let off = j as isize - g.pad as isize;
                            let s = &src[(ox_lo as isize + off) as usize..(ox_hi as isize + off) as usize];
                            for (d, &v) in dst[ox_lo..ox_hi].iter_mut().zip(s) {
                                *d += wv * v;
                            }
                        } else {
                            for ox in ox_lo..ox_hi {
                                dst[ox] += wv * src[ox * g.stride + j - g.pad];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn depthwise_backward<T: Float>(
    x: &[T],
    w: &[T],
    g: &Geom,
    gout: &[T],
    need_dx: bool,
    need_dw: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let mut dx = need_dx.then(|| vec![T::zero(); x.len()]);
    let mut dw = need_dw.then(|| vec![T::zero(); w.len()]);
    for n in 0..g.n {
        for c in 0..g.c {
            let base_in = (n * g.c + c) * g.h * g.w;
            let xc = &x[base_in..base_in + g.h * g.w];
            let gc = &gout[(n * g.c + c) * ho * wo..][..ho * wo];
            for i in 0..g.kh {
                let (oy_lo, oy_hi) = Geom::out_range(g.h, ho, i, g.stride, g.pad);
                for j in 0..g.kw {
                    let (ox_lo, ox_hi) = Geom::out_range(g.w, wo, j, g.stride, g.pad);
                    let widx = (c * g.kh + i) * g.kw + j;
                    let wv = w[widx];
                    let mut acc = T::zero();
                    for oy in oy_lo..oy_hi {
                        let iy = oy * g.stride + i - g.pad;
                        let grow = &gc[oy * wo..(oy + 1) * wo];
                        for ox in ox_lo..ox_hi {
                            let ix = iy * g.w + ox * g.stride + j - g.pad;
                            let gv = grow[ox];
                            if need_dw {
                                acc += gv * xc[ix];
                            }
                            if let Some(dx) = dx.as_mut() {
                                dx[base_in + ix] += wv * gv;
                            }
                        }
                    }
                    if let Some(dw) = dw.as_mut() {
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw)
}

/// Max pooling; padded positions never win. Returns values and the winning
/// flat input index (within its `n, c` plane) for each output.
pub fn max_pool_forward<T: Float>(x: &[T], g: &Geom) -> (Vec<T>, Vec<usize>) {
    let (ho, wo) = (g.out_h(), g.out_w());
    let mut out = vec![T::zero(); g.n * g.c * ho * wo];
    let mut arg = vec![0usize; out.len()];
    for p in 0..g.n * g.c {
        let xp = &x[p * g.h * g.w..(p + 1) * g.h * g.w];
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = T::neg_infinity();
                let mut best_i = usize::MAX;
                for i in 0..g.kh {
                    let iy = (oy * g.stride + i) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    for j in 0..g.kw {
                        let ix = (ox * g.stride + j) as isize - g.pad as isize;
                        if ix < 0 || ix >= g.w as isize {
                            continue;
                        }
                        let idx = iy as usize * g.w + ix as usize;
                        if xp[idx] > best || best_i == usize::MAX {
                            best = xp[idx];
                            best_i = idx;
                        }
                    }
                }
                let o = p * ho * wo + oy * wo + ox;
                out[o] = best;
                arg[o] = best_i;
            }
        }
    }
    (out, arg)
}

pub fn max_pool_backward<T: Float>(arg: &[usize], g: &Geom, gout: &[T]) -> Vec<T> {
    let (ho, wo) = (g.out_h(), g.out_w());
    let mut dx = vec![T::zero(); g.n * g.c * g.h * g.w];
    for p in 0..g.n * g.c {
        for o in 0..ho * wo {
            let idx = p * ho * wo + o;
            dx[p * g.h * g.w + arg[idx]] += gout[idx];
        }
    }
    dx
}
