//! Differentiable operations recorded on a [`Tape`].

use crate::error::{invalid, shape_err, Result};
use crate::kernels::{self, Geom};
use crate::tape::{Op, Tape, Var};
use crate::{Float, Tensor};

/// Running statistics of one batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
}

impl<T: Float> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::lit(0.1),
            eps: T::lit(1e-5),
        }
    }
}

fn nchw(op: &'static str, shape: &[usize]) -> Result<[usize; 4]> {
    match shape {
        &[n, c, h, w] => Ok([n, c, h, w]),
        _ => shape_err(op, format!("expected NCHW, got {shape:?}")),
    }
}

#[inline]
fn sigmoid<T: Float>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

#[inline]
fn softplus<T: Float>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// `thr_t(x)` together with its partial derivatives in `x` and `t`.
#[inline]
pub(crate) fn soft_threshold_parts<T: Float>(x: T, t: T) -> (T, T, T) {
    let ten = T::lit(10.0);
    let z = ten * (x - t) / t;
    let s = sigmoid(z);
    let h = softplus(z) + ten * s;
    let dh = s + ten * s * (T::one() - s);
    let y = t / ten * h;
    (y, dh, h / ten - dh * x / t)
}

/// Scalar evaluation of the smooth threshold used by [`Tape::soft_threshold`].
pub fn soft_threshold_value<T: Float>(x: T, t: T) -> T {
    soft_threshold_parts(x, t).0
}

impl<T: Float> Tape<T> {
    fn binary_same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn geom(&self, op: &'static str, x: Var, kh: usize, kw: usize, stride: usize, pad: usize) -> Result<Geom> {
        let [n, c, h, w] = nchw(op, self.shape(x))?;
        let g = Geom { n, c, h, w, kh, kw, stride, pad };
        if !g.valid() {
            return invalid(op, format!("window {kh}x{kw} stride {stride} pad {pad} does not fit {h}x{w}"));
        }
        Ok(g)
    }

    /// Cross-correlation of `x: [N,C,H,W]` with `kernel: [K,C,kh,kw]`, zero padding.
    pub fn conv2d(&mut self, x: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
        let [k, kc, kh, kw] = nchw("conv2d", self.shape(kernel))?;
        let g = self.geom("conv2d", x, kh, kw, stride, padding)?;
        if kc != g.c {
            return shape_err("conv2d", format!("input has {} channels, kernel expects {kc}", g.c));
        }
        let out = kernels::conv2d_forward(self.value(x).data(), self.value(kernel).data(), k, &g);
        let value = Tensor::from_vec(vec![g.n, k, g.out_h(), g.out_w()], out)?;
        let rg = self.rg(&[x.0, kernel.0]);
        Ok(self.push(value, Op::Conv2d { x: x.0, w: kernel.0, k, geom: g }, rg))
    }

    /// Per-channel convolution with `kernel: [C,1,kh,kw]`.
    pub fn depthwise_conv2d(&mut self, x: Var, kernel: Var, stride: usize, padding: usize) -> Result<Var> {
        let [kc, one, kh, kw] = nchw("depthwise_conv2d", self.shape(kernel))?;
        let g = self.geom("depthwise_conv2d", x, kh, kw, stride, padding)?;
        if kc != g.c || one != 1 {
            return shape_err(
                "depthwise_conv2d",
                format!("input has {} channels, kernel is {:?}", g.c, self.shape(kernel)),
            );
        }
        let out = kernels::depthwise_forward(self.value(x).data(), self.value(kernel).data(), &g);
        let value = Tensor::from_vec(vec![g.n, g.c, g.out_h(), g.out_w()], out)?;
        let rg = self.rg(&[x.0, kernel.0]);
        Ok(self.push(value, Op::Depthwise { x: x.0, w: kernel.0, geom: g }, rg))
    }

    /// Depthwise convolution with "same" padding followed by a 1x1 pointwise
    /// convolution (`pointwise: [K,C,1,1]`).
    pub fn separable_conv2d(&mut self, x: Var, depthwise: Var, pointwise: Var) -> Result<Var> {
        let dshape = self.shape(depthwise).to_vec();
        if dshape.len() != 4 || dshape[2] % 2 == 0 || dshape[3] % 2 == 0 || dshape[2] != dshape[3] {
            return invalid("separable_conv2d", format!("depthwise kernel must be square and odd, got {dshape:?}"));
        }
        let pshape = self.shape(pointwise).to_vec();
        if pshape.len() != 4 || pshape[2] != 1 || pshape[3] != 1 || pshape[1] != dshape[0] {
            return shape_err(
                "separable_conv2d",
                format!("pointwise kernel {pshape:?} does not match depthwise {dshape:?}"),
            );
        }
        let d = self.depthwise_conv2d(x, depthwise, 1, dshape[2] / 2)?;
        self.conv2d(d, pointwise, 1, 0)
    }

    /// Per-channel normalization over `N,H,W` followed by `gamma * x + beta`.
    /// Training mode normalizes with batch statistics and updates `state`.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<T>,
        training: bool,
    ) -> Result<Var> {
        let [n, c, h, w] = nchw("batch_norm", self.shape(x))?;
        if self.value(gamma).numel() != c || self.value(beta).numel() != c || state.running_mean.len() != c {
            return shape_err("batch_norm", format!("{c} channels vs affine/state sizes"));
        }
        if state.eps <= T::zero() {
            return invalid("batch_norm", "eps must be positive");
        }
        let plane = h * w;
        let m = n * plane;
        let xs = self.value(x).data();
        let (mean, var): (Vec<T>, Vec<T>) = if training {
            (0..c)
                .map(|ch| {
                    let vals = (0..n).flat_map(|ni| xs[(ni * c + ch) * plane..][..plane].iter());
                    let mean = vals.clone().copied().sum::<T>() / T::lit(m as f64);
                    let var = vals.map(|&v| (v - mean) * (v - mean)).sum::<T>() / T::lit(m as f64);
                    (mean, var)
                })
                .unzip()
        } else {
            (state.running_mean.clone(), state.running_var.clone())
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + state.eps).sqrt()).collect();
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = vec![T::zero(); xs.len()];
        let mut out = vec![T::zero(); xs.len()];
        for ni in 0..n {
            for ch in 0..c {
                let base = (ni * c + ch) * plane;
                for p in base..base + plane {
                    let xh = (xs[p] - mean[ch]) * inv_std[ch];
                    xhat[p] = xh;
                    out[p] = g[ch] * xh + b[ch];
                }
            }
        }
        if training {
            let mom = state.momentum;
            let unbias = if m > 1 { T::lit(m as f64 / (m - 1) as f64) } else { T::one() };
            for ch in 0..c {
                state.running_mean[ch] = (T::one() - mom) * state.running_mean[ch] + mom * mean[ch];
                state.running_var[ch] = (T::one() - mom) * state.running_var[ch] + mom * var[ch] * unbias;
            }
        }
        let value = Tensor::from_vec(vec![n, c, h, w], out)?;
        let rg = self.rg(&[x.0, gamma.0, beta.0]);
        Ok(self.push(
            value,
            Op::BatchNorm { x: x.0, gamma: gamma.0, beta: beta.0, xhat, inv_std, training },
            rg,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(T::zero()));
        let rg = self.rg(&[x.0]);
        self.push(value, Op::Relu { x: x.0 }, rg)
    }

    pub fn max_pool2d(&mut self, x: Var, kernel: usize, stride: usize, padding: usize) -> Result<Var> {
        let g = self.geom("max_pool2d", x, kernel, kernel, stride, padding)?;
        if padding >= kernel {
            return invalid("max_pool2d", "padding must be smaller than the window");
        }
        let (out, arg) = kernels::max_pool_forward(self.value(x).data(), &g);
        let value = Tensor::from_vec(vec![g.n, g.c, g.out_h(), g.out_w()], out)?;
        let rg = self.rg(&[x.0]);
        Ok(self.push(value, Op::MaxPool { x: x.0, geom: g, arg }, rg))
    }

    /// `[N,C,H,W] -> [N,C]` spatial mean.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let [n, c, h, w] = nchw("global_avg_pool", self.shape(x))?;
        let plane = h * w;
        let inv = T::one() / T::lit(plane as f64);
        let xs = self.value(x).data();
        let out = (0..n * c).map(|p| xs[p * plane..(p + 1) * plane].iter().copied().sum::<T>() * inv).collect();
        let value = Tensor::from_vec(vec![n, c], out)?;
        let rg = self.rg(&[x.0]);
        Ok(self.push(value, Op::GlobalAvgPool { x: x.0 }, rg))
    }

    /// Fully connected layer: `x: [N,I]`, `weight: [O,I]`, `bias: [O]`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws) = (self.shape(x), self.shape(weight));
        let (&[n, i], &[o, wi]) = (xs, ws) else {
            return shape_err("linear", format!("x {xs:?}, weight {ws:?}"));
        };
        if wi != i || self.value(bias).numel() != o {
            return shape_err("linear", format!("x {xs:?}, weight {ws:?}, bias {:?}", self.shape(bias)));
        }
        let mut out = vec![T::zero(); n * o];
        for r in 0..n {
            out[r * o..(r + 1) * o].copy_from_slice(self.value(bias).data());
        }
        T::gemm(n, i, o, T::one(), self.value(x).data(), i as isize, 1, self.value(weight).data(), 1, i as isize, T::one(), &mut out, o as isize, 1);
        let value = Tensor::from_vec(vec![n, o], out)?;
        let rg = self.rg(&[x.0, weight.0, bias.0]);
        Ok(self.push(value, Op::Linear { x: x.0, w: weight.0, b: bias.0 }, rg))
    }

    /// Concatenate NCHW tensors along the channel axis.
    pub fn concat_channels(&mut self, xs: &[Var]) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return shape_err("concat_channels", "no inputs");
        };
        let [n, _, h, w] = nchw("concat_channels", self.shape(first))?;
        let mut total_c = 0;
        for &v in xs {
            let [vn, vc, vh, vw] = nchw("concat_channels", self.shape(v))?;
            if (vn, vh, vw) != (n, h, w) {
                return shape_err(
                    "concat_channels",
                    format!("{:?} vs {:?}", self.shape(v), self.shape(first)),
                );
            }
            total_c += vc;
        }
        let plane = h * w;
        let mut out = Vec::with_capacity(n * total_c * plane);
        for ni in 0..n {
            for &v in xs {
                let vc = self.shape(v)[1];
                out.extend_from_slice(&self.value(v).data()[ni * vc * plane..(ni + 1) * vc * plane]);
            }
        }
        let value = Tensor::from_vec(vec![n, total_c, h, w], out)?;
        let ids: Vec<usize> = xs.iter().map(|v| v.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(value, Op::Concat { xs: ids }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| *x + *y).collect();
        let value = Tensor::from_vec(self.shape(a).to_vec(), data)?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(value, Op::Add { a: a.0, b: b.0 }, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("sub", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| *x - *y).collect();
        let value = Tensor::from_vec(self.shape(a).to_vec(), data)?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(value, Op::Sub { a: a.0, b: b.0 }, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| *x * *y).collect();
        let value = Tensor::from_vec(self.shape(a).to_vec(), data)?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(value, Op::Mul { a: a.0, b: b.0 }, rg))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| -v);
        let rg = self.rg(&[x.0]);
        self.push(value, Op::Neg { x: x.0 }, rg)
    }

    /// `|x|`; the subgradient at 0 is 0.
    pub fn abs(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.abs());
        let rg = self.rg(&[x.0]);
        self.push(value, Op::Abs { x: x.0 }, rg)
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let value = self.value(x).map(|v| v * c);
        let rg = self.rg(&[x.0]);
        self.push(value, Op::Scale { x: x.0, c }, rg)
    }

    /// `sum_k w_k * x_k` over equally shaped inputs.
    pub fn weighted_sum(&mut self, terms: &[(Var, T)]) -> Result<Var> {
        let Some(&(first, _)) = terms.first() else {
            return shape_err("weighted_sum", "no inputs");
        };
        let mut acc = vec![T::zero(); self.value(first).numel()];
        for &(v, w) in terms {
            self.binary_same_shape("weighted_sum", first, v)?;
            acc.iter_mut().zip(self.value(v).data()).for_each(|(a, x)| *a += w * *x);
        }
        let value = Tensor::from_vec(self.shape(first).to_vec(), acc)?;
        let ids: Vec<usize> = terms.iter().map(|(v, _)| v.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(value, Op::WeightedSum { xs: terms.iter().map(|(v, w)| (v.0, *w)).collect() }, rg))
    }

    /// Smooth threshold `thr_t(x) = (1/f)(ln(1+e^z) + 10/(1+e^-z))`, `f = 10/t`,
    /// `z = f (x - t)`, differentiable in `x` and in the scalar `t`.
    pub fn soft_threshold(&mut self, x: Var, t: Var) -> Result<Var> {
        let Some(tv) = self.value(t).item() else {
            return shape_err("soft_threshold", format!("t must be scalar, got {:?}", self.shape(t)));
        };
        if tv <= T::zero() {
            return invalid("soft_threshold", format!("t must be positive, got {tv}"));
        }
        let value = self.value(x).map(|v| soft_threshold_parts(v, tv).0);
        let rg = self.rg(&[x.0, t.0]);
        Ok(self.push(value, Op::SoftThreshold { x: x.0, t: t.0 }, rg))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        let rg = self.rg(&[x.0]);
        self.push(Tensor::scalar(s), Op::Sum { x: x.0 }, rg)
    }

    /// Mean softmax cross-entropy of `scores: [N,K]` against class indices.
    pub fn softmax_cross_entropy(&mut self, scores: Var, labels: &[usize]) -> Result<Var> {
        let &[n, k] = self.shape(scores) else {
            return shape_err("softmax_cross_entropy", format!("scores {:?}", self.shape(scores)));
        };
        if labels.len() != n || labels.iter().any(|&l| l >= k) || n == 0 {
            return invalid("softmax_cross_entropy", format!("{} labels for {n}x{k} scores", labels.len()));
        }
        let s = self.value(scores).data();
        let mut probs = vec![T::zero(); n * k];
        let mut loss = T::zero();
        for r in 0..n {
            let row = &s[r * k..(r + 1) * k];
            let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
            let z: T = row.iter().map(|&v| (v - mx).exp()).sum();
            let lse = mx + z.ln();
            loss += lse - row[labels[r]];
            for j in 0..k {
                probs[r * k + j] = (row[j] - lse).exp();
            }
        }
        let value = Tensor::scalar(loss / T::lit(n as f64));
        let rg = self.rg(&[scores.0]);
        Ok(self.push(value, Op::CrossEntropy { scores: scores.0, labels: labels.to_vec(), probs }, rg))
    }

    /// Input gradients of node `idx` given its output gradient.
    pub(crate) fn local_backward(&self, idx: usize, g: &[T]) -> Vec<(usize, Vec<T>)> {
        let nodes = &self.nodes;
        let val = |i: usize| nodes[i].value.data();
        let need = |i: usize| nodes[i].requires_grad;
        match &nodes[idx].op {
            Op::Leaf => vec![],
            Op::Conv2d { x, w, k, geom } => {
                let (dx, dw) = kernels::conv2d_backward(val(*x), val(*w), *k, geom, g, need(*x), need(*w));
                [(*x, dx), (*w, dw)].into_iter().filter_map(|(i, d)| d.map(|d| (i, d))).collect()
            }
            Op::Depthwise { x, w, geom } => {
                let (dx, dw) = kernels::depthwise_backward(val(*x), val(*w), geom, g, need(*x), need(*w));
                [(*x, dx), (*w, dw)].into_iter().filter_map(|(i, d)| d.map(|d| (i, d))).collect()
            }
            Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
                let shape = nodes[*x].value.shape();
                let (n, c, plane) = (shape[0], shape[1], shape[2] * shape[3]);
                let gam = val(*gamma);
                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                for ni in 0..n {
                    for ch in 0..c {
                        let base = (ni * c + ch) * plane;
                        for p in base..base + plane {
                            dgamma[ch] += g[p] * xhat[p];
                            dbeta[ch] += g[p];
                        }
                    }
                }
                let mut dx = vec![T::zero(); g.len()];
                let m = T::lit((n * plane) as f64);
                for ni in 0..n {
                    for ch in 0..c {
                        let base = (ni * c + ch) * plane;
                        let scale = gam[ch] * inv_std[ch];
                        for p in base..base + plane {
                            dx[p] = if *training {
                                scale * (g[p] - dbeta[ch] / m - xhat[p] * dgamma[ch] / m)
                            } else {
                                scale * g[p]
                            };
                        }
                    }
                }
                vec![(*x, dx), (*gamma, dgamma), (*beta, dbeta)]
            }
            Op::Relu { x } => {
                let d = val(*x).iter().zip(g).map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() }).collect();
                vec![(*x, d)]
            }
            Op::MaxPool { x, geom, arg } => vec![(*x, kernels::max_pool_backward(arg, geom, g))],
            Op::GlobalAvgPool { x } => {
                let shape = nodes[*x].value.shape();
                let plane = shape[2] * shape[3];
                let inv = T::one() / T::lit(plane as f64);
                let d = (0..shape[0] * shape[1] * plane).map(|i| g[i / plane] * inv).collect();
                vec![(*x, d)]
            }
            Op::Linear { x, w, b } => {
                let (n, i) = (nodes[*x].value.shape()[0], nodes[*x].value.shape()[1]);
                let o = nodes[*w].value.shape()[0];
                let mut out = Vec::new();
                if need(*x) {
                    let mut dx = vec![T::zero(); n * i];
                    T::gemm(n, o, i, T::one(), g, o as isize, 1, val(*w), i as isize, 1, T::zero(), &mut dx, i as isize, 1);
                    out.push((*x, dx));
                }
                if need(*w) {
                    let mut dw = vec![T::zero(); o * i];
                    T::gemm(o, n, i, T::one(), g, 1, o as isize, val(*x), i as isize, 1, T::zero(), &mut dw, i as isize, 1);
                    out.push((*w, dw));
                }
                if need(*b) {
                    let mut db = vec![T::zero(); o];
                    for r in 0..n {
                        db.iter_mut().zip(&g[r * o..(r + 1) * o]).for_each(|(d, v)| *d += *v);
                    }
                    out.push((*b, db));
                }
                out
            }
            Op::Concat { xs } => {
                let shape = nodes[idx].value.shape();
                let (n, total_c, plane) = (shape[0], shape[1], shape[2] * shape[3]);
                let mut offset = 0;
                let mut out = Vec::with_capacity(xs.len());
                for &v in xs {
                    let vc = nodes[v].value.shape()[1];
                    if need(v) {
                        let mut d = Vec::with_capacity(n * vc * plane);
                        for ni in 0..n {
                            let start = (ni * total_c + offset) * plane;
                            d.extend_from_slice(&g[start..start + vc * plane]);
                        }
                        out.push((v, d));
                    }
                    offset += vc;
                }
                out
            }
            Op::Add { a, b } => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Sub { a, b } => vec![(*a, g.to_vec()), (*b, g.iter().map(|&v| -v).collect())],
            Op::Mul { a, b } => vec![
                (*a, g.iter().zip(val(*b)).map(|(&gv, &bv)| gv * bv).collect()),
                (*b, g.iter().zip(val(*a)).map(|(&gv, &av)| gv * av).collect()),
            ],
            Op::Neg { x } => vec![(*x, g.iter().map(|&v| -v).collect())],
            Op::Abs { x } => {
                let d = val(*x).iter().zip(g).map(|(&v, &gv)| gv * v.signum() * T::lit(if v == T::zero() { 0.0 } else { 1.0 })).collect();
                vec![(*x, d)]
            }
            Op::Scale { x, c } => vec![(*x, g.iter().map(|&v| v * *c).collect())],
            Op::WeightedSum { xs } => xs.iter().map(|&(v, w)| (v, g.iter().map(|&gv| gv * w).collect())).collect(),
            Op::SoftThreshold { x, t } => {
                let tv = val(*t)[0];
                let mut dx = Vec::with_capacity(g.len());
                let mut dt = T::zero();
                for (&xv, &gv) in val(*x).iter().zip(g) {
                    let (_, dydx, dydt) = soft_threshold_parts(xv, tv);
                    dx.push(gv * dydx);
                    dt += gv * dydt;
                }
                vec![(*x, dx), (*t, vec![dt])]
            }
            Op::Sum { x } => vec![(*x, vec![g[0]; nodes[*x].value.numel()])],
            Op::CrossEntropy { scores, labels, probs } => {
                let k = nodes[*scores].value.shape()[1];
                let scale = g[0] / T::lit(labels.len() as f64);
                let mut d: Vec<T> = probs.iter().map(|&p| p * scale).collect();
                for (r, &l) in labels.iter().enumerate() {
                    d[r * k + l] -= scale;
                }
                vec![(*scores, d)]
            }
        }
    }
}
