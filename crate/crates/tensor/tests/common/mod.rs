#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vfd_tensor::{BatchNormState, Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Six-loop cross-correlation reference, zero padding.
pub fn brute_conv(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let [ko, kc, kh, kw] = k.shape().try_into().unwrap();
    assert_eq!(c, kc);
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros(&[n, ko, ho, wo]);
    for b in 0..n {
        for o in 0..ko {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for i in 0..kh {
                            for j in 0..kw {
                                let iy = (oy * stride + i) as isize - pad as isize;
                                let ix = (ox * stride + j) as isize - pad as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x.data()[((b * c + ci) * h + iy as usize) * w + ix as usize]
                                    * k.data()[((o * c + ci) * kh + i) * kw + j];
                            }
                        }
                    }
                    out.data_mut()[((b * ko + o) * ho + oy) * wo + ox] = acc;
                }
            }
        }
    }
    out
}

/// Largest norm-wise relative error between backward-pass gradients and
/// central finite differences (step `h`), over every input tensor.
pub fn grad_check(
    inputs: &[Tensor<f64>],
    h: f64,
    f: impl Fn(&mut Tape<f64>, &[Var]) -> Var,
) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();

    let eval = |values: &[Tensor<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item().unwrap()
    };

    let mut worst: f64 = 0.0;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[k]).unwrap().data().to_vec();
        let mut numeric = vec![0.0; input.numel()];
        for i in 0..input.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            numeric[i] = (eval(&plus) - eval(&minus)) / (2.0 * h);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let denom = na.max(nn);
        let rel = if denom < 1e-12 { diff } else { diff / denom };
        worst = worst.max(rel);
    }
    worst
}

/// Weights `w` for a loss `sum(w * y)` that exercises every output element.
pub fn probe(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let mut r = rng(seed);
    let w = random(&mut r, tape.shape(y));
    let w = tape.constant(w);
    let p = tape.mul(y, w).unwrap();
    tape.sum(p)
}

/// Dense kernel equivalent to a depthwise `dw` followed by pointwise `pw`.
pub fn full_kernel(dw: &Tensor<f64>, pw: &Tensor<f64>) -> Tensor<f64> {
    let [c, _, kh, kw] = dw.shape().try_into().unwrap();
    let k = pw.shape()[0];
    Tensor::from_fn(&[k, c, kh, kw], |idx| {
        let j = idx % kw;
        let i = (idx / kw) % kh;
        let ci = (idx / (kw * kh)) % c;
        let o = idx / (kw * kh * c);
        pw.data()[o * c + ci] * dw.data()[(ci * kh + i) * kw + j]
    })
}

/// Per-channel reference: each channel convolved with its own kernel.
pub fn brute_depthwise(x: &Tensor<f64>, k: &Tensor<f64>, stride: usize, pad: usize) -> Tensor<f64> {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let [_, _, kh, kw] = k.shape().try_into().unwrap();
    let mut parts = Vec::new();
    for ch in 0..c {
        let xc = Tensor::from_fn(&[n, 1, h, w], |i| {
            let (b, p) = (i / (h * w), i % (h * w));
            x.data()[(b * c + ch) * h * w + p]
        });
        let kc = Tensor::from_vec(vec![1, 1, kh, kw], k.data()[ch * kh * kw..(ch + 1) * kh * kw].to_vec()).unwrap();
        parts.push(brute_conv(&xc, &kc, stride, pad));
    }
    let [_, _, ho, wo]: [usize; 4] = parts[0].shape().try_into().unwrap();
    Tensor::from_fn(&[n, c, ho, wo], |i| {
        let (b, ch, p) = (i / (c * ho * wo), (i / (ho * wo)) % c, i % (ho * wo));
        parts[ch].data()[b * ho * wo + p]
    })
}

pub type Loss = Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Var>;

/// One finite-difference check: inputs, step and scalar loss.
pub struct GradCase {
    pub name: &'static str,
    pub inputs: Vec<Tensor<f64>>,
    pub h: f64,
    pub loss: Loss,
}

impl GradCase {
    pub fn error(&self) -> f64 {
        grad_check(&self.inputs, self.h, &self.loss)
    }
}

fn case(name: &'static str, inputs: Vec<Tensor<f64>>, loss: impl Fn(&mut Tape<f64>, &[Var]) -> Var + 'static) -> GradCase {
    GradCase { name, inputs, h: 1e-5, loss: Box::new(loss) }
}

/// Small Xception-style network: every parameter checked at once.
fn composite(t: &mut Tape<f64>, v: &[Var]) -> Var {
    let mut bn1 = BatchNormState::new(3);
    let mut bn2 = BatchNormState::new(4);
    let y = t.conv2d(v[0], v[1], 2, 0).unwrap();
    let y = t.batch_norm(y, v[2], v[3], &mut bn1, true).unwrap();
    let y = t.relu(y);
    let skip = t.conv2d(y, v[7], 2, 0).unwrap();
    let y = t.separable_conv2d(y, v[4], v[5]).unwrap();
    let y = t.batch_norm(y, v[6], v[8], &mut bn2, true).unwrap();
    let y = t.max_pool2d(y, 3, 2, 1).unwrap();
    let y = t.add(y, skip).unwrap();
    let y = t.global_avg_pool(y).unwrap();
    let y = t.linear(y, v[9], v[10]).unwrap();
    t.softmax_cross_entropy(y, &[0, 1, 1]).unwrap()
}

/// Every differentiable operation of the tape, alone or composed.
pub fn gradient_cases() -> Vec<GradCase> {
    let mut r = rng(10);
    let mut out = Vec::new();
    for (stride, pad) in [(1, 1), (2, 0), (2, 1)] {
        out.push(case("conv2d", vec![random(&mut r, &[2, 2, 6, 5]), random(&mut r, &[3, 2, 3, 3])], move |t, v| {
            let y = t.conv2d(v[0], v[1], stride, pad).unwrap();
            probe(t, y, 11)
        }));
    }
    out.push(case("pointwise", vec![random(&mut r, &[2, 3, 4, 4]), random(&mut r, &[2, 3, 1, 1])], |t, v| {
        let y = t.conv2d(v[0], v[1], 1, 0).unwrap();
        probe(t, y, 13)
    }));
    out.push(case(
        "separable",
        vec![random(&mut r, &[2, 3, 5, 6]), random(&mut r, &[3, 1, 3, 3]), random(&mut r, &[4, 3, 1, 1])],
        |t, v| {
            let y = t.separable_conv2d(v[0], v[1], v[2]).unwrap();
            probe(t, y, 15)
        },
    ));
    out.push(case("depthwise", vec![random(&mut r, &[1, 2, 7, 7]), random(&mut r, &[2, 1, 3, 3])], |t, v| {
        let y = t.depthwise_conv2d(v[0], v[1], 2, 1).unwrap();
        probe(t, y, 16)
    }));
    let bn_inputs = vec![random(&mut r, &[3, 2, 3, 3]), random(&mut r, &[2]), random(&mut r, &[2])];
    for training in [true, false] {
        out.push(case(if training { "batch_norm_train" } else { "batch_norm_eval" }, bn_inputs.clone(), move |t, v| {
            let mut state = BatchNormState::new(2);
            state.running_mean = vec![0.1, -0.2];
            state.running_var = vec![0.5, 2.0];
            let y = t.batch_norm(v[0], v[1], v[2], &mut state, training).unwrap();
            probe(t, y, 18)
        }));
    }
    out.push(case("max_pool_relu_gap", vec![random(&mut r, &[2, 2, 5, 5])], |t, v| {
        let y = t.max_pool2d(v[0], 3, 2, 1).unwrap();
        let y = t.relu(y);
        let y = t.global_avg_pool(y).unwrap();
        probe(t, y, 20)
    }));
    out.push(case("linear", vec![random(&mut r, &[3, 4]), random(&mut r, &[2, 4]), random(&mut r, &[2])], |t, v| {
        let y = t.linear(v[0], v[1], v[2]).unwrap();
        probe(t, y, 21)
    }));
    out.push(case(
        "elementwise_concat",
        vec![random(&mut r, &[1, 2, 3, 3]), random(&mut r, &[1, 1, 3, 3]), random(&mut r, &[1, 3, 3, 3])],
        |t, v| {
            let c = t.concat_channels(&[v[0], v[1]]).unwrap();
            let d = t.sub(c, v[2]).unwrap();
            let e = t.abs(d);
            let n = t.neg(v[2]);
            let s = t.weighted_sum(&[(e, 0.5), (n, -0.25), (c, 2.0)]).unwrap();
            let s = t.scale(s, 3.0);
            let m = t.mul(s, v[2]).unwrap();
            let s = t.add(m, v[2]).unwrap();
            probe(t, s, 23)
        },
    ));
    let x = Tensor::from_fn(&[40], |_| r.gen_range(-0.1..0.1));
    for t0 in [1.0 / 40.0, 0.0129, 0.05] {
        out.push(GradCase {
            name: "soft_threshold",
            inputs: vec![x.clone(), Tensor::scalar(t0)],
            h: 1e-7,
            loss: Box::new(|t, v| {
                let y = t.soft_threshold(v[0], v[1]).unwrap();
                probe(t, y, 25)
            }),
        });
    }
    out.push(case("cross_entropy", vec![random(&mut r, &[5, 2])], |t, v| t.softmax_cross_entropy(v[0], &[0, 1, 1, 0, 1]).unwrap()));
    let composite_inputs = [
        vec![3, 2, 9, 9],
        vec![3, 2, 3, 3],
        vec![3],
        vec![3],
        vec![3, 1, 3, 3],
        vec![4, 3, 1, 1],
        vec![4],
        vec![4, 3, 1, 1],
        vec![4],
        vec![2, 4],
        vec![2],
    ]
    .iter()
    .map(|s| random(&mut r, s))
    .collect();
    out.push(case("composite", composite_inputs, composite));
    out
}
