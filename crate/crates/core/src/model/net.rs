//! Small convolutional network: 3x3 conv + batch-norm + ReLU blocks, global
//! average pooling and a two-unit softplus evidence head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scalar::{gemm, Scalar};
use crate::error::{Error, Result};
use crate::planes::Planes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetSpec {
    pub input_channels: usize,
    pub widths: Vec<usize>,
    pub strides: Vec<usize>,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    /// Input channels shifted and scaled to zero mean and unit variance per
    /// sample before the first block. Set from the model kind, not from config.
    #[serde(skip)]
    pub standardize: Vec<usize>,
}

/// Per-sample standard deviation floor for standardized inputs, in stack
/// units (about 0.05 px of disparity after the 1/480 scaling), so rounding
/// noise on a near-constant channel stays near zero.
pub const STANDARDIZE_FLOOR: f64 = 1e-4;

impl Default for NetSpec {
    fn default() -> Self {
        Self::desk(10)
    }
}

impl NetSpec {
    /// Six blocks, widths 8..64, stride 2 on every other block.
    pub fn desk(input_channels: usize) -> Self {
        Self {
            input_channels,
            widths: vec![8, 16, 32, 32, 64, 64],
            strides: vec![2, 1, 2, 1, 2, 1],
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            standardize: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0
            || self.widths.is_empty()
            || self.widths.len() != self.strides.len()
            || self.widths.contains(&0)
            || self.strides.iter().any(|s| !(1..=2).contains(s))
            || self.standardize.iter().any(|&c| c >= self.input_channels)
        {
            return Err(Error::Config(format!(
                "invalid network spec: {} inputs, widths {:?}, strides {:?}",
                self.input_channels, self.widths, self.strides
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let mut cin = self.input_channels;
        let mut n = 0;
        for &w in &self.widths {
            n += w * cin * 9 + 2 * w;
            cin = w;
        }
        n + 2 * cin + 2
    }
}

/// Dense `n x c x h x w` batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self {
            n,
            c,
            h,
            w,
            data: vec![T::zero(); n * c * h * w],
        }
    }

    /// Stacks equally shaped planes into a batch.
    pub fn from_planes(items: &[&Planes]) -> Result<Self> {
        let first = items.first().ok_or(Error::Empty("batch"))?;
        let (c, h, w) = (first.channels(), first.height(), first.width());
        let mut data = Vec::with_capacity(items.len() * c * h * w);
        for p in items {
            if (p.channels(), p.height(), p.width()) != (c, h, w) {
                return Err(Error::Dimension("batch items differ in shape".into()));
            }
            data.extend(p.data().iter().map(|&v| T::of(v as f64)));
        }
        Ok(Self {
            n: items.len(),
            c,
            h,
            w,
            data,
        })
    }

    fn item(&self, i: usize) -> &[T] {
        let len = self.c * self.h * self.w;
        &self.data[i * len..(i + 1) * len]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    cin: usize,
    cout: usize,
    stride: usize,
    weight: usize,
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyCnn<T> {
    spec: NetSpec,
    blocks: Vec<Block>,
    head_w: usize,
    head_b: usize,
    pub params: Vec<T>,
    /// Batch-norm running means and variances.
    pub buffers: Vec<T>,
}

fn out_size(n: usize, stride: usize) -> usize {
    (n - 1) / stride + 1
}

fn im2col<T: Scalar>(x: &[T], c: usize, h: usize, w: usize, stride: usize, cols: &mut [T]) {
    let (ho, wo) = (out_size(h, stride), out_size(w, stride));
    let hw = ho * wo;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..3 {
            for kj in 0..3 {
                let row = &mut cols[((ci * 9) + ki * 3 + kj) * hw..][..hw];
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - 1;
                    let dst = &mut row[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kj) as isize - 1;
                        *d = if ix < 0 || ix >= w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, stride: usize, dx: &mut [T]) {
    let (ho, wo) = (out_size(h, stride), out_size(w, stride));
    let hw = ho * wo;
    for ci in 0..c {
        let plane = &mut dx[ci * h * w..(ci + 1) * h * w];
        for ki in 0..3 {
            for kj in 0..3 {
                let row = &cols[((ci * 9) + ki * 3 + kj) * hw..][..hw];
                for oy in 0..ho {
                    let iy = (oy * stride + ki) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * stride + kj) as isize - 1;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] = dst[ix as usize] + row[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Activations kept from a training-mode forward pass.
pub struct ForwardCache<T> {
    /// `acts[0]` is the prepared input, `acts[i + 1]` the output of block `i`.
    acts: Vec<Tensor<T>>,
    xhat: Vec<Vec<T>>,
    inv_std: Vec<Vec<T>>,
    feat: Vec<T>,
    logits: Vec<f64>,
}

impl<T: Scalar> TinyCnn<T> {
    /// Conv weights He-uniform, head weights uniform with variance
    /// `1 / fan_in`, head bias zero, batch-norm scale 1 and shift 0.
    pub fn new(spec: NetSpec, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeroed(spec)?;
        for b in net.blocks.clone() {
            let bound = (6.0 / (b.cin * 9) as f64).sqrt();
            for v in &mut net.params[b.weight..b.weight + b.cout * b.cin * 9] {
                *v = T::of(rng.random_range(-bound..bound));
            }
            for v in &mut net.params[b.gamma..b.gamma + b.cout] {
                *v = T::one();
            }
        }
        let c = net.feature_width();
        let bound = (3.0 / c as f64).sqrt();
        for v in &mut net.params[net.head_w..net.head_w + 2 * c] {
            *v = T::of(rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    /// All parameters zero, running variance 1.
    pub fn zeroed(spec: NetSpec) -> Result<Self> {
        spec.validate()?;
        let mut blocks = Vec::new();
        let (mut p, mut b) = (0, 0);
        let mut cin = spec.input_channels;
        for (&cout, &stride) in spec.widths.iter().zip(&spec.strides) {
            blocks.push(Block {
                cin,
                cout,
                stride,
                weight: p,
                gamma: p + cout * cin * 9,
                beta: p + cout * cin * 9 + cout,
                mean: b,
                var: b + cout,
            });
            p += cout * cin * 9 + 2 * cout;
            b += 2 * cout;
            cin = cout;
        }
        let head_w = p;
        let head_b = p + 2 * cin;
        let mut buffers = vec![T::zero(); b];
        for blk in &blocks {
            for v in &mut buffers[blk.var..blk.var + blk.cout] {
                *v = T::one();
            }
        }
        Ok(Self {
            params: vec![T::zero(); head_b + 2],
            buffers,
            spec,
            blocks,
            head_w,
            head_b,
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn input_channels(&self) -> usize {
        self.spec.input_channels
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn feature_width(&self) -> usize {
        self.blocks.last().map_or(self.spec.input_channels, |b| b.cout)
    }

    /// Same network with another element type.
    pub fn cast<U: Scalar>(&self) -> TinyCnn<U> {
        TinyCnn {
            spec: self.spec.clone(),
            blocks: self.blocks.clone(),
            head_w: self.head_w,
            head_b: self.head_b,
            params: self.params.iter().map(|v| U::of(v.f64())).collect(),
            buffers: self.buffers.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Copy of `x` with the `standardize` channels normalized per sample.
    fn prepare(&self, x: &Tensor<T>) -> Tensor<T> {
        let mut x = x.clone();
        let hw = x.h * x.w;
        for i in 0..x.n {
            for &ch in &self.spec.standardize {
                let plane = &mut x.data[(i * x.c + ch) * hw..(i * x.c + ch + 1) * hw];
                let mean = plane.iter().map(|v| v.f64()).sum::<f64>() / hw as f64;
                let var = plane.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / hw as f64;
                let scale = 1.0 / var.sqrt().max(STANDARDIZE_FLOOR);
                for v in plane.iter_mut() {
                    *v = T::of((v.f64() - mean) * scale);
                }
            }
        }
        x
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.c != self.spec.input_channels {
            return Err(Error::ChannelMismatch {
                expected: self.spec.input_channels,
                got: x.c,
            });
        }
        if x.n == 0 || x.h == 0 || x.w == 0 {
            return Err(Error::Empty("input batch"));
        }
        Ok(())
    }

    fn conv(&self, b: &Block, x: &Tensor<T>, cols: &mut Vec<T>) -> Tensor<T> {
        let (ho, wo) = (out_size(x.h, b.stride), out_size(x.w, b.stride));
        let hw = ho * wo;
        let k = b.cin * 9;
        cols.resize(k * hw, T::zero());
        let mut y = Tensor::zeros(x.n, b.cout, ho, wo);
        let weight = &self.params[b.weight..b.weight + b.cout * k];
        for i in 0..x.n {
            im2col(x.item(i), b.cin, x.h, x.w, b.stride, cols);
            gemm(b.cout, k, hw, weight, false, cols, false, &mut y.data[i * b.cout * hw..], false);
        }
        y
    }

    fn head(&self, last: &Tensor<T>) -> (Vec<T>, Vec<f64>) {
        let c = last.c;
        let hw = last.h * last.w;
        let inv = T::of(1.0 / hw as f64);
        let mut feat = vec![T::zero(); last.n * c];
        for i in 0..last.n {
            for ch in 0..c {
                let s = last.data[(i * c + ch) * hw..(i * c + ch + 1) * hw]
                    .iter()
                    .fold(T::zero(), |a, &v| a + v);
                feat[i * c + ch] = s * inv;
            }
        }
        let mut logits = vec![0.0; last.n * 2];
        for i in 0..last.n {
            for k in 0..2 {
                let mut z = self.params[self.head_b + k].f64();
                for ch in 0..c {
                    z += self.params[self.head_w + k * c + ch].f64() * feat[i * c + ch].f64();
                }
                logits[i * 2 + k] = z;
            }
        }
        (feat, logits)
    }

    /// Inference-mode forward pass (running batch-norm statistics), one
    /// `[evidence_live, evidence_spoof]` per batch item.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Vec<[f64; 2]>> {
        self.check_input(x)?;
        let mut cols = Vec::new();
        let mut act = self.prepare(x);
        let eps = self.spec.bn_eps;
        for b in &self.blocks {
            let mut y = self.conv(b, &act, &mut cols);
            let hw = y.h * y.w;
            for ch in 0..b.cout {
                let mean = self.buffers[b.mean + ch];
                let inv_std = T::of(1.0 / (self.buffers[b.var + ch].f64() + eps).sqrt());
                let (g, be) = (self.params[b.gamma + ch], self.params[b.beta + ch]);
                for i in 0..y.n {
                    for v in &mut y.data[(i * b.cout + ch) * hw..(i * b.cout + ch + 1) * hw] {
                        let z = g * (*v - mean) * inv_std + be;
                        *v = if z > T::zero() { z } else { T::zero() };
                    }
                }
            }
            act = y;
        }
        let (_, logits) = self.head(&act);
        Ok(logits.chunks(2).map(|z| [softplus(z[0]), softplus(z[1])]).collect())
    }

    /// Training-mode forward pass: batch statistics, running buffers updated
    /// when `update_buffers`.
    pub fn forward_train(&mut self, x: &Tensor<T>, update_buffers: bool) -> Result<(Vec<[f64; 2]>, ForwardCache<T>)> {
        self.check_input(x)?;
        let mut cols = Vec::new();
        let eps = self.spec.bn_eps;
        let momentum = T::of(self.spec.bn_momentum);
        let mut acts = vec![self.prepare(x)];
        let mut xhats = Vec::new();
        let mut inv_stds = Vec::new();
        for b in self.blocks.clone() {
            let mut y = self.conv(&b, acts.last().unwrap(), &mut cols);
            let hw = y.h * y.w;
            let count = (y.n * hw) as f64;
            let mut xhat = vec![T::zero(); y.data.len()];
            let mut inv_std = vec![T::zero(); b.cout];
            for ch in 0..b.cout {
                let chunks = (0..y.n).map(|i| (i * b.cout + ch) * hw);
                let mut sum = 0.0;
                for s in chunks.clone() {
                    sum += y.data[s..s + hw].iter().map(|v| v.f64()).sum::<f64>();
                }
                let mean = sum / count;
                let mut ss = 0.0;
                for s in chunks.clone() {
                    ss += y.data[s..s + hw].iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>();
                }
                let var = ss / count;
                let istd = 1.0 / (var + eps).sqrt();
                inv_std[ch] = T::of(istd);
                let (g, be) = (self.params[b.gamma + ch], self.params[b.beta + ch]);
                let (mean_t, istd_t) = (T::of(mean), T::of(istd));
                for s in chunks {
                    for j in s..s + hw {
                        let xh = (y.data[j] - mean_t) * istd_t;
                        xhat[j] = xh;
                        let z = g * xh + be;
                        y.data[j] = if z > T::zero() { z } else { T::zero() };
                    }
                }
                if update_buffers {
                    let unbiased = if count > 1.0 { ss / (count - 1.0) } else { var };
                    let rm = &mut self.buffers[b.mean + ch];
                    *rm = (T::one() - momentum) * *rm + momentum * T::of(mean);
                    let rv = &mut self.buffers[b.var + ch];
                    *rv = (T::one() - momentum) * *rv + momentum * T::of(unbiased);
                }
            }
            xhats.push(xhat);
            inv_stds.push(inv_std);
            acts.push(y);
        }
        let (feat, logits) = self.head(acts.last().unwrap());
        let evidence = logits.chunks(2).map(|z| [softplus(z[0]), softplus(z[1])]).collect();
        Ok((
            evidence,
            ForwardCache {
                acts,
                xhat: xhats,
                inv_std: inv_stds,
                feat,
                logits,
            },
        ))
    }

    /// Gradient of `sum_i d_evidence[i] . evidence[i]` with respect to the
    /// parameters, through the training-mode pass that produced `cache`.
    pub fn backward(&self, cache: &ForwardCache<T>, d_evidence: &[[f64; 2]]) -> Vec<T> {
        let mut grad = vec![T::zero(); self.params.len()];
        let last = cache.acts.last().unwrap();
        let (n, c, hw) = (last.n, last.c, last.h * last.w);
        assert_eq!(d_evidence.len(), n);

        let mut d_act = Tensor::zeros(n, c, last.h, last.w);
        for i in 0..n {
            let mut dfeat = vec![0.0; c];
            for k in 0..2 {
                let dz = d_evidence[i][k] * sigmoid(cache.logits[i * 2 + k]);
                grad[self.head_b + k] = grad[self.head_b + k] + T::of(dz);
                for (ch, df) in dfeat.iter_mut().enumerate() {
                    let g = &mut grad[self.head_w + k * c + ch];
                    *g = *g + T::of(dz * cache.feat[i * c + ch].f64());
                    *df += dz * self.params[self.head_w + k * c + ch].f64();
                }
            }
            for ch in 0..c {
                let v = T::of(dfeat[ch] / hw as f64);
                d_act.data[(i * c + ch) * hw..(i * c + ch + 1) * hw].fill(v);
            }
        }

        let mut cols = Vec::new();
        let mut dcols = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate().rev() {
            let out = &cache.acts[bi + 1];
            let input = &cache.acts[bi];
            let xhat = &cache.xhat[bi];
            let hw = out.h * out.w;
            let count = (out.n * hw) as f64;
            // Through ReLU and batch-norm.
            let mut dy = d_act.data;
            for ch in 0..b.cout {
                let g = self.params[b.gamma + ch];
                let (mut dgamma, mut dbeta) = (0.0, 0.0);
                let (mut sum_dxh, mut sum_dxh_xh) = (0.0, 0.0);
                for i in 0..out.n {
                    let s = (i * b.cout + ch) * hw;
                    for j in s..s + hw {
                        let dz = if out.data[j] > T::zero() { dy[j] } else { T::zero() };
                        dgamma += (dz * xhat[j]).f64();
                        dbeta += dz.f64();
                        let dxh = dz * g;
                        sum_dxh += dxh.f64();
                        sum_dxh_xh += (dxh * xhat[j]).f64();
                        dy[j] = dxh;
                    }
                }
                grad[b.gamma + ch] = T::of(dgamma);
                grad[b.beta + ch] = T::of(dbeta);
                let istd = cache.inv_std[bi][ch];
                let (m1, m2) = (T::of(sum_dxh / count), T::of(sum_dxh_xh / count));
                for i in 0..out.n {
                    let s = (i * b.cout + ch) * hw;
                    for j in s..s + hw {
                        dy[j] = istd * (dy[j] - m1 - xhat[j] * m2);
                    }
                }
            }
            // Through the convolution.
            let k = b.cin * 9;
            cols.resize(k * hw, T::zero());
            let weight = &self.params[b.weight..b.weight + b.cout * k];
            let need_input_grad = bi > 0;
            let mut d_in = if need_input_grad {
                Tensor::zeros(input.n, input.c, input.h, input.w)
            } else {
                Tensor::zeros(0, 0, 0, 0)
            };
            if need_input_grad {
                dcols.resize(k * hw, T::zero());
            }
            for i in 0..out.n {
                let dyi = &dy[i * b.cout * hw..(i + 1) * b.cout * hw];
                im2col(input.item(i), b.cin, input.h, input.w, b.stride, &mut cols);
                gemm(b.cout, hw, k, dyi, false, &cols, true, &mut grad[b.weight..b.weight + b.cout * k], true);
                if need_input_grad {
                    gemm(k, b.cout, hw, weight, true, dyi, false, &mut dcols, false);
                    let len = input.c * input.h * input.w;
                    col2im(&dcols, b.cin, input.h, input.w, b.stride, &mut d_in.data[i * len..(i + 1) * len]);
                }
            }
            d_act = d_in;
        }
        grad
    }
}
