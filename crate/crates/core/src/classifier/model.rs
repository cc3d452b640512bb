//! A small row-token transformer encoder with hand-written backprop.
//!
//! Each of the `tokens` input rows is a `patch`-wide token. Tokens are
//! embedded linearly, pass through pre-norm encoder layers (single-head
//! self-attention and a ReLU MLP, both residual), a final layer norm, mean
//! pooling and a linear head. There is no positional embedding, so the
//! output does not depend on row order.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub tokens: usize,
    pub patch: usize,
    pub dim: usize,
    pub hidden: usize,
    pub layers: usize,
    /// Count predicted by each output.
    pub classes: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            tokens: 32,
            patch: 32,
            dim: 32,
            hidden: 64,
            layers: 2,
            classes: vec![2, 3, 5, 7],
        }
    }
}

/// Name and `[rows, cols]` shape of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: [usize; 2],
}

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct Offsets {
    embed_w: usize,
    embed_b: usize,
    layers: Vec<LayerOffsets>,
    lnf_g: usize,
    lnf_b: usize,
    head_w: usize,
    head_b: usize,
}

/// Parameter layout: tensors are stored back to back in one flat vector.
fn layout(cfg: &ModelConfig) -> (Vec<TensorSpec>, Offsets) {
    let mut specs = Vec::new();
    let mut at = 0;
    let mut push = |name: String, rows: usize, cols: usize| {
        let o = at;
        at += rows * cols;
        specs.push(TensorSpec { name, shape: [rows, cols] });
        o
    };
    let (d, h, c) = (cfg.dim, cfg.hidden, cfg.classes.len());
    let embed_w = push("embed.weight".into(), d, cfg.patch);
    let embed_b = push("embed.bias".into(), 1, d);
    let mut layers = Vec::new();
    for l in 0..cfg.layers {
        let p = |s: &str| format!("layer{l}.{s}");
        layers.push(LayerOffsets {
            ln1_g: push(p("ln1.gain"), 1, d),
            ln1_b: push(p("ln1.bias"), 1, d),
            wq: push(p("attn.query"), d, d),
            wk: push(p("attn.key"), d, d),
            wv: push(p("attn.value"), d, d),
            wo: push(p("attn.output"), d, d),
            ln2_g: push(p("ln2.gain"), 1, d),
            ln2_b: push(p("ln2.bias"), 1, d),
            w1: push(p("mlp.fc1.weight"), h, d),
            b1: push(p("mlp.fc1.bias"), 1, h),
            w2: push(p("mlp.fc2.weight"), d, h),
            b2: push(p("mlp.fc2.bias"), 1, d),
        });
    }
    let lnf_g = push("final_ln.gain".into(), 1, d);
    let lnf_b = push("final_ln.bias".into(), 1, d);
    let head_w = push("head.weight".into(), c, d);
    let head_b = push("head.bias".into(), 1, c);
    (
        specs,
        Offsets {
            embed_w,
            embed_b,
            layers,
            lnf_g,
            lnf_b,
            head_w,
            head_b,
        },
    )
}

pub fn tensor_specs(cfg: &ModelConfig) -> Vec<TensorSpec> {
    layout(cfg).0
}

pub fn parameter_count(cfg: &ModelConfig) -> usize {
    tensor_specs(cfg).iter().map(|t| t.shape[0] * t.shape[1]).sum()
}

/// `y[n x out] = x[n x in] W^T + b`.
fn linear(x: &[f64], n: usize, din: usize, w: &[f64], b: Option<&[f64]>, dout: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * dout];
    for i in 0..n {
        let xi = &x[i * din..(i + 1) * din];
        for o in 0..dout {
            let wo = &w[o * din..(o + 1) * din];
            let mut s = b.map_or(0.0, |b| b[o]);
            for k in 0..din {
                s += wo[k] * xi[k];
            }
            y[i * dout + o] = s;
        }
    }
    y
}

/// Accumulates weight and bias gradients of [`linear`] and returns `dx`.
#[allow(clippy::too_many_arguments)]
fn linear_backward(
    x: &[f64],
    n: usize,
    din: usize,
    w: &[f64],
    dout: usize,
    dy: &[f64],
    dw: &mut [f64],
    mut db: Option<&mut [f64]>,
) -> Vec<f64> {
    let mut dx = vec![0.0; n * din];
    for i in 0..n {
        let xi = &x[i * din..(i + 1) * din];
        let dxi = &mut dx[i * din..(i + 1) * din];
        for o in 0..dout {
            let g = dy[i * dout + o];
            if g == 0.0 {
                continue;
            }
            if let Some(db) = db.as_deref_mut() {
                db[o] += g;
            }
            let wo = &w[o * din..(o + 1) * din];
            let dwo = &mut dw[o * din..(o + 1) * din];
            for k in 0..din {
                dwo[k] += g * xi[k];
                dxi[k] += g * wo[k];
            }
        }
    }
    dx
}

struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], n: usize, d: usize, g: &[f64], b: &[f64]) -> (Vec<f64>, NormCache) {
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut inv_std = vec![0.0; n];
    for i in 0..n {
        let row = &x[i * d..(i + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[i] = is;
        for k in 0..d {
            let xh = (row[k] - mean) * is;
            xhat[i * d + k] = xh;
            y[i * d + k] = g[k] * xh + b[k];
        }
    }
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward(
    c: &NormCache,
    n: usize,
    d: usize,
    g: &[f64],
    dy: &[f64],
    dg: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; n * d];
    let mut dxhat = vec![0.0; d];
    for i in 0..n {
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..d {
            let gy = dy[i * d + k];
            let xh = c.xhat[i * d + k];
            dg[k] += gy * xh;
            db[k] += gy;
            dxhat[k] = gy * g[k];
            m1 += dxhat[k];
            m2 += dxhat[k] * xh;
        }
        m1 /= d as f64;
        m2 /= d as f64;
        for k in 0..d {
            dx[i * d + k] = c.inv_std[i] * (dxhat[k] - m1 - c.xhat[i * d + k] * m2);
        }
    }
    dx
}

struct LayerCache {
    ln1: NormCache,
    z1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<f64>,
    o: Vec<f64>,
    ln2: NormCache,
    z2: Vec<f64>,
    u: Vec<f64>,
    r: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backprop.
pub struct Forward {
    x: Vec<f64>,
    layers: Vec<LayerCache>,
    lnf: NormCache,
    pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    offsets_cache: OffsetsCache,
}

// Offsets are derived from the config; wrapped so Model can derive PartialEq.
#[derive(Debug, Clone)]
struct OffsetsCache(Offsets);

impl PartialEq for OffsetsCache {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Model {
    /// Xavier-uniform weights, unit gains, zero biases and a near-zero head
    /// so the initial prediction is close to uniform.
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Self {
        let (specs, offsets) = layout(&config);
        let mut params = Vec::with_capacity(parameter_count(&config));
        for t in &specs {
            let [rows, cols] = t.shape;
            let n = rows * cols;
            if t.name.ends_with(".gain") {
                params.extend(std::iter::repeat(1.0).take(n));
            } else if rows == 1 {
                params.extend(std::iter::repeat(0.0).take(n));
            } else {
                let mut a = (6.0 / (rows + cols) as f64).sqrt();
                if t.name.starts_with("head") {
                    a *= 0.01;
                }
                params.extend((0..n).map(|_| rng.gen_range(-a..a)));
            }
        }
        Model {
            config,
            params,
            offsets_cache: OffsetsCache(offsets),
        }
    }

    /// Builds a model around existing parameters; `None` on a size mismatch.
    pub fn from_params(config: ModelConfig, params: Vec<f64>) -> Option<Self> {
        let (_, offsets) = layout(&config);
        (params.len() == parameter_count(&config)).then_some(Model {
            config,
            params,
            offsets_cache: OffsetsCache(offsets),
        })
    }

    fn p(&self, at: usize, len: usize) -> &[f64] {
        &self.params[at..at + len]
    }

    /// Forward pass over one `tokens x patch` input.
    pub fn forward(&self, x: &[f64]) -> Forward {
        let cfg = &self.config;
        let off = &self.offsets_cache.0;
        let (t, pch, d, h, c) = (cfg.tokens, cfg.patch, cfg.dim, cfg.hidden, cfg.classes.len());
        assert_eq!(x.len(), t * pch, "input must be tokens x patch");
        let mut e = linear(x, t, pch, self.p(off.embed_w, d * pch), Some(self.p(off.embed_b, d)), d);
        let scale = 1.0 / (d as f64).sqrt();
        let mut caches = Vec::with_capacity(cfg.layers);
        for lo in &off.layers {
            let (z1, ln1) = layer_norm(&e, t, d, self.p(lo.ln1_g, d), self.p(lo.ln1_b, d));
            let q = linear(&z1, t, d, self.p(lo.wq, d * d), None, d);
            let k = linear(&z1, t, d, self.p(lo.wk, d * d), None, d);
            let v = linear(&z1, t, d, self.p(lo.wv, d * d), None, d);
            let mut attn = vec![0.0; t * t];
            for i in 0..t {
                let row = &mut attn[i * t..(i + 1) * t];
                for j in 0..t {
                    row[j] = (0..d).map(|a| q[i * d + a] * k[j * d + a]).sum::<f64>() * scale;
                }
                let sm = softmax(row);
                row.copy_from_slice(&sm);
            }
            let mut o = vec![0.0; t * d];
            for i in 0..t {
                for j in 0..t {
                    let a = attn[i * t + j];
                    for m in 0..d {
                        o[i * d + m] += a * v[j * d + m];
                    }
                }
            }
            let y = linear(&o, t, d, self.p(lo.wo, d * d), None, d);
            let h1: Vec<f64> = e.iter().zip(&y).map(|(a, b)| a + b).collect();
            let (z2, ln2) = layer_norm(&h1, t, d, self.p(lo.ln2_g, d), self.p(lo.ln2_b, d));
            let u = linear(&z2, t, d, self.p(lo.w1, h * d), Some(self.p(lo.b1, h)), h);
            let r: Vec<f64> = u.iter().map(|&v| v.max(0.0)).collect();
            let m = linear(&r, t, h, self.p(lo.w2, d * h), Some(self.p(lo.b2, d)), d);
            let out: Vec<f64> = h1.iter().zip(&m).map(|(a, b)| a + b).collect();
            e = out;
            caches.push(LayerCache {
                ln1,
                z1,
                q,
                k,
                v,
                attn,
                o,
                ln2,
                z2,
                u,
                r,
            });
        }
        let (zf, lnf) = layer_norm(&e, t, d, self.p(off.lnf_g, d), self.p(off.lnf_b, d));
        let mut pooled = vec![0.0; d];
        for i in 0..t {
            for m in 0..d {
                pooled[m] += zf[i * d + m] / t as f64;
            }
        }
        let logits = linear(&pooled, 1, d, self.p(off.head_w, c * d), Some(self.p(off.head_b, c)), c);
        Forward {
            x: x.to_vec(),
            layers: caches,
            lnf,
            pooled,
            logits,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).logits
    }

    /// Accumulates into `grad` the gradient of the loss whose derivative
    /// with respect to the logits is `dlogits`.
    pub fn backward(&self, fw: &Forward, dlogits: &[f64], grad: &mut [f64]) {
        let cfg = &self.config;
        let off = &self.offsets_cache.0;
        let (t, pch, d, h, c) = (cfg.tokens, cfg.patch, cfg.dim, cfg.hidden, cfg.classes.len());
        assert_eq!(grad.len(), self.params.len());
        let scale = 1.0 / (d as f64).sqrt();

        let dpooled = {
            let (gw, gb) = split2_sized(grad, off.head_w, c * d, off.head_b, c);
            linear_backward(&fw.pooled, 1, d, self.p(off.head_w, c * d), c, dlogits, gw, Some(gb))
        };
        let mut dzf = vec![0.0; t * d];
        for i in 0..t {
            for m in 0..d {
                dzf[i * d + m] = dpooled[m] / t as f64;
            }
        }
        let mut de = {
            let (gg, gb) = split2(grad, off.lnf_g, off.lnf_b, d);
            layer_norm_backward(&fw.lnf, t, d, self.p(off.lnf_g, d), &dzf, gg, gb)
        };

        for (lo, lc) in off.layers.iter().zip(&fw.layers).rev() {
            // MLP branch.
            let dm = &de;
            let dr = {
                let (gw, gb) = split2_sized(grad, lo.w2, d * h, lo.b2, d);
                linear_backward(&lc.r, t, h, self.p(lo.w2, d * h), d, dm, gw, Some(gb))
            };
            let du: Vec<f64> = dr.iter().zip(&lc.u).map(|(g, &u)| if u > 0.0 { *g } else { 0.0 }).collect();
            let dz2 = {
                let (gw, gb) = split2_sized(grad, lo.w1, h * d, lo.b1, h);
                linear_backward(&lc.z2, t, d, self.p(lo.w1, h * d), h, &du, gw, Some(gb))
            };
            let dh1_ln = {
                let (gg, gb) = split2(grad, lo.ln2_g, lo.ln2_b, d);
                layer_norm_backward(&lc.ln2, t, d, self.p(lo.ln2_g, d), &dz2, gg, gb)
            };
            let dh1: Vec<f64> = de.iter().zip(&dh1_ln).map(|(a, b)| a + b).collect();

            // Attention branch.
            let do_ = linear_backward(&lc.o, t, d, self.p(lo.wo, d * d), d, &dh1, &mut grad[lo.wo..lo.wo + d * d], None);
            let mut dattn = vec![0.0; t * t];
            let mut dv = vec![0.0; t * d];
            for i in 0..t {
                for j in 0..t {
                    let mut s = 0.0;
                    for m in 0..d {
                        s += do_[i * d + m] * lc.v[j * d + m];
                        dv[j * d + m] += lc.attn[i * t + j] * do_[i * d + m];
                    }
                    dattn[i * t + j] = s;
                }
            }
            let mut ds = vec![0.0; t * t];
            for i in 0..t {
                let a = &lc.attn[i * t..(i + 1) * t];
                let g = &dattn[i * t..(i + 1) * t];
                let dot: f64 = a.iter().zip(g).map(|(x, y)| x * y).sum();
                for j in 0..t {
                    ds[i * t + j] = a[j] * (g[j] - dot) * scale;
                }
            }
            let mut dq = vec![0.0; t * d];
            let mut dk = vec![0.0; t * d];
            for i in 0..t {
                for j in 0..t {
                    let s = ds[i * t + j];
                    if s == 0.0 {
                        continue;
                    }
                    for m in 0..d {
                        dq[i * d + m] += s * lc.k[j * d + m];
                        dk[j * d + m] += s * lc.q[i * d + m];
                    }
                }
            }
            let mut dz1 = linear_backward(&lc.z1, t, d, self.p(lo.wq, d * d), d, &dq, &mut grad[lo.wq..lo.wq + d * d], None);
            let dz1k = linear_backward(&lc.z1, t, d, self.p(lo.wk, d * d), d, &dk, &mut grad[lo.wk..lo.wk + d * d], None);
            let dz1v = linear_backward(&lc.z1, t, d, self.p(lo.wv, d * d), d, &dv, &mut grad[lo.wv..lo.wv + d * d], None);
            for ((a, b), c2) in dz1.iter_mut().zip(&dz1k).zip(&dz1v) {
                *a += b + c2;
            }
            let din_ln = {
                let (gg, gb) = split2(grad, lo.ln1_g, lo.ln1_b, d);
                layer_norm_backward(&lc.ln1, t, d, self.p(lo.ln1_g, d), &dz1, gg, gb)
            };
            de = dh1.iter().zip(&din_ln).map(|(a, b)| a + b).collect();
        }

        let (gw, gb) = split2_sized(grad, off.embed_w, d * pch, off.embed_b, d);
        linear_backward(&fw.x, t, pch, self.p(off.embed_w, d * pch), d, &de, gw, Some(gb));
    }
}

/// Two disjoint `len`-long mutable windows of `buf` starting at `a < b`.
fn split2(buf: &mut [f64], a: usize, b: usize, len: usize) -> (&mut [f64], &mut [f64]) {
    split2_sized(buf, a, len, b, len)
}

fn split2_sized(buf: &mut [f64], a: usize, alen: usize, b: usize, blen: usize) -> (&mut [f64], &mut [f64]) {
    assert!(a + alen <= b, "tensor windows overlap");
    let (lo, hi) = buf.split_at_mut(b);
    (&mut lo[a..a + alen], &mut hi[..blen])
}

/// Cross-entropy of `logits` against class index `target` and its
/// derivative with respect to the logits.
pub fn cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    let p = softmax(logits);
    let loss = -p[target].max(1e-300).ln();
    let mut g = p;
    g[target] -= 1.0;
    (loss, g)
}
