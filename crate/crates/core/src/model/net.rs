use rand::Rng;

use super::arch::ArchSpec;
use crate::seed;
use crate::waveform::{IqFrame, UnitFrame};
use crate::{Error, Result};

/// Probabilities below this are floored inside the cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Layer {
    Conv {
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        len_in: usize,
        len_out: usize,
        pool: usize,
        len_pooled: usize,
        w: usize,
        b: usize,
    },
    Dense {
        n_in: usize,
        n_out: usize,
        relu: bool,
        w: usize,
        b: usize,
    },
}

impl Layer {
    fn fan_in(&self) -> usize {
        match *self {
            Layer::Conv { cin, kernel, .. } => cin * kernel,
            Layer::Dense { n_in, .. } => n_in,
        }
    }

    /// (weight offset, weight count, bias offset, bias count)
    fn param_ranges(&self) -> (usize, usize, usize, usize) {
        match *self {
            Layer::Conv {
                cin, cout, kernel, w, b, ..
            } => (w, cout * cin * kernel, b, cout),
            Layer::Dense { n_in, n_out, w, b, .. } => (w, n_out * n_in, b, n_out),
        }
    }
}

enum Cache {
    Conv {
        padded: Vec<f64>,
        pre: Vec<f64>,
        argmax: Vec<usize>,
    },
    Dense {
        input: Vec<f64>,
        pre: Vec<f64>,
    },
}

struct Trace {
    caches: Vec<Cache>,
    logits: Vec<f64>,
}

/// Loss, probabilities and the gradient of the loss with respect to every
/// input value (interleaved I/Q in the unit domain).
#[derive(Debug, Clone)]
pub struct InputGradient {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grad: Vec<f64>,
}

/// The parameterized classifier. Parameters live in one flat vector so that
/// optimizers and checkpoints can treat them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: ArchSpec,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

impl Classifier {
    /// Fan-in scaled uniform initialization with a zeroed output layer, so an
    /// untrained model predicts exactly uniform probabilities.
    pub fn new(arch: ArchSpec, seed: u64) -> Result<Classifier> {
        Self::init(arch, seed, true)
    }

    /// Like [`Classifier::new`] but with a randomly initialized output layer.
    pub fn with_random_head(arch: ArchSpec, seed: u64) -> Result<Classifier> {
        Self::init(arch, seed, false)
    }

    fn init(arch: ArchSpec, seed: u64, zero_head: bool) -> Result<Classifier> {
        arch.validate()?;
        let layers = plan(&arch);
        let total = layers
            .iter()
            .map(|l| {
                let (_, wn, _, bn) = l.param_ranges();
                wn + bn
            })
            .sum();
        let mut params = vec![0.0; total];
        let mut rng = seed::rng(seed::derive_seed(seed, "init", 0));
        let last = layers.len() - 1;
        for (i, layer) in layers.iter().enumerate() {
            if i == last && zero_head {
                continue;
            }
            let bound = (1.0 / layer.fan_in() as f64).sqrt();
            let (w, wn, b, bn) = layer.param_ranges();
            for p in &mut params[b..b + bn] {
                *p = rng.random_range(-bound..bound);
            }
            for p in &mut params[w..w + wn] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(Classifier { arch, layers, params })
    }

    /// Rebuilds a model from an architecture and a flat parameter vector.
    pub fn from_params(arch: ArchSpec, params: Vec<f64>) -> Result<Classifier> {
        let mut model = Classifier::new(arch, 0)?;
        if params.len() != model.params.len() {
            return Err(Error::Shape {
                what: "parameter vector",
                expected: model.params.len(),
                actual: params.len(),
            });
        }
        model.params = params;
        Ok(model)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Maps a physical frame into this model's input domain.
    pub fn unit_input(&self, frame: &IqFrame) -> UnitFrame {
        frame.to_unit_interval(self.arch.clip_amp).0
    }

    /// Class probabilities.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(input)?))
    }

    pub fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(input)?.logits)
    }

    /// Identifies the linear region the network is in at `input`: the pool
    /// winner index and ReLU state of every pooled unit, then the ReLU state
    /// of every hidden dense unit. Two inputs with equal patterns are joined
    /// by a segment on which the logits are affine only if the pattern also
    /// holds along it, so callers sample the segment.
    pub fn activation_pattern(&self, input: &[f64]) -> Result<Vec<usize>> {
        let trace = self.trace(input)?;
        let mut out = Vec::new();
        for (cache, layer) in trace.caches.iter().zip(&self.layers) {
            match (cache, layer) {
                (Cache::Conv { pre, argmax, .. }, _) => {
                    for &a in argmax {
                        out.push(a);
                        out.push(usize::from(pre[a] > 0.0));
                    }
                }
                (Cache::Dense { pre, .. }, Layer::Dense { relu: true, .. }) => {
                    out.extend(pre.iter().map(|&v| usize::from(v > 0.0)));
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// Index of the most probable class (first one on ties).
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(input)?))
    }

    /// Cross-entropy `-ln max(p_label, PROB_FLOOR)`.
    pub fn loss(&self, input: &[f64], label: usize) -> Result<f64> {
        self.check_label(label)?;
        let probs = self.forward(input)?;
        Ok(cross_entropy(&probs, label))
    }

    /// Exact gradient of [`Classifier::loss`] with respect to the input.
    pub fn input_gradient(&self, input: &[f64], label: usize) -> Result<InputGradient> {
        self.check_label(label)?;
        let trace = self.trace(input)?;
        let probs = softmax(&trace.logits);
        let loss = cross_entropy(&probs, label);
        let dlogits = loss_grad(&probs, label);
        let grad = self.backward(&trace, dlogits, None, true);
        Ok(InputGradient { loss, probs, grad })
    }

    /// Adds the parameter gradient of the loss at `(input, label)` into
    /// `grads` and returns `(loss, predicted class)`.
    pub fn accumulate_gradients(&self, input: &[f64], label: usize, grads: &mut [f64]) -> Result<(f64, usize)> {
        self.check_label(label)?;
        if grads.len() != self.params.len() {
            return Err(Error::Shape {
                what: "gradient buffer",
                expected: self.params.len(),
                actual: grads.len(),
            });
        }
        let trace = self.trace(input)?;
        let probs = softmax(&trace.logits);
        let loss = cross_entropy(&probs, label);
        let pred = argmax(&trace.logits);
        let dlogits = loss_grad(&probs, label);
        self.backward(&trace, dlogits, Some(grads), false);
        Ok((loss, pred))
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.arch.num_classes {
            return Err(Error::Config(format!(
                "label {label} out of range for {} classes",
                self.arch.num_classes
            )));
        }
        Ok(())
    }

    fn trace(&self, input: &[f64]) -> Result<Trace> {
        let len = self.arch.frame_len;
        if input.len() != 2 * len {
            return Err(Error::Shape {
                what: "classifier input",
                expected: 2 * len,
                actual: input.len(),
            });
        }
        let scale = 2.0 * self.arch.clip_amp;
        // interleaved I/Q -> channel-major (2, L)
        let mut x = vec![0.0; 2 * len];
        for n in 0..len {
            x[n] = (input[2 * n] - 0.5) * scale;
            x[len + n] = (input[2 * n + 1] - 0.5) * scale;
        }
        let p = &self.params;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            match *layer {
                Layer::Conv {
                    cin,
                    cout,
                    kernel,
                    stride,
                    pad,
                    len_in,
                    len_out,
                    pool,
                    len_pooled,
                    w,
                    b,
                } => {
                    let plen = len_in + 2 * pad;
                    let mut padded = vec![0.0; cin * plen];
                    for c in 0..cin {
                        padded[c * plen + pad..c * plen + pad + len_in]
                            .copy_from_slice(&x[c * len_in..(c + 1) * len_in]);
                    }
                    let mut pre = vec![0.0; cout * len_out];
                    for o in 0..cout {
                        let row = &mut pre[o * len_out..(o + 1) * len_out];
                        row.fill(p[b + o]);
                        for c in 0..cin {
                            let src = &padded[c * plen..(c + 1) * plen];
                            for t in 0..kernel {
                                let wt = p[w + (o * cin + c) * kernel + t];
                                if stride == 1 {
                                    for (y, v) in row.iter_mut().zip(&src[t..t + len_out]) {
                                        *y += wt * v;
                                    }
                                } else {
                                    for (j, y) in row.iter_mut().enumerate() {
                                        *y += wt * src[j * stride + t];
                                    }
                                }
                            }
                        }
                    }
                    let mut out = vec![0.0; cout * len_pooled];
                    let mut argmax = vec![0; cout * len_pooled];
                    for o in 0..cout {
                        for j in 0..len_pooled {
                            let base = o * len_out + j * pool;
                            let mut best = base;
                            for q in base + 1..base + pool {
                                if pre[q] > pre[best] {
                                    best = q;
                                }
                            }
                            argmax[o * len_pooled + j] = best;
                            out[o * len_pooled + j] = pre[best].max(0.0);
                        }
                    }
                    caches.push(Cache::Conv { padded, pre, argmax });
                    x = out;
                }
                Layer::Dense {
                    n_in,
                    n_out,
                    relu,
                    w,
                    b,
                } => {
                    let mut pre = p[b..b + n_out].to_vec();
                    for (o, y) in pre.iter_mut().enumerate() {
                        let row = &p[w + o * n_in..w + (o + 1) * n_in];
                        *y += row.iter().zip(&x).map(|(a, v)| a * v).sum::<f64>();
                    }
                    let out = if relu {
                        pre.iter().map(|v| v.max(0.0)).collect()
                    } else {
                        pre.clone()
                    };
                    caches.push(Cache::Dense { input: x, pre });
                    x = out;
                }
            }
        }
        Ok(Trace { caches, logits: x })
    }

    /// Back-propagates `dlogits`. Adds parameter gradients into `grads` when
    /// given; returns the unit-domain input gradient when `want_input`.
    fn backward(&self, trace: &Trace, dlogits: Vec<f64>, mut grads: Option<&mut [f64]>, want_input: bool) -> Vec<f64> {
        let p = &self.params;
        let mut g = dlogits;
        for (li, (layer, cache)) in self.layers.iter().zip(&trace.caches).enumerate().rev() {
            let need_input_grad = want_input || li > 0;
            match (layer, cache) {
                (
                    &Layer::Dense {
                        n_in,
                        n_out,
                        relu,
                        w,
                        b,
                    },
                    Cache::Dense { input, pre },
                ) => {
                    if relu {
                        for (gi, &z) in g.iter_mut().zip(pre) {
                            if z <= 0.0 {
                                *gi = 0.0;
                            }
                        }
                    }
                    if let Some(grads) = grads.as_deref_mut() {
                        for o in 0..n_out {
                            let go = g[o];
                            if go == 0.0 {
                                continue;
                            }
                            grads[b + o] += go;
                            for (d, v) in grads[w + o * n_in..w + (o + 1) * n_in].iter_mut().zip(input) {
                                *d += go * v;
                            }
                        }
                    }
                    if need_input_grad {
                        let mut gin = vec![0.0; n_in];
                        for o in 0..n_out {
                            let go = g[o];
                            if go == 0.0 {
                                continue;
                            }
                            for (d, a) in gin.iter_mut().zip(&p[w + o * n_in..w + (o + 1) * n_in]) {
                                *d += go * a;
                            }
                        }
                        g = gin;
                    }
                }
                (
                    &Layer::Conv {
                        cin,
                        cout,
                        kernel,
                        stride,
                        pad,
                        len_in,
                        len_out,
                        len_pooled,
                        w,
                        b,
                        ..
                    },
                    Cache::Conv { padded, pre, argmax },
                ) => {
                    let mut gpre = vec![0.0; cout * len_out];
                    for (k, &idx) in argmax.iter().enumerate() {
                        if pre[idx] > 0.0 {
                            gpre[idx] += g[k];
                        }
                    }
                    debug_assert_eq!(argmax.len(), cout * len_pooled);
                    let plen = len_in + 2 * pad;
                    if let Some(grads) = grads.as_deref_mut() {
                        for o in 0..cout {
                            let go = &gpre[o * len_out..(o + 1) * len_out];
                            grads[b + o] += go.iter().sum::<f64>();
                            for c in 0..cin {
                                let src = &padded[c * plen..(c + 1) * plen];
                                for t in 0..kernel {
                                    let dot: f64 = if stride == 1 {
                                        go.iter().zip(&src[t..t + len_out]).map(|(a, v)| a * v).sum()
                                    } else {
                                        go.iter().enumerate().map(|(j, a)| a * src[j * stride + t]).sum()
                                    };
                                    grads[w + (o * cin + c) * kernel + t] += dot;
                                }
                            }
                        }
                    }
                    if need_input_grad {
                        let mut gpad = vec![0.0; cin * plen];
                        for o in 0..cout {
                            let go = &gpre[o * len_out..(o + 1) * len_out];
                            for c in 0..cin {
                                let dst = &mut gpad[c * plen..(c + 1) * plen];
                                for t in 0..kernel {
                                    let wt = p[w + (o * cin + c) * kernel + t];
                                    if stride == 1 {
                                        for (d, a) in dst[t..t + len_out].iter_mut().zip(go) {
                                            *d += wt * a;
                                        }
                                    } else {
                                        for (j, a) in go.iter().enumerate() {
                                            dst[j * stride + t] += wt * a;
                                        }
                                    }
                                }
                            }
                        }
                        let mut gin = vec![0.0; cin * len_in];
                        for c in 0..cin {
                            gin[c * len_in..(c + 1) * len_in]
                                .copy_from_slice(&gpad[c * plen + pad..c * plen + pad + len_in]);
                        }
                        g = gin;
                    }
                }
                _ => unreachable!("cache kind always matches its layer"),
            }
        }
        if !want_input {
            return Vec::new();
        }
        let len = self.arch.frame_len;
        let scale = 2.0 * self.arch.clip_amp;
        let mut out = vec![0.0; 2 * len];
        for n in 0..len {
            out[2 * n] = g[n] * scale;
            out[2 * n + 1] = g[len + n] * scale;
        }
        out
    }
}

fn plan(arch: &ArchSpec) -> Vec<Layer> {
    let mut layers = Vec::new();
    let mut offset = 0;
    let mut channels = 2;
    let mut len = arch.frame_len;
    for c in &arch.conv {
        let pad = c.kernel / 2;
        let len_out = (len + 2 * pad - c.kernel) / c.stride + 1;
        let len_pooled = len_out / c.pool;
        let w = offset;
        let b = w + c.filters * channels * c.kernel;
        offset = b + c.filters;
        layers.push(Layer::Conv {
            cin: channels,
            cout: c.filters,
            kernel: c.kernel,
            stride: c.stride,
            pad,
            len_in: len,
            len_out,
            pool: c.pool,
            len_pooled,
            w,
            b,
        });
        channels = c.filters;
        len = len_pooled;
    }
    let mut width = channels * len;
    let sizes = arch.hidden.iter().map(|&h| (h, true)).chain([(arch.num_classes, false)]);
    for (n_out, relu) in sizes {
        let w = offset;
        let b = w + n_out * width;
        offset = b + n_out;
        layers.push(Layer::Dense {
            n_in: width,
            n_out,
            relu,
            w,
            b,
        });
        width = n_out;
    }
    layers
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    -probs[label].max(PROB_FLOOR).ln()
}

/// d loss / d logits; zero where the probability floor is active.
fn loss_grad(probs: &[f64], label: usize) -> Vec<f64> {
    if probs[label] < PROB_FLOOR {
        return vec![0.0; probs.len()];
    }
    let mut g = probs.to_vec();
    g[label] -= 1.0;
    g
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConvSpec;

    fn tiny_arch() -> ArchSpec {
        ArchSpec {
            frame_len: 16,
            num_classes: 3,
            clip_amp: 4.0,
            conv: vec![ConvSpec {
                filters: 4,
                kernel: 3,
                stride: 1,
                pool: 2,
            }],
            hidden: vec![5],
        }
    }

    fn input(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..n).map(|_| rng.random_range(0.2..0.8)).collect()
    }

    #[test]
    fn untrained_model_is_uniform() {
        let m = Classifier::new(ArchSpec::desk(64, 8), 1).unwrap();
        let p = m.forward(&input(128, 2)).unwrap();
        for v in &p {
            assert_eq!(*v, 0.125);
        }
        let l = m.loss(&input(128, 2), 3).unwrap();
        assert!((l - 8f64.ln()).abs() < 1e-12);
        assert!((l - 2.0794).abs() < 1e-4);
        let g = m.input_gradient(&input(128, 2), 3).unwrap();
        assert!(g.grad.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn probabilities_normalize() {
        let m = Classifier::with_random_head(tiny_arch(), 5).unwrap();
        for s in 0..20 {
            let p = m.forward(&input(32, s)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn loss_floor_behaviour() {
        assert_eq!(cross_entropy(&[0.0, 1.0], 1), 0.0);
        let l = cross_entropy(&[0.0, 1.0], 0);
        assert!(l.is_finite() && l <= -PROB_FLOOR.ln() + 1e-12);
        assert!(loss_grad(&[0.0, 1.0], 0).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn shape_and_label_errors() {
        let m = Classifier::new(tiny_arch(), 1).unwrap();
        assert!(matches!(m.forward(&[0.5; 31]), Err(Error::Shape { .. })));
        assert!(matches!(m.loss(&[0.5; 32], 3), Err(Error::Config(_))));
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let m = Classifier::with_random_head(tiny_arch(), 9).unwrap();
        let x = input(32, 3);
        let mut grads = vec![0.0; m.num_params()];
        m.accumulate_gradients(&x, 1, &mut grads).unwrap();
        let h = 1e-6;
        for i in (0..m.num_params()).step_by(7) {
            let mut plus = m.clone();
            plus.params_mut()[i] += h;
            let mut minus = m.clone();
            minus.params_mut()[i] -= h;
            let fd = (plus.loss(&x, 1).unwrap() - minus.loss(&x, 1).unwrap()) / (2.0 * h);
            assert!((fd - grads[i]).abs() < 1e-6 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", grads[i]);
        }
    }

    #[test]
    fn strided_conv_gradient_matches_finite_differences() {
        let mut arch = tiny_arch();
        arch.conv[0].stride = 2;
        arch.conv[0].pool = 1;
        let m = Classifier::with_random_head(arch, 4).unwrap();
        let x = input(32, 8);
        let g = m.input_gradient(&x, 2).unwrap().grad;
        let h = 1e-6;
        for i in 0..x.len() {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (m.loss(&xp, 2).unwrap() - m.loss(&xm, 2).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn from_params_round_trip() {
        let m = Classifier::with_random_head(tiny_arch(), 2).unwrap();
        let back = Classifier::from_params(tiny_arch(), m.params().to_vec()).unwrap();
        assert_eq!(back, m);
        assert!(Classifier::from_params(tiny_arch(), vec![0.0; 3]).is_err());
    }
}
