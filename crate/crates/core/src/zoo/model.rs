use crate::numerics::{RngStream, Tensor};
use crate::regions::InitScheme;
use crate::{Error, Result};

/// Role of a parameter tensor inside a layer. Biases and normalization
/// parameters are never pruned or constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    Norm,
}

impl ParamRole {
    pub fn prunable(self) -> bool {
        matches!(self, ParamRole::Weight)
    }

    pub fn constrainable(self) -> bool {
        matches!(self, ParamRole::Weight)
    }
}

/// A layer of the desk-scale zoo. Convolutions are stride 1 with zero
/// padding preserving the spatial size (odd kernels only).
#[derive(Debug, Clone)]
pub enum Layer {
    /// `w: [out, in]`, `b: [out]`.
    Dense { w: Tensor, b: Tensor },
    /// `w: [filters, channels, d, d]`, `b: [filters]`.
    Conv2d { w: Tensor, b: Tensor },
    /// Per-channel affine normalization using batch statistics.
    BatchNormLite { gamma: Tensor, beta: Tensor },
    Relu,
    GlobalAvgPool,
    Flatten,
}

/// Gradients for one layer, aligned with `Layer::params` order.
#[derive(Debug, Clone, Default)]
pub struct LayerGrads {
    pub grads: Vec<Tensor>,
}

impl Layer {
    pub fn params(&self) -> Vec<(&Tensor, ParamRole)> {
        match self {
            Layer::Dense { w, b } | Layer::Conv2d { w, b } => {
                vec![(w, ParamRole::Weight), (b, ParamRole::Bias)]
            }
            Layer::BatchNormLite { gamma, beta } => {
                vec![(gamma, ParamRole::Norm), (beta, ParamRole::Norm)]
            }
            _ => vec![],
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&mut Tensor, ParamRole)> {
        match self {
            Layer::Dense { w, b } | Layer::Conv2d { w, b } => {
                vec![(w, ParamRole::Weight), (b, ParamRole::Bias)]
            }
            Layer::BatchNormLite { gamma, beta } => {
                vec![(gamma, ParamRole::Norm), (beta, ParamRole::Norm)]
            }
            _ => vec![],
        }
    }

    /// Filter count of a conv layer.
    pub fn filters(&self) -> Option<usize> {
        match self {
            Layer::Conv2d { w, .. } => Some(w.shape()[0]),
            _ => None,
        }
    }

    /// Index partition of the conv weight's flat data, one group per filter.
    pub fn filter_groups(&self) -> Option<Vec<Vec<usize>>> {
        match self {
            Layer::Conv2d { w, .. } => {
                let n = w.shape()[0];
                let per = w.len() / n;
                Some(
                    (0..n)
                        .map(|f| (f * per..(f + 1) * per).collect())
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// The `(n x c*d*d)` matrix view of a conv weight (a contiguous
    /// reshape), or the dense weight itself.
    pub fn weight_matrix_view(&self) -> Option<Tensor> {
        match self {
            Layer::Conv2d { w, .. } => {
                let s = w.shape();
                Some(w.reshaped(vec![s[0], s[1] * s[2] * s[3]]).unwrap())
            }
            Layer::Dense { w, .. } => Some(w.clone()),
            _ => None,
        }
    }
}

/// Ordered layer graph with a softmax cross-entropy head and manual
/// forward/backward passes.
#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<Layer>,
}

const BN_EPS: f64 = 1e-5;

impl Model {
    /// Dense/ReLU stack: `dims = [in, hidden..., classes]`.
    pub fn mlp(dims: &[usize], rng: &mut RngStream) -> Model {
        assert!(dims.len() >= 2);
        let mut layers = Vec::new();
        for i in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let scheme = InitScheme::FanInGaussian { fan_in };
            layers.push(Layer::Dense {
                w: scheme.sample(&[fan_out, fan_in], rng),
                b: Tensor::zeros(vec![fan_out]),
            });
            if i + 2 < dims.len() {
                layers.push(Layer::Relu);
            }
        }
        Model { layers }
    }

    /// Small convolutional net: conv/ReLU blocks (optionally normalized),
    /// global average pooling, and a dense head.
    pub fn cnn(
        in_channels: usize,
        conv_channels: &[usize],
        kernel: usize,
        classes: usize,
        batchnorm: bool,
        rng: &mut RngStream,
    ) -> Model {
        assert!(kernel % 2 == 1, "same padding needs an odd kernel");
        let mut layers = Vec::new();
        let mut c = in_channels;
        for &n in conv_channels {
            let fan_in = c * kernel * kernel;
            let scheme = InitScheme::FanInGaussian { fan_in };
            layers.push(Layer::Conv2d {
                w: scheme.sample(&[n, c, kernel, kernel], rng),
                b: Tensor::zeros(vec![n]),
            });
            if batchnorm {
                layers.push(Layer::BatchNormLite {
                    gamma: Tensor::new(vec![n], vec![1.0; n]).unwrap(),
                    beta: Tensor::zeros(vec![n]),
                });
            }
            layers.push(Layer::Relu);
            c = n;
        }
        layers.push(Layer::GlobalAvgPool);
        let scheme = InitScheme::FanInGaussian { fan_in: c };
        layers.push(Layer::Dense {
            w: scheme.sample(&[classes, c], rng),
            b: Tensor::zeros(vec![classes]),
        });
        Model { layers }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.params())
            .map(|(t, _)| t.len())
            .sum()
    }

    /// Logits for a batch.
    pub fn forward(&self, x: &Tensor) -> Tensor {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = forward_layer(layer, &cur);
        }
        cur
    }

    /// Mean cross-entropy loss and accuracy without gradients.
    pub fn evaluate(&self, x: &Tensor, labels: &[usize]) -> (f64, f64) {
        let logits = self.forward(x);
        let (loss, acc, _) = softmax_ce(&logits, labels);
        (loss, acc)
    }

    /// Full forward/backward pass: loss, accuracy, and per-layer gradients.
    pub fn forward_backward(
        &self,
        x: &Tensor,
        labels: &[usize],
    ) -> Result<(f64, f64, Vec<LayerGrads>)> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for layer in &self.layers {
            let next = forward_layer(layer, acts.last().unwrap());
            acts.push(next);
        }
        let (loss, acc, mut grad) = softmax_ce(acts.last().unwrap(), labels);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let mut layer_grads = vec![LayerGrads::default(); self.layers.len()];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let (gin, gparams) = backward_layer(layer, &acts[idx], &acts[idx + 1], &grad);
            layer_grads[idx] = gparams;
            grad = gin;
        }
        Ok((loss, acc, layer_grads))
    }
}

fn forward_layer(layer: &Layer, x: &Tensor) -> Tensor {
    match layer {
        Layer::Dense { w, b } => {
            let (bsz, fin) = (x.shape()[0], x.shape()[1]);
            let fout = w.nrows();
            let mut out = Tensor::zeros(vec![bsz, fout]);
            for bi in 0..bsz {
                for o in 0..fout {
                    let mut s = b.data()[o];
                    for i in 0..fin {
                        s += x.data()[bi * fin + i] * w.at(o, i);
                    }
                    out.data_mut()[bi * fout + o] = s;
                }
            }
            out
        }
        Layer::Conv2d { w, b } => conv_forward(w, b, x),
        Layer::BatchNormLite { gamma, beta } => bn_forward(gamma, beta, x),
        Layer::Relu => {
            let mut out = x.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            out
        }
        Layer::GlobalAvgPool => {
            let s = x.shape();
            let (bsz, c, h, wd) = (s[0], s[1], s[2], s[3]);
            let mut out = Tensor::zeros(vec![bsz, c]);
            let area = (h * wd) as f64;
            for bi in 0..bsz {
                for ci in 0..c {
                    let base = (bi * c + ci) * h * wd;
                    let mut sum = 0.0;
                    for k in 0..h * wd {
                        sum += x.data()[base + k];
                    }
                    out.data_mut()[bi * c + ci] = sum / area;
                }
            }
            out
        }
        Layer::Flatten => {
            let bsz = x.shape()[0];
            let feat: usize = x.shape()[1..].iter().product();
            x.reshaped(vec![bsz, feat]).unwrap()
        }
    }
}

fn backward_layer(
    layer: &Layer,
    input: &Tensor,
    output: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, LayerGrads) {
    match layer {
        Layer::Dense { w, .. } => {
            let (bsz, fin) = (input.shape()[0], input.shape()[1]);
            let fout = w.nrows();
            let mut gin = Tensor::zeros(vec![bsz, fin]);
            let mut gw = Tensor::zeros(vec![fout, fin]);
            let mut gb = Tensor::zeros(vec![fout]);
            for bi in 0..bsz {
                for o in 0..fout {
                    let go = grad_out.data()[bi * fout + o];
                    gb.data_mut()[o] += go;
                    for i in 0..fin {
                        gin.data_mut()[bi * fin + i] += go * w.at(o, i);
                        gw.data_mut()[o * fin + i] += go * input.data()[bi * fin + i];
                    }
                }
            }
            (
                gin,
                LayerGrads {
                    grads: vec![gw, gb],
                },
            )
        }
        Layer::Conv2d { w, .. } => conv_backward(w, input, grad_out),
        Layer::BatchNormLite { gamma, .. } => bn_backward(gamma, input, grad_out),
        Layer::Relu => {
            let mut gin = grad_out.clone();
            for (g, &y) in gin.data_mut().iter_mut().zip(output.data()) {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }
            (gin, LayerGrads::default())
        }
        Layer::GlobalAvgPool => {
            let s = input.shape();
            let (bsz, c, h, wd) = (s[0], s[1], s[2], s[3]);
            let area = (h * wd) as f64;
            let mut gin = Tensor::zeros(s.to_vec());
            for bi in 0..bsz {
                for ci in 0..c {
                    let g = grad_out.data()[bi * c + ci] / area;
                    let base = (bi * c + ci) * h * wd;
                    for k in 0..h * wd {
                        gin.data_mut()[base + k] = g;
                    }
                }
            }
            (gin, LayerGrads::default())
        }
        Layer::Flatten => (
            grad_out.reshaped(input.shape().to_vec()).unwrap(),
            LayerGrads::default(),
        ),
    }
}

fn conv_forward(w: &Tensor, bias: &Tensor, x: &Tensor) -> Tensor {
    let ws = w.shape();
    let (n, c, d) = (ws[0], ws[1], ws[2]);
    let xs = x.shape();
    let (bsz, h, wd) = (xs[0], xs[2], xs[3]);
    assert_eq!(xs[1], c, "channel mismatch");
    let o = d / 2;
    let mut out = Tensor::zeros(vec![bsz, n, h, wd]);
    for bi in 0..bsz {
        for f in 0..n {
            for r in 0..h {
                for s in 0..wd {
                    let mut acc = bias.data()[f];
                    for ci in 0..c {
                        for p in 0..d {
                            let rr = r as isize + p as isize - o as isize;
                            if rr < 0 || rr >= h as isize {
                                continue;
                            }
                            for q in 0..d {
                                let ss = s as isize + q as isize - o as isize;
                                if ss < 0 || ss >= wd as isize {
                                    continue;
                                }
                                acc += w.data()[((f * c + ci) * d + p) * d + q]
                                    * x.data()
                                        [((bi * c + ci) * h + rr as usize) * wd + ss as usize];
                            }
                        }
                    }
                    out.data_mut()[((bi * n + f) * h + r) * wd + s] = acc;
                }
            }
        }
    }
    out
}

fn conv_backward(w: &Tensor, x: &Tensor, grad_out: &Tensor) -> (Tensor, LayerGrads) {
    let ws = w.shape();
    let (n, c, d) = (ws[0], ws[1], ws[2]);
    let xs = x.shape();
    let (bsz, h, wd) = (xs[0], xs[2], xs[3]);
    let o = d / 2;
    let mut gin = Tensor::zeros(xs.to_vec());
    let mut gw = Tensor::zeros(ws.to_vec());
    let mut gb = Tensor::zeros(vec![n]);
    for bi in 0..bsz {
        for f in 0..n {
            for r in 0..h {
                for s in 0..wd {
                    let go = grad_out.data()[((bi * n + f) * h + r) * wd + s];
                    if go == 0.0 {
                        continue;
                    }
                    gb.data_mut()[f] += go;
                    for ci in 0..c {
                        for p in 0..d {
                            let rr = r as isize + p as isize - o as isize;
                            if rr < 0 || rr >= h as isize {
                                continue;
                            }
                            for q in 0..d {
                                let ss = s as isize + q as isize - o as isize;
                                if ss < 0 || ss >= wd as isize {
                                    continue;
                                }
                                let xi = ((bi * c + ci) * h + rr as usize) * wd + ss as usize;
                                let wi = ((f * c + ci) * d + p) * d + q;
                                gw.data_mut()[wi] += go * x.data()[xi];
                                gin.data_mut()[xi] += go * w.data()[wi];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        gin,
        LayerGrads {
            grads: vec![gw, gb],
        },
    )
}

fn bn_forward(gamma: &Tensor, beta: &Tensor, x: &Tensor) -> Tensor {
    let s = x.shape();
    let (bsz, c, h, wd) = (s[0], s[1], s[2], s[3]);
    let count = (bsz * h * wd) as f64;
    let mut out = x.clone();
    for ci in 0..c {
        let (mean, var) = channel_stats(x, ci);
        let inv = 1.0 / (var + BN_EPS).sqrt();
        for bi in 0..bsz {
            let base = (bi * c + ci) * h * wd;
            for k in 0..h * wd {
                let xh = (x.data()[base + k] - mean) * inv;
                out.data_mut()[base + k] = gamma.data()[ci] * xh + beta.data()[ci];
            }
        }
    }
    debug_assert!(count >= 1.0);
    out
}

fn channel_stats(x: &Tensor, ci: usize) -> (f64, f64) {
    let s = x.shape();
    let (bsz, c, h, wd) = (s[0], s[1], s[2], s[3]);
    let count = (bsz * h * wd) as f64;
    let mut mean = 0.0;
    for bi in 0..bsz {
        let base = (bi * c + ci) * h * wd;
        for k in 0..h * wd {
            mean += x.data()[base + k];
        }
    }
    mean /= count;
    let mut var = 0.0;
    for bi in 0..bsz {
        let base = (bi * c + ci) * h * wd;
        for k in 0..h * wd {
            let d = x.data()[base + k] - mean;
            var += d * d;
        }
    }
    (mean, var / count)
}

/// Backward through the batch statistics as well as the affine transform.
fn bn_backward(gamma: &Tensor, x: &Tensor, grad_out: &Tensor) -> (Tensor, LayerGrads) {
    let s = x.shape();
    let (bsz, c, h, wd) = (s[0], s[1], s[2], s[3]);
    let count = (bsz * h * wd) as f64;
    let mut gin = Tensor::zeros(s.to_vec());
    let mut ggamma = Tensor::zeros(vec![c]);
    let mut gbeta = Tensor::zeros(vec![c]);
    for ci in 0..c {
        let (mean, var) = channel_stats(x, ci);
        let inv = 1.0 / (var + BN_EPS).sqrt();
        let mut sum_dy = 0.0;
        let mut sum_dy_xh = 0.0;
        for bi in 0..bsz {
            let base = (bi * c + ci) * h * wd;
            for k in 0..h * wd {
                let xh = (x.data()[base + k] - mean) * inv;
                let dy = grad_out.data()[base + k];
                sum_dy += dy;
                sum_dy_xh += dy * xh;
            }
        }
        ggamma.data_mut()[ci] = sum_dy_xh;
        gbeta.data_mut()[ci] = sum_dy;
        for bi in 0..bsz {
            let base = (bi * c + ci) * h * wd;
            for k in 0..h * wd {
                let xh = (x.data()[base + k] - mean) * inv;
                let dy = grad_out.data()[base + k];
                gin.data_mut()[base + k] = gamma.data()[ci] * inv
                    * (dy - sum_dy / count - xh * sum_dy_xh / count);
            }
        }
    }
    (
        gin,
        LayerGrads {
            grads: vec![ggamma, gbeta],
        },
    )
}

/// Mean softmax cross-entropy: returns (loss, accuracy, dlogits).
fn softmax_ce(logits: &Tensor, labels: &[usize]) -> (f64, f64, Tensor) {
    let (bsz, k) = (logits.shape()[0], logits.shape()[1]);
    assert_eq!(bsz, labels.len());
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut grad = Tensor::zeros(vec![bsz, k]);
    for bi in 0..bsz {
        let row = &logits.data()[bi * k..(bi + 1) * k];
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut z = 0.0;
        for &v in row {
            z += (v - max).exp();
        }
        let logz = z.ln() + max;
        loss += logz - row[labels[bi]];
        // argmax with lowest-index tie-break
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == labels[bi] {
            correct += 1;
        }
        for j in 0..k {
            let p = (row[j] - logz).exp();
            grad.data_mut()[bi * k + j] =
                (p - if j == labels[bi] { 1.0 } else { 0.0 }) / bsz as f64;
        }
    }
    (loss / bsz as f64, correct as f64 / bsz as f64, grad)
}

/// Central-difference gradient check over a random coordinate subset.
/// Returns the maximum relative error against the analytic gradient.
pub fn finite_diff_check(
    model: &Model,
    x: &Tensor,
    labels: &[usize],
    eps: f64,
    min_coords: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    assert!(eps > 0.0);
    let (_, _, grads) = model.forward_backward(x, labels)?;
    // flatten (layer, param, coord) addresses
    let mut addresses = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        for (pi, (p, _)) in layer.params().iter().enumerate() {
            for ci in 0..p.len() {
                addresses.push((li, pi, ci));
            }
        }
    }
    let total = addresses.len();
    let picked: Vec<(usize, usize, usize)> = if total <= min_coords {
        addresses
    } else {
        let perm = rng.permutation(total);
        perm.iter().take(min_coords).map(|&i| addresses[i]).collect()
    };
    let mut worst = 0.0f64;
    for (li, pi, ci) in picked {
        let mut probe = model.clone();
        let loss_at = |m: &Model| -> f64 { m.evaluate(x, labels).0 };
        let base = {
            let mut params = probe.layers[li].params_mut();
            params[pi].0.data_mut()[ci]
        };
        {
            let mut params = probe.layers[li].params_mut();
            params[pi].0.data_mut()[ci] = base + eps;
        }
        let plus = loss_at(&probe);
        {
            let mut params = probe.layers[li].params_mut();
            params[pi].0.data_mut()[ci] = base - eps;
        }
        let minus = loss_at(&probe);
        let fd = (plus - minus) / (2.0 * eps);
        let an = grads[li].grads[pi].data()[ci];
        let rel = (fd - an).abs() / (1.0 + an.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
