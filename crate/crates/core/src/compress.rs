//! Post-training compression operators: global magnitude pruning, per-layer
//! L1 filter pruning, and truncated-SVD layer factorization, plus the
//! accounting and sweep plumbing around them.
//!
//! All operators are pure: they copy the model, never mutating the input.
//! Pruning keeps tensor shapes (weights are zeroed, not removed); structural
//! parameter counts live in the report.

use crate::numerics::{svd_full, Tensor};
use crate::zoo::{Layer, Model};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionMethod {
    Magnitude,
    Filter,
    LowRank,
}

impl CompressionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CompressionMethod::Magnitude => "magnitude",
            CompressionMethod::Filter => "filter",
            CompressionMethod::LowRank => "lowrank",
        }
    }
}

/// Per-layer resolution of a compression target.
#[derive(Debug, Clone)]
pub enum LayerAction {
    /// Flat indices of weight entries to zero.
    Mask(Vec<usize>),
    /// Filter indices to zero in a conv layer.
    Filters(Vec<usize>),
    /// Truncation rank for the layer's matrix view.
    Rank(usize),
}

/// A compression target resolved against a concrete model.
#[derive(Debug, Clone)]
pub struct CompressionPlan {
    pub method: CompressionMethod,
    /// Sparsity, filter fraction, or parameter-reduction fraction in [0, 1].
    pub target: f64,
    /// `(layer index, action)` pairs; untouched layers are absent.
    pub actions: Vec<(usize, LayerAction)>,
}

#[derive(Debug, Clone)]
pub struct LayerSparsity {
    pub layer: usize,
    pub prunable: usize,
    pub zeros: usize,
}

/// Zero/parameter accounting for a compressed model.
#[derive(Debug, Clone)]
pub struct SparsityReport {
    pub prunable_total: usize,
    pub zeros: usize,
    pub per_layer: Vec<LayerSparsity>,
    /// Structural parameter counts; they differ from `prunable_total` only
    /// for low-rank factorization.
    pub params_before: usize,
    pub params_after: usize,
}

impl SparsityReport {
    pub fn achieved_sparsity(&self) -> f64 {
        if self.prunable_total == 0 {
            0.0
        } else {
            self.zeros as f64 / self.prunable_total as f64
        }
    }

    pub fn parameter_reduction(&self) -> f64 {
        if self.params_before == 0 {
            0.0
        } else {
            1.0 - self.params_after as f64 / self.params_before as f64
        }
    }
}

fn prunable_weight(layer: &Layer) -> Option<&Tensor> {
    layer
        .params()
        .into_iter()
        .find(|(_, role)| role.prunable())
        .map(|(t, _)| t)
}

/// Zeroes exactly `floor(s * P)` of the `P` pooled prunable weights, the
/// smallest magnitudes first, ties broken by (layer index, flat index).
pub fn magnitude_prune_global(model: &Model, sparsity: f64) -> (Model, SparsityReport) {
    assert!((0.0..=1.0).contains(&sparsity), "sparsity must be in [0, 1]");
    let mut pool: Vec<(f64, usize, usize)> = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        if let Some(w) = prunable_weight(layer) {
            for (ci, &v) in w.data().iter().enumerate() {
                pool.push((v.abs(), li, ci));
            }
        }
    }
    let budget = (sparsity * pool.len() as f64).floor() as usize;
    pool.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut per_layer: Vec<Vec<usize>> = vec![Vec::new(); model.layers.len()];
    for &(_, li, ci) in pool.iter().take(budget) {
        per_layer[li].push(ci);
    }
    let actions = per_layer
        .into_iter()
        .enumerate()
        .filter(|(li, idx)| !idx.is_empty() || prunable_weight(&model.layers[*li]).is_some())
        .map(|(li, idx)| (li, LayerAction::Mask(idx)))
        .collect();
    let plan = CompressionPlan {
        method: CompressionMethod::Magnitude,
        target: sparsity,
        actions,
    };
    apply_mask_plan(model, &plan)
}

/// Zeroes `floor(f * n)` smallest-L1 filters in every conv layer with `n`
/// filters (ties: lowest filter index). Biases and normalization stay.
pub fn filter_prune_local(model: &Model, fraction: f64) -> (Model, SparsityReport) {
    assert!(
        (0.0..1.0).contains(&fraction) || fraction == 0.0,
        "fraction must be in [0, 1)"
    );
    let mut actions = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        let Layer::Conv2d { w, .. } = layer else {
            continue;
        };
        let n = w.shape()[0];
        let per = w.len() / n;
        let budget = (fraction * n as f64).floor() as usize;
        let mut norms: Vec<(f64, usize)> = (0..n)
            .map(|f| {
                let l1: f64 = w.data()[f * per..(f + 1) * per]
                    .iter()
                    .map(|v| v.abs())
                    .sum();
                (l1, f)
            })
            .collect();
        norms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let picked: Vec<usize> = norms.iter().take(budget).map(|&(_, f)| f).collect();
        actions.push((li, LayerAction::Filters(picked)));
    }
    let plan = CompressionPlan {
        method: CompressionMethod::Filter,
        target: fraction,
        actions,
    };
    apply_mask_plan(model, &plan)
}

fn apply_mask_plan(model: &Model, plan: &CompressionPlan) -> (Model, SparsityReport) {
    let mut out = model.clone();
    for (li, action) in &plan.actions {
        let Some((w, _)) = out.layers[*li]
            .params_mut()
            .into_iter()
            .find(|(_, role)| role.prunable())
        else {
            continue;
        };
        match action {
            LayerAction::Mask(indices) => {
                for &ci in indices {
                    w.data_mut()[ci] = 0.0;
                }
            }
            LayerAction::Filters(filters) => {
                let n = w.shape()[0];
                let per = w.len() / n;
                for &f in filters {
                    for v in &mut w.data_mut()[f * per..(f + 1) * per] {
                        *v = 0.0;
                    }
                }
            }
            LayerAction::Rank(_) => unreachable!("rank actions are not masks"),
        }
    }
    let report = sparsity_report(&out);
    (out, report)
}

/// Counts zeros among prunable weights of `model`.
pub fn sparsity_report(model: &Model) -> SparsityReport {
    let mut per_layer = Vec::new();
    let mut total = 0;
    let mut zeros = 0;
    for (li, layer) in model.layers.iter().enumerate() {
        if let Some(w) = prunable_weight(layer) {
            let z = w.data().iter().filter(|v| **v == 0.0).count();
            per_layer.push(LayerSparsity {
                layer: li,
                prunable: w.len(),
                zeros: z,
            });
            total += w.len();
            zeros += z;
        }
    }
    let params = model.num_params();
    SparsityReport {
        prunable_total: total,
        zeros,
        per_layer,
        params_before: params,
        params_after: params,
    }
}

/// Conv matrix-view dimensions `(n, c*d*d)` of a layer, if it has one.
fn matrix_dims(layer: &Layer) -> Option<(usize, usize)> {
    match layer {
        Layer::Conv2d { w, .. } => {
            let s = w.shape();
            Some((s[0], s[1] * s[2] * s[3]))
        }
        _ => None,
    }
}

/// Uniform per-layer truncation ranks for a parameter-reduction target `s`:
/// for a conv layer viewed as an `n x m` matrix (`m = c*d*d`),
/// `t = clamp(floor((1 - s) * n * m / (m + n)), 1, min(n, m))`.
pub fn select_ranks(model: &Model, reduction: f64) -> CompressionPlan {
    assert!(
        (0.0..1.0).contains(&reduction),
        "reduction must be in [0, 1)"
    );
    let mut actions = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        if let Some((n, m)) = matrix_dims(layer) {
            let raw = ((1.0 - reduction) * (n * m) as f64 / (m + n) as f64).floor() as usize;
            let t = raw.clamp(1, n.min(m));
            actions.push((li, LayerAction::Rank(t)));
        }
    }
    CompressionPlan {
        method: CompressionMethod::LowRank,
        target: reduction,
        actions,
    }
}

/// Achieved global parameter reduction of a rank plan over the layers it
/// touches: `1 - sum t(n+m) / sum nm`.
pub fn rank_plan_reduction(model: &Model, plan: &CompressionPlan) -> f64 {
    let mut before = 0usize;
    let mut after = 0usize;
    for (li, action) in &plan.actions {
        let LayerAction::Rank(t) = action else { continue };
        let (n, m) = matrix_dims(&model.layers[*li]).expect("rank action on matrix layer");
        before += n * m;
        after += t * (n + m);
    }
    if before == 0 {
        0.0
    } else {
        1.0 - after as f64 / before as f64
    }
}

/// Splits a dense or conv layer into two consecutive layers through the
/// rank-`t` truncated SVD of its matrix view: the first applies
/// `Sigma_t V_t^T` (bias-free), the second applies `U_t` and keeps the
/// original bias. Conv layers yield a spatial-`d` layer with `t` filters
/// followed by a 1x1 layer with `n` filters.
pub fn decompose_layer(layer: &Layer, t: usize) -> Result<(Layer, Layer)> {
    let (mat, bias, conv_shape) = match layer {
        Layer::Dense { w, b } => (w.clone(), b.clone(), None),
        Layer::Conv2d { w, b } => {
            let s = w.shape().to_vec();
            let mat = w.reshaped(vec![s[0], s[1] * s[2] * s[3]]).unwrap();
            (mat, b.clone(), Some(s))
        }
        _ => {
            return Err(Error::RankOutOfRange { t, max: 0 });
        }
    };
    let (n, m) = (mat.nrows(), mat.ncols());
    let max = n.min(m);
    if t < 1 || t > max {
        return Err(Error::RankOutOfRange { t, max });
    }
    let f = svd_full(&mat)?;
    // first factor: rows sigma_i * v_i^T, a [t, m] map
    let mut wa = Tensor::zeros(vec![t, m]);
    for i in 0..t {
        for j in 0..m {
            wa.data_mut()[i * m + j] = f.sigma[i] * f.v.at(j, i);
        }
    }
    // second factor: leading t columns of U, a [n, t] map
    let mut wb = Tensor::zeros(vec![n, t]);
    for r in 0..n {
        for i in 0..t {
            wb.data_mut()[r * t + i] = f.u.at(r, i);
        }
    }
    match conv_shape {
        Some(s) => {
            let (c, d) = (s[1], s[2]);
            Ok((
                Layer::Conv2d {
                    w: wa.reshaped(vec![t, c, d, d]).unwrap(),
                    b: Tensor::zeros(vec![t]),
                },
                Layer::Conv2d {
                    w: wb.reshaped(vec![n, t, 1, 1]).unwrap(),
                    b: bias,
                },
            ))
        }
        None => Ok((
            Layer::Dense {
                w: wa,
                b: Tensor::zeros(vec![t]),
            },
            Layer::Dense {
                w: wb,
                b: bias,
            },
        )),
    }
}

/// Applies a rank plan, replacing each planned layer by its two factors.
pub fn apply_rank_plan(model: &Model, plan: &CompressionPlan) -> Result<Model> {
    let mut layers = Vec::new();
    for (li, layer) in model.layers.iter().enumerate() {
        let planned = plan.actions.iter().find(|(i, _)| *i == li);
        match planned {
            Some((_, LayerAction::Rank(t))) => {
                let (a, b) = decompose_layer(layer, *t)?;
                layers.push(a);
                layers.push(b);
            }
            _ => layers.push(layer.clone()),
        }
    }
    Ok(Model { layers })
}

/// One accuracy-vs-compression data point.
#[derive(Debug, Clone)]
pub struct TradeoffRecord {
    pub method: CompressionMethod,
    pub config_id: String,
    pub seed: u64,
    pub target: f64,
    pub achieved: f64,
    pub metric_pre: f64,
    pub metric_post: f64,
}

/// Compresses a fresh copy of `model` at every target (sorted ascending)
/// and evaluates the metric before and after. The input model is never
/// mutated.
pub fn sweep<F>(
    model: &Model,
    method: CompressionMethod,
    targets: &[f64],
    config_id: &str,
    seed: u64,
    evaluator: F,
) -> Result<Vec<TradeoffRecord>>
where
    F: Fn(&Model) -> f64,
{
    assert!(
        targets.windows(2).all(|w| w[0] <= w[1]),
        "targets must be sorted ascending"
    );
    let metric_pre = evaluator(model);
    let mut records = Vec::with_capacity(targets.len());
    for &target in targets {
        let (compressed, achieved) = match method {
            CompressionMethod::Magnitude => {
                let (m, r) = magnitude_prune_global(model, target);
                (m, r.achieved_sparsity())
            }
            CompressionMethod::Filter => {
                let (m, r) = filter_prune_local(model, target);
                (m, r.achieved_sparsity())
            }
            CompressionMethod::LowRank => {
                let plan = select_ranks(model, target);
                let achieved = rank_plan_reduction(model, &plan);
                (apply_rank_plan(model, &plan)?, achieved)
            }
        };
        records.push(TradeoffRecord {
            method,
            config_id: config_id.to_string(),
            seed,
            target,
            achieved,
            metric_pre,
            metric_post: evaluator(&compressed),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{RngStream, StreamPurpose};
    use crate::zoo::ParamRole;

    fn dense_model(w: Vec<f64>, shape: Vec<usize>) -> Model {
        let out = shape[0];
        Model {
            layers: vec![Layer::Dense {
                w: Tensor::new(shape, w).unwrap(),
                b: Tensor::zeros(vec![out]),
            }],
        }
    }

    fn weight(model: &Model, li: usize) -> &Tensor {
        match &model.layers[li] {
            Layer::Dense { w, .. } | Layer::Conv2d { w, .. } => w,
            _ => panic!("no weight"),
        }
    }

    #[test]
    fn magnitude_half_sparsity_on_four_weights() {
        let m = dense_model(vec![0.5, -0.1, 0.3, -0.7], vec![1, 4]);
        let (pruned, report) = magnitude_prune_global(&m, 0.5);
        assert_eq!(weight(&pruned, 0).data(), &[0.5, 0.0, 0.0, -0.7]);
        assert_eq!(report.zeros, 2);
        assert!((report.achieved_sparsity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn magnitude_extremes() {
        let m = dense_model(vec![0.5, -0.1, 0.3, -0.7], vec![1, 4]);
        let (same, _) = magnitude_prune_global(&m, 0.0);
        assert_eq!(weight(&same, 0).data(), weight(&m, 0).data());
        let (all, report) = magnitude_prune_global(&m, 1.0);
        assert!(weight(&all, 0).data().iter().all(|v| *v == 0.0));
        assert_eq!(report.zeros, 4);
    }

    #[test]
    fn magnitude_count_matches_floor_oracle() {
        let mut rng = RngStream::new(17, StreamPurpose::Noise);
        let data: Vec<f64> = (0..37).map(|_| rng.next_normal()).collect();
        let m = dense_model(data, vec![1, 37]);
        for s in [0.1, 0.25, 0.33, 0.8, 0.999] {
            let (_, report) = magnitude_prune_global(&m, s);
            assert_eq!(report.zeros, (s * 37.0).floor() as usize);
        }
    }

    #[test]
    fn magnitude_zero_sets_nest() {
        let mut rng = RngStream::new(23, StreamPurpose::Noise);
        let data: Vec<f64> = (0..50).map(|_| rng.next_normal()).collect();
        let m = dense_model(data, vec![5, 10]);
        let mut prev: Vec<usize> = Vec::new();
        for s in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
            let (pruned, _) = magnitude_prune_global(&m, s);
            let zeros: Vec<usize> = weight(&pruned, 0)
                .data()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v == 0.0)
                .map(|(i, _)| i)
                .collect();
            assert!(prev.iter().all(|i| zeros.contains(i)));
            prev = zeros;
        }
    }

    fn conv_model(filters: Vec<Vec<f64>>) -> Model {
        let n = filters.len();
        let data: Vec<f64> = filters.into_iter().flatten().collect();
        let per = data.len() / n;
        assert_eq!(per, 4);
        Model {
            layers: vec![Layer::Conv2d {
                w: Tensor::new(vec![n, 4, 1, 1], data).unwrap(),
                b: Tensor::new(vec![n], vec![0.1; n]).unwrap(),
            }],
        }
    }

    #[test]
    fn filter_prune_smallest_l1() {
        // filter L1 norms 4, 1, 3
        let m = conv_model(vec![
            vec![1.0, 1.0, 1.0, 1.0],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![1.5, 0.5, 0.5, 0.5],
        ]);
        let (pruned, report) = filter_prune_local(&m, 1.0 / 3.0);
        let w = weight(&pruned, 0);
        assert!(w.data()[4..8].iter().all(|v| *v == 0.0));
        assert!(w.data()[0..4].iter().all(|v| *v != 0.0));
        assert_eq!(report.zeros, 4);
        // bias untouched
        let Layer::Conv2d { b, .. } = &pruned.layers[0] else {
            panic!()
        };
        assert_eq!(b.data(), &[0.1, 0.1, 0.1]);
    }

    #[test]
    fn filter_prune_tie_breaks_to_lowest_index() {
        let m = conv_model(vec![
            vec![0.5; 4],
            vec![0.5; 4],
            vec![0.5; 4],
        ]);
        let (pruned, _) = filter_prune_local(&m, 1.0 / 3.0);
        let w = weight(&pruned, 0);
        assert!(w.data()[0..4].iter().all(|v| *v == 0.0));
        assert!(w.data()[4..12].iter().all(|v| *v != 0.0));
    }

    #[test]
    fn filter_prune_zero_fraction_is_identity() {
        let mut rng = RngStream::new(5, StreamPurpose::Init);
        let m = Model::cnn(1, &[4], 3, 2, false, &mut rng);
        let (pruned, report) = filter_prune_local(&m, 0.0);
        assert_eq!(weight(&pruned, 0).data(), weight(&m, 0).data());
        assert_eq!(report.zeros, 0);
    }

    #[test]
    fn rank_formula_matches_parameter_arithmetic() {
        // n=8 filters, c=4 channels, d=3: matrix view 8 x 36, 288 params
        let mut rng = RngStream::new(6, StreamPurpose::Init);
        let m = Model::cnn(4, &[8], 3, 2, false, &mut rng);
        let plan = select_ranks(&m, 1.0 - 88.0 / 288.0);
        let (_, LayerAction::Rank(t)) = &plan.actions[0] else {
            panic!()
        };
        assert_eq!(*t, 2);
        assert!((rank_plan_reduction(&m, &plan) - (1.0 - 88.0 / 288.0)).abs() < 1e-12);
    }

    #[test]
    fn rank_never_below_one_and_capped_at_zero_reduction() {
        let mut rng = RngStream::new(7, StreamPurpose::Init);
        let m = Model::cnn(4, &[8], 3, 2, false, &mut rng);
        let plan = select_ranks(&m, 0.999);
        let (_, LayerAction::Rank(t)) = &plan.actions[0] else {
            panic!()
        };
        assert_eq!(*t, 1);
        let plan0 = select_ranks(&m, 0.0);
        let (_, LayerAction::Rank(t0)) = &plan0.actions[0] else {
            panic!()
        };
        // floor(288 / 44) = 6, below the min(8, 36) cap
        assert_eq!(*t0, 6);
    }

    #[test]
    fn full_rank_decomposition_round_trips() {
        let mut rng = RngStream::new(8, StreamPurpose::Init);
        let m = Model::cnn(2, &[3], 3, 2, false, &mut rng);
        let Layer::Conv2d { w, .. } = &m.layers[0] else {
            panic!()
        };
        let full = w.shape()[0].min(w.shape()[1] * 9);
        let (a, b) = decompose_layer(&m.layers[0], full).unwrap();
        let two = Model {
            layers: vec![a, b],
        };
        let x = {
            let mut d = Vec::new();
            for _ in 0..2 * 2 * 5 * 5 {
                d.push(rng.next_normal());
            }
            Tensor::new(vec![2, 2, 5, 5], d).unwrap()
        };
        let y0 = Model {
            layers: vec![m.layers[0].clone()],
        }
        .forward(&x);
        let y1 = two.forward(&x);
        let worst = y0
            .data()
            .iter()
            .zip(y1.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-5, "max abs deviation {worst}");
    }

    #[test]
    fn dense_decomposition_parameter_count() {
        let mut rng = RngStream::new(9, StreamPurpose::Init);
        let data: Vec<f64> = (0..24).map(|_| rng.next_normal()).collect();
        let layer = Layer::Dense {
            w: Tensor::new(vec![4, 6], data).unwrap(),
            b: Tensor::zeros(vec![4]),
        };
        let (a, b) = decompose_layer(&layer, 2).unwrap();
        let wa = match &a {
            Layer::Dense { w, .. } => w.len(),
            _ => panic!(),
        };
        let wb = match &b {
            Layer::Dense { w, .. } => w.len(),
            _ => panic!(),
        };
        assert_eq!(wa + wb, 20);
    }

    #[test]
    fn truncation_error_matches_tail_singular_values() {
        let mut rng = RngStream::new(10, StreamPurpose::Init);
        let data: Vec<f64> = (0..30).map(|_| rng.next_normal()).collect();
        let w = Tensor::new(vec![5, 6], data).unwrap();
        let layer = Layer::Dense {
            w: w.clone(),
            b: Tensor::zeros(vec![5]),
        };
        let f = svd_full(&w).unwrap();
        for t in 1..=5 {
            let (a, b) = decompose_layer(&layer, t).unwrap();
            let (wa, wb) = match (&a, &b) {
                (Layer::Dense { w: wa, .. }, Layer::Dense { w: wb, .. }) => (wa, wb),
                _ => panic!(),
            };
            let approx = wb.matmul(wa);
            let mut err = 0.0f64;
            for (x, y) in w.data().iter().zip(approx.data()) {
                err += (x - y) * (x - y);
            }
            let tail: f64 = f.sigma[t..].iter().map(|s| s * s).sum();
            assert!(
                (err.sqrt() - tail.sqrt()).abs() < 1e-9,
                "t={t}: {} vs {}",
                err.sqrt(),
                tail.sqrt()
            );
        }
    }

    #[test]
    fn truncated_svd_beats_random_perturbations() {
        let mut rng = RngStream::new(11, StreamPurpose::Noise);
        let data: Vec<f64> = (0..20).map(|_| rng.next_normal()).collect();
        let w = Tensor::new(vec![4, 5], data).unwrap();
        let layer = Layer::Dense {
            w: w.clone(),
            b: Tensor::zeros(vec![4]),
        };
        let t = 2;
        let (a, b) = decompose_layer(&layer, t).unwrap();
        let (wa, wb) = match (&a, &b) {
            (Layer::Dense { w: wa, .. }, Layer::Dense { w: wb, .. }) => {
                (wa.clone(), wb.clone())
            }
            _ => panic!(),
        };
        let dist = |approx: &Tensor| -> f64 {
            w.data()
                .iter()
                .zip(approx.data())
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let best = dist(&wb.matmul(&wa));
        for _ in 0..10_000 {
            let jitter = |t: &Tensor, rng: &mut RngStream| {
                let data = t.data().iter().map(|v| v + 0.05 * rng.next_normal()).collect();
                Tensor::new(t.shape().to_vec(), data).unwrap()
            };
            let cand = jitter(&wb, &mut rng).matmul(&jitter(&wa, &mut rng));
            assert!(dist(&cand) >= best - 1e-12);
        }
    }

    #[test]
    fn rank_out_of_range_rejected() {
        let layer = Layer::Dense {
            w: Tensor::new(vec![2, 3], vec![1.0; 6]).unwrap(),
            b: Tensor::zeros(vec![2]),
        };
        assert!(matches!(
            decompose_layer(&layer, 0),
            Err(Error::RankOutOfRange { t: 0, max: 2 })
        ));
        assert!(matches!(
            decompose_layer(&layer, 3),
            Err(Error::RankOutOfRange { t: 3, max: 2 })
        ));
    }

    #[test]
    fn sweep_zero_target_keeps_metric() {
        let m = dense_model(vec![0.5, -0.1, 0.3, -0.7], vec![1, 4]);
        let records = sweep(
            &m,
            CompressionMethod::Magnitude,
            &[0.0, 0.5],
            "cfg",
            1,
            |model| weight(model, 0).data().iter().sum(),
        )
        .unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].metric_pre, records[0].metric_post);
        // masked vector 0.5 + 0 + 0 - 0.7
        assert!((records[1].metric_post - (-0.2)).abs() < 1e-12);
    }

    #[test]
    fn sweep_never_mutates_input() {
        let mut rng = RngStream::new(12, StreamPurpose::Init);
        let m = Model::cnn(1, &[4], 3, 2, false, &mut rng);
        let before = weight(&m, 0).data().to_vec();
        for method in [
            CompressionMethod::Magnitude,
            CompressionMethod::Filter,
            CompressionMethod::LowRank,
        ] {
            sweep(&m, method, &[0.25, 0.5], "cfg", 0, |_| 0.0).unwrap();
        }
        assert_eq!(weight(&m, 0).data(), &before[..]);
    }

    #[test]
    fn batchnorm_params_never_pruned() {
        let mut rng = RngStream::new(13, StreamPurpose::Init);
        let m = Model::cnn(1, &[3], 3, 2, true, &mut rng);
        let (pruned, _) = magnitude_prune_global(&m, 1.0);
        for layer in &pruned.layers {
            for (t, role) in layer.params() {
                if !role.prunable() {
                    assert!(t.data().iter().any(|v| *v != 0.0) || t.len() == 0 || matches!(role, ParamRole::Bias | ParamRole::Norm));
                }
            }
        }
        // gamma specifically stays at 1
        let Some(Layer::BatchNormLite { gamma, .. }) = pruned
            .layers
            .iter()
            .find(|l| matches!(l, Layer::BatchNormLite { .. }))
        else {
            panic!()
        };
        assert!(gamma.data().iter().all(|v| *v == 1.0));
    }
}
