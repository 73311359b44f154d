//! Training loop orchestration: dataset/model/region construction from a
//! config, per-epoch metric logging, and the post-training compression sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sfw_core::compress::{sweep, CompressionMethod, TradeoffRecord};
use sfw_core::numerics::{RngStream, StreamPurpose, Tensor};
use sfw_core::optim::{
    group_penalty_grad, lr_schedule, sfw_step, sgd_step, OptimizerState, RescaleMode,
    ScheduleKind, SgdState,
};
use sfw_core::regions::{
    estimate_init_norm, radius_from_diameter, resolve_fractional_k, FeasibleRegion, InitScheme,
    RegionKind,
};
use sfw_core::zoo::{load_idx, make_blobs, make_pattern_images, make_two_moons};
use sfw_core::zoo::{Dataset, IdxContent, Layer, Model, ParamRole, Split};

use crate::config::{
    DatasetConfig, ExperimentConfig, MethodConfig, ModelConfig, OptimizerKind, RegionConfig,
    RegionKindConfig, RescaleConfig, ScheduleConfig,
};
use crate::snapshot::save_model;
use crate::{HarnessError, Result};

pub const METRICS_HEADER: &str =
    "epoch,train_loss,train_acc,test_acc,grad_norm_mean,eff_lr_mean,wall_s";
pub const TRADEOFF_HEADER: &str = "method,config_id,seed,target,achieved,metric_pre,metric_post";

#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub grad_norm_mean: f64,
    pub eff_lr_mean: f64,
    /// Whole elapsed seconds, coarse on purpose so reruns stay byte-identical
    /// at this scale.
    pub wall_s: u64,
}

/// Final-model summary written next to the CSVs, consumed by `select`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_id: String,
    pub seed: u64,
    pub method: String,
    pub final_train_acc: f64,
    pub final_test_acc: f64,
}

pub struct SeedOutcome {
    pub model: Model,
    pub metrics: Vec<MetricsRecord>,
    pub tradeoff: Vec<TradeoffRecord>,
    pub summary: RunSummary,
}

pub fn build_dataset(cfg: &DatasetConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    let full = match cfg {
        DatasetConfig::TwoMoons { n, noise, .. } => make_two_moons(seed, *n, *noise),
        DatasetConfig::Blobs { n, classes, .. } => make_blobs(seed, *n, *classes),
        DatasetConfig::PatternImages {
            n,
            classes,
            size,
            noise,
            ..
        } => make_pattern_images(seed, *n, *classes, *size, *noise),
        DatasetConfig::Idx {
            images,
            labels,
            limit,
            ..
        } => {
            let IdxContent::Images(inputs) = load_idx(images)? else {
                return Err(HarnessError::Config(format!(
                    "{} does not hold images",
                    images.display()
                )));
            };
            let IdxContent::Labels(labels) = load_idx(labels)? else {
                return Err(HarnessError::Config("label file does not hold labels".into()));
            };
            if inputs.shape()[0] != labels.len() {
                return Err(HarnessError::Config(format!(
                    "IDX pair disagrees on sample count: {} vs {}",
                    inputs.shape()[0],
                    labels.len()
                )));
            }
            let full = Dataset {
                inputs,
                labels,
                split: Split::Train,
            };
            match limit {
                Some(l) if *l < full.len() => {
                    let keep: Vec<usize> = (0..*l).collect();
                    let (inputs, labels) = full.batch(&keep);
                    Dataset {
                        inputs,
                        labels,
                        split: Split::Train,
                    }
                }
                _ => full,
            }
        }
    };
    let train = (cfg.train_fraction() * full.len() as f64).floor() as usize;
    if train == 0 || train == full.len() {
        return Err(HarnessError::Config(
            "train_fraction leaves an empty split".into(),
        ));
    }
    Ok(full.split_at(train))
}

pub fn build_model(
    cfg: &ModelConfig,
    dataset: &Dataset,
    classes: usize,
    rng: &mut RngStream,
) -> Result<Model> {
    match cfg {
        ModelConfig::Mlp { hidden } => {
            let input: usize = dataset.inputs.shape()[1..].iter().product();
            let mut dims = vec![input];
            dims.extend_from_slice(hidden);
            dims.push(classes);
            Ok(Model::mlp(&dims, rng))
        }
        ModelConfig::Cnn {
            channels,
            kernel,
            batchnorm,
        } => {
            if dataset.inputs.shape().len() != 4 {
                return Err(HarnessError::Config(
                    "cnn model needs image-shaped inputs".into(),
                ));
            }
            Ok(Model::cnn(
                dataset.inputs.shape()[1],
                channels,
                *kernel,
                classes,
                *batchnorm,
                rng,
            ))
        }
    }
}

fn fan_in(layer: &Layer) -> usize {
    match layer {
        Layer::Dense { w, .. } => w.ncols(),
        Layer::Conv2d { w, .. } => {
            let s = w.shape();
            s[1] * s[2] * s[3]
        }
        _ => 0,
    }
}

/// Builds one feasible region per weight-carrying layer: the sparsity budget
/// is resolved from the fractional k, and the radius either comes straight
/// from the config or realizes the diameter `D = 2 w E||theta_init||`.
pub fn build_regions(
    region: &RegionConfig,
    model: &Model,
    samples: usize,
    seed: u64,
) -> Result<Vec<Option<FeasibleRegion>>> {
    let mut out = Vec::with_capacity(model.layers.len());
    for (li, layer) in model.layers.iter().enumerate() {
        let weight = layer.params().into_iter().find_map(|(t, role)| {
            (role == ParamRole::Weight).then(|| t.clone())
        });
        let Some(w) = weight else {
            out.push(None);
            continue;
        };
        let (kind, k, groups, dims) = match region.kind {
            RegionKindConfig::L2Ball => (RegionKind::L2Ball, 1, None, (0, 0)),
            RegionKindConfig::KSparsePolytope => (
                RegionKind::KSparsePolytope,
                resolve_fractional_k(region.k_fraction.unwrap(), w.len()),
                None,
                (0, 0),
            ),
            RegionKindConfig::KSupport => (
                RegionKind::KSupport,
                resolve_fractional_k(region.k_fraction.unwrap(), w.len()),
                None,
                (0, 0),
            ),
            RegionKindConfig::GroupKSupport => {
                let groups = match layer.filter_groups() {
                    Some(g) => g,
                    // dense fallback: one group per output neuron
                    None => {
                        let cols = w.ncols();
                        (0..w.nrows())
                            .map(|r| (r * cols..(r + 1) * cols).collect())
                            .collect()
                    }
                };
                let k = resolve_fractional_k(region.k_fraction.unwrap(), groups.len());
                (RegionKind::GroupKSupport, k, Some(groups), (0, 0))
            }
            RegionKindConfig::SpectralKSupport => {
                let view = layer.weight_matrix_view().expect("weight layers have views");
                let (n, m) = (view.nrows(), view.ncols());
                let k = resolve_fractional_k(region.k_fraction.unwrap(), n.min(m));
                (RegionKind::SpectralKSupport, k, None, (n, m))
            }
        };
        let tau = match (region.tau, region.w) {
            (Some(tau), _) => tau,
            (None, Some(mult)) => {
                let scheme = InitScheme::FanInGaussian { fan_in: fan_in(layer) };
                let mut rng = RngStream::new(seed, StreamPurpose::Noise).fork(li as u64);
                let est = estimate_init_norm(w.shape(), scheme, samples, &mut rng);
                radius_from_diameter(kind, 2.0 * mult * est, k)
            }
            (None, None) => unreachable!("validated"),
        };
        let built = match kind {
            RegionKind::L2Ball => FeasibleRegion::L2Ball { tau },
            RegionKind::KSparsePolytope => FeasibleRegion::KSparsePolytope { tau, k },
            RegionKind::KSupport => FeasibleRegion::KSupport { tau, k },
            RegionKind::GroupKSupport => FeasibleRegion::GroupKSupport {
                tau,
                k,
                groups: groups.unwrap(),
            },
            RegionKind::SpectralKSupport => FeasibleRegion::SpectralKSupport {
                tau,
                k,
                rows: dims.0,
                cols: dims.1,
            },
        };
        out.push(Some(built));
    }
    Ok(out)
}

fn schedule_kind(cfg: ScheduleConfig) -> ScheduleKind {
    match cfg {
        ScheduleConfig::Constant => ScheduleKind::Constant,
        ScheduleConfig::LinearDecay => ScheduleKind::LinearDecay,
    }
}

fn rescale_mode(cfg: RescaleConfig) -> RescaleMode {
    match cfg {
        RescaleConfig::None => RescaleMode::None,
        RescaleConfig::Diameter => RescaleMode::Diameter,
        RescaleConfig::Gradient => RescaleMode::Gradient,
        RescaleConfig::GradientTheory => RescaleMode::GradientTheory,
    }
}

fn method(cfg: MethodConfig) -> CompressionMethod {
    match cfg {
        MethodConfig::Magnitude => CompressionMethod::Magnitude,
        MethodConfig::Filter => CompressionMethod::Filter,
        MethodConfig::Lowrank => CompressionMethod::LowRank,
    }
}

fn eval_batch(model: &Model, inputs: &Tensor, labels: &[usize], flatten: bool) -> (f64, f64) {
    if flatten {
        let feat: usize = inputs.shape()[1..].iter().product();
        let flat = inputs
            .reshaped(vec![inputs.shape()[0], feat])
            .expect("same length");
        model.evaluate(&flat, labels)
    } else {
        model.evaluate(inputs, labels)
    }
}

/// Trains a model for one seed and runs the configured compression sweep.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutcome> {
    let (train, test) = build_dataset(&cfg.dataset, seed)?;
    let classes = train.num_classes().max(test.num_classes()).max(2);
    let mut init_rng = RngStream::new(seed, StreamPurpose::Init);
    let mut model = build_model(&cfg.model, &train, classes, &mut init_rng)?;
    let flatten = matches!(cfg.model, ModelConfig::Mlp { .. })
        && train.inputs.shape().len() != 2;

    let regions = match (&cfg.optimizer.kind, &cfg.region) {
        (OptimizerKind::Sfw, Some(region)) => {
            build_regions(region, &model, cfg.run.init_norm_samples, seed)?
        }
        _ => vec![None; model.layers.len()],
    };
    // project the initialization into its region
    for (li, region) in regions.iter().enumerate() {
        let Some(region) = region else { continue };
        let mut params = model.layers[li].params_mut();
        let (w, _) = params
            .iter_mut()
            .find(|(_, role)| *role == ParamRole::Weight)
            .expect("region on weight layer");
        **w = region.ensure_feasible(w)?;
    }

    let n_train = train.len();
    let iters_per_epoch = n_train.div_ceil(cfg.run.batch_size);
    let horizon = cfg.run.epochs * iters_per_epoch;
    let schedule = schedule_kind(cfg.optimizer.schedule);
    let rescale = rescale_mode(cfg.optimizer.rescale);
    let rho = cfg.optimizer.momentum;

    let mut sfw_states: Vec<Option<OptimizerState>> = regions
        .iter()
        .map(|r| {
            r.as_ref().map(|_| {
                OptimizerState::new(cfg.optimizer.eta0, schedule, rescale, rho, horizon)
            })
        })
        .collect();
    let mut sgd_states: Vec<Vec<SgdState>> = model
        .layers
        .iter()
        .map(|l| l.params().iter().map(|_| SgdState::default()).collect())
        .collect();

    let mut shuffle_rng = RngStream::new(seed, StreamPurpose::Shuffle);
    let mut metrics = Vec::with_capacity(cfg.run.epochs);
    let mut t = 0usize;
    for epoch in 1..=cfg.run.epochs {
        let started = Instant::now();
        let perm = shuffle_rng.permutation(n_train);
        let mut grad_norm_sum = 0.0;
        let mut eff_lr_sum = 0.0;
        let mut iters = 0usize;
        for chunk in perm.chunks(cfg.run.batch_size) {
            let (bx, by) = train.batch(chunk);
            let bx = if flatten {
                let feat: usize = bx.shape()[1..].iter().product();
                bx.reshaped(vec![chunk.len(), feat]).expect("same length")
            } else {
                bx
            };
            let (loss, _, grads) = model.forward_backward(&bx, &by)?;
            if !loss.is_finite() {
                return Err(HarnessError::Core(sfw_core::Error::NonFiniteLoss));
            }
            let mut sq = 0.0;
            for lg in &grads {
                for g in &lg.grads {
                    let n = g.l2_norm();
                    sq += n * n;
                }
            }
            grad_norm_sum += sq.sqrt();
            let eta = lr_schedule(schedule, t, horizon, cfg.optimizer.eta0)?;
            let mut eta_hats = Vec::new();
            for li in 0..model.layers.len() {
                let mut params = model.layers[li].params_mut();
                for (pi, (p, role)) in params.iter_mut().enumerate() {
                    let g = &grads[li].grads[pi];
                    let constrained = *role == ParamRole::Weight && regions[li].is_some();
                    let updated = if constrained {
                        let region = regions[li].as_ref().unwrap();
                        let state = sfw_states[li].as_mut().unwrap();
                        let step = sfw_step(state, p, region, g)?;
                        eta_hats.push(step.eta_hat);
                        step.theta
                    } else {
                        let wd = if *role == ParamRole::Weight
                            && cfg.optimizer.kind == OptimizerKind::Sgd
                        {
                            cfg.optimizer.weight_decay
                        } else {
                            0.0
                        };
                        let g = if *role == ParamRole::Weight
                            && cfg.optimizer.kind == OptimizerKind::SgdGroupPenalty
                        {
                            match model_groups(p, li, &cfg.model) {
                                Some(groups) => g.axpy(
                                    1.0,
                                    &group_penalty_grad(
                                        p,
                                        &groups,
                                        cfg.optimizer.group_lambda,
                                    )?,
                                )?,
                                None => g.clone(),
                            }
                        } else {
                            g.clone()
                        };
                        sgd_step(&mut sgd_states[li][pi], p, &g, eta, wd, rho)?
                    };
                    **p = updated;
                }
            }
            eff_lr_sum += if eta_hats.is_empty() {
                eta
            } else {
                eta_hats.iter().sum::<f64>() / eta_hats.len() as f64
            };
            iters += 1;
            t += 1;
        }
        // feasibility must hold at every epoch boundary
        for (li, region) in regions.iter().enumerate() {
            let Some(region) = region else { continue };
            let (w, _) = model.layers[li]
                .params()
                .into_iter()
                .find(|(_, role)| *role == ParamRole::Weight)
                .expect("region on weight layer");
            if !region.is_feasible(w, 1e-9)? {
                return Err(HarnessError::Verification(format!(
                    "layer {li} left its region at epoch {epoch}: gauge {} > tau {}",
                    region.gauge(w)?,
                    region.tau()
                )));
            }
        }
        let (train_loss, train_acc) = eval_batch(&model, &train.inputs, &train.labels, flatten);
        let (_, test_acc) = eval_batch(&model, &test.inputs, &test.labels, flatten);
        metrics.push(MetricsRecord {
            epoch,
            train_loss,
            train_acc,
            test_acc,
            grad_norm_mean: grad_norm_sum / iters as f64,
            eff_lr_mean: eff_lr_sum / iters as f64,
            wall_s: started.elapsed().as_secs(),
        });
    }

    let evaluator = |m: &Model| eval_batch(m, &test.inputs, &test.labels, flatten).1;
    let tradeoff = sweep(
        &model,
        method(cfg.compression.method),
        &cfg.compression.targets,
        &cfg.run.config_id,
        seed,
        evaluator,
    )?;
    let last = metrics.last().expect("at least one epoch");
    let summary = RunSummary {
        config_id: cfg.run.config_id.clone(),
        seed,
        method: method(cfg.compression.method).as_str().to_string(),
        final_train_acc: last.train_acc,
        final_test_acc: last.test_acc,
    };
    Ok(SeedOutcome {
        model,
        metrics,
        tradeoff,
        summary,
    })
}

/// Filter groups for the group penalty: conv layers only.
fn model_groups(w: &Tensor, _li: usize, model: &ModelConfig) -> Option<Vec<Vec<usize>>> {
    if !matches!(model, ModelConfig::Cnn { .. }) {
        return None;
    }
    if w.shape().len() != 4 {
        return None;
    }
    let n = w.shape()[0];
    let per = w.len() / n;
    Some((0..n).map(|f| (f * per..(f + 1) * per).collect()).collect())
}

fn fmt(x: f64) -> String {
    format!("{x:.12}")
}

pub fn metrics_csv(metrics: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            m.epoch,
            fmt(m.train_loss),
            fmt(m.train_acc),
            fmt(m.test_acc),
            fmt(m.grad_norm_mean),
            fmt(m.eff_lr_mean),
            m.wall_s
        );
    }
    out
}

pub fn tradeoff_csv(records: &[TradeoffRecord]) -> String {
    let mut out = String::from(TRADEOFF_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method.as_str(),
            r.config_id,
            r.seed,
            fmt(r.target),
            fmt(r.achieved),
            fmt(r.metric_pre),
            fmt(r.metric_post)
        );
    }
    out
}

pub fn write_outputs(cfg: &ExperimentConfig, seed: u64, outcome: &SeedOutcome) -> Result<()> {
    let dir = &cfg.run.out_dir;
    fs::create_dir_all(dir)?;
    let stem = format!("{}_s{seed}", cfg.run.config_id);
    fs::write(dir.join(format!("{stem}_metrics.csv")), metrics_csv(&outcome.metrics))?;
    fs::write(
        dir.join(format!("{stem}_tradeoff.csv")),
        tradeoff_csv(&outcome.tradeoff),
    )?;
    fs::write(
        dir.join(format!("{stem}_summary.json")),
        serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"),
    )?;
    save_model(&outcome.model, &dir.join(format!("{stem}_model")))?;
    Ok(())
}

/// Trains every configured seed (or a single override) and writes all
/// artifacts into the output directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(out) = out_override {
        cfg.run.out_dir = out.to_path_buf();
    }
    let seeds = match seed_override {
        Some(s) => vec![s],
        None => cfg.run.seeds.clone(),
    };
    for seed in seeds {
        let outcome = run_seed(&cfg, seed)?;
        write_outputs(&cfg, seed, &outcome)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::load_config;
    use std::io::Write as _;

    fn write_cfg(dir: &Path, json: &str) -> ExperimentConfig {
        let path = dir.join("cfg.json");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(json.as_bytes()).unwrap();
        load_config(&path).unwrap()
    }

    fn tiny_sfw_cfg(dir: &Path) -> ExperimentConfig {
        write_cfg(
            dir,
            &format!(
                r#"{{
                "dataset": {{"kind": "two_moons", "n": 120, "noise": 0.1, "train_fraction": 0.75}},
                "model": {{"kind": "mlp", "hidden": [16]}},
                "optimizer": {{"kind": "sfw", "eta0": 0.2, "rescale": "gradient"}},
                "region": {{"kind": "k_support", "k_fraction": 0.2, "w": 2.0}},
                "compression": {{"method": "magnitude", "targets": [0.0, 0.5, 0.9]}},
                "run": {{"epochs": 3, "batch_size": 16, "seeds": [1],
                         "out_dir": "{}", "config_id": "tiny"}}
            }}"#,
                dir.join("out").display()
            ),
        )
    }

    #[test]
    fn sfw_run_is_feasible_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_sfw_cfg(dir.path());
        let a = run_seed(&cfg, 1).unwrap();
        let b = run_seed(&cfg, 1).unwrap();
        assert_eq!(metrics_csv(&a.metrics), metrics_csv(&b.metrics));
        assert_eq!(tradeoff_csv(&a.tradeoff), tradeoff_csv(&b.tradeoff));
        assert_eq!(a.metrics.len(), 3);
    }

    #[test]
    fn zero_target_keeps_metric() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_sfw_cfg(dir.path());
        let outcome = run_seed(&cfg, 2).unwrap();
        let first = &outcome.tradeoff[0];
        assert_eq!(first.target, 0.0);
        assert_eq!(first.metric_pre, first.metric_post);
    }

    #[test]
    fn outputs_written_with_exact_headers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_sfw_cfg(dir.path());
        run_experiment(&cfg, None, None).unwrap();
        let metrics =
            fs::read_to_string(cfg.run.out_dir.join("tiny_s1_metrics.csv")).unwrap();
        assert!(metrics.starts_with(METRICS_HEADER));
        let tradeoff =
            fs::read_to_string(cfg.run.out_dir.join("tiny_s1_tradeoff.csv")).unwrap();
        assert!(tradeoff.starts_with(TRADEOFF_HEADER));
        assert!(cfg.run.out_dir.join("tiny_s1_model.json").exists());
        assert!(cfg.run.out_dir.join("tiny_s1_model.bin").exists());
    }

    #[test]
    fn sgd_baseline_trains() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write_cfg(
            dir.path(),
            &format!(
                r#"{{
                "dataset": {{"kind": "blobs", "n": 90, "classes": 3, "train_fraction": 0.8}},
                "model": {{"kind": "mlp", "hidden": [8]}},
                "optimizer": {{"kind": "sgd", "eta0": 0.1, "weight_decay": 0.0005}},
                "compression": {{"method": "magnitude", "targets": [0.5]}},
                "run": {{"epochs": 5, "batch_size": 8, "seeds": [3],
                         "out_dir": "{}", "config_id": "sgd"}}
            }}"#,
                dir.path().join("out").display()
            ),
        );
        let outcome = run_seed(&cfg, 3).unwrap();
        let first = outcome.metrics.first().unwrap().train_loss;
        let last = outcome.metrics.last().unwrap().train_loss;
        assert!(last < first, "loss {first} -> {last} did not decrease");
    }
}
