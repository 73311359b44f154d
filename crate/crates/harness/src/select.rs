//! On-average-best grid selection with the dense-drop filter: configs whose
//! dense train accuracy falls more than a threshold below the reference are
//! excluded; among survivors the config with the highest mean post-compression
//! metric over the whole target grid wins.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::run::{RunSummary, TRADEOFF_HEADER};
use crate::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub method: String,
    pub config_id: String,
    pub seed: u64,
    pub target: f64,
    pub achieved: f64,
    pub metric_pre: f64,
    pub metric_post: f64,
}

pub fn parse_tradeoff_csv(text: &str) -> Result<Vec<TradeoffRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRADEOFF_HEADER => {}
        other => {
            return Err(HarnessError::Config(format!(
                "bad tradeoff header: {other:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(HarnessError::Config(format!(
                "tradeoff line {}: expected 7 fields, got {}",
                ln + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| HarnessError::Config(format!("tradeoff line {}: {e}", ln + 2)))
        };
        rows.push(TradeoffRow {
            method: fields[0].to_string(),
            config_id: fields[1].to_string(),
            seed: fields[2]
                .parse()
                .map_err(|e| HarnessError::Config(format!("tradeoff line {}: {e}", ln + 2)))?,
            target: num(fields[3])?,
            achieved: num(fields[4])?,
            metric_pre: num(fields[5])?,
            metric_post: num(fields[6])?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigScore {
    pub config_id: String,
    /// Dense (pre-compression) train accuracy, averaged over seeds.
    pub dense_train_acc: f64,
    /// Mean post-compression metric over all (target, seed) rows.
    pub mean_post: f64,
    pub passed_filter: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    pub reference_dense_acc: f64,
    pub drop_threshold: f64,
    pub scores: Vec<ConfigScore>,
    pub winner_unfiltered: String,
    /// Absent when every config fails the dense-drop filter.
    pub winner_filtered: Option<String>,
}

/// Scores every config id present in `rows`. `dense_acc` maps
/// `(config_id, seed)` to the final dense train accuracy of that run;
/// `reference` is the dense accuracy the filter compares against (use the
/// best dense run).
pub fn grid_select(
    rows: &[TradeoffRow],
    dense_acc: &BTreeMap<(String, u64), f64>,
    reference: f64,
    threshold: f64,
) -> Result<SelectionReport> {
    if rows.is_empty() {
        return Err(HarnessError::Config("no tradeoff rows to select from".into()));
    }
    let mut grouped: BTreeMap<String, Vec<&TradeoffRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry(row.config_id.clone()).or_default().push(row);
    }
    let grid: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.target.to_bits()).collect();
    let mut scores = Vec::new();
    for (config_id, rows) in &grouped {
        let this_grid: std::collections::BTreeSet<u64> =
            rows.iter().map(|r| r.target.to_bits()).collect();
        if this_grid != grid {
            return Err(HarnessError::Config(format!(
                "config {config_id} does not share the common target grid"
            )));
        }
        let mean_post = rows.iter().map(|r| r.metric_post).sum::<f64>() / rows.len() as f64;
        let seeds: std::collections::BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
        let mut dense = 0.0;
        for &seed in &seeds {
            dense += dense_acc
                .get(&(config_id.clone(), seed))
                .copied()
                .ok_or_else(|| {
                    HarnessError::Config(format!(
                        "missing dense accuracy for config {config_id} seed {seed}"
                    ))
                })?;
        }
        dense /= seeds.len() as f64;
        scores.push(ConfigScore {
            config_id: config_id.clone(),
            dense_train_acc: dense,
            mean_post,
            passed_filter: dense >= reference - threshold,
        });
    }
    let argmax = |pool: &[&ConfigScore]| -> Option<String> {
        pool.iter()
            .max_by(|a, b| {
                a.mean_post
                    .partial_cmp(&b.mean_post)
                    .unwrap()
                    // deterministic tie-break on the id
                    .then_with(|| b.config_id.cmp(&a.config_id))
            })
            .map(|s| s.config_id.clone())
    };
    let all: Vec<&ConfigScore> = scores.iter().collect();
    let survivors: Vec<&ConfigScore> = scores.iter().filter(|s| s.passed_filter).collect();
    Ok(SelectionReport {
        reference_dense_acc: reference,
        drop_threshold: threshold,
        winner_unfiltered: argmax(&all).expect("non-empty"),
        winner_filtered: argmax(&survivors),
        scores,
    })
}

/// Gathers all `*_tradeoff.csv` and `*_summary.json` files under `dir` and
/// selects. The reference dense accuracy defaults to the best dense run.
pub fn select_from_dir(
    dir: &Path,
    threshold: f64,
    reference: Option<f64>,
) -> Result<SelectionReport> {
    let mut rows = Vec::new();
    let mut dense: BTreeMap<(String, u64), f64> = BTreeMap::new();
    let mut names: Vec<_> = fs::read_dir(dir)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    names.sort();
    for path in names {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name.ends_with("_tradeoff.csv") {
            rows.extend(parse_tradeoff_csv(&fs::read_to_string(&path)?)?);
        } else if name.ends_with("_summary.json") {
            let summary: RunSummary = serde_json::from_str(&fs::read_to_string(&path)?)
                .map_err(|e| HarnessError::Config(format!("{name}: {e}")))?;
            dense.insert((summary.config_id, summary.seed), summary.final_train_acc);
        }
    }
    let reference = match reference {
        Some(r) => r,
        None => dense
            .values()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b)),
    };
    grid_select(&rows, &dense, reference, threshold)
}
