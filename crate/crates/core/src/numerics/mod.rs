//! Deterministic dense-tensor kernels: storage, selection, group norms,
//! counter-based RNG streams, and singular value decomposition (full and
//! truncated).
//!
//! All arithmetic is carried out in `f64` with fixed left-to-right reduction
//! order, so identical inputs produce bit-identical outputs across runs and
//! platforms.

mod rng;
mod svd;
mod tensor;

pub use rng::{RngStream, StreamPurpose};
pub use svd::{svd_full, svd_topk, SvdFactors};
pub use tensor::Tensor;

use crate::{Error, Result};

/// Indices of the `k` largest entries of `|x|`, ties broken by lowest index,
/// returned in ascending index order.
pub fn topk_indices(x: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > x.len() {
        return Err(Error::BudgetExceedsDimension { k, dim: x.len() });
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    // stable sort by descending magnitude keeps the lowest index first on ties
    order.sort_by(|&a, &b| x[b].abs().partial_cmp(&x[a].abs()).unwrap());
    let mut picked: Vec<usize> = order[..k].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// One L2 norm per group. `groups` must be a disjoint partition covering all
/// indices of `x`.
pub fn group_norms(x: &[f64], groups: &[Vec<usize>]) -> Result<Vec<f64>> {
    validate_partition(x.len(), groups)?;
    Ok(groups
        .iter()
        .map(|g| {
            let mut s = 0.0;
            for &i in g {
                s += x[i] * x[i];
            }
            s.sqrt()
        })
        .collect())
}

/// Checks that `groups` is a disjoint partition of `0..dim`.
pub fn validate_partition(dim: usize, groups: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; dim];
    let mut count = 0usize;
    for g in groups {
        for &i in g {
            if i >= dim || seen[i] {
                return Err(Error::InvalidPartition { dim });
            }
            seen[i] = true;
            count += 1;
        }
    }
    if count != dim {
        return Err(Error::InvalidPartition { dim });
    }
    Ok(())
}

/// L2 norm with fixed reduction order.
pub fn l2_norm(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v * v;
    }
    s.sqrt()
}

/// L1 norm with fixed reduction order.
pub fn l1_norm(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v.abs();
    }
    s
}

/// Euclidean inner product with fixed reduction order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}
