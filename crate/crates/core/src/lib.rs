//! Projection-free constrained training toolkit built around the stochastic
//! Frank-Wolfe algorithm over structured atomic-norm balls, together with
//! regularized-SGD baselines and one-shot post-training compression operators.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense tensors, deterministic RNG streams, SVD kernels
//! - [`regions`]: feasible regions, their gauges and linear minimization oracles
//! - [`optim`]: the SFW optimizer and the SGD / proximal baselines
//! - [`zoo`]: desk-scale differentiable problems with hand-written backward passes
//! - [`compress`]: magnitude pruning, filter pruning, low-rank factorization

pub mod compress;
pub mod numerics;
pub mod optim;
pub mod regions;
pub mod zoo;

use thiserror::Error;

use crate::numerics::SvdFactors;

/// Errors shared across the toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("sparsity budget k={k} exceeds dimension {dim}")]
    BudgetExceedsDimension { k: usize, dim: usize },
    #[error("non-finite value encountered in input")]
    NonFiniteInput,
    #[error("power iteration did not converge within {iters} iterations")]
    PowerIterationStalled { iters: usize, best: Box<SvdFactors> },
    #[error("index partition is overlapping or does not cover all {dim} indices")]
    InvalidPartition { dim: usize },
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("degenerate update direction (v = theta), step skipped")]
    DegenerateDirection,
    #[error("beta={beta} violates the lower bound {bound}")]
    InvalidBeta { beta: f64, bound: f64 },
    #[error("step index {t} is outside the horizon {horizon}")]
    HorizonExceeded { t: usize, horizon: usize },
    #[error("point is infeasible: gauge {gauge} exceeds radius {tau}")]
    InfeasiblePoint { gauge: f64, tau: f64 },
    #[error("rank {t} is outside [1, {max}]")]
    RankOutOfRange { t: usize, max: usize },
    #[error("loss became non-finite")]
    NonFiniteLoss,
    #[error("unknown IDX magic number {0:#010x}")]
    UnknownMagic(u32),
    #[error("IDX payload truncated: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
