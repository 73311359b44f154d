//! Desk-scale differentiable problems: synthetic datasets, an IDX reader,
//! convex finite-sum problems with certified constants, and tiny MLP/CNN
//! models with hand-written backward passes verified by finite differences.

mod data;
mod idx;
mod model;
mod problems;

pub use data::{make_blobs, make_pattern_images, make_two_moons, Dataset, Split};
pub use idx::{encode_idx_images, encode_idx_labels, load_idx, parse_idx, IdxContent};
pub use model::{finite_diff_check, Layer, LayerGrads, Model, ParamRole};
pub use problems::{least_squares_problem, LeastSquaresProblem};
