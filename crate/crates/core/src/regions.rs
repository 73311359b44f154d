//! Feasible regions for constrained training: the L2 ball, the k-sparse
//! polytope, and the k-support family (plain, grouped, spectral).
//!
//! Each region owns a closed-form linear minimization oracle (LMO), a gauge
//! (the atomic norm whose unit ball is the region at radius 1), the
//! diameter-to-radius conversion, and radial rescaling for enforcing
//! feasibility of the initialization. Brute-force oracles used to verify the
//! LMOs live in [`oracle`].

use crate::numerics::{
    group_norms, l1_norm, svd_full, svd_topk, topk_indices, RngStream, Tensor,
};
use crate::{Error, Result};

/// A constraint set together with its radius and sparsity budget.
#[derive(Debug, Clone)]
pub enum FeasibleRegion {
    L2Ball {
        tau: f64,
    },
    /// Convex hull of vectors in `{0, +-tau}^n` with at most `k` nonzeros.
    KSparsePolytope {
        tau: f64,
        k: usize,
    },
    /// Convex hull of k-sparse vectors with L2 norm at most `tau`.
    KSupport {
        tau: f64,
        k: usize,
    },
    /// k-support construction over a disjoint group partition (filters).
    GroupKSupport {
        tau: f64,
        k: usize,
        groups: Vec<Vec<usize>>,
    },
    /// Convex hull of rank-<=k matrices with Schatten-2 norm at most `tau`.
    SpectralKSupport {
        tau: f64,
        k: usize,
        rows: usize,
        cols: usize,
    },
}

impl FeasibleRegion {
    pub fn tau(&self) -> f64 {
        match self {
            FeasibleRegion::L2Ball { tau }
            | FeasibleRegion::KSparsePolytope { tau, .. }
            | FeasibleRegion::KSupport { tau, .. }
            | FeasibleRegion::GroupKSupport { tau, .. }
            | FeasibleRegion::SpectralKSupport { tau, .. } => *tau,
        }
    }

    /// L2 diameter of the region.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleRegion::KSparsePolytope { tau, k } => 2.0 * tau * (*k as f64).sqrt(),
            _ => 2.0 * self.tau(),
        }
    }

    fn check_shape(&self, g: &Tensor) -> Result<()> {
        let ok = match self {
            FeasibleRegion::SpectralKSupport { rows, cols, .. } => {
                g.shape() == [*rows, *cols] || g.len() == rows * cols
            }
            FeasibleRegion::GroupKSupport { groups, .. } => {
                g.len() == groups.iter().map(|x| x.len()).sum::<usize>()
            }
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.expected_shape(),
                got: g.shape().to_vec(),
            })
        }
    }

    fn expected_shape(&self) -> Vec<usize> {
        match self {
            FeasibleRegion::SpectralKSupport { rows, cols, .. } => vec![*rows, *cols],
            FeasibleRegion::GroupKSupport { groups, .. } => {
                vec![groups.iter().map(|x| x.len()).sum()]
            }
            _ => vec![],
        }
    }

    /// Linear minimization oracle: a minimizer of `<v, g>` over the region.
    /// `g = 0` returns the zero tensor, a valid minimizer.
    pub fn lmo(&self, g: &Tensor) -> Result<Tensor> {
        self.check_shape(g)?;
        if g.data().iter().all(|&x| x == 0.0) {
            return Ok(Tensor::zeros(g.shape().to_vec()));
        }
        match self {
            FeasibleRegion::L2Ball { tau } => {
                let n = g.l2_norm();
                Ok(g.scaled(-tau / n))
            }
            FeasibleRegion::KSparsePolytope { tau, k } => {
                let idx = topk_indices(g.data(), *k)?;
                let mut out = Tensor::zeros(g.shape().to_vec());
                for &i in &idx {
                    if g.data()[i] != 0.0 {
                        out.data_mut()[i] = -tau * g.data()[i].signum();
                    }
                }
                Ok(out)
            }
            FeasibleRegion::KSupport { tau, k } => {
                let idx = topk_indices(g.data(), *k)?;
                let mut topk = vec![0.0; g.len()];
                for &i in &idx {
                    topk[i] = g.data()[i];
                }
                let n = crate::numerics::l2_norm(&topk);
                let mut out = Tensor::zeros(g.shape().to_vec());
                if n > 0.0 {
                    for &i in &idx {
                        out.data_mut()[i] = -tau * topk[i] / n;
                    }
                }
                Ok(out)
            }
            FeasibleRegion::GroupKSupport { tau, k, groups } => {
                let norms = group_norms(g.data(), groups)?;
                if *k > groups.len() {
                    return Err(Error::BudgetExceedsDimension {
                        k: *k,
                        dim: groups.len(),
                    });
                }
                let picked = topk_indices(&norms, *k)?;
                let mut hnorm_sq = 0.0;
                for &gi in &picked {
                    hnorm_sq += norms[gi] * norms[gi];
                }
                let hnorm = hnorm_sq.sqrt();
                let mut out = Tensor::zeros(g.shape().to_vec());
                if hnorm > 0.0 {
                    for &gi in &picked {
                        for &i in &groups[gi] {
                            out.data_mut()[i] = -tau * g.data()[i] / hnorm;
                        }
                    }
                }
                Ok(out)
            }
            FeasibleRegion::SpectralKSupport { tau, k, rows, cols } => {
                let mat = g.reshaped(vec![*rows, *cols])?;
                // the LMO needs only the k leading singular triples; fall
                // back to the full decomposition if the power method stalls
                let f = match svd_topk(&mat, *k, 1e-12, 2000) {
                    Ok(f) => f,
                    Err(Error::PowerIterationStalled { .. }) => svd_full(&mat)?.truncated(*k),
                    Err(e) => return Err(e),
                };
                let snorm = crate::numerics::l2_norm(&f.sigma);
                if snorm == 0.0 {
                    return Ok(Tensor::zeros(g.shape().to_vec()));
                }
                let w = f.reconstruct().scaled(-tau / snorm);
                w.reshaped(g.shape().to_vec())
            }
        }
    }

    /// Gauge (atomic norm) of `x`: membership test is `gauge(x) <= tau`.
    pub fn gauge(&self, x: &Tensor) -> Result<f64> {
        self.check_shape(x)?;
        match self {
            FeasibleRegion::L2Ball { .. } => Ok(x.l2_norm()),
            FeasibleRegion::KSparsePolytope { k, .. } => {
                let inf = x.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
                Ok(inf.max(l1_norm(x.data()) / *k as f64))
            }
            FeasibleRegion::KSupport { k, .. } => Ok(k_support_norm(x.data(), *k)),
            FeasibleRegion::GroupKSupport { k, groups, .. } => {
                let norms = group_norms(x.data(), groups)?;
                Ok(k_support_norm(&norms, *k))
            }
            FeasibleRegion::SpectralKSupport { k, rows, cols, .. } => {
                let mat = x.reshaped(vec![*rows, *cols])?;
                let f = svd_full(&mat)?;
                Ok(k_support_norm(&f.sigma, *k))
            }
        }
    }

    /// Radial rescaling onto the region: feasible points pass through
    /// unchanged, infeasible ones are scaled back to the boundary.
    pub fn ensure_feasible(&self, theta: &Tensor) -> Result<Tensor> {
        let g = self.gauge(theta)?;
        let tau = self.tau();
        if g <= tau {
            Ok(theta.clone())
        } else {
            Ok(theta.scaled(tau / g))
        }
    }

    pub fn is_feasible(&self, theta: &Tensor, slack: f64) -> Result<bool> {
        Ok(self.gauge(theta)? <= self.tau() * (1.0 + slack))
    }
}

/// Region kind without payload, used for radius conversion and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    L2Ball,
    KSparsePolytope,
    KSupport,
    GroupKSupport,
    SpectralKSupport,
}

/// Radius `tau` realizing L2-diameter `D`. Only the k-sparse polytope couples
/// the radius to `k`; for every other kind antipodal extreme atoms realize
/// the diameter, so `tau = D/2`.
pub fn radius_from_diameter(kind: RegionKind, diameter: f64, k: usize) -> f64 {
    match kind {
        RegionKind::KSparsePolytope => diameter / (2.0 * (k as f64).sqrt()),
        _ => diameter / 2.0,
    }
}

/// The k-support norm via the sorted-magnitude closed form.
///
/// With `z` the magnitudes of `x` sorted non-increasing, the norm is
/// `sqrt(sum_{i<=k-r-1} z_i^2 + (sum_{i>k-r-1} z_i)^2/(r+1))` for the unique
/// `r in {0..k-1}` making the tail mean straddle `z_{k-r-1}` and `z_{k-r}`.
/// Interpolates L1 (`k = 1`) and L2 (`k = n`).
pub fn k_support_norm(x: &[f64], k: usize) -> f64 {
    let d = x.len();
    assert!(k >= 1 && k <= d, "k={k} out of range for dimension {d}");
    let mut z: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    z.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // suffix sums: tail[i] = z[i] + ... + z[d-1]
    let mut tail = vec![0.0; d + 1];
    for i in (0..d).rev() {
        tail[i] = tail[i + 1] + z[i];
    }
    for r in 0..k {
        // 1-based straddle condition: z_{k-r-1} > T/(r+1) >= z_{k-r}
        let head_end = k - r - 1; // number of leading squared terms
        let t = tail[head_end] / (r + 1) as f64;
        let upper_ok = head_end == 0 || z[head_end - 1] > t;
        let lower_ok = t >= z[head_end] - 1e-15 * z[0].max(1.0);
        if upper_ok && lower_ok {
            let mut s = 0.0;
            for zi in &z[..head_end] {
                s += zi * zi;
            }
            s += (r + 1) as f64 * t * t;
            return s.sqrt();
        }
    }
    // numerically the straddle always resolves; fall back to r = k-1
    (tail[0] * tail[0] / k as f64).sqrt()
}

/// How fresh parameters are drawn, for init-norm estimation and the model
/// zoo's layer initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// All entries one (deterministic, for tests).
    Ones,
    /// Gaussian entries with std `sqrt(2 / fan_in)`.
    FanInGaussian { fan_in: usize },
}

impl InitScheme {
    pub fn sample(&self, shape: &[usize], rng: &mut RngStream) -> Tensor {
        let n: usize = shape.iter().product();
        let data = match self {
            InitScheme::Ones => vec![1.0; n],
            InitScheme::FanInGaussian { fan_in } => {
                let std = (2.0 / *fan_in as f64).sqrt();
                (0..n).map(|_| std * rng.next_normal()).collect()
            }
        };
        Tensor::new(shape.to_vec(), data).expect("init draws are finite")
    }
}

/// Mean L2 norm over `samples` fresh initializations of the given shape.
pub fn estimate_init_norm(
    shape: &[usize],
    scheme: InitScheme,
    samples: usize,
    rng: &mut RngStream,
) -> f64 {
    assert!(samples >= 1);
    let mut acc = 0.0;
    for _ in 0..samples {
        acc += scheme.sample(shape, rng).l2_norm();
    }
    acc / samples as f64
}

/// Fractional-k resolution: `k = max(1, round(fraction * dimension))`.
pub fn resolve_fractional_k(fraction: f64, dimension: usize) -> usize {
    ((fraction * dimension as f64).round() as usize).clamp(1, dimension.max(1))
}

pub mod oracle {
    //! Brute-force LMO oracles, independent of the closed-form path.
    //!
    //! Kept runtime-callable (not test-only) because the verification CLI
    //! re-runs them on demand.

    use super::*;

    /// Minimum of `<v, g>` over the region computed by exhaustive or dense
    /// enumeration of extreme atoms.
    pub fn brute_force_min(region: &FeasibleRegion, g: &Tensor) -> Result<f64> {
        match region {
            FeasibleRegion::L2Ball { tau } => Ok(-tau * g.l2_norm()),
            FeasibleRegion::KSparsePolytope { tau, k } => {
                // all supports of size <= k, entries +-tau; signs resolve to
                // -tau * sign(g_i) per coordinate, so enumerate supports
                let n = g.len();
                let mut best = 0.0f64;
                for_each_subset(n, *k, &mut |s: &[usize]| {
                    let mut val = 0.0;
                    for &i in s {
                        val -= tau * g.data()[i].abs();
                    }
                    if val < best {
                        best = val;
                    }
                });
                Ok(best)
            }
            FeasibleRegion::KSupport { tau, k } => {
                // per support, the continuous minimizer is -tau g_S/||g_S||
                let n = g.len();
                let mut best = 0.0f64;
                for_each_subset(n, *k, &mut |s: &[usize]| {
                    let mut sq = 0.0;
                    for &i in s {
                        sq += g.data()[i] * g.data()[i];
                    }
                    let val = -tau * sq.sqrt();
                    if val < best {
                        best = val;
                    }
                });
                Ok(best)
            }
            FeasibleRegion::GroupKSupport { tau, k, groups } => {
                let norms = group_norms(g.data(), groups)?;
                let mut best = 0.0f64;
                for_each_subset(norms.len(), *k, &mut |s: &[usize]| {
                    let mut sq = 0.0;
                    for &gi in s {
                        sq += norms[gi] * norms[gi];
                    }
                    let val = -tau * sq.sqrt();
                    if val < best {
                        best = val;
                    }
                });
                Ok(best)
            }
            FeasibleRegion::SpectralKSupport { tau, k, rows, cols } => {
                // von Neumann pairing: the minimum over rank-<=k atoms is
                // -tau ||(sigma_1..sigma_k)||_2, computed from the full SVD
                let mat = g.reshaped(vec![*rows, *cols])?;
                let f = svd_full(&mat)?;
                let kk = (*k).min(f.sigma.len());
                let mut sq = 0.0;
                for s in &f.sigma[..kk] {
                    sq += s * s;
                }
                Ok(-tau * sq.sqrt())
            }
        }
    }

    /// Draws a random extreme atom of the region (gauge exactly tau).
    pub fn sample_atom(region: &FeasibleRegion, dim: usize, rng: &mut RngStream) -> Tensor {
        match region {
            FeasibleRegion::L2Ball { tau } => {
                let v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
                let t = Tensor::from_vec(v).unwrap();
                t.scaled(tau / t.l2_norm())
            }
            FeasibleRegion::KSparsePolytope { tau, k } => {
                let mut data = vec![0.0; dim];
                let perm = rng.permutation(dim);
                for &i in perm.iter().take(*k) {
                    data[i] = if rng.next_f64() < 0.5 { *tau } else { -tau };
                }
                Tensor::from_vec(data).unwrap()
            }
            FeasibleRegion::KSupport { tau, k } => {
                let mut data = vec![0.0; dim];
                let perm = rng.permutation(dim);
                for &i in perm.iter().take(*k) {
                    data[i] = rng.next_normal();
                }
                let t = Tensor::from_vec(data).unwrap();
                let n = t.l2_norm();
                t.scaled(tau / n)
            }
            FeasibleRegion::GroupKSupport { tau, k, groups } => {
                let mut data = vec![0.0; dim];
                let perm = rng.permutation(groups.len());
                for &gi in perm.iter().take(*k) {
                    for &i in &groups[gi] {
                        data[i] = rng.next_normal();
                    }
                }
                let t = Tensor::from_vec(data).unwrap();
                let n = t.l2_norm();
                t.scaled(tau / n)
            }
            FeasibleRegion::SpectralKSupport { tau, k, rows, cols } => {
                // random rank-k atom: orthonormal factors times a random
                // non-negative spectrum scaled to Schatten-2 norm tau
                let u = random_orthonormal(*rows, *k, rng);
                let v = random_orthonormal(*cols, *k, rng);
                let mut sigma: Vec<f64> = (0..*k).map(|_| rng.next_f64() + 0.1).collect();
                let n = crate::numerics::l2_norm(&sigma);
                for s in sigma.iter_mut() {
                    *s *= tau / n;
                }
                sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
                let f = crate::numerics::SvdFactors { u, sigma, v };
                f.reconstruct().reshaped(vec![rows * cols]).unwrap()
            }
        }
    }

    fn random_orthonormal(n: usize, k: usize, rng: &mut RngStream) -> Tensor {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        while cols.len() < k {
            let mut c: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
            for b in &cols {
                let mut proj = 0.0;
                for (x, y) in c.iter().zip(b) {
                    proj += x * y;
                }
                for (x, y) in c.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
            let nn = crate::numerics::l2_norm(&c);
            if nn > 1e-8 {
                for x in c.iter_mut() {
                    *x /= nn;
                }
                cols.push(c);
            }
        }
        let mut t = Tensor::zeros(vec![n, k]);
        for (j, c) in cols.iter().enumerate() {
            for (i, &x) in c.iter().enumerate() {
                t.set(i, j, x);
            }
        }
        t
    }

    /// Calls `f` on every subset of `0..n` with size in `1..=k`.
    fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
        let mut stack = Vec::new();
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
            if !cur.is_empty() {
                f(cur);
            }
            if cur.len() == k {
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, f);
                cur.pop();
            }
        }
        rec(0, n, k, &mut stack, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::StreamPurpose;

    fn vec_t(v: &[f64]) -> Tensor {
        Tensor::from_vec(v.to_vec()).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn lmo_l2_ball() {
        let r = FeasibleRegion::L2Ball { tau: 2.0 };
        let v = r.lmo(&vec_t(&[0.0, 5.0])).unwrap();
        assert_eq!(v.data(), &[0.0, -2.0]);
    }

    #[test]
    fn lmo_zero_gradient_returns_zero() {
        for r in all_kinds(4) {
            let v = r.lmo(&Tensor::zeros(vec![4])).unwrap();
            assert!(v.data().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn lmo_k_sparse_polytope() {
        let r = FeasibleRegion::KSparsePolytope { tau: 1.5, k: 2 };
        let v = r.lmo(&vec_t(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(v.data(), &[-1.5, 0.0, -1.5]);
    }

    #[test]
    fn lmo_k_support() {
        let r = FeasibleRegion::KSupport { tau: 1.0, k: 2 };
        let v = r.lmo(&vec_t(&[3.0, -1.0, 2.0])).unwrap();
        let s = 13.0f64.sqrt();
        assert_close(v.data()[0], -3.0 / s, 1e-12);
        assert_close(v.data()[1], 0.0, 1e-12);
        assert_close(v.data()[2], -2.0 / s, 1e-12);
    }

    #[test]
    fn lmo_k_support_full_budget_is_l2() {
        let g = vec_t(&[1.0, -2.0, 0.5]);
        let ks = FeasibleRegion::KSupport { tau: 1.7, k: 3 };
        let l2 = FeasibleRegion::L2Ball { tau: 1.7 };
        let a = ks.lmo(&g).unwrap();
        let b = l2.lmo(&g).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_close(*x, *y, 1e-12);
        }
    }

    #[test]
    fn lmo_group_k_support() {
        let groups = vec![vec![0, 1], vec![2, 3]];
        let r = FeasibleRegion::GroupKSupport {
            tau: 1.0,
            k: 1,
            groups,
        };
        let v = r.lmo(&vec_t(&[3.0, 4.0, 0.0, 1.0])).unwrap();
        assert_close(v.data()[0], -0.6, 1e-12);
        assert_close(v.data()[1], -0.8, 1e-12);
        assert_eq!(&v.data()[2..], &[0.0, 0.0]);
    }

    #[test]
    fn lmo_spectral_diag() {
        let r = FeasibleRegion::SpectralKSupport {
            tau: 2.0,
            k: 1,
            rows: 2,
            cols: 2,
        };
        let g = Tensor::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let v = r.lmo(&g).unwrap();
        assert_close(v.data()[0], -2.0, 1e-8);
        assert_close(v.data()[1], 0.0, 1e-8);
        assert_close(v.data()[2], 0.0, 1e-8);
        assert_close(v.data()[3], 0.0, 1e-8);

        let r2 = FeasibleRegion::SpectralKSupport {
            tau: 1.0,
            k: 2,
            rows: 2,
            cols: 2,
        };
        let v2 = r2.lmo(&g).unwrap();
        let s = 10.0f64.sqrt();
        assert_close(v2.data()[0], -3.0 / s, 1e-8);
        assert_close(v2.data()[3], -1.0 / s, 1e-8);
    }

    #[test]
    fn gauge_k_support_limits() {
        // k=1 reduces to L1
        assert_close(k_support_norm(&[1.0, 1.0], 1), 2.0, 1e-12);
        // k=n reduces to L2
        assert_close(k_support_norm(&[3.0, 4.0], 2), 5.0, 1e-12);
        // k-sparse x: gauge equals its L2 norm for any k >= ||x||_0
        assert_close(k_support_norm(&[0.0, 3.0, 4.0, 0.0], 2), 5.0, 1e-12);
        assert_close(k_support_norm(&[0.0, 3.0, 4.0, 0.0], 3), 5.0, 1e-12);
    }

    #[test]
    fn gauge_k_sparse_polytope() {
        let r = FeasibleRegion::KSparsePolytope { tau: 1.0, k: 2 };
        let g = r.gauge(&vec_t(&[3.0, -1.0, 2.0])).unwrap();
        assert_close(g, 3.0, 1e-12);
    }

    #[test]
    fn radius_from_diameter_values() {
        assert_close(
            radius_from_diameter(RegionKind::KSparsePolytope, 6.0, 4),
            1.5,
            1e-12,
        );
        assert_close(radius_from_diameter(RegionKind::KSupport, 6.0, 3), 3.0, 1e-12);
        assert_close(radius_from_diameter(RegionKind::L2Ball, 2.0, 1), 1.0, 1e-12);
    }

    #[test]
    fn ensure_feasible_rescales() {
        let r = FeasibleRegion::L2Ball { tau: 1.0 };
        let t = r.ensure_feasible(&vec_t(&[3.0, 4.0])).unwrap();
        assert_close(t.data()[0], 0.6, 1e-12);
        assert_close(t.data()[1], 0.8, 1e-12);
        // already feasible passes through unchanged
        let inside = vec_t(&[0.1, 0.2]);
        assert_eq!(r.ensure_feasible(&inside).unwrap().data(), inside.data());
        // zero stays zero
        let z = Tensor::zeros(vec![2]);
        assert_eq!(r.ensure_feasible(&z).unwrap().data(), z.data());
    }

    #[test]
    fn estimate_init_norm_ones() {
        let mut rng = RngStream::new(1, StreamPurpose::Init);
        let n = estimate_init_norm(&[16], InitScheme::Ones, 3, &mut rng);
        assert_close(n, 4.0, 1e-12);
    }

    #[test]
    fn estimate_init_norm_fan_in_gaussian() {
        // E||theta||_2 for 1000 iid N(0, 2/100) entries ~ sqrt(1000 * 0.02)
        let mut rng = RngStream::new(5, StreamPurpose::Init);
        let n = estimate_init_norm(&[1000], InitScheme::FanInGaussian { fan_in: 100 }, 200, &mut rng);
        let expected = 20.0f64.sqrt();
        assert!((n - expected).abs() / expected < 0.05, "{n} vs {expected}");
    }

    #[test]
    fn fractional_k_resolution() {
        assert_eq!(resolve_fractional_k(0.1, 50), 5);
        assert_eq!(resolve_fractional_k(0.001, 50), 1);
        assert_eq!(resolve_fractional_k(1.0, 50), 50);
    }

    fn all_kinds(dim: usize) -> Vec<FeasibleRegion> {
        vec![
            FeasibleRegion::L2Ball { tau: 1.0 },
            FeasibleRegion::KSparsePolytope { tau: 1.0, k: 2 },
            FeasibleRegion::KSupport { tau: 1.0, k: 2 },
            FeasibleRegion::GroupKSupport {
                tau: 1.0,
                k: 1,
                groups: vec![vec![0, 1], vec![2, 3]],
            },
            FeasibleRegion::SpectralKSupport {
                tau: 1.0,
                k: 1,
                rows: 2,
                cols: dim / 2,
            },
        ]
    }

    #[test]
    fn lmo_matches_brute_force_small() {
        let mut rng = RngStream::new(77, StreamPurpose::Data);
        for region in all_kinds(4) {
            for _ in 0..200 {
                let g: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
                let g = vec_t(&g);
                let v = region.lmo(&g).unwrap();
                let got = crate::numerics::dot(v.data(), g.data());
                let want = oracle::brute_force_min(&region, &g).unwrap();
                assert!(got <= want + 1e-10, "{region:?}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn lmo_outputs_sit_on_boundary() {
        let mut rng = RngStream::new(13, StreamPurpose::Data);
        for region in all_kinds(4) {
            for _ in 0..50 {
                let g: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
                let v = region.lmo(&vec_t(&g)).unwrap();
                let gauge = region.gauge(&v).unwrap();
                assert!(
                    (gauge - region.tau()).abs() < 1e-8,
                    "{region:?}: gauge {gauge}"
                );
            }
        }
    }

    #[test]
    fn lmo_sign_and_scale_symmetry() {
        let mut rng = RngStream::new(29, StreamPurpose::Data);
        for region in all_kinds(4) {
            let g: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            let g = vec_t(&g);
            let v = region.lmo(&g).unwrap();
            let v_scaled = region.lmo(&g.scaled(3.5)).unwrap();
            let v_neg = region.lmo(&g.scaled(-1.0)).unwrap();
            for i in 0..4 {
                assert_close(v.data()[i], v_scaled.data()[i], 1e-8);
                assert_close(v.data()[i], -v_neg.data()[i], 1e-8);
            }
        }
    }

    #[test]
    fn gauge_is_a_norm() {
        let mut rng = RngStream::new(31, StreamPurpose::Data);
        for region in all_kinds(4) {
            for _ in 0..200 {
                let a: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
                let b: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
                let (a, b) = (vec_t(&a), vec_t(&b));
                let ga = region.gauge(&a).unwrap();
                let gb = region.gauge(&b).unwrap();
                let gsum = region.gauge(&a.axpy(1.0, &b).unwrap()).unwrap();
                assert!(gsum <= ga + gb + 1e-9, "{region:?} triangle violated");
                let gscaled = region.gauge(&a.scaled(-2.5)).unwrap();
                assert_close(gscaled, 2.5 * ga, 1e-9);
            }
        }
    }

    #[test]
    fn sampled_atoms_have_gauge_tau() {
        let mut rng = RngStream::new(41, StreamPurpose::Data);
        for region in all_kinds(4) {
            for _ in 0..50 {
                let atom = oracle::sample_atom(&region, 4, &mut rng);
                let g = region.gauge(&atom).unwrap();
                assert!(
                    (g - region.tau()).abs() < 1e-8,
                    "{region:?}: atom gauge {g}"
                );
            }
        }
    }

    #[test]
    fn diameter_recovered_by_atom_sampling() {
        let mut rng = RngStream::new(43, StreamPurpose::Data);
        for region in all_kinds(4) {
            let d = region.diameter();
            let mut best = 0.0f64;
            let atoms: Vec<Tensor> = (0..300)
                .map(|_| oracle::sample_atom(&region, 4, &mut rng))
                .collect();
            for a in &atoms {
                for b in &atoms {
                    let dist = a.axpy(-1.0, b).unwrap().l2_norm();
                    if dist > best {
                        best = dist;
                    }
                }
            }
            assert!(
                best <= d * (1.0 + 1e-9) && best >= d * 0.99,
                "{region:?}: sampled diameter {best} vs {d}"
            );
        }
    }
}
