use super::tensor::Tensor;
use crate::{Error, Result};

/// Economy singular value decomposition `A = U diag(sigma) V^T`.
///
/// `u` is n x r, `v` is m x r, `sigma` is non-increasing and non-negative.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Tensor,
    pub sigma: Vec<f64>,
    pub v: Tensor,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Tensor {
        let (n, m, r) = (self.u.nrows(), self.v.nrows(), self.rank());
        let mut out = Tensor::zeros(vec![n, m]);
        for l in 0..r {
            let s = self.sigma[l];
            if s == 0.0 {
                continue;
            }
            for i in 0..n {
                let a = s * self.u.at(i, l);
                for j in 0..m {
                    let x = out.at(i, j) + a * self.v.at(j, l);
                    out.set(i, j, x);
                }
            }
        }
        out
    }

    /// Keeps only the leading `t` triples.
    pub fn truncated(&self, t: usize) -> SvdFactors {
        let t = t.min(self.rank());
        SvdFactors {
            u: take_columns(&self.u, t),
            sigma: self.sigma[..t].to_vec(),
            v: take_columns(&self.v, t),
        }
    }
}

fn take_columns(a: &Tensor, t: usize) -> Tensor {
    let n = a.nrows();
    let mut out = Tensor::zeros(vec![n, t]);
    for i in 0..n {
        for j in 0..t {
            out.set(i, j, a.at(i, j));
        }
    }
    out
}

/// Full economy SVD via one-sided Jacobi iteration.
///
/// Reconstruction error is at the level of machine precision relative to
/// `||A||_F`; singular values come back sorted non-increasing.
pub fn svd_full(a: &Tensor) -> Result<SvdFactors> {
    if a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let (n, m) = (a.nrows(), a.ncols());
    if n >= m {
        svd_tall(a)
    } else {
        // transpose trick: SVD of A^T swaps the factors
        let f = svd_tall(&a.transposed())?;
        Ok(SvdFactors {
            u: f.v,
            sigma: f.sigma,
            v: f.u,
        })
    }
}

/// One-sided Jacobi on a matrix with nrows >= ncols: rotate column pairs of a
/// working copy `B` (and accumulate the rotations into `V`) until all columns
/// are mutually orthogonal, then read off sigma as the column norms.
fn svd_tall(a: &Tensor) -> Result<SvdFactors> {
    let (n, m) = (a.nrows(), a.ncols());
    let mut b = a.clone();
    let mut v = identity(m);
    let eps = 1e-15;
    let max_sweeps = 60;

    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..n {
                    let bp = b.at(i, p);
                    let bq = b.at(i, q);
                    alpha += bp * bp;
                    beta += bq * bq;
                    gamma += bp * bq;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let bp = b.at(i, p);
                    let bq = b.at(i, q);
                    b.set(i, p, c * bp - s * bq);
                    b.set(i, q, s * bp + c * bq);
                }
                for i in 0..m {
                    let vp = v.at(i, p);
                    let vq = v.at(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // column norms are the singular values; normalize to get U
    let mut sigma: Vec<f64> = (0..m)
        .map(|j| {
            let mut s = 0.0;
            for i in 0..n {
                s += b.at(i, j) * b.at(i, j);
            }
            s.sqrt()
        })
        .collect();

    // sort non-increasing, ties keep lower original index first
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap().then(x.cmp(&y)));
    sigma = order.iter().map(|&j| sigma[j]).collect();

    let mut u = Tensor::zeros(vec![n, m]);
    let mut vs = Tensor::zeros(vec![m, m]);
    let scale = sigma.first().copied().unwrap_or(0.0);
    for (newj, &oldj) in order.iter().enumerate() {
        if sigma[newj] > scale * 1e-300 && sigma[newj] > 0.0 {
            for i in 0..n {
                u.set(i, newj, b.at(i, oldj) / sigma[newj]);
            }
        }
        for i in 0..m {
            vs.set(i, newj, v.at(i, oldj));
        }
    }
    complete_orthonormal(&mut u);
    Ok(SvdFactors { u, sigma, v: vs })
}

fn identity(m: usize) -> Tensor {
    let mut t = Tensor::zeros(vec![m, m]);
    for i in 0..m {
        t.set(i, i, 1.0);
    }
    t
}

/// Replaces zero columns (from zero singular values) with unit vectors
/// orthonormal to the rest, so U stays orthonormal even for rank-deficient
/// input.
fn complete_orthonormal(u: &mut Tensor) {
    let (n, m) = (u.nrows(), u.ncols());
    for j in 0..m {
        let mut norm = 0.0;
        for i in 0..n {
            norm += u.at(i, j) * u.at(i, j);
        }
        if norm.sqrt() > 0.5 {
            continue;
        }
        // try canonical basis vectors until one survives projection
        'candidates: for e in 0..n {
            let mut col = vec![0.0; n];
            col[e] = 1.0;
            for other in 0..m {
                if other == j {
                    continue;
                }
                let mut proj = 0.0;
                for i in 0..n {
                    proj += col[i] * u.at(i, other);
                }
                for (i, c) in col.iter_mut().enumerate() {
                    *c -= proj * u.at(i, other);
                }
            }
            let nn: f64 = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nn > 1e-6 {
                for (i, c) in col.iter().enumerate() {
                    u.set(i, j, c / nn);
                }
                break 'candidates;
            }
        }
    }
}

/// Leading-k SVD via power iteration with Gram-Schmidt re-orthonormalization
/// and deflation: singular triples are extracted one at a time, each iterate
/// kept orthogonal to the already converged right singular vectors.
pub fn svd_topk(a: &Tensor, k: usize, tol: f64, max_iter: usize) -> Result<SvdFactors> {
    let (n, m) = (a.nrows(), a.ncols());
    let dim = n.min(m);
    if k == 0 || k > dim {
        return Err(Error::BudgetExceedsDimension { k, dim });
    }
    if a.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }

    let at = a.transposed();
    let scale = a.frobenius_norm();
    let mut vcols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut sigma: Vec<f64> = Vec::with_capacity(k);
    // fixed internal stream keeps the start vectors deterministic
    let mut rng = super::RngStream::new(0x53_56_44, super::StreamPurpose::Noise);
    let mut stalled = false;
    let mut iters_used = 0;

    for idx in 0..k {
        let mut v: Vec<f64> = (0..m).map(|_| rng.next_normal()).collect();
        orthogonalize(&mut v, &vcols);
        normalize(&mut v);
        let mut cur_sigma = 0.0;
        let mut converged = false;
        for it in 0..max_iter {
            iters_used = it + 1;
            let av = matvec(a, &v);
            let mut w = matvec(&at, &av);
            orthogonalize(&mut w, &vcols);
            let wnorm = norm(&w);
            if wnorm <= scale * scale * 1e-28 || scale == 0.0 {
                // remaining spectrum is numerically zero
                cur_sigma = 0.0;
                converged = true;
                break;
            }
            let prev = v.clone();
            for (x, y) in v.iter_mut().zip(&w) {
                *x = y / wnorm;
            }
            cur_sigma = norm(&matvec(a, &v));
            // direction change up to sign; quadratic value accuracy follows
            let mut dplus = 0.0;
            let mut dminus = 0.0;
            for (x, p) in v.iter().zip(&prev) {
                dplus += (x - p) * (x - p);
                dminus += (x + p) * (x + p);
            }
            if dplus.sqrt().min(dminus.sqrt()) <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            stalled = true;
        }
        sigma.push(cur_sigma);
        vcols.push(v);
        let _ = idx;
    }

    // left vectors from u_i = A v_i / sigma_i, re-orthonormalized
    let mut u = Tensor::zeros(vec![n, k]);
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (i, vcol) in vcols.iter().enumerate() {
        let mut ui = matvec(a, vcol);
        if sigma[i] > 0.0 {
            for x in ui.iter_mut() {
                *x /= sigma[i];
            }
        }
        orthogonalize(&mut ui, &ucols);
        normalize(&mut ui);
        ucols.push(ui);
    }
    for (j, col) in ucols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            u.set(i, j, x);
        }
    }
    let mut v = Tensor::zeros(vec![m, k]);
    for (j, col) in vcols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            v.set(i, j, x);
        }
    }
    complete_orthonormal(&mut u);
    complete_orthonormal(&mut v);
    let best = SvdFactors { u, sigma, v };
    if stalled {
        return Err(Error::PowerIterationStalled {
            iters: iters_used,
            best: Box::new(best),
        });
    }
    Ok(best)
}

fn matvec(a: &Tensor, x: &[f64]) -> Vec<f64> {
    let (n, m) = (a.nrows(), a.ncols());
    debug_assert_eq!(m, x.len());
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..m {
            s += a.at(i, j) * x[j];
        }
        out[i] = s;
    }
    out
}

fn norm(x: &[f64]) -> f64 {
    super::l2_norm(x)
}

fn normalize(x: &mut [f64]) {
    let n = norm(x);
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
}

/// Modified Gram-Schmidt projection of `x` against each basis vector.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let mut proj = 0.0;
        for (a, c) in x.iter().zip(b) {
            proj += a * c;
        }
        for (a, c) in x.iter_mut().zip(b) {
            *a -= proj * c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> Tensor {
        let n = values.len();
        let mut t = Tensor::zeros(vec![n, n]);
        for (i, &v) in values.iter().enumerate() {
            t.set(i, i, v);
        }
        t
    }

    fn assert_orthonormal(a: &Tensor, tol: f64) {
        let g = a.transposed().matmul(a);
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (g.at(i, j) - want).abs() <= tol,
                    "gram[{i}][{j}] = {}",
                    g.at(i, j)
                );
            }
        }
    }

    fn assert_reconstructs(a: &Tensor, f: &SvdFactors, rel: f64) {
        let diff = f.reconstruct().axpy(-1.0, a).unwrap();
        let scale = a.frobenius_norm().max(1e-300);
        assert!(
            diff.frobenius_norm() <= rel * scale,
            "reconstruction error {} vs scale {scale}",
            diff.frobenius_norm()
        );
    }

    #[test]
    fn svd_full_diagonal() {
        let f = svd_full(&diag(&[3.0, 1.0])).unwrap();
        assert!((f.sigma[0] - 3.0).abs() < 1e-12);
        assert!((f.sigma[1] - 1.0).abs() < 1e-12);
        assert!((f.u.at(0, 0).abs() - 1.0).abs() < 1e-12);
        assert!((f.v.at(0, 0).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_full_zero_matrix() {
        let f = svd_full(&Tensor::zeros(vec![2, 2])).unwrap();
        assert_eq!(f.sigma, vec![0.0, 0.0]);
        assert_orthonormal(&f.u, 1e-9);
    }

    #[test]
    fn svd_full_nilpotent() {
        // closed form: singular values of [[0,2],[0,0]] are (2, 0)
        let a = Tensor::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let f = svd_full(&a).unwrap();
        assert!((f.sigma[0] - 2.0).abs() < 1e-12);
        assert!(f.sigma[1].abs() < 1e-12);
        assert_reconstructs(&a, &f, 1e-12);
    }

    #[test]
    fn svd_full_random_rect() {
        let mut rng = crate::numerics::RngStream::new(9, crate::numerics::StreamPurpose::Data);
        for &(n, m) in &[(5usize, 8usize), (8, 5), (12, 12)] {
            let data: Vec<f64> = (0..n * m).map(|_| rng.next_normal()).collect();
            let a = Tensor::new(vec![n, m], data).unwrap();
            let f = svd_full(&a).unwrap();
            assert_reconstructs(&a, &f, 1e-9);
            assert_orthonormal(&f.u, 1e-9);
            assert_orthonormal(&f.v, 1e-9);
            for w in f.sigma.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn svd_topk_matches_full_on_diag() {
        let f = svd_topk(&diag(&[5.0, 3.0, 1.0]), 2, 1e-10, 500).unwrap();
        assert!((f.sigma[0] - 5.0).abs() < 1e-7);
        assert!((f.sigma[1] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn svd_topk_full_budget_reconstructs() {
        let a = diag(&[5.0, 3.0, 1.0]);
        let f = svd_topk(&a, 3, 1e-10, 500).unwrap();
        assert_reconstructs(&a, &f, 1e-6);
    }

    #[test]
    fn svd_topk_out_of_range() {
        let a = diag(&[1.0, 2.0]);
        assert!(matches!(
            svd_topk(&a, 3, 1e-8, 100),
            Err(Error::BudgetExceedsDimension { .. })
        ));
        assert!(matches!(
            svd_topk(&a, 0, 1e-8, 100),
            Err(Error::BudgetExceedsDimension { .. })
        ));
    }

    #[test]
    fn svd_topk_matches_full_on_random() {
        let mut rng = crate::numerics::RngStream::new(21, crate::numerics::StreamPurpose::Data);
        let (n, m) = (20, 30);
        let data: Vec<f64> = (0..n * m).map(|_| rng.next_normal()).collect();
        let a = Tensor::new(vec![n, m], data).unwrap();
        let full = svd_full(&a).unwrap();
        let top = svd_topk(&a, 5, 1e-10, 2000).unwrap();
        for i in 0..5 {
            let rel = (top.sigma[i] - full.sigma[i]).abs() / full.sigma[0];
            assert!(rel < 1e-6, "sigma[{i}]: {} vs {}", top.sigma[i], full.sigma[i]);
        }
    }
}
