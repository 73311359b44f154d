use crate::numerics::{svd_full, RngStream, StreamPurpose, Tensor};

/// Constrained least-squares finite sum with certified constants:
/// `L(theta) = (1/m) sum_i 0.5 (x_i^T theta - y_i)^2`.
#[derive(Debug, Clone)]
pub struct LeastSquaresProblem {
    /// Data matrix, `[m, n]`.
    pub x: Tensor,
    pub y: Vec<f64>,
    /// Certified smoothness constant: largest eigenvalue of `(1/m) X^T X`.
    pub smoothness: f64,
}

impl LeastSquaresProblem {
    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn loss(&self, theta: &Tensor) -> f64 {
        let m = self.samples();
        let mut acc = 0.0;
        for i in 0..m {
            let r = self.residual(i, theta);
            acc += 0.5 * r * r;
        }
        acc / m as f64
    }

    fn residual(&self, i: usize, theta: &Tensor) -> f64 {
        let n = self.dim();
        let mut r = -self.y[i];
        for j in 0..n {
            r += self.x.at(i, j) * theta.data()[j];
        }
        r
    }

    /// Gradient of the per-sample loss `0.5 (x_i^T theta - y_i)^2`.
    pub fn sample_grad(&self, i: usize, theta: &Tensor) -> Tensor {
        let r = self.residual(i, theta);
        let n = self.dim();
        let data = (0..n).map(|j| self.x.at(i, j) * r).collect();
        Tensor::new(vec![n], data).expect("finite")
    }

    /// Mean gradient over the given sample indices.
    pub fn batch_grad(&self, indices: &[usize], theta: &Tensor) -> Tensor {
        let mut acc = Tensor::zeros(vec![self.dim()]);
        for &i in indices {
            acc = acc.axpy(1.0, &self.sample_grad(i, theta)).unwrap();
        }
        acc.scaled(1.0 / indices.len() as f64)
    }

    /// Exact full gradient, equal to the mean of all per-sample gradients.
    pub fn exact_grad(&self, theta: &Tensor) -> Tensor {
        let all: Vec<usize> = (0..self.samples()).collect();
        self.batch_grad(&all, theta)
    }

    /// Certified Lipschitz bound on per-sample gradients over an L2 ball of
    /// radius `tau`: `max_i ||x_i|| (||x_i|| tau + |y_i|)`.
    pub fn certified_lipschitz(&self, tau: f64) -> f64 {
        let n = self.dim();
        let mut best = 0.0f64;
        for i in 0..self.samples() {
            let mut sq = 0.0;
            for j in 0..n {
                sq += self.x.at(i, j) * self.x.at(i, j);
            }
            let norm = sq.sqrt();
            best = best.max(norm * (norm * tau + self.y[i].abs()));
        }
        best
    }

    /// Upper bound on the initial optimality gap: the loss is non-negative,
    /// so `h0 <= L(theta0)`.
    pub fn init_gap_upper(&self, theta0: &Tensor) -> f64 {
        self.loss(theta0)
    }
}

/// Deterministic random least-squares instance: Gaussian data, planted
/// parameter, small observation noise.
pub fn least_squares_problem(seed: u64, samples: usize, dim: usize) -> LeastSquaresProblem {
    let mut rng = RngStream::new(seed, StreamPurpose::Data);
    let mut xdata = Vec::with_capacity(samples * dim);
    for _ in 0..samples * dim {
        xdata.push(rng.next_normal() / (dim as f64).sqrt());
    }
    let x = Tensor::new(vec![samples, dim], xdata).expect("finite");
    let planted: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
    let y: Vec<f64> = (0..samples)
        .map(|i| {
            let mut v = 0.1 * rng.next_normal();
            for j in 0..dim {
                v += x.at(i, j) * planted[j];
            }
            v
        })
        .collect();
    let sigma1 = svd_full(&x).expect("finite data").sigma[0];
    let smoothness = sigma1 * sigma1 / samples as f64;
    LeastSquaresProblem { x, y, smoothness }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_quadratic() {
        let p = LeastSquaresProblem {
            x: Tensor::new(vec![1, 1], vec![1.0]).unwrap(),
            y: vec![0.0],
            smoothness: 1.0,
        };
        let theta = Tensor::from_vec(vec![3.0]).unwrap();
        assert!((p.loss(&theta) - 4.5).abs() < 1e-12);
        assert!((p.exact_grad(&theta).data()[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn full_batch_equals_exact() {
        let p = least_squares_problem(5, 20, 4);
        let theta = Tensor::from_vec(vec![0.3, -0.2, 0.1, 0.5]).unwrap();
        let all: Vec<usize> = (0..20).collect();
        let a = p.batch_grad(&all, &theta);
        let b = p.exact_grad(&theta);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn certified_smoothness_matches_gram_power_iteration() {
        // independent oracle: plain power iteration on (1/m) X^T X
        let p = least_squares_problem(9, 30, 5);
        let (m, n) = (p.samples(), p.dim());
        let gram = {
            let mut g = vec![vec![0.0; n]; n];
            for (j, gj) in g.iter_mut().enumerate() {
                for (l, gl) in gj.iter_mut().enumerate() {
                    let mut s = 0.0;
                    for i in 0..m {
                        s += p.x.at(i, j) * p.x.at(i, l);
                    }
                    *gl = s / m as f64;
                }
            }
            g
        };
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = gram
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect();
            let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / norm).collect();
            lambda = norm;
        }
        assert!(
            (p.smoothness - lambda).abs() < 1e-8,
            "{} vs {lambda}",
            p.smoothness
        );
    }

    #[test]
    fn lipschitz_bound_dominates_samples() {
        let p = least_squares_problem(3, 25, 4);
        let tau = 2.0;
        let g = p.certified_lipschitz(tau);
        let mut rng = RngStream::new(4, StreamPurpose::Noise);
        for _ in 0..200 {
            // random feasible theta in the L2 ball of radius tau
            let raw: Vec<f64> = (0..4).map(|_| rng.next_normal()).collect();
            let t = Tensor::from_vec(raw).unwrap();
            let t = t.scaled(tau * rng.next_f64() / t.l2_norm());
            for i in 0..p.samples() {
                assert!(p.sample_grad(i, &t).l2_norm() <= g + 1e-12);
            }
        }
    }
}
