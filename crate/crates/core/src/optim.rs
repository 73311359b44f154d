//! Optimizers: stochastic Frank-Wolfe with momentum and learning-rate
//! rescaling, plus the baselines it is compared against (SGD with weight
//! decay, group penalties, nuclear-norm subgradients, and proximal gradient
//! with singular value thresholding).

use crate::numerics::{dot, group_norms, svd_full, Tensor};
use crate::regions::FeasibleRegion;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    LinearDecay,
}

/// Learning-rate transform applied after the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RescaleMode {
    None,
    /// Divide by the region's L2 diameter.
    Diameter,
    /// Rescale the update direction length to that of the batch gradient:
    /// `eta * ||grad|| / ||v - theta||`.
    Gradient,
    /// Theorem step `eta_t = ||grad|| * eta`.
    GradientTheory,
}

/// Per-parameter-group SFW state: momentum buffer, schedule position, and
/// the hyperparameters of the update rule.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub momentum: Option<Tensor>,
    pub t: usize,
    pub eta0: f64,
    pub schedule: ScheduleKind,
    pub rescale: RescaleMode,
    pub rho: f64,
    pub horizon: usize,
}

impl OptimizerState {
    pub fn new(
        eta0: f64,
        schedule: ScheduleKind,
        rescale: RescaleMode,
        rho: f64,
        horizon: usize,
    ) -> Self {
        Self {
            momentum: None,
            t: 0,
            eta0,
            schedule,
            rescale,
            rho,
            horizon,
        }
    }
}

/// Outcome of one SFW step.
#[derive(Debug, Clone)]
pub struct SfwStep {
    pub theta: Tensor,
    /// Effective learning rate after rescaling and clamping to [0, 1].
    pub eta_hat: f64,
    /// True when the direction was degenerate (v = theta) and the step was
    /// skipped.
    pub skipped: bool,
}

/// EMA momentum: `g` at t = 0, else `rho*m + (1-rho)*g`.
pub fn momentum_update(m: Option<&Tensor>, g: &Tensor, rho: f64, t: usize) -> Result<Tensor> {
    match m {
        Some(m) if t > 0 && rho > 0.0 => {
            m.same_shape(g)?;
            Ok(m.scaled(rho).axpy(1.0 - rho, g)?)
        }
        _ => Ok(g.clone()),
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Applies the selected rescaling to a scheduled learning rate, clamping the
/// result into [0, 1] as required by the convex-combination update.
pub fn rescale_lr(
    mode: RescaleMode,
    eta: f64,
    grad_norm: f64,
    dir_norm: f64,
    diameter: f64,
) -> Result<f64> {
    let v = match mode {
        RescaleMode::None => eta,
        RescaleMode::Diameter => eta / diameter,
        RescaleMode::Gradient => {
            if dir_norm == 0.0 {
                return Err(Error::DegenerateDirection);
            }
            eta * grad_norm / dir_norm
        }
        RescaleMode::GradientTheory => eta * grad_norm,
    };
    Ok(clamp_unit(v))
}

/// Piecewise schedule value at step `t` of `horizon`.
pub fn lr_schedule(kind: ScheduleKind, t: usize, horizon: usize, eta0: f64) -> Result<f64> {
    if t >= horizon {
        return Err(Error::HorizonExceeded { t, horizon });
    }
    Ok(match kind {
        ScheduleKind::Constant => eta0,
        ScheduleKind::LinearDecay => eta0 * (1.0 - t as f64 / horizon as f64),
    })
}

/// One SFW iteration on a single parameter group:
/// momentum -> LMO -> rescaled learning rate -> convex combination.
pub fn sfw_step(
    state: &mut OptimizerState,
    theta: &Tensor,
    region: &FeasibleRegion,
    g: &Tensor,
) -> Result<SfwStep> {
    theta.same_shape(g)?;
    let m = momentum_update(state.momentum.as_ref(), g, state.rho, state.t)?;
    let v = region.lmo(&m)?;
    let direction = v.axpy(-1.0, theta)?;
    let eta = lr_schedule(state.schedule, state.t, state.horizon, state.eta0)?;
    let eta_hat = match rescale_lr(
        state.rescale,
        eta,
        g.l2_norm(),
        direction.l2_norm(),
        region.diameter(),
    ) {
        Ok(v) => v,
        Err(Error::DegenerateDirection) => {
            state.momentum = Some(m);
            state.t += 1;
            return Ok(SfwStep {
                theta: theta.clone(),
                eta_hat: 0.0,
                skipped: true,
            });
        }
        Err(e) => return Err(e),
    };
    let next = theta.scaled(1.0 - eta_hat).axpy(eta_hat, &v)?;
    state.momentum = Some(m);
    state.t += 1;
    Ok(SfwStep {
        theta: next,
        eta_hat,
        skipped: false,
    })
}

/// Heavy-ball SGD state for the baselines.
#[derive(Debug, Clone, Default)]
pub struct SgdState {
    pub buffer: Option<Tensor>,
}

/// SGD step with weight decay folded into the gradient and heavy-ball
/// momentum: `buf = rho*buf + (g + wd*theta); theta -= eta*buf`.
pub fn sgd_step(
    state: &mut SgdState,
    theta: &Tensor,
    g: &Tensor,
    eta: f64,
    weight_decay: f64,
    rho: f64,
) -> Result<Tensor> {
    theta.same_shape(g)?;
    let effective = g.axpy(weight_decay, theta)?;
    let buf = match (&state.buffer, rho > 0.0) {
        (Some(b), true) => b.scaled(rho).axpy(1.0, &effective)?,
        _ => effective,
    };
    let next = theta.axpy(-eta, &buf)?;
    state.buffer = Some(buf);
    Ok(next)
}

/// Subgradient of the filter group penalty `lambda * sum_i ||theta_i||_2`,
/// choosing 0 on zero groups.
pub fn group_penalty_grad(theta: &Tensor, groups: &[Vec<usize>], lambda: f64) -> Result<Tensor> {
    let norms = group_norms(theta.data(), groups)?;
    let mut out = Tensor::zeros(theta.shape().to_vec());
    if lambda == 0.0 {
        return Ok(out);
    }
    for (gi, group) in groups.iter().enumerate() {
        if norms[gi] > 0.0 {
            for &i in group {
                out.data_mut()[i] = lambda * theta.data()[i] / norms[gi];
            }
        }
    }
    Ok(out)
}

/// Subgradient of `lambda * ||A||_*`: `lambda * U V^T` over the columns with
/// non-negligible singular values.
pub fn nuclear_subgradient(a: &Tensor, lambda: f64) -> Result<Tensor> {
    let f = svd_full(a)?;
    let cutoff = 1e-12 * f.sigma.first().copied().unwrap_or(0.0);
    let mut out = Tensor::zeros(vec![a.nrows(), a.ncols()]);
    for (l, &s) in f.sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        for i in 0..a.nrows() {
            let ui = lambda * f.u.at(i, l);
            for j in 0..a.ncols() {
                let x = out.at(i, j) + ui * f.v.at(j, l);
                out.set(i, j, x);
            }
        }
    }
    Ok(out)
}

/// Singular value thresholding: the proximal operator of the nuclear norm.
pub fn svt(a: &Tensor, threshold: f64) -> Result<Tensor> {
    let mut f = svd_full(a)?;
    for s in f.sigma.iter_mut() {
        *s = (*s - threshold).max(0.0);
    }
    Ok(f.reconstruct())
}

/// Proximal gradient step: SGD on the loss followed by singular value
/// thresholding at `eta * lambda`.
pub fn proxgd_step(
    state: &mut SgdState,
    theta: &Tensor,
    g: &Tensor,
    eta: f64,
    weight_decay: f64,
    lambda: f64,
    rho: f64,
) -> Result<Tensor> {
    let half = sgd_step(state, theta, g, eta, weight_decay, rho)?;
    svt(&half, eta * lambda)
}

/// Frank-Wolfe gap `<v_hat - theta, -grad>` with `v_hat = lmo(grad)`.
/// Non-negative for every feasible `theta`.
pub fn fw_gap(theta: &Tensor, exact_grad: &Tensor, region: &FeasibleRegion) -> Result<f64> {
    let gauge = region.gauge(theta)?;
    if gauge > region.tau() * (1.0 + 1e-9) {
        return Err(Error::InfeasiblePoint {
            gauge,
            tau: region.tau(),
        });
    }
    let v_hat = region.lmo(exact_grad)?;
    let diff = theta.axpy(-1.0, &v_hat)?;
    Ok(dot(diff.data(), exact_grad.data()))
}

/// Constants of the convergence experiment: smoothness, Lipschitz bound,
/// diameter, initial optimality gap, horizon, and the slack parameter beta.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceExperimentSpec {
    pub smoothness: f64,
    pub lipschitz: f64,
    pub diameter: f64,
    pub init_gap: f64,
    pub horizon: usize,
    pub beta: f64,
}

impl ConvergenceExperimentSpec {
    pub fn beta_lower_bound(&self) -> f64 {
        2.0 * self.init_gap / (self.smoothness * self.diameter * self.diameter)
    }

    /// The a-priori bound `D/sqrt(T) * (sqrt(h0*M*G^2*beta) + G^2 + M*G*D/(2*sqrt(2)))`.
    pub fn convergence_bound(&self) -> f64 {
        let (m, g, d) = (self.smoothness, self.lipschitz, self.diameter);
        d / (self.horizon as f64).sqrt()
            * ((self.init_gap * m * g * g * self.beta).sqrt()
                + g * g
                + m * g * d / (2.0 * 2.0f64.sqrt()))
    }
}

/// Step size and batch size prescribed by the convergence analysis:
/// `eta = sqrt(h0 / (T M D^2 G^2 beta))`, `b = T`.
pub fn theorem_schedule(spec: &ConvergenceExperimentSpec) -> Result<(f64, usize)> {
    let bound = spec.beta_lower_bound();
    if spec.beta < bound {
        return Err(Error::InvalidBeta {
            beta: spec.beta,
            bound,
        });
    }
    let t = spec.horizon as f64;
    let eta = (spec.init_gap
        / (t * spec.smoothness * spec.diameter * spec.diameter * spec.lipschitz * spec.lipschitz
            * spec.beta))
        .sqrt();
    debug_assert!(eta * spec.lipschitz <= 1.0 / (2.0 * t).sqrt() + 1e-15);
    Ok((eta, spec.horizon))
}
