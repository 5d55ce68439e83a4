//! Regret and estimation-error metrics, and closed-form bound evaluators.
//!
//! The MSE evaluators use the exact finite-`t` expressions (not their
//! asymptotic headline forms); the headline forms are exposed separately
//! for plotting. Throughout, `l = t/d` is the number of complete orthonormal
//! batches and is treated as a real number.

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};
use crate::policies::Trajectory;

/// Problem constants shared by the bound evaluators.
#[derive(Clone, Debug)]
pub struct BoundParams {
    /// Round index `t ≥ 1`.
    pub t: f64,
    pub d: usize,
    pub sigma: f64,
    pub w0: SymMatrix,
    pub theta_star: Vector,
    /// Norm bound `S ≥ ‖θ*‖₂`.
    pub norm_bound: f64,
    pub delta: f64,
}

impl BoundParams {
    pub fn new(
        t: f64,
        sigma: f64,
        w0: SymMatrix,
        theta_star: Vector,
        norm_bound: f64,
        delta: f64,
    ) -> Result<Self> {
        let d = w0.dim();
        if theta_star.dim() != d {
            return Err(Error::usage(format!(
                "theta_star has dimension {}, W0 has {d}",
                theta_star.dim()
            )));
        }
        if !(t >= 1.0) {
            return Err(Error::usage(format!("t must be >= 1, got {t}")));
        }
        if !(sigma >= 0.0) {
            return Err(Error::usage(format!("sigma must be >= 0, got {sigma}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::usage(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(norm_bound >= 0.0) {
            return Err(Error::usage(format!("S must be >= 0, got {norm_bound}")));
        }
        w0.cholesky()?;
        Ok(BoundParams {
            t,
            d,
            sigma,
            w0,
            theta_star,
            norm_bound,
            delta,
        })
    }

    /// Parameters with `W₀ = κI`.
    pub fn isotropic(
        t: f64,
        sigma: f64,
        kappa: f64,
        theta_star: Vector,
        norm_bound: f64,
        delta: f64,
    ) -> Result<Self> {
        let w0 = SymMatrix::scaled_identity(theta_star.dim(), kappa);
        Self::new(t, sigma, w0, theta_star, norm_bound, delta)
    }

    pub fn at(&self, t: f64) -> Self {
        BoundParams { t, ..self.clone() }
    }

    /// `θ*ᵀW₀²θ* = ‖W₀θ*‖²`.
    fn bias_energy(&self) -> f64 {
        self.w0.mul_vec(&self.theta_star).norm_sq()
    }

    fn kappa(&self) -> Result<f64> {
        self.w0
            .as_scaled_identity()
            .ok_or_else(|| Error::usage("this bound requires W0 = kappa * I"))
    }
}

/// `r = ‖θ*‖ − ⟨x, θ*⟩`, the gap to the best unit-ball action.
pub fn instantaneous_regret(x: &Vector, theta_star: &Vector) -> f64 {
    (theta_star.norm() - x.dot(theta_star)).max(0.0)
}

/// Prefix sums `R_1, …, R_T` of the instantaneous regret.
pub fn cumulative_regret(traj: &Trajectory, theta_star: &Vector) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(Error::usage("cumulative regret of an empty trajectory"));
    }
    Ok(traj
        .actions()
        .scan(0.0, |acc, x| {
            *acc += instantaneous_regret(x, theta_star);
            Some(*acc)
        })
        .collect())
}

pub fn squared_error(theta_hat: &Vector, theta_star: &Vector) -> f64 {
    theta_hat.sub(theta_star).norm_sq()
}

/// High-probability cumulative regret bound of the OFU policy after `n`
/// rounds, evaluated exactly as
/// `4√(n d log(κ + n/d)) · (√κ S + σ²√(2 log(1/δ) + d log(1 + n/(κd))))`.
pub fn ofu_regret_bound(params: &BoundParams, n: f64) -> Result<f64> {
    let kappa = params.kappa()?;
    if n <= 0.0 {
        return Ok(0.0);
    }
    let d = params.d as f64;
    let sigma2 = params.sigma * params.sigma;
    let lead = 4.0 * (n * d * (kappa + n / d).ln()).sqrt();
    let width = kappa.sqrt() * params.norm_bound
        + sigma2 * (2.0 * (1.0 / params.delta).ln() + d * (1.0 + n / (kappa * d)).ln()).sqrt();
    Ok(lead * width)
}

/// `σ²(1 − δ)`: the level below which the limiting OFU mean squared error
/// cannot fall.
pub fn ofu_inconsistency_floor(sigma: f64, delta: f64) -> f64 {
    sigma * sigma * (1.0 - delta)
}

/// `(d²/t²)·θ*ᵀW₀²θ* + (d²/t)·σ²`, the orth-batch MSE upper bound.
pub fn mse_upper_bound(p: &BoundParams) -> f64 {
    let d2 = (p.d * p.d) as f64;
    d2 / (p.t * p.t) * p.bias_energy() + d2 / p.t * p.sigma * p.sigma
}

/// Leading term `d²σ²/t` of [`mse_upper_bound`].
pub fn mse_upper_headline(p: &BoundParams) -> f64 {
    (p.d * p.d) as f64 * p.sigma * p.sigma / p.t
}

/// Squared-error level exceeded with probability at most `e^{−t}` by the
/// orth-batch policy:
///
/// `(d²/t²)θ*ᵀW₀²θ* + σ²(d²/t + 3√(d³/t))
///   + λ_max(W₀)‖θ*‖ (dσ²/t)(d²/t + 3√(d³/t))^{1/2}`.
pub fn mse_tail_threshold(p: &BoundParams) -> f64 {
    let d = p.d as f64;
    let t = p.t;
    let s2 = p.sigma * p.sigma;
    let spread = d * d / t + 3.0 * (d * d * d / t).sqrt();
    let bias = d * d / (t * t) * p.bias_energy();
    let cross = p.w0.lambda_max() * p.theta_star.norm() * (d * s2 / t) * spread.sqrt();
    bias + s2 * spread + cross
}

/// Leading term `3σ²d^{3/2}/√t` of [`mse_tail_threshold`].
pub fn mse_tail_headline(p: &BoundParams) -> f64 {
    3.0 * p.sigma * p.sigma * (p.d as f64).powf(1.5) / p.t.sqrt()
}

/// `(θ*ᵀW₀²θ* + tσ²) / (tr(W₀) + t)²`, a lower bound on the MSE of any
/// unit-sphere action sequence.
pub fn mse_lower_bound(p: &BoundParams) -> f64 {
    let denom = p.w0.trace() + p.t;
    (p.bias_energy() + p.t * p.sigma * p.sigma) / (denom * denom)
}

/// Asymptotic form `σ²/t` of [`mse_lower_bound`].
pub fn mse_lower_headline(p: &BoundParams) -> f64 {
    p.sigma * p.sigma / p.t
}

/// Quadratic-form concentration threshold
/// `σ²(tr A + 2√(tr A² · u) + ‖A‖·u)`, exceeded by the sub-Gaussian
/// quadratic form with probability at most `e^{−u}`.
pub fn hsu_threshold(trace: f64, trace_sq: f64, opnorm: f64, sigma: f64, u: f64) -> f64 {
    sigma * sigma * (trace + 2.0 * (trace_sq * u).sqrt() + opnorm * u)
}

/// Spectral summaries of the design `Xₜ` after `l` orthonormal batches in ℝᵈ,
/// as fed to [`hsu_threshold`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignStats {
    /// `tr(XₜᵀXₜ) = l d`
    pub trace: f64,
    /// `tr((XₜᵀXₜ)²) = l² d`
    pub trace_sq: f64,
    /// `‖Xₜ‖₂ = √l`
    pub opnorm: f64,
}

pub fn orth_batch_design_stats(l: f64, d: usize) -> DesignStats {
    let d = d as f64;
    DesignStats {
        trace: l * d,
        trace_sq: l * l * d,
        opnorm: l.sqrt(),
    }
}

/// Exact orth-batch MSE after `l` complete batches with `W₀ = κI`:
/// `(κ²‖θ*‖² + d l σ²) / (κ + l)²`.
pub fn orth_batch_exact_mse(kappa: f64, theta_norm: f64, sigma: f64, d: usize, l: f64) -> f64 {
    let denom = (kappa + l) * (kappa + l);
    (kappa * kappa * theta_norm * theta_norm + d as f64 * l * sigma * sigma) / denom
}
