//! Regularized least squares `θ̂ = (XᵀX + W₀)⁻¹ XᵀY` kept in recursive form.

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

/// Running state of the regularized least-squares estimator.
///
/// `w = W₀ + Σ xᵢxᵢᵀ` and `s = Σ xᵢyᵢ`. The log-determinant of `w` is
/// maintained incrementally through `det(W + xxᵀ) = det(W)(1 + xᵀW⁻¹x)`.
#[derive(Clone, Debug)]
pub struct EstimatorState {
    w: SymMatrix,
    s: Vector,
    w0: SymMatrix,
    t: u64,
    log_det_w0: f64,
    log_det_w: f64,
}

impl EstimatorState {
    pub fn init(w0: SymMatrix) -> Result<Self> {
        let log_det_w0 = w0.cholesky()?.log_det();
        let d = w0.dim();
        Ok(EstimatorState {
            w: w0.clone(),
            s: Vector::zeros(d),
            w0,
            t: 0,
            log_det_w0,
            log_det_w: log_det_w0,
        })
    }

    pub fn dim(&self) -> usize {
        self.w0.dim()
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.w
    }

    pub fn moments(&self) -> &Vector {
        &self.s
    }

    pub fn regularizer(&self) -> &SymMatrix {
        &self.w0
    }

    pub fn rounds(&self) -> u64 {
        self.t
    }

    pub fn log_det_w0(&self) -> f64 {
        self.log_det_w0
    }

    pub fn log_det(&self) -> f64 {
        self.log_det_w
    }

    pub fn update(&mut self, x: &Vector, y: f64) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::usage(format!(
                "update with dimension {} on a {}-dimensional estimator",
                x.dim(),
                self.dim()
            )));
        }
        if !y.is_finite() {
            return Err(Error::domain("reward is not finite"));
        }
        if !x.is_zero() {
            let leverage = self.w.cholesky()?.quad_form_inverse(x)?;
            self.log_det_w += leverage.ln_1p();
            self.w.add_outer(x)?;
            self.s.axpy(y, x);
        }
        self.t += 1;
        Ok(())
    }

    /// θ̂ = W⁻¹s, recomputed from scratch on every call.
    pub fn estimate(&self) -> Result<Vector> {
        self.w.cholesky()?.solve(&self.s)
    }

    /// Radius β of the confidence ellipsoid `{θ : ‖θ̂ − θ‖_W ≤ β}`.
    ///
    /// Requires `W₀ = κI` with κ equal to `params.kappa`.
    pub fn confidence_radius(&self, params: &RadiusParams) -> Result<f64> {
        let RadiusParams {
            delta,
            sigma,
            norm_bound,
            kappa,
            mode,
        } = *params;
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::usage(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        match self.w0.as_scaled_identity() {
            Some(k) if k == kappa => {}
            Some(k) => {
                return Err(Error::usage(format!(
                    "kappa = {kappa} does not match the regularizer {k}·I"
                )))
            }
            None => return Err(Error::usage("confidence radius requires W0 = kappa * I")),
        }
        let d = self.dim() as f64;
        let log_ratio = 0.5 * (self.log_det_w - d * kappa.ln()) - delta.ln();
        let noise_scale = match mode {
            RadiusMode::SelfNormalized => sigma,
            RadiusMode::Literal => sigma * sigma,
        };
        Ok(noise_scale * (2.0 * log_ratio.max(0.0)).sqrt() + kappa.sqrt() * norm_bound)
    }
}

/// How the noise scale enters the confidence radius.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RadiusMode {
    /// `σ·√(2 log(...))`, the usual self-normalized bound.
    #[default]
    SelfNormalized,
    /// `σ²·√(2 log(...))`, the variant printed with a squared noise scale.
    Literal,
}

#[derive(Clone, Copy, Debug)]
pub struct RadiusParams {
    pub delta: f64,
    pub sigma: f64,
    pub norm_bound: f64,
    pub kappa: f64,
    pub mode: RadiusMode,
}
