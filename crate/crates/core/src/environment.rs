//! The stochastic linear bandit environment.
//!
//! A hidden parameter θ* with ‖θ*‖₂ ≤ S, the unit-ball decision set, and
//! rewards `⟨x, θ*⟩ + η` with i.i.d. centered sub-Gaussian noise η.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Slack allowed on the unit-ball constraint for decisions.
pub const BALL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    /// Uniform on `[-σ√3, σ√3]`, which has variance σ².
    BoundedUniform,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "bounded-uniform" | "uniform" => Ok(NoiseKind::BoundedUniform),
            other => Err(Error::usage(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// Zero-mean noise with variance σ² (and sub-Gaussian variance proxy σ²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::usage(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        Ok(NoiseModel { kind, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Draws one noise value. Always consumes exactly one draw from `rng`,
    /// including when σ = 0, so streams stay aligned across noise levels.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            NoiseKind::BoundedUniform => {
                let u: f64 = rng.random_range(-1.0..1.0);
                self.sigma * 3f64.sqrt() * u
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct EnvironmentSpec {
    theta_star: Vector,
    norm_bound: f64,
    noise: NoiseModel,
}

impl EnvironmentSpec {
    pub fn new(theta_star: Vector, norm_bound: f64, noise: NoiseModel) -> Result<Self> {
        if !(norm_bound > 0.0) || !norm_bound.is_finite() {
            return Err(Error::usage(format!(
                "norm bound S must be > 0, got {norm_bound}"
            )));
        }
        let norm = theta_star.norm();
        if norm > norm_bound * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "theta_star has norm {norm} exceeding the bound S = {norm_bound}"
            )));
        }
        Ok(EnvironmentSpec {
            theta_star,
            norm_bound,
            noise,
        })
    }

    pub fn dim(&self) -> usize {
        self.theta_star.dim()
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
}

/// θ* drawn uniformly on the sphere of radius `norm` in ℝᵈ.
pub fn sample_theta<R: Rng + ?Sized>(d: usize, norm: f64, rng: &mut R) -> Result<Vector> {
    if d == 0 {
        return Err(Error::usage("dimension must be at least 1"));
    }
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::usage(format!("norm must be > 0, got {norm}")));
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let g = Vector::new(g)?;
        if let Some(dir) = g.normalized() {
            return Ok(dir.scaled(norm));
        }
    }
}

/// One reward `⟨x, θ*⟩ + η` for a decision in the unit ball.
pub fn reward<R: Rng + ?Sized>(x: &Vector, env: &EnvironmentSpec, rng: &mut R) -> Result<f64> {
    if x.dim() != env.dim() {
        return Err(Error::usage(format!(
            "decision has dimension {}, environment has {}",
            x.dim(),
            env.dim()
        )));
    }
    let n = x.norm();
    if n > 1.0 + BALL_TOL {
        return Err(Error::domain(format!(
            "decision norm {n} lies outside the unit ball"
        )));
    }
    Ok(x.dot(&env.theta_star) + env.noise.sample(rng))
}

/// An independent generator for stream `stream` under master seed `seed`.
///
/// ChaCha is counter based, so streams are cheap to derive and independent
/// of how work is scheduled across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_in_one_dimension_is_plus_or_minus_one() {
        let mut rng = stream_rng(1, 0);
        for _ in 0..20 {
            let t = sample_theta(1, 1.0, &mut rng).unwrap();
            assert!((t[0].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn theta_has_exact_norm() {
        let mut rng = stream_rng(2, 0);
        for d in 1..9 {
            for &s in &[0.5, 1.0, 3.0] {
                let t = sample_theta(d, s, &mut rng).unwrap();
                assert!((t.norm() - s).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn theta_moments_match_uniform_sphere() {
        let mut rng = stream_rng(3, 0);
        let n = 100_000;
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for _ in 0..n {
            let t = sample_theta(3, 1.0, &mut rng).unwrap();
            for i in 0..3 {
                mean[i] += t[i] / n as f64;
                for j in 0..3 {
                    second[i][j] += t[i] * t[j] / n as f64;
                }
            }
        }
        for i in 0..3 {
            assert!(mean[i].abs() < 0.02, "mean[{i}] = {}", mean[i]);
            for j in 0..3 {
                let expect = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((second[i][j] - expect).abs() < 0.02);
            }
        }
    }

    #[test]
    fn sample_theta_validates() {
        let mut rng = stream_rng(0, 0);
        assert!(sample_theta(0, 1.0, &mut rng).unwrap_err().is_usage());
        assert!(sample_theta(2, 0.0, &mut rng).unwrap_err().is_usage());
    }

    #[test]
    fn noiseless_rewards() {
        let env = EnvironmentSpec::new(Vector::unit(2, 0), 1.0, NoiseModel::gaussian(0.0).unwrap())
            .unwrap();
        let mut rng = stream_rng(0, 0);
        assert_eq!(reward(&Vector::unit(2, 0), &env, &mut rng).unwrap(), 1.0);
        assert_eq!(reward(&Vector::unit(2, 1), &env, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn reward_rejects_decisions_outside_ball() {
        let env = EnvironmentSpec::new(Vector::unit(2, 0), 1.0, NoiseModel::gaussian(1.0).unwrap())
            .unwrap();
        let x = Vector::new(vec![1.0, 0.1]).unwrap();
        let mut rng = stream_rng(0, 0);
        assert!(matches!(reward(&x, &env, &mut rng), Err(Error::Domain(_))));
        assert!(reward(&Vector::unit(3, 0), &env, &mut rng)
            .unwrap_err()
            .is_usage());
    }

    #[test]
    fn environment_rejects_theta_above_bound() {
        let theta = Vector::new(vec![2.0, 0.0]).unwrap();
        assert!(EnvironmentSpec::new(theta, 1.0, NoiseModel::gaussian(1.0).unwrap()).is_err());
    }

    #[test]
    fn reward_mean_is_inner_product() {
        let theta = Vector::new(vec![0.6, -0.8]).unwrap();
        let env = EnvironmentSpec::new(theta, 1.0, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        let x = Vector::new(vec![0.5, 0.5]).unwrap();
        let mut rng = stream_rng(9, 4);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| reward(&x, &env, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - (-0.1)).abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn noise_variance_matches_sigma_squared() {
        for kind in [NoiseKind::Gaussian, NoiseKind::BoundedUniform] {
            let noise = NoiseModel::new(kind, 1.5).unwrap();
            let mut rng = stream_rng(5, 1);
            let n = 100_000;
            let draws: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((var / 2.25 - 1.0).abs() < 0.03, "{kind:?}: var {var}");
            if kind == NoiseKind::BoundedUniform {
                let cap = 1.5 * 3f64.sqrt();
                assert!(draws.iter().all(|x| x.abs() <= cap));
            }
        }
    }

    #[test]
    fn identical_seed_gives_identical_stream() {
        let theta = Vector::new(vec![0.3, 0.4]).unwrap();
        let env = EnvironmentSpec::new(theta, 1.0, NoiseModel::gaussian(1.0).unwrap()).unwrap();
        let x = Vector::unit(2, 1);
        let a: Vec<f64> = {
            let mut rng = stream_rng(42, 17);
            (0..100)
                .map(|_| reward(&x, &env, &mut rng).unwrap())
                .collect()
        };
        let b: Vec<f64> = std::thread::spawn(move || {
            let mut rng = stream_rng(42, 17);
            (0..100)
                .map(|_| reward(&x, &env, &mut rng).unwrap())
                .collect()
        })
        .join()
        .unwrap();
        assert_eq!(a, b);
    }
}
