//! Action-selection policies and the episode loop.
//!
//! * [`PolicyKind::Ofu`] plays the maximizer of `⟨x, θ̂⟩` over the unit
//!   ball, re-estimating every round.
//! * [`PolicyKind::OrthBatch`] plays orthonormal batches of `d` actions: the
//!   first along the current estimate, the other `d − 1` orthogonal to it.
//!   The estimate is refreshed only after each complete batch.
//! * [`PolicyKind::Random`] plays uniform directions on the sphere.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{reward, sample_theta, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, RadiusParams};
use crate::linalg::{complete_orthonormal_basis, SymMatrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Ofu,
    OrthBatch,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Ofu, PolicyKind::OrthBatch, PolicyKind::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Ofu => "ofu",
            PolicyKind::OrthBatch => "orth-batch",
            PolicyKind::Random => "random",
        }
    }

    /// Stable small index, used to derive per-policy random streams.
    pub fn index(self) -> u64 {
        match self {
            PolicyKind::Ofu => 0,
            PolicyKind::OrthBatch => 1,
            PolicyKind::Random => 2,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ofu" => Ok(PolicyKind::Ofu),
            "orth-batch" | "orth" => Ok(PolicyKind::OrthBatch),
            "random" => Ok(PolicyKind::Random),
            other => Err(Error::usage(format!(
                "unknown policy '{other}' (expected ofu, orth-batch or random)"
            ))),
        }
    }
}

/// The OFU action: `θ̂ / ‖θ̂‖₂`, or `e₁` while the estimate is zero.
pub fn ofu_select(theta_hat: &Vector) -> Vector {
    theta_hat
        .normalized()
        .unwrap_or_else(|| Vector::unit(theta_hat.dim(), 0))
}

/// An orthonormal batch whose first element points along `θ̂`.
///
/// A zero estimate (in particular before any data) plans the standard basis.
pub fn orth_batch_plan(theta_hat: &Vector) -> Vec<Vector> {
    let d = theta_hat.dim();
    if theta_hat.is_zero() {
        return (0..d).map(|i| Vector::unit(d, i)).collect();
    }
    complete_orthonormal_basis(theta_hat).expect("nonzero vector")
}

/// Per-trial working state of one policy.
#[derive(Clone, Debug)]
pub struct PolicyState {
    kind: PolicyKind,
    est: EstimatorState,
    pending: VecDeque<Vector>,
    /// Estimate used to plan the batch currently being served (orth-batch).
    planned_from: Vector,
    theta_hat: Vector,
    round: u64,
    radius: Option<RadiusParams>,
}

impl PolicyState {
    pub fn new(kind: PolicyKind, w0: SymMatrix) -> Result<Self> {
        let est = EstimatorState::init(w0)?;
        let d = est.dim();
        Ok(PolicyState {
            kind,
            est,
            pending: VecDeque::with_capacity(d),
            planned_from: Vector::zeros(d),
            theta_hat: Vector::zeros(d),
            round: 0,
            radius: None,
        })
    }

    /// Log the confidence radius β_t with every OFU round.
    pub fn with_radius(mut self, params: RadiusParams) -> Self {
        self.radius = Some(params);
        self
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.est
    }

    /// The current reported estimate (for orth-batch, the one computed at
    /// the last completed batch).
    pub fn theta_hat(&self) -> &Vector {
        &self.theta_hat
    }

    pub fn pending(&self) -> impl Iterator<Item = &Vector> {
        self.pending.iter()
    }

    pub fn planned_from(&self) -> &Vector {
        &self.planned_from
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn select<R: Rng + ?Sized>(&mut self, action_rng: &mut R) -> Vector {
        match self.kind {
            PolicyKind::Ofu => ofu_select(&self.theta_hat),
            PolicyKind::OrthBatch => {
                if self.pending.is_empty() {
                    self.planned_from = self.theta_hat.clone();
                    self.pending.extend(orth_batch_plan(&self.theta_hat));
                }
                self.pending.pop_front().expect("batch is nonempty")
            }
            PolicyKind::Random => {
                sample_theta(self.est.dim(), 1.0, action_rng).expect("valid dimension")
            }
        }
    }

    pub fn observe(&mut self, x: &Vector, y: f64) -> Result<()> {
        self.est.update(x, y)?;
        self.round += 1;
        let refresh = match self.kind {
            PolicyKind::OrthBatch => self.round.is_multiple_of(self.est.dim() as u64),
            PolicyKind::Ofu | PolicyKind::Random => true,
        };
        if refresh {
            self.theta_hat = self.est.estimate()?;
        }
        Ok(())
    }

    /// β_t for the current state, when radius logging is on for OFU.
    pub fn current_radius(&self) -> Result<Option<f64>> {
        match (self.kind, &self.radius) {
            (PolicyKind::Ofu, Some(p)) => self.est.confidence_radius(p).map(Some),
            _ => Ok(None),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub action: Vector,
    pub reward: f64,
    /// Reported estimate after this round's update.
    pub theta_hat: Vector,
    /// Confidence radius after this round (OFU with logging only).
    pub radius: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &Vector> {
        self.records.iter().map(|r| &r.action)
    }
}

/// Runs `rounds` rounds of select → reward → update from a fresh state.
///
/// Rewards draw from `noise_rng`; only the random policy touches
/// `action_rng`.
pub fn run_episode<R: Rng + ?Sized, A: Rng + ?Sized>(
    kind: PolicyKind,
    env: &EnvironmentSpec,
    rounds: usize,
    w0: SymMatrix,
    noise_rng: &mut R,
    action_rng: &mut A,
) -> Result<Trajectory> {
    let state = PolicyState::new(kind, w0)?;
    run_policy(state, env, rounds, noise_rng, action_rng)
}

/// Like [`run_episode`], starting from a caller-prepared state.
pub fn run_policy<R: Rng + ?Sized, A: Rng + ?Sized>(
    mut state: PolicyState,
    env: &EnvironmentSpec,
    rounds: usize,
    noise_rng: &mut R,
    action_rng: &mut A,
) -> Result<Trajectory> {
    if rounds == 0 {
        return Err(Error::usage("an episode needs at least one round"));
    }
    if state.est.dim() != env.dim() {
        return Err(Error::usage(format!(
            "policy dimension {} does not match environment dimension {}",
            state.est.dim(),
            env.dim()
        )));
    }
    let mut records = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let x = state.select(action_rng);
        let y = reward(&x, env, noise_rng)?;
        state.observe(&x, y)?;
        records.push(RoundRecord {
            round: state.round,
            action: x,
            reward: y,
            theta_hat: state.theta_hat.clone(),
            radius: state.current_radius()?,
        });
    }
    Ok(Trajectory { records })
}
