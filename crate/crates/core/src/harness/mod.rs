//! Monte Carlo experiment runner.
//!
//! Trials are independent and run in parallel. Each trial derives its own
//! random streams from `(seed, trial, purpose)`, and results are aggregated
//! in trial order, so output depends only on the configuration and never on
//! the worker count.

mod config;
mod output;

pub use config::{parse_policies, ConfigOverrides, ExperimentConfig, ThetaMode};
pub use output::{
    emit_bounds, emit_curves, format_for_path, parse_curves, read_curves, render_bounds,
    render_curves, write_text, BoundsRow, CurvePoint, Format, BOUNDS_COLUMNS, CURVE_COLUMNS,
};

use rayon::prelude::*;

use crate::analysis::{
    cumulative_regret, mse_lower_bound, mse_tail_threshold, mse_upper_bound,
    ofu_inconsistency_floor, ofu_regret_bound, squared_error, BoundParams,
};
use crate::environment::{sample_theta, stream_rng, EnvironmentSpec, NoiseModel};
use crate::error::{Error, Result};
use crate::estimator::RadiusParams;
use crate::linalg::{SymMatrix, Vector};
use crate::policies::{run_policy, PolicyKind, PolicyState};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "LINBANDIT_THREADS";

const STREAMS_PER_TRIAL: u64 = 8;
const FIXED_THETA_STREAM: u64 = u64::MAX;

/// What a random stream is used for within one trial.
#[derive(Clone, Copy, Debug)]
enum Purpose {
    Theta,
    SharedNoise,
    Noise(PolicyKind),
    Actions(PolicyKind),
}

fn stream_id(trial: usize, purpose: Purpose) -> u64 {
    let offset = match purpose {
        Purpose::Theta => 0,
        Purpose::SharedNoise => 1,
        Purpose::Noise(p) => 2 + p.index(),
        Purpose::Actions(p) => 5 + p.index(),
    };
    trial as u64 * STREAMS_PER_TRIAL + offset
}

/// Per-policy measurements of one trial on the recording grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTrace {
    pub policy: PolicyKind,
    pub squared_error: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    /// OFU confidence radius after the final round.
    pub final_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub theta_star: Vector,
    pub traces: Vec<PolicyTrace>,
}

impl TrialResult {
    pub fn trace(&self, policy: PolicyKind) -> Option<&PolicyTrace> {
        self.traces.iter().find(|t| t.policy == policy)
    }
}

fn theta_for_trial(config: &ExperimentConfig, trial: usize) -> Result<Vector> {
    let stream = match config.theta_mode {
        ThetaMode::ResamplePerTrial => stream_id(trial, Purpose::Theta),
        ThetaMode::Fixed => FIXED_THETA_STREAM,
    };
    let mut rng = stream_rng(config.seed, stream);
    sample_theta(config.dim, config.theta_norm, &mut rng)
}

/// The θ* used for every trial in `fixed` mode.
pub fn fixed_theta(config: &ExperimentConfig) -> Result<Vector> {
    let mut rng = stream_rng(config.seed, FIXED_THETA_STREAM);
    sample_theta(config.dim, config.theta_norm, &mut rng)
}

/// Runs every configured policy on trial `trial`.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    let theta = theta_for_trial(config, trial)?;
    let noise = NoiseModel::new(config.noise, config.sigma)?;
    let env = EnvironmentSpec::new(theta.clone(), config.theta_norm, noise)?;
    let grid = config.recording_grid();
    let radius = RadiusParams {
        delta: config.delta,
        sigma: config.sigma,
        norm_bound: config.theta_norm,
        kappa: config.kappa,
        mode: config.radius_mode(),
    };

    let mut traces = Vec::with_capacity(config.policies.len());
    for &policy in &config.policies {
        let noise_purpose = if config.shared_noise {
            Purpose::SharedNoise
        } else {
            Purpose::Noise(policy)
        };
        let mut noise_rng = stream_rng(config.seed, stream_id(trial, noise_purpose));
        let mut action_rng = stream_rng(config.seed, stream_id(trial, Purpose::Actions(policy)));
        let w0 = SymMatrix::scaled_identity(config.dim, config.kappa);
        let state = PolicyState::new(policy, w0)?.with_radius(radius);
        let traj = run_policy(state, &env, config.rounds, &mut noise_rng, &mut action_rng)?;
        let regret = cumulative_regret(&traj, &theta)?;
        traces.push(PolicyTrace {
            policy,
            squared_error: grid
                .iter()
                .map(|&t| squared_error(&traj.records[t - 1].theta_hat, &theta))
                .collect(),
            cumulative_regret: grid.iter().map(|&t| regret[t - 1]).collect(),
            final_radius: traj.records.last().and_then(|r| r.radius),
        });
    }
    Ok(TrialResult {
        trial,
        theta_star: theta,
        traces,
    })
}

/// Worker cap from `LINBANDIT_THREADS`, or `None` when unset.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(Error::usage(format!("{THREADS_ENV}: {e}"))),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::usage(format!(
                "{THREADS_ENV}: expected a positive integer, got '{v}'"
            ))),
        },
    }
}

/// Runs all trials on `workers` threads (hardware default when `None`).
/// Results are returned in trial order.
pub fn run_trials(config: &ExperimentConfig, workers: Option<usize>) -> Result<Vec<TrialResult>> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| run_trial(config, i))
            .collect()
    })
}

/// Sample mean and standard error (`sd / √n`, zero for a single sample),
/// summed in the order given.
fn mean_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    let mean = values.clone().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Per-round mean and standard error across trials, policy by policy.
pub fn aggregate(config: &ExperimentConfig, trials: &[TrialResult]) -> Result<Vec<CurvePoint>> {
    if trials.is_empty() {
        return Err(Error::usage("no trials to aggregate"));
    }
    let mut ordered: Vec<&TrialResult> = trials.iter().collect();
    ordered.sort_by_key(|t| t.trial);
    let grid = config.recording_grid();
    let mut curves = Vec::with_capacity(grid.len() * config.policies.len());
    for &policy in &config.policies {
        let traces: Vec<&PolicyTrace> = ordered
            .iter()
            .map(|t| {
                t.trace(policy)
                    .ok_or_else(|| Error::usage(format!("trial {} lacks policy {policy}", t.trial)))
            })
            .collect::<Result<_>>()?;
        for (k, &round) in grid.iter().enumerate() {
            let (mse_mean, mse_stderr) = mean_stderr(traces.iter().map(|t| t.squared_error[k]));
            let (regret_mean, regret_stderr) =
                mean_stderr(traces.iter().map(|t| t.cumulative_regret[k]));
            curves.push(CurvePoint {
                policy,
                round: round as u64,
                mse_mean,
                mse_stderr,
                regret_mean,
                regret_stderr,
                n_trials: traces.len() as u64,
            });
        }
    }
    Ok(curves)
}

/// Runs the experiment and aggregates it into curves.
pub fn run_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
) -> Result<Vec<CurvePoint>> {
    let trials = run_trials(config, workers)?;
    aggregate(config, &trials)
}

/// Bound parameters matching an experiment at round `t`.
///
/// With `W₀ = κI` the bounds depend on θ* only through ‖θ*‖ = S, so for
/// resampled θ* the representative `S·e₁` is used.
pub fn bound_params(config: &ExperimentConfig, t: f64) -> Result<BoundParams> {
    config.validate()?;
    let theta = match config.theta_mode {
        ThetaMode::Fixed => fixed_theta(config)?,
        ThetaMode::ResamplePerTrial => Vector::unit(config.dim, 0).scaled(config.theta_norm),
    };
    BoundParams::isotropic(
        t,
        config.sigma,
        config.kappa,
        theta,
        config.theta_norm,
        config.delta,
    )
}

/// Bound overlays on the recording grid.
pub fn bounds_table(config: &ExperimentConfig) -> Result<Vec<BoundsRow>> {
    let base = bound_params(config, 1.0)?;
    let floor = ofu_inconsistency_floor(config.sigma, config.delta);
    config
        .recording_grid()
        .into_iter()
        .map(|round| {
            let p = base.at(round as f64);
            Ok(BoundsRow {
                round: round as u64,
                mse_upper: mse_upper_bound(&p),
                mse_lower: mse_lower_bound(&p),
                tail_threshold: mse_tail_threshold(&p),
                ofu_floor: floor,
                ofu_regret_bound: ofu_regret_bound(&p, round as f64)?,
            })
        })
        .collect()
}

/// `(round, mse_mean)` pairs of one policy's curve.
pub fn mse_series(curves: &[CurvePoint], policy: PolicyKind) -> Vec<(f64, f64)> {
    curves
        .iter()
        .filter(|c| c.policy == policy)
        .map(|c| (c.round as f64, c.mse_mean))
        .collect()
}

/// Least-squares slope of `log(mse)` against `log(t)` over `t_min ≤ t ≤ t_max`.
pub fn fit_loglog_slope(points: &[(f64, f64)], t_min: f64, t_max: f64) -> Result<f64> {
    let selected: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, _)| *t >= t_min && *t <= t_max)
        .copied()
        .collect();
    if selected.len() < 5 {
        return Err(Error::usage(format!(
            "slope fit needs at least 5 points in [{t_min}, {t_max}], found {}",
            selected.len()
        )));
    }
    if let Some((t, m)) = selected.iter().find(|(t, m)| !(*t > 0.0 && *m > 0.0)) {
        return Err(Error::usage(format!(
            "log-log fit needs positive values, got t = {t}, mse = {m}"
        )));
    }
    let xs: Vec<f64> = selected.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = selected.iter().map(|(_, m)| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::usage("slope fit needs at least two distinct rounds"));
    }
    Ok(sxy / sxx)
}

/// Headline numbers of an OFU vs. orth-batch comparison.
#[derive(Clone, Debug)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub early_round: u64,
    pub early_mse: f64,
    pub final_round: u64,
    pub final_mse: f64,
    pub final_stderr: f64,
    pub final_regret: f64,
    /// `final_mse / early_mse`; near 1 for a plateau, near `early/final` rounds
    /// for a `1/t` decay.
    pub ratio: f64,
    pub slope: Option<f64>,
    pub mean_final_radius: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ComparisonSummary {
    pub policies: Vec<PolicySummary>,
    pub ofu_floor: f64,
    pub orth_exact_mse: Option<f64>,
}

/// Summarizes curves at the final round against the round nearest `T/10`.
pub fn summarize(
    config: &ExperimentConfig,
    trials: &[TrialResult],
    curves: &[CurvePoint],
) -> Result<ComparisonSummary> {
    let grid = config.recording_grid();
    let target = (config.rounds as f64 / 10.0).max(1.0);
    let early = *grid
        .iter()
        .min_by(|a, b| {
            (**a as f64 - target)
                .abs()
                .total_cmp(&(**b as f64 - target).abs())
        })
        .expect("grid is nonempty") as u64;
    let final_round = config.rounds as u64;
    let mut policies = Vec::new();
    for &policy in &config.policies {
        let at = |round: u64| {
            curves
                .iter()
                .find(|c| c.policy == policy && c.round == round)
                .ok_or_else(|| Error::usage(format!("curve for {policy} lacks round {round}")))
        };
        let e = at(early)?;
        let f = at(final_round)?;
        let series = mse_series(curves, policy);
        let slope =
            fit_loglog_slope(&series, config.rounds as f64 / 6.0, config.rounds as f64).ok();
        let radii: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.trace(policy).and_then(|tr| tr.final_radius))
            .collect();
        let mean_final_radius =
            (!radii.is_empty()).then(|| radii.iter().sum::<f64>() / radii.len() as f64);
        policies.push(PolicySummary {
            policy,
            early_round: early,
            early_mse: e.mse_mean,
            final_round,
            final_mse: f.mse_mean,
            final_stderr: f.mse_stderr,
            final_regret: f.regret_mean,
            ratio: f.mse_mean / e.mse_mean,
            slope,
            mean_final_radius,
        });
    }
    let l = (config.rounds / config.dim) as f64;
    Ok(ComparisonSummary {
        policies,
        ofu_floor: ofu_inconsistency_floor(config.sigma, config.delta),
        orth_exact_mse: config.policies.contains(&PolicyKind::OrthBatch).then(|| {
            crate::analysis::orth_batch_exact_mse(
                config.kappa,
                config.theta_norm,
                config.sigma,
                config.dim,
                l,
            )
        }),
    })
}
