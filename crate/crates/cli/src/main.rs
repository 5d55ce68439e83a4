use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linbandit::environment::NoiseKind;
use linbandit::harness::{
    self, parse_policies, ConfigOverrides, ExperimentConfig, Format, ThetaMode,
};
use linbandit::{Error, PolicyKind, Result};

#[derive(Parser)]
#[command(
    name = "linbandit",
    version,
    about = "Linear bandit estimation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and emit MSE / regret curves.
    Simulate(ExperimentArgs),
    /// Emit the closed-form bound curves on the recording grid.
    Bounds(ExperimentArgs),
    /// Fit the log-log slope of a curves file.
    Slope(SlopeArgs),
    /// Run OFU against orth-batch and print a plateau / decay summary.
    Compare(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with default values for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of ofu, orth-batch, random.
    #[arg(long)]
    policies: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    theta_norm: Option<f64>,
    /// resample-per-trial or fixed.
    #[arg(long, value_parser = parse_from_str::<ThetaMode>)]
    theta_mode: Option<ThetaMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    record_every: Option<usize>,
    /// Use σ² instead of σ in the OFU confidence radius.
    #[arg(long)]
    beta_literal: bool,
    /// Drive all policies with the same noise sequence.
    #[arg(long)]
    shared_noise: bool,
    /// Confidence level δ of the radius and bounds.
    #[arg(long)]
    delta: Option<f64>,
    /// gaussian or bounded-uniform.
    #[arg(long, value_parser = parse_from_str::<NoiseKind>)]
    noise: Option<NoiseKind>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; inferred from the --out extension when absent.
    #[arg(long, value_parser = parse_from_str::<Format>)]
    format: Option<Format>,
}

#[derive(Args)]
struct SlopeArgs {
    /// Curves file written by `simulate` (CSV, or JSON by extension).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    tmin: f64,
    #[arg(long)]
    tmax: f64,
    /// Only fit this policy.
    #[arg(long, value_parser = parse_from_str::<PolicyKind>)]
    policy: Option<PolicyKind>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Resolved {
    config: ExperimentConfig,
    out: Option<PathBuf>,
    format: Format,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<Resolved> {
        let file = match &self.config {
            Some(path) => ConfigOverrides::from_json_file(path)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            dim: self.dim,
            rounds: self.rounds,
            trials: self.trials,
            policies: self.policies.as_deref().map(parse_policies).transpose()?,
            sigma: self.sigma,
            kappa: self.kappa,
            theta_norm: self.theta_norm,
            theta_mode: self.theta_mode,
            seed: self.seed,
            record_every: self.record_every,
            beta_literal: self.beta_literal.then_some(true),
            shared_noise: self.shared_noise.then_some(true),
            noise: self.noise,
            delta: self.delta,
            out: self.out.clone(),
            format: self.format,
        };
        let merged = file.overlay(flags);
        let config = merged.apply(ExperimentConfig::default());
        config.validate()?;
        let format = merged
            .format
            .or_else(|| merged.out.as_deref().map(harness::format_for_path))
            .unwrap_or(Format::Csv);
        Ok(Resolved {
            config,
            out: merged.out,
            format,
        })
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => harness::write_text(path, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

fn simulate(args: &ExperimentArgs) -> Result<()> {
    let r = args.resolve()?;
    let workers = harness::workers_from_env()?;
    let curves = harness::run_experiment(&r.config, workers)?;
    emit(&harness::render_curves(&curves, r.format), r.out.as_deref())
}

fn bounds(args: &ExperimentArgs) -> Result<()> {
    let r = args.resolve()?;
    let rows = harness::bounds_table(&r.config)?;
    emit(&harness::render_bounds(&rows, r.format), r.out.as_deref())
}

fn slope(args: &SlopeArgs) -> Result<()> {
    let curves = harness::read_curves(&args.input)?;
    let mut policies: Vec<PolicyKind> = Vec::new();
    for c in &curves {
        if !policies.contains(&c.policy) {
            policies.push(c.policy);
        }
    }
    if let Some(p) = args.policy {
        if !policies.contains(&p) {
            return Err(Error::Usage(format!(
                "policy: {p} does not appear in {}",
                args.input.display()
            )));
        }
        policies = vec![p];
    }
    if policies.is_empty() {
        return Err(Error::Usage(format!(
            "{} holds no curves",
            args.input.display()
        )));
    }
    for p in policies {
        let s = harness::fit_loglog_slope(&harness::mse_series(&curves, p), args.tmin, args.tmax)?;
        println!("{p}\t{s:.6}");
    }
    Ok(())
}

fn compare(args: &ExperimentArgs) -> Result<()> {
    let mut r = args.resolve()?;
    r.config.policies = vec![PolicyKind::Ofu, PolicyKind::OrthBatch];
    let workers = harness::workers_from_env()?;
    let trials = harness::run_trials(&r.config, workers)?;
    let curves = harness::aggregate(&r.config, &trials)?;
    if let Some(path) = &r.out {
        harness::write_text(path, &harness::render_curves(&curves, r.format))?;
    }
    let summary = harness::summarize(&r.config, &trials, &curves)?;
    let cfg = &r.config;
    println!(
        "d={} T={} trials={} sigma={} kappa={} S={} seed={}",
        cfg.dim, cfg.rounds, cfg.trials, cfg.sigma, cfg.kappa, cfg.theta_norm, cfg.seed
    );
    println!(
        "{:<11} {:>12} {:>12} {:>12} {:>8} {:>8}  shape",
        "policy", "mse_early", "mse_final", "stderr", "ratio", "slope"
    );
    for p in &summary.policies {
        let shape = if p.ratio >= 0.5 {
            "plateau"
        } else if p.ratio <= 0.25 {
            "decay"
        } else {
            "slow decay"
        };
        let slope = p.slope.map_or("n/a".to_string(), |s| format!("{s:.3}"));
        println!(
            "{:<11} {:>12.4e} {:>12.4e} {:>12.2e} {:>8.3} {:>8}  {shape}",
            p.policy.as_str(),
            p.early_mse,
            p.final_mse,
            p.final_stderr,
            p.ratio,
            slope
        );
    }
    let first = &summary.policies[0];
    println!(
        "rounds compared: {} and {}",
        first.early_round, first.final_round
    );
    if let Some(ofu) = summary
        .policies
        .iter()
        .find(|p| p.policy == PolicyKind::Ofu)
    {
        println!(
            "ofu plateau {:.4} vs floor sigma^2(1-delta) = {:.4}",
            ofu.final_mse, summary.ofu_floor
        );
        if let Some(beta) = ofu.mean_final_radius {
            let mode = if cfg.beta_literal {
                "literal"
            } else {
                "self-normalized"
            };
            println!("ofu mean confidence radius at T ({mode}): {beta:.4}");
        }
        println!("ofu mean regret at T: {:.3}", ofu.final_regret);
    }
    if let Some(exact) = summary.orth_exact_mse {
        println!("orth-batch exact MSE at T: {exact:.4e}");
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Usage(_) | Error::Parse { .. } => 2,
        Error::Domain(_) | Error::Io { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Bounds(a) => bounds(a),
        Command::Slope(a) => slope(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("linbandit: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
