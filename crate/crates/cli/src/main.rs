//! `crp` — scenario runner for compound renewal process change-of-measure
//! checks.
//!
//! Exit codes: 0 all checks pass, 1 at least one check failed, 2 usage or
//! configuration error.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use crp_core::montecarlo::path_rng;
use crp_core::scenario::{builtin_scenarios, find_builtin, RunOptions, Scenario};
use crp_core::{renewal_mean, run_scenario, sample_path, ParamDistribution};

#[derive(Parser)]
#[command(name = "crp", version, about = "Compound renewal process change-of-measure toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate built-in scenarios and user configs in the config directory.
    List {
        #[arg(long, default_value = "scenarios")]
        config_dir: PathBuf,
    },
    /// Run a scenario's full check suite and emit the report CSV.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_paths: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Unit-mass tolerance for tilt validation.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "scenarios")]
        config_dir: PathBuf,
    },
    /// Dump simulated paths as CSV (path_id, n, W_n, T_n, X_n).
    Simulate {
        scenario: String,
        /// Number of paths to dump.
        #[arg(long, default_value_t = 10)]
        paths: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "scenarios")]
        config_dir: PathBuf,
    },
    /// Print the compound Poisson conversion of a scenario: ρ, α and the
    /// target laws.
    Convert {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "scenarios")]
        config_dir: PathBuf,
    },
    /// Print source and target premium densities and the safety loading.
    Premium {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "scenarios")]
        config_dir: PathBuf,
    },
    /// Print a table of expected renewal counts E[N_t].
    Renewal {
        /// Interarrival family: exp, ga or weibull.
        #[arg(long)]
        family: String,
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        shape: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
        /// Evaluation times (repeatable).
        #[arg(long = "t", required = true)]
        t: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        tail_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_scenario(name: &str, config_dir: &Path) -> Result<Scenario> {
    if let Some(s) = find_builtin(name) {
        return Ok(s);
    }
    let candidates = [
        PathBuf::from(name),
        config_dir.join(name),
        config_dir.join(format!("{name}.toml")),
    ];
    for path in &candidates {
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name);
            return config::parse_scenario(&text, stem);
        }
    }
    bail!("unknown scenario `{name}`: not a built-in and no config file found in {}", config_dir.display());
}

fn user_configs(config_dir: &Path) -> Vec<String> {
    let mut names = Vec::new();
    if let Ok(entries) = std::fs::read_dir(config_dir) {
        for entry in entries.flatten() {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) == Some("toml") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    names.push(stem.to_string());
                }
            }
        }
    }
    names.sort();
    names
}

fn cmd_list(config_dir: &Path) -> Result<()> {
    let mut w = output::sink(None)?;
    writeln!(w, "name,origin,source,target")?;
    for s in builtin_scenarios() {
        let resolved = s.resolve().map_err(|e| anyhow!("{}: {e}", s.name))?;
        let target = resolved
            .target
            .as_ref()
            .map(|t| format!("{} / {}", t.interarrival.describe(), t.claim.describe()))
            .unwrap_or_else(|| resolved.target_interarrival.describe());
        writeln!(
            w,
            "{},builtin,{},{}",
            s.name,
            quote(&format!("{} / {}", s.source.interarrival.describe(), s.source.claim.describe())),
            quote(&target),
        )?;
    }
    for name in user_configs(config_dir) {
        writeln!(w, "{name},config,,")?;
    }
    Ok(())
}

fn quote(s: &str) -> String {
    if s.contains(',') {
        format!("\"{s}\"")
    } else {
        s.to_string()
    }
}

use std::io::Write;

fn cmd_run(
    name: &str,
    config_dir: &Path,
    opts: RunOptions,
    out: Option<&Path>,
) -> Result<bool> {
    let scenario = load_scenario(name, config_dir)?;
    let report = run_scenario(&scenario, &opts)?;
    let mut w = output::sink(out)?;
    output::write_check_rows(w.as_mut(), &report.rows)?;
    Ok(report.pass)
}

fn cmd_simulate(
    name: &str,
    config_dir: &Path,
    paths: u64,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    if paths == 0 {
        bail!("--paths must be at least 1");
    }
    let scenario = load_scenario(name, config_dir)?;
    let seed = seed.unwrap_or(scenario.seed);
    let mut rows = Vec::new();
    for path_id in 0..paths {
        let mut rng = path_rng(seed, path_id);
        let path = sample_path(&scenario.source, scenario.horizon, &mut rng);
        for n in 0..path.interarrivals().len() {
            rows.push(output::PathRow {
                path_id,
                n: n + 1,
                w: path.interarrivals()[n],
                t: path.arrival_times()[n],
                x: path.claims()[n],
            });
        }
    }
    let mut w = output::sink(out)?;
    output::write_path_rows(w.as_mut(), &rows)?;
    Ok(())
}

fn cmd_convert(name: &str, config_dir: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let scenario = load_scenario(name, config_dir)?;
    let resolved = scenario.resolve()?;
    let seed = seed.unwrap_or(scenario.seed);
    let mean_w = scenario.source.interarrival.mean();
    // For a compound Poisson target, ρ and α come from the resolved β;
    // a general renewal target converts canonically at rate 1/E_Λ[W].
    let (rho, alpha) = match &resolved.beta {
        Some(beta) => (beta.implied_rate(), beta.alpha()),
        None => {
            let rho = 1.0 / resolved.target_interarrival.mean();
            (rho, rho.ln() + mean_w.ln())
        }
    };
    let cpp = resolved
        .converted_cpp
        .as_ref()
        .ok_or_else(|| anyhow!("scenario `{name}` has no closed-form tilted claim law"))?;
    let mut w = output::sink(out)?;
    output::write_convert_row(
        w.as_mut(),
        &scenario.name,
        rho,
        alpha,
        &cpp.interarrival.describe(),
        &cpp.claim.describe(),
        seed,
    )?;
    Ok(())
}

fn cmd_premium(name: &str, config_dir: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let scenario = load_scenario(name, config_dir)?;
    let resolved = scenario.resolve()?;
    let seed = seed.unwrap_or(scenario.seed);
    let p_source = scenario.source.premium_density();
    let p_target = resolved.target_premium_density(&scenario.source)?;
    let mut w = output::sink(out)?;
    output::write_premium_row(w.as_mut(), &scenario.name, p_source, p_target, seed)?;
    Ok(())
}

fn cmd_renewal(
    family: &str,
    rate: Option<f64>,
    shape: Option<f64>,
    scale: Option<f64>,
    ts: &[f64],
    tail_tol: f64,
    out: Option<&Path>,
) -> Result<()> {
    let law = match family {
        "exp" | "exponential" => {
            ParamDistribution::exponential(rate.context("exp family needs --rate")?)?
        }
        "ga" | "gamma" => ParamDistribution::gamma(
            rate.context("ga family needs --rate")?,
            shape.context("ga family needs --shape")?,
        )?,
        "weibull" => ParamDistribution::weibull(
            shape.context("weibull family needs --shape")?,
            scale.context("weibull family needs --scale")?,
        )?,
        other => bail!("unknown family `{other}` (expected exp, ga or weibull)"),
    };
    if ts.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
        bail!("--t values must be nonnegative finite reals");
    }
    if !(tail_tol > 0.0) {
        bail!("--tail-tol must be positive");
    }
    let rows: Vec<(f64, f64)> = ts.iter().map(|&t| (t, renewal_mean(&law, t, tail_tol))).collect();
    let mut w = output::sink(out)?;
    output::write_renewal_rows(w.as_mut(), family, &law.describe(), &rows, tail_tol)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<bool> = match &cli.command {
        Command::List { config_dir } => cmd_list(config_dir).map(|_| true),
        Command::Run { scenario, seed, n_paths, horizon, tol, out, config_dir } => cmd_run(
            scenario,
            config_dir,
            RunOptions { seed: *seed, n_paths: *n_paths, horizon: *horizon, tol: *tol },
            out.as_deref(),
        ),
        Command::Simulate { scenario, paths, seed, out, config_dir } => {
            cmd_simulate(scenario, config_dir, *paths, *seed, out.as_deref()).map(|_| true)
        }
        Command::Convert { scenario, seed, out, config_dir } => {
            cmd_convert(scenario, config_dir, *seed, out.as_deref()).map(|_| true)
        }
        Command::Premium { scenario, seed, out, config_dir } => {
            cmd_premium(scenario, config_dir, *seed, out.as_deref()).map(|_| true)
        }
        Command::Renewal { family, rate, shape, scale, t, tail_tol, out } => {
            cmd_renewal(family, *rate, *shape, *scale, t, *tail_tol, out.as_deref()).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
