//! Subcommand implementations.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};

use rs_engine_core::{
    check_full_margin, check_full_margin_appendix, mean_abs_exposure, solve_p_star, EngineError,
    Mode, PiecewiseConstant, Result, RiskSharingSolution, ScenarioConfig,
};

use crate::oracles::{self, Status};
use crate::output::{emit, g17};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario configuration file (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Write the result here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the simulation seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (falls back to RS_ENGINE_THREADS, then all cores)
    #[arg(long)]
    pub threads: Option<usize>,
    /// Override the number of Monte Carlo paths
    #[arg(long)]
    pub paths: Option<usize>,
    /// Override the number of time steps
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

impl CommonArgs {
    pub fn load_config(&self) -> Result<ScenarioConfig> {
        let text = fs::read_to_string(&self.config).map_err(|e| EngineError::Config {
            field: self.config.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config = ScenarioConfig::from_json(&text)?;
        if let Some(seed) = self.seed {
            config.sim.seed = seed;
        }
        if let Some(paths) = self.paths {
            config.sim.n_paths = paths;
        }
        if let Some(steps) = self.steps {
            config.sim.n_steps = steps;
        }
        Ok(config)
    }

    pub fn thread_pool(&self) -> Result<rayon::ThreadPool> {
        let threads = self.threads.or_else(|| {
            std::env::var("RS_ENGINE_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        });
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .map_err(|e| EngineError::Config { field: "--threads".into(), message: e.to_string() })
    }
}

fn price_csv(solution: &RiskSharingSolution) -> String {
    let mut s = String::from(
        "p_star,residual,residual_std_error,iterations,residual_evaluations,p_hat,\
         delta_star_mean,delta_star_p5,delta_star_p95\n",
    );
    s.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        g17(solution.p_star),
        g17(solution.residual),
        g17(solution.residual_std_error),
        solution.iterations,
        solution.residual_evaluations,
        solution.p_hat.map(g17).unwrap_or_default(),
        g17(solution.delta_star_mean),
        g17(solution.delta_star_p5),
        g17(solution.delta_star_p95),
    ));
    s
}

/// `price`: solve for the negotiated price and report exposure statistics.
pub fn cmd_price(args: &CommonArgs, bracket_hint: Option<f64>) -> Result<()> {
    let config = args.load_config()?;
    let setup = config.build()?;
    let rule = config.collateral_rule();
    let solution = solve_p_star(&setup, rule, bracket_hint)?;
    let text = match args.format {
        Format::Csv => price_csv(&solution),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&solution).expect("serializable");
            s.push('\n');
            s
        }
    };
    emit(args.out.as_deref(), &text).map_err(io_error)?;
    Ok(())
}

/// `verify`: run the oracle suite; returns true when all oracles pass.
/// `mutate` deliberately corrupts a closed form so a broken formula is
/// provably caught (self-test of the oracles).
pub fn cmd_verify(args: &CommonArgs, mutate: bool) -> Result<bool> {
    let config = args.load_config()?;
    let setup = config.build()?;
    let corruption = if mutate { 1e-3 } else { 0.0 };
    let outcomes = oracles::run_all(&setup, setup.sim.seed, corruption);
    let mut text = String::new();
    let mut all_pass = true;
    for outcome in &outcomes {
        let tag = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => {
                all_pass = false;
                "FAIL"
            }
            Status::Skip => "SKIP",
        };
        text.push_str(&format!("{tag} {}: {}\n", outcome.name, outcome.detail));
    }
    text.push_str(if all_pass { "VERIFY PASS\n" } else { "VERIFY FAIL\n" });
    emit(args.out.as_deref(), &text).map_err(io_error)?;
    Ok(all_pass)
}

/// Parameter accepted by `sweep`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Bargaining weight of Agent B.
    Lambda,
    /// Constant funding spread of Agent A.
    #[value(alias = "s_A")]
    SA,
    /// Loss rate of Agent A.
    #[value(alias = "L_A")]
    LA,
}

/// Parses `a:b:n` into `n` equally spaced grid points.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |message: &str| EngineError::Config {
        field: "--grid".into(),
        message: message.into(),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected a:b:n"));
    }
    let a: f64 = parts[0].parse().map_err(|_| bad("start is not a number"))?;
    let b: f64 = parts[1].parse().map_err(|_| bad("end is not a number"))?;
    let n: usize = parts[2].parse().map_err(|_| bad("count is not an integer"))?;
    if n == 0 {
        return Err(bad("empty grid"));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(bad("endpoints must be finite"));
    }
    Ok(if n == 1 {
        vec![a]
    } else {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    })
}

fn apply_sweep(config: &ScenarioConfig, param: SweepParam, value: f64) -> ScenarioConfig {
    let mut modified = config.clone();
    match param {
        SweepParam::Lambda => modified.contract.lambda = value,
        SweepParam::SA => modified.agent_a.funding_spread = PiecewiseConstant::constant(value),
        SweepParam::LA => modified.agent_a.loss_rate = value,
    }
    modified
}

/// `sweep`: re-solve the price across a parameter grid with common random
/// numbers (the seed is shared by every row).
pub fn cmd_sweep(args: &CommonArgs, param: SweepParam, grid_spec: &str) -> Result<()> {
    let config = args.load_config()?;
    let grid = parse_grid(grid_spec)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &value in &grid {
        let modified = apply_sweep(&config, param, value);
        let setup = modified.build()?;
        let rule = modified.collateral_rule();
        let solution = solve_p_star(&setup, rule, None)?;
        let mean_abs = mean_abs_exposure(&setup, rule, solution.p_star)?;
        rows.push((value, solution.p_star, mean_abs));
    }
    let text = match args.format {
        Format::Csv => {
            let mut s = String::from("param,p_star,mean_abs_delta_star\n");
            for (value, p_star, mean_abs) in &rows {
                s.push_str(&format!("{},{},{}\n", g17(*value), g17(*p_star), g17(*mean_abs)));
            }
            s
        }
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|(value, p_star, mean_abs)| {
                    serde_json::json!({
                        "param": value,
                        "p_star": p_star,
                        "mean_abs_delta_star": mean_abs,
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&items).expect("serializable");
            s.push('\n');
            s
        }
    };
    emit(args.out.as_deref(), &text).map_err(io_error)?;
    Ok(())
}

/// `margin-check`: full-margin diagnostics, always JSON. The verdict is
/// data, not an error: the exit code stays zero either way.
pub fn cmd_margin_check(args: &CommonArgs) -> Result<()> {
    let config = args.load_config()?;
    let setup = config.build()?;
    let report = match setup.mode {
        Mode::Main => check_full_margin(&setup)?,
        Mode::Appendix => check_full_margin_appendix(&setup)?,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("serializable");
    text.push('\n');
    emit(args.out.as_deref(), &text).map_err(io_error)?;
    Ok(())
}

fn io_error(e: std::io::Error) -> EngineError {
    EngineError::Config {
        field: "--out".into(),
        message: e.to_string(),
    }
}
