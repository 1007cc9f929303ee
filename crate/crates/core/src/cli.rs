//! Command line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::attribute_series;
use crate::backtest::{compare_to_market, run_backtest_with, BacktestResult, Summary};
use crate::error::{Error, Result};
use crate::io;
use crate::market::{compute_weights, MarketSeries};
use crate::rank::{rank_path, tie_report};
use crate::sim::{simulate, BookMode, SimConfig};
use crate::verify::{verify_suite, VerifySettings};
use crate::zoo::{self, book_value_log_decomposition, PortfolioConfig, ZooEntry};

/// Environment variable consulted when `--out` is not given.
pub const OUT_ENV: &str = "FGP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fgp", version, about = "Functionally generated portfolios with book values")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a market and write market.csv and universe.txt
    Simulate(SimArgs),
    /// Backtest portfolios against the market
    Backtest(DataArgs),
    /// Log decomposition of the book-value portfolio
    Decompose(DataArgs),
    /// Size and market-to-book attribution of portfolio returns
    Attribute(DataArgs),
    /// Run the oracle suite on simulated markets
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of stocks
    #[arg(long)]
    pub stocks: Option<usize>,
    /// Horizon in years
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Books jump once per period instead of moving continuously
    #[arg(long)]
    pub jumps: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Long-format panel: date,ticker,cap,book[,book_updated]
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub universe: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// NAME[:params], repeatable
    #[arg(long = "portfolio")]
    pub portfolios: Vec<String>,
    /// Also write per-stock weights for each backtest
    #[arg(long)]
    pub weights: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Step of the oracle checks; the refinement sweep uses 4dt, 2dt, dt
    #[arg(long)]
    pub dt: Option<f64>,
}

/// Optional overrides of the standard simulated market.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub d: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub book_mode: Option<BookMode>,
    pub book_period: Option<f64>,
    pub drifts: Option<Vec<f64>>,
    pub vol_matrix: Option<Vec<Vec<f64>>>,
    pub book_drift: Option<Vec<f64>>,
    pub cap0: Option<Vec<f64>>,
    pub book0: Option<Vec<f64>>,
    pub book_wave: Option<f64>,
    pub book_jump_vol: Option<f64>,
}

impl SimSection {
    pub fn build(&self) -> SimConfig {
        let d = self.d.unwrap_or(5);
        let dt = self.dt.unwrap_or(1.0 / 252.0);
        let mut c = SimConfig::standard(d, dt, self.horizon.unwrap_or(10.0), self.seed.unwrap_or(0));
        if let Some(m) = self.book_mode {
            c.book_mode = m;
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { c.$f = v.clone(); } )* };
        }
        take!(book_period, drifts, vol_matrix, book_drift, cap0, book0, book_wave, book_jump_vol);
        c
    }
}

/// Contents of a `--config` file, TOML or JSON by extension.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub portfolio: Vec<PortfolioConfig>,
    #[serde(default)]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub verify: Option<VerifySettings>,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        Ok(toml::from_str(&text)?)
    }
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = match out {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_ENV)
            .map(PathBuf::from)
            .ok_or_else(|| Error::BadParameter(format!("--out is required when {OUT_ENV} is unset")))?,
    };
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

fn load_data(args: &DataArgs) -> Result<(MarketSeries, RunConfig)> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let universe = args.universe.as_deref().map(io::read_universe).transpose()?;
    let series = io::read_market_csv(&args.data, universe.as_deref())?;
    Ok((series, cfg))
}

fn portfolios(args: &DataArgs, cfg: &RunConfig) -> Result<Vec<ZooEntry>> {
    let mut out: Vec<ZooEntry> = cfg.portfolio.iter().map(|p| p.resolve()).collect::<Result<_>>()?;
    for p in &args.portfolios {
        out.push(zoo::parse_portfolio(p)?);
    }
    Ok(out)
}

fn backtest_all(series: &MarketSeries, entries: &[ZooEntry]) -> Result<Vec<BacktestResult>> {
    let path = compute_weights(series)?;
    entries
        .par_iter()
        .map(|e| {
            let mut rule = e.weight_rule(&path)?;
            let mut res = run_backtest_with(series, &path, rule.as_mut(), true)?;
            res.name = e.label();
            Ok(res)
        })
        .collect()
}

fn cmd_simulate(a: &SimArgs) -> Result<()> {
    let mut sec = match &a.config {
        Some(p) => load_config(p)?.sim.unwrap_or_default(),
        None => SimSection::default(),
    };
    sec.d = a.stocks.or(sec.d);
    sec.dt = a.dt.or(sec.dt);
    sec.horizon = a.horizon.or(sec.horizon);
    sec.seed = a.seed.or(sec.seed);
    if a.jumps {
        sec.book_mode = Some(BookMode::AnnualJump);
    }
    let cfg = sec.build();
    let series = simulate(&cfg)?;
    let dir = out_dir(&a.out)?;
    io::write_market_csv(&series, &dir.join("market.csv"))?;
    io::write_universe(&series.tickers, &dir.join("universe.txt"))?;
    io::write_json(&cfg, &dir.join("sim_config.json"))?;
    Ok(())
}

fn cmd_backtest(a: &DataArgs) -> Result<()> {
    let (series, cfg) = load_data(a)?;
    let mut entries = portfolios(a, &cfg)?;
    if entries.is_empty() {
        entries.push(zoo::market_portfolio());
    }
    if let Some(w) = tie_report(&rank_path(&compute_weights(&series)?.mu)).warning() {
        eprintln!("warning: {w}");
    }
    let results = backtest_all(&series, &entries)?;
    let dir = out_dir(&a.out)?;
    for r in &results {
        let s = slug(&r.name);
        io::write_backtest_csv(r, &dir.join(format!("backtest_{s}.csv")))?;
        if a.weights {
            io::write_weights_csv(r, &series.tickers, &dir.join(format!("weights_{s}.csv")))?;
        }
    }
    io::write_relative_values(&results, &dir.join("relative_values.csv"))?;
    let summaries: Vec<Summary> = results.iter().map(compare_to_market).collect();
    io::write_json(&summaries, &dir.join("summary.json"))?;
    Ok(())
}

fn cmd_decompose(a: &DataArgs) -> Result<()> {
    let (series, _) = load_data(a)?;
    let path = compute_weights(&series)?;
    let dec = book_value_log_decomposition(&path)?;
    let entry = zoo::book_value_portfolio();
    let mut rule = entry.weight_rule(&path)?;
    let bt = run_backtest_with(&series, &path, rule.as_mut(), true)?;
    let dir = out_dir(&a.out)?;
    let mut w = csv::Writer::from_path(dir.join("decomposition.csv"))?;
    w.write_record(["step", "date", "log_g", "quad", "beta_term", "sum", "log_relative_value"])?;
    for l in 0..path.n_steps() {
        w.write_record([
            l.to_string(),
            series.dates[l].clone(),
            dec.log_g[l].to_string(),
            dec.quad[l].to_string(),
            dec.beta_term[l].to_string(),
            dec.total(l).to_string(),
            bt.relative_value[l].ln().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_attribute(a: &DataArgs) -> Result<()> {
    let (series, cfg) = load_data(a)?;
    let entries = portfolios(a, &cfg)?;
    if entries.is_empty() {
        return Err(Error::BadParameter("attribute needs at least one --portfolio".into()));
    }
    let path = compute_weights(&series)?;
    let size = rank_path(&path.mu);
    let rho = rank_path(&path.rho);
    let results = backtest_all(&series, &entries)?;
    let dir = out_dir(&a.out)?;
    for r in &results {
        let rep = attribute_series(r, &path, &size, &rho)?;
        let s = slug(&r.name);
        io::write_attribution_csv(&rep, &dir.join(format!("attribution_{s}.csv")))?;
        let (cdc, cmb) = rep.cumulative();
        let mut w = csv::Writer::from_path(dir.join(format!("attribution_{s}_diagnostics.csv")))?;
        w.write_record(["step", "cum_DC", "cum_MBRC", "log_relative_value", "local_time_correction"])?;
        for k in 0..rep.dc.len() {
            w.write_record([
                rep.steps[k].to_string(),
                cdc[k].to_string(),
                cmb[k].to_string(),
                r.relative_value[rep.steps[k]].ln().to_string(),
                rep.local_time_correction[k].to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Returns whether every check passed.
fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let mut settings = match &a.config {
        Some(p) => load_config(p)?.verify.unwrap_or_default(),
        None => VerifySettings::default(),
    };
    if let Some(dt) = a.dt {
        settings.refinement_dts = vec![4.0 * dt, 2.0 * dt, dt];
    }
    let report = verify_suite(&settings, a.seed, Vec::new())?;
    let dir = out_dir(&a.out)?;
    io::write_json(&report, &dir.join("verify_report.json"))?;
    if let Some(f) = &report.first_failure {
        eprintln!("error[VerificationFailed]: {f}");
    }
    Ok(report.passed)
}

/// Runs the parsed command and returns the process exit code: 0 on
/// success, 1 when verification fails, 2 on any error.
pub fn run(cli: Cli) -> i32 {
    let res = match &cli.command {
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::Backtest(a) => cmd_backtest(a).map(|_| true),
        Command::Decompose(a) => cmd_decompose(a).map(|_| true),
        Command::Attribute(a) => cmd_attribute(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match res {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let msg = e.to_string();
            let flat: Vec<&str> = msg.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            eprintln!("error[{}]: {}", e.code(), flat.join(" "));
            2
        }
    }
}
