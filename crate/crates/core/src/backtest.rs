//! Discrete rebalancing backtests relative to the market portfolio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{compute_weights, MarketSeries, State, WeightPath};
use crate::matrix::Matrix;

/// Read access to market data up to and including step `now`.
pub struct MarketView<'a> {
    series: &'a MarketSeries,
    path: &'a WeightPath,
    now: usize,
    enforce: bool,
}

impl<'a> MarketView<'a> {
    /// With `enforce` off, steps beyond `now` are readable; used only to
    /// confirm that rules never look ahead.
    pub fn new(series: &'a MarketSeries, path: &'a WeightPath, now: usize, enforce: bool) -> Self {
        MarketView {
            series,
            path,
            now,
            enforce,
        }
    }

    pub fn now(&self) -> usize {
        self.now
    }

    pub fn n_stocks(&self) -> usize {
        self.path.n_stocks()
    }

    fn check(&self, l: usize) -> Result<()> {
        if (self.enforce && l > self.now) || l >= self.path.n_steps() {
            Err(Error::LookAheadViolation {
                requested: l,
                available: self.now,
            })
        } else {
            Ok(())
        }
    }

    pub fn time(&self, l: usize) -> Result<f64> {
        self.check(l)?;
        Ok(self.path.times[l])
    }

    pub fn caps(&self, l: usize) -> Result<&'a [f64]> {
        self.check(l)?;
        Ok(self.series.caps.row(l))
    }

    pub fn books(&self, l: usize) -> Result<&'a [f64]> {
        self.check(l)?;
        Ok(self.series.books.row(l))
    }

    pub fn mu(&self, l: usize) -> Result<&'a [f64]> {
        self.check(l)?;
        Ok(self.path.mu.row(l))
    }

    pub fn beta(&self, l: usize) -> Result<&'a [f64]> {
        self.check(l)?;
        Ok(self.path.beta.row(l))
    }

    pub fn rho(&self, l: usize) -> Result<&'a [f64]> {
        self.check(l)?;
        Ok(self.path.rho.row(l))
    }

    pub fn state(&self, l: usize) -> Result<State<'a>> {
        self.check(l)?;
        Ok(self.path.state(l))
    }

    pub fn left_state(&self, l: usize) -> Result<State<'a>> {
        self.check(l)?;
        Ok(self.path.left_state(l))
    }

    pub fn is_jump(&self, l: usize) -> Result<bool> {
        self.check(l)?;
        Ok(self.path.is_jump(l))
    }
}

/// Chooses portfolio weights from the data visible at the rebalancing time.
pub trait WeightRule: Send {
    fn name(&self) -> String;
    fn weights(&mut self, view: &MarketView) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub name: String,
    pub times: Vec<f64>,
    pub dates: Vec<String>,
    pub wealth: Vec<f64>,
    pub relative_value: Vec<f64>,
    /// Row ℓ ≥ 1 holds the weights chosen at t_{ℓ−1}; row 0 repeats row 1.
    pub weights_used: Matrix,
    pub turnover: Vec<f64>,
}

/// Backtest with look-ahead enforcement.
pub fn run_backtest(series: &MarketSeries, rule: &mut dyn WeightRule) -> Result<BacktestResult> {
    let path = compute_weights(series)?;
    run_backtest_with(series, &path, rule, true)
}

/// W(t_ℓ) = W(t_{ℓ−1}) Σ_i π_i(t_{ℓ−1}) S_i(t_ℓ)/S_i(t_{ℓ−1}), W(t_0) = Σ(t_0).
pub fn run_backtest_with(
    series: &MarketSeries,
    path: &WeightPath,
    rule: &mut dyn WeightRule,
    enforce: bool,
) -> Result<BacktestResult> {
    let n = series.n_steps();
    let d = series.n_stocks();
    if path.n_steps() != n || path.n_stocks() != d {
        return Err(Error::LengthMismatch("series and weight path differ".into()));
    }
    let mut wealth = Vec::with_capacity(n);
    let mut rel = Vec::with_capacity(n);
    let mut used = Matrix::zeros(n, d);
    let mut turnover = vec![0.0; n];
    let total0 = series.total_cap(0);
    wealth.push(total0);
    rel.push(1.0);
    let mut drifted: Option<Vec<f64>> = None;
    for l in 1..n {
        let view = MarketView::new(series, path, l - 1, enforce);
        let pi = rule.weights(&view)?;
        if pi.len() != d {
            return Err(Error::LengthMismatch(format!(
                "rule returned {} weights for {d} stocks",
                pi.len()
            )));
        }
        let sum: f64 = pi.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-10 {
            return Err(Error::WeightSumError { step: l - 1, sum });
        }
        if let Some(dr) = &drifted {
            turnover[l] = pi.iter().zip(dr).map(|(a, b)| (a - b).abs()).sum();
        }
        let prev = series.caps.row(l - 1);
        let cur = series.caps.row(l);
        let growth: f64 = (0..d).map(|i| pi[i] * cur[i] / prev[i]).sum();
        let w = wealth[l - 1] * growth;
        wealth.push(w);
        rel.push(w / series.total_cap(l));
        used.row_mut(l).copy_from_slice(&pi);
        let dr: Vec<f64> = (0..d).map(|i| pi[i] * cur[i] / prev[i] / growth).collect();
        drifted = Some(dr);
    }
    if n > 1 {
        let first = used.row(1).to_vec();
        used.row_mut(0).copy_from_slice(&first);
    }
    Ok(BacktestResult {
        name: rule.name(),
        times: series.times.clone(),
        dates: series.dates.clone(),
        wealth,
        relative_value: rel,
        weights_used: used,
        turnover,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearStat {
    /// Whole years elapsed since the first time point.
    pub year: i64,
    pub log_value_end: f64,
    pub log_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub final_value: f64,
    pub final_log_value: f64,
    /// Largest peak-to-trough fall of log V.
    pub max_drawdown: f64,
    pub mean_turnover: f64,
    pub per_year: Vec<YearStat>,
}

pub fn compare_to_market(result: &BacktestResult) -> Summary {
    let logs: Vec<f64> = result.relative_value.iter().map(|v| v.ln()).collect();
    let mut peak = f64::NEG_INFINITY;
    let mut dd = 0.0f64;
    for &x in &logs {
        peak = peak.max(x);
        dd = dd.max(peak - x);
    }
    let t0 = result.times[0];
    let mut per_year: Vec<YearStat> = Vec::new();
    let mut last_end = 0.0;
    for (l, &x) in logs.iter().enumerate() {
        let year = (result.times[l] - t0).floor() as i64;
        match per_year.last_mut() {
            Some(y) if y.year == year => {
                y.log_value_end = x;
                y.log_change = x - last_end;
            }
            _ => {
                if let Some(y) = per_year.last() {
                    last_end = y.log_value_end;
                }
                per_year.push(YearStat {
                    year,
                    log_value_end: x,
                    log_change: x - last_end,
                });
            }
        }
    }
    let n = result.turnover.len();
    let final_value = *result.relative_value.last().unwrap_or(&1.0);
    Summary {
        name: result.name.clone(),
        final_value,
        final_log_value: final_value.ln(),
        max_drawdown: dd,
        mean_turnover: if n > 1 {
            result.turnover.iter().sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        },
        per_year,
    }
}
