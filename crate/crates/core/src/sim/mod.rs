//! Synthetic markets: geometric Brownian capitalizations with smooth or
//! annually jumping book values.

mod oracle;

pub use oracle::{replicate, replicate_holdings, OraclePath};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketSeries;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookMode {
    Continuous,
    AnnualJump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub d: usize,
    /// Number of increments; the grid has `n_steps + 1` points.
    pub n_steps: usize,
    pub dt: f64,
    pub drifts: Vec<f64>,
    /// d × k factor loadings; covariance is A Aᵀ.
    pub vol_matrix: Vec<Vec<f64>>,
    pub book_mode: BookMode,
    pub book_drift: Vec<f64>,
    pub seed: u64,
    pub cap0: Vec<f64>,
    pub book0: Vec<f64>,
    /// Amplitude of the log-periodic wiggle of continuous books.
    #[serde(default)]
    pub book_wave: f64,
    /// Period of the wiggle, and the spacing of book jumps.
    #[serde(default = "default_period")]
    pub book_period: f64,
    /// Log-volatility of each annual book update.
    #[serde(default)]
    pub book_jump_vol: f64,
}

fn default_period() -> f64 {
    1.0
}

impl SimConfig {
    /// A d-stock market over horizon `horizon` with one common factor and
    /// idiosyncratic noise, spread-out initial sizes and books.
    pub fn standard(d: usize, dt: f64, horizon: f64, seed: u64) -> SimConfig {
        let n_steps = (horizon / dt).round() as usize;
        let mut vol = vec![vec![0.0; d + 1]; d];
        for (i, row) in vol.iter_mut().enumerate() {
            row[0] = 0.15;
            row[i + 1] = 0.2 + 0.05 * (i % 3) as f64;
        }
        SimConfig {
            d,
            n_steps,
            dt,
            drifts: (0..d).map(|i| 0.05 + 0.01 * (i % 4) as f64).collect(),
            vol_matrix: vol,
            book_mode: BookMode::Continuous,
            book_drift: (0..d).map(|i| 0.04 - 0.02 * (i % 3) as f64).collect(),
            seed,
            cap0: (0..d).map(|i| 100.0 * (1.0 + 0.5 * i as f64)).collect(),
            book0: (0..d).map(|i| 80.0 * (1.0 + 0.3 * ((i * 7) % 5) as f64)).collect(),
            book_wave: 0.1,
            book_period: 1.0,
            book_jump_vol: 0.1,
        }
    }

    pub fn with_jumps(mut self, period: f64) -> SimConfig {
        self.book_mode = BookMode::AnnualJump;
        self.book_period = period;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d;
        if d < 2 {
            return Err(Error::BadParameter(format!("need d >= 2, got {d}")));
        }
        if self.n_steps < 1 {
            return Err(Error::GridTooShort(self.n_steps + 1));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::BadParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.book_period > 0.0) {
            return Err(Error::BadParameter("book_period must be positive".into()));
        }
        for (what, v) in [
            ("drifts", &self.drifts),
            ("book_drift", &self.book_drift),
            ("cap0", &self.cap0),
            ("book0", &self.book0),
        ] {
            if v.len() != d {
                return Err(Error::LengthMismatch(format!("{what} has {} entries, d = {d}", v.len())));
            }
        }
        for (what, v) in [("cap", &self.cap0), ("book", &self.book0)] {
            if let Some(i) = v.iter().position(|x| !(*x > 0.0)) {
                return Err(Error::NonPositiveInput {
                    what,
                    step: 0,
                    stock: i,
                    value: v[i],
                });
            }
        }
        if self.vol_matrix.len() != d {
            return Err(Error::LengthMismatch("vol_matrix must have d rows".into()));
        }
        let k = self.vol_matrix[0].len();
        if k == 0 || self.vol_matrix.iter().any(|r| r.len() != k) {
            return Err(Error::LengthMismatch("vol_matrix rows must share a positive length".into()));
        }
        let flat: Vec<f64> = self.vol_matrix.iter().flatten().copied().collect();
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadCovariance);
        }
        // a zero matrix is a deterministic market and is allowed
        if flat.iter().all(|&x| x == 0.0) {
            return Ok(());
        }
        let a = DMatrix::from_row_slice(d, k, &flat);
        let cov = &a * a.transpose();
        if cov.cholesky().is_none() {
            return Err(Error::BadCovariance);
        }
        Ok(())
    }

    fn factors(&self) -> usize {
        self.vol_matrix[0].len()
    }
}

const JUMP_STREAM: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Brownian paths on `n` steps of size `dt`, one column per factor.
///
/// The path is built on the coarsest dyadic parent grid and refined by
/// Brownian-bridge midpoints, each level drawing from its own stream. Halving
/// `dt` at a fixed horizon therefore refines the same path.
fn nested_brownian(n: usize, dt: f64, k: usize, seed: u64) -> Vec<f64> {
    let levels = n.trailing_zeros();
    let coarse = n >> levels;
    let h0 = dt * (1u64 << levels) as f64;
    let mut w = vec![0.0; (coarse + 1) * k];
    let mut rng = stream(seed, 0);
    for s in 1..=coarse {
        for f in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            w[s * k + f] = w[(s - 1) * k + f] + h0.sqrt() * z;
        }
    }
    let mut h = h0;
    let mut m = coarse;
    for level in 1..=levels {
        let mut rng = stream(seed, level as u64);
        let mut fine = vec![0.0; (2 * m + 1) * k];
        for s in 0..m {
            for f in 0..k {
                let a = w[s * k + f];
                let b = w[(s + 1) * k + f];
                let z: f64 = StandardNormal.sample(&mut rng);
                fine[2 * s * k + f] = a;
                fine[(2 * s + 1) * k + f] = 0.5 * (a + b) + (h / 4.0).sqrt() * z;
            }
        }
        for f in 0..k {
            fine[2 * m * k + f] = w[m * k + f];
        }
        w = fine;
        m *= 2;
        h /= 2.0;
    }
    w
}

/// ISO timestamp `t` years after 2000-01-01, microsecond resolution.
pub fn date_for_time(t: f64) -> String {
    let base = chrono::NaiveDate::from_ymd_opt(2000, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid base date");
    let us = (t * crate::io::SECONDS_PER_YEAR * 1e6).round() as i64;
    (base + chrono::Duration::microseconds(us))
        .format("%Y-%m-%dT%H:%M:%S%.6f")
        .to_string()
}

pub fn simulate(config: &SimConfig) -> Result<MarketSeries> {
    config.validate()?;
    let d = config.d;
    let n = config.n_steps;
    let k = config.factors();
    let w = nested_brownian(n, config.dt, k, config.seed);
    let var: Vec<f64> = config
        .vol_matrix
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum())
        .collect();

    let times: Vec<f64> = (0..=n).map(|l| l as f64 * config.dt).collect();
    let mut caps = Matrix::zeros(n + 1, d);
    let mut books = Matrix::zeros(n + 1, d);
    let mut flags = vec![false; n + 1];
    for (l, &t) in times.iter().enumerate() {
        for i in 0..d {
            let shock: f64 = (0..k).map(|f| config.vol_matrix[i][f] * w[l * k + f]).sum();
            let log_s = config.cap0[i].ln() + (config.drifts[i] - 0.5 * var[i]) * t + shock;
            caps.set(l, i, log_s.exp());
        }
    }
    match config.book_mode {
        BookMode::Continuous => {
            let two_pi = 2.0 * std::f64::consts::PI;
            for (l, &t) in times.iter().enumerate() {
                for i in 0..d {
                    let phase = two_pi * t / config.book_period + two_pi * i as f64 / d as f64;
                    let lb = config.book_drift[i] * t + config.book_wave * phase.sin();
                    books.set(l, i, config.book0[i] * lb.exp());
                }
            }
        }
        BookMode::AnnualJump => {
            let every = ((config.book_period / config.dt).round() as usize).max(1);
            let mut rng = stream(config.seed, JUMP_STREAM);
            let mut b = config.book0.clone();
            for l in 0..=n {
                if l > 0 && l % every == 0 {
                    flags[l] = true;
                    for i in 0..d {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        b[i] *= (config.book_drift[i] * config.book_period + config.book_jump_vol * z).exp();
                    }
                }
                books.row_mut(l).copy_from_slice(&b);
            }
        }
    }
    for l in 0..=n {
        for i in 0..d {
            for (what, v) in [("cap", caps.get(l, i)), ("book", books.get(l, i))] {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NonPositiveInput {
                        what,
                        step: l,
                        stock: i,
                        value: v,
                    });
                }
            }
        }
    }
    let dates = times.iter().map(|&t| date_for_time(t)).collect();
    let tickers = (0..d).map(|i| format!("S{:0w$}", i + 1, w = digits(d))).collect();
    MarketSeries::with_labels(times, dates, tickers, caps, books, flags)
}

fn digits(d: usize) -> usize {
    d.to_string().len()
}
