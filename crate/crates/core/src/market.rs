//! Market data model: capitalizations, book values and the derived weight paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Capitalizations and book values on a common time grid.
///
/// Books are right-continuous step functions when `book_update_flags` marks
/// jump times. Steps without a flag are treated as continuous book movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSeries {
    pub times: Vec<f64>,
    pub dates: Vec<String>,
    pub tickers: Vec<String>,
    pub caps: Matrix,
    pub books: Matrix,
    pub book_update_flags: Vec<bool>,
}

impl MarketSeries {
    /// Builds and validates a series. Dates are timestamps `t` years after
    /// 2000-01-01 and tickers are S1, S2, ....
    pub fn new(times: Vec<f64>, caps: Matrix, books: Matrix, flags: Vec<bool>) -> Result<Self> {
        let d = caps.cols();
        let dates = times.iter().map(|&t| crate::sim::date_for_time(t)).collect();
        let tickers = (0..d).map(|i| format!("S{}", i + 1)).collect();
        Self::with_labels(times, dates, tickers, caps, books, flags)
    }

    pub fn with_labels(
        times: Vec<f64>,
        dates: Vec<String>,
        tickers: Vec<String>,
        caps: Matrix,
        books: Matrix,
        flags: Vec<bool>,
    ) -> Result<Self> {
        let s = MarketSeries {
            times,
            dates,
            tickers,
            caps,
            books,
            book_update_flags: flags,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 {
            return Err(Error::GridTooShort(n));
        }
        let d = self.caps.cols();
        if d < 2 {
            return Err(Error::InvalidPanel(format!("need at least 2 stocks, got {d}")));
        }
        if self.caps.rows() != n
            || self.books.rows() != n
            || self.books.cols() != d
            || self.book_update_flags.len() != n
            || self.dates.len() != n
            || self.tickers.len() != d
        {
            return Err(Error::LengthMismatch(
                "caps, books, flags, dates and tickers must match the time grid".into(),
            ));
        }
        for w in self.times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidPanel("times must be strictly increasing".into()));
            }
        }
        for (what, m) in [("cap", &self.caps), ("book", &self.books)] {
            for l in 0..n {
                for (i, &v) in m.row(l).iter().enumerate() {
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
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    pub fn n_stocks(&self) -> usize {
        self.caps.cols()
    }

    /// Total capitalization Σ(t_ℓ).
    pub fn total_cap(&self, step: usize) -> f64 {
        self.caps.row(step).iter().sum()
    }

    /// Returns a copy restricted to steps `0..=last`.
    pub fn truncated(&self, last: usize) -> MarketSeries {
        let n = last + 1;
        let d = self.n_stocks();
        MarketSeries {
            times: self.times[..n].to_vec(),
            dates: self.dates[..n].to_vec(),
            tickers: self.tickers.clone(),
            caps: Matrix::from_flat(n, d, self.caps.as_slice()[..n * d].to_vec()),
            books: Matrix::from_flat(n, d, self.books.as_slice()[..n * d].to_vec()),
            book_update_flags: self.book_update_flags[..n].to_vec(),
        }
    }
}

/// Market weights, relative book values, market-to-book ratios and the
/// canonical decomposition β = g − h.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightPath {
    pub times: Vec<f64>,
    pub mu: Matrix,
    pub beta: Matrix,
    pub rho: Matrix,
    pub g: Matrix,
    pub h: Matrix,
    pub jump_flags: Vec<bool>,
}

/// Point in the generator domain: market weights and the two monotone parts
/// of the relative book values.
#[derive(Debug, Clone, Copy)]
pub struct State<'a> {
    pub mu: &'a [f64],
    pub g: &'a [f64],
    pub h: &'a [f64],
}

impl<'a> State<'a> {
    pub fn new(mu: &'a [f64], g: &'a [f64], h: &'a [f64]) -> Self {
        State { mu, g, h }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn beta(&self, i: usize) -> f64 {
        self.g[i] - self.h[i]
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.mu[i] / self.beta(i)
    }
}

impl WeightPath {
    /// Builds a path from market weights and relative book values directly.
    pub fn from_mu_beta(times: Vec<f64>, mu: Matrix, beta: Matrix, jump_flags: Vec<bool>) -> Self {
        let n = mu.rows();
        let d = mu.cols();
        let mut rho = Matrix::zeros(n, d);
        let mut g = Matrix::zeros(n, d);
        let mut h = Matrix::zeros(n, d);
        for l in 0..n {
            for i in 0..d {
                rho.set(l, i, mu.get(l, i) / beta.get(l, i));
                if l == 0 {
                    g.set(0, i, beta.get(0, i));
                } else {
                    let db = beta.get(l, i) - beta.get(l - 1, i);
                    g.set(l, i, g.get(l - 1, i) + db.max(0.0));
                    h.set(l, i, h.get(l - 1, i) + (-db).max(0.0));
                }
            }
        }
        WeightPath {
            times,
            mu,
            beta,
            rho,
            g,
            h,
            jump_flags,
        }
    }

    pub fn n_steps(&self) -> usize {
        self.mu.rows()
    }

    pub fn n_stocks(&self) -> usize {
        self.mu.cols()
    }

    /// State at t_ℓ (after any book jump at ℓ).
    pub fn state(&self, l: usize) -> State<'_> {
        State::new(self.mu.row(l), self.g.row(l), self.h.row(l))
    }

    /// State at t_ℓ− : current market weights with the book part from step ℓ−1.
    pub fn left_state(&self, l: usize) -> State<'_> {
        if l > 0 && self.is_jump(l) {
            State::new(self.mu.row(l), self.g.row(l - 1), self.h.row(l - 1))
        } else {
            self.state(l)
        }
    }

    /// Whether the books jump at step ℓ. A flag at step 0 is ignored.
    pub fn is_jump(&self, l: usize) -> bool {
        l > 0 && self.jump_flags[l]
    }

    pub fn has_jumps(&self) -> bool {
        (1..self.n_steps()).any(|l| self.is_jump(l))
    }
}

/// Computes μ, β, ρ and the g/h decomposition of a validated series.
pub fn compute_weights(series: &MarketSeries) -> Result<WeightPath> {
    series.validate()?;
    let n = series.n_steps();
    let d = series.n_stocks();
    let mut mu = Matrix::zeros(n, d);
    let mut beta = Matrix::zeros(n, d);
    for l in 0..n {
        let s: f64 = series.caps.row(l).iter().sum();
        let b: f64 = series.books.row(l).iter().sum();
        for i in 0..d {
            mu.set(l, i, series.caps.get(l, i) / s);
            beta.set(l, i, series.books.get(l, i) / b);
        }
    }
    Ok(WeightPath::from_mu_beta(
        series.times.clone(),
        mu,
        beta,
        series.book_update_flags.clone(),
    ))
}

/// Bounds (m, M) with m ≤ ρ ≤ M on the observed path, widened by `factor`
/// (m divided by it, M multiplied by it).
pub fn rho_bounds(path: &WeightPath, factor: f64) -> (f64, f64) {
    let (lo, hi) = path
        .rho
        .as_slice()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    (lo / factor, hi * factor)
}

/// Default safety factor for [`rho_bounds`].
pub const DEFAULT_RHO_SAFETY: f64 = 2.0;

/// Smallest relative book value on the path.
pub fn min_beta(path: &WeightPath) -> f64 {
    path.beta.as_slice().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_step(caps: [[f64; 2]; 2], books: [[f64; 2]; 2]) -> MarketSeries {
        MarketSeries::new(
            vec![0.0, 1.0],
            Matrix::from_rows(&[caps[0].to_vec(), caps[1].to_vec()]),
            Matrix::from_rows(&[books[0].to_vec(), books[1].to_vec()]),
            vec![false, false],
        )
        .unwrap()
    }

    #[test]
    fn ratios_for_two_stocks() {
        let s = two_step([[1.0, 1.0], [1.0, 1.0]], [[1.0, 3.0], [1.0, 3.0]]);
        let p = compute_weights(&s).unwrap();
        assert_eq!(p.mu.row(0), &[0.5, 0.5]);
        assert_eq!(p.beta.row(0), &[0.25, 0.75]);
        assert!((p.rho.get(0, 0) - 2.0).abs() < 1e-15);
        assert!((p.rho.get(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        let (m, big_m) = rho_bounds(&p, 1.0);
        assert!((m - 2.0 / 3.0).abs() < 1e-15 && (big_m - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_books_give_flat_decomposition() {
        let s = two_step([[1.0, 2.0], [3.0, 1.0]], [[1.0, 3.0], [1.0, 3.0]]);
        let p = compute_weights(&s).unwrap();
        for l in 0..2 {
            assert_eq!(p.h.row(l), &[0.0, 0.0]);
            assert_eq!(p.g.row(l), p.beta.row(0));
        }
    }

    #[test]
    fn recurrence_on_single_beta_path() {
        let beta = Matrix::from_rows(&[vec![0.4, 0.6], vec![0.5, 0.5], vec![0.3, 0.7]]);
        let mu = beta.clone();
        let p = WeightPath::from_mu_beta(vec![0.0, 1.0, 2.0], mu, beta, vec![false; 3]);
        let g: Vec<f64> = (0..3).map(|l| p.g.get(l, 0)).collect();
        let h: Vec<f64> = (0..3).map(|l| p.h.get(l, 0)).collect();
        assert_eq!(g, vec![0.4, 0.5, 0.5]);
        assert!((h[2] - 0.2).abs() < 1e-15 && h[0] == 0.0 && h[1] == 0.0);
    }

    #[test]
    fn unit_rho_bounds_with_default_factor() {
        let s = two_step([[1.0, 1.0], [2.0, 2.0]], [[5.0, 5.0], [1.0, 1.0]]);
        let p = compute_weights(&s).unwrap();
        assert_eq!(rho_bounds(&p, DEFAULT_RHO_SAFETY), (0.5, 2.0));
    }

    #[test]
    fn rejects_bad_input() {
        let bad = MarketSeries::new(
            vec![0.0, 1.0],
            Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]),
            Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
            vec![false, false],
        );
        assert!(matches!(bad, Err(Error::NonPositiveInput { step: 0, stock: 1, .. })));
        let short = MarketSeries::new(
            vec![0.0],
            Matrix::from_rows(&[vec![1.0, 1.0]]),
            Matrix::from_rows(&[vec![1.0, 1.0]]),
            vec![false],
        );
        assert_eq!(short.unwrap_err(), Error::GridTooShort(1));
    }
}
