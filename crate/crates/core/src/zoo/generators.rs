//! Generating functions of market weights and book values.

use crate::error::{Error, Result};
use crate::fgp::GeneratorSpec;
use crate::market::{State, WeightPath};

pub(crate) fn check_rho_bounds(path: &WeightPath, lo: f64, hi: f64) -> Result<()> {
    for l in 0..path.n_steps() {
        for (i, &r) in path.rho.row(l).iter().enumerate() {
            if !(r >= lo && r <= hi) {
                return Err(Error::BoundsViolated {
                    step: l,
                    stock: i,
                    value: r,
                    lo,
                    hi,
                });
            }
        }
        // left limits at jump steps carry the previous books
        if path.is_jump(l) {
            let s = path.left_state(l);
            for i in 0..s.dim() {
                let r = s.rho(i);
                if !(r >= lo && r <= hi) {
                    return Err(Error::BoundsViolated {
                        step: l,
                        stock: i,
                        value: r,
                        lo,
                        hi,
                    });
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn check_delta(path: &WeightPath, delta: f64) -> Result<()> {
    for l in 0..path.n_steps() {
        for (i, &b) in path.beta.row(l).iter().enumerate() {
            if b < delta {
                return Err(Error::DeltaViolated {
                    step: l,
                    stock: i,
                    value: b,
                    delta,
                });
            }
        }
    }
    Ok(())
}

fn check_m_big_m(m: f64, big_m: f64) -> Result<()> {
    if m > 0.0 && big_m > m && big_m.is_finite() {
        Ok(())
    } else {
        Err(Error::BadParameter(format!("need 0 < m < M, got m = {m}, M = {big_m}")))
    }
}

/// Π ρ_i^{β_i} as a log-sum, no scale.
fn log_book_value(s: &State) -> f64 {
    (0..s.dim()).map(|i| s.beta(i) * s.rho(i).ln()).sum()
}

fn book_value_hessian(s: &State, g: f64) -> Vec<f64> {
    let d = s.dim();
    let mut h = vec![0.0; d * d];
    for i in 0..d {
        let a = s.beta(i) / s.mu[i];
        for j in 0..d {
            let b = s.beta(j) / s.mu[j];
            h[i * d + j] = g * a * b;
        }
        h[i * d + i] -= g * a / s.mu[i];
    }
    h
}

/// G = c·Π ρ_i^{β_i}, the generator of the book-value portfolio.
#[derive(Debug, Clone)]
pub struct BookValueGenerator {
    pub scale: f64,
    pub bounds: Option<(f64, f64)>,
}

impl BookValueGenerator {
    pub fn unnormalized() -> Self {
        BookValueGenerator {
            scale: 1.0,
            bounds: None,
        }
    }

    /// Scaled so that G(0) = 1 on `path`.
    pub fn normalized_on(path: &WeightPath) -> Self {
        let g0 = log_book_value(&path.state(0)).exp();
        BookValueGenerator {
            scale: 1.0 / g0,
            bounds: None,
        }
    }

    pub fn with_bounds(mut self, m: f64, big_m: f64) -> Self {
        self.bounds = Some((m, big_m));
        self
    }
}

impl GeneratorSpec for BookValueGenerator {
    fn name(&self) -> String {
        "book_value".into()
    }

    fn value(&self, s: &State) -> f64 {
        self.scale * log_book_value(s).exp()
    }

    fn grad_mu(&self, s: &State) -> Vec<f64> {
        let g = self.value(s);
        (0..s.dim()).map(|i| s.beta(i) * g / s.mu[i]).collect()
    }

    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        Some(book_value_hessian(s, self.value(s)))
    }

    fn d_g(&self, s: &State) -> Vec<f64> {
        let g = self.value(s);
        (0..s.dim()).map(|i| g * (s.rho(i).ln() - 1.0)).collect()
    }

    fn d_h(&self, s: &State) -> Vec<f64> {
        self.d_g(s).into_iter().map(|x| -x).collect()
    }

    fn is_balanced(&self) -> bool {
        true
    }

    fn validate_path(&self, path: &WeightPath) -> Result<()> {
        match self.bounds {
            Some((m, big_m)) => check_rho_bounds(path, m, big_m),
            None => Ok(()),
        }
    }
}

/// Π ρ_i^{β_i}·exp((1 − log M) g_i + (log m − 1) h_i), used unnormalized.
#[derive(Debug, Clone)]
pub struct ModifiedBookValueGenerator {
    pub m: f64,
    pub big_m: f64,
}

impl ModifiedBookValueGenerator {
    pub fn new(m: f64, big_m: f64) -> Result<Self> {
        check_m_big_m(m, big_m)?;
        Ok(ModifiedBookValueGenerator { m, big_m })
    }
}

impl GeneratorSpec for ModifiedBookValueGenerator {
    fn name(&self) -> String {
        "modified_book_value".into()
    }

    fn value(&self, s: &State) -> f64 {
        let a = 1.0 - self.big_m.ln();
        let b = self.m.ln() - 1.0;
        let extra: f64 = (0..s.dim()).map(|i| a * s.g[i] + b * s.h[i]).sum();
        (log_book_value(s) + extra).exp()
    }

    fn grad_mu(&self, s: &State) -> Vec<f64> {
        let g = self.value(s);
        (0..s.dim()).map(|i| s.beta(i) * g / s.mu[i]).collect()
    }

    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        Some(book_value_hessian(s, self.value(s)))
    }

    fn d_g(&self, s: &State) -> Vec<f64> {
        let g = self.value(s);
        (0..s.dim()).map(|i| (s.rho(i) / self.big_m).ln() * g).collect()
    }

    fn d_h(&self, s: &State) -> Vec<f64> {
        let g = self.value(s);
        (0..s.dim()).map(|i| (self.m / s.rho(i)).ln() * g).collect()
    }

    fn is_balanced(&self) -> bool {
        true
    }

    fn validate_path(&self, path: &WeightPath) -> Result<()> {
        check_rho_bounds(path, self.m, self.big_m)
    }
}

fn power_weights(x: &[f64], p: f64) -> (f64, Vec<f64>) {
    // log-sum-exp keeps large |p| finite
    let logs: Vec<f64> = x.iter().map(|v| p * v.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = e.iter().sum();
    let log_total = top + sum.ln();
    (log_total, e.into_iter().map(|v| v / sum).collect())
}

fn power_hessian(s: &State, g: f64, p: f64, pi: &[f64]) -> Vec<f64> {
    let d = s.dim();
    let mut h = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let kron = if i == j { pi[i] } else { 0.0 };
            h[i * d + j] = (1.0 - p) * g / (s.mu[i] * s.mu[j]) * (pi[i] * pi[j] - kron);
        }
    }
    h
}

/// (Σ ρ_i^p)^{1/p} scaled to 1 at the start; generates ρ(t−)^p / Σ ρ(t−)^p.
/// p = 0 is the geometric mean (Π ρ_i)^{1/d}, generating equal weights.
#[derive(Debug, Clone)]
pub struct MtbGenerator {
    pub p: f64,
    pub scale: f64,
}

impl MtbGenerator {
    pub fn new(p: f64) -> Self {
        MtbGenerator { p, scale: 1.0 }
    }

    pub fn normalized_on(p: f64, path: &WeightPath) -> Self {
        let raw = MtbGenerator::new(p);
        let g0 = raw.value(&path.state(0));
        MtbGenerator { p, scale: 1.0 / g0 }
    }

    fn parts(&self, s: &State) -> (f64, Vec<f64>) {
        let rho: Vec<f64> = (0..s.dim()).map(|i| s.rho(i)).collect();
        if self.p == 0.0 {
            let d = s.dim() as f64;
            let lg: f64 = rho.iter().map(|r| r.ln()).sum::<f64>() / d;
            (self.scale * lg.exp(), vec![1.0 / d; s.dim()])
        } else {
            let (lt, pi) = power_weights(&rho, self.p);
            (self.scale * (lt / self.p).exp(), pi)
        }
    }
}

impl GeneratorSpec for MtbGenerator {
    fn name(&self) -> String {
        format!("mtb_weighted({})", self.p)
    }

    fn value(&self, s: &State) -> f64 {
        self.parts(s).0
    }

    fn grad_mu(&self, s: &State) -> Vec<f64> {
        let (g, pi) = self.parts(s);
        (0..s.dim()).map(|i| g * pi[i] / s.mu[i]).collect()
    }

    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        let (g, pi) = self.parts(s);
        Some(power_hessian(s, g, self.p, &pi))
    }

    fn d_g(&self, s: &State) -> Vec<f64> {
        let (g, pi) = self.parts(s);
        (0..s.dim()).map(|i| -g * pi[i] / s.beta(i)).collect()
    }

    fn d_h(&self, s: &State) -> Vec<f64> {
        self.d_g(s).into_iter().map(|x| -x).collect()
    }

    fn is_balanced(&self) -> bool {
        true
    }
}

/// (Σ x_i^p)^{1/p} with x_i = ρ_i g_i e^{−h_i/δ}, used unnormalized.
#[derive(Debug, Clone)]
pub struct ModifiedMtbGenerator {
    pub p: f64,
    pub delta: f64,
}

impl ModifiedMtbGenerator {
    pub fn new(p: f64, delta: f64) -> Result<Self> {
        if p == 0.0 || !p.is_finite() {
            return Err(Error::BadParameter(format!("p must be nonzero, got {p}")));
        }
        if !(delta > 0.0) {
            return Err(Error::BadParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(ModifiedMtbGenerator { p, delta })
    }

    /// Returns G and the weights π̂ ∝ x^p.
    pub fn parts(&self, s: &State) -> (f64, Vec<f64>) {
        let x: Vec<f64> = (0..s.dim())
            .map(|i| s.rho(i) * s.g[i] * (-s.h[i] / self.delta).exp())
            .collect();
        let (lt, pi) = power_weights(&x, self.p);
        ((lt / self.p).exp(), pi)
    }
}

impl GeneratorSpec for ModifiedMtbGenerator {
    fn name(&self) -> String {
        format!("modified_mtb({}, {})", self.p, self.delta)
    }

    fn value(&self, s: &State) -> f64 {
        self.parts(s).0
    }

    fn grad_mu(&self, s: &State) -> Vec<f64> {
        let (g, pi) = self.parts(s);
        (0..s.dim()).map(|i| g * pi[i] / s.mu[i]).collect()
    }

    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        let (g, pi) = self.parts(s);
        Some(power_hessian(s, g, self.p, &pi))
    }

    fn d_g(&self, s: &State) -> Vec<f64> {
        let (g, pi) = self.parts(s);
        (0..s.dim())
            .map(|i| -g * pi[i] * s.h[i] / (s.g[i] * s.beta(i)))
            .collect()
    }

    fn d_h(&self, s: &State) -> Vec<f64> {
        let (g, pi) = self.parts(s);
        (0..s.dim())
            .map(|i| g * pi[i] * (1.0 / s.beta(i) - 1.0 / self.delta))
            .collect()
    }

    fn is_balanced(&self) -> bool {
        true
    }

    fn validate_path(&self, path: &WeightPath) -> Result<()> {
        check_delta(path, self.delta)
    }
}

/// Σ log(1 + ρ_i)·exp(−h_i/(δκ)) with κ = ((1+m)/m)·log(1+m).
#[derive(Debug, Clone)]
pub struct LogarithmicGenerator {
    pub m: f64,
    pub big_m: f64,
    pub delta: f64,
}

impl LogarithmicGenerator {
    pub fn new(m: f64, big_m: f64, delta: f64) -> Result<Self> {
        check_m_big_m(m, big_m)?;
        if !(delta > 0.0) {
            return Err(Error::BadParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(LogarithmicGenerator { m, big_m, delta })
    }

    pub fn kappa(&self) -> f64 {
        (1.0 + self.m) / self.m * (1.0 + self.m).ln()
    }

    fn decay(&self, s: &State, i: usize) -> f64 {
        (-s.h[i] / (self.delta * self.kappa())).exp()
    }
}

impl GeneratorSpec for LogarithmicGenerator {
    fn name(&self) -> String {
        "logarithmic".into()
    }

    fn value(&self, s: &State) -> f64 {
        (0..s.dim()).map(|i| s.rho(i).ln_1p() * self.decay(s, i)).sum()
    }

    fn grad_mu(&self, s: &State) -> Vec<f64> {
        (0..s.dim())
            .map(|i| self.decay(s, i) / (s.beta(i) + s.mu[i]))
            .collect()
    }

    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        let d = s.dim();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            let q = s.beta(i) + s.mu[i];
            h[i * d + i] = -self.decay(s, i) / (q * q);
        }
        Some(h)
    }

    fn d_g(&self, s: &State) -> Vec<f64> {
        (0..s.dim())
            .map(|i| -s.rho(i) * self.decay(s, i) / (s.beta(i) + s.mu[i]))
            .collect()
    }

    fn d_h(&self, s: &State) -> Vec<f64> {
        let k = self.kappa();
        (0..s.dim())
            .map(|i| {
                let r = s.rho(i);
                (r / (s.beta(i) + s.mu[i]) - r.ln_1p() / (self.delta * k)) * self.decay(s, i)
            })
            .collect()
    }

    fn is_balanced(&self) -> bool {
        false
    }

    fn requires_continuous_aux(&self) -> bool {
        true
    }

    fn validate_path(&self, path: &WeightPath) -> Result<()> {
        if path.has_jumps() {
            return Err(Error::JumpsNotSupported);
        }
        check_rho_bounds(path, self.m, self.big_m)?;
        check_delta(path, self.delta)
    }
}
