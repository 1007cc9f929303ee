//! Functional generation of trading strategies from a generating function
//! G(μ, g, h) of the market weights and the monotone book-value parts.

mod ledger;
mod strategy;

pub use ledger::{accumulate_gamma, GammaLedger};
pub(crate) use ledger::continuous_increment;
pub use strategy::{
    additive_strategy, arbitrage_certificate, jump_consistency, multiplicative_strategy,
    weights_from_strategy, JumpCheck, StrategyKind, StrategyPath,
};
pub(crate) use strategy::{build_strategy, StepInputs};

use crate::error::{Error, Result};
use crate::market::{State, WeightPath};

/// Relative tolerance for analytic-versus-finite-difference derivative checks.
pub const DERIVATIVE_TOL: f64 = 1e-6;
/// Relative tolerance for the balance identity Σ μ_i D_i G = G.
pub const BALANCE_TOL: f64 = 1e-9;

/// A generating function together with its partial derivatives.
///
/// Derivatives are taken with μ, g and h as free coordinates, so
/// β = g − h and ρ = μ/β move with them.
pub trait GeneratorSpec: Send + Sync {
    fn name(&self) -> String;

    fn value(&self, s: &State) -> f64;

    /// D_{μ_i} G.
    fn grad_mu(&self, s: &State) -> Vec<f64>;

    /// Row-major D²_{μ_i μ_j} G, or `None` to request central differences.
    fn hess_mu(&self, _s: &State) -> Option<Vec<f64>> {
        None
    }

    /// D_{g_i} G.
    fn d_g(&self, s: &State) -> Vec<f64> {
        vec![0.0; s.dim()]
    }

    /// D_{h_i} G.
    fn d_h(&self, s: &State) -> Vec<f64> {
        vec![0.0; s.dim()]
    }

    /// Claim that Σ μ_i D_{μ_i} G = G everywhere.
    fn is_balanced(&self) -> bool;

    fn requires_continuous_aux(&self) -> bool {
        false
    }

    /// Domain checks on a path (bounds on ρ, β, jumps).
    fn validate_path(&self, _path: &WeightPath) -> Result<()> {
        Ok(())
    }
}

impl<T: GeneratorSpec + ?Sized> GeneratorSpec for Box<T> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn value(&self, s: &State) -> f64 {
        (**self).value(s)
    }
    fn grad_mu(&self, s: &State) -> Vec<f64> {
        (**self).grad_mu(s)
    }
    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        (**self).hess_mu(s)
    }
    fn d_g(&self, s: &State) -> Vec<f64> {
        (**self).d_g(s)
    }
    fn d_h(&self, s: &State) -> Vec<f64> {
        (**self).d_h(s)
    }
    fn is_balanced(&self) -> bool {
        (**self).is_balanced()
    }
    fn requires_continuous_aux(&self) -> bool {
        (**self).requires_continuous_aux()
    }
    fn validate_path(&self, path: &WeightPath) -> Result<()> {
        (**self).validate_path(path)
    }
}

/// Hessian in μ: analytic when provided, otherwise central differences of the
/// gradient with step 1e-6·max(μ_j, 1e-8).
pub fn hessian<G: GeneratorSpec + ?Sized>(spec: &G, s: &State) -> Vec<f64> {
    spec.hess_mu(s).unwrap_or_else(|| fd_hessian(spec, s))
}

pub fn fd_hessian<G: GeneratorSpec + ?Sized>(spec: &G, s: &State) -> Vec<f64> {
    let d = s.dim();
    let mut out = vec![0.0; d * d];
    let mut mu = s.mu.to_vec();
    for j in 0..d {
        let step = 1e-6 * s.mu[j].max(1e-8);
        let orig = mu[j];
        mu[j] = orig + step;
        let up = spec.grad_mu(&State::new(&mu, s.g, s.h));
        mu[j] = orig - step;
        let dn = spec.grad_mu(&State::new(&mu, s.g, s.h));
        mu[j] = orig;
        for i in 0..d {
            out[i * d + j] = (up[i] - dn[i]) / (2.0 * step);
        }
    }
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (out[i * d + j] + out[j * d + i]);
            out[i * d + j] = avg;
            out[j * d + i] = avg;
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Coord {
    Mu,
    G,
    H,
}

fn fd_partial<G: GeneratorSpec + ?Sized>(spec: &G, s: &State, coord: Coord, i: usize) -> f64 {
    let mut mu = s.mu.to_vec();
    let mut g = s.g.to_vec();
    let mut h = s.h.to_vec();
    let (x, scale) = match coord {
        Coord::Mu => (s.mu[i], s.mu[i]),
        Coord::G => (s.g[i], s.g[i]),
        Coord::H => (s.h[i], s.g[i]),
    };
    let step = 6e-6 * x.abs().max(scale.abs()).max(1e-8);
    let eval = |v: f64, mu: &mut Vec<f64>, g: &mut Vec<f64>, h: &mut Vec<f64>| {
        match coord {
            Coord::Mu => mu[i] = v,
            Coord::G => g[i] = v,
            Coord::H => h[i] = v,
        }
        spec.value(&State::new(mu, g, h))
    };
    let up = eval(x + step, &mut mu, &mut g, &mut h);
    let dn = eval(x - step, &mut mu, &mut g, &mut h);
    (up - dn) / (2.0 * step)
}

fn compare(
    what: &'static str,
    analytic: &[f64],
    numeric: &[f64],
    floor: f64,
    worst: &mut f64,
) -> Result<()> {
    for (k, (&a, &b)) in analytic.iter().zip(numeric).enumerate() {
        let denom = a.abs().max(b.abs()).max(floor).max(1e-300);
        let rel = (a - b).abs() / denom;
        if !rel.is_finite() || rel > DERIVATIVE_TOL {
            return Err(Error::DerivativeMismatch {
                what,
                index: k,
                analytic: a,
                numeric: b,
            });
        }
        *worst = worst.max(rel);
    }
    Ok(())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Compares declared derivatives with central differences at one point and
/// returns the worst relative error seen.
pub fn check_derivatives<G: GeneratorSpec + ?Sized>(spec: &G, s: &State) -> Result<f64> {
    let d = s.dim();
    let mut worst = 0.0f64;
    let grad = spec.grad_mu(s);
    let fd: Vec<f64> = (0..d).map(|i| fd_partial(spec, s, Coord::Mu, i)).collect();
    compare("grad_mu", &grad, &fd, 1e-3 * inf_norm(&grad), &mut worst)?;
    // book partials scale like G/g, which also sets the roundoff of the
    // differences when the analytic partial vanishes
    let min_g = s.g.iter().copied().fold(f64::INFINITY, f64::min);
    let book_scale = (inf_norm(&grad) * 1e-3).max(spec.value(s).abs() / min_g);
    let dg = spec.d_g(s);
    let fd: Vec<f64> = (0..d).map(|i| fd_partial(spec, s, Coord::G, i)).collect();
    compare("d_g", &dg, &fd, 1e-3 * inf_norm(&dg).max(book_scale), &mut worst)?;
    let dh = spec.d_h(s);
    let fd: Vec<f64> = (0..d).map(|i| fd_partial(spec, s, Coord::H, i)).collect();
    compare("d_h", &dh, &fd, 1e-3 * inf_norm(&dh).max(book_scale), &mut worst)?;
    if let Some(h) = spec.hess_mu(s) {
        let fd = fd_hessian(spec, s);
        let min_mu = s.mu.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = inf_norm(&h).max(inf_norm(&grad) / min_mu);
        compare("hess_mu", &h, &fd, floor, &mut worst)?;
    }
    Ok(worst)
}

/// |Σ μ_i D_{μ_i} G − G| at one point.
pub fn balance_residual<G: GeneratorSpec + ?Sized>(spec: &G, s: &State) -> f64 {
    let grad = spec.grad_mu(s);
    let lhs: f64 = grad.iter().zip(s.mu).map(|(a, m)| a * m).sum();
    (lhs - spec.value(s)).abs()
}

/// Checks the balance identity within `BALANCE_TOL`·|G|.
pub fn check_balance<G: GeneratorSpec + ?Sized>(spec: &G, s: &State) -> bool {
    balance_residual(spec, s) <= BALANCE_TOL * spec.value(s).abs()
}

/// How a generator is rescaled so that it starts at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    Scale(f64),
    Shift,
}

/// A generator rescaled to start at 1: G/G(0) when G(0) > 0, G + 1 when G(0) = 0.
pub struct Normalized<S> {
    pub inner: S,
    pub mode: Normalization,
}

impl<S: GeneratorSpec> Normalized<S> {
    pub fn on_path(inner: S, path: &WeightPath) -> Result<Self> {
        let g0 = inner.value(&path.state(0));
        let mode = if g0 > 0.0 {
            Normalization::Scale(1.0 / g0)
        } else if g0 == 0.0 {
            Normalization::Shift
        } else {
            return Err(Error::BadParameter(format!(
                "cannot normalize a generator with G(0) = {g0}"
            )));
        };
        Ok(Normalized { inner, mode })
    }

    fn factor(&self) -> f64 {
        match self.mode {
            Normalization::Scale(c) => c,
            Normalization::Shift => 1.0,
        }
    }
}

fn scaled(v: Vec<f64>, c: f64) -> Vec<f64> {
    v.into_iter().map(|x| x * c).collect()
}

impl<S: GeneratorSpec> GeneratorSpec for Normalized<S> {
    fn name(&self) -> String {
        format!("{} (normalized)", self.inner.name())
    }
    fn value(&self, s: &State) -> f64 {
        match self.mode {
            Normalization::Scale(c) => c * self.inner.value(s),
            Normalization::Shift => self.inner.value(s) + 1.0,
        }
    }
    fn grad_mu(&self, s: &State) -> Vec<f64> {
        scaled(self.inner.grad_mu(s), self.factor())
    }
    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        self.inner.hess_mu(s).map(|h| scaled(h, self.factor()))
    }
    fn d_g(&self, s: &State) -> Vec<f64> {
        scaled(self.inner.d_g(s), self.factor())
    }
    fn d_h(&self, s: &State) -> Vec<f64> {
        scaled(self.inner.d_h(s), self.factor())
    }
    fn is_balanced(&self) -> bool {
        self.inner.is_balanced() && matches!(self.mode, Normalization::Scale(_))
    }
    fn requires_continuous_aux(&self) -> bool {
        self.inner.requires_continuous_aux()
    }
    fn validate_path(&self, path: &WeightPath) -> Result<()> {
        self.inner.validate_path(path)
    }
}

/// G ≡ constant; generates the market portfolio.
pub struct ConstantGenerator(pub f64);

impl GeneratorSpec for ConstantGenerator {
    fn name(&self) -> String {
        "constant".into()
    }
    fn value(&self, _s: &State) -> f64 {
        self.0
    }
    fn grad_mu(&self, s: &State) -> Vec<f64> {
        vec![0.0; s.dim()]
    }
    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        Some(vec![0.0; s.dim() * s.dim()])
    }
    fn is_balanced(&self) -> bool {
        self.0 == 0.0
    }
}
