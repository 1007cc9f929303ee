use serde::{Deserialize, Serialize};

use super::{accumulate_gamma, GammaLedger, GeneratorSpec};
use crate::error::{Error, Result};
use crate::market::WeightPath;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    Additive,
    Multiplicative,
}

/// Share holdings of a generated strategy.
///
/// Row ℓ of `theta` and `holdings` is the position carried over
/// (t_{ℓ−1}, t_ℓ]; row 0 repeats row 1's role at the initial time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyPath {
    pub kind: StrategyKind,
    pub theta: Matrix,
    pub holdings: Matrix,
    /// V(t_ℓ) = Σ holdings[ℓ]·μ(t_ℓ).
    pub wealth: Vec<f64>,
    /// G + Γ^c (additive) or G·exp(∫dΓ^c/G) (multiplicative), with G at t−.
    pub closed_form: Vec<f64>,
    pub defect_q: Vec<f64>,
    pub defect_c: Vec<f64>,
    pub ledger: GammaLedger,
    pub max_deviation: f64,
}

/// Gradients along a path used to assemble holdings.
pub(crate) struct StepInputs {
    /// D_μ G at t_ℓ.
    pub grad_state: Matrix,
    /// D_μ G at t_ℓ− for flagged steps.
    pub grad_left: Vec<Option<Vec<f64>>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inputs_for<G: GeneratorSpec + ?Sized>(spec: &G, path: &WeightPath) -> StepInputs {
    let n = path.n_steps();
    let d = path.n_stocks();
    let mut grad_state = Matrix::zeros(n, d);
    let mut grad_left = vec![None; n];
    for l in 0..n {
        grad_state.row_mut(l).copy_from_slice(&spec.grad_mu(&path.state(l)));
        if path.is_jump(l) {
            grad_left[l] = Some(spec.grad_mu(&path.left_state(l)));
        }
    }
    StepInputs {
        grad_state,
        grad_left,
    }
}

fn jump_injection(inputs: &StepInputs, path: &WeightPath, l: usize) -> f64 {
    match &inputs.grad_left[l] {
        Some(left) => inputs
            .grad_state
            .row(l)
            .iter()
            .zip(left)
            .zip(path.mu.row(l))
            .map(|((a, b), m)| (a - b) * m)
            .sum(),
        None => 0.0,
    }
}

/// Q^{x,μ} for a base process x given on the holdings convention.
fn defect_q(base: &Matrix, path: &WeightPath) -> Vec<f64> {
    let n = path.n_steps();
    let mut out = Vec::with_capacity(n);
    let start = dot(base.row(0), path.mu.row(0));
    let mut integral = 0.0;
    let mut jumps = 0.0;
    out.push(0.0);
    for l in 1..n {
        if l >= 2 && path.is_jump(l - 1) {
            jumps += base
                .row(l)
                .iter()
                .zip(base.row(l - 1))
                .zip(path.mu.row(l - 1))
                .map(|((a, b), m)| (a - b) * m)
                .sum::<f64>();
        }
        integral += base
            .row(l)
            .iter()
            .zip(path.mu.row(l).iter().zip(path.mu.row(l - 1)))
            .map(|(x, (a, b))| x * (a - b))
            .sum::<f64>();
        out.push(dot(base.row(l), path.mu.row(l)) - start - integral - jumps);
    }
    out
}

pub(crate) fn build_strategy(
    kind: StrategyKind,
    path: &WeightPath,
    inputs: StepInputs,
    ledger: GammaLedger,
) -> Result<StrategyPath> {
    let n = path.n_steps();
    let d = path.n_stocks();
    if kind == StrategyKind::Multiplicative {
        for l in 0..n {
            for v in [ledger.g_value[l], ledger.g_left[l]] {
                if !(v > 0.0) {
                    return Err(Error::NonPositiveG { step: l, value: v });
                }
            }
        }
    }
    let c_of = |l: usize| dot(path.mu.row(l), inputs.grad_state.row(l)) - ledger.g_value[l];

    let mut theta = Matrix::zeros(n, d);
    theta.row_mut(0).copy_from_slice(inputs.grad_state.row(0));
    for l in 1..n {
        theta.row_mut(l).copy_from_slice(inputs.grad_state.row(l - 1));
    }

    let mut holdings = Matrix::zeros(n, d);
    let mut wealth = Vec::with_capacity(n);
    let mut closed = Vec::with_capacity(n);
    let c0 = c_of(0);
    for i in 0..d {
        holdings.set(0, i, theta.get(0, i) - c0);
    }
    wealth.push(dot(holdings.row(0), path.mu.row(0)));
    for l in 1..n {
        match kind {
            StrategyKind::Additive => {
                let available = wealth[l - 1] + jump_injection(&inputs, path, l - 1);
                let shift = available - dot(theta.row(l), path.mu.row(l - 1));
                for i in 0..d {
                    holdings.set(l, i, theta.get(l, i) + shift);
                }
            }
            StrategyKind::Multiplicative => {
                let scale = wealth[l - 1] / ledger.g_left[l - 1];
                let c = c_of(l - 1);
                for i in 0..d {
                    holdings.set(l, i, (theta.get(l, i) - c) * scale);
                }
            }
        }
        let v = dot(holdings.row(l), path.mu.row(l));
        if !v.is_finite() {
            return Err(Error::NumericalFailure { step: l });
        }
        wealth.push(v);
    }
    for l in 0..n {
        closed.push(match kind {
            StrategyKind::Additive => ledger.g_left[l] + ledger.gamma_continuous[l],
            StrategyKind::Multiplicative => ledger.g_left[l] * ledger.k_exponent[l].exp(),
        });
    }

    let base = match kind {
        StrategyKind::Additive => theta.clone(),
        StrategyKind::Multiplicative => {
            let mut eta = theta.clone();
            for l in 1..n {
                let k = ledger.k_exponent[l - 1].exp();
                for x in eta.row_mut(l) {
                    *x *= k;
                }
            }
            eta
        }
    };
    let defect_c = (0..n).map(c_of).collect();
    let max_deviation = wealth
        .iter()
        .zip(&closed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(StrategyPath {
        kind,
        defect_q: defect_q(&base, path),
        theta,
        holdings,
        wealth,
        closed_form: closed,
        defect_c,
        ledger,
        max_deviation,
    })
}

fn check_domain<G: GeneratorSpec + ?Sized>(spec: &G, path: &WeightPath) -> Result<()> {
    if path.has_jumps() {
        if spec.requires_continuous_aux() {
            return Err(Error::JumpsNotSupported);
        }
        if !spec.is_balanced() {
            return Err(Error::UnbalancedWithJumps);
        }
    }
    spec.validate_path(path)
}

/// Additively generated strategy; wealth tracks G(t−) + Γ^c.
pub fn additive_strategy<G: GeneratorSpec + ?Sized>(spec: &G, path: &WeightPath) -> Result<StrategyPath> {
    check_domain(spec, path)?;
    let ledger = accumulate_gamma(spec, path)?;
    build_strategy(StrategyKind::Additive, path, inputs_for(spec, path), ledger)
}

/// Multiplicatively generated strategy; wealth tracks G(t−)·exp(∫dΓ^c/G).
pub fn multiplicative_strategy<G: GeneratorSpec + ?Sized>(
    spec: &G,
    path: &WeightPath,
) -> Result<StrategyPath> {
    check_domain(spec, path)?;
    let ledger = accumulate_gamma(spec, path)?;
    build_strategy(StrategyKind::Multiplicative, path, inputs_for(spec, path), ledger)
}

/// Portfolio weights of a strategy. Row ℓ holds the weights chosen at
/// t_{ℓ−1} for the period (t_{ℓ−1}, t_ℓ], valued at t_{ℓ−1} prices.
pub fn weights_from_strategy(sp: &StrategyPath, path: &WeightPath) -> Result<Matrix> {
    let n = path.n_steps();
    let d = path.n_stocks();
    if sp.holdings.rows() != n || sp.holdings.cols() != d {
        return Err(Error::LengthMismatch("holdings and path differ in shape".into()));
    }
    let mut out = Matrix::zeros(n, d);
    for l in 0..n {
        let mu = path.mu.row(l.saturating_sub(1));
        let h = sp.holdings.row(l);
        let total = dot(h, mu);
        if !total.is_finite() || total.abs() < f64::MIN_POSITIVE {
            return Err(Error::ZeroWealth { step: l });
        }
        for i in 0..d {
            out.set(l, i, h[i] * mu[i] / total);
        }
    }
    Ok(out)
}

/// First step at which Γ^c exceeds `g0`, after checking that Γ^c never
/// decreases by more than 1e-12.
pub fn arbitrage_certificate(ledger: &GammaLedger, g0: f64) -> Result<Option<usize>> {
    let gam = &ledger.gamma_continuous;
    for l in 1..gam.len() {
        let drop = gam[l - 1] - gam[l];
        if drop > 1e-12 {
            return Err(Error::NotMonotone { step: l, drop });
        }
    }
    Ok(gam.iter().position(|&x| x > g0))
}

/// Both sides of the jump identity Σ Δϑ_i μ_i = ΔG at one flagged step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpCheck {
    pub step: usize,
    pub holdings_side: f64,
    pub generator_side: f64,
}

pub fn jump_consistency<G: GeneratorSpec + ?Sized>(spec: &G, path: &WeightPath) -> Vec<JumpCheck> {
    (1..path.n_steps())
        .filter(|&l| path.is_jump(l))
        .map(|l| {
            let after = spec.grad_mu(&path.state(l));
            let before = spec.grad_mu(&path.left_state(l));
            let holdings_side = after
                .iter()
                .zip(&before)
                .zip(path.mu.row(l))
                .map(|((a, b), m)| (a - b) * m)
                .sum();
            let generator_side = spec.value(&path.state(l)) - spec.value(&path.left_state(l));
            JumpCheck {
                step: l,
                holdings_side,
                generator_side,
            }
        })
        .collect()
}
