//! Descending ranks with lexicographic ties, local times of adjacent gaps,
//! and functional generation from ranked market-to-book ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgp::{build_strategy, GammaLedger, StepInputs, StrategyKind, StrategyPath};
use crate::market::WeightPath;
use crate::matrix::Matrix;

/// Ranked values and permutations along a path. Ranks and stock indices are
/// zero-based; `perm(l)[k]` is the stock in rank k at step l.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankFrame {
    pub values: Matrix,
    pub ranked_values: Matrix,
    perm: Vec<usize>,
    inverse: Vec<usize>,
}

impl RankFrame {
    pub fn n_steps(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn ranked(&self, l: usize) -> &[f64] {
        self.ranked_values.row(l)
    }

    /// rank → stock index.
    pub fn perm(&self, l: usize) -> &[usize] {
        let d = self.dim();
        &self.perm[l * d..(l + 1) * d]
    }

    /// stock index → rank.
    pub fn inverse_perm(&self, l: usize) -> &[usize] {
        let d = self.dim();
        &self.inverse[l * d..(l + 1) * d]
    }
}

/// Descending order of `v`; ties keep the smaller index first.
pub fn rank_vector(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

pub fn rank_path(values: &Matrix) -> RankFrame {
    let n = values.rows();
    let d = values.cols();
    let mut ranked = Matrix::zeros(n, d);
    let mut perm = Vec::with_capacity(n * d);
    let mut inverse = vec![0; n * d];
    for l in 0..n {
        let row = values.row(l);
        let p = rank_vector(row);
        for (k, &i) in p.iter().enumerate() {
            ranked.set(l, k, row[i]);
            inverse[l * d + i] = k;
        }
        perm.extend_from_slice(&p);
    }
    RankFrame {
        values: values.clone(),
        ranked_values: ranked,
        perm,
        inverse,
    }
}

/// Counts of steps with tied adjacent ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieReport {
    pub steps_with_two_way_ties: usize,
    pub steps_with_three_way_ties: usize,
    pub two_way_fraction: f64,
}

impl TieReport {
    /// Three names sharing a value break the nondegeneracy assumption.
    pub fn warning(&self) -> Option<String> {
        (self.steps_with_three_way_ties > 0).then(|| {
            format!(
                "three-way rank ties at {} steps; higher-order collision local times are ignored",
                self.steps_with_three_way_ties
            )
        })
    }
}

pub fn tie_report(frame: &RankFrame) -> TieReport {
    let n = frame.n_steps();
    let (mut two, mut three) = (0, 0);
    for l in 0..n {
        let r = frame.ranked(l);
        let mut run = 1;
        let mut longest = 1;
        for k in 1..r.len() {
            run = if r[k] == r[k - 1] { run + 1 } else { 1 };
            longest = longest.max(run);
        }
        if longest >= 2 {
            two += 1;
        }
        if longest >= 3 {
            three += 1;
        }
    }
    TieReport {
        steps_with_two_way_ties: two,
        steps_with_three_way_ties: three,
        two_way_fraction: two as f64 / n as f64,
    }
}

/// Cumulative local times at 0 of the adjacent gaps ν_[k] − ν_[k+1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeSet {
    /// n × (d − 1); column k is the gap between ranks k and k+1.
    pub lt: Matrix,
    /// Per-step total of negative increments removed by the monotone clamp.
    pub clamp: Vec<f64>,
}

impl LocalTimeSet {
    pub fn clamp_total(&self) -> f64 {
        self.clamp.iter().sum()
    }
}

/// Tanaka discretisation of the local time of each adjacent gap.
///
/// The increment over a step compares the change of the gap with the change
/// of the difference Z of the two names that held those ranks at the start of
/// the step: ΔL = ΔY − (Z − Y(t−)). Names tied at the start are taken in the
/// order they hold at the end of the step, which keeps the estimate free of
/// the labelling of stocks. Negative increments are clamped to zero and their
/// size recorded.
pub fn estimate_local_times(frame: &RankFrame) -> LocalTimeSet {
    let n = frame.n_steps();
    let d = frame.dim();
    let gaps = d.saturating_sub(1);
    let mut lt = Matrix::zeros(n, gaps);
    let mut clamp = vec![0.0; n];
    for m in 1..n {
        let prev_rank = frame.ranked(m - 1);
        let cur_rank = frame.ranked(m);
        let names = frame.perm(m - 1);
        let vals = frame.values.row(m);
        for k in 0..gaps {
            let y0 = prev_rank[k] - prev_rank[k + 1];
            let y1 = cur_rank[k] - cur_rank[k + 1];
            let mut z = vals[names[k]] - vals[names[k + 1]];
            if y0 == 0.0 {
                // tied names are ordered by where they go, not by label
                z = z.abs();
            }
            let raw = (y1 - y0) - (z - y0);
            if raw < 0.0 {
                clamp[m] += -raw;
            }
            lt.set(m, k, lt.get(m - 1, k) + raw.max(0.0));
        }
    }
    LocalTimeSet { lt, clamp }
}

/// A generating function of ranked values ν_[1] ≥ … ≥ ν_[d].
pub trait RankGenerator: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, nu: &[f64]) -> f64;
    /// D_k G.
    fn grad(&self, nu: &[f64]) -> Vec<f64>;
    /// Row-major D²_{kl} G.
    fn hess(&self, nu: &[f64]) -> Vec<f64>;
}

/// G = Π ν_[k]^{c_k}; generates the rank-constant-rebalanced portfolio c.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantRebalanced {
    pub c: Vec<f64>,
}

impl ConstantRebalanced {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        let s: f64 = c.iter().sum();
        if (s - 1.0).abs() > 1e-12 || c.iter().any(|x| !x.is_finite()) {
            return Err(Error::BadComposition(s));
        }
        Ok(ConstantRebalanced { c })
    }
}

impl RankGenerator for ConstantRebalanced {
    fn name(&self) -> String {
        "rank_cr".into()
    }

    fn value(&self, nu: &[f64]) -> f64 {
        nu.iter()
            .zip(&self.c)
            .map(|(v, c)| if *c == 0.0 { 0.0 } else { c * v.ln() })
            .sum::<f64>()
            .exp()
    }

    fn grad(&self, nu: &[f64]) -> Vec<f64> {
        let g = self.value(nu);
        nu.iter().zip(&self.c).map(|(v, c)| c * g / v).collect()
    }

    fn hess(&self, nu: &[f64]) -> Vec<f64> {
        let d = nu.len();
        let g = self.value(nu);
        let mut h = vec![0.0; d * d];
        for k in 0..d {
            for l in 0..d {
                h[k * d + l] = g * self.c[k] * self.c[l] / (nu[k] * nu[l]);
            }
            h[k * d + k] -= g * self.c[k] / (nu[k] * nu[k]);
        }
        h
    }
}

/// G = Σ_k ν_[k], symmetric in the names.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricLinear;

impl RankGenerator for SymmetricLinear {
    fn name(&self) -> String {
        "symmetric_linear".into()
    }
    fn value(&self, nu: &[f64]) -> f64 {
        nu.iter().sum()
    }
    fn grad(&self, nu: &[f64]) -> Vec<f64> {
        vec![1.0; nu.len()]
    }
    fn hess(&self, nu: &[f64]) -> Vec<f64> {
        vec![0.0; nu.len() * nu.len()]
    }
}

/// G ≡ constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRank(pub f64);

impl RankGenerator for ConstantRank {
    fn name(&self) -> String {
        "constant".into()
    }
    fn value(&self, _nu: &[f64]) -> f64 {
        self.0
    }
    fn grad(&self, nu: &[f64]) -> Vec<f64> {
        vec![0.0; nu.len()]
    }
    fn hess(&self, nu: &[f64]) -> Vec<f64> {
        vec![0.0; nu.len() * nu.len()]
    }
}

fn check_inputs(path: &WeightPath, frame: &RankFrame, lt: &LocalTimeSet) -> Result<()> {
    if path.has_jumps() {
        return Err(Error::JumpsNotSupported);
    }
    let n = path.n_steps();
    let d = path.n_stocks();
    if frame.n_steps() != n || frame.dim() != d || lt.lt.rows() != n {
        return Err(Error::LengthMismatch("rank frame, local times and path differ".into()));
    }
    if n < 2 {
        return Err(Error::GridTooShort(n));
    }
    Ok(())
}

/// ϑ_i = D_kG(ν)/β_i for the stock i in rank k.
fn ranked_theta(grad: &[f64], perm: &[usize], beta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; beta.len()];
    for (k, &i) in perm.iter().enumerate() {
        out[i] = grad[k] / beta[i];
    }
    out
}

/// Gamma ledger of a rank generator applied to ranked market-to-book ratios.
///
/// `gamma` is the definitional G(ν(0)) − G(ν(t)) + ∫ Σ ϑ_i dμ_i. The
/// continuous part is expanded into the quadratic covariation, the g and h
/// parts of the dβ integral, and the two local-time integrals.
pub fn ranked_gamma<R: RankGenerator + ?Sized>(
    gen: &R,
    path: &WeightPath,
    frame: &RankFrame,
    lt: &LocalTimeSet,
) -> Result<GammaLedger> {
    check_inputs(path, frame, lt)?;
    let n = path.n_steps();
    let d = path.n_stocks();
    let mut led = GammaLedger::default();
    let g0 = gen.value(frame.ranked(0));
    for v in [
        &mut led.gamma,
        &mut led.gamma_continuous,
        &mut led.qv_term,
        &mut led.gamma_integral_term,
        &mut led.xi_integral_term,
        &mut led.local_time_term,
        &mut led.jump_term,
        &mut led.k_exponent,
    ] {
        v.push(0.0);
    }
    led.g_value.push(g0);
    led.g_left.push(g0);
    let mut stoch = 0.0;
    for l in 1..n {
        let nu = frame.ranked(l - 1);
        let perm = frame.perm(l - 1);
        let beta = path.beta.row(l - 1);
        let grad = gen.grad(nu);
        let hess = gen.hess(nu);
        let theta = ranked_theta(&grad, perm, beta);
        let mu0 = path.mu.row(l - 1);
        let mu1 = path.mu.row(l);
        stoch += theta
            .iter()
            .zip(mu1.iter().zip(mu0))
            .map(|(t, (a, b))| t * (a - b))
            .sum::<f64>();

        // dμ_i/β_i in rank order
        let x: Vec<f64> = perm.iter().map(|&i| (mu1[i] - mu0[i]) / beta[i]).collect();
        let mut qv = 0.0;
        for k in 0..d {
            qv += x[k] * x.iter().zip(&hess[k * d..(k + 1) * d]).map(|(a, b)| a * b).sum::<f64>();
        }
        let (mut dg, mut dh) = (0.0, 0.0);
        for (k, &i) in perm.iter().enumerate() {
            let w = grad[k] * path.rho.get(l - 1, i) / beta[i];
            dg += w * (path.g.get(l, i) - path.g.get(l - 1, i));
            dh -= w * (path.h.get(l, i) - path.h.get(l - 1, i));
        }
        let mut dl = 0.0;
        for k in 0..d - 1 {
            let inc = lt.lt.get(l, k) - lt.lt.get(l - 1, k);
            dl += 0.5 * inc * (grad[k + 1] - grad[k]);
        }
        let d_qv = -0.5 * qv;
        let g_now = gen.value(frame.ranked(l));
        if ![stoch, d_qv, dg, dh, dl, g_now].iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure { step: l });
        }
        led.qv_term.push(led.qv_term[l - 1] + d_qv);
        led.gamma_integral_term.push(led.gamma_integral_term[l - 1] + dg);
        led.xi_integral_term.push(led.xi_integral_term[l - 1] + dh);
        led.local_time_term.push(led.local_time_term[l - 1] + dl);
        led.gamma_continuous.push(
            led.qv_term[l]
                + led.gamma_integral_term[l]
                + led.xi_integral_term[l]
                + led.local_time_term[l],
        );
        led.jump_term.push(0.0);
        led.gamma.push(g0 - g_now + stoch);
        let k_prev = led.k_exponent[l - 1];
        led.k_exponent.push(k_prev + (d_qv + dg + dh + dl) / led.g_value[l - 1]);
        led.g_value.push(g_now);
        led.g_left.push(g_now);
    }
    Ok(led)
}

fn rank_strategy<R: RankGenerator + ?Sized>(
    kind: StrategyKind,
    gen: &R,
    path: &WeightPath,
    frame: &RankFrame,
    lt: &LocalTimeSet,
) -> Result<StrategyPath> {
    let ledger = ranked_gamma(gen, path, frame, lt)?;
    let n = path.n_steps();
    let d = path.n_stocks();
    let mut grad_state = Matrix::zeros(n, d);
    for l in 0..n {
        let grad = gen.grad(frame.ranked(l));
        grad_state
            .row_mut(l)
            .copy_from_slice(&ranked_theta(&grad, frame.perm(l), path.beta.row(l)));
    }
    let inputs = StepInputs {
        grad_state,
        grad_left: vec![None; n],
    };
    build_strategy(kind, path, inputs, ledger)
}

/// Multiplicatively generated strategy from a rank generator of ρ.
pub fn rank_multiplicative_strategy<R: RankGenerator + ?Sized>(
    gen: &R,
    path: &WeightPath,
    frame: &RankFrame,
    lt: &LocalTimeSet,
) -> Result<StrategyPath> {
    rank_strategy(StrategyKind::Multiplicative, gen, path, frame, lt)
}

/// Additively generated strategy from a rank generator of ρ.
pub fn rank_additive_strategy<R: RankGenerator + ?Sized>(
    gen: &R,
    path: &WeightPath,
    frame: &RankFrame,
    lt: &LocalTimeSet,
) -> Result<StrategyPath> {
    rank_strategy(StrategyKind::Additive, gen, path, frame, lt)
}

/// Weights Σ_k c_k 1{r(k) = i}.
pub fn rank_weights(c: &[f64], perm: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; perm.len()];
    for (k, &i) in perm.iter().enumerate() {
        out[i] = c[k];
    }
    out
}
