use serde::{Deserialize, Serialize};

use super::{check_derivatives, hessian, GeneratorSpec};
use crate::error::{Error, Result};
use crate::market::{State, WeightPath};

/// Cumulative Gamma process and its pieces, one entry per grid step.
///
/// `gamma` is the definitional G(0) − G(t) + ∫ Σ D_iG dμ_i with left-point
/// integrands. `gamma_continuous` is assembled from the expanded terms and
/// equals their sum exactly; `gamma` and `gamma_continuous − jump_term` agree
/// up to discretization error.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GammaLedger {
    pub gamma: Vec<f64>,
    pub gamma_continuous: Vec<f64>,
    pub qv_term: Vec<f64>,
    pub gamma_integral_term: Vec<f64>,
    pub xi_integral_term: Vec<f64>,
    /// Local-time integrals of rank-based generators; zero otherwise.
    pub local_time_term: Vec<f64>,
    /// Σ ΔG over flagged steps.
    pub jump_term: Vec<f64>,
    /// G at t_ℓ.
    pub g_value: Vec<f64>,
    /// G at t_ℓ−.
    pub g_left: Vec<f64>,
    /// ∫ dΓ^c / G(s−), left-point sums.
    pub k_exponent: Vec<f64>,
}

impl GammaLedger {
    pub(crate) fn with_capacity(n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        GammaLedger {
            gamma: v(),
            gamma_continuous: v(),
            qv_term: v(),
            gamma_integral_term: v(),
            xi_integral_term: v(),
            local_time_term: v(),
            jump_term: v(),
            g_value: v(),
            g_left: v(),
            k_exponent: v(),
        }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Largest |gamma_continuous − (qv + γ + ξ + local time)| over the steps.
    pub fn reconciliation_error(&self) -> f64 {
        (0..self.len())
            .map(|l| {
                let parts = self.qv_term[l]
                    + self.gamma_integral_term[l]
                    + self.xi_integral_term[l]
                    + self.local_time_term[l];
                (self.gamma_continuous[l] - parts).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest |gamma − (gamma_continuous − jump_term)|, a discretization gauge.
    pub fn jump_identity_error(&self) -> f64 {
        (0..self.len())
            .map(|l| (self.gamma[l] - (self.gamma_continuous[l] - self.jump_term[l])).abs())
            .fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Continuous Gamma increment over (t_{ℓ−1}, t_ℓ] split into the quadratic
/// covariation, g and h parts. At a jump step only the quadratic part is
/// continuous. Returns `None` on a non-finite value.
pub(crate) fn continuous_increment<G: GeneratorSpec + ?Sized>(
    spec: &G,
    prev: &State,
    cur: &State,
    jump: bool,
) -> Option<[f64; 3]> {
    let d = prev.dim();
    let hess = hessian(spec, prev);
    let dmu: Vec<f64> = cur.mu.iter().zip(prev.mu).map(|(a, b)| a - b).collect();
    let mut qv = 0.0;
    for i in 0..d {
        qv += dmu[i] * dot(&hess[i * d..(i + 1) * d], &dmu);
    }
    let (mut gam, mut xi) = (0.0, 0.0);
    if !jump {
        let dg = spec.d_g(prev);
        let dh = spec.d_h(prev);
        for i in 0..d {
            gam -= dg[i] * (cur.g[i] - prev.g[i]);
            xi -= dh[i] * (cur.h[i] - prev.h[i]);
        }
    }
    let out = [-0.5 * qv, gam, xi];
    out.iter().all(|x| x.is_finite()).then_some(out)
}

fn finite(step: usize, xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalFailure { step })
    }
}

/// Accumulates the Gamma process of `spec` along `path`.
pub fn accumulate_gamma<G: GeneratorSpec + ?Sized>(spec: &G, path: &WeightPath) -> Result<GammaLedger> {
    let n = path.n_steps();
    if n < 2 {
        return Err(Error::GridTooShort(n));
    }
    for l in [0, n / 2, n - 1] {
        check_derivatives(spec, &path.state(l))?;
    }
    let mut led = GammaLedger::with_capacity(n);
    let g0 = spec.value(&path.state(0));
    finite(0, &[g0])?;
    led.gamma.push(0.0);
    led.gamma_continuous.push(0.0);
    led.qv_term.push(0.0);
    led.gamma_integral_term.push(0.0);
    led.xi_integral_term.push(0.0);
    led.local_time_term.push(0.0);
    led.jump_term.push(0.0);
    led.g_value.push(g0);
    led.g_left.push(g0);
    led.k_exponent.push(0.0);

    let mut stoch = 0.0;
    for l in 1..n {
        let prev = path.state(l - 1);
        let cur = path.state(l);
        let g_prev = led.g_value[l - 1];
        let grad = spec.grad_mu(&prev);
        finite(l, &grad)?;
        stoch += grad
            .iter()
            .zip(cur.mu.iter().zip(prev.mu))
            .map(|(a, (x, y))| a * (x - y))
            .sum::<f64>();
        let [d_qv, d_gam, d_xi] = continuous_increment(spec, &prev, &cur, path.is_jump(l))
            .ok_or(Error::NumericalFailure { step: l })?;
        let g_now = spec.value(&cur);
        let (g_left, d_jump) = if path.is_jump(l) {
            let gl = spec.value(&path.left_state(l));
            (gl, g_now - gl)
        } else {
            (g_now, 0.0)
        };
        finite(l, &[g_now, g_left, d_qv, d_gam, d_xi])?;

        let d_cont = d_qv + d_gam + d_xi;
        led.qv_term.push(led.qv_term[l - 1] + d_qv);
        led.gamma_integral_term.push(led.gamma_integral_term[l - 1] + d_gam);
        led.xi_integral_term.push(led.xi_integral_term[l - 1] + d_xi);
        led.local_time_term.push(0.0);
        led.gamma_continuous.push(
            led.qv_term[l] + led.gamma_integral_term[l] + led.xi_integral_term[l],
        );
        led.jump_term.push(led.jump_term[l - 1] + d_jump);
        led.gamma.push(g0 - g_now + stoch);
        led.g_value.push(g_now);
        led.g_left.push(g_left);
        led.k_exponent.push(led.k_exponent[l - 1] + d_cont / g_prev);
    }
    Ok(led)
}
