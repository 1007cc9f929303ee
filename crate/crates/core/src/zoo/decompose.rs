use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::WeightPath;

/// Log relative value of the book-value portfolio split into three series:
/// log G(t−), the quadratic-covariation term and −∫ Σ log ρ_i dβ^c_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDecomposition {
    pub log_g: Vec<f64>,
    pub quad: Vec<f64>,
    pub beta_term: Vec<f64>,
}

impl LogDecomposition {
    pub fn total(&self, l: usize) -> f64 {
        self.log_g[l] + self.quad[l] + self.beta_term[l]
    }
}

fn log_g(path: &WeightPath, l: usize, left: bool) -> f64 {
    let s = if left { path.left_state(l) } else { path.state(l) };
    (0..s.dim()).map(|i| s.beta(i) * s.rho(i).ln()).sum()
}

/// Decomposes log V of the normalized book-value generator without any
/// stochastic integral against μ.
///
/// The quadratic term per step is ½ Σ β_i (Δμ_i/μ_i)² − ½ (Σ β_i Δμ_i/μ_i)²
/// at the left point; book increments at flagged steps are jumps and do not
/// enter the β term.
pub fn book_value_log_decomposition(path: &WeightPath) -> Result<LogDecomposition> {
    let n = path.n_steps();
    let d = path.n_stocks();
    let g0 = log_g(path, 0, false);
    let mut out = LogDecomposition {
        log_g: Vec::with_capacity(n),
        quad: Vec::with_capacity(n),
        beta_term: Vec::with_capacity(n),
    };
    out.log_g.push(0.0);
    out.quad.push(0.0);
    out.beta_term.push(0.0);
    for l in 1..n {
        let (mut sq, mut lin, mut bt) = (0.0, 0.0, 0.0);
        for i in 0..d {
            let mu0 = path.mu.get(l - 1, i);
            let b0 = path.beta.get(l - 1, i);
            let x = (path.mu.get(l, i) - mu0) / mu0;
            sq += b0 * x * x;
            lin += b0 * x;
            if !path.is_jump(l) {
                bt -= path.rho.get(l - 1, i).ln() * (path.beta.get(l, i) - b0);
            }
        }
        let lg = log_g(path, l, true) - g0;
        let q = out.quad[l - 1] + 0.5 * (sq - lin * lin);
        let b = out.beta_term[l - 1] + bt;
        if ![lg, q, b].iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure { step: l });
        }
        out.log_g.push(lg);
        out.quad.push(q);
        out.beta_term.push(b);
    }
    Ok(out)
}
