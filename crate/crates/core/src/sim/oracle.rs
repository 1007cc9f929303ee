//! Brute-force replication of strategy wealth from share holdings.
//!
//! Deliberately self-contained: nothing here calls into the generation code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgp::StrategyPath;
use crate::market::WeightPath;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePath {
    pub replicated_wealth: Vec<f64>,
    pub closed_form_wealth: Vec<f64>,
    /// Cumulative cost of rebalancing at flagged steps.
    pub jump_sum: Vec<f64>,
    pub max_abs_gap: f64,
}

/// Replicates the wealth of `sp` and compares it with its closed form.
pub fn replicate(sp: &StrategyPath, path: &WeightPath) -> Result<OraclePath> {
    replicate_holdings(&sp.holdings, &sp.closed_form, path)
}

/// V(t_ℓ) = V(t_{ℓ−1}) + Σ_i x_i(t_ℓ)(μ_i(t_ℓ) − μ_i(t_{ℓ−1})), plus the
/// money put in when holdings change at a flagged step. Row ℓ of `holdings`
/// is the position over (t_{ℓ−1}, t_ℓ].
pub fn replicate_holdings(holdings: &Matrix, closed_form: &[f64], path: &WeightPath) -> Result<OraclePath> {
    let n = path.n_steps();
    let d = path.n_stocks();
    if holdings.rows() != n || holdings.cols() != d || closed_form.len() != n {
        return Err(Error::LengthMismatch(format!(
            "holdings {}x{}, closed form {}, path {}x{}",
            holdings.rows(),
            holdings.cols(),
            closed_form.len(),
            n,
            d
        )));
    }
    let mut v = Vec::with_capacity(n);
    let mut jumps = Vec::with_capacity(n);
    let mut v0 = 0.0;
    for i in 0..d {
        v0 += holdings.get(0, i) * path.mu.get(0, i);
    }
    v.push(v0);
    jumps.push(0.0);
    for l in 1..n {
        let mut gain = 0.0;
        for i in 0..d {
            gain += holdings.get(l, i) * (path.mu.get(l, i) - path.mu.get(l - 1, i));
        }
        let mut inject = 0.0;
        if l >= 2 && path.jump_flags[l - 1] {
            for i in 0..d {
                inject += (holdings.get(l, i) - holdings.get(l - 1, i)) * path.mu.get(l - 1, i);
            }
        }
        v.push(v[l - 1] + gain + inject);
        jumps.push(jumps[l - 1] + inject);
    }
    let mut gap = 0.0f64;
    for l in 0..n {
        gap = gap.max((v[l] - closed_form[l]).abs());
    }
    Ok(OraclePath {
        replicated_wealth: v,
        closed_form_wealth: closed_form.to_vec(),
        jump_sum: jumps,
        max_abs_gap: gap,
    })
}
