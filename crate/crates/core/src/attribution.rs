//! Size and value attribution of relative returns through weight ratios.

use serde::{Deserialize, Serialize};

use crate::backtest::BacktestResult;
use crate::error::{Error, Result};
use crate::market::WeightPath;
use crate::matrix::Matrix;
use crate::rank::{estimate_local_times, RankFrame};

/// Per-period distributional (size) and market-to-book components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    /// Step at the end of each period (t_ℓ, t_{ℓ+1}], i.e. ℓ + 1.
    pub steps: Vec<usize>,
    pub dc: Vec<f64>,
    pub mbrc: Vec<f64>,
    /// Weight ratios by size rank at the start of each period.
    pub w: Matrix,
    /// Weight ratios by ρ rank at the start of each period.
    pub v: Matrix,
    /// ½ Σ_k (w_{k+1} − w_k) ΔL_k over each period, from the size-gap local
    /// times. Reported separately, not part of DC.
    pub local_time_correction: Vec<f64>,
}

impl AttributionReport {
    /// Running sums of DC and MBRC.
    pub fn cumulative(&self) -> (Vec<f64>, Vec<f64>) {
        let scan = |xs: &[f64]| {
            xs.iter()
                .scan(0.0, |acc, x| {
                    *acc += x;
                    Some(*acc)
                })
                .collect()
        };
        (scan(&self.dc), scan(&self.mbrc))
    }
}

fn ratio(pi: f64, mu: f64, k: usize) -> Result<f64> {
    if mu == 0.0 {
        Err(Error::DegenerateWeights(k))
    } else {
        Ok(pi / mu)
    }
}

/// w_k = π_{p(k)}(t0)/μ_(k)(t0) for the size ranking `perm0` at t0.
pub fn size_ratios(pi: &[f64], mu0: &[f64], perm0: &[usize]) -> Result<Vec<f64>> {
    perm0.iter().enumerate().map(|(k, &i)| ratio(pi[i], mu0[i], k)).collect()
}

/// log Σ_k w_k(t0) μ_(k)(t1), with `ranked_mu1` the descending μ(t1).
///
/// Evaluated as log(1 + Σ_k (w_k − 1) μ_(k)(t1)) using Σ μ(t1) = 1, so unit
/// ratios give exactly zero.
pub fn distributional_component(
    pi: &[f64],
    mu0: &[f64],
    ranked_mu1: &[f64],
    perm0: &[usize],
) -> Result<f64> {
    let w = size_ratios(pi, mu0, perm0)?;
    if let Some(k) = ranked_mu1.iter().position(|&m| m == 0.0) {
        return Err(Error::DegenerateWeights(k));
    }
    Ok(w.iter().zip(ranked_mu1).map(|(a, b)| (a - 1.0) * b).sum::<f64>().ln_1p())
}

/// log Σ_k v_k(t0) μ_{r1(k)}(t1) with v_k = π_{r0(k)}/μ_{r0(k)} at t0,
/// evaluated the same way as [`distributional_component`].
pub fn mtb_ratio_component(
    pi: &[f64],
    mu0: &[f64],
    mu1: &[f64],
    r0: &[usize],
    r1: &[usize],
) -> Result<f64> {
    let v = size_ratios(pi, mu0, r0)?;
    let mut s = 0.0;
    for (k, &i) in r1.iter().enumerate() {
        if mu1[i] == 0.0 {
            return Err(Error::DegenerateWeights(k));
        }
        s += (v[k] - 1.0) * mu1[i];
    }
    Ok(s.ln_1p())
}

/// DC and MBRC for each consecutive pair of steps of a backtest.
pub fn attribute_series(
    result: &BacktestResult,
    path: &WeightPath,
    size: &RankFrame,
    rho: &RankFrame,
) -> Result<AttributionReport> {
    let n = path.n_steps();
    let d = path.n_stocks();
    if result.weights_used.rows() != n
        || result.weights_used.cols() != d
        || size.n_steps() != n
        || rho.n_steps() != n
        || size.dim() != d
        || rho.dim() != d
    {
        return Err(Error::LengthMismatch(
            "backtest, weight path and rank frames must share steps and stocks".into(),
        ));
    }
    let lt = estimate_local_times(size);
    let periods = n - 1;
    let mut rep = AttributionReport {
        steps: (1..n).collect(),
        dc: Vec::with_capacity(periods),
        mbrc: Vec::with_capacity(periods),
        w: Matrix::zeros(periods, d),
        v: Matrix::zeros(periods, d),
        local_time_correction: Vec::with_capacity(periods),
    };
    for l in 0..periods {
        let pi = result.weights_used.row(l + 1);
        let mu0 = path.mu.row(l);
        let mu1 = path.mu.row(l + 1);
        let w = size_ratios(pi, mu0, size.perm(l))?;
        let v = size_ratios(pi, mu0, rho.perm(l))?;
        rep.dc.push(distributional_component(pi, mu0, size.ranked(l + 1), size.perm(l))?);
        rep.mbrc.push(mtb_ratio_component(pi, mu0, mu1, rho.perm(l), rho.perm(l + 1))?);
        let corr: f64 = (0..d - 1)
            .map(|k| 0.5 * (w[k + 1] - w[k]) * (lt.lt.get(l + 1, k) - lt.lt.get(l, k)))
            .sum();
        rep.local_time_correction.push(corr);
        rep.w.row_mut(l).copy_from_slice(&w);
        rep.v.row_mut(l).copy_from_slice(&v);
    }
    Ok(rep)
}
