mod common;

use common::*;
use fgp_core::attribution::{attribute_series, distributional_component, mtb_ratio_component, size_ratios};
use fgp_core::backtest::run_backtest;
use fgp_core::rank::rank_path;
use fgp_core::zoo::parse_portfolio;
use fgp_core::{compute_weights, Error, MarketSeries};
use proptest::prelude::*;

fn run(series: &MarketSeries, name: &str) -> fgp_core::attribution::AttributionReport {
    let path = compute_weights(series).unwrap();
    let mut rule = parse_portfolio(name).unwrap().weight_rule(&path).unwrap();
    let res = run_backtest(series, rule.as_mut()).unwrap();
    attribute_series(&res, &path, &rank_path(&path.mu), &rank_path(&path.rho)).unwrap()
}

#[test]
fn two_asset_hand_example() {
    let (pi, mu0, mu1) = ([0.5, 0.5], [0.8, 0.2], [0.6, 0.4]);
    assert_eq!(size_ratios(&pi, &mu0, &[0, 1]).unwrap(), vec![0.625, 2.5]);
    let dc = distributional_component(&pi, &mu0, &mu1, &[0, 1]).unwrap();
    assert!((dc - 1.375f64.ln()).abs() < 1e-12);
}

#[test]
fn market_weights_give_zero() {
    let mu0 = [0.5, 0.3, 0.2];
    let mu1 = [0.2, 0.45, 0.35];
    let ranked1 = [0.45, 0.35, 0.2];
    assert_eq!(distributional_component(&mu0, &mu0, &ranked1, &[0, 1, 2]).unwrap(), 0.0);
    assert_eq!(mtb_ratio_component(&mu0, &mu0, &mu1, &[2, 0, 1], &[1, 2, 0]).unwrap(), 0.0);
}

#[test]
fn frozen_market_gives_zero() {
    let pi = [0.1, 0.6, 0.3];
    let mu = [0.5, 0.3, 0.2];
    assert!(distributional_component(&pi, &mu, &mu, &[0, 1, 2]).unwrap().abs() < 1e-15);
    assert!(mtb_ratio_component(&pi, &mu, &mu, &[1, 0, 2], &[1, 0, 2]).unwrap().abs() < 1e-15);
}

/// log Σ_k v_k μ_{r1(k)} summed in the plain form over the composition r1∘r0⁻¹.
fn mbrc_by_enumeration(pi: &[f64], mu0: &[f64], mu1: &[f64], r0: &[usize], r1: &[usize]) -> f64 {
    let mut total = 0.0;
    for (k0, &i0) in r0.iter().enumerate() {
        for (k1, &i1) in r1.iter().enumerate() {
            if k0 == k1 {
                total += pi[i0] / mu0[i0] * mu1[i1];
            }
        }
    }
    total.ln()
}

#[test]
fn rank_swap_matches_enumeration() {
    // ρ ranks swap between t0 and t1
    let pi = [0.3, 0.7];
    let mu0 = [0.6, 0.4];
    let mu1 = [0.55, 0.45];
    let (r0, r1) = ([0usize, 1], [1usize, 0]);
    let got = mtb_ratio_component(&pi, &mu0, &mu1, &r0, &r1).unwrap();
    let want = mbrc_by_enumeration(&pi, &mu0, &mu1, &r0, &r1);
    // (0.5·0.45 + 1.75·0.55) = 1.1875
    assert!((got - 1.1875f64.ln()).abs() < 1e-15);
    assert!((got - want).abs() < 1e-15);
}

#[test]
fn degenerate_weights() {
    assert_eq!(
        mtb_ratio_component(&[0.5, 0.5], &[0.5, 0.5], &[1.0, 0.0], &[0, 1], &[0, 1]),
        Err(Error::DegenerateWeights(1))
    );
    assert_eq!(size_ratios(&[1.0, 0.0], &[0.0, 1.0], &[0, 1]), Err(Error::DegenerateWeights(0)));
}

#[test]
fn market_over_a_series() {
    let rep = run(&sim_series(5, 1e-2, 2.0, 3), "market");
    assert!(rep.dc.iter().chain(&rep.mbrc).all(|&x| x.abs() < 1e-14));
    assert_eq!(rep.steps.len(), rep.dc.len());
}

#[test]
fn book_value_matches_recomputation() {
    let series = sim_series(4, 1e-2, 2.0, 9);
    let path = compute_weights(&series).unwrap();
    let rep = run(&series, "book_value");
    for l in 0..path.n_steps() - 1 {
        // book-value weights are β(t_ℓ); rank directly by sorting
        let pi = path.beta.row(l);
        let mut by_size: Vec<usize> = (0..4).collect();
        by_size.sort_by(|&a, &b| path.mu.get(l, b).partial_cmp(&path.mu.get(l, a)).unwrap());
        let mut next: Vec<f64> = path.mu.row(l + 1).to_vec();
        next.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let dc: f64 = by_size.iter().enumerate().map(|(k, &i)| pi[i] / path.mu.get(l, i) * next[k]).sum();
        assert!((rep.dc[l] - dc.ln()).abs() < 1e-12, "step {l}");
        for (k, &i) in by_size.iter().enumerate() {
            assert!((rep.w.get(l, k) - pi[i] / path.mu.get(l, i)).abs() < 1e-12);
        }
        let wsum: f64 = (0..4).map(|k| rep.w.get(l, k) * path.mu.get(l, by_size[k])).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }
}

#[test]
fn length_mismatch() {
    let series = sim_series(3, 1e-2, 0.5, 1);
    let path = compute_weights(&series).unwrap();
    let mut rule = parse_portfolio("market").unwrap().weight_rule(&path).unwrap();
    let res = run_backtest(&series, rule.as_mut()).unwrap();
    let short = compute_weights(&series.truncated(10)).unwrap();
    assert!(matches!(
        attribute_series(&res, &path, &rank_path(&short.mu), &rank_path(&path.rho)),
        Err(Error::LengthMismatch(_))
    ));
}

fn simplex(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

proptest! {
    #[test]
    fn relabeling_leaves_components(
        raw in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0, 0.05f64..1.0, 0.2f64..5.0, 0.2f64..5.0), 2..6),
        shift in 0usize..6,
    ) {
        let d = raw.len();
        let pi = simplex(raw.iter().map(|r| r.0).collect());
        let mu0 = simplex(raw.iter().map(|r| r.1).collect());
        let mu1 = simplex(raw.iter().map(|r| r.2).collect());
        let rho0: Vec<f64> = raw.iter().map(|r| r.3).collect();
        let rho1: Vec<f64> = raw.iter().map(|r| r.4).collect();
        let eval = |pi: &[f64], mu0: &[f64], mu1: &[f64], rho0: &[f64], rho1: &[f64]| {
            let p0 = fgp_core::rank::rank_vector(mu0);
            let mut ranked1 = mu1.to_vec();
            ranked1.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let r0 = fgp_core::rank::rank_vector(rho0);
            let r1 = fgp_core::rank::rank_vector(rho1);
            (
                distributional_component(pi, mu0, &ranked1, &p0).unwrap(),
                mtb_ratio_component(pi, mu0, mu1, &r0, &r1).unwrap(),
            )
        };
        let rot = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| v[(i + shift) % d]).collect() };
        let a = eval(&pi, &mu0, &mu1, &rho0, &rho1);
        let b = eval(&rot(&pi), &rot(&mu0), &rot(&mu1), &rot(&rho0), &rot(&rho1));
        prop_assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn market_portfolio_is_exactly_zero(raw in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0), 2..8)) {
        let mu0 = simplex(raw.iter().map(|r| r.0).collect());
        let mu1 = simplex(raw.iter().map(|r| r.1).collect());
        let p0 = fgp_core::rank::rank_vector(&mu0);
        let mut ranked1 = mu1.clone();
        ranked1.sort_by(|a, b| b.partial_cmp(a).unwrap());
        prop_assert_eq!(distributional_component(&mu0, &mu0, &ranked1, &p0).unwrap(), 0.0);
        let r1 = fgp_core::rank::rank_vector(&mu1);
        prop_assert_eq!(mtb_ratio_component(&mu0, &mu0, &mu1, &p0, &r1).unwrap(), 0.0);
    }
}
