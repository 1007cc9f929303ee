#![allow(dead_code)]

use fgp_core::fgp::GeneratorSpec;
use fgp_core::sim::{simulate, SimConfig};
use fgp_core::zoo::{
    default_bounds, BookValueGenerator, LogarithmicGenerator, ModifiedBookValueGenerator,
    ModifiedMtbGenerator,
};
use fgp_core::{compute_weights, MarketSeries, State, WeightPath};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sim_series(d: usize, dt: f64, horizon: f64, seed: u64) -> MarketSeries {
    simulate(&SimConfig::standard(d, dt, horizon, seed)).expect("simulation")
}

pub fn sim_path(d: usize, dt: f64, horizon: f64, seed: u64) -> WeightPath {
    compute_weights(&sim_series(d, dt, horizon, seed)).expect("weights")
}

pub fn jump_path(d: usize, dt: f64, horizon: f64, seed: u64) -> WeightPath {
    let cfg = SimConfig::standard(d, dt, horizon, seed).with_jumps(1.0);
    compute_weights(&simulate(&cfg).expect("simulation")).expect("weights")
}

/// The generators whose wealth identities are gated, with data-driven bounds.
pub fn gated_generators(path: &WeightPath) -> Vec<(String, Box<dyn GeneratorSpec>)> {
    let (m, big_m, delta) = default_bounds(path);
    vec![
        ("book_value".into(), Box::new(BookValueGenerator::normalized_on(path))),
        ("modified_book_value".into(), Box::new(ModifiedBookValueGenerator::new(m, big_m).unwrap())),
        ("modified_mtb(p=1)".into(), Box::new(ModifiedMtbGenerator::new(1.0, delta).unwrap())),
        ("modified_mtb(p=0.5)".into(), Box::new(ModifiedMtbGenerator::new(0.5, delta).unwrap())),
        ("logarithmic".into(), Box::new(LogarithmicGenerator::new(m, big_m, delta).unwrap())),
    ]
}

/// Owned (μ, g, h) for an interior point.
pub struct Point {
    pub mu: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl Point {
    pub fn state(&self) -> State<'_> {
        State::new(&self.mu, &self.g, &self.h)
    }
}

fn simplex(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Point {
    let mu = simplex(rng, d);
    let beta = simplex(rng, d);
    let h: Vec<f64> = beta.iter().map(|b| rng.gen_range(0.0..0.5) * b).collect();
    let g = beta.iter().zip(&h).map(|(b, h)| b + h).collect();
    Point { mu, g, h }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// G = Σ μ_i², which is not balanced and ignores the books.
pub struct SquareSum;

impl GeneratorSpec for SquareSum {
    fn name(&self) -> String {
        "square_sum".into()
    }
    fn value(&self, s: &State) -> f64 {
        s.mu.iter().map(|m| m * m).sum()
    }
    fn grad_mu(&self, s: &State) -> Vec<f64> {
        s.mu.iter().map(|m| 2.0 * m).collect()
    }
    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        let d = s.dim();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            h[i * d + i] = 2.0;
        }
        Some(h)
    }
    fn is_balanced(&self) -> bool {
        false
    }
}

/// G = Σ ρ_i written in (μ, g, h) coordinates.
pub struct SumRho;

impl GeneratorSpec for SumRho {
    fn name(&self) -> String {
        "sum_rho".into()
    }
    fn value(&self, s: &State) -> f64 {
        (0..s.dim()).map(|i| s.rho(i)).sum()
    }
    fn grad_mu(&self, s: &State) -> Vec<f64> {
        (0..s.dim()).map(|i| 1.0 / s.beta(i)).collect()
    }
    fn hess_mu(&self, s: &State) -> Option<Vec<f64>> {
        Some(vec![0.0; s.dim() * s.dim()])
    }
    fn d_g(&self, s: &State) -> Vec<f64> {
        (0..s.dim()).map(|i| -s.mu[i] / (s.beta(i) * s.beta(i))).collect()
    }
    fn d_h(&self, s: &State) -> Vec<f64> {
        (0..s.dim()).map(|i| s.mu[i] / (s.beta(i) * s.beta(i))).collect()
    }
    fn is_balanced(&self) -> bool {
        true
    }
}
