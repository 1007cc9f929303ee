//! Oracle suite run by `fgp verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fgp::{
    additive_strategy, balance_residual, check_derivatives, jump_consistency,
    multiplicative_strategy, GeneratorSpec, StrategyKind,
};
use crate::market::{compute_weights, State, WeightPath};
use crate::rank::{estimate_local_times, rank_multiplicative_strategy, rank_path, ConstantRebalanced};
use crate::sim::{replicate, simulate, SimConfig};
use crate::zoo::{
    default_bounds, BookValueGenerator, LogarithmicGenerator, ModifiedBookValueGenerator,
    ModifiedMtbGenerator, MtbGenerator,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    pub gap_tol: f64,
    pub jump_tol: f64,
    pub balance_points: usize,
    pub refinement_dts: Vec<f64>,
    pub horizon: f64,
    pub d: usize,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            gap_tol: 1e-3,
            jump_tol: 1e-10,
            balance_points: 200,
            refinement_dts: vec![4e-4, 2e-4, 1e-4],
            horizon: 1.0,
            d: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub strategy: String,
    pub dts: Vec<f64>,
    pub gaps: Vec<f64>,
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub first_failure: Option<String>,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub refinement: Vec<RefinementRow>,
    pub local_time_clamp_total: f64,
}

impl VerifyReport {
    fn push(&mut self, name: String, value: f64, tolerance: f64) {
        let passed = value.is_finite() && value <= tolerance;
        self.checks.push(Check {
            name,
            value,
            tolerance,
            passed,
            error: None,
        });
    }

    fn fail(&mut self, name: String, err: &crate::error::Error) {
        self.checks.push(Check {
            name,
            value: f64::NAN,
            tolerance: 0.0,
            passed: false,
            error: Some(format!("{}: {err}", err.code())),
        });
    }

    fn finish(mut self) -> Self {
        let first = self.checks.iter().find(|c| !c.passed).map(|c| match &c.error {
            Some(e) => format!("{} ({e})", c.name),
            None => format!("{} = {:e} exceeds {:e}", c.name, c.value, c.tolerance),
        });
        let refine = self
            .refinement
            .iter()
            .find(|r| !r.non_increasing)
            .map(|r| format!("refinement gaps for {} increase: {:?}", r.strategy, r.gaps));
        self.first_failure = first.or(refine);
        self.passed = self.first_failure.is_none();
        self
    }
}

type Named = (String, Box<dyn GeneratorSpec>);

fn generators(path: &WeightPath) -> Result<Vec<Named>> {
    let (m, big_m, delta) = default_bounds(path);
    Ok(vec![
        ("book_value".into(), Box::new(BookValueGenerator::normalized_on(path))),
        ("modified_book_value".into(), Box::new(ModifiedBookValueGenerator::new(m, big_m)?)),
        ("modified_mtb(p=1)".into(), Box::new(ModifiedMtbGenerator::new(1.0, delta)?)),
        ("modified_mtb(p=0.5)".into(), Box::new(ModifiedMtbGenerator::new(0.5, delta)?)),
        ("logarithmic".into(), Box::new(LogarithmicGenerator::new(m, big_m, delta)?)),
        ("mtb_weighted(p=0.5)".into(), Box::new(MtbGenerator::normalized_on(0.5, path))),
    ])
}

/// Random interior point near a path state: weights and books perturbed
/// and renormalized, h drawn small relative to g.
fn random_point(rng: &mut ChaCha8Rng, d: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let draw = |rng: &mut ChaCha8Rng| {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
    };
    let mu = draw(rng);
    let beta = draw(rng);
    let h: Vec<f64> = (0..d).map(|i| rng.gen_range(0.0..0.5) * beta[i]).collect();
    let g = beta.iter().zip(&h).map(|(b, h)| b + h).collect();
    (mu, g, h)
}

fn gap_for(spec: &dyn GeneratorSpec, kind: StrategyKind, path: &WeightPath) -> Result<f64> {
    let sp = match kind {
        StrategyKind::Additive => additive_strategy(spec, path)?,
        StrategyKind::Multiplicative => multiplicative_strategy(spec, path)?,
    };
    Ok(replicate(&sp, path)?.max_abs_gap)
}

fn kind_label(kind: StrategyKind) -> &'static str {
    match kind {
        StrategyKind::Additive => "additive",
        StrategyKind::Multiplicative => "multiplicative",
    }
}

/// Runs the oracle suite on markets simulated from `seed`. Wealth checks
/// use the finest step of the sweep. `extra`
/// generators go through the same derivative, balance and wealth checks.
pub fn verify_suite(settings: &VerifySettings, seed: u64, extra: Vec<Named>) -> Result<VerifyReport> {
    let mut rep = VerifyReport {
        passed: false,
        first_failure: None,
        seed,
        checks: Vec::new(),
        refinement: Vec::new(),
        local_time_clamp_total: 0.0,
    };
    let base_dt = settings.refinement_dts.iter().copied().fold(f64::INFINITY, f64::min);
    if !base_dt.is_finite() || base_dt <= 0.0 {
        return Err(crate::error::Error::BadParameter("refinement_dts must be positive and nonempty".into()));
    }
    let cfg = SimConfig::standard(settings.d, base_dt, settings.horizon, seed);
    let series = simulate(&cfg)?;
    let path = compute_weights(&series)?;
    let mut specs = generators(&path)?;
    specs.extend(extra);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, spec) in &specs {
        let mut worst_bal = 0.0f64;
        let mut deriv_err = None;
        let mut worst_deriv = 0.0f64;
        for _ in 0..settings.balance_points {
            let (mu, g, h) = random_point(&mut rng, settings.d);
            let s = State::new(&mu, &g, &h);
            match check_derivatives(spec, &s) {
                Ok(rel) => worst_deriv = worst_deriv.max(rel),
                Err(e) => {
                    deriv_err = Some(e);
                    break;
                }
            }
            if spec.is_balanced() {
                worst_bal = worst_bal.max(balance_residual(spec, &s) / spec.value(&s).abs());
            }
        }
        match deriv_err {
            Some(e) => {
                rep.fail(format!("derivatives[{name}]"), &e);
                continue;
            }
            None => rep.push(format!("derivatives[{name}]"), worst_deriv, crate::fgp::DERIVATIVE_TOL),
        }
        if spec.is_balanced() {
            rep.push(format!("balance[{name}]"), worst_bal, crate::fgp::BALANCE_TOL);
        }
        for kind in [StrategyKind::Additive, StrategyKind::Multiplicative] {
            let label = format!("oracle_gap[{name}, {}]", kind_label(kind));
            match gap_for(spec, kind, &path) {
                Ok(gap) => rep.push(label, gap, settings.gap_tol),
                Err(e) => rep.fail(label, &e),
            }
        }
    }

    // Γ^c is nondecreasing for the three generators built to make it so
    for (name, spec) in specs.iter().filter(|(n, _)| {
        n.starts_with("modified_book_value") || n.starts_with("modified_mtb") || n.starts_with("logarithmic")
    }) {
        let label = format!("gamma_monotone[{name}]");
        match crate::fgp::accumulate_gamma(spec, &path) {
            Ok(led) => {
                let drop = led
                    .gamma_continuous
                    .windows(2)
                    .map(|w| w[0] - w[1])
                    .fold(0.0, f64::max);
                rep.push(label, drop, 1e-12);
            }
            Err(e) => rep.fail(label, &e),
        }
    }

    // rank-based: top-one portfolio through local times
    let frame = rank_path(&path.rho);
    let lt = estimate_local_times(&frame);
    rep.local_time_clamp_total = lt.clamp_total();
    let mut c = vec![0.0; settings.d];
    c[0] = 1.0;
    let cr = ConstantRebalanced::new(c)?;
    match rank_multiplicative_strategy(&cr, &path, &frame, &lt).and_then(|sp| {
        let g0 = sp.ledger.g_value[0];
        replicate(&sp, &path).map(|o| o.max_abs_gap / g0)
    }) {
        Ok(gap) => rep.push("oracle_gap[top_one, relative]".into(), gap, 10.0 * settings.gap_tol),
        Err(e) => rep.fail("oracle_gap[top_one, relative]".into(), &e),
    }

    // book jumps
    let jcfg = SimConfig::standard(settings.d, base_dt, settings.horizon.max(2.0), seed).with_jumps(0.5);
    let jpath = compute_weights(&simulate(&jcfg)?)?;
    let bv = BookValueGenerator::normalized_on(&jpath);
    let worst = jump_consistency(&bv, &jpath)
        .iter()
        .map(|j| (j.holdings_side - j.generator_side).abs())
        .fold(0.0, f64::max);
    rep.push("jump_identity[book_value]".into(), worst, settings.jump_tol);
    for kind in [StrategyKind::Additive, StrategyKind::Multiplicative] {
        let label = format!("oracle_gap[book_value with jumps, {}]", kind_label(kind));
        match gap_for(&bv, kind, &jpath) {
            Ok(gap) => rep.push(label, gap, settings.gap_tol),
            Err(e) => rep.fail(label, &e),
        }
    }

    // refinement sweep on a common Brownian path
    let mut sweeps: Vec<(String, Vec<f64>)> = Vec::new();
    for &dt in &settings.refinement_dts {
        let cfg = SimConfig::standard(settings.d, dt, settings.horizon, seed);
        let p = compute_weights(&simulate(&cfg)?)?;
        for (k, (name, spec)) in generators(&p)?.into_iter().enumerate() {
            for (j, kind) in [StrategyKind::Additive, StrategyKind::Multiplicative].into_iter().enumerate() {
                let idx = 2 * k + j;
                if sweeps.len() <= idx {
                    sweeps.push((format!("{name}, {}", kind_label(kind)), Vec::new()));
                }
                let gap = gap_for(&spec, kind, &p).unwrap_or(f64::INFINITY);
                sweeps[idx].1.push(gap);
            }
        }
    }
    for (strategy, gaps) in sweeps {
        let non_increasing = gaps.windows(2).all(|w| w[1] <= w[0]);
        rep.refinement.push(RefinementRow {
            strategy,
            dts: settings.refinement_dts.clone(),
            gaps,
            non_increasing,
        });
    }
    Ok(rep.finish())
}
