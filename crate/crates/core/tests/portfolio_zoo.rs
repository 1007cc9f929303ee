mod common;

use common::*;
use fgp_core::backtest::{run_backtest, run_backtest_with};
use fgp_core::fgp::{
    accumulate_gamma, check_balance, check_derivatives, multiplicative_strategy, weights_from_strategy,
    GeneratorSpec,
};
use fgp_core::sim::{simulate, SimConfig};
use fgp_core::zoo::{
    book_value_log_decomposition, default_bounds, diversity_weights, ew_top, lookup, mtb_weights,
    parse_portfolio, BookValueGenerator, LogarithmicGenerator, ModifiedBookValueGenerator,
    ModifiedMtbGenerator, Params, PortfolioConfig, ZooEntry, PORTFOLIO_NAMES,
};
use fgp_core::{compute_weights, Error, Matrix, State, WeightPath};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frozen(mu: &[f64], beta: &[f64], n: usize, flags: Vec<bool>) -> WeightPath {
    let rows = |v: &[f64]| Matrix::from_rows(&vec![v.to_vec(); n]);
    WeightPath::from_mu_beta((0..n).map(|l| l as f64).collect(), rows(mu), rows(beta), flags)
}

#[test]
fn book_value_at_unit_ratios() {
    let path = frozen(&[0.3, 0.7], &[0.3, 0.7], 3, vec![false; 3]);
    let spec = BookValueGenerator::normalized_on(&path);
    for l in 0..3 {
        assert!((spec.value(&path.state(l)) - 1.0).abs() < 1e-15);
    }
    let sp = multiplicative_strategy(&spec, &path).unwrap();
    let w = weights_from_strategy(&sp, &path).unwrap();
    assert!(max_abs_diff(w.row(2), &[0.3, 0.7]) < 1e-15);
}

#[test]
fn book_value_two_stock_value() {
    let (mu, g, h) = ([0.6, 0.4], [0.5, 0.5], [0.0, 0.0]);
    let s = State::new(&mu, &g, &h);
    let v = BookValueGenerator::unnormalized().value(&s);
    assert!((v - 0.96f64.sqrt()).abs() < 1e-15);
    assert!(check_balance(&BookValueGenerator::unnormalized(), &s));
}

#[test]
fn book_value_decomposition_special_cases() {
    // constant books: no β term
    let mut s = sim_series(3, 1e-3, 1.0, 17);
    let b0 = s.books.row(0).to_vec();
    for l in 0..s.n_steps() {
        s.books.row_mut(l).copy_from_slice(&b0);
    }
    let dec = book_value_log_decomposition(&compute_weights(&s).unwrap()).unwrap();
    assert!(dec.beta_term.iter().all(|&x| x == 0.0));
    assert!(dec.quad.windows(2).all(|w| w[1] >= w[0] - 1e-15));

    // μ ≡ β frozen
    let fz = frozen(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3], 5, vec![false; 5]);
    let dec = book_value_log_decomposition(&fz).unwrap();
    for l in 0..5 {
        assert_eq!((dec.log_g[l], dec.quad[l], dec.beta_term[l]), (0.0, 0.0, 0.0));
    }
}

#[test]
fn mtb_weight_examples() {
    let w = mtb_weights(&[4.0, 1.0], 0.5);
    assert!((w[0] - 2.0 / 3.0).abs() < 1e-15 && (w[1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(mtb_weights(&[4.0, 1.0, 0.2], 0.0), vec![1.0 / 3.0; 3]);
    // ρ ≡ 1 and p = 1 gives the market
    let path = frozen(&[0.2, 0.5, 0.3], &[0.2, 0.5, 0.3], 3, vec![false; 3]);
    let e = parse_portfolio("mtb_weighted:1").unwrap();
    let w = mtb_weights(path.rho.row(0), 1.0);
    assert!(max_abs_diff(&w, &[1.0 / 3.0; 3]) < 1e-15);
    assert_eq!(e.label(), "mtb_weighted(p=1)");
}

#[test]
fn diversity_weight_examples() {
    let mu = [0.1, 0.25, 0.65];
    assert!(max_abs_diff(&diversity_weights(&mu, 1.0), &mu) < 1e-15);
    let w = diversity_weights(&[0.64, 0.36], 0.5);
    assert!(max_abs_diff(&w, &[0.8 / 1.4, 0.6 / 1.4]) < 1e-15);
    assert_eq!(diversity_weights(&mu, 0.0), vec![1.0 / 3.0; 3]);
}

#[test]
fn modified_book_value_starts_at_book_weights() {
    let path = sim_path(4, 1e-3, 0.5, 5);
    let mut rule = parse_portfolio("modified_book_value").unwrap().weight_rule(&path).unwrap();
    let res = run_backtest(&sim_series(4, 1e-3, 0.5, 5), rule.as_mut()).unwrap();
    assert!(max_abs_diff(res.weights_used.row(1), path.beta.row(0)) < 1e-12);
}

#[test]
fn modified_book_value_interpolates() {
    let series = sim_series(4, 1e-3, 1.0, 6);
    let path = compute_weights(&series).unwrap();
    let (m, big_m, _) = default_bounds(&path);
    let spec = ModifiedBookValueGenerator::new(m, big_m).unwrap();
    let led = accumulate_gamma(&spec, &path).unwrap();
    let mut rule = parse_portfolio("modified_book_value").unwrap().weight_rule(&path).unwrap();
    let res = run_backtest(&series, rule.as_mut()).unwrap();
    for l in 1..path.n_steps() {
        let (g, gam) = (led.g_value[l - 1], led.gamma_continuous[l - 1]);
        let want: Vec<f64> = (0..4)
            .map(|i| (gam * path.mu.get(l - 1, i) + g * path.beta.get(l - 1, i)) / (g + gam))
            .collect();
        assert!(max_abs_diff(res.weights_used.row(l), &want) < 1e-10, "step {l}");
    }
    // large Γ pushes the weights to μ
    let s = path.state(10);
    let grad = spec.grad_mu(&s);
    let big = 1e12;
    let c: f64 = grad.iter().zip(s.mu).map(|(a, b)| a * b).sum::<f64>() - spec.value(&s);
    let w: Vec<f64> = (0..4)
        .map(|i| (grad[i] - c + big) * s.mu[i] / (spec.value(&s) + big))
        .collect();
    assert!(max_abs_diff(&w, s.mu) < 1e-9);
}

#[test]
fn modified_book_value_gamma_rises_across_jumps() {
    let path = jump_path(4, 1e-3, 3.0, 8);
    assert!(path.has_jumps());
    let (m, big_m, _) = default_bounds(&path);
    let led = accumulate_gamma(&ModifiedBookValueGenerator::new(m, big_m).unwrap(), &path).unwrap();
    assert!(led.gamma_continuous.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn modified_mtb_collapses_and_p_one_has_no_quadratic_term() {
    let mu = [0.2, 0.3, 0.5];
    let beta = [0.4, 0.4, 0.2];
    let s = State::new(&mu, &beta, &[0.0; 3]);
    let (_, pi) = ModifiedMtbGenerator::new(1.0, 0.1).unwrap().parts(&s);
    assert!(max_abs_diff(&pi, &mu) < 1e-15);

    let path = sim_path(4, 1e-3, 1.0, 3);
    let (_, _, delta) = default_bounds(&path);
    let led = accumulate_gamma(&ModifiedMtbGenerator::new(1.0, delta).unwrap(), &path).unwrap();
    assert!(led.qv_term.iter().all(|&x| x.abs() < 1e-14), "{:?}", led.qv_term.last());
    assert!(led.gamma_continuous.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let led = accumulate_gamma(&ModifiedMtbGenerator::new(0.5, delta).unwrap(), &path).unwrap();
    assert!(led.gamma_continuous.windows(2).all(|w| w[1] >= w[0] - 1e-12));
}

#[test]
fn modified_mtb_rejects_small_books() {
    let path = sim_path(4, 1e-3, 0.5, 3);
    let spec = ModifiedMtbGenerator::new(0.5, 0.9).unwrap();
    assert!(matches!(spec.validate_path(&path), Err(Error::DeltaViolated { .. })));
}

#[test]
fn logarithmic_constants() {
    let spec = LogarithmicGenerator::new(1.0, 3.0, 0.1).unwrap();
    assert!((spec.kappa() - 2.0 * 2f64.ln()).abs() < 1e-15);
    let (mu, g, h) = ([0.5, 0.5], [0.5, 0.5], [0.0, 0.0]);
    assert!((spec.value(&State::new(&mu, &g, &h)) - 2.0 * 2f64.ln()).abs() < 1e-15);
    assert!(!spec.is_balanced() && spec.requires_continuous_aux());
}

#[test]
fn logarithmic_gamma_terms_are_each_nondecreasing() {
    let path = sim_path(5, 1e-3, 2.0, 12);
    let (m, big_m, delta) = default_bounds(&path);
    let led = accumulate_gamma(&LogarithmicGenerator::new(m, big_m, delta).unwrap(), &path).unwrap();
    for term in [&led.qv_term, &led.gamma_integral_term, &led.xi_integral_term] {
        assert!(term.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }
    assert!(led.xi_integral_term.last().unwrap() > &0.0);
}

#[test]
fn ew_top_of_everything_is_equal_weight() {
    let series = sim_series(5, 1e-2, 0.2, 2);
    let path = compute_weights(&series).unwrap();
    let mut rule = ew_top(5).weight_rule(&path).unwrap();
    let res = run_backtest(&series, rule.as_mut()).unwrap();
    assert!(res.weights_used.as_slice().iter().all(|&w| w == 0.2));
}

fn all_entries() -> Vec<ZooEntry> {
    [
        "market",
        "equal_weight",
        "book_value",
        "mtb_weighted:0.5",
        "mtb_weighted:-0.5",
        "diversity_weighted:0.5",
        "modified_book_value",
        "modified_mtb:1",
        "modified_mtb:0.5",
        "logarithmic",
        "ew_top:2",
        "ew_bottom:2",
        "top_one",
        "bottom_one",
        "rank_cr:0.4,0.3,0.2,0.1,0",
        "ew_top_size:3",
        "ew_bottom_size:3",
    ]
    .iter()
    .map(|s| parse_portfolio(s).unwrap())
    .collect()
}

#[test]
fn every_entry_emits_long_only_unit_rows() {
    let series = sim_series(5, 1e-2, 1.0, 31);
    let path = compute_weights(&series).unwrap();
    let entries = all_entries();
    let names: std::collections::BTreeSet<&str> = entries.iter().map(|e| e.name.as_str()).collect();
    assert_eq!(names.len(), PORTFOLIO_NAMES.len());
    for e in entries {
        let mut rule = e.weight_rule(&path).unwrap();
        let res = run_backtest(&series, rule.as_mut()).unwrap();
        for l in 0..path.n_steps() {
            let row = res.weights_used.row(l);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{}", e.label());
            assert!(row.iter().all(|&w| w >= 0.0), "{}", e.label());
        }
    }
}

#[test]
fn rules_never_look_ahead() {
    let series = sim_series(5, 1e-2, 1.0, 32);
    let path = compute_weights(&series).unwrap();
    for e in all_entries() {
        let a = run_backtest_with(&series, &path, e.weight_rule(&path).unwrap().as_mut(), true).unwrap();
        let b = run_backtest_with(&series, &path, e.weight_rule(&path).unwrap().as_mut(), false).unwrap();
        assert_eq!(a, b, "{}", e.label());
    }
}

#[test]
fn book_inequalities_hold_along_paths() {
    let path = sim_path(5, 1e-2, 5.0, 40);
    let (m, big_m, delta) = default_bounds(&path);
    let specs: Vec<Box<dyn GeneratorSpec>> = vec![
        Box::new(ModifiedBookValueGenerator::new(m, big_m).unwrap()),
        Box::new(ModifiedMtbGenerator::new(0.5, delta).unwrap()),
        Box::new(ModifiedMtbGenerator::new(1.0, delta).unwrap()),
        Box::new(LogarithmicGenerator::new(m, big_m, delta).unwrap()),
    ];
    for sp in &specs {
        for l in 0..path.n_steps() {
            let s = path.state(l);
            assert!(sp.d_g(&s).iter().all(|&x| x <= 0.0), "{} d_g at {l}", sp.name());
            assert!(sp.d_h(&s).iter().all(|&x| x <= 0.0), "{} d_h at {l}", sp.name());
        }
    }
}

#[test]
fn balanced_entries_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let specs: Vec<Box<dyn GeneratorSpec>> = vec![
        Box::new(BookValueGenerator::unnormalized()),
        Box::new(ModifiedBookValueGenerator::new(0.05, 20.0).unwrap()),
        Box::new(ModifiedMtbGenerator::new(0.5, 0.01).unwrap()),
    ];
    for _ in 0..200 {
        let p = random_point(&mut rng, 4);
        for sp in &specs {
            assert!(check_balance(sp, &p.state()), "{}", sp.name());
            check_derivatives(sp, &p.state()).unwrap();
        }
    }
}

#[test]
fn lookup_and_config_errors() {
    assert!(matches!(lookup("nope", &Params::default()), Err(Error::UnknownPortfolio(_))));
    assert!(matches!(parse_portfolio("mtb_weighted"), Err(Error::BadParameter(_))));
    assert!(matches!(parse_portfolio("mtb_weighted:x"), Err(Error::BadParameter(_))));
    assert!(matches!(parse_portfolio("rank_cr:0.6,0.6"), Err(Error::BadComposition(_))));
    assert!(matches!(parse_portfolio("modified_book_value:2,1"), Err(Error::BadParameter(_))));
    assert!(matches!(parse_portfolio("modified_mtb:0"), Err(Error::BadParameter(_))));

    let cfg: PortfolioConfig = toml::from_str("name = \"rank_cr\"\nparams = { c = [0.5, 0.5] }").unwrap();
    assert_eq!(cfg.resolve().unwrap().label(), "rank_cr(c1=0.5,c2=0.5)");
    let cfg: PortfolioConfig = serde_json::from_str(r#"{"name": "mtb_weighted", "params": {"p": -0.5}}"#).unwrap();
    assert_eq!(cfg.resolve().unwrap().label(), "mtb_weighted(p=-0.5)");
    assert!(serde_json::from_str::<PortfolioConfig>(r#"{"name": "market", "extra": 1}"#).is_err());
}

#[test]
fn rank_group_size_must_fit() {
    let path = sim_path(3, 1e-2, 0.1, 1);
    assert!(matches!(ew_top(4).weight_rule(&path), Err(Error::BadParameter(_))));
    assert!(matches!(
        parse_portfolio("rank_cr:0.5,0.5").unwrap().weight_rule(&path),
        Err(Error::LengthMismatch(_))
    ));
}

#[test]
fn generated_entries_respect_jumps() {
    let cfg = SimConfig::standard(3, 1e-2, 2.0, 4).with_jumps(1.0);
    let path = compute_weights(&simulate(&cfg).unwrap()).unwrap();
    assert!(matches!(
        parse_portfolio("logarithmic").unwrap().weight_rule(&path),
        Err(Error::JumpsNotSupported)
    ));
    assert!(parse_portfolio("modified_book_value").unwrap().weight_rule(&path).is_ok());
}

proptest! {
    #[test]
    fn mtb_weights_follow_rho_order(
        rho in prop::collection::vec(0.05f64..20.0, 2..8),
        p in prop_oneof![-3.0f64..-0.05, 0.05f64..3.0],
    ) {
        let w = mtb_weights(&rho, p);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..rho.len() {
            for j in 0..rho.len() {
                if rho[i] > rho[j] {
                    if p > 0.0 {
                        prop_assert!(w[i] >= w[j]);
                    } else {
                        prop_assert!(w[i] <= w[j]);
                    }
                }
            }
        }
    }
}
