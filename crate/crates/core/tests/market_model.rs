use fgp_core::market::{min_beta, rho_bounds};
use fgp_core::{compute_weights, Error, Matrix, MarketSeries, WeightPath};
use proptest::prelude::*;

fn series(caps: Vec<Vec<f64>>, books: Vec<Vec<f64>>) -> fgp_core::Result<MarketSeries> {
    let n = caps.len();
    MarketSeries::new(
        (0..n).map(|l| l as f64).collect(),
        Matrix::from_rows(&caps),
        Matrix::from_rows(&books),
        vec![false; n],
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-15
}

#[test]
fn two_stock_ratios() {
    let s = series(vec![vec![1.0, 1.0]; 2], vec![vec![1.0, 3.0]; 2]).unwrap();
    let p = compute_weights(&s).unwrap();
    assert_eq!(p.mu.row(0), &[0.5, 0.5]);
    assert_eq!(p.beta.row(0), &[0.25, 0.75]);
    assert!(close(p.rho.get(0, 0), 2.0) && close(p.rho.get(0, 1), 2.0 / 3.0));
}

#[test]
fn constant_books_have_no_decrease_part() {
    let caps = vec![vec![1.0, 2.0], vec![1.5, 2.5], vec![0.7, 3.0]];
    let p = compute_weights(&series(caps, vec![vec![2.0, 5.0]; 3]).unwrap()).unwrap();
    for l in 0..3 {
        assert_eq!(p.h.row(l), &[0.0, 0.0]);
        assert_eq!(p.g.row(l), p.beta.row(0));
    }
}

#[test]
fn canonical_decomposition_of_a_beta_path() {
    let beta = Matrix::from_rows(&[vec![0.4, 0.6], vec![0.5, 0.5], vec![0.3, 0.7]]);
    let p = WeightPath::from_mu_beta(vec![0.0, 1.0, 2.0], beta.clone(), beta, vec![false; 3]);
    let g: Vec<f64> = (0..3).map(|l| p.g.get(l, 0)).collect();
    let h: Vec<f64> = (0..3).map(|l| p.h.get(l, 0)).collect();
    assert_eq!(g, vec![0.4, 0.5, 0.5]);
    assert!(close(h[0], 0.0) && close(h[1], 0.0) && close(h[2], 0.2));
}

#[test]
fn bounds_examples() {
    let one = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
    let p = WeightPath::from_mu_beta(vec![0.0, 1.0], one.clone(), one, vec![false; 2]);
    assert_eq!(rho_bounds(&p, 2.0), (0.5, 2.0));

    let s = series(vec![vec![1.0, 1.0]; 2], vec![vec![1.0, 3.0]; 2]).unwrap();
    let (lo, hi) = rho_bounds(&compute_weights(&s).unwrap(), 1.0);
    assert!(close(lo, 2.0 / 3.0) && close(hi, 2.0));

    let mu = Matrix::from_rows(&[vec![0.1, 0.9], vec![0.5, 0.5]]);
    let beta = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.1, 0.9]]);
    let p = WeightPath::from_mu_beta(vec![0.0, 1.0], mu, beta, vec![false; 2]);
    let (lo, hi) = rho_bounds(&p, 1.0);
    assert!(close(lo, 0.2) && close(hi, 5.0));
    assert_eq!(min_beta(&p), 0.1);
}

#[test]
fn rejects_bad_panels() {
    let bad = series(vec![vec![1.0, 0.0]; 2], vec![vec![1.0, 1.0]; 2]);
    assert!(matches!(bad, Err(Error::NonPositiveInput { what: "cap", stock: 1, .. })));
    let bad = series(vec![vec![1.0, 1.0]; 2], vec![vec![1.0, -2.0]; 2]);
    assert!(matches!(bad, Err(Error::NonPositiveInput { what: "book", .. })));
    let bad = series(vec![vec![1.0, 1.0]], vec![vec![1.0, 1.0]]);
    assert_eq!(bad, Err(Error::GridTooShort(1)));
    let bad = series(vec![vec![1.0]; 2], vec![vec![1.0]; 2]);
    assert!(matches!(bad, Err(Error::InvalidPanel(_))));
    let bad = MarketSeries::new(
        vec![0.0, 0.0],
        Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
        Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
        vec![false; 2],
    );
    assert!(matches!(bad, Err(Error::InvalidPanel(_))));
}

#[test]
fn left_state_carries_previous_books() {
    let caps = vec![vec![1.0, 1.0]; 3];
    let books = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 3.0]];
    let mut s = series(caps, books).unwrap();
    s.book_update_flags = vec![true, false, true];
    let p = compute_weights(&s).unwrap();
    assert!(!p.is_jump(0) && p.is_jump(2));
    assert_eq!(p.left_state(2).g, p.g.row(1));
    assert_eq!(p.state(2).g, p.g.row(2));
}

fn panel() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (2usize..6, 2usize..12).prop_flat_map(|(d, n)| {
        (
            prop::collection::vec(prop::collection::vec(0.01f64..100.0, d), n),
            prop::collection::vec(prop::collection::vec(0.01f64..100.0, d), n),
        )
    })
}

proptest! {
    #[test]
    fn weight_path_invariants((caps, books) in panel()) {
        let p = compute_weights(&series(caps, books).unwrap()).unwrap();
        for l in 0..p.n_steps() {
            prop_assert!((p.mu.row(l).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((p.beta.row(l).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for i in 0..p.n_stocks() {
                prop_assert!(p.mu.get(l, i) > 0.0 && p.beta.get(l, i) > 0.0);
                prop_assert!((p.g.get(l, i) - p.h.get(l, i) - p.beta.get(l, i)).abs() < 1e-12);
                prop_assert!((p.rho.get(l, i) - p.mu.get(l, i) / p.beta.get(l, i)).abs() == 0.0);
                if l > 0 {
                    prop_assert!(p.g.get(l, i) >= p.g.get(l - 1, i));
                    prop_assert!(p.h.get(l, i) >= p.h.get(l - 1, i));
                }
            }
        }
    }
}
