use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use netshock::leontief::{
    backout_demand, solve_revenue, solve_revenue_direct, truncate_network, CsrMatrix, EconomyConfig, IOMatrix,
};
use proptest::prelude::*;

/// Random economy with column sums in (0, 1] and some empty columns.
fn economy() -> impl Strategy<Value = (IOMatrix, Vec<f64>)> {
    (2usize..25).prop_flat_map(|n| {
        (
            proptest::collection::vec(proptest::option::weighted(0.3, 0.01f64..1.0), n * n),
            proptest::collection::vec(0.2f64..1.0, n),
            proptest::collection::vec(0.0f64..50.0, n),
        )
            .prop_map(move |(cells, caps, xi)| {
                let mut col = vec![0.0; n];
                for (k, c) in cells.iter().enumerate() {
                    if let Some(v) = c {
                        if k / n != k % n {
                            col[k % n] += v;
                        }
                    }
                }
                let triplets = cells.iter().enumerate().filter_map(|(k, c)| {
                    let (i, j) = (k / n, k % n);
                    c.filter(|_| i != j).map(|v| (i, j, caps[j] * v / col[j]))
                });
                let firms = Arc::new((0..n).map(|i| format!("F{i}")).collect());
                (IOMatrix::new(2013, firms, CsrMatrix::from_triplets(n, n, triplets)), xi)
            })
    })
}

fn dense_oracle(io: &IOMatrix, xi: &[f64], alpha: f64) -> Vec<f64> {
    let n = io.n();
    let mut m = DMatrix::<f64>::identity(n, n);
    for (i, j, v) in io.omega().triplets() {
        m[(i, j)] -= (1.0 - alpha) * v;
    }
    m.lu().solve(&DVector::from_column_slice(xi)).unwrap().as_slice().to_vec()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

proptest! {
    #[test]
    fn iterative_matches_dense((io, xi) in economy(), alpha in 0.05f64..1.0) {
        let cfg = EconomyConfig { alpha, tol: 1e-13, max_iter: 100_000 };
        let r = solve_revenue(&io, &xi, &cfg).unwrap().revenues;
        prop_assert!(rel_err(&r, &dense_oracle(&io, &xi, alpha)) < 1e-10);
        prop_assert!(rel_err(&solve_revenue_direct(&io, &xi, alpha).unwrap(), &r) < 1e-10);
    }

    #[test]
    fn backout_then_solve_round_trips((io, r) in economy(), alpha in 0.05f64..1.0) {
        let cfg = EconomyConfig { alpha, tol: 1e-14, max_iter: 100_000 };
        let xi = backout_demand(&io, &r, &cfg).unwrap();
        let back = solve_revenue(&io, &xi.values, &cfg).unwrap().revenues;
        prop_assert!(rel_err(&back, &r) < 1e-10);
    }

    #[test]
    fn revenues_are_linear_and_monotone((io, xi) in economy(), k in 0.1f64..10.0) {
        let cfg = EconomyConfig { tol: 1e-14, ..Default::default() };
        let r = solve_revenue(&io, &xi, &cfg).unwrap().revenues;
        let scaled: Vec<f64> = xi.iter().map(|x| k * x).collect();
        let rk = solve_revenue(&io, &scaled, &cfg).unwrap().revenues;
        let expect: Vec<f64> = r.iter().map(|v| k * v).collect();
        prop_assert!(rel_err(&rk, &expect) < 1e-10);
        // r >= xi when demand is non-negative.
        for (ri, x) in r.iter().zip(&xi) {
            prop_assert!(*ri >= x - 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn truncation_never_raises_revenue((io, xi) in economy(), mask in proptest::collection::vec(any::<bool>(), 25)) {
        let conflict = &mask[..io.n()];
        let cfg = EconomyConfig { tol: 1e-14, ..Default::default() };
        let base = solve_revenue(&io, &xi, &cfg).unwrap().revenues;
        let cut = truncate_network(&io, conflict, false);
        let after = solve_revenue(&cut, &xi, &cfg).unwrap().revenues;
        for i in 0..io.n() {
            prop_assert!(after[i] <= base[i] * (1.0 + 1e-10) + 1e-12);
        }
        for (i, j, _) in cut.omega().triplets() {
            prop_assert!(!conflict[i] && !conflict[j]);
        }
    }
}

#[test]
fn zero_demand_gives_zero_revenue() {
    let io = IOMatrix::from_dense(2013, &[vec![0.0, 0.5, 1.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.0]]);
    let r = solve_revenue(&io, &[0.0; 3], &EconomyConfig::default()).unwrap();
    assert_eq!(r.revenues, vec![0.0; 3]);
}

#[test]
fn contraction_rate_is_one_minus_alpha() {
    let io = IOMatrix::from_dense(2013, &[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let cfg = EconomyConfig { alpha: 0.25, tol: 1e-12, max_iter: 1000 };
    let sol = solve_revenue(&io, &[1.0, 3.0], &cfg).unwrap();
    for w in sol.step_norms.windows(2).take(20) {
        assert!((w[1] / w[0] - 0.75).abs() < 1e-9);
    }
}
