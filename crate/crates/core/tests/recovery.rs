#![allow(clippy::needless_range_loop)]

mod common;

use common::{incoherent_instance, l1_oracle};
use giss_clime::baselines::{admm_solve_column, htp_solve_column, AdmmConfig, HtpConfig};
use giss_clime::clime::{estimate_precision, EstimatorConfig, LambdaRule, SolverKind};
use giss_clime::giss::{giss_solve_column, GissConfig};
use giss_clime::linalg::{restricted_least_squares, DenseMatrix, DenseVector, IndexSet};
use giss_clime::rng::{derive_seed, Stream};
use giss_clime::simulation::{gen_case1, gen_case2_redraw, sample_covariance, sample_gaussian};

#[test]
fn giss_interior_column_of_case1() {
    let truth = gen_case1(200).unwrap();
    let res = giss_solve_column(&truth.sigma, &DenseVector::unit(200, 5), &GissConfig::new(1e-9, 1.0).unwrap())
        .unwrap();
    // the active set may carry dual-saturated coordinates with round-off coefficients
    let nonzero: Vec<usize> = (0..200).filter(|&j| res.beta[j].abs() > 1e-12).collect();
    assert_eq!(nonzero, [4, 5, 6]);
    assert!(nonzero.iter().all(|&j| res.support.contains(j)));
    for (j, want) in [(4, -2.0 / 3.0), (5, 5.0 / 3.0), (6, -2.0 / 3.0)] {
        assert!((res.beta[j] - want).abs() < 1e-9);
    }
}

#[test]
fn htp_edge_column_of_case1() {
    let truth = gen_case1(200).unwrap();
    let res = htp_solve_column(&truth.sigma, &DenseVector::unit(200, 0), &HtpConfig::new(2)).unwrap();
    assert_eq!(res.support.as_slice(), &[0, 1]);
    assert!((res.beta[0] - 4.0 / 3.0).abs() < 1e-9);
    assert!((res.beta[1] + 2.0 / 3.0).abs() < 1e-9);
}

#[test]
fn solvers_agree_with_l1_oracle_on_small_instances() {
    for k in 0..10u64 {
        let inst = incoherent_instance(derive_seed(21, k), 8, 2);
        let oracle = l1_oracle(&inst.sigma, &inst.e, 3, 1e-10).unwrap();
        assert_eq!(oracle.support, inst.support);

        let g = giss_solve_column(&inst.sigma, &inst.e, &GissConfig::new(1e-10, 1.0).unwrap()).unwrap();
        assert_eq!(g.support.as_slice(), inst.support.as_slice());
        let dev = (0..8).map(|j| (g.beta[j] - inst.beta[j]).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-8);

        let h = htp_solve_column(&inst.sigma, &inst.e, &HtpConfig::new(2)).unwrap();
        assert_eq!(h.support.as_slice(), oracle.support.as_slice());

        let a = admm_solve_column(&inst.sigma, &inst.e, &AdmmConfig::equality(1e-10)).unwrap();
        let l1: f64 = a.beta.iter().map(|v| v.abs()).sum();
        assert!((l1 - oracle.l1).abs() < 1e-6, "k={k} {l1} vs {}", oracle.l1);
    }
}

#[test]
fn restricted_fit_recovers_planted_coefficients() {
    let mut rng = Stream::new(8);
    let a = DenseMatrix::from_fn(6, 6, |_, _| rng.normal());
    let mut x = vec![0.0; 6];
    x[1] = 1.7;
    x[4] = -0.4;
    let b = a.matvec(&x).unwrap();
    let fit = restricted_least_squares(&a, &b, &IndexSet::new(vec![1, 4], 6).unwrap()).unwrap();
    for j in 0..6 {
        assert!((fit.beta[j] - x[j]).abs() < 1e-10);
    }
}

#[test]
fn every_solver_handles_smallest_case1() {
    let truth = gen_case1(2).unwrap();
    for solver in [
        SolverKind::Giss { rho: 1.0 },
        SolverKind::Htp { s: 2 },
        SolverKind::AdmmEq,
        SolverKind::AdmmIneq,
    ] {
        let cfg = EstimatorConfig::new(LambdaRule::Fixed { value: 1e-9 }, solver);
        let est = estimate_precision(&truth.sigma, &cfg, 0).unwrap();
        assert_eq!(est.omega_hat.count_above(1e-4), 4, "{}", solver.label());
    }
}

#[test]
fn singular_sample_covariance_completes() {
    let (truth, _) = gen_case2_redraw(60, 7).unwrap();
    let s = sample_covariance(&sample_gaussian(&truth.sigma, 30, 1).unwrap()).unwrap();
    for solver in [SolverKind::Giss { rho: 1.0 }, SolverKind::AdmmEq] {
        let cfg = EstimatorConfig::new(LambdaRule::ScaledRoot { c: 0.001 }, solver).with_threshold(0.01);
        let est = estimate_precision(&s, &cfg, 30).unwrap();
        assert_eq!(est.column_results.len(), 60);
        assert!(est.omega_hat.as_slice().iter().all(|v| v.is_finite()));
    }
}
