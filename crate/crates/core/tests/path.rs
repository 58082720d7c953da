mod common;

use lossrank_core::lasso_path::{
    candidate_subsets, compute_lars_path, default_max_steps, kkt_violations, lasso_objective, Termination,
};
use lossrank_core::oracle::{lasso_fixed_lambda_cd, OracleConfig};
use lossrank_core::{Error, StandardizedDataset};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn full_path(data: &StandardizedDataset) -> lossrank_core::LassoPath {
    compute_lars_path(data, default_max_steps(data.n(), data.d())).unwrap()
}

#[test]
fn lambda_max_is_twice_the_largest_correlation() {
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let data = common::instance(&mut rng, 30, 6);
        let path = full_path(&data);
        let c = data.x.tr_mul(&data.y).amax();
        assert!((path.lambda_max - 2.0 * c).abs() <= 1e-12 * path.lambda_max);
        assert!(path.coefficients_at(path.lambda_max).iter().all(|&b| b == 0.0));
    }
}

#[test]
fn segments_tile_the_path_and_change_one_index_at_a_time() {
    let mut rng = common::rng(22);
    for _ in 0..30 {
        let n = rng.random_range(10..40);
        let d = rng.random_range(2..12);
        let data = common::instance(&mut rng, n, d);
        let path = full_path(&data);
        assert_eq!(path.segments[0].lambda_hi, path.lambda_max);
        for w in path.segments.windows(2) {
            assert_eq!(w[0].lambda_lo, w[1].lambda_hi);
            assert!(w[0].lambda_lo < w[0].lambda_hi);
            let (a, b) = (&w[0].active, &w[1].active);
            let sym: usize = a.iter().filter(|j| !b.contains(j)).count() + b.iter().filter(|j| !a.contains(j)).count();
            assert_eq!(sym, 1, "{a:?} -> {b:?}");
        }
        for seg in &path.segments {
            for j in 0..d {
                if !seg.active.contains(&j) {
                    assert_eq!(seg.beta_hi[j], 0.0);
                    assert_eq!(seg.beta_lo[j], 0.0);
                }
            }
        }
    }
}

#[test]
fn interpolated_solutions_satisfy_kkt() {
    let mut rng = common::rng(23);
    for _ in 0..30 {
        let data = common::instance(&mut rng, 25, 8);
        let path = full_path(&data);
        for seg in &path.segments {
            for t in [0.25, 0.5, 0.9] {
                let lambda = seg.lambda_lo + t * (seg.lambda_hi - seg.lambda_lo);
                if lambda <= 0.0 {
                    continue;
                }
                let (inact, act) = kkt_violations(&data, &path.coefficients_at(lambda), lambda);
                assert!(inact <= lambda * 1e-8 + 1e-10);
                assert!(act <= 1e-8 * path.lambda_max);
            }
        }
    }
}

#[test]
fn path_agrees_with_coordinate_descent() {
    let cfg = OracleConfig::default();
    let mut rng = common::rng(24);
    for _ in 0..50 {
        let n = rng.random_range(10..=30);
        let d = rng.random_range(1..=8);
        let data = common::instance(&mut rng, n, d);
        let path = full_path(&data);
        for _ in 0..5 {
            let lambda = path.lambda_max * rng.random_range(0.001..1.2);
            let cd = lasso_fixed_lambda_cd(&data, lambda, &cfg).unwrap();
            let (inact, act) = kkt_violations(&data, &cd, lambda);
            assert!(inact <= 10.0 * cfg.cd_tol * (1.0 + data.x.norm()) * 10.0 + lambda * 1e-8);
            assert!(act.is_finite());
            let a = lasso_objective(&data, &path.coefficients_at(lambda), lambda);
            let b = lasso_objective(&data, &cd, lambda);
            assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
        }
    }
}

#[test]
fn response_scaling_keeps_the_active_set_sequence() {
    let mut rng = common::rng(25);
    for _ in 0..20 {
        let data = common::instance(&mut rng, 30, 8);
        let c = rng.random_range(0.01..100.0);
        let mut scaled = data.clone();
        scaled.y *= c;
        let a: Vec<Vec<usize>> = full_path(&data).segments.into_iter().map(|s| s.active).collect();
        let b: Vec<Vec<usize>> = full_path(&scaled).segments.into_iter().map(|s| s.active).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn wide_design_candidates_fit_in_n_minus_one() {
    let mut rng = common::rng(26);
    let data = common::instance(&mut rng, 10, 300);
    let path = full_path(&data);
    assert_eq!(path.termination, Termination::Saturated);
    let cands = candidate_subsets(&path, &data).unwrap();
    assert!(cands.candidates.iter().all(|c| c.df <= 9));
    assert!(cands.candidates.iter().any(|c| c.df == 9));
}

#[test]
fn zero_response_has_an_empty_path() {
    let x = DMatrix::from_column_slice(3, 2, &[1.0, -1.0, 0.0, 0.5, 0.5, -1.0]);
    let data = StandardizedDataset::from_prepared(x, DVector::zeros(3)).unwrap();
    let path = compute_lars_path(&data, 10).unwrap();
    assert_eq!(path.lambda_max, 0.0);
    assert!(path.segments.is_empty());
    assert_eq!(path.termination, Termination::EmptyPath);
    assert!(matches!(candidate_subsets(&path, &data), Err(Error::NoCandidates)));
}

#[test]
fn candidates_follow_path_order() {
    let mut rng = common::rng(27);
    for _ in 0..20 {
        let data = common::instance(&mut rng, 40, 8);
        let path = full_path(&data);
        let cands = candidate_subsets(&path, &data).unwrap();
        let his: Vec<f64> = cands.candidates.iter().map(|c| c.lambda_interval().1).collect();
        assert!(his.windows(2).all(|w| w[0] > w[1]));
        for c in &cands.candidates {
            let mid = 0.5 * (c.intervals[0].0 + c.intervals[0].1);
            assert_eq!(path.active_at(mid), c.subset.as_slice());
            assert!(c.contains_lambda(mid));
        }
    }
}
