mod common;

use common::{corpus, projector, random_gaussian, random_positive_joint, rng};
use modalfeat::ace::*;
use modalfeat::gaussian::{cca, GaussianJoint};
use modalfeat::linalg::{svd_oracle, Matrix};
use modalfeat::modal::{build_cdm, decompose, max_modes, Method};
use modalfeat::prob::*;
use proptest::prelude::*;
use rand::Rng;

fn monotone_after_second(values: &[f64]) -> bool {
    values.windows(2).skip(1).all(|w| w[1] >= w[0] - 1e-12)
}

fn sigma_gap(sigmas: &[f64], k: usize) -> f64 {
    sigmas[k - 1] - sigmas.get(k).copied().unwrap_or(0.0)
}

#[test]
fn orthogonal_iteration_examples() {
    let a = Matrix::from_diag(&[3.0, 2.0, 1.0]);
    let r = orthogonal_iteration(&a, 2, &AceOptions::default()).unwrap();
    assert!((r.sigmas[0] - 3.0).abs() < 1e-10 && (r.sigmas[1] - 2.0).abs() < 1e-10);
    assert!(r.v[(0, 0)].abs() > 1.0 - 1e-10 && r.v[(1, 1)].abs() > 1.0 - 1e-10);

    let u = [1.0, 2.0, -1.0, 0.5];
    let v = [0.5, -3.0, 1.0];
    let a = Matrix::from_fn(4, 3, |i, j| u[i] * v[j]);
    let r = orthogonal_iteration(&a, 1, &AceOptions::default()).unwrap();
    let want = modalfeat::linalg::norm2(&u) * modalfeat::linalg::norm2(&v);
    assert!((r.sigmas[0] - want).abs() < 1e-12);
    assert!(r.trace.values.len() <= 3);

    // σ₁ = σ₂: only the span is determined.
    let mut r0 = rng(5);
    let q = common::from_na(&common::to_na(&Matrix::new(5, 5, (0..25).map(|_| r0.random_range(-1.0..1.0)).collect()).unwrap()).qr().q());
    let a = q.matmul(&Matrix::from_diag(&[2.0, 2.0, 0.7, 0.3, 0.1])).unwrap().matmul(&q.transpose()).unwrap();
    let r = orthogonal_iteration(&a, 2, &AceOptions::default()).unwrap();
    assert!((r.sigmas[0] - 2.0).abs() < 1e-10 && (r.sigmas[1] - 2.0).abs() < 1e-10);
    assert!(projector(&r.v).max_abs_diff(&projector(&q.leading_cols(2))) <= 1e-6);
}

#[test]
fn ace_discrete_examples() {
    let bss = JointPmf::binary_symmetric(0.3).unwrap();
    let (md, _) = ace_discrete(&bss, 1, &AceOptions::default()).unwrap();
    assert!((md.sigmas[0] - 0.3).abs() <= 1e-8);
    assert!((md.f[(0, 0)] + md.f[(1, 0)]).abs() < 1e-8);

    let ind = JointPmf::product(&Pmf::uniform(3), &Pmf::uniform(2));
    assert!(ace_discrete(&ind, 1, &AceOptions::default()).unwrap().0.sigmas[0] <= 1e-8);

    let j = random_positive_joint(&mut rng(46), 4, 6, 0.05);
    let oracle = decompose(&j, 3, Method::Oracle).unwrap();
    let (md, trace) = ace_discrete(&j, 3, &AceOptions::default()).unwrap();
    for (a, b) in oracle.sigmas.iter().zip(&md.sigmas) {
        assert!((a - b).abs() <= 1e-8);
    }
    assert!(monotone_after_second(&trace.values));
    assert!(trace.converged);
}

#[test]
fn algorithm_steps_hold_every_iteration() {
    for (n, j) in corpus(30, 6, 61).into_iter().enumerate() {
        let k = max_modes(j.nx(), j.ny()).min(3);
        let mut st = AceDiscrete::new(&j, k, &AceOptions::with_seed(n as u64)).unwrap();
        for _ in 0..25 {
            st.center_f();
            st.whiten_f().unwrap();
            let gram = st.feature_gram_x();
            assert!(gram.max_abs_diff(&Matrix::identity(k)) <= 1e-9);
            st.conditional_g();
            st.center_g();
            for c in 0..k {
                assert!(st.py.expect(&st.g.col(c)).abs() <= 1e-12);
            }
            st.whiten_g().unwrap();
            st.conditional_f();
        }
    }
}

#[test]
fn empirical_ace_matches_oracle_on_the_empirical_joint() {
    let truth = random_positive_joint(&mut rng(70), 4, 5, 0.1);
    let emp = joint_from_samples(&draw_samples(&truth, 20_000, 2).unwrap()).unwrap();
    let oracle = decompose(&emp, 3, Method::Oracle).unwrap();
    let (md, _) = ace_discrete(&emp, 3, &AceOptions::default()).unwrap();
    for (a, b) in oracle.sigmas.iter().zip(&md.sigmas) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn limit_does_not_depend_on_the_seed() {
    let mut checked = 0;
    for j in corpus(60, 6, 83) {
        let kmax = max_modes(j.nx(), j.ny());
        let oracle = svd_oracle(&build_cdm(&j).unwrap().matrix).unwrap().sigma;
        for k in 1..=kmax {
            if sigma_gap(&oracle, k) < 1e-3 {
                continue;
            }
            let opts = AceOptions::default();
            let a = ace_discrete(&j, k, &AceOptions { seed: 1, ..opts }).unwrap().0;
            let b = ace_discrete(&j, k, &AceOptions { seed: 2, ..opts }).unwrap().0;
            for (x, y) in a.sigmas.iter().zip(&b.sigmas) {
                assert!((x - y).abs() <= 10.0 * opts.tol, "{x} vs {y}");
            }
            checked += 1;
        }
    }
    assert!(checked >= 60, "{checked}");
}

#[test]
fn gaussian_ace_examples() {
    let scalar = GaussianJoint::new(Matrix::identity(1), Matrix::identity(1), Matrix::from_diag(&[0.4])).unwrap();
    let (c, _) = ace_gaussian(&scalar, 1, &AceOptions::default()).unwrap();
    assert!((c.sigmas[0] - 0.4).abs() < 1e-12);
    assert!((c.f[(0, 0)].abs() - 1.0).abs() < 1e-12 && (c.g[(0, 0)].abs() - 1.0).abs() < 1e-12);
    assert!(c.f[(0, 0)] * c.g[(0, 0)] > 0.0);

    let m = random_gaussian(&mut rng(9), 3, 4);
    let null = m.with_cross_cov(Matrix::zeros(3, 4));
    let (c, _) = ace_gaussian(&null, 2, &AceOptions::default()).unwrap();
    assert!(c.sigmas.iter().all(|&s| s == 0.0));

    let bad = GaussianJoint {
        cov_x: Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap(),
        ..random_gaussian(&mut rng(1), 2, 2)
    };
    assert_eq!(ace_gaussian(&bad, 1, &AceOptions::default()).unwrap_err().code(), "NOT_POSITIVE_DEFINITE");
}

#[test]
fn gaussian_ace_matches_cca() {
    let mut r = rng(12);
    let mut checked = 0;
    while checked < 30 {
        let m = random_gaussian(&mut r, 4, 5);
        let oracle = cca(&m, 4).unwrap();
        if sigma_gap(&oracle.sigmas, 3) < 1e-3 {
            continue;
        }
        let (c, trace) = ace_gaussian(&m, 3, &AceOptions::with_seed(checked)).unwrap();
        for (a, b) in oracle.sigmas.iter().zip(&c.sigmas) {
            assert!((a - b).abs() <= 1e-8);
        }
        let fx = c.f.transpose().matmul(&m.cov_x.matmul(&c.f).unwrap()).unwrap();
        let gy = c.g.transpose().matmul(&m.cov_y.matmul(&c.g).unwrap()).unwrap();
        assert!(fx.max_abs_diff(&Matrix::identity(3)) <= 1e-8);
        assert!(gy.max_abs_diff(&Matrix::identity(3)) <= 1e-8);
        assert!(monotone_after_second(&trace.values));
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_monotone_and_limit_matches_oracle(
        nx in 2usize..7, ny in 2usize..7, seed in any::<u64>(), k_pick in 0usize..8,
    ) {
        let j = random_positive_joint(&mut rng(seed), nx, ny, 0.05);
        let kmax = max_modes(nx, ny);
        let k = 1 + k_pick % kmax;
        let (md, trace) = ace_discrete(&j, k, &AceOptions::with_seed(seed)).unwrap();
        prop_assert!(monotone_after_second(&trace.values));
        let oracle = svd_oracle(&build_cdm(&j).unwrap().matrix).unwrap().sigma;
        for i in 0..k {
            prop_assert!((md.sigmas[i] - oracle[i]).abs() <= 1e-8);
        }
        if trace.converged && sigma_gap(&oracle, k) >= 1e-3 {
            let p = projector(&md.psi_x());
            let oracle_svd = svd_oracle(&build_cdm(&j).unwrap().matrix).unwrap();
            prop_assert!(p.max_abs_diff(&projector(&oracle_svd.v.leading_cols(k))) <= 1e-6);
        }
    }

    #[test]
    fn orthogonal_iteration_matches_svd(m in 2usize..8, n in 2usize..8, seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = Matrix::new(m, n, (0..m * n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let k = 1 + (seed as usize) % m.min(n);
        let res = orthogonal_iteration(&a, k, &AceOptions::with_seed(seed)).unwrap();
        let svd = svd_oracle(&a).unwrap();
        prop_assert!(monotone_after_second(&res.trace.values));
        for i in 0..k {
            prop_assert!((res.sigmas[i] - svd.sigma[i]).abs() <= 1e-8);
        }
        if sigma_gap(&svd.sigma, k) >= 1e-3 {
            prop_assert!(projector(&res.v).max_abs_diff(&projector(&svd.v.leading_cols(k))) <= 1e-6);
            prop_assert!(projector(&res.u).max_abs_diff(&projector(&svd.u.leading_cols(k))) <= 1e-6);
        }
    }
}
