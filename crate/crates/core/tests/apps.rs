mod common;

use common::{random_positive_joint, rng, softmax_gd_oracle};
use modalfeat::apps::*;
use modalfeat::geom::{random_weak_joint, synth_weak_joint};
use modalfeat::linalg::Matrix;
use modalfeat::modal::{decompose, max_modes, posterior_truncated, reconstruct_truncated, Method};
use modalfeat::prob::*;
use proptest::prelude::*;
use rand::Rng;

fn items(r: &Recommendation) -> Vec<String> {
    r.items.iter().map(|i| i.item.clone()).collect()
}

#[test]
fn recommendation_examples() {
    let bss = JointPmf::binary_symmetric(0.3).unwrap();
    let r = recommend(&bss, 1, 1, "0", Variant::Match, Method::Oracle).unwrap();
    assert_eq!(items(&r), ["0"]);
    let r = recommend(&bss, 1, 1, "1", Variant::Match, Method::Oracle).unwrap();
    assert_eq!(items(&r), ["1"]);

    let ind = JointPmf::product(&Pmf::uniform(2), &Pmf::uniform(5));
    let r = recommend(&ind, 1, 5, "1", Variant::Match, Method::Oracle).unwrap();
    assert_eq!(items(&r), ["0", "1", "2", "3", "4"]);

    assert_eq!(recommend(&bss, 1, 1, "7", Variant::Match, Method::Oracle).unwrap_err().code(), "UNKNOWN_USER");
    assert_eq!(recommend(&bss, 1, 3, "0", Variant::Match, Method::Oracle).unwrap_err().code(), "L_TOO_LARGE");
}

#[test]
fn recommendations_match_truncated_posteriors() {
    let mut r = rng(40);
    for trial in 0..40 {
        let (nx, ny) = if trial == 0 { (6, 10) } else { (r.random_range(3..8), r.random_range(3..11)) };
        let j = random_positive_joint(&mut r, nx, ny, 0.02);
        let kmax = max_modes(nx, ny);
        let md = decompose(&j, kmax, Method::Oracle).unwrap();
        for k in 1..=kmax.min(3) {
            // Without clamping, P^(k) is the plain expansion and its conditionals.
            let Ok(pk) = reconstruct_truncated(&md, k) else { continue };
            if pk.clamped {
                continue;
            }
            let x_given_y = posterior_truncated(&md, k, Direction::XGivenY).unwrap();
            let y_given_x = posterior_truncated(&md, k, Direction::YGivenX).unwrap();
            let user = r.random_range(0..nx);
            let l = if trial == 0 { 3 } else { r.random_range(1..=ny) };
            let mut by_match: Vec<usize> = (0..ny).collect();
            by_match.sort_by(|&a, &b| x_given_y[(b, user)].total_cmp(&x_given_y[(a, user)]).then(a.cmp(&b)));
            let mut by_y: Vec<usize> = (0..ny).collect();
            by_y.sort_by(|&a, &b| y_given_x[(user, b)].total_cmp(&y_given_x[(user, a)]).then(a.cmp(&b)));

            let name = user.to_string();
            let m = recommend(&j, k, l, &name, Variant::Match, Method::Oracle).unwrap();
            let want: Vec<String> = by_match[..l].iter().map(|y| y.to_string()).collect();
            assert_eq!(items(&m), want);
            let w = recommend(&j, k, l, &name, Variant::YWeighted, Method::Oracle).unwrap();
            let want: Vec<String> = by_y[..l].iter().map(|y| y.to_string()).collect();
            assert_eq!(items(&w), want);
            assert!(m.items.windows(2).all(|p| p[0].score >= p[1].score));
            assert!(w.items.windows(2).all(|p| p[0].score >= p[1].score));
        }
    }
}

#[test]
fn recommendations_from_samples() {
    let truth = random_positive_joint(&mut rng(41), 4, 6, 0.05);
    let samples = draw_samples(&truth, 5000, 3).unwrap();
    let emp = joint_from_samples(&samples).unwrap();
    let a = recommend(&emp, 2, 6, "2", Variant::Match, Method::Oracle).unwrap();
    let b = recommend(&emp, 2, 6, "2", Variant::Match, Method::Ace(modalfeat::ace::AceOptions::default())).unwrap();
    assert_eq!(items(&a), items(&b));
}

fn scalar_embedding(values: &[f64]) -> Matrix {
    Matrix::from_rows(&values.iter().map(|v| vec![*v]).collect::<Vec<_>>()).unwrap()
}

#[test]
fn softmax_examples() {
    // S independent of Y.
    let ps = Pmf::new(Alphabet::numbered(3), vec![0.2, 0.3, 0.5]).unwrap();
    let py = Pmf::new(Alphabet::numbered(2), vec![0.4, 0.6]).unwrap();
    let sy = JointPmf::product(&ps, &py);
    let emb = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![-1.0, 1.0]]).unwrap();
    let p = softmax_fit(&sy, &emb, false).unwrap();
    assert!(p.g.max_abs() < 1e-15 && p.beta.iter().all(|b| b.abs() < 1e-15));

    let eps = 0.04;
    let sy = JointPmf::binary_symmetric(eps).unwrap();
    let p = softmax_fit(&sy, &scalar_embedding(&[1.0, -1.0]), false).unwrap();
    assert!((p.g[(0, 0)] - eps).abs() < 1e-15 && (p.g[(1, 0)] + eps).abs() < 1e-15);
    assert!(p.beta.iter().all(|b| b.abs() < 1e-15));
    assert!(!p.used_pseudo_inverse);
}

#[test]
fn fitted_weights_follow_the_modes() {
    for seed in 0..10 {
        let w = random_weak_joint(6, 5, 3, 0.05, seed).unwrap();
        for k in 1..=3 {
            let md = decompose(&w.joint, k, Method::Oracle).unwrap();
            let (sy, emb) = induce_feature_joint(&w.joint, &md.f).unwrap();
            let p = softmax_fit(&sy, &emb, false).unwrap();
            for y in 0..5 {
                for i in 0..k {
                    assert!((p.g[(y, i)] - md.sigmas[i] * md.g[(y, i)]).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn closed_form_is_near_the_numerical_optimum() {
    for seed in 0..4 {
        let w = random_weak_joint(5, 4, 2, 0.05, seed).unwrap();
        let md = decompose(&w.joint, 2, Method::Oracle).unwrap();
        let (sy, emb) = induce_feature_joint(&w.joint, &md.f).unwrap();
        let p = softmax_fit(&sy, &emb, false).unwrap();
        let closed = softmax_objective(&sy, &emb, &p.g, &p.beta).unwrap();
        let (g, b, _) = softmax_gd_oracle(&sy, &emb, 0.1, 10_000);
        let gd = softmax_objective(&sy, &emb, &g, &b).unwrap();
        assert!((closed - gd).abs() <= 1e-3);
    }
}

#[test]
fn divergence_gap_examples() {
    let j = random_positive_joint(&mut rng(50), 4, 5, 0.05);
    assert_eq!(softmax_divergence_gap(&j, 3).unwrap(), 0.0);
    let bss = JointPmf::binary_symmetric(0.05).unwrap();
    assert!((softmax_divergence_gap(&bss, 0).unwrap() - 1.25e-3).abs() < 1e-15);

    let base = random_weak_joint(4, 4, 2, 0.3, 1).unwrap();
    let (px, py) = (base.joint.marginal_x(), base.joint.marginal_y());
    let j = synth_weak_joint(&px, &py, &base.fs, &base.gs, &[0.05, 0.02]).unwrap();
    assert!((softmax_divergence_gap(&j, 1).unwrap() - 2e-4).abs() < 1e-12);

    // Two users with identical rows share every feature value.
    let twins = JointPmf::from_matrix(Matrix::from_rows(&[
        vec![0.1, 0.2],
        vec![0.1, 0.2],
        vec![0.3, 0.1],
    ]).unwrap()).unwrap();
    assert_eq!(softmax_divergence_gap(&twins, 1).unwrap_err().code(), "NOT_INJECTIVE");
}

#[test]
fn divergence_gap_predicts_the_fitted_kl() {
    let mut checked = 0;
    for seed in 0..10 {
        let base = random_weak_joint(5, 5, 3, 0.3, seed).unwrap();
        let (px, py) = (base.joint.marginal_x(), base.joint.marginal_y());
        for eps in [0.05, 0.02] {
            let j = synth_weak_joint(&px, &py, &base.fs, &base.gs, &[eps, 0.6 * eps, 0.3 * eps]).unwrap();
            for k in 0..4 {
                let gap = softmax_divergence_gap(&j, k).unwrap();
                let actual = if k == 0 {
                    mutual_information(&j)
                } else {
                    let md = decompose(&j, k, Method::Oracle).unwrap();
                    let (sy, emb) = induce_feature_joint(&j, &md.f).unwrap();
                    let p = softmax_fit(&sy, &emb, false).unwrap();
                    softmax_objective(&sy, &emb, &p.g, &p.beta).unwrap()
                };
                if k == 4 - 1 {
                    // All modes kept: only the higher-order remainder of the fit is left.
                    assert!(actual <= 0.01 * eps * eps, "{actual}");
                } else {
                    assert!((actual - gap).abs() <= 0.2 * gap, "seed {seed} eps {eps} k {k}: {actual} vs {gap}");
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 60);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn softmax_normalisation(ns in 2usize..7, ny in 2usize..6, d in 1usize..3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let sy = random_positive_joint(&mut r, ns, ny, 0.05);
        let emb = Matrix::new(ns, d, (0..ns * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
        let p = softmax_fit(&sy, &emb, true).unwrap();
        let py = sy.marginal_y().probs;
        for c in 0..d {
            let m: f64 = (0..ny).map(|y| py[y] * p.g[(y, c)]).sum();
            prop_assert!(m.abs() <= 1e-8);
        }
        let mb: f64 = (0..ny).map(|y| py[y] * p.beta[y]).sum();
        prop_assert!(mb.abs() <= 1e-8);
        for s in 0..ns {
            let post = p.posterior(emb.row(s));
            prop_assert!((post.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
            prop_assert!(post.iter().all(|&q| q > 0.0));
        }
    }
}
