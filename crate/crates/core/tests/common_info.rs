mod common;

use common::{loglog_slope, random_admissible_features, random_pmf, rng};
use modalfeat::common::*;
use modalfeat::geom::{random_weak_joint, synth_weak_joint};
use modalfeat::linalg::Matrix;
use modalfeat::modal::{decompose, max_modes, Method};
use modalfeat::prob::*;
use proptest::prelude::*;

fn full(j: &JointPmf) -> modalfeat::modal::ModalDecomposition {
    decompose(j, max_modes(j.nx(), j.ny()), Method::Oracle).unwrap()
}

#[test]
fn value_examples() {
    let ind = JointPmf::product(&Pmf::uniform(3), &Pmf::uniform(2));
    assert!(eps_common_information(&ind).unwrap() < 1e-15);
    let bss = JointPmf::binary_symmetric(0.3).unwrap();
    assert!((eps_common_information(&bss).unwrap() - 0.3).abs() < 1e-12);
    let copy3 = JointPmf::from_matrix(Matrix::from_diag(&[1.0 / 3.0; 3])).unwrap();
    assert!((eps_common_information(&copy3).unwrap() - 2.0).abs() < 1e-12);
    let holes = joint_from_table(&[("a", "b", 0.5), ("a", "c", 0.5), ("d", "b", 0.0)]).unwrap();
    assert_eq!(eps_common_information(&holes).unwrap_err().code(), "ZERO_MARGINAL");
}

#[test]
fn configuration_examples() {
    let bss = JointPmf::binary_symmetric(0.3).unwrap();
    let c = build_common_config(&full(&bss)).unwrap();
    assert_eq!(c.labels, [1, -1]);
    assert!(c.p_w.iter().all(|&p| (p - 0.5).abs() < 1e-15));
    let plus = c.labels.iter().position(|&w| w == 1).unwrap();
    let want = 0.5 * (1.0 + 0.3f64.sqrt());
    assert!((c.x_given_w[plus][0] - want).abs() < 1e-12);
    assert!((want - 0.7739).abs() < 5e-5);

    let ind = JointPmf::product(&Pmf::uniform(3), &Pmf::uniform(3));
    assert_eq!(build_common_config(&full(&ind)).unwrap_err().code(), "CONFIG_INVALID");

    // Strong dependence pushes a conditional below zero.
    let strong = JointPmf::from_matrix(Matrix::from_rows(&[
        vec![0.40, 0.02, 0.01],
        vec![0.02, 0.30, 0.01],
        vec![0.01, 0.01, 0.22],
    ]).unwrap()).unwrap();
    assert_eq!(build_common_config(&full(&strong)).unwrap_err().code(), "CONFIG_INVALID");
}

#[test]
fn sufficient_statistic_examples() {
    let bss = JointPmf::binary_symmetric(0.3).unwrap();
    let md = full(&bss);
    assert_eq!(md.f[(0, 0)], 1.0);
    let r = common_suff_stat(&md.f, &md.g, &[(0, 0)]).unwrap();
    assert!((r[0] - 2.0).abs() < 1e-12);
    let r = common_suff_stat(&md.f, &md.g, &[(0, 0), (1, 1)]).unwrap();
    assert!(r[0].abs() < 1e-12);
    assert_eq!(common_suff_stat(&md.f, &md.g, &[(2, 0)]).unwrap_err().code(), "UNKNOWN_SYMBOL");

    // E[s] = E[t] = 0 under the exact joint.
    let j = common::random_positive_joint(&mut rng(2), 4, 3, 0.05);
    let md = full(&j);
    for i in 0..md.k() {
        let mut es = 0.0;
        let mut et = 0.0;
        for x in 0..4 {
            for y in 0..3 {
                let s = common_suff_stat(&md.f, &md.g, &[(x, y)]).unwrap()[i];
                es += j.probs[(x, y)] * md.f[(x, i)];
                et += j.probs[(x, y)] * (s - md.f[(x, i)]);
            }
        }
        assert!(es.abs() < 1e-12 && et.abs() < 1e-12);
    }
}

#[test]
fn posterior_examples() {
    let bss = JointPmf::binary_symmetric(0.05).unwrap();
    let c = build_common_config(&full(&bss)).unwrap();
    let prior = c.posterior_w(&[]).unwrap();
    assert_eq!(prior.dominant, c.p_w);
    assert_eq!(prior.exact, c.p_w);

    let p = c.posterior_w(&[(0, 0)]).unwrap();
    let plus = c.labels.iter().position(|&w| w == 1).unwrap();
    let minus = 1 - plus;
    assert!(p.dominant[plus] > p.dominant[minus]);
    assert!((p.dominant[plus] - 0.5 - (0.5 - p.dominant[minus])).abs() < 1e-15);

    // Dominant term against the exact Bayes posterior as dependence fades.
    let mut r = rng(7);
    let px = random_pmf(&mut r, 4);
    let py = random_pmf(&mut r, 3);
    let f = random_admissible_features(&mut r, &px.probs, 2);
    let g = random_admissible_features(&mut r, &py.probs, 2);
    let scales = [0.1, 0.03, 0.01];
    let gaps: Vec<f64> = scales
        .iter()
        .map(|&s| {
            let j = synth_weak_joint(&px, &py, &[f.col(0), f.col(1)], &[g.col(0), g.col(1)], &[s, 0.5 * s]).unwrap();
            let c = build_common_config(&full(&j)).unwrap();
            let mut worst: f64 = 0.0;
            for x in 0..4 {
                for y in 0..3 {
                    let p = c.posterior_w(&[(x, y)]).unwrap();
                    let tv: f64 = 0.5 * p.dominant.iter().zip(&p.exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
                    worst = worst.max(tv);
                }
            }
            worst
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    let slope = loglog_slope(&scales, &gaps);
    assert!((slope - 1.0).abs() <= 0.3, "slope {slope}");
}

#[test]
fn w_information_approaches_the_nuclear_norm() {
    for seed in 0..10 {
        let w = random_weak_joint(5, 4, 3, 0.05, seed).unwrap();
        let c = build_common_config(&full(&w.joint)).unwrap();
        let ratio = c.w_information() / c.nuclear_norm;
        assert!((0.8..=1.2).contains(&ratio), "seed {seed}: {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mixture_reproduces_the_joint(nx in 2usize..7, ny in 2usize..7, seed in any::<u64>(), s in 0.005f64..0.05) {
        let k = (seed as usize) % (nx.min(ny) - 1) + 1;
        let w = random_weak_joint(nx, ny, k, s, seed).unwrap();
        let md = full(&w.joint);
        let c = build_common_config(&md).unwrap();
        prop_assert!(c.mixture_joint().unwrap().probs.max_abs_diff(&w.joint.probs) <= 1e-12);
        prop_assert!((c.p_w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (i, &label) in c.labels.iter().enumerate() {
            let m = label.unsigned_abs() as usize - 1;
            prop_assert!((c.p_w[i] - md.sigmas[m] / (2.0 * c.nuclear_norm)).abs() <= 1e-15);
            prop_assert!((c.x_given_w[i].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!((c.y_given_w[i].iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(c.x_given_w[i].iter().chain(&c.y_given_w[i]).all(|&p| p >= 0.0));
        }
        // Given W the pair factorises, so P(x,y|w) = P(x|w) P(y|w).
        let t = c.w_joint();
        for (wi, &pw) in c.p_w.iter().enumerate() {
            for x in 0..nx {
                for y in 0..ny {
                    let cond = t[(wi, x * ny + y)] / pw;
                    prop_assert!((cond - c.x_given_w[wi][x] * c.y_given_w[wi][y]).abs() <= 1e-15);
                }
            }
        }
    }
}
