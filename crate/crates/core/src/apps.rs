//! Applications of the modal decomposition: collaborative-filtering
//! recommendation and a closed-form fit of a softmax (log-linear) classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, sym_pinv, Matrix};
use crate::modal::{decompose, max_modes, Method, ModalDecomposition};
use crate::prob::{kl_divergence, Alphabet, JointPmf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Rank by Σ σ_i f_i(x) g_i(y), i.e. by P^(k)(x|y).
    Match,
    /// Rank by P^(k)(y|x).
    YWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub item: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub user: String,
    pub items: Vec<ScoredItem>,
}

/// Top-`l` items for `user` (an X symbol) from a rank-k decomposition.
/// Ties keep the Y alphabet order.
pub fn recommend(
    joint: &JointPmf,
    k: usize,
    l: usize,
    user: &str,
    variant: Variant,
    method: Method,
) -> Result<Recommendation> {
    let x = joint
        .x
        .index_of(user)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    if l > joint.ny() {
        return Err(Error::LTooLarge {
            requested: l,
            available: joint.ny(),
        });
    }
    let md = decompose(joint, k, method)?;
    recommend_from_modes(&md, k, l, x, variant)
}

pub fn recommend_from_modes(
    md: &ModalDecomposition,
    k: usize,
    l: usize,
    x: usize,
    variant: Variant,
) -> Result<Recommendation> {
    let ny = md.py.len();
    if l > ny {
        return Err(Error::LTooLarge {
            requested: l,
            available: ny,
        });
    }
    let mut scored: Vec<(usize, f64)> = (0..ny)
        .map(|y| {
            let s = md.score(k, x, y);
            let score = match variant {
                Variant::Match => s,
                Variant::YWeighted => md.py.probs[y] * (1.0 + s),
            };
            (y, score)
        })
        .collect();
    // Scores equal up to rounding noise count as ties.
    let key = |s: f64| (s * 1e12).round() + 0.0;
    scored.sort_by(|a, b| key(b.1).total_cmp(&key(a.1)).then(a.0.cmp(&b.0)));
    Ok(Recommendation {
        user: md.px.alphabet.symbol(x).to_string(),
        items: scored
            .into_iter()
            .take(l)
            .map(|(y, score)| ScoredItem {
                item: md.py.alphabet.symbol(y).to_string(),
                score,
            })
            .collect(),
    })
}

/// Joint of (S, Y) where S = f(X) takes the distinct rows of `features`,
/// together with the embedding of each S symbol.
pub fn induce_feature_joint(joint: &JointPmf, features: &Matrix) -> Result<(JointPmf, Matrix)> {
    if features.rows() != joint.nx() {
        return Err(Error::ShapeMismatch("one feature row per X symbol required".into()));
    }
    let mut reps: Vec<Vec<f64>> = Vec::new();
    let mut class = Vec::with_capacity(joint.nx());
    for x in 0..joint.nx() {
        let row = features.row(x);
        let found = reps
            .iter()
            .position(|r| r.iter().zip(row).all(|(a, b)| (a - b).abs() <= 1e-12));
        class.push(match found {
            Some(i) => i,
            None => {
                reps.push(row.to_vec());
                reps.len() - 1
            }
        });
    }
    let mut probs = Matrix::zeros(reps.len(), joint.ny());
    for x in 0..joint.nx() {
        for y in 0..joint.ny() {
            probs[(class[x], y)] += joint.probs[(x, y)];
        }
    }
    let s_alphabet = Alphabet::new((0..reps.len()).map(|i| format!("s{i}")));
    let sj = JointPmf::new(s_alphabet, joint.y.clone(), probs)?;
    Ok((sj, Matrix::from_rows(&reps)?))
}

/// Softmax model P̃(y|s) ∝ P_Y(y) exp(sᵀ g(y) + β(y)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxParams {
    /// |Y| × d, row y holds g(y).
    pub g: Matrix,
    pub beta: Vec<f64>,
    pub prior: Vec<f64>,
    pub used_pseudo_inverse: bool,
}

impl SoftmaxParams {
    pub fn posterior(&self, s: &[f64]) -> Vec<f64> {
        softmax_posterior(&self.g, &self.beta, &self.prior, s)
    }
}

pub fn softmax_posterior(g: &Matrix, beta: &[f64], prior: &[f64], s: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = (0..g.rows())
        .map(|y| {
            if prior[y] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                prior[y].ln() + crate::linalg::dot(g.row(y), s) + beta[y]
            }
        })
        .collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    p
}

/// Local closed form g(y) = Λ_S⁻¹(μ_{S|Y}(y) − μ_S), β(y) = −μ_Sᵀ g(y).
///
/// `joint_sy` is over (S, Y); `embedding` has one row per S symbol.
pub fn softmax_fit(joint_sy: &JointPmf, embedding: &Matrix, allow_pseudo_inverse: bool) -> Result<SoftmaxParams> {
    if embedding.rows() != joint_sy.nx() {
        return Err(Error::ShapeMismatch("one embedding row per S symbol required".into()));
    }
    let d = embedding.cols();
    let ps = joint_sy.marginal_x();
    let py = joint_sy.marginal_y();
    let mu: Vec<f64> = (0..d).map(|c| ps.expect(&embedding.col(c))).collect();
    let cov = Matrix::from_fn(d, d, |a, b| {
        (0..ps.len())
            .map(|s| ps.probs[s] * (embedding[(s, a)] - mu[a]) * (embedding[(s, b)] - mu[b]))
            .sum()
    });
    // Row y of `shift` is μ_{S|Y}(y) − μ_S.
    let shift = Matrix::from_fn(joint_sy.ny(), d, |y, c| {
        if py.probs[y] <= 0.0 {
            return 0.0;
        }
        (0..ps.len())
            .map(|s| joint_sy.probs[(s, y)] * embedding[(s, c)])
            .sum::<f64>()
            / py.probs[y]
            - mu[c]
    });
    let (g, used_pinv) = match cholesky(&cov) {
        Ok(ch) => (ch.solve(&shift.transpose()).transpose(), false),
        Err(_) if allow_pseudo_inverse => (shift.matmul(&sym_pinv(&cov, 1e-12)?)?, true),
        Err(_) => return Err(Error::SingularCovariance),
    };
    let beta = (0..g.rows()).map(|y| -crate::linalg::dot(g.row(y), &mu)).collect();
    Ok(SoftmaxParams {
        g,
        beta,
        prior: py.probs,
        used_pseudo_inverse: used_pinv,
    })
}

/// Σ_s P_S(s) D(P_{Y|S=s} ‖ P̃_{Y|S=s}).
pub fn softmax_objective(joint_sy: &JointPmf, embedding: &Matrix, g: &Matrix, beta: &[f64]) -> Result<f64> {
    let ps = joint_sy.marginal_x();
    let prior = joint_sy.marginal_y().probs;
    let mut total = 0.0;
    for s in 0..joint_sy.nx() {
        if ps.probs[s] <= 0.0 {
            continue;
        }
        let cond: Vec<f64> = joint_sy.probs.row(s).iter().map(|p| p / ps.probs[s]).collect();
        let model = softmax_posterior(g, beta, &prior, embedding.row(s));
        total += ps.probs[s] * kl_divergence(&cond, &model)?;
    }
    Ok(total)
}

/// ½ Σ_{i>k} σ_i²: the KL gap left by the best softmax on a k-dimensional
/// injective feature of X.
pub fn softmax_divergence_gap(joint: &JointPmf, k: usize) -> Result<f64> {
    let kmax = max_modes(joint.nx(), joint.ny());
    if k > kmax {
        return Err(Error::KOutOfRange { k, max: kmax });
    }
    if kmax == 0 {
        return Ok(0.0);
    }
    let md = decompose(joint, kmax, Method::Oracle)?;
    if k > 0 {
        let f = md.f.leading_cols(k);
        for a in 0..f.rows() {
            for b in 0..a {
                if f.row(a).iter().zip(f.row(b)).all(|(u, v)| (u - v).abs() <= 1e-9) {
                    return Err(Error::NotInjective);
                }
            }
        }
    }
    Ok(0.5 * md.sigmas[k..].iter().map(|s| s * s).sum::<f64>())
}
