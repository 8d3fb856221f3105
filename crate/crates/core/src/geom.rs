//! Local information geometry: distributions in an ε-neighbourhood of a
//! reference, represented by information vectors φ = (P − P₀)/(ε√P₀).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::modal::ModalDecomposition;
use crate::prob::{kl_divergence, mutual_information, Alphabet, JointPmf, Pmf};

const ORTHONORMAL_TOL: f64 = 1e-8;
const NORMALIZED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationVector {
    pub eps: f64,
    pub phi: Vec<f64>,
}

fn same_support(p: &Pmf, reference: &Pmf) -> Result<()> {
    if p.len() != reference.len() {
        return Err(Error::ShapeMismatch("distribution and reference differ in size".into()));
    }
    Ok(())
}

pub fn info_vector(p: &Pmf, reference: &Pmf, eps: f64) -> Result<InformationVector> {
    same_support(p, reference)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let mut phi = Vec::with_capacity(p.len());
    for (&a, &r) in p.probs.iter().zip(&reference.probs) {
        if r <= 0.0 {
            if a > 0.0 {
                return Err(Error::ZeroReference);
            }
            phi.push(0.0);
        } else {
            phi.push((a - r) / (eps * r.sqrt()));
        }
    }
    Ok(InformationVector { eps, phi })
}

/// P(z) = P₀(z)(1 + ε h(z)) for a feature h with E_{P₀}[h] = 0.
pub fn dist_from_feature(h: &[f64], reference: &Pmf, eps: f64) -> Result<Pmf> {
    if h.len() != reference.len() {
        return Err(Error::ShapeMismatch("feature and reference differ in size".into()));
    }
    let mean = reference.expect(h);
    if mean.abs() > NORMALIZED_TOL {
        return Err(Error::NotNormalized(format!("feature has mean {mean}")));
    }
    let mut probs = Vec::with_capacity(h.len());
    for (i, (&r, &v)) in reference.probs.iter().zip(h).enumerate() {
        let p = r * (1.0 + eps * v);
        if p < 0.0 {
            return Err(Error::EpsTooLarge {
                symbol: reference.alphabet.symbol(i).to_string(),
                value: p,
            });
        }
        probs.push(p);
    }
    let total: f64 = probs.iter().sum();
    Pmf::new(reference.alphabet.clone(), probs.iter().map(|p| p / total).collect())
}

fn check_orthonormal(features: &[Vec<f64>], p: &Pmf, side: &str) -> Result<()> {
    for (i, fi) in features.iter().enumerate() {
        if fi.len() != p.len() {
            return Err(Error::ShapeMismatch(format!("{side} feature {i} has wrong length")));
        }
        let m = p.expect(fi);
        if m.abs() > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(format!("{side} feature {i} has mean {m}")));
        }
        for (j, fj) in features.iter().enumerate().take(i + 1) {
            let prod: Vec<f64> = fi.iter().zip(fj).map(|(a, b)| a * b).collect();
            let c = p.expect(&prod);
            let target = if i == j { 1.0 } else { 0.0 };
            if (c - target).abs() > ORTHONORMAL_TOL {
                return Err(Error::NotOrthonormal(format!(
                    "{side} features {i},{j}: E[f_i f_j] = {c}"
                )));
            }
        }
    }
    Ok(())
}

/// P(x,y) = P_X P_Y (1 + Σ σ_i f_i(x) g_i(y)) from orthonormal zero-mean features.
pub fn synth_weak_joint(
    px: &Pmf,
    py: &Pmf,
    fs: &[Vec<f64>],
    gs: &[Vec<f64>],
    sigmas: &[f64],
) -> Result<JointPmf> {
    if fs.len() != sigmas.len() || gs.len() != sigmas.len() {
        return Err(Error::ShapeMismatch("need one f and one g per mode".into()));
    }
    if sigmas.iter().any(|&s| s < 0.0) || sigmas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("sigmas must be nonnegative and nonincreasing".into()));
    }
    check_orthonormal(fs, px, "X")?;
    check_orthonormal(gs, py, "Y")?;
    let probs = Matrix::from_fn(px.len(), py.len(), |x, y| {
        let s: f64 = (0..sigmas.len()).map(|i| sigmas[i] * fs[i][x] * gs[i][y]).sum();
        px.probs[x] * py.probs[y] * (1.0 + s)
    });
    for x in 0..px.len() {
        for y in 0..py.len() {
            if probs[(x, y)] < 0.0 {
                return Err(Error::NegativeCell {
                    x: px.alphabet.symbol(x).to_string(),
                    y: py.alphabet.symbol(y).to_string(),
                    value: probs[(x, y)],
                });
            }
        }
    }
    let total: f64 = probs.as_slice().iter().sum();
    JointPmf::new(px.alphabet.clone(), py.alphabet.clone(), probs.scale(1.0 / total))
}

/// A weakly dependent joint with known modes, for experiments and fixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakJoint {
    pub joint: JointPmf,
    pub fs: Vec<Vec<f64>>,
    pub gs: Vec<Vec<f64>>,
    pub sigmas: Vec<f64>,
}

/// Random marginals and features; σ_i = strength·(k − i)/k, with the strength
/// halved until every cell is at least half its product-measure value.
pub fn random_weak_joint(nx: usize, ny: usize, k: usize, strength: f64, seed: u64) -> Result<WeakJoint> {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    if k == 0 || k >= nx.min(ny) {
        return Err(Error::KOutOfRange {
            k,
            max: nx.min(ny).saturating_sub(1),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let marginal = |n: usize, rng: &mut ChaCha8Rng| {
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let s: f64 = w.iter().sum();
        Pmf::new(Alphabet::numbered(n), w.iter().map(|v| v / s).collect())
    };
    let px = marginal(nx, &mut rng)?;
    let py = marginal(ny, &mut rng)?;
    let features = |p: &Pmf, rng: &mut ChaCha8Rng| {
        let raw: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..p.len()).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let sp = p.sqrt();
        crate::linalg::orthonormalize_against(&[sp.clone()], &raw)
            .into_iter()
            .map(|psi| psi.iter().zip(&sp).map(|(a, b)| a / b).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    };
    let fs = features(&px, &mut rng);
    let gs = features(&py, &mut rng);
    let mut s = strength;
    loop {
        let sigmas: Vec<f64> = (0..k).map(|i| s * (k - i) as f64 / k as f64).collect();
        let worst = (0..nx)
            .flat_map(|x| (0..ny).map(move |y| (x, y)))
            .map(|(x, y)| (0..k).map(|i| sigmas[i] * fs[i][x] * gs[i][y]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if worst >= -0.5 {
            let joint = synth_weak_joint(&px, &py, &fs, &gs, &sigmas)?;
            return Ok(WeakJoint { joint, fs, gs, sigmas });
        }
        s *= 0.5;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalKl {
    pub exact: f64,
    /// (ε²/2)‖φ₁ − φ₂‖².
    pub approx: f64,
}

pub fn local_kl(p1: &Pmf, p2: &Pmf, reference: &Pmf, eps: f64) -> Result<LocalKl> {
    let a = info_vector(p1, reference, eps)?;
    let b = info_vector(p2, reference, eps)?;
    let d2: f64 = a.phi.iter().zip(&b.phi).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(LocalKl {
        exact: kl_divergence(&p1.probs, &p2.probs)?,
        approx: 0.5 * eps * eps * d2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorExponent {
    /// (ε²/8) Σ_l ⟨φ₁ − φ₂, ξ_l⟩².
    pub exponent: f64,
    /// Fraction of ‖φ₁ − φ₂‖² captured by the features.
    pub efficiency: f64,
}

/// Exponent of a binary test between P₁ and P₂ that only sees the empirical
/// means of the features `hs` (orthonormal under the reference).
pub fn error_exponent(
    hs: &[Vec<f64>],
    reference: &Pmf,
    phi1: &[f64],
    phi2: &[f64],
    eps: f64,
) -> Result<ErrorExponent> {
    let sqrt_ref = reference.sqrt();
    let mut xis = Vec::with_capacity(hs.len());
    for (l, h) in hs.iter().enumerate() {
        if h.len() != reference.len() {
            return Err(Error::ShapeMismatch(format!("feature {l} has wrong length")));
        }
        let m = reference.expect(h);
        let prod: Vec<f64> = h.iter().map(|v| v * v).collect();
        let v = reference.expect(&prod);
        if m.abs() > NORMALIZED_TOL || (v - 1.0).abs() > NORMALIZED_TOL {
            return Err(Error::NotNormalized(format!("feature {l}: mean {m}, second moment {v}")));
        }
        xis.push(h.iter().zip(&sqrt_ref).map(|(a, b)| a * b).collect::<Vec<f64>>());
    }
    let diff: Vec<f64> = phi1.iter().zip(phi2).map(|(a, b)| a - b).collect();
    let captured: f64 = xis.iter().map(|xi| dot(&diff, xi).powi(2)).sum();
    let total = dot(&diff, &diff);
    Ok(ErrorExponent {
        exponent: eps * eps / 8.0 * captured,
        efficiency: if total > 0.0 { captured / total } else { 0.0 },
    })
}

/// Binary attributes U_i − X and Y − V_i driven by the modal features:
/// P_{X|U_i=u} = P_X(1 + ε u f_i), P_{Y|V_i=v} = P_Y(1 + ε v g_i), u, v = ±1
/// equiprobable.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeConfig {
    pub eps: f64,
    pub sigmas: Vec<f64>,
    /// `x_given_u[i][0]` is u = +1, `[1]` is u = −1.
    pub x_given_u: Vec<[Pmf; 2]>,
    pub y_given_v: Vec<[Pmf; 2]>,
}

pub fn multiattribute_config(md: &ModalDecomposition, k: usize, eps: f64) -> Result<AttributeConfig> {
    if k > md.k() {
        return Err(Error::KOutOfRange { k, max: md.k() });
    }
    let mut x_given_u = Vec::with_capacity(k);
    let mut y_given_v = Vec::with_capacity(k);
    for i in 0..k {
        let f = md.f.col(i);
        let g = md.g.col(i);
        let neg = |v: &[f64]| v.iter().map(|a| -a).collect::<Vec<f64>>();
        x_given_u.push([dist_from_feature(&f, &md.px, eps)?, dist_from_feature(&neg(&f), &md.px, eps)?]);
        y_given_v.push([dist_from_feature(&g, &md.py, eps)?, dist_from_feature(&neg(&g), &md.py, eps)?]);
    }
    Ok(AttributeConfig {
        eps,
        sigmas: md.sigmas[..k].to_vec(),
        x_given_u,
        y_given_v,
    })
}

impl AttributeConfig {
    /// Law of (U_i, V_j) through the chain U_i − X − Y − V_j:
    /// P(u, v) = Σ_{x,y} P(u) P(x|u) P(y|x) P(v|y).
    pub fn pairwise_law(&self, i: usize, j: usize, joint: &JointPmf) -> Result<JointPmf> {
        let px = joint.marginal_x();
        let py = joint.marginal_y();
        let mut table = Matrix::zeros(2, 2);
        for (a, pxu) in self.x_given_u[i].iter().enumerate() {
            for (b, pyv) in self.y_given_v[j].iter().enumerate() {
                let mut s = 0.0;
                for x in 0..joint.nx() {
                    if px.probs[x] <= 0.0 {
                        continue;
                    }
                    for y in 0..joint.ny() {
                        if py.probs[y] <= 0.0 {
                            continue;
                        }
                        let p_y_given_x = joint.probs[(x, y)] / px.probs[x];
                        // P(v|y) = P(y|v) P(v) / P_Y(y)
                        let p_v_given_y = pyv.probs[y] * 0.5 / py.probs[y];
                        s += 0.5 * pxu.probs[x] * p_y_given_x * p_v_given_y;
                    }
                }
                table[(a, b)] = s;
            }
        }
        let ab = Alphabet::new(["+1", "-1"]);
        let total: f64 = table.as_slice().iter().sum();
        JointPmf::new(ab.clone(), ab, table.scale(1.0 / total))
    }

    /// I(U_i; V_j) in nats.
    pub fn attribute_mi(&self, i: usize, j: usize, joint: &JointPmf) -> Result<f64> {
        Ok(mutual_information(&self.pairwise_law(i, j, joint)?))
    }
}
