//! Divergence transition matrices, canonical dependence matrices and the
//! modal decomposition of a joint distribution into scored feature pairs.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::ace::{ace_discrete, AceOptions};
use crate::error::{Error, Result};
use crate::linalg::{leading_sign, orthonormalize_against, svd_oracle, Matrix};
use crate::prob::{Alphabet, Direction, JointPmf, Pmf};

const DTM_NORM_TOL: f64 = 1e-6;
const CLAMP_TOL: f64 = 1e-6;

/// B(y, x) = P(x, y) / sqrt(P_X(x) P_Y(y)), rows indexed by y.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtm {
    pub x: Alphabet,
    pub y: Alphabet,
    pub matrix: Matrix,
}

impl Dtm {
    pub fn from_matrix(matrix: Matrix) -> Self {
        Dtm {
            x: Alphabet::numbered(matrix.cols()),
            y: Alphabet::numbered(matrix.rows()),
            matrix,
        }
    }
}

/// Rows or columns with zero marginal mass are set to zero.
pub fn build_dtm(joint: &JointPmf) -> Dtm {
    let px = joint.marginal_x();
    let py = joint.marginal_y();
    let matrix = Matrix::from_fn(joint.ny(), joint.nx(), |j, i| {
        let d = px.probs[i] * py.probs[j];
        if d > 0.0 {
            joint.probs[(i, j)] / d.sqrt()
        } else {
            0.0
        }
    });
    Dtm {
        x: joint.x.clone(),
        y: joint.y.clone(),
        matrix,
    }
}

/// Recovers the joint distribution from its DTM.
///
/// When the top singular value is repeated, the Perron pair is taken as the
/// projection of the uniform direction onto the top right singular subspace.
pub fn dtm_to_joint(dtm: &Dtm) -> Result<JointPmf> {
    let b = &dtm.matrix;
    if b.rows() == 0 || b.cols() == 0 {
        return Err(Error::NotADtm("empty matrix".into()));
    }
    if b.as_slice().iter().any(|&v| !v.is_finite() || v < -1e-12) {
        return Err(Error::NotADtm("negative entry".into()));
    }
    let svd = svd_oracle(b)?;
    let s1 = svd.sigma[0];
    if (s1 - 1.0).abs() > DTM_NORM_TOL {
        return Err(Error::NotADtm(format!("spectral norm {s1}")));
    }
    let nx = b.cols();
    let uniform = 1.0 / (nx as f64).sqrt();
    let mut v = vec![0.0; nx];
    for (i, &s) in svd.sigma.iter().enumerate() {
        if (s - 1.0).abs() > DTM_NORM_TOL {
            break;
        }
        let vi = svd.v.col(i);
        let c: f64 = vi.iter().sum::<f64>() * uniform;
        for (a, b) in v.iter_mut().zip(&vi) {
            *a += c * b;
        }
    }
    let mut nv = crate::linalg::norm2(&v);
    if nv < 1e-8 {
        v = svd.v.col(0);
        nv = 1.0;
    }
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for a in v.iter_mut() {
        *a *= sign / nv;
    }
    if v.iter().any(|&a| a <= 0.0) {
        return Err(Error::NotADtm("no strictly positive Perron vector".into()));
    }
    let mut u = b.matvec(&v)?;
    let nu = crate::linalg::norm2(&u);
    for a in u.iter_mut() {
        *a /= nu;
    }
    if u.iter().any(|&a| a <= 0.0) {
        return Err(Error::NotADtm("no strictly positive Perron vector".into()));
    }
    let mut probs = Matrix::from_fn(nx, b.rows(), |i, j| (b[(j, i)] * v[i] * u[j]).max(0.0));
    let total: f64 = probs.as_slice().iter().sum();
    probs = probs.scale(1.0 / total);
    JointPmf::new(dtm.x.clone(), dtm.y.clone(), probs)
}

/// B̃ = B − √P_Y √P_Xᵀ, rows indexed by y.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdm {
    pub matrix: Matrix,
    pub px: Pmf,
    pub py: Pmf,
}

fn require_positive(p: &Pmf) -> Result<()> {
    match p.probs.iter().position(|&v| v <= 0.0) {
        Some(i) => Err(Error::ZeroMarginal(p.alphabet.symbol(i).to_string())),
        None => Ok(()),
    }
}

pub fn build_cdm(joint: &JointPmf) -> Result<Cdm> {
    build_quasi_cdm(joint, &joint.marginal_x(), &joint.marginal_y())
}

/// CDM of `joint` taken against the supplied marginals. With an empirical
/// joint and the true marginals this is the quasi-CDM.
pub fn build_quasi_cdm(joint: &JointPmf, px: &Pmf, py: &Pmf) -> Result<Cdm> {
    if px.len() != joint.nx() || py.len() != joint.ny() {
        return Err(Error::ShapeMismatch("marginals do not match the joint".into()));
    }
    require_positive(px)?;
    require_positive(py)?;
    let matrix = Matrix::from_fn(joint.ny(), joint.nx(), |j, i| {
        let d = px.probs[i] * py.probs[j];
        (joint.probs[(i, j)] - d) / d.sqrt()
    });
    Ok(Cdm {
        matrix,
        px: px.clone(),
        py: py.clone(),
    })
}

/// Top modes of a joint distribution: P(x,y) = P_X P_Y (1 + Σ σ_i f_i(x) g_i(y)).
#[derive(Debug, Clone, PartialEq)]
pub struct ModalDecomposition {
    pub sigmas: Vec<f64>,
    /// |X| × k, column i holds f_i.
    pub f: Matrix,
    /// |Y| × k, column i holds g_i.
    pub g: Matrix,
    pub px: Pmf,
    pub py: Pmf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Oracle,
    Ace(AceOptions),
}

/// Number of nontrivial modes, K − 1 with K = min(|X|, |Y|).
pub fn max_modes(nx: usize, ny: usize) -> usize {
    nx.min(ny).saturating_sub(1)
}

pub(crate) fn check_k(k: usize, max: usize) -> Result<()> {
    if k == 0 || k > max {
        return Err(Error::KOutOfRange { k, max });
    }
    Ok(())
}

pub fn decompose(joint: &JointPmf, k: usize, method: Method) -> Result<ModalDecomposition> {
    check_k(k, max_modes(joint.nx(), joint.ny()))?;
    match method {
        Method::Oracle => decompose_cdm(&build_cdm(joint)?, k),
        Method::Ace(opts) => {
            let (md, trace) = ace_discrete(joint, k, &opts)?;
            if !trace.converged {
                return Err(Error::NoConvergence {
                    iterations: trace.values.len(),
                });
            }
            Ok(md)
        }
    }
}

/// Modes from the SVD of a (quasi-)CDM.
pub fn decompose_cdm(cdm: &Cdm, k: usize) -> Result<ModalDecomposition> {
    check_k(k, max_modes(cdm.px.len(), cdm.py.len()))?;
    let svd = svd_oracle(&cdm.matrix)?;
    let sx = cdm.px.sqrt();
    let sy = cdm.py.sqrt();
    let vx: Vec<Vec<f64>> = (0..k).map(|i| svd.v.col(i)).collect();
    let uy: Vec<Vec<f64>> = (0..k).map(|i| svd.u.col(i)).collect();
    let mut px_vecs = orthonormalize_against(&[sx.clone()], &vx);
    let mut py_vecs = orthonormalize_against(&[sy.clone()], &uy);
    for i in 0..k {
        if leading_sign(&px_vecs[i]) < 0.0 {
            px_vecs[i].iter_mut().for_each(|a| *a = -*a);
            py_vecs[i].iter_mut().for_each(|a| *a = -*a);
        }
    }
    let sigmas = svd.sigma[..k].iter().map(|s| s.max(0.0)).collect();
    Ok(from_feature_vectors(sigmas, &px_vecs, &py_vecs, &cdm.px, &cdm.py))
}

/// Builds a decomposition from orthonormal feature vectors ψ = √P f.
pub(crate) fn from_feature_vectors(
    sigmas: Vec<f64>,
    psi_x: &[Vec<f64>],
    psi_y: &[Vec<f64>],
    px: &Pmf,
    py: &Pmf,
) -> ModalDecomposition {
    let k = sigmas.len();
    let f = Matrix::from_fn(px.len(), k, |x, i| psi_x[i][x] / px.probs[x].sqrt());
    let g = Matrix::from_fn(py.len(), k, |y, i| psi_y[i][y] / py.probs[y].sqrt());
    ModalDecomposition {
        sigmas,
        f,
        g,
        px: px.clone(),
        py: py.clone(),
    }
}

impl ModalDecomposition {
    pub fn k(&self) -> usize {
        self.sigmas.len()
    }

    /// ψ^X_i = √P_X f_i as columns.
    pub fn psi_x(&self) -> Matrix {
        self.f.scale_rows(&self.px.sqrt())
    }

    pub fn psi_y(&self) -> Matrix {
        self.g.scale_rows(&self.py.sqrt())
    }

    /// Σ_{i<k} σ_i f_i(x) g_i(y).
    pub fn score(&self, k: usize, x: usize, y: usize) -> f64 {
        (0..k)
            .map(|i| self.sigmas[i] * self.f[(x, i)] * self.g[(y, i)])
            .sum()
    }

    /// Keeps the first `k` modes.
    pub fn truncate(&self, k: usize) -> Result<ModalDecomposition> {
        check_k(k, self.k())?;
        Ok(ModalDecomposition {
            sigmas: self.sigmas[..k].to_vec(),
            f: self.f.leading_cols(k),
            g: self.g.leading_cols(k),
            px: self.px.clone(),
            py: self.py.clone(),
        })
    }

    pub fn to_json(&self) -> Value {
        let feats = |m: &Matrix, a: &Alphabet| {
            let mut map = Map::new();
            for (i, s) in a.symbols().iter().enumerate() {
                map.insert(s.clone(), json!(m.row(i)));
            }
            Value::Object(map)
        };
        let marg = |p: &Pmf| {
            let mut map = Map::new();
            for (s, v) in p.alphabet.symbols().iter().zip(&p.probs) {
                map.insert(s.clone(), json!(v));
            }
            Value::Object(map)
        };
        json!({
            "sigmas": self.sigmas,
            "f": feats(&self.f, &self.px.alphabet),
            "g": feats(&self.g, &self.py.alphabet),
            "marginals": {"x": marg(&self.px), "y": marg(&self.py)},
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse { line: 0, msg: m.to_string() };
        let sigmas: Vec<f64> = serde_json::from_value(v["sigmas"].clone())?;
        let k = sigmas.len();
        let pmf = |m: &Value| -> Result<Pmf> {
            let obj = m.as_object().ok_or_else(|| bad("marginal must be an object"))?;
            let alphabet = Alphabet::new(obj.keys().cloned());
            let probs = obj
                .values()
                .map(|p| p.as_f64().ok_or_else(|| bad("probability must be a number")))
                .collect::<Result<Vec<_>>>()?;
            Pmf::new(alphabet, probs)
        };
        let px = pmf(&v["marginals"]["x"])?;
        let py = pmf(&v["marginals"]["y"])?;
        let feats = |m: &Value, p: &Pmf| -> Result<Matrix> {
            let mut out = Matrix::zeros(p.len(), k);
            for (i, s) in p.alphabet.symbols().iter().enumerate() {
                let row: Vec<f64> = serde_json::from_value(m[s].clone())?;
                if row.len() != k {
                    return Err(bad("feature length differs from number of modes"));
                }
                out.row_mut(i).copy_from_slice(&row);
            }
            Ok(out)
        };
        Ok(ModalDecomposition {
            f: feats(&v["f"], &px)?,
            g: feats(&v["g"], &py)?,
            sigmas,
            px,
            py,
        })
    }
}

/// Ky Fan k-norm of the CDM: the sum of the top k mode strengths.
pub fn maximal_correlation(joint: &JointPmf, k: usize) -> Result<f64> {
    check_k(k, max_modes(joint.nx(), joint.ny()))?;
    let cdm = build_cdm(joint)?;
    let svd = svd_oracle(&cdm.matrix)?;
    Ok(svd.sigma[..k].iter().sum())
}

/// Rank-k approximation P^(k) of the joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedJoint {
    pub k: usize,
    pub joint: JointPmf,
    /// Whether slightly negative cells were clamped to zero.
    pub clamped: bool,
}

pub fn reconstruct_truncated(md: &ModalDecomposition, k: usize) -> Result<TruncatedJoint> {
    if k > md.k() {
        return Err(Error::KOutOfRange { k, max: md.k() });
    }
    let nx = md.px.len();
    let ny = md.py.len();
    let mut probs = Matrix::from_fn(nx, ny, |x, y| {
        md.px.probs[x] * md.py.probs[y] * (1.0 + md.score(k, x, y))
    });
    let mut clamped = false;
    for x in 0..nx {
        for y in 0..ny {
            let v = probs[(x, y)];
            if v < -CLAMP_TOL {
                return Err(Error::NegativeCell {
                    x: md.px.alphabet.symbol(x).to_string(),
                    y: md.py.alphabet.symbol(y).to_string(),
                    value: v,
                });
            }
            if v < 0.0 {
                probs[(x, y)] = 0.0;
                clamped = true;
            }
        }
    }
    let total: f64 = probs.as_slice().iter().sum();
    let joint = JointPmf::new(
        md.px.alphabet.clone(),
        md.py.alphabet.clone(),
        probs.scale(1.0 / total),
    )?;
    Ok(TruncatedJoint { k, joint, clamped })
}

/// ½ Σ_{i≤k} σ_i², the local approximation of I(X;Y).
pub fn local_mi(md: &ModalDecomposition, k: usize) -> Result<f64> {
    if k > md.k() {
        return Err(Error::KOutOfRange { k, max: md.k() });
    }
    Ok(0.5 * md.sigmas[..k].iter().map(|s| s * s).sum::<f64>())
}

/// Rank-k posterior. `YGivenX` gives rows x with P^(k)(y|x) = P_Y(y)(1 + Σ σ f g).
pub fn posterior_truncated(md: &ModalDecomposition, k: usize, direction: Direction) -> Result<Matrix> {
    if k > md.k() {
        return Err(Error::KOutOfRange { k, max: md.k() });
    }
    let (nx, ny) = (md.px.len(), md.py.len());
    Ok(match direction {
        Direction::YGivenX => {
            Matrix::from_fn(nx, ny, |x, y| md.py.probs[y] * (1.0 + md.score(k, x, y)))
        }
        Direction::XGivenY => {
            Matrix::from_fn(ny, nx, |y, x| md.px.probs[x] * (1.0 + md.score(k, x, y)))
        }
    })
}

/// Discretised standard bivariate normal with correlation `rho` on a square
/// grid of `points` nodes per axis spanning [-half_width, half_width].
pub fn gaussian_grid_joint(rho: f64, points: usize, half_width: f64) -> Result<JointPmf> {
    let step = 2.0 * half_width / (points as f64 - 1.0);
    let node = |i: usize| -half_width + step * i as f64;
    let c = 1.0 / (1.0 - rho * rho);
    let dens = Matrix::from_fn(points, points, |i, j| {
        let (x, y) = (node(i), node(j));
        (-0.5 * c * (x * x - 2.0 * rho * x * y + y * y)).exp()
    });
    let total: f64 = dens.as_slice().iter().sum();
    let alphabet = Alphabet::new((0..points).map(|i| format!("{:.6}", node(i))));
    JointPmf::new(alphabet.clone(), alphabet, dens.scale(1.0 / total))
}

/// Top-k mode strengths of the discretised Gaussian, to compare with ρ^i.
pub fn mehler_check(rho: f64, k: usize) -> Result<Vec<f64>> {
    let joint = gaussian_grid_joint(rho, 201, 6.0)?;
    let cdm = build_cdm(&joint)?;
    let svd = svd_oracle(&cdm.matrix)?;
    Ok(svd.sigma[..k].to_vec())
}
