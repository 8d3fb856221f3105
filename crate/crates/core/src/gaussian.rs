//! Jointly Gaussian (X, Y): canonical correlation matrix, CCA, mutual and
//! common information, and rank-k linear predictors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, leading_sign, svd_oracle, sym_eigen, Cholesky, Matrix};
use crate::modal::{build_dtm, check_k};
use crate::prob::{Alphabet, JointPmf};

const VALIDITY_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-12;

/// Zero-mean jointly Gaussian model; `cov_xy` is E[X Yᵀ] (dim_x × dim_y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGaussian")]
pub struct GaussianJoint {
    pub dim_x: usize,
    pub dim_y: usize,
    pub cov_x: Matrix,
    pub cov_y: Matrix,
    pub cov_xy: Matrix,
}

#[derive(Deserialize)]
struct RawGaussian {
    dim_x: usize,
    dim_y: usize,
    cov_x: Matrix,
    cov_y: Matrix,
    cov_xy: Matrix,
}

impl TryFrom<RawGaussian> for GaussianJoint {
    type Error = Error;
    fn try_from(r: RawGaussian) -> Result<Self> {
        GaussianJoint::new(r.cov_x, r.cov_y, r.cov_xy).and_then(|g| {
            if g.dim_x != r.dim_x || g.dim_y != r.dim_y {
                Err(Error::ShapeMismatch("declared dimensions differ from covariances".into()))
            } else {
                Ok(g)
            }
        })
    }
}

impl GaussianJoint {
    /// Validates shapes, positive definiteness of the marginal covariances
    /// and that every canonical correlation is at most 1.
    pub fn new(cov_x: Matrix, cov_y: Matrix, cov_xy: Matrix) -> Result<Self> {
        let dx = cov_x.rows();
        let dy = cov_y.rows();
        if cov_x.cols() != dx || cov_y.cols() != dy || cov_xy.shape() != (dx, dy) {
            return Err(Error::ShapeMismatch(format!(
                "cov_x {:?}, cov_y {:?}, cov_xy {:?}",
                cov_x.shape(),
                cov_y.shape(),
                cov_xy.shape()
            )));
        }
        let g = GaussianJoint {
            dim_x: dx,
            dim_y: dy,
            cov_x,
            cov_y,
            cov_xy,
        };
        let s = svd_oracle(&g.ccm()?)?;
        if s.sigma.first().is_some_and(|&v| v > 1.0 + VALIDITY_TOL) {
            return Err(Error::NotPositiveDefinite {
                index: 0,
                pivot: 1.0 - s.sigma[0],
            });
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn cov_yx(&self) -> Matrix {
        self.cov_xy.transpose()
    }

    /// Covariance of the stacked vector (X, Y).
    pub fn joint_cov(&self) -> Matrix {
        let (dx, dy) = (self.dim_x, self.dim_y);
        Matrix::from_fn(dx + dy, dx + dy, |i, j| match (i < dx, j < dx) {
            (true, true) => self.cov_x[(i, j)],
            (true, false) => self.cov_xy[(i, j - dx)],
            (false, true) => self.cov_xy[(j, i - dx)],
            (false, false) => self.cov_y[(i - dx, j - dx)],
        })
    }

    /// Same marginals with a different cross-covariance.
    pub fn with_cross_cov(&self, cov_xy: Matrix) -> GaussianJoint {
        GaussianJoint {
            cov_xy,
            ..self.clone()
        }
    }

    fn chol_x(&self) -> Result<Cholesky> {
        cholesky(&self.cov_x)
    }

    fn chol_y(&self) -> Result<Cholesky> {
        cholesky(&self.cov_y)
    }

    /// Canonical correlation matrix L_Y⁻¹ Λ_YX L_X⁻ᵀ (dim_y × dim_x).
    pub fn ccm(&self) -> Result<Matrix> {
        let lx = self.chol_x()?;
        let ly = self.chol_y()?;
        let a = ly.solve_l(&self.cov_yx());
        Ok(lx.solve_l(&a.transpose()).transpose())
    }
}

/// Canonical directions: f_i(x) = F[:, i]ᵀ x, g_i(y) = G[:, i]ᵀ y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaDecomposition {
    pub sigmas: Vec<f64>,
    pub f: Matrix,
    pub g: Matrix,
}

pub fn cca(model: &GaussianJoint, k: usize) -> Result<CcaDecomposition> {
    check_k(k, model.dim_x.min(model.dim_y))?;
    let lx = model.chol_x()?;
    let ly = model.chol_y()?;
    let b = model.ccm()?;
    let svd = svd_oracle(&b)?;
    let psi_x = svd.v.leading_cols(k);
    let psi_y = svd.u.leading_cols(k);
    Ok(CcaDecomposition {
        sigmas: svd.sigma[..k].to_vec(),
        f: lx.solve_lt(&psi_x),
        g: ly.solve_lt(&psi_y),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMi {
    /// −½ ln det(I − B Bᵀ).
    pub exact: f64,
    pub sigmas: Vec<f64>,
}

impl GaussianMi {
    /// ½ Σ_{i≤k} σ_i².
    pub fn local(&self, k: usize) -> f64 {
        0.5 * self.sigmas.iter().take(k).map(|s| s * s).sum::<f64>()
    }
}

fn sigmas_below_one(model: &GaussianJoint) -> Result<Vec<f64>> {
    let s = svd_oracle(&model.ccm()?)?.sigma;
    if s.first().is_some_and(|&v| v >= 1.0 - SINGULAR_TOL) {
        return Err(Error::Singular("a canonical correlation equals 1".into()));
    }
    Ok(s)
}

pub fn gaussian_mi(model: &GaussianJoint) -> Result<GaussianMi> {
    let sigmas = sigmas_below_one(model)?;
    let exact = -0.5 * sigmas.iter().map(|s| (-s * s).ln_1p()).sum::<f64>();
    Ok(GaussianMi { exact, sigmas })
}

/// Wyner-type common information and the covariances of the common part W
/// (Λ_W = I) that makes X and Y conditionally independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCommonInfo {
    pub value: f64,
    pub sigmas: Vec<f64>,
    pub cov_xw: Matrix,
    pub cov_yw: Matrix,
}

pub fn gaussian_common_info(model: &GaussianJoint) -> Result<GaussianCommonInfo> {
    let sigmas = sigmas_below_one(model)?;
    let k = sigmas.len();
    let value = 0.5 * sigmas.iter().map(|s| ((1.0 + s) / (1.0 - s)).ln()).sum::<f64>();
    let c = cca(model, k)?;
    let root: Vec<f64> = sigmas.iter().map(|s| s.sqrt()).collect();
    Ok(GaussianCommonInfo {
        value,
        cov_xw: model.cov_x.matmul(&c.f)?.scale_cols(&root),
        cov_yw: model.cov_y.matmul(&c.g)?.scale_cols(&root),
        sigmas,
    })
}

/// Y = X + ν with ν ~ N(0, noise_var I): the closed-form canonical
/// correlations and the CCA computed from the model.
#[derive(Debug, Clone)]
pub struct PcaCase {
    pub model: GaussianJoint,
    pub expected_sigmas: Vec<f64>,
    /// Eigenvectors of Λ_X as columns, eigenvalues descending.
    pub principal_directions: Matrix,
    pub cca: CcaDecomposition,
}

pub fn pca_case(cov_x: &Matrix, noise_var: f64) -> Result<PcaCase> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let d = cov_x.rows();
    let cov_y = cov_x.add(&Matrix::identity(d).scale(noise_var))?;
    let model = GaussianJoint::new(cov_x.clone(), cov_y, cov_x.clone())?;
    let eig = sym_eigen(cov_x)?;
    let expected_sigmas = eig
        .values
        .iter()
        .map(|&l| (1.0 + noise_var / l).powf(-0.5))
        .collect();
    let cca = cca(&model, d)?;
    Ok(PcaCase {
        model,
        expected_sigmas,
        principal_directions: eig.vectors,
        cca,
    })
}

/// Rank-k cross-covariance closest in KL, and the predictor it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlRegression {
    /// Λ_YX^(k) = Λ_Y G_k Σ_k F_kᵀ Λ_X.
    pub cross_cov: Matrix,
    /// Λ_YX^(k) Λ_X⁻¹.
    pub predictor: Matrix,
}

pub fn rank_k_regression_kl(model: &GaussianJoint, k: usize) -> Result<KlRegression> {
    let c = cca(model, k)?;
    let cross_cov = model
        .cov_y
        .matmul(&c.g.scale_cols(&c.sigmas))?
        .matmul(&c.f.transpose())?
        .matmul(&model.cov_x)?;
    let predictor = model.chol_x()?.solve(&cross_cov.transpose()).transpose();
    Ok(KlRegression { cross_cov, predictor })
}

/// Rank-k linear estimator of Y from X with least mean-square error.
pub fn rank_k_regression_mmse(model: &GaussianJoint, k: usize) -> Result<Matrix> {
    check_k(k, model.dim_x.min(model.dim_y))?;
    let lx = model.chol_x()?;
    // A = Λ_YX L_X⁻ᵀ
    let a = lx.solve_l(&model.cov_xy).transpose();
    let svd = svd_oracle(&a)?;
    let ak = svd
        .u
        .leading_cols(k)
        .scale_cols(&svd.sigma[..k])
        .matmul(&svd.v.leading_cols(k).transpose())?;
    // Γ = A_k L_X⁻¹
    Ok(lx.solve_lt(&ak.transpose()).transpose())
}

/// E‖Y − Γ X‖².
pub fn prediction_mse(model: &GaussianJoint, gamma: &Matrix) -> Result<f64> {
    let cross = gamma.matmul(&model.cov_xy)?.trace();
    let quad = gamma.matmul(&model.cov_x)?.matmul(&gamma.transpose())?.trace();
    Ok(model.cov_y.trace() - 2.0 * cross + quad)
}

/// Attribute y* = Λ_Y G_k Σ_k F_kᵀ x matched to an observation x.
pub fn gaussian_attribute_match(model: &GaussianJoint, k: usize, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim_x {
        return Err(Error::ShapeMismatch(format!("x has length {}, expected {}", x.len(), model.dim_x)));
    }
    rank_k_regression_kl(model, k)?.predictor.matvec(x)
}

/// D(N(0, Σ_p) ‖ N(0, Σ_q)).
pub fn gaussian_kl(cov_p: &Matrix, cov_q: &Matrix) -> Result<f64> {
    let cp = cholesky(cov_p)?;
    let cq = cholesky(cov_q)?;
    let d = cov_p.rows() as f64;
    let tr = cq.solve(cov_p).trace();
    Ok(0.5 * (tr - d + cq.log_det() - cp.log_det()))
}

/// Π^Y B Π^Xᵀ for a joint on real-vector alphabets, next to the CCM of the
/// matching Gaussian moments.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmProjection {
    pub projected: Matrix,
    pub ccm: Matrix,
}

/// Symbols are comma-separated reals, e.g. "1.5" or "0,-1".
fn embed(alphabet: &Alphabet) -> Result<Vec<Vec<f64>>> {
    let out: Vec<Vec<f64>> = alphabet
        .symbols()
        .iter()
        .map(|s| {
            s.split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: 0,
                        msg: format!("symbol '{s}' is not a real vector"),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let d = out.first().map_or(0, |v| v.len());
    if out.iter().any(|v| v.len() != d) {
        return Err(Error::ShapeMismatch("embedded symbols differ in dimension".into()));
    }
    Ok(out)
}

fn whitened_embedding(points: &[Vec<f64>], p: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>, Matrix)> {
    let d = points[0].len();
    let mean: Vec<f64> = (0..d).map(|c| points.iter().zip(p).map(|(v, w)| w * v[c]).sum()).collect();
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(a, m)| a - m).collect())
        .collect();
    let cov = Matrix::from_fn(d, d, |a, b| centered.iter().zip(p).map(|(v, w)| w * v[a] * v[b]).sum());
    let ch = cholesky(&cov).map_err(|_| Error::SingularEmbedding)?;
    let whitened = centered
        .iter()
        .map(|v| ch.solve_l(&Matrix::column_vector(v)).col(0))
        .collect();
    Ok((whitened, mean, cov))
}

pub fn dtm_ccm_projection(joint: &JointPmf) -> Result<DtmProjection> {
    let xs = embed(&joint.x)?;
    let ys = embed(&joint.y)?;
    let px = joint.marginal_x();
    let py = joint.marginal_y();
    let (xw, mx, cov_x) = whitened_embedding(&xs, &px.probs)?;
    let (yw, my, cov_y) = whitened_embedding(&ys, &py.probs)?;
    let dx = mx.len();
    let dy = my.len();
    let pi_x = Matrix::from_fn(dx, joint.nx(), |a, i| px.probs[i].sqrt() * xw[i][a]);
    let pi_y = Matrix::from_fn(dy, joint.ny(), |b, j| py.probs[j].sqrt() * yw[j][b]);
    let b = build_dtm(joint).matrix;
    let projected = pi_y.matmul(&b)?.matmul(&pi_x.transpose())?;
    let cov_xy = Matrix::from_fn(dx, dy, |a, c| {
        let mut s = 0.0;
        for i in 0..joint.nx() {
            for j in 0..joint.ny() {
                s += joint.probs[(i, j)] * (xs[i][a] - mx[a]) * (ys[j][c] - my[c]);
            }
        }
        s
    });
    let model = GaussianJoint {
        dim_x: dx,
        dim_y: dy,
        cov_x,
        cov_y,
        cov_xy,
    };
    Ok(DtmProjection {
        projected,
        ccm: model.ccm()?,
    })
}

/// Sign convention shared with the discrete case: the right singular vector
/// ψ^X = L_Xᵀ f has a positive largest component.
pub fn canonical_signs(model: &GaussianJoint, c: &mut CcaDecomposition) -> Result<()> {
    let lt = model.chol_x()?.l.transpose();
    for i in 0..c.sigmas.len() {
        if leading_sign(&lt.matvec(&c.f.col(i))?) < 0.0 {
            let f: Vec<f64> = c.f.col(i).iter().map(|a| -a).collect();
            let g: Vec<f64> = c.g.col(i).iter().map(|a| -a).collect();
            c.f.set_col(i, &f);
            c.g.set_col(i, &g);
        }
    }
    Ok(())
}
