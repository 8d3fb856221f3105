//! Alternating conditional expectations (ACE) for the top-k modes, on a
//! discrete joint or on a Gaussian covariance model, plus plain orthogonal
//! iteration on a matrix.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{CcaDecomposition, GaussianJoint};
use crate::linalg::{cholesky, leading_sign, orthonormalize_against, svd_oracle, thin_qr, Cholesky, Matrix};
use crate::modal::{check_k, from_feature_vectors, max_modes, ModalDecomposition};
use crate::prob::{conditional, Direction, JointPmf, Pmf};

/// Whitened features must be orthonormal to this accuracy after a jittered retry.
const WHITEN_CHECK_TOL: f64 = 1e-6;
/// A Gram matrix whose diagonal is below this has lost every direction.
const COLLAPSE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AceOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub jitter: f64,
}

impl Default for AceOptions {
    fn default() -> Self {
        AceOptions {
            tol: 1e-10,
            max_iters: 10_000,
            seed: 0,
            jitter: 1e-12,
        }
    }
}

impl AceOptions {
    pub fn with_seed(seed: u64) -> Self {
        AceOptions {
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || self.max_iters == 0 || !(self.jitter >= 0.0) {
            return Err(Error::InvalidArgument(
                "tol and jitter must be nonnegative, max_iters positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration value of the ascent objective E[f̄ᵀĝ], which rises to the
/// sum of the squared top-k mode strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AceTrace {
    pub values: Vec<f64>,
    pub converged: bool,
}

impl AceTrace {
    fn new() -> Self {
        AceTrace {
            values: Vec::new(),
            converged: false,
        }
    }

    /// Records a value and reports whether the increase is within
    /// tol·max(1, |v|).
    fn push(&mut self, v: f64, tol: f64) -> bool {
        let flat = match self.values.last() {
            Some(&prev) => v - prev <= tol * v.abs().max(1.0),
            None => false,
        };
        self.values.push(v);
        flat
    }
}

/// Distance moved by the feature subspace between iterations. The trace
/// error is quadratic in the subspace error, so a flat trace alone stops
/// too early when the gap below σ_k is small.
struct SubspaceStep {
    prev: Option<Matrix>,
    last: f64,
}

impl SubspaceStep {
    fn new() -> Self {
        SubspaceStep {
            prev: None,
            last: f64::INFINITY,
        }
    }

    /// `basis` has orthonormal columns. True once the step is within `tol`
    /// or has stopped shrinking (rounding floor).
    fn settled(&mut self, basis: Matrix, tol: f64) -> Result<bool> {
        let step = match &self.prev {
            Some(p) => basis.sub(&p.matmul(&p.transpose().matmul(&basis)?)?)?.frobenius_norm(),
            None => f64::INFINITY,
        };
        let done = step.is_finite() && (step <= tol || step >= self.last);
        self.prev = Some(basis);
        self.last = step;
        Ok(done)
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(&mut *rng)).collect();
    Matrix::new(rows, cols, data).expect("sized buffer")
}

enum Whitened {
    Features(Matrix),
    Collapsed,
}

/// F̂ = F L⁻ᵀ where Gram = L Lᵀ, with one jittered retry.
fn whiten(feats: &Matrix, gram: &Matrix, jitter: f64, iteration: usize) -> Result<Whitened> {
    let gram = gram.symmetrize();
    let apply = |c: &Cholesky| c.solve_l(&feats.transpose()).transpose();
    if let Ok(c) = cholesky(&gram) {
        return Ok(Whitened::Features(apply(&c)));
    }
    let k = gram.rows();
    if (0..k).all(|i| gram[(i, i)] <= COLLAPSE_TOL) {
        return Ok(Whitened::Collapsed);
    }
    let jittered = gram.add(&Matrix::identity(k).scale(jitter))?;
    let c = cholesky(&jittered).map_err(|_| Error::RankDeficientWhitening { iteration })?;
    // The jitter must not be what makes the features look independent.
    let li = c.l_inverse();
    let check = li.matmul(&gram)?.matmul(&li.transpose())?;
    if check.max_abs_diff(&Matrix::identity(k)) > WHITEN_CHECK_TOL {
        return Err(Error::RankDeficientWhitening { iteration });
    }
    Ok(Whitened::Features(apply(&c)))
}

/// Weighted Gram matrix Fᵀ diag(p) F.
fn weighted_gram(f: &Matrix, p: &[f64]) -> Matrix {
    f.transpose().matmul(&f.scale_rows(p)).expect("matching shapes")
}

fn center(f: &mut Matrix, p: &[f64]) {
    for j in 0..f.cols() {
        let m: f64 = (0..f.rows()).map(|i| p[i] * f[(i, j)]).sum();
        for i in 0..f.rows() {
            f[(i, j)] -= m;
        }
    }
}

/// Step-by-step state of ACE on a discrete joint. Each method is one step
/// of the alternating scheme; [`ace_discrete`] drives them in order.
#[derive(Debug, Clone)]
pub struct AceDiscrete {
    pub px: Pmf,
    pub py: Pmf,
    joint: Matrix,
    x_given_y: Matrix,
    y_given_x: Matrix,
    /// Current X features, |X| × k.
    pub f: Matrix,
    /// Current Y features, |Y| × k.
    pub g: Matrix,
    jitter: f64,
    pub iteration: usize,
    pub collapsed: bool,
}

impl AceDiscrete {
    pub fn new(joint: &JointPmf, k: usize, opts: &AceOptions) -> Result<Self> {
        opts.validate()?;
        check_k(k, max_modes(joint.nx(), joint.ny()))?;
        let x_given_y = conditional(joint, Direction::XGivenY)?;
        let y_given_x = conditional(joint, Direction::YGivenX)?;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let f = gaussian_matrix(&mut rng, joint.nx(), k);
        let mut state = AceDiscrete {
            px: joint.marginal_x(),
            py: joint.marginal_y(),
            joint: joint.probs.clone(),
            x_given_y,
            y_given_x,
            f,
            g: Matrix::zeros(joint.ny(), k),
            jitter: opts.jitter,
            iteration: 1,
            collapsed: false,
        };
        // The initial draw is replaced once if it cannot be whitened.
        let mut probe = state.clone();
        probe.center_f();
        if probe.whiten_f().is_err() {
            state.f = gaussian_matrix(&mut rng, joint.nx(), k);
        }
        Ok(state)
    }

    pub fn center_f(&mut self) {
        center(&mut self.f, &self.px.probs);
    }

    pub fn whiten_f(&mut self) -> Result<()> {
        let gram = weighted_gram(&self.f, &self.px.probs);
        match whiten(&self.f, &gram, self.jitter, self.iteration)? {
            Whitened::Features(m) => self.f = m,
            Whitened::Collapsed => self.collapsed = true,
        }
        Ok(())
    }

    /// g(y) ← E[f(X) | Y = y].
    pub fn conditional_g(&mut self) {
        self.g = self.x_given_y.matmul(&self.f).expect("matching shapes");
    }

    pub fn center_g(&mut self) {
        center(&mut self.g, &self.py.probs);
    }

    pub fn whiten_g(&mut self) -> Result<()> {
        let gram = weighted_gram(&self.g, &self.py.probs);
        match whiten(&self.g, &gram, self.jitter, self.iteration)? {
            Whitened::Features(m) => self.g = m,
            Whitened::Collapsed => self.collapsed = true,
        }
        Ok(())
    }

    /// f(x) ← E[g(Y) | X = x].
    pub fn conditional_f(&mut self) {
        self.f = self.y_given_x.matmul(&self.g).expect("matching shapes");
    }

    /// E[f(X)ᵀ g(Y)].
    pub fn objective(&self) -> f64 {
        self.f
            .transpose()
            .matmul(&self.joint.matmul(&self.g).expect("matching shapes"))
            .expect("matching shapes")
            .trace()
    }

    pub fn feature_gram_x(&self) -> Matrix {
        weighted_gram(&self.f, &self.px.probs)
    }

    pub fn feature_gram_y(&self) -> Matrix {
        weighted_gram(&self.g, &self.py.probs)
    }

    /// One full pass; returns the objective, or `None` once the features collapse.
    pub fn sweep(&mut self) -> Result<Option<f64>> {
        self.center_f();
        self.whiten_f()?;
        if self.collapsed {
            return Ok(None);
        }
        self.conditional_g();
        self.center_g();
        self.whiten_g()?;
        if self.collapsed {
            return Ok(None);
        }
        self.conditional_f();
        let v = self.objective();
        self.iteration += 1;
        Ok(Some(v))
    }

    /// Rotates the converged subspaces onto individual modes.
    fn finish(mut self) -> Result<ModalDecomposition> {
        let k = self.f.cols();
        let sx = self.px.sqrt();
        let sy = self.py.sqrt();
        if !self.collapsed {
            self.center_f();
            self.whiten_f()?;
        }
        let (sigmas, psi_x, psi_y) = if self.collapsed {
            let zx = vec![vec![0.0; sx.len()]; k];
            let zy = vec![vec![0.0; sy.len()]; k];
            (
                vec![0.0; k],
                orthonormalize_against(&[sx.clone()], &zx),
                orthonormalize_against(&[sy.clone()], &zy),
            )
        } else {
            let m = self
                .f
                .transpose()
                .matmul(&self.joint.matmul(&self.g)?)?;
            let svd = svd_oracle(&m)?;
            let fr = self.f.matmul(&svd.u)?.scale_rows(&sx);
            let gr = self.g.matmul(&svd.v)?.scale_rows(&sy);
            let fx: Vec<Vec<f64>> = (0..k).map(|i| fr.col(i)).collect();
            let gy: Vec<Vec<f64>> = (0..k).map(|i| gr.col(i)).collect();
            (svd.sigma, orthonormalize_against(&[sx.clone()], &fx), orthonormalize_against(&[sy.clone()], &gy))
        };
        let mut psi_x = psi_x;
        let mut psi_y = psi_y;
        for i in 0..k {
            if leading_sign(&psi_x[i]) < 0.0 {
                psi_x[i].iter_mut().for_each(|a| *a = -*a);
                psi_y[i].iter_mut().for_each(|a| *a = -*a);
            }
        }
        Ok(from_feature_vectors(sigmas, &psi_x, &psi_y, &self.px, &self.py))
    }
}

/// ACE on a discrete joint with strictly positive marginals (true or
/// empirical). Returns the top-k modes and the ascent trace.
pub fn ace_discrete(joint: &JointPmf, k: usize, opts: &AceOptions) -> Result<(ModalDecomposition, AceTrace)> {
    let mut state = AceDiscrete::new(joint, k, opts)?;
    let mut trace = AceTrace::new();
    let mut step = SubspaceStep::new();
    let sy = state.py.sqrt();
    for _ in 0..opts.max_iters {
        match state.sweep()? {
            Some(v) => {
                let flat = trace.push(v, opts.tol);
                if step.settled(state.g.scale_rows(&sy), opts.tol)? && flat {
                    trace.converged = true;
                    break;
                }
            }
            None => {
                trace.values.push(0.0);
                trace.converged = true;
                break;
            }
        }
    }
    Ok((state.finish()?, trace))
}

/// Top-k singular triplets of a matrix found by orthogonal iteration.
#[derive(Debug, Clone)]
pub struct SubspaceSvd {
    pub u: Matrix,
    pub sigmas: Vec<f64>,
    pub v: Matrix,
    pub trace: AceTrace,
}

fn orthonormal_columns(w: &Matrix) -> Matrix {
    match thin_qr(w) {
        Ok(qr) => qr.q,
        Err(_) => {
            let cols: Vec<Vec<f64>> = (0..w.cols()).map(|j| w.col(j)).collect();
            Matrix::from_cols(&orthonormalize_against(&[], &cols)).expect("consistent columns")
        }
    }
}

/// Alternating QR iteration V ← qr(Aᵀ qr(A V)). The trace records ‖AᵀU‖_F².
pub fn orthogonal_iteration(a: &Matrix, k: usize, opts: &AceOptions) -> Result<SubspaceSvd> {
    opts.validate()?;
    let (m, n) = a.shape();
    check_k(k, m.min(n))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = orthonormal_columns(&gaussian_matrix(&mut rng, n, k));
    let at = a.transpose();
    let mut u = Matrix::zeros(m, k);
    let mut trace = AceTrace::new();
    let mut step = SubspaceStep::new();
    for _ in 0..opts.max_iters {
        u = orthonormal_columns(&a.matmul(&v)?);
        let z = at.matmul(&u)?;
        let value = z.frobenius_norm().powi(2);
        v = orthonormal_columns(&z);
        let flat = trace.push(value, opts.tol);
        if step.settled(v.clone(), opts.tol)? && flat {
            trace.converged = true;
            break;
        }
    }
    let small = u.transpose().matmul(&a.matmul(&v)?)?;
    let svd = svd_oracle(&small)?;
    Ok(SubspaceSvd {
        u: u.matmul(&svd.u)?,
        v: v.matmul(&svd.v)?,
        sigmas: svd.sigma,
        trace,
    })
}

/// ACE on a zero-mean Gaussian model, working with linear features
/// f(x) = Fᵀx, g(y) = Gᵀy.
pub fn ace_gaussian(model: &GaussianJoint, k: usize, opts: &AceOptions) -> Result<(CcaDecomposition, AceTrace)> {
    opts.validate()?;
    check_k(k, model.dim_x.min(model.dim_y))?;
    let chol_x = cholesky(&model.cov_x)?;
    let chol_y = cholesky(&model.cov_y)?;
    let cov_yx = model.cov_xy.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut f = gaussian_matrix(&mut rng, model.dim_x, k);
    let whiten_x = |f: &Matrix, it: usize| -> Result<Whitened> {
        let gram = f.transpose().matmul(&model.cov_x.matmul(f)?)?;
        whiten(f, &gram, opts.jitter, it)
    };
    if whiten_x(&f, 1).is_err() {
        f = gaussian_matrix(&mut rng, model.dim_x, k);
    }
    let mut g = Matrix::zeros(model.dim_y, k);
    let mut trace = AceTrace::new();
    let mut step = SubspaceStep::new();
    let lty = chol_y.l.transpose();
    let mut collapsed = false;
    for it in 1..=opts.max_iters {
        let fh = match whiten_x(&f, it)? {
            Whitened::Features(m) => m,
            Whitened::Collapsed => {
                collapsed = true;
                break;
            }
        };
        let gbar = chol_y.solve(&cov_yx.matmul(&fh)?);
        let gram_y = gbar.transpose().matmul(&model.cov_y.matmul(&gbar)?)?;
        g = match whiten(&gbar, &gram_y, opts.jitter, it)? {
            Whitened::Features(m) => m,
            Whitened::Collapsed => {
                collapsed = true;
                break;
            }
        };
        f = chol_x.solve(&model.cov_xy.matmul(&g)?);
        let value = g.transpose().matmul(&cov_yx.matmul(&f)?)?.trace();
        let flat = trace.push(value, opts.tol);
        if step.settled(lty.matmul(&g)?, opts.tol)? && flat {
            trace.converged = true;
            break;
        }
    }
    if collapsed {
        trace.values.push(0.0);
        trace.converged = true;
        let cca = crate::gaussian::cca(model, k)?;
        return Ok((
            CcaDecomposition {
                sigmas: vec![0.0; k],
                ..cca
            },
            trace,
        ));
    }
    let fh = match whiten_x(&f, opts.max_iters)? {
        Whitened::Features(m) => m,
        Whitened::Collapsed => f,
    };
    let m = fh.transpose().matmul(&model.cov_xy.matmul(&g)?)?;
    let svd = svd_oracle(&m)?;
    let mut fr = fh.matmul(&svd.u)?;
    let mut gr = g.matmul(&svd.v)?;
    let ltx = chol_x.l.transpose();
    for i in 0..k {
        let psi = ltx.matvec(&fr.col(i))?;
        if leading_sign(&psi) < 0.0 {
            let fc: Vec<f64> = fr.col(i).iter().map(|a| -a).collect();
            let gc: Vec<f64> = gr.col(i).iter().map(|a| -a).collect();
            fr.set_col(i, &fc);
            gr.set_col(i, &gc);
        }
    }
    Ok((
        CcaDecomposition {
            sigmas: svd.sigma,
            f: fr,
            g: gr,
        },
        trace,
    ))
}
