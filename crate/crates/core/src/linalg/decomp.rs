use crate::error::{Error, Result};
use crate::linalg::matrix::{dot, norm2, Matrix};

const QR_RANK_TOL: f64 = 1e-13;
const CHOLESKY_PIVOT_TOL: f64 = 1e-13;
const SYMMETRY_TOL: f64 = 1e-10;
const JACOBI_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 60;

/// Thin QR factorisation `A = Q R` with `Q` m×n orthonormal and `R` upper
/// triangular with a nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct Qr {
    pub q: Matrix,
    pub r: Matrix,
}

/// Householder thin QR. Fails with `RankDeficient` at the first column whose
/// remaining norm drops below 1e-13.
pub fn thin_qr(a: &Matrix) -> Result<Qr> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::ShapeMismatch(format!("thin QR needs rows >= cols, got {m}x{n}")));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let x: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let alpha = norm2(&x);
        if alpha < QR_RANK_TOL {
            return Err(Error::RankDeficient { column: k });
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x;
        v[0] += sign * alpha;
        let vn = norm2(&v);
        for vi in v.iter_mut() {
            *vi /= vn;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            for i in k..m {
                r[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
        reflectors.push(v);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
    let mut q = Matrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        for j in 0..n {
            let s: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
    }
    let mut r_thin = Matrix::from_fn(n, n, |i, j| if j >= i { r[(i, j)] } else { 0.0 });
    for k in 0..n {
        if r_thin[(k, k)] < 0.0 {
            for j in k..n {
                r_thin[(k, j)] = -r_thin[(k, j)];
            }
            for i in 0..m {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    Ok(Qr { q, r: r_thin })
}

/// Cholesky factor `S = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    pub l: Matrix,
}

pub fn cholesky(s: &Matrix) -> Result<Cholesky> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::ShapeMismatch(format!("Cholesky of {}x{}", n, s.cols())));
    }
    if !s.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric);
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = s[(j, j)] - (0..j).map(|p| l[(j, p)] * l[(j, p)]).sum::<f64>();
        if !(d > CHOLESKY_PIVOT_TOL) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let v = s[(i, j)] - (0..j).map(|p| l[(i, p)] * l[(j, p)]).sum::<f64>();
            l[(i, j)] = v / ljj;
        }
    }
    Ok(Cholesky { l })
}

impl Cholesky {
    /// Solves `L X = B`.
    pub fn solve_l(&self, b: &Matrix) -> Matrix {
        solve_lower(&self.l, b)
    }

    /// Solves `Lᵀ X = B`.
    pub fn solve_lt(&self, b: &Matrix) -> Matrix {
        solve_lower_transpose(&self.l, b)
    }

    /// Solves `S X = B`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        self.solve_lt(&self.solve_l(b))
    }

    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.l.rows())).symmetrize()
    }

    pub fn l_inverse(&self) -> Matrix {
        self.solve_l(&Matrix::identity(self.l.rows()))
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.l.rows()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

pub fn solve_lower(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let s: f64 = (0..i).map(|p| l[(i, p)] * x[(p, c)]).sum();
            x[(i, c)] = (x[(i, c)] - s) / l[(i, i)];
        }
    }
    x
}

pub fn solve_lower_transpose(l: &Matrix, b: &Matrix) -> Matrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|p| l[(p, i)] * x[(p, c)]).sum();
            x[(i, c)] = (x[(i, c)] - s) / l[(i, i)];
        }
    }
    x
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ`, σ descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        self.u
            .scale_cols(&self.sigma)
            .matmul(&self.v.transpose())
            .expect("consistent svd shapes")
    }
}

/// One-sided Jacobi SVD. The largest-magnitude component of each right
/// singular vector (first one on ties) is made positive.
pub fn svd_oracle(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    if m < n {
        let t = svd_tall(&a.transpose())?;
        let mut svd = Svd { u: t.v, sigma: t.sigma, v: t.u };
        fix_signs(&mut svd);
        return Ok(svd);
    }
    let mut svd = svd_tall(a)?;
    fix_signs(&mut svd);
    Ok(svd)
}

fn svd_tall(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut vcols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut converged = n < 2;
    // Columns below this squared norm are rounding noise; rotating them
    // against the rest never settles.
    let floor = (f64::EPSILON * a.frobenius_norm()).powi(2);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || alpha.min(beta) <= floor
                    || gamma.abs() <= JACOBI_TOL * alpha.sqrt() * beta.sqrt()
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut vcols, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: JACOBI_MAX_SWEEPS });
    }
    let mut order: Vec<(f64, usize)> = cols.iter().enumerate().map(|(j, c)| (norm2(c), j)).collect();
    order.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    for o in order.iter_mut() {
        if o.0 * o.0 <= floor {
            o.0 = 0.0;
        }
    }
    let sigma: Vec<f64> = order.iter().map(|o| o.0).collect();
    let mut ucols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = 0;
    for &(s, j) in &order {
        if s > 0.0 {
            ucols.push(cols[j].iter().map(|x| x / s).collect());
        } else {
            missing += 1;
        }
    }
    if missing > 0 {
        let extra = complete_orthonormal(&ucols, m, missing);
        ucols.extend(extra);
    }
    let u = Matrix::from_cols(&ucols)?;
    let vsorted: Vec<Vec<f64>> = order.iter().map(|&(_, j)| vcols[j].clone()).collect();
    let v = Matrix::from_cols(&vsorted)?;
    Ok(Svd {
        u: if n == 0 { Matrix::zeros(m, 0) } else { u },
        sigma,
        v: if n == 0 { Matrix::zeros(0, 0) } else { v },
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

fn fix_signs(svd: &mut Svd) {
    for j in 0..svd.sigma.len() {
        let v = svd.v.col(j);
        if leading_sign(&v) < 0.0 {
            for i in 0..svd.v.rows() {
                svd.v[(i, j)] = -svd.v[(i, j)];
            }
            for i in 0..svd.u.rows() {
                svd.u[(i, j)] = -svd.u[(i, j)];
            }
        }
    }
}

/// Sign of the first component whose magnitude is maximal (within 1e-12).
pub fn leading_sign(v: &[f64]) -> f64 {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match v.iter().find(|x| x.abs() >= max - 1e-12) {
        Some(&x) if x < 0.0 => -1.0,
        _ => 1.0,
    }
}

/// Returns `count` unit vectors orthogonal to `basis` and to each other,
/// chosen greedily from the standard basis.
pub fn complete_orthonormal(basis: &[Vec<f64>], dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut all: Vec<Vec<f64>> = basis.to_vec();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for i in 0..dim {
            let mut r: Vec<f64> = (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
            for _ in 0..2 {
                for b in &all {
                    let c = dot(&r, b);
                    for (x, y) in r.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            let nr = norm2(&r);
            if best.as_ref().is_none_or(|(bn, _)| nr > *bn + 1e-12) {
                best = Some((nr, r));
            }
        }
        let Some((nr, r)) = best else { break };
        if nr < 1e-8 {
            break;
        }
        let u: Vec<f64> = r.iter().map(|x| x / nr).collect();
        all.push(u.clone());
        out.push(u);
    }
    out
}

/// Modified Gram–Schmidt of `vectors` against `fixed` (assumed orthonormal)
/// and each other. Vectors that collapse are replaced by completions.
pub fn orthonormalize_against(fixed: &[Vec<f64>], vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = fixed.first().or(vectors.first()).map_or(0, |v| v.len());
    let mut basis: Vec<Vec<f64>> = fixed.to_vec();
    let mut out = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = norm2(v);
        let mut r = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&r, b);
                for (x, y) in r.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let nr = norm2(&r);
        let u = if scale > 0.0 && nr > 1e-8 * scale.max(1e-300) && nr > 1e-150 {
            r.iter().map(|x| x / nr).collect()
        } else {
            match complete_orthonormal(&basis, dim, 1).pop() {
                Some(u) => u,
                None => vec![0.0; dim],
            }
        };
        basis.push(u.clone());
        out.push(u);
    }
    out
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Eigenvalues descending, eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn sym_eigen(s: &Matrix) -> Result<SymEigen> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::ShapeMismatch(format!("eigen of {}x{}", n, s.cols())));
    }
    if !s.is_symmetric(SYMMETRY_TOL * s.max_abs().max(1.0)) {
        return Err(Error::NotSymmetric);
    }
    let mut a = s.symmetrize();
    let mut v = Matrix::identity(n);
    let mut converged = n < 2;
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let total = a.frobenius_norm().powi(2);
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations: 100 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    for j in 0..n {
        if leading_sign(&vectors.col(j)) < 0.0 {
            for i in 0..n {
                vectors[(i, j)] = -vectors[(i, j)];
            }
        }
    }
    Ok(SymEigen { values, vectors })
}

/// Symmetric positive semidefinite square root and Moore–Penrose inverse
/// helpers built on the Jacobi eigensolver.
pub fn sym_pinv(s: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let e = sym_eigen(s)?;
    let n = s.rows();
    let top = e.values.first().map_or(0.0, |v| v.abs());
    let inv: Vec<f64> = e
        .values
        .iter()
        .map(|&l| if l.abs() > rel_tol * top.max(f64::MIN_POSITIVE) { 1.0 / l } else { 0.0 })
        .collect();
    let vd = e.vectors.scale_cols(&inv);
    let out = vd.matmul(&e.vectors.transpose())?;
    debug_assert_eq!(out.rows(), n);
    Ok(out.symmetrize())
}

/// Matrix norms derived from the singular values.
#[derive(Debug, Clone)]
pub struct Norms {
    pub frobenius: f64,
    pub spectral: f64,
    pub nuclear: f64,
    pub singular_values: Vec<f64>,
}

impl Norms {
    /// Sum of the `k` largest singular values.
    pub fn ky_fan(&self, k: usize) -> Result<f64> {
        if k == 0 || k > self.singular_values.len() {
            return Err(Error::KOutOfRange { k, max: self.singular_values.len() });
        }
        Ok(self.singular_values[..k].iter().sum())
    }
}

pub fn norms(a: &Matrix) -> Result<Norms> {
    let svd = svd_oracle(a)?;
    Ok(Norms {
        frobenius: a.frobenius_norm(),
        spectral: svd.sigma.first().copied().unwrap_or(0.0),
        nuclear: svd.sigma.iter().sum(),
        singular_values: svd.sigma,
    })
}

pub fn ky_fan(a: &Matrix, k: usize) -> Result<f64> {
    norms(a)?.ky_fan(k)
}
