#![allow(dead_code)]

use modalfeat::gaussian::GaussianJoint;
use modalfeat::linalg::Matrix;
use modalfeat::prob::{Alphabet, JointPmf, Pmf};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/");
    std::fs::read_to_string(format!("{path}{name}")).unwrap()
}

/// Cells drawn uniformly from [lo, 1] and normalised.
pub fn random_positive_joint(rng: &mut ChaCha8Rng, nx: usize, ny: usize, lo: f64) -> JointPmf {
    let probs = Matrix::new(nx, ny, (0..nx * ny).map(|_| rng.random_range(lo..1.0)).collect()).unwrap();
    let total: f64 = probs.as_slice().iter().sum();
    JointPmf::new(Alphabet::numbered(nx), Alphabet::numbered(ny), probs.scale(1.0 / total)).unwrap()
}

/// Random joints with both alphabet sizes in 2..=max_size.
pub fn corpus(count: usize, max_size: usize, seed: u64) -> Vec<JointPmf> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let nx = r.random_range(2..=max_size);
            let ny = r.random_range(2..=max_size);
            random_positive_joint(&mut r, nx, ny, 0.05)
        })
        .collect()
}

pub fn random_pmf(rng: &mut ChaCha8Rng, n: usize) -> Pmf {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    Pmf::new(Alphabet::numbered(n), w.iter().map(|v| v / s).collect()).unwrap()
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values from nalgebra, descending.
pub fn na_singular_values(m: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// B̃(y, x) = (P(x,y) − P_X P_Y) / sqrt(P_X P_Y), written out directly.
pub fn cdm_by_hand(joint: &JointPmf) -> Matrix {
    let px: Vec<f64> = (0..joint.nx()).map(|x| joint.probs.row(x).iter().sum()).collect();
    let py: Vec<f64> = (0..joint.ny()).map(|y| (0..joint.nx()).map(|x| joint.probs[(x, y)]).sum()).collect();
    Matrix::from_fn(joint.ny(), joint.nx(), |y, x| {
        let d = px[x] * py[y];
        (joint.probs[(x, y)] - d) / d.sqrt()
    })
}

/// Orthogonal projector onto the span of the columns of `a`.
pub fn projector(a: &Matrix) -> Matrix {
    let q = to_na(a).qr().q();
    from_na(&(&q * q.transpose()))
}

/// k admissible features under `p`: zero mean, unit variance, uncorrelated.
/// Built from a nalgebra QR of [sqrt(p) | random].
pub fn random_admissible_features(rng: &mut ChaCha8Rng, p: &[f64], k: usize) -> Matrix {
    let n = p.len();
    let mut a = DMatrix::<f64>::zeros(n, k + 1);
    for i in 0..n {
        a[(i, 0)] = p[i].sqrt();
        for j in 1..=k {
            a[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let q = a.qr().q();
    Matrix::from_fn(n, k, |i, j| q[(i, j + 1)] / p[i].sqrt())
}

/// Natural-log mutual information of a dense table.
pub fn mi_by_hand(probs: &Matrix) -> f64 {
    let (nx, ny) = probs.shape();
    let px: Vec<f64> = (0..nx).map(|x| probs.row(x).iter().sum()).collect();
    let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| probs[(x, y)]).sum()).collect();
    let mut s = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            let v = probs[(x, y)];
            if v > 0.0 {
                s += v * (v / (px[x] * py[y])).ln();
            }
        }
    }
    s
}

/// Least-squares slope of ln(err) against ln(eps).
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Gradient descent on the softmax KL objective over (g, β) from zero,
/// fixed step, analytic gradient. Returns the final objective.
pub fn softmax_gd_oracle(joint_sy: &JointPmf, embedding: &Matrix, step: f64, iters: usize) -> (Matrix, Vec<f64>, f64) {
    let (ns, ny) = (joint_sy.nx(), joint_sy.ny());
    let d = embedding.cols();
    let ps: Vec<f64> = (0..ns).map(|s| joint_sy.probs.row(s).iter().sum()).collect();
    let prior: Vec<f64> = (0..ny).map(|y| (0..ns).map(|s| joint_sy.probs[(s, y)]).sum()).collect();
    let mut g = Matrix::zeros(ny, d);
    let mut beta = vec![0.0; ny];
    let posterior = |g: &Matrix, beta: &[f64], s: usize| -> Vec<f64> {
        let logits: Vec<f64> = (0..ny)
            .map(|y| prior[y].ln() + (0..d).map(|c| g[(y, c)] * embedding[(s, c)]).sum::<f64>() + beta[y])
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = e.iter().sum();
        e.into_iter().map(|v| v / z).collect()
    };
    for _ in 0..iters {
        let mut gg = Matrix::zeros(ny, d);
        let mut gb = vec![0.0; ny];
        for s in 0..ns {
            let q = posterior(&g, &beta, s);
            for y in 0..ny {
                let r = ps[s] * q[y] - joint_sy.probs[(s, y)];
                gb[y] += r;
                for c in 0..d {
                    gg[(y, c)] += r * embedding[(s, c)];
                }
            }
        }
        for y in 0..ny {
            beta[y] -= step * gb[y];
            for c in 0..d {
                g[(y, c)] -= step * gg[(y, c)];
            }
        }
    }
    let mut obj = 0.0;
    for s in 0..ns {
        let q = posterior(&g, &beta, s);
        for y in 0..ny {
            let p = joint_sy.probs[(s, y)];
            if p > 0.0 {
                obj += p * (p / (ps[s] * q[y])).ln();
            }
        }
    }
    (g, beta, obj)
}

/// Random Gaussian model from A Aᵀ + I/2 split into blocks.
pub fn random_gaussian(r: &mut ChaCha8Rng, dx: usize, dy: usize) -> GaussianJoint {
    let n = dx + dy;
    let a = Matrix::new(n, n, (0..n * n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    let c = a.matmul(&a.transpose()).unwrap().add(&Matrix::identity(n).scale(0.5)).unwrap();
    let block = |r0: usize, c0: usize, rr: usize, cc: usize| Matrix::from_fn(rr, cc, |i, j| c[(r0 + i, c0 + j)]);
    GaussianJoint::new(block(0, 0, dx, dx), block(dx, dx, dy, dy), block(0, dx, dx, dy)).unwrap()
}
