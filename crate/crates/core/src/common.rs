//! ε-common information (nuclear norm of the CDM) and the mixture
//! configuration that realises it: a common variable W with X and Y
//! conditionally independent given W.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norms, Matrix};
use crate::modal::{build_cdm, ModalDecomposition};
use crate::prob::{JointPmf, Pmf};

pub fn eps_common_information(joint: &JointPmf) -> Result<f64> {
    Ok(norms(&build_cdm(joint)?.matrix)?.nuclear)
}

/// W takes values ±1, …, ±k; P_W(w) = σ_|w| / (2‖B̃‖_*),
/// P_{X|W}(·|w) = P_X(1 + sgn(w) ‖B̃‖_*^{1/2} f_|w|), likewise for Y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonInfoConfig {
    /// Labels +1, −1, +2, −2, …
    pub labels: Vec<i32>,
    pub p_w: Vec<f64>,
    pub x_given_w: Vec<Vec<f64>>,
    pub y_given_w: Vec<Vec<f64>>,
    pub nuclear_norm: f64,
    pub sigmas: Vec<f64>,
    /// Modal features, |X| × k and |Y| × k.
    pub f: Matrix,
    pub g: Matrix,
    pub px: Pmf,
    pub py: Pmf,
}

/// Builds the configuration from all modes in `md`; with all K − 1 modes the
/// mixture reproduces the joint exactly.
pub fn build_common_config(md: &ModalDecomposition) -> Result<CommonInfoConfig> {
    let nuclear: f64 = md.sigmas.iter().sum();
    if !(nuclear > 0.0) {
        return Err(Error::ConfigInvalid("every mode strength is zero".into()));
    }
    let root = nuclear.sqrt();
    let mut labels = Vec::new();
    let mut p_w = Vec::new();
    let mut x_given_w = Vec::new();
    let mut y_given_w = Vec::new();
    for i in 0..md.k() {
        for sign in [1.0, -1.0] {
            labels.push(if sign > 0.0 { (i + 1) as i32 } else { -((i + 1) as i32) });
            p_w.push(md.sigmas[i] / (2.0 * nuclear));
            let cx: Vec<f64> = (0..md.px.len())
                .map(|x| md.px.probs[x] * (1.0 + sign * root * md.f[(x, i)]))
                .collect();
            let cy: Vec<f64> = (0..md.py.len())
                .map(|y| md.py.probs[y] * (1.0 + sign * root * md.g[(y, i)]))
                .collect();
            for (v, side) in [(&cx, "X"), (&cy, "Y")] {
                if let Some(p) = v.iter().find(|&&p| p < -1e-12) {
                    return Err(Error::ConfigInvalid(format!(
                        "P_{side}|W(·|{}) has a negative entry {p}",
                        labels.last().unwrap()
                    )));
                }
            }
            x_given_w.push(cx.into_iter().map(|p| p.max(0.0)).collect());
            y_given_w.push(cy.into_iter().map(|p| p.max(0.0)).collect());
        }
    }
    Ok(CommonInfoConfig {
        labels,
        p_w,
        x_given_w,
        y_given_w,
        nuclear_norm: nuclear,
        sigmas: md.sigmas.clone(),
        f: md.f.clone(),
        g: md.g.clone(),
        px: md.px.clone(),
        py: md.py.clone(),
    })
}

/// Posterior of W given a block of pairs: the dominant term of the
/// sufficient-statistic form and the exact Bayes posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorW {
    pub labels: Vec<i32>,
    pub dominant: Vec<f64>,
    pub exact: Vec<f64>,
}

impl CommonInfoConfig {
    /// Σ_w P_W(w) P_{X|W}(x|w) P_{Y|W}(y|w).
    pub fn mixture_joint(&self) -> Result<JointPmf> {
        let nx = self.px.len();
        let ny = self.py.len();
        let probs = Matrix::from_fn(nx, ny, |x, y| {
            (0..self.labels.len())
                .map(|w| self.p_w[w] * self.x_given_w[w][x] * self.y_given_w[w][y])
                .sum()
        });
        JointPmf::new(self.px.alphabet.clone(), self.py.alphabet.clone(), probs)
    }

    /// Joint law of (W, X, Y) as a table over W × (X, Y) cells.
    pub fn w_joint(&self) -> Matrix {
        let nx = self.px.len();
        let ny = self.py.len();
        Matrix::from_fn(self.labels.len(), nx * ny, |w, c| {
            self.p_w[w] * self.x_given_w[w][c / ny] * self.y_given_w[w][c % ny]
        })
    }

    /// I(W; X, Y) in nats.
    pub fn w_information(&self) -> f64 {
        let t = self.w_joint();
        let (nw, nc) = t.shape();
        let pc: Vec<f64> = (0..nc).map(|c| (0..nw).map(|w| t[(w, c)]).sum()).collect();
        let mut s = 0.0;
        for w in 0..nw {
            for c in 0..nc {
                let p = t[(w, c)];
                if p > 0.0 {
                    s += p * (p / (self.p_w[w] * pc[c])).ln();
                }
            }
        }
        s
    }

    pub fn posterior_w(&self, block: &[(usize, usize)]) -> Result<PosteriorW> {
        let stats = if block.is_empty() {
            vec![0.0; self.sigmas.len()]
        } else {
            common_suff_stat(&self.f, &self.g, block)?
        };
        let m = block.len() as f64;
        let root = self.nuclear_norm.sqrt();
        let mut dominant: Vec<f64> = self
            .labels
            .iter()
            .zip(&self.p_w)
            .map(|(&w, &p)| {
                let i = w.unsigned_abs() as usize - 1;
                let sign = f64::from(w.signum());
                (p * (1.0 + m * sign * root * stats[i])).max(0.0)
            })
            .collect();
        normalize(&mut dominant);
        let mut log_post: Vec<f64> = (0..self.labels.len())
            .map(|w| {
                let mut l = self.p_w[w].ln();
                for &(x, y) in block {
                    l += self.x_given_w[w][x].ln() + self.y_given_w[w][y].ln();
                }
                l
            })
            .collect();
        let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for l in log_post.iter_mut() {
            *l = if top.is_finite() { (*l - top).exp() } else { 0.0 };
        }
        normalize(&mut log_post);
        Ok(PosteriorW {
            labels: self.labels.clone(),
            dominant,
            exact: log_post,
        })
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|a| *a /= s);
    }
}

/// r_i = mean_j f_i(x_j) + mean_j g_i(y_j) over a block of index pairs.
pub fn common_suff_stat(f: &Matrix, g: &Matrix, block: &[(usize, usize)]) -> Result<Vec<f64>> {
    if block.is_empty() {
        return Err(Error::EmptySamples);
    }
    let k = f.cols();
    let m = block.len() as f64;
    let mut r = vec![0.0; k];
    for &(x, y) in block {
        if x >= f.rows() || y >= g.rows() {
            return Err(Error::UnknownSymbol(format!("index pair ({x}, {y})")));
        }
        for (i, ri) in r.iter_mut().enumerate() {
            *ri += (f[(x, i)] + g[(y, i)]) / m;
        }
    }
    Ok(r)
}
