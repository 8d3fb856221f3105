//! Finite alphabets, distributions on them, and the basic information
//! measures (all logarithms natural, with 0 ln 0 = 0).

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const RENORMALIZE_TOL: f64 = 1e-9;

/// Ordered set of symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    /// Builds an alphabet; repeated symbols keep their first position.
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Self {
        let mut a = Alphabet {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for s in symbols {
            a.insert(s.into());
        }
        a
    }

    /// Symbols "0", "1", ..., "n-1".
    pub fn numbered(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string()))
    }

    fn insert(&mut self, s: String) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        let i = self.symbols.len();
        self.index.insert(s.clone(), i);
        self.symbols.push(s);
        i
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn index_of(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    fn require(&self, s: &str) -> Result<usize> {
        self.index_of(s).ok_or_else(|| Error::UnknownSymbol(s.to_string()))
    }
}

impl From<Vec<String>> for Alphabet {
    fn from(v: Vec<String>) -> Self {
        Alphabet::new(v)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.symbols
    }
}

/// Probability mass function on an alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub alphabet: Alphabet,
    pub probs: Vec<f64>,
}

impl Pmf {
    /// Validates nonnegativity and normalisation (renormalising within 1e-9).
    pub fn new(alphabet: Alphabet, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != alphabet.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} probabilities for {} symbols",
                probs.len(),
                alphabet.len()
            )));
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::NegativeProb {
                    x: alphabet.symbol(i).to_string(),
                    y: String::new(),
                    value: p,
                });
            }
        }
        let probs = renormalize(probs)?;
        Ok(Pmf { alphabet, probs })
    }

    pub fn uniform(n: usize) -> Self {
        Pmf {
            alphabet: Alphabet::numbered(n),
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, symbol: &str) -> Option<f64> {
        self.alphabet.index_of(symbol).map(|i| self.probs[i])
    }

    pub fn sqrt(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.sqrt()).collect()
    }

    /// Expectation of a function given by its values on the alphabet.
    pub fn expect(&self, f: &[f64]) -> f64 {
        self.probs.iter().zip(f).map(|(p, v)| p * v).sum()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn renormalize(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::SumNotOne { sum });
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
    Ok(probs)
}

/// Joint distribution of (X, Y); `probs[(x, y)]` is P(x, y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    pub x: Alphabet,
    pub y: Alphabet,
    pub probs: Matrix,
}

/// Which conditional law to form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Rows indexed by x, entries P(y|x).
    YGivenX,
    /// Rows indexed by y, entries P(x|y).
    XGivenY,
}

impl JointPmf {
    pub fn new(x: Alphabet, y: Alphabet, probs: Matrix) -> Result<Self> {
        if probs.shape() != (x.len(), y.len()) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} table for alphabets of size {} and {}",
                probs.rows(),
                probs.cols(),
                x.len(),
                y.len()
            )));
        }
        for i in 0..x.len() {
            for j in 0..y.len() {
                let p = probs[(i, j)];
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::NegativeProb {
                        x: x.symbol(i).to_string(),
                        y: y.symbol(j).to_string(),
                        value: p,
                    });
                }
            }
        }
        let data = renormalize(probs.as_slice().to_vec())?;
        let probs = Matrix::new(x.len(), y.len(), data)?;
        Ok(JointPmf { x, y, probs })
    }

    /// Joint on numbered alphabets from a probability table.
    pub fn from_matrix(probs: Matrix) -> Result<Self> {
        JointPmf::new(
            Alphabet::numbered(probs.rows()),
            Alphabet::numbered(probs.cols()),
            probs,
        )
    }

    /// Doubly symmetric binary source: X uniform, Y = X flipped w.p. (1-ρ)/2.
    pub fn binary_symmetric(rho: f64) -> Result<Self> {
        let a = (1.0 + rho) / 4.0;
        let b = (1.0 - rho) / 4.0;
        JointPmf::from_matrix(Matrix::from_rows(&[vec![a, b], vec![b, a]])?)
    }

    /// Product of two marginals.
    pub fn product(px: &Pmf, py: &Pmf) -> Self {
        JointPmf {
            x: px.alphabet.clone(),
            y: py.alphabet.clone(),
            probs: Matrix::from_fn(px.len(), py.len(), |i, j| px.probs[i] * py.probs[j]),
        }
    }

    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn get(&self, x: &str, y: &str) -> Option<f64> {
        Some(self.probs[(self.x.index_of(x)?, self.y.index_of(y)?)])
    }

    pub fn marginal_x(&self) -> Pmf {
        let probs = (0..self.nx()).map(|i| self.probs.row(i).iter().sum()).collect();
        Pmf {
            alphabet: self.x.clone(),
            probs,
        }
    }

    pub fn marginal_y(&self) -> Pmf {
        let probs = (0..self.ny())
            .map(|j| (0..self.nx()).map(|i| self.probs[(i, j)]).sum())
            .collect();
        Pmf {
            alphabet: self.y.clone(),
            probs,
        }
    }

    /// Swaps the roles of X and Y.
    pub fn transpose(&self) -> JointPmf {
        JointPmf {
            x: self.y.clone(),
            y: self.x.clone(),
            probs: self.probs.transpose(),
        }
    }

    /// Product of the marginals of this joint.
    pub fn independent_part(&self) -> JointPmf {
        JointPmf::product(&self.marginal_x(), &self.marginal_y())
    }
}

pub fn joint_from_table<S: AsRef<str>>(cells: &[(S, S, f64)]) -> Result<JointPmf> {
    let x = Alphabet::new(cells.iter().map(|c| c.0.as_ref().to_string()));
    let y = Alphabet::new(cells.iter().map(|c| c.1.as_ref().to_string()));
    joint_from_table_with(x, y, cells)
}

/// Like [`joint_from_table`] but with fixed alphabets; unlisted cells are zero.
pub fn joint_from_table_with<S: AsRef<str>>(
    x: Alphabet,
    y: Alphabet,
    cells: &[(S, S, f64)],
) -> Result<JointPmf> {
    let mut probs = Matrix::zeros(x.len(), y.len());
    let mut seen = vec![false; x.len() * y.len()];
    for (xs, ys, p) in cells {
        let (xs, ys) = (xs.as_ref(), ys.as_ref());
        let i = x.require(xs)?;
        let j = y.require(ys)?;
        if seen[i * y.len() + j] {
            return Err(Error::DuplicateCell {
                x: xs.to_string(),
                y: ys.to_string(),
            });
        }
        seen[i * y.len() + j] = true;
        probs[(i, j)] = *p;
    }
    JointPmf::new(x, y, probs)
}

/// Paired observations (x_i, y_i) over fixed alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePairs {
    pub x: Alphabet,
    pub y: Alphabet,
    pub pairs: Vec<(usize, usize)>,
}

impl SamplePairs {
    /// Alphabets are collected in order of first appearance.
    pub fn from_symbols<S: AsRef<str>>(pairs: &[(S, S)]) -> Self {
        let x = Alphabet::new(pairs.iter().map(|p| p.0.as_ref().to_string()));
        let y = Alphabet::new(pairs.iter().map(|p| p.1.as_ref().to_string()));
        let pairs = pairs
            .iter()
            .map(|(a, b)| (x.index_of(a.as_ref()).unwrap(), y.index_of(b.as_ref()).unwrap()))
            .collect();
        SamplePairs { x, y, pairs }
    }

    /// Uses the given alphabets; unknown symbols are an error.
    pub fn with_alphabets<S: AsRef<str>>(x: Alphabet, y: Alphabet, pairs: &[(S, S)]) -> Result<Self> {
        let pairs = pairs
            .iter()
            .map(|(a, b)| Ok((x.require(a.as_ref())?, y.require(b.as_ref())?)))
            .collect::<Result<_>>()?;
        Ok(SamplePairs { x, y, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Empirical joint distribution of the samples.
pub fn joint_from_samples(samples: &SamplePairs) -> Result<JointPmf> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut probs = Matrix::zeros(samples.x.len(), samples.y.len());
    let w = 1.0 / samples.len() as f64;
    for &(i, j) in &samples.pairs {
        probs[(i, j)] += w;
    }
    JointPmf::new(samples.x.clone(), samples.y.clone(), probs)
}

pub fn marginals(joint: &JointPmf) -> (Pmf, Pmf) {
    (joint.marginal_x(), joint.marginal_y())
}

pub fn conditional(joint: &JointPmf, direction: Direction) -> Result<Matrix> {
    let (table, given) = match direction {
        Direction::YGivenX => (joint.probs.clone(), joint.marginal_x()),
        Direction::XGivenY => (joint.probs.transpose(), joint.marginal_y()),
    };
    for (i, &p) in given.probs.iter().enumerate() {
        if p <= 0.0 {
            return Err(Error::ZeroMarginal(given.alphabet.symbol(i).to_string()));
        }
    }
    Ok(Matrix::from_fn(table.rows(), table.cols(), |i, j| {
        table[(i, j)] / given.probs[i]
    }))
}

/// I(X;Y) in nats.
pub fn mutual_information(joint: &JointPmf) -> f64 {
    let ind = joint.independent_part();
    kl_slices(joint.probs.as_slice(), ind.probs.as_slice()).unwrap_or(f64::INFINITY)
}

/// χ²(P‖Q) = Σ (P − Q)²/Q. Cells with Q = 0 are allowed only when P = 0.
pub fn chi2_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch("distributions of different size".into()));
    }
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if b <= 0.0 {
            if a > 0.0 {
                return Err(Error::ZeroReference);
            }
            continue;
        }
        s += (a - b) * (a - b) / b;
    }
    Ok(s)
}

/// D(P‖Q) in nats.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::ShapeMismatch("distributions of different size".into()));
    }
    kl_slices(p, q)
}

fn kl_slices(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return Err(Error::SupportMismatch);
        }
        s += a * (a / b).ln();
    }
    Ok(s)
}

/// Draws `n` i.i.d. pairs; the same seed always yields the same samples.
pub fn draw_samples(joint: &JointPmf, n: usize, seed: u64) -> Result<SamplePairs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = WeightedIndex::new(joint.probs.as_slice())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let ny = joint.ny();
    let pairs = (0..n)
        .map(|_| {
            let c = dist.sample(&mut rng);
            (c / ny, c % ny)
        })
        .collect();
    Ok(SamplePairs {
        x: joint.x.clone(),
        y: joint.y.clone(),
        pairs,
    })
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, t.split('\t').map(str::trim).collect()))
        }
    })
}

/// Parses `x<TAB>y<TAB>prob` lines; `#` starts a comment line.
pub fn parse_joint_tsv(text: &str) -> Result<JointPmf> {
    let mut cells: Vec<(String, String, f64)> = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let p: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad probability '{}'", fields[2]),
        })?;
        cells.push((fields[0].to_string(), fields[1].to_string(), p));
    }
    joint_from_table(&cells)
}

/// Parses `x<TAB>y` lines.
pub fn parse_samples_tsv(text: &str) -> Result<SamplePairs> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 2 tab-separated fields, found {}", fields.len()),
            });
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    if pairs.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(SamplePairs::from_symbols(&pairs))
}

/// Reads either a joint table (3 columns) or samples (2 columns).
pub fn parse_joint_or_samples_tsv(text: &str) -> Result<JointPmf> {
    match data_lines(text).next() {
        Some((_, fields)) if fields.len() == 2 => joint_from_samples(&parse_samples_tsv(text)?),
        _ => parse_joint_tsv(text),
    }
}

pub fn write_joint_tsv(joint: &JointPmf) -> String {
    let mut out = String::from("# x\ty\tprob\n");
    for i in 0..joint.nx() {
        for j in 0..joint.ny() {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.17e}",
                joint.x.symbol(i),
                joint.y.symbol(j),
                joint.probs[(i, j)]
            );
        }
    }
    out
}

pub fn write_samples_tsv(samples: &SamplePairs) -> String {
    let mut out = String::new();
    for &(i, j) in &samples.pairs {
        let _ = writeln!(out, "{}\t{}", samples.x.symbol(i), samples.y.symbol(j));
    }
    out
}
