//! Modal decomposition of bivariate distributions.
//!
//! A joint distribution P(x, y) is written as
//! P_X(x) P_Y(y) (1 + Σ σ_i f_i(x) g_i(y)) with orthonormal, zero-mean
//! feature pairs (f_i, g_i) ordered by strength σ_i. The crate computes these
//! modes exactly (SVD of the canonical dependence matrix) or iteratively
//! (alternating conditional expectations), and builds on them: local
//! information geometry, common information, Gaussian CCA and rank-k
//! regression, recommendation, softmax fitting and Monte Carlo checks of
//! sample-complexity bounds.

pub mod ace;
pub mod apps;
pub mod cli;
pub mod common;
pub mod error;
pub mod experiments;
pub mod gaussian;
pub mod geom;
pub mod linalg;
pub mod modal;
pub mod prob;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use modal::{decompose, Method, ModalDecomposition};
pub use prob::{Alphabet, JointPmf, Pmf, SamplePairs};
