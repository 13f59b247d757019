//! Kernel contextual bandits over embedded intermediate rewards.
//!
//! The library targets the two-dataset bandit problem: each round reveals a
//! context `s_t`, an action `a` from a discrete grid produces a (possibly
//! multi-dimensional) intermediate reward `r ~ P(·|s,a)`, and a scalar
//! ultimate reward `y ~ F(·|r)` is paid out. Two kernelized UCB policies are
//! provided:
//!
//! * a moment-matched estimator ([`cbmp`]) that models the ultimate-reward
//!   function `f` by GP regression on an unmatched dataset D₂ of `(r, y)`
//!   pairs, embeds `P(R|s,a)` from the matched dataset D₁ of `(s, a, r)`
//!   triples, and propagates both uncertainties into the first two moments
//!   of `⟨f, μ_{R|s,a}⟩`; and
//! * a conditional-mean-embedding baseline ([`cme`]) whose variance reflects
//!   only the D₁ side.
//!
//! [`environments`] simulates four benchmark settings (A-D), [`harness`] runs
//! seeded trials and aggregates them, and the companion CLI crate fronts the
//! harness from config files.
//!
//! Numeric layers are generic over the [`scalar::Scalar`] float type; the
//! aliases below fix `f64`, which is what the harness and CLI use.

pub mod cbmp;
pub mod cme;
pub mod environments;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod policies;
pub mod scalar;

pub use error::{Error, Result};

/// Library version, recorded in run manifests for reproducibility.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Dense matrix over `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;
/// Dense column vector over `f64`.
pub type Vector = nalgebra::DVector<f64>;
/// Kernel specification over `f64`.
pub type Kernel = kernels::KernelSpec<f64>;
/// Matched-dataset (D₁) snapshot over `f64`.
pub type MatchedData = cme::MatchedDataset<f64>;
/// Unmatched-dataset (D₂) snapshot over `f64`.
pub type UnmatchedData = gp::UnmatchedDataset<f64>;
/// GP posterior of the ultimate-reward function over `f64`.
pub type GpPosterior = gp::FPosterior<f64>;
/// Moment-matched estimator round state over `f64`.
pub type CbmpRoundState = cbmp::RoundState<f64>;
/// Baseline estimator round state over `f64`.
pub type CmeRoundState = cme::CmeRoundState<f64>;
