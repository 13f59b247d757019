//! Action selection: the UCB acquisition rule over a discrete action grid,
//! exploration-weight schedules, and the uniform-random baseline.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-action posterior summaries feeding the acquisition rule.
#[derive(Debug, Clone)]
pub struct PosteriorStats<S: Scalar> {
    pub means: Vec<S>,
    pub stddevs: Vec<S>,
}

impl<S: Scalar> PosteriorStats<S> {
    pub fn new(means: Vec<S>, stddevs: Vec<S>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::EmptyInput("posterior stats"));
        }
        if means.len() != stddevs.len() {
            return Err(Error::ShapeMismatch {
                lhs_rows: means.len(),
                lhs_cols: 1,
                rhs_rows: stddevs.len(),
                rhs_cols: 1,
            });
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("posterior means"));
        }
        if stddevs.iter().any(|s| !(s.is_finite() && *s >= S::zero())) {
            return Err(Error::NonFinite("posterior stddevs"));
        }
        Ok(Self { means, stddevs })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Exploration-weight schedule for the UCB rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule<S: Scalar> {
    /// Fixed β for every round.
    Constant { value: S },
    /// `β_t = scale · log(|A| · t² · π² / (6 δ))`, nondecreasing in `t`.
    Logarithmic { scale: S, delta: S },
}

impl<S: Scalar> BetaSchedule<S> {
    /// Checks that the schedule produces positive β for every `t ≥ 1`.
    pub fn validate(&self, grid_size: usize) -> Result<()> {
        match self {
            BetaSchedule::Constant { value } => {
                if !(value.is_finite() && *value > S::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "constant beta must be positive, got {value:?}"
                    )));
                }
            }
            BetaSchedule::Logarithmic { scale, delta } => {
                if !(scale.is_finite() && *scale > S::zero())
                    || !(delta.is_finite() && *delta > S::zero() && *delta < S::one())
                {
                    return Err(Error::InvalidParameter(format!(
                        "logarithmic beta needs scale > 0 and 0 < delta < 1, got {scale:?}, {delta:?}"
                    )));
                }
                // Smallest value is at t = 1; the argument must exceed 1.
                if beta_at(self, 1, grid_size.max(1)) <= S::zero() {
                    return Err(Error::InvalidParameter(
                        "logarithmic beta non-positive at t = 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Evaluates the schedule at round `t` (1-based) for a grid of `grid_size` actions.
pub fn beta_at<S: Scalar>(schedule: &BetaSchedule<S>, t: u32, grid_size: usize) -> S {
    match schedule {
        BetaSchedule::Constant { value } => *value,
        BetaSchedule::Logarithmic { scale, delta } => {
            let t = S::from_u32(t.max(1)).unwrap();
            let a = S::from_usize(grid_size).unwrap();
            let six = S::lit(6.0);
            *scale * (a * t * t * S::pi() * S::pi() / (six * *delta)).ln()
        }
    }
}

/// Returns the smallest index maximizing `mean + √β · stddev`.
pub fn ucb_select<S: Scalar>(stats: &PosteriorStats<S>, beta: S) -> Result<usize> {
    if stats.is_empty() {
        return Err(Error::EmptyInput("ucb_select stats"));
    }
    if !(beta.is_finite() && beta >= S::zero()) {
        return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta:?}")));
    }
    let sqrt_beta = beta.sqrt();
    let mut best = 0usize;
    let mut best_score: Option<S> = None;
    for (i, (m, s)) in stats.means.iter().zip(stats.stddevs.iter()).enumerate() {
        let score = *m + sqrt_beta * *s;
        if !score.is_finite() {
            return Err(Error::NonFinite("ucb score"));
        }
        if best_score.map_or(true, |b| score > b) {
            best_score = Some(score);
            best = i;
        }
    }
    Ok(best)
}

/// Uniform draw over action indices. Consumes exactly one RNG sample.
pub fn random_select<R: Rng + ?Sized>(grid_size: usize, rng: &mut R) -> Result<usize> {
    if grid_size == 0 {
        return Err(Error::EmptyInput("random_select grid"));
    }
    Ok(rng.gen_range(0..grid_size))
}
