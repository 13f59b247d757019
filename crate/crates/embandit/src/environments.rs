//! Simulators for the four benchmark settings A-D.
//!
//! Each setting defines a scalar context and action on `[-3, 3.25]` (the
//! action space is a 61-point grid over that interval), an intermediate
//! reward `r | s, a` of dimension 1, 2, 2, or 5 with per-coordinate Gaussian
//! noise of scale 0.25, and a scalar ultimate reward `y | r` with Gaussian
//! noise (scale 0.05 in setting A, 1.0 elsewhere). Unmatched intermediate
//! rewards are drawn uniformly from `(-2, 2)^{d_r}`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of points in the action/context grids.
pub const GRID_POINTS: usize = 61;
/// Lower end of the action/context interval.
pub const GRID_LO: f64 = -3.0;
/// Upper end of the action/context interval.
pub const GRID_HI: f64 = 3.25;
/// Noise scale of every intermediate-reward coordinate.
pub const INTERMEDIATE_NOISE: f64 = 0.25;
/// Half-width of the unmatched intermediate-reward prior `Uniform(-2, 2)`.
pub const UNMATCHED_HALF_WIDTH: f64 = 2.0;

/// Benchmark setting identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    A,
    B,
    C,
    D,
}

impl Setting {
    pub const ALL: [Setting; 4] = [Setting::A, Setting::B, Setting::C, Setting::D];
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Setting::A => "A",
            Setting::B => "B",
            Setting::C => "C",
            Setting::D => "D",
        };
        f.write_str(s)
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Setting::A),
            "B" | "b" => Ok(Setting::B),
            "C" | "c" => Ok(Setting::C),
            "D" | "d" => Ok(Setting::D),
            other => Err(Error::Config(format!("unknown setting id {other:?} (expected A|B|C|D)"))),
        }
    }
}

/// A bandit environment: context sampling, intermediate and ultimate reward
/// channels, and the discrete action grid.
///
/// The trait exists so the harness can also run against synthetic stub
/// environments in tests; [`EnvironmentSpec`] provides settings A-D.
pub trait Environment<S: Scalar> {
    /// Dimension of the intermediate reward.
    fn d_r(&self) -> usize;

    /// The discrete action grid (61 points including both endpoints).
    fn action_grid(&self) -> Vec<S>;

    /// Draws a context uniformly from the context interval.
    fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> S;

    /// Noise-free mean of `r | s, a`.
    fn mean_intermediate(&self, s: S, a: S) -> Vec<S>;

    /// Draws `r | s, a` (mean map plus per-coordinate noise).
    fn sample_intermediate<R: Rng + ?Sized>(&self, s: S, a: S, rng: &mut R) -> Vec<S>;

    /// Noise-free mean of `y | r`.
    fn mean_ultimate(&self, r: &[S]) -> Result<S>;

    /// Draws `y | r`.
    fn sample_ultimate<R: Rng + ?Sized>(&self, r: &[S], rng: &mut R) -> Result<S>;

    /// Draws an unmatched intermediate reward `r̃` from its prior.
    fn sample_unmatched_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S>;
}

/// Concrete simulator for settings A-D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub setting: Setting,
}

impl EnvironmentSpec {
    pub fn new(setting: Setting) -> Self {
        Self { setting }
    }

    /// Noise scale of the ultimate reward for this setting.
    pub fn ultimate_noise(&self) -> f64 {
        match self.setting {
            Setting::A => 0.05,
            _ => 1.0,
        }
    }

    /// The context grid (same 61 points as the action grid). Present for
    /// diagnostics; context *sampling* is continuous over the interval.
    pub fn context_grid<S: Scalar>(&self) -> Vec<S> {
        grid_points()
    }

    /// Monte-Carlo estimate of `E[y | s, a]` with its standard error.
    /// `n_mc = 1` degenerates to a single composed draw with zero reported
    /// standard error.
    pub fn oracle_expected_reward<S: Scalar, R: Rng + ?Sized>(
        &self,
        s: S,
        a: S,
        n_mc: usize,
        rng: &mut R,
    ) -> Result<(S, S)> {
        if n_mc == 0 {
            return Err(Error::InvalidParameter("oracle_expected_reward needs n_mc >= 1".into()));
        }
        let mut sum = S::zero();
        let mut sum_sq = S::zero();
        for _ in 0..n_mc {
            let r = Environment::<S>::sample_intermediate(self, s, a, rng);
            let y = Environment::<S>::sample_ultimate(self, &r, rng)?;
            sum += y;
            sum_sq += y * y;
        }
        let n = S::from_usize(n_mc).unwrap();
        let mean = sum / n;
        let se = if n_mc > 1 {
            let var = (sum_sq - sum * sum / n) / (n - S::one());
            (var.max(S::zero()) / n).sqrt()
        } else {
            S::zero()
        };
        Ok((mean, se))
    }
}

/// The 61-point grid on `[-3, 3.25]`, endpoints exact.
fn grid_points<S: Scalar>() -> Vec<S> {
    let lo = S::lit(GRID_LO);
    let hi = S::lit(GRID_HI);
    let steps = S::from_usize(GRID_POINTS - 1).unwrap();
    (0..GRID_POINTS)
        .map(|i| {
            let i_s = S::from_usize(i).unwrap();
            let j_s = S::from_usize(GRID_POINTS - 1 - i).unwrap();
            (lo * j_s + hi * i_s) / steps
        })
        .collect()
}

impl<S: Scalar> Environment<S> for EnvironmentSpec {
    fn d_r(&self) -> usize {
        match self.setting {
            Setting::A => 1,
            Setting::B | Setting::C => 2,
            Setting::D => 5,
        }
    }

    fn action_grid(&self) -> Vec<S> {
        grid_points()
    }

    fn sample_context<R: Rng + ?Sized>(&self, rng: &mut R) -> S {
        S::sample_uniform(S::lit(GRID_LO), S::lit(GRID_HI), rng)
    }

    fn mean_intermediate(&self, s: S, a: S) -> Vec<S> {
        let pi = S::pi();
        match self.setting {
            Setting::A => vec![(pi * s).sin() + (pi * a).cos()],
            Setting::B => vec![(s + a).sin(), (s - a).sin()],
            Setting::C => vec![s.sin(), a.cos()],
            Setting::D => vec![s.sin(), a.cos(), a.sin(), s.cos(), s.sin() + s.cos()],
        }
    }

    fn sample_intermediate<R: Rng + ?Sized>(&self, s: S, a: S, rng: &mut R) -> Vec<S> {
        let noise = S::lit(INTERMEDIATE_NOISE);
        self.mean_intermediate(s, a)
            .into_iter()
            .map(|m| m + noise * S::sample_standard_normal(rng))
            .collect()
    }

    fn mean_ultimate(&self, r: &[S]) -> Result<S> {
        let d_r = Environment::<S>::d_r(self);
        if r.len() != d_r {
            return Err(Error::DimensionMismatch { expected: d_r, got: r.len() });
        }
        let pi = S::pi();
        let c = S::lit(1.5);
        let one = S::one();
        Ok(match self.setting {
            Setting::A => c * r[0].sin() + one,
            // The mean map depends on the first coordinate only.
            Setting::B => {
                let five = S::lit(5.0);
                c * ((five * pi * r[0]).tanh() + (pi * r[0]).cos()) + one
            }
            Setting::C => c * ((pi * r[0]).sin() + (pi * r[1]).sin()) + one,
            Setting::D => {
                let total: S = r.iter().map(|ri| (pi * *ri).sin()).sum();
                c * total + one
            }
        })
    }

    fn sample_ultimate<R: Rng + ?Sized>(&self, r: &[S], rng: &mut R) -> Result<S> {
        let mean = self.mean_ultimate(r)?;
        let noise = S::lit(self.ultimate_noise());
        Ok(mean + noise * S::sample_standard_normal(rng))
    }

    fn sample_unmatched_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<S> {
        let half = S::lit(UNMATCHED_HALF_WIDTH);
        (0..Environment::<S>::d_r(self))
            .map(|_| S::sample_uniform(-half, half, rng))
            .collect()
    }
}
