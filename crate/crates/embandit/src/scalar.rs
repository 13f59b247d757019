//! Scalar abstraction: the numeric layers are generic over the floating-point
//! type, with `f32` and `f64` as the provided instantiations.

use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable by every numeric layer in this crate.
///
/// Bundles nalgebra's field operations with primitive conversions and the two
/// sampling primitives the simulators need. Implemented for `f32` and `f64`;
/// everything downstream (kernels, estimators, environments) is generic over
/// it, while the harness and CLI fix `f64`.
pub trait Scalar:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + std::iter::Sum<Self> + Default
{
    /// Constructs from an `f64` constant. Panics only on non-finite input.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 constant not representable")
    }

    /// Widens (or passes through) to `f64` for reporting and persistence.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// One standard-normal draw. Consumes exactly one distribution sample.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform draw on `[lo, hi)`. Consumes exactly one distribution sample.
    fn sample_uniform<R: Rng + ?Sized>(lo: Self, hi: Self, rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_uniform<R: Rng + ?Sized>(lo: Self, hi: Self, rng: &mut R) -> Self {
        lo + (hi - lo) * rng.gen::<f64>()
    }
}

impl Scalar for f32 {
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_uniform<R: Rng + ?Sized>(lo: Self, hi: Self, rng: &mut R) -> Self {
        lo + (hi - lo) * rng.gen::<f32>()
    }
}
