//! Floating-point scalar abstraction: everything numeric in this crate is
//! generic over [`Real`], implemented for `f32` and `f64`.

use rand::Rng;
use rand_distr::Distribution;
use serde::{de::DeserializeOwned, Serialize};
use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

/// Scalar type the whole crate is generic over.
///
/// Bundles the field/elementary-function operations from `nalgebra`, lossless
/// conversion from `f64` literals, and the random draws the samplers need. The
/// draw methods live here so that generic code never has to juggle the
/// `rand_distr` trait bounds; the two impls delegate to `rand_distr`.
pub trait Real:
    nalgebra::RealField
    + Copy
    + Default
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Display
    + LowerExp
    + Debug
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Standard normal draw.
    fn draw_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform draw on [0, 1).
    fn draw_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform draw on (0, 1) (both endpoints excluded).
    fn draw_open_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Gamma draw with given shape and *rate* (not scale).
    fn draw_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self;
    /// Beta draw.
    fn draw_beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self;
    /// Exponential draw with unit rate.
    fn draw_std_exp<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            fn draw_std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rand_distr::StandardNormal.sample(rng)
            }
            fn draw_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rand_distr::Standard.sample(rng)
            }
            fn draw_open_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rand_distr::Open01.sample(rng)
            }
            fn draw_gamma<R: Rng + ?Sized>(shape: Self, rate: Self, rng: &mut R) -> Self {
                rand_distr::Gamma::new(shape, 1.0 / rate)
                    .expect("gamma draw: shape and rate must be positive and finite")
                    .sample(rng)
            }
            fn draw_beta<R: Rng + ?Sized>(a: Self, b: Self, rng: &mut R) -> Self {
                rand_distr::Beta::new(a, b)
                    .expect("beta draw: parameters must be positive and finite")
                    .sample(rng)
            }
            fn draw_std_exp<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rand_distr::Exp1.sample(rng)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn cv<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant must be representable")
}

/// Convert a `usize` count into the working scalar type.
#[inline]
pub fn cvu<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("usize count must be representable")
}
