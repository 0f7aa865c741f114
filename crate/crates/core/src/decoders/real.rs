//! Scalar abstraction so decoder math runs in f32 for training/inference and
//! f64 for gradient verification.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;

pub trait Real:
    Float + FromPrimitive + Debug + Default + Sum + Send + Sync + 'static
{
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
    fn as_f32(self) -> f32;
    fn standard_normal<R: Rng>(rng: &mut R) -> Self;
    fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Self;

    fn sigmoid(self) -> Self {
        Self::one() / (Self::one() + (-self).exp())
    }
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
    fn as_f32(self) -> f32 {
        self
    }
    fn standard_normal<R: Rng>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Self {
        rng.gen_range(lo as f32..hi as f32)
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
    fn standard_normal<R: Rng>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }
    fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Self {
        rng.gen_range(lo..hi)
    }
}
