//! Reverse-mode automatic differentiation over small dense tensors.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s; calling
//! [`Tape::backward`] on a scalar output walks the records in reverse and
//! accumulates gradients for every variable created with [`Tape::param`].
//! One tape is built per forward pass and dropped afterwards, so parameters
//! are plain [`Tensor`]s between passes.

mod gradcheck;
mod kernels;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GRAD_FLOOR};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Element type of tensors: `f64` for gradient checks, `f32` for training.
pub trait Scalar: Float + Default + Debug + Display + Send + Sync + Sum + 'static {
    /// Width in bytes of the little-endian encoding.
    const BYTES: usize;
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    /// `bytes.len() == Self::BYTES`.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const BYTES: usize = 4;
    #[inline]
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    #[inline]
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const BYTES: usize = 8;
    #[inline]
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    #[inline]
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn f64(self) -> f64 {
        self
    }
}
