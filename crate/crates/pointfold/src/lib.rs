//! Point-cloud auto-encoding with a graph-based encoder and a grid-folding
//! decoder, plus the hand-constructed two-layer perceptron that reconstructs
//! any point cloud from a 2D grid exactly.
//!
//! The crate is organised around a small dense-matrix type with explicit
//! reverse-mode differentiation ([`matrix`], [`tape`]), the geometry and
//! graph machinery ([`cloud`], [`graph`], [`grid`]), the model itself
//! ([`model`], [`chamfer`], [`universal`]), and the experiment drivers
//! ([`train`], [`classify`]). Everything is deterministic given a root seed;
//! per-purpose random streams are derived by label in [`rng`].
//!
//! File formats, checkpoints and the command-line front end live in the
//! companion `pointfold-cli` crate; this crate is `no_std`-compatible
//! (with `alloc`).

#![cfg_attr(not(feature = "std"), no_std)]
// validations use `!(x > 0.0)` on purpose: unlike `x <= 0.0`, it also
// rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod adam;
pub mod chamfer;
pub mod classify;
pub mod cloud;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod grid;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod shapes;
pub mod tape;
pub mod train;
pub mod universal;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Float helpers that work both with and without `std`.
pub(crate) mod math {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        #[cfg(feature = "std")]
        {
            x.sqrt()
        }
        #[cfg(not(feature = "std"))]
        {
            libm::sqrt(x)
        }
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        #[cfg(feature = "std")]
        {
            x.abs()
        }
        #[cfg(not(feature = "std"))]
        {
            libm::fabs(x)
        }
    }

    #[inline]
    pub fn ceil(x: f64) -> f64 {
        #[cfg(feature = "std")]
        {
            x.ceil()
        }
        #[cfg(not(feature = "std"))]
        {
            libm::ceil(x)
        }
    }

    #[inline]
    pub fn sin_cos(x: f64) -> (f64, f64) {
        #[cfg(feature = "std")]
        {
            (x.sin(), x.cos())
        }
        #[cfg(not(feature = "std"))]
        {
            libm::sincos(x)
        }
    }
}
