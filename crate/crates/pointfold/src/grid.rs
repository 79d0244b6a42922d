//! The fixed low-dimensional point sets fed to the folding decoder.

use alloc::format;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Stream;

/// How grid points are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// Evenly spaced lattice, centered at the origin.
    Regular,
    /// I.i.d. uniform samples in the centered cube.
    UniformRandom,
}

/// Description of a decoder grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// 1, 2 or 3.
    pub dim: usize,
    pub mode: GridMode,
    /// Number of grid points; must be a perfect `dim`-th power in regular
    /// mode.
    pub m: usize,
    /// Half-width of the centered segment/square/cube.
    pub extent: f64,
}

impl GridSpec {
    /// The default decoder grid: a regular 2D square lattice of side 1.
    pub fn default_square(m: usize) -> GridSpec {
        GridSpec {
            dim: 2,
            mode: GridMode::Regular,
            m,
            extent: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidConfig(format!(
                "grid dim {} not in 1..=3",
                self.dim
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidConfig("grid needs m >= 1".into()));
        }
        if !(self.extent > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "grid extent {} must be positive",
                self.extent
            )));
        }
        if self.mode == GridMode::Regular && integer_root(self.m, self.dim).is_none() {
            return Err(Error::InvalidConfig(format!(
                "regular grid needs m = side^{}; {} is not a perfect power",
                self.dim, self.m
            )));
        }
        Ok(())
    }

    /// Lattice side length for regular grids.
    pub fn side(&self) -> Option<usize> {
        integer_root(self.m, self.dim)
    }
}

/// The exact integer s with s^dim == m, if one exists.
pub fn integer_root(m: usize, dim: usize) -> Option<usize> {
    let mut s = 0usize;
    loop {
        let p = s.checked_pow(dim as u32)?;
        if p == m {
            return Some(s);
        }
        if p > m {
            return None;
        }
        s += 1;
    }
}

/// Materialises the m x dim grid matrix. The rng is only consulted in
/// uniform-random mode.
pub fn make_grid(spec: &GridSpec, rng: &mut Stream) -> Result<Matrix> {
    spec.validate()?;
    let mut out = Matrix::zeros(spec.m, spec.dim);
    match spec.mode {
        GridMode::Regular => {
            let side = spec.side().expect("validated");
            // axis coordinates from -extent to extent inclusive
            let coord = |i: usize| -> f64 {
                if side == 1 {
                    0.0
                } else {
                    -spec.extent + (2.0 * spec.extent) * i as f64 / (side - 1) as f64
                }
            };
            for row in 0..spec.m {
                let mut rem = row;
                // first axis varies slowest
                for axis in (0..spec.dim).rev() {
                    out.set(row, axis, coord(rem % side));
                    rem /= side;
                }
            }
        }
        GridMode::UniformRandom => {
            for row in 0..spec.m {
                for axis in 0..spec.dim {
                    out.set(row, axis, rng.gen_range(-spec.extent..=spec.extent));
                }
            }
        }
    }
    Ok(out)
}

/// Lattice spacing of a regular grid (distance between adjacent points).
pub fn lattice_spacing(spec: &GridSpec) -> Option<f64> {
    let side = spec.side()?;
    if side < 2 {
        return None;
    }
    Some(2.0 * spec.extent / (side - 1) as f64)
}
