//! A hand-weighted 2-layer perceptron that reconstructs any point cloud in
//! `[-1, 1]^3` exactly from a 2D grid and the vectorized cloud as codeword.
//!
//! Grid points sit on the odd lattice `((2β+1)δ, (2γ+1)δ)` with `|β|, |γ|`
//! below a bound `M`. Hidden unit `(j, k)` reads `x_i`, `y_i` and `s_{j,k}`
//! and computes a linear combination gated by a banded activation that
//! passes its input only when the magnitude stays below a threshold `c`.
//! With the constants chosen so that `u δ² > c + 1`, `u > 8M² + 4M + 1` and
//! `c > 1`, the gate of group `j` opens exactly on grid row `j`, so the
//! output sums recover the cloud row for row `i` losslessly.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::model::Codeword;
use crate::rng::Stream;

/// Constants of the construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniversalConfig {
    /// Half the lattice spacing.
    pub delta: f64,
    /// The large separation constant.
    pub u: f64,
    /// Gate threshold.
    pub c: f64,
    /// Strict bound on the integer lattice coordinates.
    pub m_bound: i64,
    /// Number of grid points (a perfect square).
    pub m: usize,
    /// Lattice side, `side * side == m`.
    pub side: usize,
}

impl UniversalConfig {
    /// Validates the four constraints the proof assumes.
    pub fn validate(&self) -> Result<()> {
        if self.side * self.side != self.m {
            return Err(Error::InvalidConfig(format!(
                "universal grid needs a perfect square m, got {}",
                self.m
            )));
        }
        if !(self.u > 0.0 && self.c > 0.0 && self.delta > 0.0 && self.m_bound > 0) {
            return Err(Error::InvalidConfig(
                "universal constants must be positive".into(),
            ));
        }
        let m = self.m_bound as f64;
        if !(self.u * self.delta * self.delta > self.c + 1.0) {
            return Err(Error::InvalidConfig(format!(
                "u*delta^2 = {} must exceed c + 1 = {}",
                self.u * self.delta * self.delta,
                self.c + 1.0
            )));
        }
        if !(self.u > 8.0 * m * m + 4.0 * m + 1.0) {
            return Err(Error::InvalidConfig(format!(
                "u = {} must exceed 8M^2 + 4M + 1 = {}",
                self.u,
                8.0 * m * m + 4.0 * m + 1.0
            )));
        }
        if !(self.c > 1.0) {
            return Err(Error::InvalidConfig(format!("c = {} must exceed 1", self.c)));
        }
        // every beta/gamma the grid uses must stay strictly below M
        let max_coord = lattice_range(self.side)
            .map(|b| b.abs())
            .max()
            .unwrap_or(0);
        if max_coord >= self.m_bound {
            return Err(Error::InvalidConfig(format!(
                "lattice coordinate {} not below M = {}",
                max_coord, self.m_bound
            )));
        }
        Ok(())
    }

    /// Upper bound on any hidden-unit magnitude; serves as an overflow
    /// guard during evaluation.
    pub fn magnitude_bound(&self) -> f64 {
        let m = self.m_bound as f64;
        let reach = 8.0 * m * m + 4.0 * m;
        let d2 = self.delta * self.delta;
        self.u * self.u * d2 * reach + self.u * d2 * reach + 1.0
    }
}

/// The contiguous integer range of length `side` the lattice uses for both
/// axes: `-floor(side/2) ..` so a 4-wide grid runs over -2..=1.
fn lattice_range(side: usize) -> impl Iterator<Item = i64> {
    let start = -((side / 2) as i64);
    (0..side as i64).map(move |i| start + i)
}

/// Smallest odd-lattice grid covering `m` points, with constants chosen
/// 0.5 above each strict inequality: `c = 2`, `u = 8M² + 4M + 2`,
/// `δ = sqrt((c + 1.5) / u)`.
pub fn default_config(m: usize) -> Result<UniversalConfig> {
    let side = crate::grid::integer_root(m, 2).ok_or_else(|| {
        Error::InvalidConfig(format!("universal grid needs a perfect square m, got {m}"))
    })?;
    if side == 0 {
        return Err(Error::InvalidConfig("universal grid needs m >= 1".into()));
    }
    let m_bound = side as i64;
    let c = 2.0;
    let u = (8 * m_bound * m_bound + 4 * m_bound + 2) as f64;
    let delta = math::sqrt((c + 1.5) / u);
    let config = UniversalConfig {
        delta,
        u,
        c,
        m_bound,
        m,
        side,
    };
    config.validate()?;
    Ok(config)
}

/// The integer lattice coordinates `(β_i, γ_i)` of every grid row, row-major
/// with the first axis varying slowest.
pub fn lattice_coords(config: &UniversalConfig) -> Vec<(i64, i64)> {
    let betas: Vec<i64> = lattice_range(config.side).collect();
    let mut out = Vec::with_capacity(config.m);
    for &b in &betas {
        for &g in &betas {
            out.push((b, g));
        }
    }
    out
}

/// Grid positions `((2β+1)δ, (2γ+1)δ)` for every row.
pub fn grid_positions(config: &UniversalConfig) -> Matrix {
    let coords = lattice_coords(config);
    let mut grid = Matrix::zeros(config.m, 2);
    for (i, &(b, g)) in coords.iter().enumerate() {
        grid.set(i, 0, (2 * b + 1) as f64 * config.delta);
        grid.set(i, 1, (2 * g + 1) as f64 * config.delta);
    }
    grid
}

/// The hand-crafted hidden layer: per grid point `j`, the weights on
/// `(x_i, y_i)` and the bias. All three units of group `j` share them; unit
/// `(j, k)` additionally reads `s_{j,k}` with weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalPerceptron {
    pub config: UniversalConfig,
    /// `α_{j1} = u² x_j` per group.
    pub weight_x: Vec<f64>,
    /// `α_{j2} = u y_j` per group.
    pub weight_y: Vec<f64>,
    /// `b_j = -u² x_j² - u y_j²` per group.
    pub bias: Vec<f64>,
}

impl UniversalPerceptron {
    pub fn build(config: UniversalConfig) -> Result<UniversalPerceptron> {
        config.validate()?;
        let grid = grid_positions(&config);
        let mut weight_x = Vec::with_capacity(config.m);
        let mut weight_y = Vec::with_capacity(config.m);
        let mut bias = Vec::with_capacity(config.m);
        for j in 0..config.m {
            let xj = grid.get(j, 0);
            let yj = grid.get(j, 1);
            let ax = config.u * config.u * xj;
            let ay = config.u * yj;
            weight_x.push(ax);
            weight_y.push(ay);
            bias.push(-(ax * xj + ay * yj));
        }
        Ok(UniversalPerceptron {
            config,
            weight_x,
            weight_y,
            bias,
        })
    }

    /// Number of hidden units (three per grid point).
    pub fn hidden_units(&self) -> usize {
        3 * self.config.m
    }
}

/// The banded gate activation: passes its input only below magnitude `c`.
#[inline]
pub fn gate(y: f64, c: f64) -> f64 {
    if math::abs(y) < c {
        y
    } else {
        0.0
    }
}

/// The same band realised purely with ReLU units: a piecewise-linear ramp
/// of width `epsilon` replaces each jump, so the two functions agree
/// everywhere outside `(c - epsilon, c)` and `(-c, -c + epsilon)`.
pub fn gate_via_relu(y: f64, c: f64, epsilon: f64) -> f64 {
    let relu = |v: f64| if v > 0.0 { v } else { 0.0 };
    let a1 = (epsilon - c) / epsilon;
    let a2 = c / epsilon;
    let a3 = -c / epsilon;
    let a4 = (c - epsilon) / epsilon;
    a1 * relu(y + c) + a2 * relu(y + c - epsilon) + a3 * relu(y - c + epsilon) + a4 * relu(y - c)
}

/// Vectorizes an m x 3 cloud into the length-3m codeword the construction
/// uses. Every coordinate must satisfy `|s| <= 1`.
pub fn encode_trivially(cloud: &PointCloud) -> Result<Codeword> {
    for &v in cloud.points().data() {
        if !(math::abs(v) <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "universal codeword needs |s| <= 1, got {v}"
            )));
        }
    }
    Ok(Codeword(cloud.points().data().to_vec()))
}

/// Gate bookkeeping of one decode.
#[derive(Debug, Clone, PartialEq)]
pub struct GateStats {
    /// Open gates per output channel; the proof implies exactly `m` each.
    pub open_per_channel: [usize; 3],
    /// Hidden units that fell in the case `|m1| >= 1`.
    pub case_m1: usize,
    /// Hidden units in the case `m1 = 0`, `|m2| >= 1`.
    pub case_m2: usize,
    /// Hidden units on the diagonal case `m1 = m2 = 0` (open gates).
    pub case_diag: usize,
    /// Minimum of `c - |y|` over open gates.
    pub min_open_margin: f64,
    /// Minimum of `|y| - c` over closed gates.
    pub min_closed_margin: f64,
    /// Largest `|y|` seen.
    pub max_magnitude: f64,
}

/// Evaluates the construction: reconstructs the cloud whose vectorization
/// is `theta`. Errors if the configuration violates the proof's
/// constraints; the returned stats carry the gate margins.
pub fn universal_decode(
    theta: &Codeword,
    config: &UniversalConfig,
) -> Result<(PointCloud, GateStats)> {
    config.validate()?;
    if theta.len() != 3 * config.m {
        return Err(Error::InvalidConfig(format!(
            "codeword length {} != 3m = {}",
            theta.len(),
            3 * config.m
        )));
    }
    let net = UniversalPerceptron::build(*config)?;
    let grid = grid_positions(config);
    let coords = lattice_coords(config);
    let s = theta.as_slice();

    let mut out = Matrix::zeros(config.m, 3);
    let mut stats = GateStats {
        open_per_channel: [0; 3],
        case_m1: 0,
        case_m2: 0,
        case_diag: 0,
        min_open_margin: f64::INFINITY,
        min_closed_margin: f64::INFINITY,
        max_magnitude: 0.0,
    };
    let bound = config.magnitude_bound();

    for i in 0..config.m {
        let xi = grid.get(i, 0);
        let yi = grid.get(i, 1);
        let (bi, gi) = coords[i];
        let mut w = [0.0f64; 3];
        let mut open = [0usize; 3];
        for j in 0..config.m {
            // the affine form α·v + b, grouped so the grid-dependent parts
            // cancel exactly on the diagonal: α1 x_i + b_x = α1 (x_i - x_j)
            let linear = net.weight_x[j] * (xi - grid.get(j, 0))
                + net.weight_y[j] * (yi - grid.get(j, 1));
            let (bj, gj) = coords[j];
            let m1 = 2 * (2 * bj + 1) * (bi - bj);
            let m2 = 2 * (2 * gj + 1) * (gi - gj);
            if m1 != 0 {
                stats.case_m1 += 3;
            } else if m2 != 0 {
                stats.case_m2 += 3;
            } else {
                stats.case_diag += 3;
            }
            for k in 0..3 {
                let y = linear + s[3 * j + k];
                let mag = math::abs(y);
                if mag > stats.max_magnitude {
                    stats.max_magnitude = mag;
                }
                if mag < config.c {
                    open[k] += 1;
                    let margin = config.c - mag;
                    if margin < stats.min_open_margin {
                        stats.min_open_margin = margin;
                    }
                    w[k] += y;
                } else {
                    let margin = mag - config.c;
                    if margin < stats.min_closed_margin {
                        stats.min_closed_margin = margin;
                    }
                }
            }
        }
        for k in 0..3 {
            stats.open_per_channel[k] += open[k];
            out.set(i, k, w[k]);
        }
    }

    // the proof's case analysis guarantees these; a violation means the
    // configuration (not the input) is unusable
    let margin_floor = config.c - 1.0;
    if stats.min_open_margin < margin_floor || stats.min_closed_margin < margin_floor {
        return Err(Error::InvalidConfig(format!(
            "gate margins {} / {} fell below c - 1 = {}",
            stats.min_open_margin, stats.min_closed_margin, margin_floor
        )));
    }
    if stats.max_magnitude > bound {
        return Err(Error::InvalidConfig(format!(
            "hidden magnitude {} exceeded the precomputed bound {}",
            stats.max_magnitude, bound
        )));
    }

    Ok((PointCloud::new(out)?, stats))
}

/// One verification trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub trial: usize,
    pub max_abs_error: f64,
    pub stats: GateStats,
}

/// Outcome of [`verify_universality`].
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalReport {
    pub config: UniversalConfig,
    pub trials: Vec<TrialReport>,
}

impl UniversalReport {
    pub fn max_error(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.max_abs_error)
            .fold(0.0, f64::max)
    }

    /// True when every trial recovered its cloud below `tol` and opened
    /// exactly one gate per (grid point, channel).
    pub fn all_exact(&self, tol: f64) -> bool {
        self.trials.iter().all(|t| {
            t.max_abs_error < tol && t.stats.open_per_channel == [self.config.m; 3]
        })
    }
}

/// Draws `trials` random clouds in `[-1, 1]^3`, round-trips each through
/// `encode_trivially` + `universal_decode`, and records errors and gate
/// statistics.
pub fn verify_universality(trials: usize, m: usize, rng: &mut Stream) -> Result<UniversalReport> {
    if trials == 0 {
        return Err(Error::OutOfRange {
            what: "verification trials",
            got: 0,
            limit: 1,
        });
    }
    let config = default_config(m)?;
    let mut out = Vec::with_capacity(trials);
    for trial in 0..trials {
        let data: Vec<f64> = (0..3 * m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let cloud = PointCloud::new(Matrix::from_vec(m, 3, data)?)?;
        let theta = encode_trivially(&cloud)?;
        let (reconstructed, stats) = universal_decode(&theta, &config)?;
        let mut max_err = 0.0f64;
        for (a, b) in cloud.points().data().iter().zip(reconstructed.points().data()) {
            let e = math::abs(a - b);
            if e > max_err {
                max_err = e;
            }
        }
        out.push(TrialReport {
            trial,
            max_abs_error: max_err,
            stats,
        });
    }
    Ok(UniversalReport {
        config,
        trials: out,
    })
}
