//! Synthetic surface primitives used as the desk-scale dataset: plane,
//! sphere, torus, and cube surface, sampled uniformly by area.

use core::f64::consts::PI;
use core::str::FromStr;

use rand::Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::Stream;

/// The four shape families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Plane,
    Sphere,
    Torus,
    CubeSurface,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Plane,
        ShapeKind::Sphere,
        ShapeKind::Torus,
        ShapeKind::CubeSurface,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Plane => "plane",
            ShapeKind::Sphere => "sphere",
            ShapeKind::Torus => "torus",
            ShapeKind::CubeSurface => "cube_surface",
        }
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(ShapeKind::Plane),
            "sphere" => Ok(ShapeKind::Sphere),
            "torus" => Ok(ShapeKind::Torus),
            "cube_surface" | "cube" => Ok(ShapeKind::CubeSurface),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown shape kind '{other}'"
            ))),
        }
    }
}

/// Geometry parameters for the primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    /// Plane half-width along x.
    pub plane_half_x: f64,
    /// Plane half-width along y.
    pub plane_half_y: f64,
    /// Sphere radius.
    pub sphere_radius: f64,
    /// Torus center-circle radius R.
    pub torus_major: f64,
    /// Torus tube radius r.
    pub torus_minor: f64,
    /// Cube half side length.
    pub cube_half: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            plane_half_x: 1.0,
            plane_half_y: 0.6,
            sphere_radius: 1.0,
            torus_major: 1.0,
            torus_minor: 0.3,
            cube_half: 1.0,
        }
    }
}

/// Uniform surface samples of the named primitive, normalized to the unit
/// sphere. Requires `n >= 4`.
pub fn synth_shape(
    kind: ShapeKind,
    n: usize,
    rng: &mut Stream,
    params: &ShapeParams,
) -> Result<PointCloud> {
    Ok(synth_shape_raw(kind, n, rng, params)?.normalize_unit_sphere())
}

/// Same as [`synth_shape`] but without the final normalization, so the raw
/// geometric properties (plane z = 0, sphere norm = radius, ...) survive.
pub fn synth_shape_raw(
    kind: ShapeKind,
    n: usize,
    rng: &mut Stream,
    params: &ShapeParams,
) -> Result<PointCloud> {
    if n < 4 {
        return Err(Error::OutOfRange {
            what: "synthetic shape point count",
            got: n,
            limit: 4,
        });
    }
    let mut pts = Matrix::zeros(n, 3);
    for i in 0..n {
        let p = match kind {
            ShapeKind::Plane => sample_plane(rng, params),
            ShapeKind::Sphere => sample_sphere(rng, params),
            ShapeKind::Torus => sample_torus(rng, params),
            ShapeKind::CubeSurface => sample_cube(rng, params),
        };
        pts.row_mut(i).copy_from_slice(&p);
    }
    PointCloud::new(pts)
}

fn sample_plane(rng: &mut Stream, p: &ShapeParams) -> [f64; 3] {
    [
        rng.gen_range(-p.plane_half_x..=p.plane_half_x),
        rng.gen_range(-p.plane_half_y..=p.plane_half_y),
        0.0,
    ]
}

fn sample_sphere(rng: &mut Stream, p: &ShapeParams) -> [f64; 3] {
    // area-uniform: z uniform on [-1, 1], azimuth uniform
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let s = math::sqrt((1.0 - z * z).max(0.0));
    let (sin_phi, cos_phi) = math::sin_cos(phi);
    [
        p.sphere_radius * s * cos_phi,
        p.sphere_radius * s * sin_phi,
        p.sphere_radius * z,
    ]
}

fn sample_torus(rng: &mut Stream, p: &ShapeParams) -> [f64; 3] {
    let ratio = p.torus_minor / p.torus_major;
    // rejection-sample the tube angle against its area density
    let theta = loop {
        let t: f64 = rng.gen_range(0.0..2.0 * PI);
        let accept: f64 = rng.gen();
        if accept < (1.0 + ratio * math::sin_cos(t).1) / (1.0 + ratio) {
            break t;
        }
    };
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let (sin_t, cos_t) = math::sin_cos(theta);
    let (sin_p, cos_p) = math::sin_cos(phi);
    let ring = p.torus_major + p.torus_minor * cos_t;
    [ring * cos_p, ring * sin_p, p.torus_minor * sin_t]
}

fn sample_cube(rng: &mut Stream, p: &ShapeParams) -> [f64; 3] {
    // all six faces have equal area
    let face = rng.gen_range(0..6u8);
    let u = rng.gen_range(-p.cube_half..=p.cube_half);
    let v = rng.gen_range(-p.cube_half..=p.cube_half);
    let h = p.cube_half;
    match face {
        0 => [h, u, v],
        1 => [-h, u, v],
        2 => [u, h, v],
        3 => [u, -h, v],
        4 => [u, v, h],
        _ => [u, v, -h],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn sphere_norms_equal_radius_before_normalization() {
        let mut rng = stream(21, "test/shapes/sphere");
        let params = ShapeParams {
            sphere_radius: 1.7,
            ..Default::default()
        };
        let cloud = synth_shape_raw(ShapeKind::Sphere, 500, &mut rng, &params).unwrap();
        for i in 0..cloud.len() {
            let p = cloud.point(i);
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            assert!((norm - 1.7).abs() < 1e-9);
        }
    }

    #[test]
    fn plane_is_flat_before_rotation() {
        let mut rng = stream(22, "test/shapes/plane");
        let cloud =
            synth_shape_raw(ShapeKind::Plane, 200, &mut rng, &ShapeParams::default()).unwrap();
        for i in 0..cloud.len() {
            assert_eq!(cloud.point(i)[2], 0.0);
        }
    }

    #[test]
    fn torus_axis_distance_bounds() {
        let mut rng = stream(23, "test/shapes/torus");
        let cloud =
            synth_shape_raw(ShapeKind::Torus, 2000, &mut rng, &ShapeParams::default()).unwrap();
        for i in 0..cloud.len() {
            let p = cloud.point(i);
            let d = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((0.7 - 1e-6..=1.3 + 1e-6).contains(&d), "axis distance {d}");
        }
    }

    #[test]
    fn cube_points_on_faces() {
        let mut rng = stream(24, "test/shapes/cube");
        let cloud =
            synth_shape_raw(ShapeKind::CubeSurface, 500, &mut rng, &ShapeParams::default())
                .unwrap();
        for i in 0..cloud.len() {
            let p = cloud.point(i);
            let on_face = p.iter().any(|&c| (c.abs() - 1.0).abs() < 1e-12);
            assert!(on_face);
            assert!(p.iter().all(|&c| c.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!("pyramid".parse::<ShapeKind>().is_err());
        assert!("torus".parse::<ShapeKind>().is_ok());
    }

    #[test]
    fn too_few_points_rejected() {
        let mut rng = stream(25, "test/shapes/minn");
        assert!(synth_shape(ShapeKind::Plane, 3, &mut rng, &ShapeParams::default()).is_err());
    }

    #[test]
    fn synth_is_normalized() {
        let mut rng = stream(26, "test/shapes/norm");
        let cloud =
            synth_shape(ShapeKind::Torus, 300, &mut rng, &ShapeParams::default()).unwrap();
        let max = (0..cloud.len())
            .map(|i| {
                let p = cloud.point(i);
                (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
            })
            .fold(0.0f64, f64::max);
        assert!((max - 1.0).abs() < 1e-9);
    }
}
