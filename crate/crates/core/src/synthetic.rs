//! Seeded synthetic shapes used for offline, desk-scale experiments.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{ensure_arg, Error, Result};

const TORUS_MAJOR: f64 = 1.0;
const TORUS_MINOR: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Cube,
    Torus,
    Plane,
}

impl Shape {
    pub const ALL: [Shape; 4] = [Shape::Sphere, Shape::Cube, Shape::Torus, Shape::Plane];

    /// Radius of the smallest origin-centered sphere containing the raw shape.
    fn circumradius(&self) -> f64 {
        match self {
            Shape::Sphere => 1.0,
            Shape::Cube => 3f64.sqrt(),
            Shape::Torus => TORUS_MAJOR + TORUS_MINOR,
            Shape::Plane => 2f64.sqrt(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Cube => "cube",
            Shape::Torus => "torus",
            Shape::Plane => "plane",
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL
            .into_iter()
            .find(|shape| shape.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown shape '{s}'")))
    }
}

/// `n` points on the surface of `shape`, centered at the origin and scaled so
/// the ideal surface fits exactly inside the unit sphere.
///
/// Centering and scaling use the ideal shape, not the sample, so points stay
/// exactly on the ideal surface. Output is a pure function of
/// `(shape, n, seed)`.
pub fn make_synthetic(shape: Shape, n: usize, seed: u64) -> Result<PointCloud> {
    ensure_arg!(n >= 8, "synthetic shapes need at least 8 points, got {n}");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Array2::<f64>::zeros((n, 3));
    for mut row in pts.rows_mut() {
        let p = match shape {
            Shape::Sphere => sphere_point(&mut rng),
            Shape::Cube => cube_point(&mut rng),
            Shape::Torus => torus_point(&mut rng),
            Shape::Plane => [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0), 0.0],
        };
        row[0] = p[0];
        row[1] = p[1];
        row[2] = p[2];
    }
    let radius = shape.circumradius();
    pts.mapv_inplace(|v| v / radius);
    Ok(PointCloud::new(pts)?.with_name(format!("{shape}-{seed}")))
}

/// `n` area-uniform points on the surface of an axis-aligned box with the
/// given half-extents, scaled so its corners lie on the unit sphere.
pub fn make_box(half_extents: [f64; 3], n: usize, seed: u64) -> Result<PointCloud> {
    ensure_arg!(n >= 8, "synthetic shapes need at least 8 points, got {n}");
    ensure_arg!(
        half_extents.iter().all(|&e| e > 0.0 && e.is_finite()),
        "box half-extents must be positive, got {half_extents:?}"
    );
    let [a, b, c] = half_extents;
    let areas = [b * c, a * c, a * b];
    let total: f64 = areas.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Array2::<f64>::zeros((n, 3));
    for mut row in pts.rows_mut() {
        let mut pick = rng.random::<f64>() * total;
        let mut axis = 2;
        for (k, &area) in areas.iter().enumerate() {
            if pick < area {
                axis = k;
                break;
            }
            pick -= area;
        }
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        for k in 0..3 {
            row[k] = if k == axis {
                sign * half_extents[k]
            } else {
                rng.random_range(-half_extents[k]..=half_extents[k])
            };
        }
    }
    let radius = (a * a + b * b + c * c).sqrt();
    pts.mapv_inplace(|v| v / radius);
    Ok(PointCloud::new(pts)?.with_name(format!("box-{seed}")))
}

fn sphere_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-9 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

fn cube_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let face = rng.random_range(0..6usize);
    let axis = face / 2;
    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
    let mut p = [0.0; 3];
    for (k, v) in p.iter_mut().enumerate() {
        *v = if k == axis {
            sign
        } else {
            rng.random_range(-1.0..=1.0)
        };
    }
    p
}

/// Area-uniform on the torus surface via rejection on the tube angle.
fn torus_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let theta = rng.random::<f64>() * TAU;
    let phi = loop {
        let phi = rng.random::<f64>() * TAU;
        let accept = (TORUS_MAJOR + TORUS_MINOR * phi.cos()) / (TORUS_MAJOR + TORUS_MINOR);
        if rng.random::<f64>() <= accept {
            break phi;
        }
    };
    let ring = TORUS_MAJOR + TORUS_MINOR * phi.cos();
    [ring * theta.cos(), ring * theta.sin(), TORUS_MINOR * phi.sin()]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_radii_are_constant() {
        let c = make_synthetic(Shape::Sphere, 256, 0).unwrap();
        assert_eq!(c.len(), 256);
        let radii: Vec<f64> = c.points().rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let r0 = radii[0];
        assert!(r0 <= 1.0 + 1e-12);
        assert!(radii.iter().all(|r| (r - r0).abs() <= 1e-6));
    }

    #[test]
    fn plane_has_a_constant_coordinate() {
        let c = make_synthetic(Shape::Plane, 64, 1).unwrap();
        assert_eq!(c.len(), 64);
        assert!(c.points().column(2).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn cube_points_lie_on_faces() {
        let c = make_synthetic(Shape::Cube, 300, 4).unwrap();
        let half = c
            .points()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        for row in c.points().rows() {
            let on_face = row.iter().any(|v| (v.abs() - half).abs() <= 1e-6);
            assert!(on_face);
            assert!(row.iter().all(|v| v.abs() <= half + 1e-12));
        }
    }

    #[test]
    fn torus_points_satisfy_implicit_equation() {
        let c = make_synthetic(Shape::Torus, 300, 2).unwrap();
        let scale = 1.0 / (TORUS_MAJOR + TORUS_MINOR);
        let (big, small) = (TORUS_MAJOR * scale, TORUS_MINOR * scale);
        for row in c.points().rows() {
            let q = (row[0] * row[0] + row[1] * row[1]).sqrt() - big;
            let residual = (q * q + row[2] * row[2]).sqrt() - small;
            assert!(residual.abs() <= 1e-6, "residual {residual}");
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        for shape in Shape::ALL {
            let a = make_synthetic(shape, 128, 7).unwrap();
            let b = make_synthetic(shape, 128, 7).unwrap();
            let c = make_synthetic(shape, 128, 8).unwrap();
            assert_eq!(a.points(), b.points());
            assert_ne!(a.points(), c.points());
        }
    }

    #[test]
    fn box_points_lie_on_faces() {
        let c = make_box([1.0, 0.5, 0.25], 400, 3).unwrap();
        let s = (1.0f64 + 0.25 + 0.0625).sqrt();
        let half = [1.0 / s, 0.5 / s, 0.25 / s];
        let mut per_axis = [0usize; 3];
        for row in c.points().rows() {
            let face = (0..3).find(|&k| (row[k].abs() - half[k]).abs() <= 1e-12).expect("on a face");
            per_axis[face] += 1;
            assert!((0..3).all(|k| row[k].abs() <= half[k] + 1e-12));
        }
        assert!(per_axis[2] > per_axis[1] && per_axis[1] > per_axis[0]);
        assert!(make_box([1.0, 0.0, 1.0], 16, 0).is_err());
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(matches!(make_synthetic(Shape::Cube, 7, 0), Err(Error::Argument(_))));
    }

    #[test]
    fn shape_names_parse() {
        for shape in Shape::ALL {
            assert_eq!(shape.name().parse::<Shape>().unwrap(), shape);
        }
        assert!("cone".parse::<Shape>().is_err());
    }
}
