//! Point clouds, rigid transforms and the three flavors of a downsampled set.

use nalgebra::{Quaternion, Unit, UnitQuaternion, Vector3};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_arg, Error, Result};

/// An unordered set of 3D points stored row-wise as an `[n×3]` array.
///
/// Row order carries no meaning. Every operation in this crate either ignores
/// it or says explicitly that it does not.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    pub label: Option<usize>,
    pub name: Option<String>,
}

impl PointCloud {
    pub fn new(points: Array2<f64>) -> Result<Self> {
        ensure_arg!(points.ncols() == 3, "point array must have 3 columns, got {}", points.ncols());
        ensure_arg!(points.nrows() >= 1, "point cloud must contain at least one point");
        ensure_arg!(points.iter().all(|v| v.is_finite()), "point coordinates must be finite");
        Ok(Self {
            points,
            label: None,
            name: None,
        })
    }

    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let points = Array2::from_shape_vec((rows.len(), 3), flat)
            .map_err(|e| Error::arg(e.to_string()))?;
        Self::new(points)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.points.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn into_points(self) -> Array2<f64> {
        self.points
    }

    /// Rows gathered in the given order. Metadata is kept.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        ensure_arg!(!indices.is_empty(), "cannot select an empty subset");
        ensure_arg!(
            indices.iter().all(|&i| i < self.len()),
            "subset index out of range for a cloud of {} points",
            self.len()
        );
        Ok(Self {
            points: self.points.select(Axis(0), indices),
            label: self.label,
            name: self.name.clone(),
        })
    }

    /// Row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        ensure_arg!(perm.len() == self.len(), "permutation length mismatch");
        let mut seen = vec![false; perm.len()];
        for &p in perm {
            ensure_arg!(p < perm.len() && !seen[p], "not a permutation");
            seen[p] = true;
        }
        self.select(perm)
    }

    pub fn centroid(&self) -> [f64; 3] {
        let c = self.points.mean_axis(Axis(0)).expect("nonempty cloud");
        [c[0], c[1], c[2]]
    }

    /// Centered at the centroid and scaled so the farthest point sits on the unit sphere.
    pub fn normalized(&self) -> Self {
        let c = self.centroid();
        let mut pts = self.points.clone();
        for mut row in pts.rows_mut() {
            for k in 0..3 {
                row[k] -= c[k];
            }
        }
        let radius = max_radius(&pts);
        if radius > 0.0 {
            pts.mapv_inplace(|v| v / radius);
        }
        Self {
            points: pts,
            label: self.label,
            name: self.name.clone(),
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: t.apply(&self.points),
            label: self.label,
            name: self.name.clone(),
        }
    }
}

pub(crate) fn max_radius(points: &Array2<f64>) -> f64 {
    points
        .rows()
        .into_iter()
        .map(|r| r.dot(&r).sqrt())
        .fold(0.0, f64::max)
}

/// Rotation as a unit quaternion plus a translation; maps `p` to `R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// `quaternion` is `[w, x, y, z]` and must have unit norm within 1e-6.
    pub fn new(quaternion: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        let [w, x, y, z] = quaternion;
        let q = Quaternion::new(w, x, y, z);
        ensure_arg!(
            (q.norm() - 1.0).abs() <= 1e-6,
            "rotation quaternion must be unit length, got norm {}",
            q.norm()
        );
        Ok(Self {
            rotation: UnitQuaternion::new_unchecked(q),
            translation: Vector3::from(translation),
        })
    }

    /// Like [`RigidTransform::new`] but normalizes the quaternion first.
    pub fn from_raw(quaternion: [f64; 4], translation: [f64; 3]) -> Result<Self> {
        let [w, x, y, z] = quaternion;
        let q = Quaternion::new(w, x, y, z);
        ensure_arg!(q.norm() > 0.0 && q.norm().is_finite(), "quaternion must be nonzero and finite");
        Ok(Self {
            rotation: UnitQuaternion::from_quaternion(q),
            translation: Vector3::from(translation),
        })
    }

    pub fn from_axis_angle(axis: [f64; 3], angle_rad: f64, translation: [f64; 3]) -> Result<Self> {
        let axis = Vector3::from(axis);
        ensure_arg!(axis.norm() > 0.0, "rotation axis must be nonzero");
        Ok(Self {
            rotation: UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle_rad),
            translation: Vector3::from(translation),
        })
    }

    /// Axis uniform on the sphere, angle uniform in `[0, max_angle_deg]`,
    /// translation uniform in the ball of radius `max_translation`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_angle_deg: f64, max_translation: f64) -> Self {
        let axis = random_unit_vector(rng);
        let angle = rng.random::<f64>() * max_angle_deg.to_radians();
        let dir = random_unit_vector(rng);
        let radius = max_translation * rng.random::<f64>().cbrt();
        Self {
            rotation: UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle),
            translation: dir * radius,
        }
    }

    /// `[w, x, y, z]`.
    pub fn quaternion(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn translation(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let m = self.rotation.to_rotation_matrix();
        let m = m.matrix();
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn apply(&self, points: &Array2<f64>) -> Array2<f64> {
        let mut out = points.clone();
        for mut row in out.rows_mut() {
            let p = self.rotation * Vector3::new(row[0], row[1], row[2]) + self.translation;
            row[0] = p.x;
            row[1] = p.y;
            row[2] = p.z;
        }
        out
    }

    /// Geodesic angle between the two rotations in degrees; sign of either quaternion is irrelevant.
    pub fn rotation_angle_to(&self, other: &Self) -> f64 {
        quaternion_angle_deg(self.quaternion(), other.quaternion())
    }
}

/// Geodesic angle between the rotations of two unit quaternions, in degrees.
///
/// Equals `2·acos(|⟨a, b⟩|)` but is evaluated as `4·atan2(|a − sb|, |a + sb|)`
/// with `s = sign⟨a, b⟩`, which stays accurate near zero and gives exactly 0
/// for identical inputs.
pub fn quaternion_angle_deg(a: [f64; 4], b: [f64; 4]) -> f64 {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let sign = if dot < 0.0 { -1.0 } else { 1.0 };
    let (mut diff, mut sum) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(&b) {
        diff += (x - sign * y).powi(2);
        sum += (x + sign * y).powi(2);
    }
    (4.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees()
}

fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::<f64>::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// The three sampled-set flavors: raw `SᵀP` output, its nearest-neighbor
/// projection into the source, and that projection completed to exactly `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct DownsampleResult {
    pub generated: Array2<f64>,
    pub matched: Vec<usize>,
    pub completed: Vec<usize>,
}

impl DownsampleResult {
    pub fn m(&self) -> usize {
        self.completed.len()
    }
}

/// Which of the three flavors of a downsampled set a metric refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum SetKind {
    Generated,
    Matched,
    Completed,
}

impl SetKind {
    pub const ALL: [SetKind; 3] = [SetKind::Generated, SetKind::Matched, SetKind::Completed];

    pub fn short(&self) -> &'static str {
        match self {
            SetKind::Generated => "G",
            SetKind::Matched => "M",
            SetKind::Completed => "C",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_clouds() {
        assert!(PointCloud::new(Array2::zeros((0, 3))).is_err());
        assert!(PointCloud::new(Array2::zeros((4, 2))).is_err());
        assert!(PointCloud::new(array![[0.0, f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn normalized_has_unit_radius() {
        let c = PointCloud::from_rows(&[[1.0, 1.0, 1.0], [3.0, 1.0, 1.0], [2.0, 2.0, 1.0]]).unwrap();
        let n = c.normalized();
        let r = max_radius(n.points());
        assert!((r - 1.0).abs() < 1e-12);
        assert!(n.centroid().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn quaternion_validation() {
        assert!(RigidTransform::new([1.0, 0.0, 0.0, 0.0], [0.0; 3]).is_ok());
        assert!(RigidTransform::new([1.0, 0.1, 0.0, 0.0], [0.0; 3]).is_err());
        let t = RigidTransform::from_raw([2.0, 0.0, 0.0, 0.0], [0.0; 3]).unwrap();
        assert_eq!(t.quaternion(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn inverse_round_trips_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = RigidTransform::random(&mut rng, 45.0, 0.3);
        let p = array![[0.1, 0.2, 0.3], [-1.0, 0.5, 0.0]];
        let back = t.inverse().apply(&t.apply(&p));
        for (a, b) in back.iter().zip(p.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_transform_respects_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let t = RigidTransform::random(&mut rng, 45.0, 0.3);
            assert!(t.rotation_angle_to(&RigidTransform::identity()) <= 45.0 + 1e-9);
            let tr = t.translation();
            assert!((tr[0] * tr[0] + tr[1] * tr[1] + tr[2] * tr[2]).sqrt() <= 0.3 + 1e-12);
        }
    }
}
