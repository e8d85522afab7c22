//! Local plane approximation from sparse surface points.
//!
//! A sample of `L >= 3` points is reduced to a [`Plane`] via PCA of the point
//! scatter matrix, and a [`LocalFrame`] is attached to the plane with its
//! x-axis pointing from the centroid toward the first point. All lengths are
//! in millimetres.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// `|n_z|` at or below this value marks a plane that is not a local height map.
pub const VERTICAL_EPS: f64 = 1e-6;

/// Points are treated as collinear when `λ_mid / λ_max` of the scatter matrix
/// falls below this ratio.
pub const COLLINEAR_RATIO: f64 = 1e-10;

/// Minimum in-plane length of `p1 - p_c` for a well-defined frame x-axis (mm).
pub const FRAME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need at least 3 distinct points, got {0}")]
    DuplicatePoints(usize),
    #[error("measurement points are collinear")]
    CollinearPoints,
    #[error("plane is vertical (|n_z| = {0:e}), height is undefined")]
    VerticalPlane(f64),
    #[error("first point projects onto the centroid, frame x-axis is undefined")]
    DegenerateFrame,
    #[error("non-finite point coordinate")]
    NonFinite,
}

/// Plane `n · q = offset` through `centroid`, with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub centroid: Vec3,
}

impl Plane {
    /// Builds a plane from a (not necessarily unit) normal and a point on it.
    /// The normal is normalized but its sign is kept.
    pub fn from_normal_and_point(normal: Vec3, point: Vec3) -> Self {
        let normal = normal.normalize();
        Self {
            normal,
            offset: normal.dot(&point),
            centroid: point,
        }
    }

    /// Signed distance of `q` from the plane along the normal.
    pub fn signed_distance(&self, q: &Vec3) -> f64 {
        self.normal.dot(q) - self.offset
    }

    pub fn is_height_map(&self) -> bool {
        self.normal.z.abs() > VERTICAL_EPS
    }

    /// Height of the plane above `(x, y)`: `z = (p - n_x x - n_y y) / n_z`.
    pub fn height_at(&self, x: f64, y: f64) -> Result<f64, GeometryError> {
        if !self.is_height_map() {
            return Err(GeometryError::VerticalPlane(self.normal.z.abs()));
        }
        Ok(self.height_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn height_unchecked(&self, x: f64, y: f64) -> f64 {
        (self.offset - self.normal.x * x - self.normal.y * y) / self.normal.z
    }

    /// Orthogonal projection of `q` onto the plane.
    pub fn project(&self, q: &Vec3) -> Vec3 {
        q - (q - self.centroid).dot(&self.normal) * self.normal
    }
}

/// Fits a plane to `points` by PCA: the normal is the eigenvector of the
/// scatter matrix belonging to its smallest eigenvalue.
///
/// The normal is oriented so that `n_z > 0`; for (near) vertical planes the
/// first of `n_x`, `n_y` that is clearly nonzero is made positive instead.
pub fn fit_plane_pca(points: &[Vec3]) -> Result<Plane, GeometryError> {
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(GeometryError::NonFinite);
    }
    let distinct = count_distinct(points);
    if distinct < 3 {
        return Err(GeometryError::DuplicatePoints(distinct));
    }

    let n = points.len() as f64;
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        scatter += d * d.transpose();
    }
    scatter /= n;

    // Scale to unit magnitude so the thresholds below are unit-free.
    let scale = scatter.amax();
    let scatter = scatter / scale;
    let eigenvalues = symmetric_eigenvalues(&scatter);
    if eigenvalues[1] <= COLLINEAR_RATIO * eigenvalues[2] {
        return Err(GeometryError::CollinearPoints);
    }
    let normal = orient_normal(eigenvector_for(&scatter, eigenvalues[0]));

    Ok(Plane {
        normal,
        offset: normal.dot(&centroid),
        centroid,
    })
}

fn count_distinct(points: &[Vec3]) -> usize {
    let mut distinct: Vec<&Vec3> = Vec::with_capacity(points.len());
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    distinct.len()
}

fn orient_normal(n: Vec3) -> Vec3 {
    let flip = if n.z.abs() > VERTICAL_EPS {
        n.z < 0.0
    } else if n.x.abs() > VERTICAL_EPS {
        n.x < 0.0
    } else {
        n.y < 0.0
    };
    if flip {
        -n
    } else {
        n
    }
}

/// Eigenvalues of a symmetric 3×3 matrix in ascending order, via the
/// trigonometric solution of the characteristic polynomial.
pub fn symmetric_eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        d.sort_by(f64::total_cmp);
        return d;
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let middle = 3.0 * q - largest - smallest;
    [smallest, middle, largest]
}

/// Unit eigenvector of symmetric `a` for the (simple) eigenvalue `lambda`.
fn eigenvector_for(a: &Matrix3<f64>, lambda: f64) -> Vec3 {
    let m = a - Matrix3::identity() * lambda;
    let rows = [
        m.row(0).transpose(),
        m.row(1).transpose(),
        m.row(2).transpose(),
    ];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .copied()
        .unwrap_or_else(Vec3::zeros);
    if best.norm_squared() > f64::EPSILON * f64::EPSILON {
        return best.normalize();
    }
    // Repeated eigenvalue: any direction orthogonal to the row space works.
    let row = rows
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .copied()
        .unwrap_or_else(Vec3::zeros);
    if row.norm_squared() <= f64::EPSILON * f64::EPSILON {
        return Vec3::z();
    }
    let helper = if row.x.abs() < 0.9 * row.norm() {
        Vec3::x()
    } else {
        Vec3::y()
    };
    row.cross(&helper).normalize()
}

/// Height of `plane` above `(x, y)`.
pub fn plane_height_at(plane: &Plane, x: f64, y: f64) -> Result<f64, GeometryError> {
    plane.height_at(x, y)
}

/// Orthogonal projection of `q` onto `plane`.
pub fn project_to_plane(plane: &Plane, q: &Vec3) -> Vec3 {
    plane.project(q)
}

/// Frame `{A}` on an approximation plane: origin at the centroid, columns of
/// `rotation` are `e_x`, `n × e_x` and `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    pub rotation: Matrix3<f64>,
}

impl LocalFrame {
    pub fn identity() -> Self {
        Self {
            origin: Vec3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn x_axis(&self) -> Vec3 {
        self.rotation.column(0).into_owned()
    }

    pub fn y_axis(&self) -> Vec3 {
        self.rotation.column(1).into_owned()
    }

    pub fn normal(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    /// `q' = Rᵀ (q - origin)`.
    #[inline]
    pub fn to_local(&self, q: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(q - self.origin))
    }

    #[inline]
    pub fn from_local(&self, q: &Vec3) -> Vec3 {
        self.rotation * q + self.origin
    }
}

/// Builds `{A}` for `plane`, taking `e_x` along the in-plane projection of
/// `p1 - p_c`.
pub fn build_local_frame(plane: &Plane, p1: &Vec3) -> Result<LocalFrame, GeometryError> {
    let n = plane.normal;
    let v = p1 - plane.centroid;
    let in_plane = v - v.dot(&n) * n;
    let len = in_plane.norm();
    if !(len > FRAME_EPS) {
        return Err(GeometryError::DegenerateFrame);
    }
    let ex = in_plane / len;
    let ey = n.cross(&ex);
    Ok(LocalFrame {
        origin: plane.centroid,
        rotation: Matrix3::from_columns(&[ex, ey, n]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn example_points() -> [Vec3; 3] {
        [v(5.0, 5.0, 5.0), v(13.0, 7.0, 7.0), v(9.0, 13.0, 10.0)]
    }

    fn cross_normal(p: &[Vec3; 3]) -> Vec3 {
        let n = (p[1] - p[0]).cross(&(p[2] - p[0])).normalize();
        if n.z < 0.0 {
            -n
        } else {
            n
        }
    }

    #[test]
    fn unit_triangle_in_xy_plane() {
        let plane = fit_plane_pca(&[v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)]).unwrap();
        assert!((plane.normal - Vec3::z()).norm() < 1e-12);
        assert!(plane.offset.abs() < 1e-12);
        assert!((plane.centroid - v(1.0 / 3.0, 1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn example_points_match_cross_product() {
        let pts = example_points();
        let plane = fit_plane_pca(&pts).unwrap();
        assert!((plane.normal - cross_normal(&pts)).norm() < 1e-9);
        for p in &pts {
            assert!(plane.signed_distance(p).abs() < 1e-9);
            let z = plane.height_at(p.x, p.y).unwrap();
            assert!((z - p.z).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_known_plane_from_many_points() {
        // 2x - y + 2z = 6
        let mut pts = Vec::new();
        for k in 0..50 {
            let x = (k as f64 * 0.731).sin() * 40.0;
            let y = (k as f64 * 1.377).cos() * 25.0 + k as f64 * 0.1;
            let z = (6.0 - 2.0 * x + y) / 2.0;
            pts.push(v(x, y, z));
        }
        let plane = fit_plane_pca(&pts).unwrap();
        let expected = v(2.0, -1.0, 2.0) / 3.0;
        assert!((plane.normal - expected).norm() < 1e-9);
        assert!((plane.offset - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_duplicates_and_collinear() {
        let a = v(1.0, 2.0, 3.0);
        assert_eq!(
            fit_plane_pca(&[a, a, v(0.0, 0.0, 0.0)]),
            Err(GeometryError::DuplicatePoints(2))
        );
        assert_eq!(fit_plane_pca(&[a, a]), Err(GeometryError::DuplicatePoints(1)));
        assert_eq!(
            fit_plane_pca(&[v(0.0, 0.0, 0.0), v(1.0, 1.0, 1.0), v(2.0, 2.0, 2.0)]),
            Err(GeometryError::CollinearPoints)
        );
        assert_eq!(
            fit_plane_pca(&[v(f64::NAN, 0.0, 0.0), v(1.0, 1.0, 1.0), v(2.0, 0.0, 2.0)]),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn vertical_plane_sign_and_height_error() {
        let plane = fit_plane_pca(&[v(1.0, 0.0, 0.0), v(1.0, 5.0, 0.0), v(1.0, 0.0, 5.0)]).unwrap();
        assert!((plane.normal - Vec3::x()).norm() < 1e-12);
        assert!(matches!(plane.height_at(0.0, 0.0), Err(GeometryError::VerticalPlane(_))));
    }

    #[test]
    fn plane_heights() {
        let flat = Plane::from_normal_and_point(Vec3::z(), v(0.0, 0.0, 5.0));
        assert_eq!(flat.height_at(123.0, -4.0).unwrap(), 5.0);
        let ramp = fit_plane_pca(&[v(0.0, 0.0, 0.0), v(1.0, 0.0, 1.0), v(0.0, 1.0, 0.0)]).unwrap();
        assert!((ramp.height_at(0.5, 0.0).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn local_frame_basics() {
        let plane = Plane::from_normal_and_point(Vec3::z(), Vec3::zeros());
        let frame = build_local_frame(&plane, &v(2.0, 0.0, 0.0)).unwrap();
        assert!((frame.rotation - Matrix3::identity()).norm() < 1e-15);
        assert_eq!(frame.to_local(&frame.origin), Vec3::zeros());

        let pts = example_points();
        let plane = fit_plane_pca(&pts).unwrap();
        let frame = build_local_frame(&plane, &pts[0]).unwrap();
        let r = frame.rotation;
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
        assert_eq!(frame.normal(), plane.normal);
        assert!(frame.x_axis().dot(&plane.normal).abs() < 1e-15);
        for p in &pts {
            assert!(frame.to_local(p).z.abs() < 1e-9);
        }
        assert!(frame.to_local(&pts[0]).x > 0.0);
    }

    #[test]
    fn degenerate_frame() {
        let plane = Plane::from_normal_and_point(Vec3::z(), Vec3::zeros());
        assert_eq!(
            build_local_frame(&plane, &v(0.0, 0.0, 4.0)),
            Err(GeometryError::DegenerateFrame)
        );
    }

    #[test]
    fn projection() {
        let plane = Plane::from_normal_and_point(Vec3::z(), Vec3::zeros());
        assert_eq!(project_to_plane(&plane, &v(1.0, 2.0, 7.0)), v(1.0, 2.0, 0.0));
        let q = v(1.0, 2.0, 0.0);
        assert_eq!(project_to_plane(&plane, &q), q);
    }

    #[test]
    fn eigenvalues_of_diagonal_and_dense() {
        let d = Matrix3::from_diagonal(&v(3.0, 1.0, 2.0));
        assert_eq!(symmetric_eigenvalues(&d), [1.0, 2.0, 3.0]);
        let a = Matrix3::new(2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0);
        let e = symmetric_eigenvalues(&a);
        for (got, want) in e.iter().zip([1.0, 3.0, 5.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }
}
