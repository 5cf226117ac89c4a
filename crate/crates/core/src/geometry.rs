//! Pinhole projection, rigid transforms and rotation utilities.
//!
//! Conventions: poses are egocentric (object frame to camera frame,
//! `X_cam = R * X + t`), the camera has a single focal length in pixels and
//! its principal point sits at the image center. Rotation increments used by
//! the refiners are right-multiplied axis-angle vectors, `R <- R * exp([w]x)`.

use core::ops::Mul;

use nalgebra::{Matrix2x6, Matrix2xX, Matrix3, Rotation3, UnitQuaternion, Vector2, Vector3};
use num_traits::Float;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec2 = Vector2<f64>;

/// Points closer to the camera plane than this are rejected.
pub const CHEIRALITY_EPS: f64 = 1e-9;

/// Tolerance used to validate externally supplied rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;

/// A proper rotation stored as an orthonormal 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Validates orthonormality and a positive determinant within [`ROTATION_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let r = Self(m);
        if r.is_valid(ROTATION_TOL) {
            Ok(r)
        } else {
            Err(Error::Domain("matrix is not a proper rotation"))
        }
    }

    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::exp(&(axis * (angle / n)))
    }

    /// Exponential map of an axis-angle vector.
    pub fn exp(omega: &Vec3) -> Self {
        Self(*Rotation3::new(*omega).matrix())
    }

    /// Axis-angle vector with norm in `[0, pi]`.
    pub fn log(&self) -> Vec3 {
        Rotation3::from_matrix_unchecked(self.0).scaled_axis()
    }

    /// Builds a rotation from a quaternion in `w, x, y, z` order. The input
    /// does not need to be normalized.
    pub fn from_quaternion_wxyz(q: [f64; 4]) -> Result<Self> {
        let v = nalgebra::Vector4::new(q[1], q[2], q[3], q[0]);
        if !v.iter().all(|c| c.is_finite()) || v.norm() < 1e-12 {
            return Err(Error::Domain("quaternion must be finite and non-zero"));
        }
        let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from_vector(v));
        Ok(Self(*uq.to_rotation_matrix().matrix()))
    }

    /// Unit quaternion in `w, x, y, z` order with `w >= 0`.
    pub fn to_quaternion_wxyz(&self) -> [f64; 4] {
        let uq = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0));
        let q = uq.quaternion();
        let s = if q.w < 0.0 { -1.0 } else { 1.0 };
        [s * q.w, s * q.i, s * q.j, s * q.k]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// Applies a right-multiplied axis-angle increment.
    pub fn retract(&self, delta: &Vec3) -> Self {
        Self(self.0 * Self::exp(delta).0)
    }

    /// Projects back onto SO(3) to remove accumulated rounding.
    pub fn renormalized(&self) -> Self {
        let uq = UnitQuaternion::from_matrix(&self.0);
        Self(*uq.to_rotation_matrix().matrix())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let m = &self.0;
        if !m.iter().all(|v| v.is_finite()) {
            return false;
        }
        let err = (m.transpose() * m - Matrix3::identity()).abs().max();
        err <= tol && (m.determinant() - 1.0).abs() <= tol
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for &Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Object-to-camera rigid transform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidPose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(&rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidPose) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: &self.rotation * other.translation + self.translation,
        }
    }
}

/// Returns `R * point + t`.
pub fn transform_point(pose: &RigidPose, point: &Vec3) -> Vec3 {
    &pose.rotation * *point + pose.translation
}

/// Square-pixel pinhole camera with the principal point at the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub focal_px: f64,
    pub principal_point: Vec2,
    pub width: u32,
    pub height: u32,
}

impl PinholeCamera {
    pub fn new(focal_px: f64, width: u32, height: u32) -> Result<Self> {
        if !(focal_px > 0.0 && focal_px.is_finite()) {
            return Err(Error::Domain("focal length must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image size must be non-zero"));
        }
        Ok(Self {
            focal_px,
            principal_point: Vec2::new(f64::from(width) / 2.0, f64::from(height) / 2.0),
            width,
            height,
        })
    }

    /// Same geometry with a different focal length.
    pub fn with_focal(&self, focal_px: f64) -> Self {
        Self { focal_px, ..*self }
    }

    pub fn image_diagonal(&self) -> f64 {
        Float::hypot(f64::from(self.width), f64::from(self.height))
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= f64::from(self.width) && p.y <= f64::from(self.height)
    }
}

/// Projects a camera-frame point.
pub fn project_camera_point(p_cam: &Vec3, focal: f64, pp: &Vec2) -> Result<Vec2> {
    if !(p_cam.z > CHEIRALITY_EPS) {
        return Err(Error::CheiralityViolation { depth: p_cam.z });
    }
    let inv_z = 1.0 / p_cam.z;
    Ok(Vec2::new(
        focal * p_cam.x * inv_z + pp.x,
        focal * p_cam.y * inv_z + pp.y,
    ))
}

/// Projects an object-frame point into the image.
pub fn project(point: &Vec3, pose: &RigidPose, camera: &PinholeCamera) -> Result<Vec2> {
    project_camera_point(
        &transform_point(pose, point),
        camera.focal_px,
        &camera.principal_point,
    )
}

/// Minimal angle between two rotations, in `[0, pi]`.
///
/// The cosine comes from the trace of `a^T b` and the sine from its
/// antisymmetric part; `atan2` keeps full precision near both 0 and pi.
pub fn geodesic_distance(a: &Rotation, b: &Rotation) -> f64 {
    let rel = a.matrix().transpose() * b.matrix();
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let axis = Vec3::new(
        rel[(2, 1)] - rel[(1, 2)],
        rel[(0, 2)] - rel[(2, 0)],
        rel[(1, 0)] - rel[(0, 1)],
    );
    let s = (axis.norm() / 2.0).min(1.0);
    Float::atan2(s, c)
}

/// `ln f`, the focal coordinate shared by the predictor and the refiners.
pub fn log_focal(f: f64) -> Result<f64> {
    if f > 0.0 && f.is_finite() {
        Ok(Float::ln(f))
    } else {
        Err(Error::Domain("focal length must be positive and finite"))
    }
}

pub fn exp_focal(y: f64) -> f64 {
    Float::exp(y)
}

/// Projection of one point together with its derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PointLinearization {
    pub projection: Vec2,
    /// Columns: rotation increment (3), translation (3).
    pub pose: Matrix2x6<f64>,
    /// Derivative with respect to `ln f`.
    pub log_focal: Vec2,
}

pub(crate) fn linearize(
    point: &Vec3,
    pose: &RigidPose,
    focal: f64,
    pp: &Vec2,
) -> Result<PointLinearization> {
    let p_cam = transform_point(pose, point);
    let projection = project_camera_point(&p_cam, focal, pp)?;
    let inv_z = 1.0 / p_cam.z;
    let x = p_cam.x * inv_z;
    let y = p_cam.y * inv_z;

    // d(u,v)/d(p_cam)
    let d_proj = nalgebra::Matrix2x3::new(
        focal * inv_z,
        0.0,
        -focal * x * inv_z,
        0.0,
        focal * inv_z,
        -focal * y * inv_z,
    );
    // p_cam = R exp([w]x) X + t  =>  d p_cam / d w = -R [X]x
    let d_rot = -(pose.rotation.matrix() * point.cross_matrix());

    let mut jac = Matrix2x6::zeros();
    jac.fixed_view_mut::<2, 3>(0, 0)
        .copy_from(&(d_proj * d_rot));
    jac.fixed_view_mut::<2, 3>(0, 3).copy_from(&d_proj);

    Ok(PointLinearization {
        projection,
        pose: jac,
        log_focal: Vec2::new(focal * x, focal * y),
    })
}

/// Analytic Jacobian of [`project`] with respect to the local parametrization
/// `[rotation increment (3), translation (3), ln f increment (1)]`. The focal
/// column is omitted when `refine_focal` is false.
pub fn projection_jacobian(
    point: &Vec3,
    pose: &RigidPose,
    camera: &PinholeCamera,
    refine_focal: bool,
) -> Result<Matrix2xX<f64>> {
    let lin = linearize(point, pose, camera.focal_px, &camera.principal_point)?;
    let cols = if refine_focal { 7 } else { 6 };
    let mut out = Matrix2xX::zeros(cols);
    out.columns_mut(0, 6).copy_from(&lin.pose);
    if refine_focal {
        out.set_column(6, &lin.log_focal);
    }
    Ok(out)
}
