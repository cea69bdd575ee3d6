//! Rigid-body poses, pinhole intrinsics, and the three-stage projection
//! pipeline: pose transform, perspective division, intrinsics scaling.
//!
//! Conventions used throughout the crate:
//! - Poses map world coordinates to camera coordinates, `X_cam = R * X_world + T`,
//!   with `T = -R * C` where `C` is the camera center in world coordinates.
//! - The camera looks down +Z: points with positive camera-space z are in
//!   front of the camera and can be projected.
//! - Pixel `(i, j)` covers the area `[i, i+1) x [j, j+1)`, so its center sits
//!   at `(i + 0.5, j + 0.5)` and a continuous image point `p` falls into the
//!   row `floor(p.y)`.

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use thiserror::Error;

/// Scalar 3x3 matrix used for rotations and intrinsics.
pub type Mat3 = Matrix3<f64>;
/// 3-vector (meters, meters/second, radians/second depending on context).
pub type Vec3 = Vector3<f64>;
/// 3D point in meters, world or camera space as declared by the operation.
pub type Point3 = nalgebra::Point3<f64>;

/// Per-entry tolerance for the orthonormality invariant of rotations.
pub const ROTATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// The supplied 3x3 block is not a proper rotation (orthonormal, det +1).
    #[error("matrix is not a rotation: {detail}")]
    InvalidRotation { detail: String },
    /// Camera-space z was non-positive; the point cannot be projected.
    #[error("point behind camera (z = {z})")]
    PointBehindCamera { z: f64 },
    /// Backprojection requires a strictly positive depth.
    #[error("depth must be > 0, got {depth}")]
    NonPositiveDepth { depth: f64 },
    /// Focal lengths must be strictly positive.
    #[error("invalid intrinsics: {detail}")]
    InvalidIntrinsics { detail: String },
}

/// Point on the z = 1 plane after perspective division, in meters.
/// This is the space where radial distortion acts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedPoint2 {
    pub x: f64,
    pub y: f64,
}

impl NormalizedPoint2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Homogeneous lift onto the z = 1 plane.
    pub fn lift(&self) -> Vec3 {
        Vec3::new(self.x, self.y, 1.0)
    }

    /// Drop a homogeneous vector back to the plane by z-division.
    pub fn drop(v: &Vec3) -> Self {
        Self::new(v.x / v.z, v.y / v.z)
    }

    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }
}

/// Image-space point in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint2 {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Index of the image row containing this point.
    pub fn row(&self) -> i64 {
        self.y.floor() as i64
    }

    /// Index of the image column containing this point.
    pub fn col(&self) -> i64 {
        self.x.floor() as i64
    }
}

/// Rigid world-to-camera transform: `X_cam = R * X_world + T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    rotation: Mat3,
    translation: Vec3,
}

impl Pose {
    /// Identity pose: camera at the world origin, no rotation.
    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Build a pose from a rotation and translation, validating orthonormality.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        validate_rotation(&rotation)?;
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Build from a rotation and the camera center `C`; stores `T = -R * C`.
    pub fn from_camera_center(rotation: Mat3, center: Point3) -> Result<Self, GeometryError> {
        validate_rotation(&rotation)?;
        let translation = -(rotation * center.coords);
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Pure translation pose (identity rotation).
    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    /// Rotation from a scaled axis-angle vector (Rodrigues), no translation.
    pub fn from_axis_angle(axis_angle: Vec3) -> Self {
        Self {
            rotation: rotation_exp(axis_angle),
            translation: Vec3::zeros(),
        }
    }

    /// Internal constructor for rotations known to be orthonormal by
    /// construction (matrix exponentials, products of valid rotations).
    pub(crate) fn from_parts_unchecked(rotation: Mat3, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Camera center in world coordinates, `C = -R^T * T`.
    pub fn camera_center(&self) -> Point3 {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Map a world point into camera space.
    pub fn apply(&self, point: &Point3) -> Point3 {
        Point3::from(self.rotation * point.coords + self.translation)
    }

    /// Rotate a direction vector into camera space (no translation).
    pub fn rotate(&self, direction: &Vec3) -> Vec3 {
        self.rotation * direction
    }

    /// Compose two poses: applying the result equals applying `b` then `a`.
    pub fn compose(a: &Pose, b: &Pose) -> Pose {
        Pose {
            rotation: a.rotation * b.rotation,
            translation: a.rotation * b.translation + a.translation,
        }
    }

    /// Inverse transform, camera space back to world space.
    pub fn inverse(&self) -> Pose {
        let rot_t = self.rotation.transpose();
        Pose {
            rotation: rot_t,
            translation: -(rot_t * self.translation),
        }
    }

    /// Re-project the rotation onto the nearest orthonormal matrix (polar
    /// decomposition via SVD). Use after long chains of compositions to
    /// repair accumulated drift.
    pub fn orthonormalized(&self) -> Pose {
        Pose {
            rotation: nearest_rotation(&self.rotation),
            translation: self.translation,
        }
    }

    /// 4x4 homogeneous matrix `[R | T; 0 | 1]`.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Serialize as 12 row-major numbers: the 9 rotation entries then T.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    /// Parse from 12 row-major numbers (R then T), validating the rotation.
    pub fn from_row_major(v: &[f64; 12]) -> Result<Self, GeometryError> {
        let rotation = Mat3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
        Self::new(rotation, Vec3::new(v[9], v[10], v[11]))
    }
}

fn validate_rotation(r: &Mat3) -> Result<(), GeometryError> {
    let gram = r.transpose() * r;
    let max_dev = (gram - Mat3::identity()).abs().max();
    if max_dev > ROTATION_TOL {
        return Err(GeometryError::InvalidRotation {
            detail: format!("R^T R deviates from identity by {max_dev:.3e}"),
        });
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(GeometryError::InvalidRotation {
            detail: format!("det(R) = {det}, expected +1"),
        });
    }
    Ok(())
}

/// Rotation matrix for a scaled axis-angle vector (Rodrigues formula).
pub fn rotation_exp(axis_angle: Vec3) -> Mat3 {
    Rotation3::from_scaled_axis(axis_angle).into_inner()
}

/// Scaled axis-angle vector of a rotation matrix (inverse of [`rotation_exp`]).
pub fn rotation_log(rotation: &Mat3) -> Vec3 {
    Rotation3::from_matrix_unchecked(*rotation).scaled_axis()
}

/// Nearest orthonormal matrix with det +1 (polar factor via SVD).
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Flip the axis of smallest singular value.
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Rotation about the X axis by `angle` radians.
pub fn rot_x(angle: f64) -> Mat3 {
    rotation_exp(Vec3::new(angle, 0.0, 0.0))
}

/// Rotation about the Y axis by `angle` radians.
pub fn rot_y(angle: f64) -> Mat3 {
    rotation_exp(Vec3::new(0.0, angle, 0.0))
}

/// Rotation about the Z axis by `angle` radians.
pub fn rot_z(angle: f64) -> Mat3 {
    rotation_exp(Vec3::new(0.0, 0.0, angle))
}

/// Pinhole intrinsics: focal lengths, skew, and principal point, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    fx: f64,
    fy: f64,
    skew: f64,
    cx: f64,
    cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, skew: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if !(fx > 0.0) || !(fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics {
                detail: format!("focal lengths must be > 0, got fx = {fx}, fy = {fy}"),
            });
        }
        if !fx.is_finite() || !fy.is_finite() || !skew.is_finite() || !cx.is_finite() || !cy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics {
                detail: "parameters must be finite".to_string(),
            });
        }
        Ok(Self { fx, fy, skew, cx, cy })
    }

    /// Square-pixel intrinsics with zero skew.
    pub fn simple(f: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        Self::new(f, f, 0.0, cx, cy)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn skew(&self) -> f64 {
        self.skew
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }

    /// Upper-triangular 3x3 intrinsic matrix with bottom row (0, 0, 1).
    pub fn matrix(&self) -> Mat3 {
        Mat3::new(
            self.fx, self.skew, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Scale and re-center a normalized point into pixel coordinates.
    pub fn apply(&self, n: &NormalizedPoint2) -> PixelPoint2 {
        PixelPoint2::new(self.fx * n.x + self.skew * n.y + self.cx, self.fy * n.y + self.cy)
    }

    /// Map a pixel back into normalized image space (exact inverse of `apply`).
    pub fn invert(&self, p: &PixelPoint2) -> NormalizedPoint2 {
        let y = (p.y - self.cy) / self.fy;
        let x = (p.x - self.cx - self.skew * y) / self.fx;
        NormalizedPoint2::new(x, y)
    }
}

/// Intermediate outputs of the projection pipeline, exposed so distortion can
/// be injected between the perspective division and the intrinsics scaling.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionStages {
    /// Point after the pose transform, camera space, meters.
    pub camera_point: Point3,
    /// Point after perspective division, normalized image space.
    pub normalized: NormalizedPoint2,
    /// Final pixel location.
    pub pixel: PixelPoint2,
}

/// Perspective division ("z-division") onto the normalized image plane.
pub fn perspective_divide(camera_point: &Point3) -> Result<NormalizedPoint2, GeometryError> {
    if camera_point.z <= 0.0 {
        return Err(GeometryError::PointBehindCamera { z: camera_point.z });
    }
    Ok(NormalizedPoint2::new(
        camera_point.x / camera_point.z,
        camera_point.y / camera_point.z,
    ))
}

/// Full pinhole projection with all three stage outputs retrievable.
pub fn project_stages(
    pose: &Pose,
    intrinsics: &Intrinsics,
    world_point: &Point3,
) -> Result<ProjectionStages, GeometryError> {
    let camera_point = pose.apply(world_point);
    let normalized = perspective_divide(&camera_point)?;
    let pixel = intrinsics.apply(&normalized);
    Ok(ProjectionStages {
        camera_point,
        normalized,
        pixel,
    })
}

/// Project a world point into pixel coordinates (undistorted pinhole model).
pub fn project(
    pose: &Pose,
    intrinsics: &Intrinsics,
    world_point: &Point3,
) -> Result<PixelPoint2, GeometryError> {
    project_stages(pose, intrinsics, world_point).map(|s| s.pixel)
}

/// Lift a pixel at a given depth back into camera space.
pub fn backproject(
    intrinsics: &Intrinsics,
    pixel: &PixelPoint2,
    depth: f64,
) -> Result<Point3, GeometryError> {
    if depth <= 0.0 {
        return Err(GeometryError::NonPositiveDepth { depth });
    }
    let n = intrinsics.invert(pixel);
    Ok(Point3::new(n.x * depth, n.y * depth, depth))
}
