//! Time-parameterized camera pose V(t) under the intra-frame motion models:
//! static, constant-velocity and constant-acceleration translation, constant
//! angular velocity rotation, per-DOF polynomials, and piecewise-linear
//! keyframe trajectories.

use crate::geometry::{rotation_exp, rotation_log, Pose, Vec3};
use thiserror::Error;

/// Highest polynomial degree accepted by the per-DOF model.
pub const MAX_POLY_DEGREE: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotionError {
    #[error("time {t} outside validity window [{start}, {end}]")]
    OutsideValidityWindow { t: f64, start: f64, end: f64 },
    #[error("invalid keyframes: {reason}")]
    InvalidKeyframes { reason: String },
    #[error("polynomial degree {degree} exceeds the maximum of {MAX_POLY_DEGREE}")]
    DegreeTooHigh { degree: usize },
}

/// One sample of a keyframed trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyframe {
    pub time: f64,
    pub pose: Pose,
}

/// Per-DOF polynomial coefficients, constant term first. The three rotational
/// DOFs are scaled axis-angle components: `R(t) = exp([w(t)]x)`, valid for
/// the small intra-frame angles this model is meant for.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialDof {
    /// Rotational DOF series: wx, wy, wz.
    pub rotation: [Vec<f64>; 3],
    /// Translational DOF series: tx, ty, tz.
    pub translation: [Vec<f64>; 3],
}

impl PolynomialDof {
    fn validate(&self) -> Result<(), MotionError> {
        for series in self.rotation.iter().chain(self.translation.iter()) {
            if series.len() > MAX_POLY_DEGREE + 1 {
                return Err(MotionError::DegreeTooHigh {
                    degree: series.len() - 1,
                });
            }
        }
        Ok(())
    }

    fn eval(series: &[f64], t: f64) -> f64 {
        let mut acc = 0.0;
        for &c in series.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
enum MotionKind {
    Static(Pose),
    TranslationConstVel {
        base: Pose,
        /// Velocity of the pose translation component T, meters/second.
        velocity: Vec3,
    },
    TranslationConstAccel {
        base: Pose,
        velocity: Vec3,
        acceleration: Vec3,
    },
    RotationConstAngVel {
        base: Pose,
        /// Scaled rotation axis, radians/second: `R(t) = exp([w t]x) * R0`.
        angular_velocity: Vec3,
    },
    Polynomial(PolynomialDof),
    Keyframes(Vec<Keyframe>),
}

/// A camera trajectory: pose as a function of time, with an optional validity
/// window. Models default to an unbounded window (keyframes to their time
/// span); callers working frame by frame typically restrict it to
/// `[tau0, tau0 + 1/fps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    kind: MotionKind,
    window: Option<(f64, f64)>,
}

impl MotionModel {
    pub fn static_pose(pose: Pose) -> Self {
        Self {
            kind: MotionKind::Static(pose),
            window: None,
        }
    }

    /// Constant-velocity translation: `R = R0`, `T(t) = T0 + v t`.
    pub fn translation_const_vel(base: Pose, velocity: Vec3) -> Self {
        Self {
            kind: MotionKind::TranslationConstVel { base, velocity },
            window: None,
        }
    }

    /// Constant-acceleration translation: `T(t) = T0 + v t + a t^2 / 2`.
    pub fn translation_const_accel(base: Pose, velocity: Vec3, acceleration: Vec3) -> Self {
        Self {
            kind: MotionKind::TranslationConstAccel {
                base,
                velocity,
                acceleration,
            },
            window: None,
        }
    }

    /// Constant angular velocity rotation: `R(t) = exp([w t]x) R0`, `T = T0`.
    pub fn rotation_const_ang_vel(base: Pose, angular_velocity: Vec3) -> Self {
        Self {
            kind: MotionKind::RotationConstAngVel {
                base,
                angular_velocity,
            },
            window: None,
        }
    }

    /// Per-DOF polynomial trajectory, degree at most [`MAX_POLY_DEGREE`].
    pub fn polynomial(dofs: PolynomialDof) -> Result<Self, MotionError> {
        dofs.validate()?;
        Ok(Self {
            kind: MotionKind::Polynomial(dofs),
            window: None,
        })
    }

    /// Piecewise-linear trajectory through the given keyframes. Timestamps
    /// must be strictly increasing; between keyframes, translation is
    /// interpolated linearly and rotation along the constant-angular-velocity
    /// geodesic.
    pub fn keyframes(keys: Vec<Keyframe>) -> Result<Self, MotionError> {
        if keys.is_empty() {
            return Err(MotionError::InvalidKeyframes {
                reason: "need at least one keyframe".to_string(),
            });
        }
        for pair in keys.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(MotionError::InvalidKeyframes {
                    reason: format!(
                        "timestamps must be strictly increasing ({} then {})",
                        pair[0].time, pair[1].time
                    ),
                });
            }
        }
        let window = Some((keys[0].time, keys[keys.len() - 1].time));
        Ok(Self {
            kind: MotionKind::Keyframes(keys),
            window,
        })
    }

    /// Restrict (or extend) the validity window.
    pub fn with_window(mut self, start: f64, end: f64) -> Self {
        self.window = Some((start, end));
        self
    }

    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    /// True when the pose translation component is constant over time, the
    /// precondition of rotation-only rectification.
    pub fn has_constant_translation(&self) -> bool {
        match &self.kind {
            MotionKind::Static(_) | MotionKind::RotationConstAngVel { .. } => true,
            MotionKind::TranslationConstVel { velocity, .. } => velocity.norm() == 0.0,
            MotionKind::TranslationConstAccel {
                velocity,
                acceleration,
                ..
            } => velocity.norm() == 0.0 && acceleration.norm() == 0.0,
            MotionKind::Polynomial(dofs) => dofs
                .translation
                .iter()
                .all(|s| s.iter().skip(1).all(|&c| c == 0.0)),
            MotionKind::Keyframes(keys) => keys
                .windows(2)
                .all(|p| (p[1].pose.translation() - p[0].pose.translation()).norm() == 0.0),
        }
    }

    fn check_window(&self, t: f64) -> Result<(), MotionError> {
        if let Some((start, end)) = self.window {
            // Exact endpoint times are inside.
            if t < start || t > end {
                return Err(MotionError::OutsideValidityWindow { t, start, end });
            }
        }
        Ok(())
    }

    /// Pose at time `t`.
    pub fn pose_at(&self, t: f64) -> Result<Pose, MotionError> {
        self.check_window(t)?;
        Ok(match &self.kind {
            MotionKind::Static(pose) => pose.clone(),
            MotionKind::TranslationConstVel { base, velocity } => Pose::from_parts_unchecked(
                *base.rotation(),
                base.translation() + velocity * t,
            ),
            MotionKind::TranslationConstAccel {
                base,
                velocity,
                acceleration,
            } => Pose::from_parts_unchecked(
                *base.rotation(),
                base.translation() + velocity * t + acceleration * (0.5 * t * t),
            ),
            MotionKind::RotationConstAngVel {
                base,
                angular_velocity,
            } => Pose::from_parts_unchecked(
                rotation_exp(angular_velocity * t) * base.rotation(),
                *base.translation(),
            ),
            MotionKind::Polynomial(dofs) => {
                let w = Vec3::new(
                    PolynomialDof::eval(&dofs.rotation[0], t),
                    PolynomialDof::eval(&dofs.rotation[1], t),
                    PolynomialDof::eval(&dofs.rotation[2], t),
                );
                let tr = Vec3::new(
                    PolynomialDof::eval(&dofs.translation[0], t),
                    PolynomialDof::eval(&dofs.translation[1], t),
                    PolynomialDof::eval(&dofs.translation[2], t),
                );
                Pose::from_parts_unchecked(rotation_exp(w), tr)
            }
            MotionKind::Keyframes(keys) => keyframe_pose(keys, t),
        })
    }

    /// Pose of time `t` relative to the pose at `t_ref`:
    /// `compose(result, pose_at(t_ref)) = pose_at(t)`.
    pub fn relative_pose(&self, t_ref: f64, t: f64) -> Result<Pose, MotionError> {
        let reference = self.pose_at(t_ref)?;
        let target = self.pose_at(t)?;
        Ok(Pose::compose(&target, &reference.inverse()))
    }
}

fn keyframe_pose(keys: &[Keyframe], t: f64) -> Pose {
    // Window checking already confined t to [first, last].
    let idx = match keys.binary_search_by(|k| k.time.partial_cmp(&t).expect("finite times")) {
        Ok(exact) => return keys[exact].pose.clone(),
        Err(insertion) => insertion,
    };
    if idx == 0 {
        return keys[0].pose.clone();
    }
    if idx >= keys.len() {
        return keys[keys.len() - 1].pose.clone();
    }
    let (a, b) = (&keys[idx - 1], &keys[idx]);
    let s = (t - a.time) / (b.time - a.time);
    let translation = a.pose.translation() * (1.0 - s) + b.pose.translation() * s;
    // Geodesic between the rotations at constant angular velocity.
    let delta = rotation_log(&(b.pose.rotation() * a.pose.rotation().transpose()));
    let rotation = rotation_exp(delta * s) * a.pose.rotation();
    Pose::from_parts_unchecked(rotation, translation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_y, rot_z, Mat3, Point3};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn assert_pose_close(a: &Pose, b: &Pose, tol: f64) {
        assert!(
            (a.rotation() - b.rotation()).abs().max() <= tol,
            "rotations differ by {}",
            (a.rotation() - b.rotation()).abs().max()
        );
        assert!(
            (a.translation() - b.translation()).abs().max() <= tol,
            "translations differ by {}",
            (a.translation() - b.translation()).abs().max()
        );
    }

    #[test]
    fn static_model_is_constant() {
        let pose = Pose::new(rot_z(0.3), Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let m = MotionModel::static_pose(pose.clone());
        for t in [-5.0, 0.0, 0.25, 100.0] {
            assert_eq!(m.pose_at(t).unwrap(), pose);
        }
    }

    #[test]
    fn const_vel_translation() {
        let m = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(1.0, 0.0, 0.0));
        let p = m.pose_at(0.25).unwrap();
        assert_eq!(p.translation(), &Vec3::new(0.25, 0.0, 0.0));
        assert_eq!(p.rotation(), &Mat3::identity());
    }

    #[test]
    fn const_accel_reduces_to_const_vel_when_a_is_zero() {
        let base = Pose::new(rot_y(0.2), Vec3::new(0.5, -1.0, 2.0)).unwrap();
        let v = Vec3::new(0.3, -0.1, 0.7);
        let vel = MotionModel::translation_const_vel(base.clone(), v);
        let acc = MotionModel::translation_const_accel(base, v, Vec3::zeros());
        for t in [0.0, 0.013, 0.5, 3.0] {
            assert_eq!(vel.pose_at(t).unwrap(), acc.pose_at(t).unwrap());
        }
    }

    #[test]
    fn rotation_const_ang_vel_closed_form() {
        // omega = (0, 0, pi) rad/s at t = 0.5 is a 90 degree rotation about Z.
        let base = Pose::identity();
        let m = MotionModel::rotation_const_ang_vel(base, Vec3::new(0.0, 0.0, PI));
        let p = m.pose_at(0.5).unwrap();
        let expected = rot_z(PI / 2.0);
        assert!((p.rotation() - expected).abs().max() < 1e-12);

        // Oracle: 20-step RK4 integration of Rdot = [w]x R.
        let integrated = integrate_rotation_ode(Vec3::new(0.0, 0.0, PI), 0.5, 20);
        assert!((p.rotation() - integrated).abs().max() < 1e-6);
    }

    fn skew(w: &Vec3) -> Mat3 {
        Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
    }

    fn integrate_rotation_ode(w: Vec3, t_end: f64, steps: usize) -> Mat3 {
        let h = t_end / steps as f64;
        let a = skew(&w);
        let mut r = Mat3::identity();
        for _ in 0..steps {
            let k1 = a * r;
            let k2 = a * (r + k1 * (h / 2.0));
            let k3 = a * (r + k2 * (h / 2.0));
            let k4 = a * (r + k3 * h);
            r += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        r
    }

    #[test]
    fn rotation_group_property() {
        let base = Pose::new(rot_y(0.4), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        let w = Vec3::new(0.2, -0.5, 0.9);
        let m = MotionModel::rotation_const_ang_vel(base.clone(), w);
        let (t1, t2) = (0.3, 0.45);
        let combined = m.pose_at(t1 + t2).unwrap();
        let product = rotation_exp(w * t1) * rotation_exp(w * t2) * base.rotation();
        assert!((combined.rotation() - product).abs().max() < 1e-10);
    }

    #[test]
    fn polynomial_degree_cap() {
        let too_high = PolynomialDof {
            rotation: [vec![0.0; 6], vec![0.0], vec![0.0]],
            translation: [vec![0.0], vec![0.0], vec![0.0]],
        };
        assert!(matches!(
            MotionModel::polynomial(too_high),
            Err(MotionError::DegreeTooHigh { degree: 5 })
        ));
    }

    #[test]
    fn polynomial_matches_const_accel() {
        // tx(t) = 1 + 2t + 0.5*3*t^2 mirrors v = 2, a = 3 along X.
        let dofs = PolynomialDof {
            rotation: [vec![], vec![], vec![]],
            translation: [vec![1.0, 2.0, 1.5], vec![], vec![]],
        };
        let poly = MotionModel::polynomial(dofs).unwrap();
        let accel = MotionModel::translation_const_accel(
            Pose::from_translation(Vec3::new(1.0, 0.0, 0.0)),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
        );
        for t in [0.0, 0.1, 0.7] {
            let a = poly.pose_at(t).unwrap();
            let b = accel.pose_at(t).unwrap();
            assert_pose_close(&a, &b, 1e-12);
        }
    }

    #[test]
    fn keyframes_reproduce_inputs_exactly() {
        let keys = vec![
            Keyframe {
                time: 0.0,
                pose: Pose::identity(),
            },
            Keyframe {
                time: 1.0,
                pose: Pose::new(rot_z(0.5), Vec3::new(1.0, 0.0, 0.0)).unwrap(),
            },
            Keyframe {
                time: 2.5,
                pose: Pose::new(rot_y(-0.7), Vec3::new(0.0, 2.0, 0.0)).unwrap(),
            },
        ];
        let m = MotionModel::keyframes(keys.clone()).unwrap();
        for k in &keys {
            assert_eq!(&m.pose_at(k.time).unwrap(), &k.pose);
        }
    }

    #[test]
    fn keyframes_interpolate_translation_linearly() {
        let keys = vec![
            Keyframe {
                time: 0.0,
                pose: Pose::from_translation(Vec3::new(0.0, 0.0, 0.0)),
            },
            Keyframe {
                time: 2.0,
                pose: Pose::from_translation(Vec3::new(4.0, -2.0, 6.0)),
            },
        ];
        let m = MotionModel::keyframes(keys).unwrap();
        let p = m.pose_at(0.5).unwrap();
        assert_relative_eq!(p.translation().x, 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.translation().y, -0.5, epsilon = 1e-15);
        assert_relative_eq!(p.translation().z, 1.5, epsilon = 1e-15);
    }

    #[test]
    fn keyframes_geodesic_rotation_midpoint() {
        let keys = vec![
            Keyframe {
                time: 0.0,
                pose: Pose::identity(),
            },
            Keyframe {
                time: 1.0,
                pose: Pose::new(rot_z(1.0), Vec3::zeros()).unwrap(),
            },
        ];
        let m = MotionModel::keyframes(keys).unwrap();
        let p = m.pose_at(0.5).unwrap();
        assert!((p.rotation() - rot_z(0.5)).abs().max() < 1e-12);
    }

    #[test]
    fn keyframes_require_increasing_times() {
        let keys = vec![
            Keyframe {
                time: 1.0,
                pose: Pose::identity(),
            },
            Keyframe {
                time: 1.0,
                pose: Pose::identity(),
            },
        ];
        assert!(matches!(
            MotionModel::keyframes(keys),
            Err(MotionError::InvalidKeyframes { .. })
        ));
    }

    #[test]
    fn keyframe_window_is_key_span() {
        let keys = vec![
            Keyframe {
                time: 0.5,
                pose: Pose::identity(),
            },
            Keyframe {
                time: 1.5,
                pose: Pose::from_translation(Vec3::new(1.0, 0.0, 0.0)),
            },
        ];
        let m = MotionModel::keyframes(keys).unwrap();
        assert_eq!(m.window(), Some((0.5, 1.5)));
        assert!(matches!(
            m.pose_at(0.4),
            Err(MotionError::OutsideValidityWindow { .. })
        ));
        assert!(m.pose_at(0.5).is_ok());
        assert!(m.pose_at(1.5).is_ok());
    }

    #[test]
    fn explicit_window_is_enforced() {
        let m = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(1.0, 0.0, 0.0))
            .with_window(0.0, 1.0 / 30.0);
        assert!(m.pose_at(0.02).is_ok());
        assert!(matches!(
            m.pose_at(0.05),
            Err(MotionError::OutsideValidityWindow { .. })
        ));
    }

    #[test]
    fn relative_pose_identities() {
        let m = MotionModel::translation_const_vel(
            Pose::new(rot_z(0.2), Vec3::new(0.3, 0.0, 0.0)).unwrap(),
            Vec3::new(1.0, 0.0, 0.0),
        );
        // t == t_ref.
        let rel = m.relative_pose(0.4, 0.4).unwrap();
        assert_pose_close(&rel, &Pose::identity(), 1e-12);

        // Static model: identity for any pair.
        let s = MotionModel::static_pose(Pose::new(rot_y(1.0), Vec3::new(0.0, 1.0, 0.0)).unwrap());
        let rel = s.relative_pose(-1.0, 7.0).unwrap();
        assert_pose_close(&rel, &Pose::identity(), 1e-12);

        // compose(rel, pose_at(t_ref)) = pose_at(t).
        let (t_ref, t) = (0.1, 0.35);
        let rel = m.relative_pose(t_ref, t).unwrap();
        let recomposed = Pose::compose(&rel, &m.pose_at(t_ref).unwrap());
        assert_pose_close(&recomposed, &m.pose_at(t).unwrap(), 1e-10);
    }

    #[test]
    fn relative_pose_const_vel_is_pure_translation() {
        let m = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(1.0, 0.0, 0.0));
        let rel = m.relative_pose(0.0, 0.1).unwrap();
        assert_eq!(rel.rotation(), &Mat3::identity());
        assert_relative_eq!(rel.translation().x, 0.1, epsilon = 1e-15);
        assert_relative_eq!(rel.translation().y, 0.0, epsilon = 1e-15);
        assert_relative_eq!(rel.translation().z, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pose_at_returns_valid_rotations() {
        let m = MotionModel::rotation_const_ang_vel(Pose::identity(), Vec3::new(3.0, -2.0, 5.0));
        for i in 0..20 {
            let t = i as f64 * 0.17;
            let p = m.pose_at(t).unwrap();
            let gram = p.rotation().transpose() * p.rotation();
            assert!((gram - Mat3::identity()).abs().max() < 1e-12);
        }
        let _ = Point3::origin();
    }
}
