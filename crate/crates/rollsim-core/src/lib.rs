//! Camera-model simulation and numerics: pinhole geometry, Brown radial
//! distortion, global/rolling shutter timing, intra-frame motion models,
//! rolling-shutter synthesis and rectification, and the supporting linear
//! algebra and optimizers.
//!
//! Conventions (documented once, used everywhere):
//! - Poses map world to camera space; the camera looks down +Z.
//! - Pixel `(i, j)` spans `[i, i+1) x [j, j+1)` with its center at
//!   `(i + 0.5, j + 0.5)`; a continuous image point falls in row
//!   `floor(p_y)`.
//! - Radiance and pixel values live in `[0, 1]`.

pub mod distortion;
pub mod geometry;
pub mod motion;
pub mod numerics;
pub mod shutter;
pub mod sim;

pub use distortion::{DistortionError, InverseRadialDistortion, RadialDistortion};
pub use geometry::{
    backproject, perspective_divide, project, project_stages, GeometryError, Intrinsics, Mat3,
    NormalizedPoint2, PixelPoint2, Point3, Pose, Vec3,
};
pub use motion::{Keyframe, MotionError, MotionModel, PolynomialDof};
pub use numerics::NumericsError;
pub use shutter::{
    complete_timing, ScanDirection, ShutterMode, ShutterTiming, TimingError, TimingSpec,
};
pub use sim::{Frame, Scene, SimError};
