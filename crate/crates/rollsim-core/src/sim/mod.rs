//! Rolling-shutter image formation: scenes, frames, per-point projection
//! under time-varying pose, frame synthesis, and rectification.

mod frame;
mod project;
mod rectify;
mod render;
mod scene;

pub use frame::{Frame, FrameIoError, PngDepth, RowMeta};
pub use project::{
    default_projection_tol, project_distorted, rs_project_point, rs_project_point_all,
    RsProjection,
};
pub use rectify::{rectify_known_depth, rectify_rotation_only, DepthMap, RectifiedFrame};
pub use render::{
    synthesize_flash_frames, synthesize_gs_frame, synthesize_rs_frame, CameraResponse,
    FlashIlluminant, FlashWaveform, RenderOptions,
};
pub use scene::{ProceduralField, Scene, ScenePoint, Texture, TexturedPlane};

use crate::distortion::DistortionError;
use crate::geometry::GeometryError;
use crate::motion::MotionError;
use crate::shutter::TimingError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// The sweep never meets the point's projection during the frame.
    #[error("point is not imaged during this frame")]
    NotImagedThisFrame,
    /// Fast motion images the point more than once; use
    /// `rs_project_point_all` to receive every root.
    #[error("point is imaged {count} times this frame")]
    MultipleSolutions { count: usize },
    #[error("anchor row {anchor} out of range for height {height}")]
    AnchorOutOfRange { anchor: u32, height: u32 },
    #[error("rotation-only rectification requires constant translation (deviation {deviation:.3e} m)")]
    RequiresConstantTranslation { deviation: f64 },
    /// Row-based operations support top/bottom sweeps; column sweeps are
    /// expressed through `ShutterTiming::pixel_start_time` remapping only.
    #[error("operation supports row-axis scan directions only")]
    UnsupportedScanAxis,
    #[error("invalid scene: {reason}")]
    InvalidScene { reason: String },
    #[error("mismatched inputs: {detail}")]
    FrameMismatch { detail: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Motion(#[from] MotionError),
}
