//! Rectification of rolling-shutter frames back to a single reference pose:
//! per-row homographies for rotation-only motion, and a depth-based
//! backproject/reproject forward splat for general motion.

use crate::distortion::RadialDistortion;
use crate::geometry::{
    perspective_divide, Intrinsics, Mat3, NormalizedPoint2, PixelPoint2, Point3,
};
use crate::motion::MotionModel;
use crate::shutter::ShutterTiming;
use crate::sim::frame::Frame;
use crate::sim::SimError;
use rayon::prelude::*;

/// A rectified frame plus the per-pixel coverage mask. Pixels whose source
/// fell outside the input (or received no splat) are left black and marked
/// uncovered so error metrics can exclude them.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedFrame {
    pub frame: Frame,
    pub coverage: Vec<bool>,
}

impl RectifiedFrame {
    /// Fraction of covered pixels.
    pub fn coverage_fraction(&self) -> f64 {
        let covered = self.coverage.iter().filter(|&&c| c).count();
        covered as f64 / self.coverage.len().max(1) as f64
    }
}

/// Per-pixel scene depth (camera-space z at capture time), meters. NaN marks
/// a hole.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self, SimError> {
        if data.len() != (width * height) as usize {
            return Err(SimError::InvalidScene {
                reason: format!(
                    "depth map size {width}x{height} does not match {} samples",
                    data.len()
                ),
            });
        }
        if data.iter().any(|&z| !z.is_nan() && z <= 0.0) {
            return Err(SimError::InvalidScene {
                reason: "depths must be > 0 where defined (NaN marks holes)".to_string(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: u32, height: u32, depth: f64) -> Result<Self, SimError> {
        Self::new(width, height, vec![depth; (width * height) as usize])
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[(y * self.width + x) as usize]
    }
}

fn check_anchor(frame: &Frame, timing: &ShutterTiming, anchor_row: u32) -> Result<(), SimError> {
    if frame.height() != timing.height() {
        return Err(SimError::FrameMismatch {
            detail: format!(
                "frame height {} does not match timing height {}",
                frame.height(),
                timing.height()
            ),
        });
    }
    if anchor_row >= frame.height() {
        return Err(SimError::AnchorOutOfRange {
            anchor: anchor_row,
            height: frame.height(),
        });
    }
    Ok(())
}

/// Rectify a rolling-shutter frame under rotation-only motion by the per-row
/// homography `H(y) = K R(t_anchor) R(t_y)^-1 K^-1`: the output approximates
/// a global-shutter capture taken entirely at the anchor row's pose.
///
/// Lens distortion is removed before the row warp; `reapply_distortion`
/// selects whether the output is re-distorted (matching the input lens) or
/// left in undistorted pixel coordinates. Source lookups outside the input
/// are marked uncovered rather than clamped.
pub fn rectify_rotation_only(
    frame: &Frame,
    motion: &MotionModel,
    k: &Intrinsics,
    d: &RadialDistortion,
    timing: &ShutterTiming,
    anchor_row: u32,
    reapply_distortion: bool,
) -> Result<RectifiedFrame, SimError> {
    check_anchor(frame, timing, anchor_row)?;
    let height = frame.height();
    let width = frame.width();

    // Row poses come from the motion model at the frame's per-row times.
    let row_rotations: Vec<Mat3> = (0..height)
        .map(|y| Ok(*motion.pose_at(frame.row_meta(y).t_start)?.rotation()))
        .collect::<Result<_, SimError>>()?;
    let anchor_rotation = row_rotations[anchor_row as usize];

    // Enforce the rotation-only precondition: constant translation over rows.
    let t_anchor = *motion.pose_at(frame.row_meta(anchor_row).t_start)?.translation();
    for y in 0..height {
        let t_row = *motion.pose_at(frame.row_meta(y).t_start)?.translation();
        let dev = (t_row - t_anchor).norm();
        if dev > 1e-9 * (1.0 + t_anchor.norm()) {
            return Err(SimError::RequiresConstantTranslation { deviation: dev });
        }
    }

    // Relative rotation mapping anchor-view rays to row-y view rays.
    let rel: Vec<Mat3> = row_rotations
        .iter()
        .map(|r| r * anchor_rotation.transpose())
        .collect();
    let identity = Mat3::identity();

    let out_rows: Vec<(Vec<f64>, Vec<bool>)> = (0..height)
        .into_par_iter()
        .map(|v| {
            let mut row = vec![0.0; width as usize];
            let mut cov = vec![false; width as usize];
            for x in 0..width {
                let q = PixelPoint2::new(x as f64 + 0.5, v as f64 + 0.5);
                // Iterate the source-row hypothesis: the warp depends on the
                // row the sample lands in.
                let mut y_src = v;
                let mut p_src: Option<PixelPoint2> = None;
                for _ in 0..10 {
                    let r = &rel[y_src as usize];
                    let mapped = if *r == identity {
                        // Identity row: distortion removal and re-application
                        // cancel analytically; the pixel maps to itself.
                        Some(q)
                    } else {
                        map_through_rotation(&q, r, k, d, reapply_distortion)
                    };
                    let Some(p) = mapped else {
                        p_src = None;
                        break;
                    };
                    p_src = Some(p);
                    let next = (p.y.floor() as i64).clamp(0, height as i64 - 1) as u32;
                    if next == y_src {
                        break;
                    }
                    y_src = next;
                }
                if let Some(p) = p_src {
                    if let Some(value) = frame.sample_bilinear(p.x, p.y) {
                        row[x as usize] = value;
                        cov[x as usize] = true;
                    }
                }
            }
            (row, cov)
        })
        .collect();

    let mut out = Frame::new(width, height);
    let mut coverage = vec![false; (width * height) as usize];
    for (v, (row, cov)) in out_rows.into_iter().enumerate() {
        out.set_row(v as u32, &row);
        coverage[v * width as usize..(v + 1) * width as usize].copy_from_slice(&cov);
        // Rectified rows all carry the anchor time.
        out.set_row_meta(v as u32, frame.row_meta(anchor_row).clone());
    }
    Ok(RectifiedFrame {
        frame: out,
        coverage,
    })
}

/// Map an output (anchor-view) pixel through the inverse row warp:
/// undistort, rotate by the row-relative rotation, re-distort, rescale.
fn map_through_rotation(
    q: &PixelPoint2,
    rel: &Mat3,
    k: &Intrinsics,
    d: &RadialDistortion,
    reapply_distortion: bool,
) -> Option<PixelPoint2> {
    let n = k.invert(q);
    let n_u = if reapply_distortion && !d.is_identity() {
        d.undistort_numeric(&n, 1e-12).ok()?
    } else {
        n
    };
    let rotated = rel * n_u.lift();
    if rotated.z <= 0.0 {
        return None;
    }
    let n_rot = NormalizedPoint2::new(rotated.x / rotated.z, rotated.y / rotated.z);
    let n_src = if d.is_identity() {
        n_rot
    } else {
        d.distort(&n_rot).ok()?
    };
    Some(k.apply(&n_src))
}

/// Rectify with known per-pixel depth: every input pixel is backprojected at
/// its capture pose, reprojected at the anchor pose, and forward-splatted
/// with z-buffering (nearest surface wins). Unfilled output pixels are
/// reported through the coverage mask.
pub fn rectify_known_depth(
    frame: &Frame,
    motion: &MotionModel,
    k: &Intrinsics,
    d: &RadialDistortion,
    timing: &ShutterTiming,
    depth: &DepthMap,
    anchor_row: u32,
) -> Result<RectifiedFrame, SimError> {
    check_anchor(frame, timing, anchor_row)?;
    if depth.width != frame.width() || depth.height != frame.height() {
        return Err(SimError::FrameMismatch {
            detail: format!(
                "depth map is {}x{}, frame is {}x{}",
                depth.width,
                depth.height,
                frame.width(),
                frame.height()
            ),
        });
    }
    let (width, height) = (frame.width(), frame.height());
    let anchor_pose = motion.pose_at(frame.row_meta(anchor_row).t_start)?;

    let mut out = Frame::new(width, height);
    let mut coverage = vec![false; (width * height) as usize];
    let mut zbuf = vec![f64::INFINITY; (width * height) as usize];

    for y in 0..height {
        let pose = motion.pose_at(frame.row_meta(y).t_start)?;
        let pose_inv = pose.inverse();
        for x in 0..width {
            let z = depth.get(x, y);
            if z.is_nan() {
                continue;
            }
            let pd = k.invert(&PixelPoint2::new(x as f64 + 0.5, y as f64 + 0.5));
            let pu = if d.is_identity() {
                pd
            } else {
                match d.undistort_numeric(&pd, 1e-12) {
                    Ok(p) => p,
                    Err(_) => continue,
                }
            };
            let x_cam = Point3::new(pu.x * z, pu.y * z, z);
            let x_world = pose_inv.apply(&x_cam);
            let x_anchor = anchor_pose.apply(&x_world);
            let Ok(n) = perspective_divide(&x_anchor) else {
                continue;
            };
            let n = if d.is_identity() {
                n
            } else {
                match d.distort(&n) {
                    Ok(p) => p,
                    Err(_) => continue,
                }
            };
            let p = k.apply(&n);
            let (ix, iy) = (p.col(), p.row());
            if ix < 0 || iy < 0 || ix >= width as i64 || iy >= height as i64 {
                continue;
            }
            let idx = (iy as u32 * width + ix as u32) as usize;
            if x_anchor.z < zbuf[idx] {
                zbuf[idx] = x_anchor.z;
                out.set(ix as u32, iy as u32, frame.get(x, y));
                coverage[idx] = true;
            }
        }
    }
    for y in 0..height {
        out.set_row_meta(y, frame.row_meta(anchor_row).clone());
    }
    Ok(RectifiedFrame {
        frame: out,
        coverage,
    })
}
