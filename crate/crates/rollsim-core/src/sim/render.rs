//! Frame synthesis: per-row rendering at the row's exposure window under a
//! motion model, with stratified exposure sampling and an optional camera
//! response. Row computations are pure and deterministic, so parallel
//! scheduling cannot change the output.

use crate::distortion::RadialDistortion;
use crate::geometry::{Intrinsics, PixelPoint2, Pose};
use crate::motion::MotionModel;
use crate::shutter::{ScanDirection, ShutterTiming};
use crate::sim::frame::{Frame, RowMeta};
use crate::sim::scene::Scene;
use crate::sim::SimError;
use rayon::prelude::*;
use std::num::NonZeroU32;

/// Sensor response applied to the integrated radiance, the last stage of
/// capture. Identity by default; gamma encoding maps v to v^(1/gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CameraResponse {
    Identity,
    Gamma(f64),
}

impl CameraResponse {
    pub fn apply(&self, v: f64) -> f64 {
        match self {
            CameraResponse::Identity => v,
            CameraResponse::Gamma(g) => v.powf(1.0 / g),
        }
    }
}

/// Synthesis options shared by the RS and GS renderers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Poses sampled per row across the exposure window. One sample renders
    /// at the exposure start; more average stratified samples over
    /// `[t_row, t_row + te]`.
    pub exposure_samples: NonZeroU32,
    /// Seed for the stratified jitter; every sample is keyed by
    /// (seed, frame, row, sample), so outputs do not depend on scheduling.
    pub seed: u64,
    pub response: CameraResponse,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            exposure_samples: NonZeroU32::new(1).unwrap(),
            seed: 0,
            response: CameraResponse::Identity,
        }
    }
}

impl RenderOptions {
    pub fn with_samples(mut self, samples: u32) -> Self {
        self.exposure_samples = NonZeroU32::new(samples.max(1)).unwrap();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_response(mut self, response: CameraResponse) -> Self {
        self.response = response;
        self
    }
}

/// SplitMix64 step; the standard finalizer makes a good stateless hash.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic jitter in [0, 1) keyed by (seed, frame, row, sample).
fn sample_unit(seed: u64, fi: u32, row: u32, sample: u32) -> f64 {
    let mut h = splitmix64(seed ^ 0x8000_0000_0000_0000);
    h = splitmix64(h ^ fi as u64);
    h = splitmix64(h ^ ((row as u64) << 32 | sample as u64));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exposure sample times for a row starting at `t_row`. A single sample sits
/// exactly at the exposure start; n > 1 samples are stratified over
/// `[t_row, t_row + te]`.
fn exposure_times(t_row: f64, te: f64, n: u32, seed: u64, fi: u32, row: u32) -> Vec<f64> {
    if n == 1 {
        return vec![t_row];
    }
    (0..n)
        .map(|s| {
            let u = sample_unit(seed, fi, row, s);
            t_row + (s as f64 + u) / n as f64 * te
        })
        .collect()
}

fn render_row(
    scene: &Scene,
    pose: &Pose,
    k: &Intrinsics,
    d: &RadialDistortion,
    width: u32,
    y: u32,
    acc: &mut [f64],
) {
    match scene {
        Scene::PointSet(points) => {
            for p in points {
                let Ok(pixel) = super::project::project_distorted(pose, k, d, &p.position) else {
                    continue;
                };
                if pixel.row() == y as i64 && pixel.col() >= 0 && (pixel.col() as u32) < width {
                    let x = pixel.col() as usize;
                    // max keeps overlapping splats order-independent.
                    acc[x] = acc[x].max(p.radiance);
                }
            }
        }
        _ => {
            let origin = pose.camera_center();
            let rot_t = pose.rotation().transpose();
            for x in 0..width {
                let pd = k.invert(&PixelPoint2::new(x as f64 + 0.5, y as f64 + 0.5));
                let pu = if d.is_identity() {
                    pd
                } else {
                    match d.undistort_numeric(&pd, 1e-12) {
                        Ok(p) => p,
                        // Outside the invertible region: no ray, black pixel.
                        Err(_) => continue,
                    }
                };
                let dir_world = rot_t * pu.lift();
                acc[x as usize] += scene.radiance(&origin, &dir_world);
            }
        }
    }
}

fn render_frame<TimeFn>(
    scene: &Scene,
    motion: &MotionModel,
    k: &Intrinsics,
    d: &RadialDistortion,
    width: u32,
    height: u32,
    te: f64,
    fi: u32,
    opts: &RenderOptions,
    row_time: TimeFn,
) -> Result<Frame, SimError>
where
    TimeFn: Fn(u32) -> f64 + Sync,
{
    let n = opts.exposure_samples.get();
    let rows: Result<Vec<(Vec<f64>, RowMeta)>, SimError> = (0..height)
        .into_par_iter()
        .map(|y| {
            let t_row = row_time(y);
            let times = exposure_times(t_row, te, n, opts.seed, fi, y);
            let mut acc = vec![0.0; width as usize];
            for &t in &times {
                let pose = motion.pose_at(t)?;
                match scene {
                    Scene::PointSet(_) => {
                        let mut row = vec![0.0; width as usize];
                        render_row(scene, &pose, k, d, width, y, &mut row);
                        for (a, v) in acc.iter_mut().zip(&row) {
                            *a += v;
                        }
                    }
                    _ => render_row(scene, &pose, k, d, width, y, &mut acc),
                }
            }
            let inv = 1.0 / n as f64;
            let row: Vec<f64> = acc
                .iter()
                .map(|&v| opts.response.apply((v * inv).clamp(0.0, 1.0)))
                .collect();
            let meta = RowMeta {
                t_start: t_row,
                pose: Some(motion.pose_at(t_row)?),
            };
            Ok((row, meta))
        })
        .collect();
    let rows = rows?;

    let mut frame = Frame::new(width, height);
    for (y, (row, meta)) in rows.into_iter().enumerate() {
        frame.set_row(y as u32, &row);
        frame.set_row_meta(y as u32, meta);
    }
    Ok(frame)
}

/// Synthesize one rolling-shutter frame: each row is rendered at poses drawn
/// from its own exposure window `[row_start_time(y), +te]`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_rs_frame(
    scene: &Scene,
    motion: &MotionModel,
    k: &Intrinsics,
    d: &RadialDistortion,
    timing: &ShutterTiming,
    tau0: f64,
    fi: u32,
    width: u32,
    opts: &RenderOptions,
) -> Result<Frame, SimError> {
    if !timing.scan().is_row_axis() {
        return Err(SimError::UnsupportedScanAxis);
    }
    let height = timing.height();
    // Row times are exact row_start_time values; precompute to keep the
    // closure infallible (y < height by construction).
    let times: Vec<f64> = (0..height)
        .map(|y| timing.row_start_time(tau0, y, fi))
        .collect::<Result<_, _>>()?;
    render_frame(
        scene,
        motion,
        k,
        d,
        width,
        height,
        timing.te(),
        fi,
        opts,
        |y| times[y as usize],
    )
}

/// Synthesize the global-shutter reference: every row exposed from the frame
/// start at the single given pose. With identical options and a static
/// motion model, `synthesize_rs_frame` produces bit-identical radiance.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_gs_frame(
    scene: &Scene,
    pose: &Pose,
    k: &Intrinsics,
    d: &RadialDistortion,
    timing: &ShutterTiming,
    tau0: f64,
    fi: u32,
    width: u32,
    opts: &RenderOptions,
) -> Result<Frame, SimError> {
    let motion = MotionModel::static_pose(pose.clone());
    let t_frame = tau0 + fi as f64 * timing.frame_period();
    render_frame(
        scene,
        &motion,
        k,
        d,
        width,
        timing.height(),
        timing.te(),
        fi,
        opts,
        |_| t_frame,
    )
}

/// Flashing-illuminant waveform for calibration-target sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlashWaveform {
    /// `0.5 + 0.5 sin(2 pi f t)`.
    Sine,
    /// On for the first `duty` fraction of each period.
    Square { duty: f64 },
}

/// A lens-less flashing-light exposure: every pixel of a row sees the
/// illuminant intensity at the row's sample times. Used to synthesize
/// shutter-calibration sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlashIlluminant {
    pub freq_hz: f64,
    pub waveform: FlashWaveform,
}

impl FlashIlluminant {
    pub fn intensity(&self, t: f64) -> f64 {
        let phase = self.freq_hz * t;
        match self.waveform {
            FlashWaveform::Sine => 0.5 + 0.5 * (std::f64::consts::TAU * phase).sin(),
            FlashWaveform::Square { duty } => {
                if phase.rem_euclid(1.0) < duty.clamp(0.0, 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Synthesize `frame_count` frames of horizontal flash banding. Rows carry
/// their exposure start times; there is no scene geometry involved.
pub fn synthesize_flash_frames(
    timing: &ShutterTiming,
    tau0: f64,
    flash: &FlashIlluminant,
    frame_count: u32,
    width: u32,
    opts: &RenderOptions,
) -> Result<Vec<Frame>, SimError> {
    if !timing.scan().is_row_axis() {
        return Err(SimError::UnsupportedScanAxis);
    }
    let n = opts.exposure_samples.get();
    let mut frames = Vec::with_capacity(frame_count as usize);
    for fi in 0..frame_count {
        let mut frame = Frame::new(width, timing.height());
        for y in 0..timing.height() {
            let t_row = timing.row_start_time(tau0, y, fi)?;
            let times = exposure_times(t_row, timing.te(), n, opts.seed, fi, y);
            let mean =
                times.iter().map(|&t| flash.intensity(t)).sum::<f64>() / times.len() as f64;
            let value = opts.response.apply(mean.clamp(0.0, 1.0));
            frame.set_row(y, &vec![value; width as usize]);
            frame.set_row_meta(
                y,
                RowMeta {
                    t_start: t_row,
                    pose: None,
                },
            );
        }
        frames.push(frame);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_y, Point3, Vec3};
    use crate::shutter::{complete_timing, ShutterMode, TimingSpec};
    use crate::sim::scene::{ScenePoint, Texture, TexturedPlane};

    fn rolling_timing(height: u32, tr: f64, te: f64) -> ShutterTiming {
        complete_timing(&TimingSpec {
            te: Some(te),
            tr: Some(tr),
            tf: Some(0.0),
            fps: None,
            height,
            mode: ShutterMode::Rolling,
        })
        .unwrap()
    }

    fn plane_scene() -> Scene {
        Scene::TexturedPlane(
            TexturedPlane::fronto_parallel(4.0, (6.0, 5.0), Texture::checkerboard(64, 64, 8))
                .unwrap(),
        )
    }

    #[test]
    fn static_rs_equals_gs_bit_exact() {
        let k = Intrinsics::new(300.0, 300.0, 0.0, 80.0, 60.0).unwrap();
        let d = RadialDistortion::new(vec![-0.1]).unwrap();
        let t = rolling_timing(120, 1e-5, 5e-4);
        let pose = Pose::new(rot_y(0.1), Vec3::new(0.2, -0.1, 0.0)).unwrap();
        let motion = MotionModel::static_pose(pose.clone());
        let opts = RenderOptions::default().with_samples(3).with_seed(42);

        let rs = synthesize_rs_frame(&plane_scene(), &motion, &k, &d, &t, 0.0, 0, 160, &opts).unwrap();
        let gs = synthesize_gs_frame(&plane_scene(), &pose, &k, &d, &t, 0.0, 0, 160, &opts).unwrap();
        assert_eq!(rs.data(), gs.data());
    }

    #[test]
    fn row_metadata_matches_row_start_times() {
        let k = Intrinsics::new(300.0, 300.0, 0.0, 80.0, 60.0).unwrap();
        let d = RadialDistortion::none();
        let t = rolling_timing(60, 2e-5, 0.0);
        let motion = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(0.5, 0.0, 0.0));
        let frame = synthesize_rs_frame(
            &plane_scene(),
            &motion,
            &k,
            &d,
            &t,
            0.25,
            3,
            80,
            &RenderOptions::default(),
        )
        .unwrap();
        for y in 0..t.height() {
            assert_eq!(
                frame.row_meta(y).t_start,
                t.row_start_time(0.25, y, 3).unwrap()
            );
            let expected_pose = motion.pose_at(frame.row_meta(y).t_start).unwrap();
            assert_eq!(frame.row_meta(y).pose.as_ref(), Some(&expected_pose));
        }
    }

    #[test]
    fn vertical_line_skews_under_x_translation() {
        // A vertical stripe of world points renders as a slanted line whose
        // per-row shift follows fx*vx*tr*y/Z.
        let k = Intrinsics::new(400.0, 400.0, 0.0, 64.0, 64.0).unwrap();
        let d = RadialDistortion::none();
        let t = rolling_timing(128, 5e-5, 0.0);
        let z = 2.0;
        let vx = 1.0;
        let points: Vec<ScenePoint> = (0..128)
            .map(|i| {
                let ny = (i as f64 + 0.5 - k.cy()) / k.fy();
                ScenePoint {
                    position: Point3::new(0.0, ny * z, z),
                    radiance: 1.0,
                }
            })
            .collect();
        let scene = Scene::point_set(points).unwrap();
        let motion = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(vx, 0.0, 0.0));
        let frame = synthesize_rs_frame(
            &scene,
            &motion,
            &k,
            &d,
            &t,
            0.0,
            0,
            128,
            &RenderOptions::default(),
        )
        .unwrap();

        // Locate the lit column in the first and a late row.
        let lit = |y: u32| frame.row(y).iter().position(|&v| v > 0.5);
        let (y0, y1) = (2u32, 120u32);
        let (c0, c1) = (lit(y0), lit(y1));
        let (c0, c1) = (c0.expect("row lit") as f64, c1.expect("row lit") as f64);
        let expected = k.fx() * vx * t.tr() * (y1 - y0) as f64 / z;
        let got = c1 - c0;
        assert!(
            (got - expected).abs() <= 1.0,
            "shift {got} px vs closed form {expected} px"
        );
    }

    #[test]
    fn exposure_sampling_blurs_motion_and_keeps_static_mean() {
        let k = Intrinsics::new(300.0, 300.0, 0.0, 80.0, 60.0).unwrap();
        let d = RadialDistortion::none();
        let t = rolling_timing(120, 1e-5, 2e-2 - 120.0 * 1e-5);
        let opts1 = RenderOptions::default().with_samples(1).with_seed(9);
        let opts32 = RenderOptions::default().with_samples(32).with_seed(9);

        // Static: 32-sample render equals the 1-sample render exactly.
        let motion = MotionModel::static_pose(Pose::identity());
        let a = synthesize_rs_frame(&plane_scene(), &motion, &k, &d, &t, 0.0, 0, 160, &opts1).unwrap();
        let b = synthesize_rs_frame(&plane_scene(), &motion, &k, &d, &t, 0.0, 0, 160, &opts32).unwrap();
        assert_eq!(a.data(), b.data());

        // Fast motion: long exposure produces intermediate (blurred) values.
        let moving = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(3.0, 0.0, 0.0));
        let blurred =
            synthesize_rs_frame(&plane_scene(), &moving, &k, &d, &t, 0.0, 0, 160, &opts32).unwrap();
        let intermediate = blurred
            .data()
            .iter()
            .filter(|&&v| v > 0.05 && v < 0.95)
            .count();
        assert!(
            intermediate > 100,
            "expected blurred edge pixels, found {intermediate}"
        );
    }

    #[test]
    fn empty_scene_renders_black() {
        let k = Intrinsics::new(300.0, 300.0, 0.0, 80.0, 60.0).unwrap();
        let d = RadialDistortion::none();
        let t = rolling_timing(32, 1e-5, 0.0);
        let scene = Scene::point_set(vec![]).unwrap();
        let motion = MotionModel::static_pose(Pose::identity());
        let f = synthesize_rs_frame(&scene, &motion, &k, &d, &t, 0.0, 0, 32, &RenderOptions::default())
            .unwrap();
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bottom_to_top_scan_reverses_skew_direction() {
        let k = Intrinsics::new(400.0, 400.0, 0.0, 64.0, 64.0).unwrap();
        let d = RadialDistortion::none();
        let t = rolling_timing(128, 5e-5, 0.0);
        let tb = t;
        let bt = t.with_scan(ScanDirection::BottomToTop);
        let motion = MotionModel::translation_const_vel(Pose::identity(), Vec3::new(1.0, 0.0, 0.0));
        let scene = plane_scene();
        let opts = RenderOptions::default();
        let a = synthesize_rs_frame(&scene, &motion, &k, &d, &tb, 0.0, 0, 128, &opts).unwrap();
        let b = synthesize_rs_frame(&scene, &motion, &k, &d, &bt, 0.0, 0, 128, &opts).unwrap();
        // Top row of the bottom-up scan is exposed last, so it matches the
        // bottom-row time of the top-down scan; frames differ but their row
        // time sets are mirrors.
        assert_ne!(a.data(), b.data());
        for y in 0..128 {
            assert_eq!(
                a.row_meta(y).t_start,
                b.row_meta(127 - y).t_start
            );
        }
    }

    #[test]
    fn gamma_response_is_applied_last() {
        let k = Intrinsics::new(300.0, 300.0, 0.0, 80.0, 60.0).unwrap();
        let d = RadialDistortion::none();
        let t = rolling_timing(16, 1e-5, 0.0);
        let motion = MotionModel::static_pose(Pose::identity());
        let scene = Scene::TexturedPlane(
            TexturedPlane::fronto_parallel(2.0, (4.0, 4.0), Texture::new(1, 1, vec![0.25]).unwrap())
                .unwrap(),
        );
        let linear = synthesize_rs_frame(
            &scene, &motion, &k, &d, &t, 0.0, 0, 16,
            &RenderOptions::default(),
        )
        .unwrap();
        let gamma = synthesize_rs_frame(
            &scene, &motion, &k, &d, &t, 0.0, 0, 16,
            &RenderOptions::default().with_response(CameraResponse::Gamma(2.2)),
        )
        .unwrap();
        let x = (8, 8);
        assert_eq!(linear.get(x.0, x.1), 0.25);
        assert_eq!(gamma.get(x.0, x.1), 0.25f64.powf(1.0 / 2.2));
    }

    #[test]
    fn flash_frames_band_at_the_flash_period() {
        let t = rolling_timing(400, 2e-5, 0.0);
        let flash = FlashIlluminant {
            freq_hz: 500.0,
            waveform: FlashWaveform::Sine,
        };
        let frames =
            synthesize_flash_frames(&t, 0.0, &flash, 2, 4, &RenderOptions::default()).unwrap();
        assert_eq!(frames.len(), 2);
        let f = &frames[0];
        // Banding period in rows: 1 / (f * tr) = 100 rows.
        let v0 = f.get(0, 0);
        let v100 = f.get(0, 100);
        assert!((v0 - v100).abs() < 1e-9, "{v0} vs {v100}");
        let v50 = f.get(0, 50);
        assert!((v0 - v50).abs() > 0.1, "expected contrast across half period");
        // All pixels in a row are equal.
        assert!(f.row(37).iter().all(|&v| v == f.get(0, 37)));
    }
}
