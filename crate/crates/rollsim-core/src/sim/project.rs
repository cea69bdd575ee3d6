//! Rolling-shutter projection of a world point under a time-varying pose:
//! the point is imaged when the sweep line passes its (moving) projection,
//! a fixed point of `t -> row_start_time(row(p(t)))`.

use crate::distortion::RadialDistortion;
use crate::geometry::{perspective_divide, Intrinsics, PixelPoint2, Point3, Pose};
use crate::motion::MotionModel;
use crate::shutter::{ScanDirection, ShutterMode, ShutterTiming};
use crate::sim::SimError;

/// One imaging solution: where and when the point was captured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsProjection {
    pub pixel: PixelPoint2,
    /// Capture time. An exact row start time when the per-row fixed point
    /// exists; the continuous sweep crossing otherwise.
    pub time: f64,
}

impl RsProjection {
    /// Image row the solution lands in.
    pub fn row(&self) -> i64 {
        self.pixel.row()
    }
}

/// Project through pose, perspective division, distortion, and intrinsics.
pub fn project_distorted(
    pose: &Pose,
    k: &Intrinsics,
    d: &RadialDistortion,
    x: &Point3,
) -> Result<PixelPoint2, SimError> {
    let cam = pose.apply(x);
    let n = perspective_divide(&cam)?;
    let n = if d.is_identity() { n } else { d.distort(&n)? };
    Ok(k.apply(&n))
}

struct SweepProblem<'a> {
    x: &'a Point3,
    motion: &'a MotionModel,
    k: &'a Intrinsics,
    d: &'a RadialDistortion,
    timing: &'a ShutterTiming,
    tau0: f64,
    fi: u32,
    /// Continuous image row exposed at scan position s.
    flip: bool,
}

impl SweepProblem<'_> {
    fn height(&self) -> u32 {
        self.timing.height()
    }

    /// Continuous image row exposed at fractional scan position `s`.
    fn row_of_scan(&self, s: f64) -> f64 {
        if self.flip {
            (self.height() - 1) as f64 - s
        } else {
            s
        }
    }

    /// Scan position that exposes image row `y`.
    fn scan_of_row(&self, y: u32) -> u32 {
        if self.flip {
            self.height() - 1 - y
        } else {
            y
        }
    }

    fn time_of_scan(&self, s: f64) -> f64 {
        self.timing.scan_line_time(self.tau0, s, self.fi)
    }

    /// Projected pixel at time t, None when the point is behind the camera
    /// or outside the distortion working radius.
    fn pixel_at(&self, t: f64) -> Option<PixelPoint2> {
        let pose = self.motion.pose_at(t).ok()?;
        project_distorted(&pose, self.k, self.d, self.x).ok()
    }

    /// Sweep residual g(s) = p_y(t(s)) - row(s); a zero is an imaging event.
    fn residual(&self, s: f64) -> Option<f64> {
        let p = self.pixel_at(self.time_of_scan(s))?;
        Some(p.y - self.row_of_scan(s))
    }
}

/// All imaging solutions of a world point within one frame, ordered by time.
///
/// Scans every scan line for the discrete per-row fixed point
/// (`floor(p_y)` at the row's start time equals the row itself) and brackets
/// the remaining continuous sweep crossings, refining them by bisection until
/// the time interval shrinks below `tol`.
pub fn rs_project_point_all(
    x: &Point3,
    motion: &MotionModel,
    k: &Intrinsics,
    d: &RadialDistortion,
    timing: &ShutterTiming,
    tau0: f64,
    fi: u32,
    tol: f64,
) -> Result<Vec<RsProjection>, SimError> {
    if timing.mode() == ShutterMode::Global {
        // Every row is exposed at the frame start; a single projection decides.
        let t = timing.row_start_time(tau0, 0, fi)?;
        let pose = motion.pose_at(t)?;
        let p = project_distorted(&pose, k, d, x)?;
        if p.row() >= 0 && (p.row() as u32) < timing.height() && p.col() >= 0 {
            return Ok(vec![RsProjection { pixel: p, time: t }]);
        }
        return Err(SimError::NotImagedThisFrame);
    }

    let flip = match timing.scan() {
        ScanDirection::TopToBottom => false,
        ScanDirection::BottomToTop => true,
        _ => {
            return Err(SimError::UnsupportedScanAxis);
        }
    };
    let problem = SweepProblem {
        x,
        motion,
        k,
        d,
        timing,
        tau0,
        fi,
        flip,
    };
    let height = timing.height();
    let mut solutions: Vec<RsProjection> = Vec::new();

    // Discrete per-row fixed points at exact row start times.
    let mut row_hit = vec![false; height as usize];
    let mut samples: Vec<Option<f64>> = Vec::with_capacity(height as usize + 1);
    for s in 0..height {
        let t = problem.time_of_scan(s as f64);
        let pixel = problem.pixel_at(t);
        samples.push(pixel.map(|p| p.y - problem.row_of_scan(s as f64)));
        if let Some(p) = pixel {
            let row = problem.row_of_scan(s as f64) as i64;
            if p.row() == row {
                row_hit[row as usize] = true;
                solutions.push(RsProjection { pixel: p, time: t });
            }
        }
    }
    // One extra sample closes the last sub-row interval of the sweep.
    samples.push(problem.residual(height as f64 - 1.0 + 1.0));

    // Continuous crossings between consecutive samples, for rows whose
    // discrete fixed point is missing (fast-motion oscillation).
    for s in 0..height as usize {
        let (Some(g0), Some(g1)) = (samples[s], samples[s + 1]) else {
            continue;
        };
        if g0 == 0.0 || g0 * g1 > 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (s as f64, s as f64 + 1.0);
        let mut glo = g0;
        while (problem.time_of_scan(hi) - problem.time_of_scan(lo)).abs() > tol {
            let mid = 0.5 * (lo + hi);
            let Some(gm) = problem.residual(mid) else {
                break;
            };
            if glo * gm <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        let s_root = 0.5 * (lo + hi);
        let t_root = problem.time_of_scan(s_root);
        let Some(p) = problem.pixel_at(t_root) else {
            continue;
        };
        let row = p.row();
        if row < 0 || row >= height as i64 || row_hit[row as usize] {
            continue;
        }
        // Snap to the row start when the discrete fixed point holds there.
        let t_row = problem.time_of_scan(problem.scan_of_row(row as u32) as f64);
        if let Some(p_row) = problem.pixel_at(t_row) {
            if p_row.row() == row {
                row_hit[row as usize] = true;
                solutions.push(RsProjection {
                    pixel: p_row,
                    time: t_row,
                });
                continue;
            }
        }
        row_hit[row as usize] = true;
        solutions.push(RsProjection { pixel: p, time: t_root });
    }

    if solutions.is_empty() {
        return Err(SimError::NotImagedThisFrame);
    }
    solutions.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
    solutions.dedup_by(|a, b| (a.time - b.time).abs() <= tol && a.row() == b.row());
    Ok(solutions)
}

/// The unique imaging solution of a world point within one frame.
///
/// Errors with [`SimError::NotImagedThisFrame`] when the sweep never meets
/// the point and [`SimError::MultipleSolutions`] when fast motion images it
/// more than once (use [`rs_project_point_all`] to opt into all roots).
pub fn rs_project_point(
    x: &Point3,
    motion: &MotionModel,
    k: &Intrinsics,
    d: &RadialDistortion,
    timing: &ShutterTiming,
    tau0: f64,
    fi: u32,
    tol: f64,
) -> Result<RsProjection, SimError> {
    let all = rs_project_point_all(x, motion, k, d, timing, tau0, fi, tol)?;
    match all.len() {
        1 => Ok(all[0]),
        n => Err(SimError::MultipleSolutions { count: n }),
    }
}

/// Default projection tolerance: one hundredth of the line delay.
pub fn default_projection_tol(timing: &ShutterTiming) -> f64 {
    timing.tr() / 100.0
}
