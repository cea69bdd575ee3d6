//! Shutter timing arithmetic for global and rolling shutters.
//!
//! A rolling shutter staggers the exposure start of consecutive scan lines by
//! the line delay `tr`; the frame interval satisfies
//! `1/fps = H*tr + tf + te`. A global shutter exposes every row at the frame
//! start; readout staggering does not affect exposure start.

use thiserror::Error;

/// Relative tolerance for the rolling-shutter timing identity.
pub const TIMING_IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimingError {
    #[error("row {row} out of range for height {height}")]
    RowOutOfRange { row: u32, height: u32 },
    #[error("timing identity violated: 1/fps = {lhs:.9e} but H*tr + tf + te = {rhs:.9e}")]
    InconsistentTiming { lhs: f64, rhs: f64 },
    #[error("{name} must be {requirement}, got {value}")]
    InvalidParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("solved {param} would be negative ({value:.3e})")]
    InfeasibleTiming { param: &'static str, value: f64 },
    #[error("exactly one of te/tr/tf/fps must be unknown, found {unknowns}")]
    Underconstrained { unknowns: usize },
    #[error("no unknown to solve for: all of te/tr/tf/fps are fixed")]
    Overconstrained,
}

/// Exposure scheme of the sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShutterMode {
    /// All rows exposed simultaneously for the same window.
    Global,
    /// Scan lines exposed sequentially, staggered by the line delay.
    Rolling,
}

/// Sweep axis and direction of the rolling readout. The paper's equations
/// assume a top-to-bottom row sweep; the other variants are handled by index
/// remapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanDirection {
    #[default]
    TopToBottom,
    BottomToTop,
    LeftToRight,
    RightToLeft,
}

impl ScanDirection {
    /// True when scan lines are image rows (top/bottom sweeps).
    pub fn is_row_axis(&self) -> bool {
        matches!(self, ScanDirection::TopToBottom | ScanDirection::BottomToTop)
    }

    /// Number of scan lines for an image of the given size.
    pub fn scan_line_count(&self, width: u32, height: u32) -> u32 {
        if self.is_row_axis() {
            height
        } else {
            width
        }
    }

    /// Exposure-order index of the scan line containing pixel `(x, y)`.
    pub fn scan_index(&self, x: u32, y: u32, width: u32, height: u32) -> u32 {
        match self {
            ScanDirection::TopToBottom => y,
            ScanDirection::BottomToTop => height - 1 - y,
            ScanDirection::LeftToRight => x,
            ScanDirection::RightToLeft => width - 1 - x,
        }
    }
}

/// Complete shutter timing block. All times in seconds, rates in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShutterTiming {
    te: f64,
    tr: f64,
    tf: f64,
    height: u32,
    fps: f64,
    mode: ShutterMode,
    scan: ScanDirection,
}

fn check_non_negative(name: &'static str, value: f64) -> Result<(), TimingError> {
    if !value.is_finite() || value < 0.0 {
        return Err(TimingError::InvalidParameter {
            name,
            requirement: ">= 0 and finite",
            value,
        });
    }
    Ok(())
}

impl ShutterTiming {
    pub fn new(
        mode: ShutterMode,
        te: f64,
        tr: f64,
        tf: f64,
        height: u32,
        fps: f64,
    ) -> Result<Self, TimingError> {
        check_non_negative("te", te)?;
        check_non_negative("tr", tr)?;
        check_non_negative("tf", tf)?;
        if !fps.is_finite() || fps <= 0.0 {
            return Err(TimingError::InvalidParameter {
                name: "fps",
                requirement: "> 0 and finite",
                value: fps,
            });
        }
        if height == 0 {
            return Err(TimingError::InvalidParameter {
                name: "height",
                requirement: "> 0",
                value: 0.0,
            });
        }
        let timing = Self {
            te,
            tr,
            tf,
            height,
            fps,
            mode,
            scan: ScanDirection::default(),
        };
        if mode == ShutterMode::Rolling {
            let lhs = 1.0 / fps;
            let rhs = timing.readout_sum();
            if (lhs - rhs).abs() > TIMING_IDENTITY_TOL * lhs {
                return Err(TimingError::InconsistentTiming { lhs, rhs });
            }
        }
        Ok(timing)
    }

    pub fn with_scan(mut self, scan: ScanDirection) -> Self {
        self.scan = scan;
        self
    }

    fn readout_sum(&self) -> f64 {
        self.height as f64 * self.tr + self.tf + self.te
    }

    pub fn te(&self) -> f64 {
        self.te
    }
    pub fn tr(&self) -> f64 {
        self.tr
    }
    pub fn tf(&self) -> f64 {
        self.tf
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn fps(&self) -> f64 {
        self.fps
    }
    pub fn mode(&self) -> ShutterMode {
        self.mode
    }
    pub fn scan(&self) -> ScanDirection {
        self.scan
    }

    /// Duration of one frame interval, `1/fps`.
    pub fn frame_period(&self) -> f64 {
        1.0 / self.fps
    }

    /// Exposure start of row `y` in frame `fi`:
    /// `tau0 + y*tr + fi/fps` for a rolling shutter (after scan-direction
    /// remapping), `tau0 + fi/fps` for every row of a global shutter.
    pub fn row_start_time(&self, tau0: f64, y: u32, fi: u32) -> Result<f64, TimingError> {
        if y >= self.height {
            return Err(TimingError::RowOutOfRange {
                row: y,
                height: self.height,
            });
        }
        match self.mode {
            ShutterMode::Global => Ok(tau0 + fi as f64 * self.frame_period()),
            ShutterMode::Rolling => {
                let order = match self.scan {
                    ScanDirection::TopToBottom => y,
                    ScanDirection::BottomToTop => self.height - 1 - y,
                    // Column sweeps do not stagger rows; use
                    // `pixel_start_time` for their per-pixel times.
                    ScanDirection::LeftToRight | ScanDirection::RightToLeft => y,
                };
                Ok(self.scan_line_time(tau0, order as f64, fi))
            }
        }
    }

    /// Exposure start of the scan line containing pixel `(x, y)` for an image
    /// of the given width. Covers column sweeps, where rows are not the scan
    /// axis.
    pub fn pixel_start_time(
        &self,
        tau0: f64,
        x: u32,
        y: u32,
        width: u32,
        fi: u32,
    ) -> Result<f64, TimingError> {
        if y >= self.height {
            return Err(TimingError::RowOutOfRange {
                row: y,
                height: self.height,
            });
        }
        match self.mode {
            ShutterMode::Global => Ok(tau0 + fi as f64 * self.frame_period()),
            ShutterMode::Rolling => {
                let order = self.scan.scan_index(x, y, width, self.height);
                Ok(self.scan_line_time(tau0, order as f64, fi))
            }
        }
    }

    /// Continuous version of the sweep clock: time at fractional scan
    /// position `s` (in exposure order) of frame `fi`. No range check.
    pub fn scan_line_time(&self, tau0: f64, s: f64, fi: u32) -> f64 {
        tau0 + s * self.tr + fi as f64 * (1.0 / self.fps)
    }
}

/// Timing block with exactly one of te/tr/tf/fps left unknown, to be solved
/// from the identity `1/fps = H*tr + tf + te`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSpec {
    pub te: Option<f64>,
    pub tr: Option<f64>,
    pub tf: Option<f64>,
    pub fps: Option<f64>,
    pub height: u32,
    pub mode: ShutterMode,
}

/// Solve the timing identity for the single unknown field and return the
/// completed, validated timing. Values that would come out negative are
/// rejected; magnitudes within the identity tolerance of zero are clamped to
/// exactly zero so boundary cases solve cleanly.
pub fn complete_timing(spec: &TimingSpec) -> Result<ShutterTiming, TimingError> {
    let unknowns = [
        spec.te.is_none(),
        spec.tr.is_none(),
        spec.tf.is_none(),
        spec.fps.is_none(),
    ]
    .iter()
    .filter(|&&u| u)
    .count();
    if unknowns == 0 {
        return Err(TimingError::Overconstrained);
    }
    if unknowns > 1 {
        return Err(TimingError::Underconstrained { unknowns });
    }

    let h = spec.height as f64;
    let solve_non_negative = |param: &'static str, value: f64, period: f64| {
        if value < 0.0 {
            if value.abs() <= TIMING_IDENTITY_TOL * period {
                Ok(0.0)
            } else {
                Err(TimingError::InfeasibleTiming { param, value })
            }
        } else {
            Ok(value)
        }
    };

    let (te, tr, tf, fps) = match (spec.te, spec.tr, spec.tf, spec.fps) {
        (None, Some(tr), Some(tf), Some(fps)) => {
            let period = 1.0 / fps;
            let te = solve_non_negative("te", period - h * tr - tf, period)?;
            (te, tr, tf, fps)
        }
        (Some(te), None, Some(tf), Some(fps)) => {
            let period = 1.0 / fps;
            let tr = solve_non_negative("tr", (period - tf - te) / h, period)?;
            (te, tr, tf, fps)
        }
        (Some(te), Some(tr), None, Some(fps)) => {
            let period = 1.0 / fps;
            let tf = solve_non_negative("tf", period - h * tr - te, period)?;
            (te, tr, tf, fps)
        }
        (Some(te), Some(tr), Some(tf), None) => {
            let sum = h * tr + tf + te;
            if sum <= 0.0 {
                return Err(TimingError::InfeasibleTiming {
                    param: "fps",
                    value: sum,
                });
            }
            (te, tr, tf, 1.0 / sum)
        }
        _ => unreachable!("unknown count checked above"),
    };
    ShutterTiming::new(spec.mode, te, tr, tf, spec.height, fps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rolling(te: f64, tr: f64, tf: f64, height: u32, fps: f64) -> ShutterTiming {
        ShutterTiming::new(ShutterMode::Rolling, te, tr, tf, height, fps).unwrap()
    }

    /// Consistent rolling timing derived from (te, tr, tf, H).
    fn rolling_from_parts(te: f64, tr: f64, tf: f64, height: u32) -> ShutterTiming {
        let fps = 1.0 / (height as f64 * tr + tf + te);
        rolling(te, tr, tf, height, fps)
    }

    #[test]
    fn row_start_time_examples() {
        let t = rolling_from_parts(0.0, 1e-5, 0.0, 480);
        assert_eq!(t.row_start_time(0.0, 0, 0).unwrap(), 0.0);

        // tau0 = 0, y = 100, tr = 1e-5, fi = 2, fps = 30.
        let t = ShutterTiming::new(
            ShutterMode::Rolling,
            1.0 / 30.0 - 480.0 * 1e-5,
            1e-5,
            0.0,
            480,
            30.0,
        )
        .unwrap();
        let got = t.row_start_time(0.0, 100, 2).unwrap();
        assert_relative_eq!(got, 100.0 * 1e-5 + 2.0 / 30.0, epsilon = 1e-15);
        assert_relative_eq!(got, 0.0676667, epsilon = 1e-7);
    }

    #[test]
    fn global_mode_ignores_row() {
        let t = ShutterTiming::new(ShutterMode::Global, 1e-3, 2e-5, 0.0, 480, 30.0).unwrap();
        let t0 = t.row_start_time(0.5, 0, 3).unwrap();
        for y in [1, 100, 479] {
            assert_eq!(t.row_start_time(0.5, y, 3).unwrap(), t0);
        }
        assert_relative_eq!(t0, 0.5 + 3.0 / 30.0, epsilon = 1e-15);
    }

    #[test]
    fn row_out_of_range() {
        let t = rolling_from_parts(0.0, 1e-5, 0.0, 480);
        assert!(matches!(
            t.row_start_time(0.0, 480, 0),
            Err(TimingError::RowOutOfRange { .. })
        ));
    }

    #[test]
    fn row_start_matches_affine_formula_bitwise() {
        let t = rolling_from_parts(2e-3, 1.25e-5, 1e-4, 600);
        let period = 1.0 / t.fps();
        for (tau0, y, fi) in [(0.0, 0u32, 0u32), (0.125, 17, 3), (-2.5, 599, 40)] {
            let got = t.row_start_time(tau0, y, fi).unwrap();
            let want = tau0 + y as f64 * t.tr() + fi as f64 * period;
            assert_eq!(got.to_bits(), want.to_bits());
        }
    }

    #[test]
    fn unit_step_slopes_are_exact() {
        let t = rolling_from_parts(1e-3, 1e-5, 2e-4, 480);
        let a = t.row_start_time(0.0, 0, 0).unwrap();
        let b = t.row_start_time(0.0, 1, 0).unwrap();
        assert_eq!(b - a, t.tr());
        let c = t.row_start_time(0.0, 0, 1).unwrap();
        assert_eq!(c - a, 1.0 / t.fps());
    }

    #[test]
    fn rejects_inconsistent_rolling_identity() {
        let err = ShutterTiming::new(ShutterMode::Rolling, 1e-3, 1e-5, 1e-4, 480, 30.0).unwrap_err();
        assert!(matches!(err, TimingError::InconsistentTiming { .. }));
    }

    #[test]
    fn rejects_negative_parameters() {
        assert!(ShutterTiming::new(ShutterMode::Global, -1e-3, 0.0, 0.0, 480, 30.0).is_err());
        assert!(ShutterTiming::new(ShutterMode::Global, 0.0, -1e-5, 0.0, 480, 30.0).is_err());
        assert!(ShutterTiming::new(ShutterMode::Global, 0.0, 0.0, -1.0, 480, 30.0).is_err());
        assert!(ShutterTiming::new(ShutterMode::Global, 0.0, 0.0, 0.0, 480, 0.0).is_err());
        assert!(ShutterTiming::new(ShutterMode::Global, 0.0, 0.0, 0.0, 0, 30.0).is_err());
    }

    #[test]
    fn complete_timing_solves_tf() {
        // H = 480, tr = 1e-5, te = 5e-3, fps = 100 -> tf = 0.01 - 0.0048 - 0.005.
        let spec = TimingSpec {
            te: Some(5e-3),
            tr: Some(1e-5),
            tf: None,
            fps: Some(100.0),
            height: 480,
            mode: ShutterMode::Rolling,
        };
        let t = complete_timing(&spec).unwrap();
        assert_relative_eq!(t.tf(), 2e-4, epsilon = 1e-15);
        let lhs = 1.0 / t.fps();
        let rhs = 480.0 * t.tr() + t.tf() + t.te();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn complete_timing_boundary_tf_zero() {
        // H*tr + te exactly equals 1/fps.
        let spec = TimingSpec {
            te: Some(0.01 - 480.0 * 1e-5),
            tr: Some(1e-5),
            tf: None,
            fps: Some(100.0),
            height: 480,
            mode: ShutterMode::Rolling,
        };
        let t = complete_timing(&spec).unwrap();
        assert_eq!(t.tf(), 0.0);
    }

    #[test]
    fn complete_timing_infeasible() {
        let spec = TimingSpec {
            te: Some(6e-3),
            tr: Some(1e-5),
            tf: None,
            fps: Some(100.0),
            height: 480,
            mode: ShutterMode::Rolling,
        };
        // H*tr + te = 0.0108 > 0.01.
        assert!(matches!(
            complete_timing(&spec),
            Err(TimingError::InfeasibleTiming { param: "tf", .. })
        ));
    }

    #[test]
    fn complete_timing_solves_each_unknown() {
        let reference = rolling_from_parts(2e-3, 1.5e-5, 3e-4, 480);
        let known = |v: f64| Some(v);
        let cases = [
            TimingSpec {
                te: None,
                tr: known(reference.tr()),
                tf: known(reference.tf()),
                fps: known(reference.fps()),
                height: 480,
                mode: ShutterMode::Rolling,
            },
            TimingSpec {
                te: known(reference.te()),
                tr: None,
                tf: known(reference.tf()),
                fps: known(reference.fps()),
                height: 480,
                mode: ShutterMode::Rolling,
            },
            TimingSpec {
                te: known(reference.te()),
                tr: known(reference.tr()),
                tf: known(reference.tf()),
                fps: None,
                height: 480,
                mode: ShutterMode::Rolling,
            },
        ];
        for spec in cases {
            let t = complete_timing(&spec).unwrap();
            assert_relative_eq!(t.te(), reference.te(), max_relative = 1e-9);
            assert_relative_eq!(t.tr(), reference.tr(), max_relative = 1e-9);
            assert_relative_eq!(t.tf(), reference.tf(), max_relative = 1e-9);
            assert_relative_eq!(t.fps(), reference.fps(), max_relative = 1e-9);
        }
    }

    #[test]
    fn complete_timing_rejects_wrong_unknown_counts() {
        let full = TimingSpec {
            te: Some(1e-3),
            tr: Some(1e-5),
            tf: Some(1e-4),
            fps: Some(100.0),
            height: 480,
            mode: ShutterMode::Rolling,
        };
        assert!(matches!(complete_timing(&full), Err(TimingError::Overconstrained)));
        let two = TimingSpec {
            te: None,
            tr: None,
            ..full
        };
        assert!(matches!(
            complete_timing(&two),
            Err(TimingError::Underconstrained { unknowns: 2 })
        ));
    }

    #[test]
    fn frame_gap_for_tf_free_camera() {
        // With tf = 0, the last row's start plus tr + te lands exactly on the
        // next frame's first row start.
        let t = rolling_from_parts(1.5e-3, 1e-5, 0.0, 480);
        for fi in 0..3 {
            let last = t.row_start_time(0.0, 479, fi).unwrap();
            let next = t.row_start_time(0.0, 0, fi + 1).unwrap();
            let gap = next - (last + t.tr() + t.te());
            assert!(gap.abs() <= t.te() + 1e-12, "gap {gap}");
        }
    }

    #[test]
    fn bottom_to_top_scan_reverses_staggering() {
        let t = rolling_from_parts(0.0, 1e-5, 0.0, 480).with_scan(ScanDirection::BottomToTop);
        let first = t.row_start_time(0.0, 479, 0).unwrap();
        let last = t.row_start_time(0.0, 0, 0).unwrap();
        assert_eq!(first, 0.0);
        assert_relative_eq!(last, 479.0 * 1e-5, epsilon = 1e-15);
    }

    #[test]
    fn column_scan_indexing() {
        let scan = ScanDirection::LeftToRight;
        assert!(!scan.is_row_axis());
        assert_eq!(scan.scan_line_count(640, 480), 640);
        assert_eq!(scan.scan_index(5, 100, 640, 480), 5);
        assert_eq!(ScanDirection::RightToLeft.scan_index(5, 100, 640, 480), 634);

        let t = rolling_from_parts(0.0, 1e-5, 0.0, 480).with_scan(ScanDirection::LeftToRight);
        // Pixel time follows the column, not the row.
        let a = t.pixel_start_time(0.0, 10, 0, 640, 0).unwrap();
        let b = t.pixel_start_time(0.0, 10, 400, 640, 0).unwrap();
        assert_eq!(a, b);
        let c = t.pixel_start_time(0.0, 11, 0, 640, 0).unwrap();
        assert_relative_eq!(c - a, 1e-5, epsilon = 1e-18);
    }
}
