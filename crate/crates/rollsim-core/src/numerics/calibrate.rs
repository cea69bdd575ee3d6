//! Shutter-timing calibration from flash banding: a light flashing at a known
//! frequency paints horizontal bands whose spatial frequency reveals the line
//! rate, and whose frame-to-frame phase advance reveals the frame delay.

use super::NumericsError;
use crate::sim::Frame;
use rustfft::{num_complex::Complex, FftPlanner};

/// Spectral peak must clear the median floor by this much to count as a band.
pub const BAND_SNR_DB: f64 = 6.0;

/// Zero-padding factor for the banding spectrum; parabolic interpolation on
/// the padded spectrum refines the peak location well below bin width.
const FFT_PAD: usize = 8;

/// Frame-delay estimate. The inter-frame phase advance only determines the
/// frame delay modulo the flash period, so the estimate is inherently
/// ambiguous; the minimal non-negative representative is reported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDelayEstimate {
    /// Minimal non-negative frame delay consistent with the banding, seconds.
    pub seconds: f64,
    /// The ambiguity modulus (the flash period), seconds.
    pub modulo: f64,
}

/// Output of [`calibrate_line_rate`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineRateCalibration {
    /// Rows exposed per second, `n_r = flash_freq / f_band`.
    pub rows_per_second: f64,
    /// Line delay `t_r = 1 / n_r`, seconds.
    pub line_delay: f64,
    /// Dominant banding frequency, cycles per row.
    pub band_frequency: f64,
    /// Peak height over the median spectral floor, dB. Reported as the
    /// confidence of the calibration.
    pub peak_snr_db: f64,
    /// Frame delay from the inter-frame phase advance; requires at least two
    /// frames and assumes the exposure time is negligible.
    pub frame_delay: Option<FrameDelayEstimate>,
}

/// Collapse a frame to its per-row mean intensity.
fn row_means(frame: &Frame) -> Vec<f64> {
    (0..frame.height())
        .map(|y| {
            let row = frame.row(y);
            row.iter().sum::<f64>() / row.len() as f64
        })
        .collect()
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = std::f64::consts::TAU * i as f64 / n as f64;
            0.5 * (1.0 - x.cos())
        })
        .collect()
}

/// Windowed, zero-padded magnitude spectrum with parabolic peak refinement.
/// Returns (frequency in cycles/sample, peak SNR over the median floor in dB).
fn dominant_frequency(signal: &[f64]) -> Result<(f64, f64), NumericsError> {
    let n = signal.len();
    if n < 8 {
        return Err(NumericsError::InvalidInput {
            reason: format!("signal too short for spectral analysis ({n} samples)"),
        });
    }
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    // A silent signal has no band; guard before dividing by the noise floor.
    let energy: f64 = signal.iter().map(|&s| (s - mean) * (s - mean)).sum();
    if energy < 1e-18 * n as f64 {
        return Err(NumericsError::NoDominantBand {
            snr_db: 0.0,
            required_db: BAND_SNR_DB,
        });
    }

    let padded = (n * FFT_PAD).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = (0..padded)
        .map(|i| {
            if i < n {
                Complex::new((signal[i] - mean) * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        })
        .collect();
    FftPlanner::new().plan_fft_forward(padded).process(&mut buf);

    let half = padded / 2;
    let mags: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    // The Hann main lobe of any residual DC spans ~2 bins of the unpadded
    // spectrum; exclude that neighborhood when hunting for the band.
    let min_bin = (2 * FFT_PAD).min(half.saturating_sub(1));
    let (peak_bin, peak_mag) = mags
        .iter()
        .enumerate()
        .skip(min_bin)
        .map(|(i, &m)| (i, m))
        .fold((min_bin, 0.0), |acc, (i, m)| if m > acc.1 { (i, m) } else { acc });

    let mut sorted: Vec<f64> = mags[min_bin..].to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let median = sorted[sorted.len() / 2].max(1e-300);
    let snr_db = 20.0 * (peak_mag / median).log10();
    if snr_db < BAND_SNR_DB || peak_mag <= 0.0 {
        return Err(NumericsError::NoDominantBand {
            snr_db,
            required_db: BAND_SNR_DB,
        });
    }

    // Parabolic interpolation on log magnitude around the peak.
    let refined = if peak_bin > 0 && peak_bin + 1 < half {
        let (a, b, c) = (
            mags[peak_bin - 1].max(1e-300).ln(),
            mags[peak_bin].max(1e-300).ln(),
            mags[peak_bin + 1].max(1e-300).ln(),
        );
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() < 1e-300 {
            0.0
        } else {
            (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
        };
        peak_bin as f64 + delta
    } else {
        peak_bin as f64
    };
    Ok((refined / padded as f64, snr_db))
}

/// Band phase at row 0: the argument of the signal's correlation with a
/// complex exponential at the band frequency.
fn band_phase(signal: &[f64], freq: f64) -> f64 {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let window = hann(n);
    let mut z = Complex::new(0.0, 0.0);
    for (i, &s) in signal.iter().enumerate() {
        let phi = -std::f64::consts::TAU * freq * i as f64;
        z += Complex::from_polar((s - mean) * window[i], phi);
    }
    z.arg()
}

/// Estimate the line rate (and, given two or more frames, the frame delay)
/// from frames of a sensor exposed to a light flashing at `flash_freq` Hz.
///
/// Each frame is collapsed to its per-row mean intensity; the dominant
/// spatial frequency `f_band` (cycles/row) of that signal gives
/// `n_r = flash_freq / f_band` rows per second. The frame delay follows from
/// the inter-frame phase advance of the banding,
/// `tf = phase_shift / (2 pi flash_freq) - H * tr` modulo the flash period.
pub fn calibrate_line_rate(
    frames: &[Frame],
    flash_freq: f64,
) -> Result<LineRateCalibration, NumericsError> {
    if frames.is_empty() {
        return Err(NumericsError::InvalidInput {
            reason: "need at least one frame".to_string(),
        });
    }
    if !(flash_freq > 0.0) {
        return Err(NumericsError::InvalidInput {
            reason: format!("flash frequency must be > 0, got {flash_freq}"),
        });
    }
    let height = frames[0].height();
    if frames.iter().any(|f| f.height() != height) {
        return Err(NumericsError::InvalidInput {
            reason: "frames must share one height".to_string(),
        });
    }

    let signals: Vec<Vec<f64>> = frames.iter().map(row_means).collect();

    // Average the band-frequency estimate over frames.
    let mut freq_sum = 0.0;
    let mut snr_sum = 0.0;
    for signal in &signals {
        let (f, snr) = dominant_frequency(signal)?;
        freq_sum += f;
        snr_sum += snr;
    }
    let band_frequency = freq_sum / signals.len() as f64;
    let peak_snr_db = snr_sum / signals.len() as f64;
    let rows_per_second = flash_freq / band_frequency;
    let line_delay = band_frequency / flash_freq;

    let frame_delay = if signals.len() >= 2 {
        // Circular mean of consecutive phase advances.
        let phases: Vec<f64> = signals.iter().map(|s| band_phase(s, band_frequency)).collect();
        let mut z = Complex::new(0.0, 0.0);
        for pair in phases.windows(2) {
            z += Complex::from_polar(1.0, pair[1] - pair[0]);
        }
        let advance = z.arg().rem_euclid(std::f64::consts::TAU);
        let period = 1.0 / flash_freq;
        let seconds =
            (advance / (std::f64::consts::TAU * flash_freq) - height as f64 * line_delay)
                .rem_euclid(period);
        Some(FrameDelayEstimate {
            seconds,
            modulo: period,
        })
    } else {
        None
    };

    Ok(LineRateCalibration {
        rows_per_second,
        line_delay,
        band_frequency,
        peak_snr_db,
        frame_delay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shutter::{complete_timing, ShutterMode, TimingSpec};
    use crate::sim::{synthesize_flash_frames, FlashIlluminant, FlashWaveform, RenderOptions};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn flash_sequence(tr: f64, tf: f64, height: u32, flash_hz: f64, count: u32) -> Vec<Frame> {
        let timing = complete_timing(&TimingSpec {
            te: Some(0.0),
            tr: Some(tr),
            tf: Some(tf),
            fps: None,
            height,
            mode: ShutterMode::Rolling,
        })
        .unwrap();
        let flash = FlashIlluminant {
            freq_hz: flash_hz,
            waveform: FlashWaveform::Sine,
        };
        synthesize_flash_frames(&timing, 0.0, &flash, count, 4, &RenderOptions::default()).unwrap()
    }

    #[test]
    fn recovers_line_rate_within_one_percent() {
        // Closed loop against the synthesizer: t_r = 2e-5 s, flash 200 Hz.
        let tr = 2e-5;
        let frames = flash_sequence(tr, 1e-3, 4800, 200.0, 1);
        let cal = calibrate_line_rate(&frames, 200.0).unwrap();
        let rel = (cal.line_delay - tr).abs() / tr;
        assert!(rel < 0.01, "t_r relative error {rel}");
        assert!((cal.rows_per_second - 1.0 / tr).abs() / (1.0 / tr) < 0.01);
        assert!(cal.peak_snr_db >= BAND_SNR_DB);
    }

    #[test]
    fn constant_illumination_has_no_dominant_band() {
        let mut frame = Frame::new(4, 512);
        for y in 0..512 {
            frame.set_row(y, &[0.5; 4]);
        }
        assert!(matches!(
            calibrate_line_rate(&[frame], 200.0),
            Err(NumericsError::NoDominantBand { .. })
        ));
    }

    #[test]
    fn recovers_frame_delay_within_five_percent() {
        // tf = 1e-3 s, below the 5 ms flash period, from two frames.
        let (tr, tf) = (2e-5, 1e-3);
        let frames = flash_sequence(tr, tf, 4800, 200.0, 2);
        let cal = calibrate_line_rate(&frames, 200.0).unwrap();
        let est = cal.frame_delay.expect("two frames give a tf estimate");
        assert_eq!(est.modulo, 1.0 / 200.0);
        let rel = (est.seconds - tf).abs() / tf;
        assert!(rel < 0.05, "t_f relative error {rel} (got {})", est.seconds);
    }

    #[test]
    fn single_frame_gives_no_frame_delay() {
        let frames = flash_sequence(2e-5, 1e-3, 4800, 200.0, 1);
        let cal = calibrate_line_rate(&frames, 200.0).unwrap();
        assert!(cal.frame_delay.is_none());
    }

    #[test]
    fn taller_images_reduce_estimate_variance() {
        // With fixed noise, the spread of the band-frequency estimate must
        // shrink monotonically as the image height doubles.
        let tr = 2e-5;
        let flash_hz = 200.0;
        let f_true = flash_hz * tr;
        let mut variances = Vec::new();
        for height in [1200u32, 2400, 4800] {
            let base = &flash_sequence(tr, 1e-3, height, flash_hz, 1)[0];
            let mut estimates = Vec::new();
            for seed in 0..24u64 {
                let mut rng = StdRng::seed_from_u64(seed);
                let mut noisy = Frame::new(base.width(), base.height());
                for y in 0..base.height() {
                    let noise: Vec<f64> = base
                        .row(y)
                        .iter()
                        .map(|&v| (v + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0))
                        .collect();
                    noisy.set_row(y, &noise);
                }
                let cal = calibrate_line_rate(&[noisy], flash_hz).unwrap();
                estimates.push(cal.band_frequency);
            }
            let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
            let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>()
                / estimates.len() as f64;
            assert!((mean - f_true).abs() / f_true < 0.01);
            variances.push(var);
        }
        assert!(
            variances[0] > variances[1] && variances[1] > variances[2],
            "variances not monotone: {variances:?}"
        );
    }

    #[test]
    fn rejects_empty_and_mismatched_input() {
        assert!(matches!(
            calibrate_line_rate(&[], 100.0),
            Err(NumericsError::InvalidInput { .. })
        ));
        let frames = vec![Frame::new(4, 64), Frame::new(4, 128)];
        assert!(matches!(
            calibrate_line_rate(&frames, 100.0),
            Err(NumericsError::InvalidInput { .. })
        ));
    }
}
