//! Radiance frames with per-row capture metadata, plus PNG / ASCII-PGM image
//! IO and the CSV row sidecar (row, exposure start, 12 pose numbers).

use crate::geometry::Pose;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),
    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad file format: {0}")]
    Format(String),
}

/// Per-row capture metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMeta {
    /// Exposure start time of this row, seconds.
    pub t_start: f64,
    /// Camera pose at the exposure start, when synthesized.
    pub pose: Option<Pose>,
}

impl Default for RowMeta {
    fn default() -> Self {
        Self {
            t_start: 0.0,
            pose: None,
        }
    }
}

/// Bit depth used when quantizing radiance to PNG.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PngDepth {
    Eight,
    Sixteen,
}

/// Grayscale radiance image in [0, 1], row-major, with per-row metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<f64>,
    rows: Vec<RowMeta>,
}

impl Frame {
    /// All-black frame with default row metadata.
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
            rows: vec![RowMeta::default(); height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: f64) {
        self.data[(y * self.width + x) as usize] = value;
    }

    pub fn row(&self, y: u32) -> &[f64] {
        let w = self.width as usize;
        &self.data[y as usize * w..(y as usize + 1) * w]
    }

    pub fn set_row(&mut self, y: u32, values: &[f64]) {
        let w = self.width as usize;
        self.data[y as usize * w..(y as usize + 1) * w].copy_from_slice(values);
    }

    pub fn row_meta(&self, y: u32) -> &RowMeta {
        &self.rows[y as usize]
    }

    pub fn rows_meta(&self) -> &[RowMeta] {
        &self.rows
    }

    pub fn set_row_meta(&mut self, y: u32, meta: RowMeta) {
        self.rows[y as usize] = meta;
    }

    /// Bilinear sample at continuous pixel coordinates (pixel centers at
    /// half-integers). Returns None when any of the four taps falls outside
    /// the image.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let gx = x - 0.5;
        let gy = y - 0.5;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as u32) < self.width && (y as u32) < self.height;
        if !inside(x0, y0) || !inside(x0 + 1, y0 + 1) {
            return None;
        }
        let v00 = self.get(x0 as u32, y0 as u32);
        let v10 = self.get(x0 as u32 + 1, y0 as u32);
        let v01 = self.get(x0 as u32, y0 as u32 + 1);
        let v11 = self.get(x0 as u32 + 1, y0 as u32 + 1);
        Some(
            v00 * (1.0 - fx) * (1.0 - fy)
                + v10 * fx * (1.0 - fy)
                + v01 * (1.0 - fx) * fy
                + v11 * fx * fy,
        )
    }

    /// Mean absolute difference over pixels where `mask` is true (all pixels
    /// when `mask` is None). Returns None when no pixel qualifies.
    pub fn mean_abs_error(&self, other: &Frame, mask: Option<&[bool]>) -> Option<f64> {
        assert_eq!(self.data.len(), other.data.len(), "frame sizes differ");
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.data.len() {
            if mask.map_or(true, |m| m[i]) {
                sum += (self.data[i] - other.data[i]).abs();
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    /// Peak signal-to-noise ratio in dB for unit peak signal;
    /// `f64::INFINITY` when the frames are identical.
    pub fn psnr_db(&self, other: &Frame, mask: Option<&[bool]>) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "frame sizes differ");
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.data.len() {
            if mask.map_or(true, |m| m[i]) {
                let d = self.data[i] - other.data[i];
                sum += d * d;
                count += 1;
            }
        }
        if count == 0 {
            return f64::NAN;
        }
        let mse = sum / count as f64;
        if mse == 0.0 {
            f64::INFINITY
        } else {
            -10.0 * mse.log10()
        }
    }

    /// Encode as grayscale PNG. `text` pairs become tEXt chunks (e.g. the
    /// config hash an artifact was produced from).
    pub fn png_bytes(&self, depth: PngDepth, text: &[(String, String)]) -> Result<Vec<u8>, FrameIoError> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(match depth {
                PngDepth::Eight => png::BitDepth::Eight,
                PngDepth::Sixteen => png::BitDepth::Sixteen,
            });
            for (k, v) in text {
                encoder
                    .add_text_chunk(k.clone(), v.clone())
                    .map_err(FrameIoError::PngEncode)?;
            }
            let mut writer = encoder.write_header()?;
            let bytes = match depth {
                PngDepth::Eight => self
                    .data
                    .iter()
                    .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                    .collect::<Vec<u8>>(),
                PngDepth::Sixteen => self
                    .data
                    .iter()
                    .flat_map(|&v| {
                        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
                        q.to_be_bytes()
                    })
                    .collect::<Vec<u8>>(),
            };
            writer.write_image_data(&bytes)?;
        }
        Ok(out)
    }

    pub fn write_png(
        &self,
        path: &Path,
        depth: PngDepth,
        text: &[(String, String)],
    ) -> Result<(), FrameIoError> {
        let bytes = self.png_bytes(depth, text)?;
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Decode a grayscale PNG (row metadata comes from the sidecar, not the
    /// image).
    pub fn read_png(path: &Path) -> Result<Self, FrameIoError> {
        let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
        let mut reader = decoder.read_info()?;
        let mut buf = vec![0u8; reader.output_buffer_size().expect("png buffer size")];
        let info = reader.next_frame(&mut buf)?;
        if info.color_type != png::ColorType::Grayscale {
            return Err(FrameIoError::Format(format!(
                "expected grayscale png, got {:?}",
                info.color_type
            )));
        }
        let (width, height) = (info.width, info.height);
        let n = (width * height) as usize;
        let data: Vec<f64> = match info.bit_depth {
            png::BitDepth::Eight => buf[..n].iter().map(|&b| b as f64 / 255.0).collect(),
            png::BitDepth::Sixteen => buf[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / 65535.0)
                .collect(),
            other => {
                return Err(FrameIoError::Format(format!(
                    "unsupported png bit depth {other:?}"
                )))
            }
        };
        Ok(Self {
            width,
            height,
            data,
            rows: vec![RowMeta::default(); height as usize],
        })
    }

    /// ASCII PGM (P2) with 16-bit quantization. Comment lines carry the
    /// supplied key/value pairs.
    pub fn pgm_string(&self, comments: &[(String, String)]) -> String {
        let mut s = String::from("P2\n");
        for (k, v) in comments {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&format!("{} {}\n65535\n", self.width, self.height));
        for y in 0..self.height {
            let row: Vec<String> = self
                .row(y)
                .iter()
                .map(|&v| ((v.clamp(0.0, 1.0) * 65535.0).round() as u32).to_string())
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write_pgm(&self, path: &Path, comments: &[(String, String)]) -> Result<(), FrameIoError> {
        std::fs::write(path, self.pgm_string(comments))?;
        Ok(())
    }

    pub fn read_pgm(path: &Path) -> Result<Self, FrameIoError> {
        let mut text = String::new();
        BufReader::new(File::open(path)?).read_to_string(&mut text)?;
        Self::parse_pgm(&text)
    }

    pub fn parse_pgm(text: &str) -> Result<Self, FrameIoError> {
        let mut tokens = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(|l| l.split_whitespace());
        let magic = tokens.next().ok_or_else(|| FrameIoError::Format("empty pgm".into()))?;
        if magic != "P2" {
            return Err(FrameIoError::Format(format!("expected P2 pgm, got {magic}")));
        }
        let mut next_u32 = |name: &str| -> Result<u32, FrameIoError> {
            tokens
                .next()
                .ok_or_else(|| FrameIoError::Format(format!("missing {name}")))?
                .parse::<u32>()
                .map_err(|e| FrameIoError::Format(format!("bad {name}: {e}")))
        };
        let width = next_u32("width")?;
        let height = next_u32("height")?;
        let maxval = next_u32("maxval")?;
        if maxval == 0 {
            return Err(FrameIoError::Format("maxval must be > 0".into()));
        }
        let mut data = Vec::with_capacity((width * height) as usize);
        for _ in 0..width * height {
            data.push(next_u32("pixel")? as f64 / maxval as f64);
        }
        Ok(Self {
            width,
            height,
            data,
            rows: vec![RowMeta::default(); height as usize],
        })
    }

    /// Write the per-row metadata sidecar: `row, t_start, r00..r22, t0..t2`.
    /// Leading comment lines carry the supplied key/value pairs.
    pub fn write_row_sidecar<W: Write>(
        &self,
        mut out: W,
        comments: &[(String, String)],
    ) -> Result<(), FrameIoError> {
        for (k, v) in comments {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string(), "t_start".to_string()];
        for name in ["r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "t0", "t1", "t2"] {
            header.push(name.to_string());
        }
        wtr.write_record(&header)?;
        for (y, meta) in self.rows.iter().enumerate() {
            let mut rec = vec![y.to_string(), format!("{:?}", meta.t_start)];
            let pose = meta.pose.clone().unwrap_or_else(Pose::identity);
            rec.extend(pose.to_row_major().iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_row_sidecar_file(
        &self,
        path: &Path,
        comments: &[(String, String)],
    ) -> Result<(), FrameIoError> {
        let file = BufWriter::new(File::create(path)?);
        self.write_row_sidecar(file, comments)
    }

    /// Read a sidecar produced by [`Frame::write_row_sidecar`]; returns the
    /// per-row metadata ordered by row index.
    pub fn read_row_sidecar<R: Read>(input: R) -> Result<Vec<RowMeta>, FrameIoError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut rows: Vec<(usize, RowMeta)> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() != 14 {
                return Err(FrameIoError::Format(format!(
                    "sidecar rows need 14 columns, got {}",
                    record.len()
                )));
            }
            let parse = |i: usize| -> Result<f64, FrameIoError> {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| FrameIoError::Format(format!("sidecar number: {e}")))
            };
            let row: usize = record[0]
                .trim()
                .parse()
                .map_err(|e| FrameIoError::Format(format!("sidecar row index: {e}")))?;
            let t_start = parse(1)?;
            let mut pose12 = [0.0; 12];
            for (j, slot) in pose12.iter_mut().enumerate() {
                *slot = parse(2 + j)?;
            }
            let pose = Pose::from_row_major(&pose12)
                .map_err(|e| FrameIoError::Format(format!("sidecar pose: {e}")))?;
            rows.push((
                row,
                RowMeta {
                    t_start,
                    pose: Some(pose),
                },
            ));
        }
        rows.sort_by_key(|(row, _)| *row);
        for (i, (row, _)) in rows.iter().enumerate() {
            if *row != i {
                return Err(FrameIoError::Format(format!(
                    "sidecar rows must be 0..H-1, found index {row} at position {i}"
                )));
            }
        }
        Ok(rows.into_iter().map(|(_, meta)| meta).collect())
    }

    pub fn read_row_sidecar_file(path: &Path) -> Result<Vec<RowMeta>, FrameIoError> {
        Self::read_row_sidecar(BufReader::new(File::open(path)?))
    }

    /// Attach sidecar metadata to this frame; the row count must match.
    pub fn attach_row_meta(&mut self, rows: Vec<RowMeta>) -> Result<(), FrameIoError> {
        if rows.len() != self.height as usize {
            return Err(FrameIoError::Format(format!(
                "sidecar has {} rows but frame height is {}",
                rows.len(),
                self.height
            )));
        }
        self.rows = rows;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_z, Vec3};
    use approx::assert_relative_eq;

    fn ramp_frame() -> Frame {
        let mut f = Frame::new(5, 4);
        for y in 0..4 {
            for x in 0..5 {
                f.set(x, y, (x + y * 5) as f64 / 19.0);
            }
            f.set_row_meta(
                y,
                RowMeta {
                    t_start: y as f64 * 1e-5,
                    pose: Some(Pose::new(rot_z(0.01 * y as f64), Vec3::new(y as f64, 0.0, 0.0)).unwrap()),
                },
            );
        }
        f
    }

    #[test]
    fn png_round_trip_16_bit() {
        let f = ramp_frame();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        f.write_png(&path, PngDepth::Sixteen, &[("config_hash".into(), "abc".into())])
            .unwrap();
        let g = Frame::read_png(&path).unwrap();
        assert_eq!(g.width(), 5);
        assert_eq!(g.height(), 4);
        for i in 0..f.data().len() {
            assert_relative_eq!(f.data()[i], g.data()[i], epsilon = 1.0 / 65535.0);
        }
    }

    #[test]
    fn png_encode_is_deterministic() {
        let f = ramp_frame();
        let a = f.png_bytes(PngDepth::Eight, &[]).unwrap();
        let b = f.png_bytes(PngDepth::Eight, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pgm_round_trip() {
        let f = ramp_frame();
        let text = f.pgm_string(&[("seed".into(), "7".into())]);
        assert!(text.starts_with("P2\n# seed: 7\n5 4\n65535\n"));
        let g = Frame::parse_pgm(&text).unwrap();
        for i in 0..f.data().len() {
            assert_relative_eq!(f.data()[i], g.data()[i], epsilon = 1.0 / 65535.0);
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let f = ramp_frame();
        let mut buf = Vec::new();
        f.write_row_sidecar(&mut buf, &[("config_hash".into(), "feed".into())])
            .unwrap();
        let rows = Frame::read_row_sidecar(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 4);
        for (y, meta) in rows.iter().enumerate() {
            assert_eq!(meta.t_start, f.row_meta(y as u32).t_start);
            assert_eq!(meta.pose, f.row_meta(y as u32).pose);
        }
    }

    #[test]
    fn attach_row_meta_requires_matching_height() {
        let mut f = Frame::new(3, 2);
        let err = f
            .attach_row_meta(vec![RowMeta::default(); 5])
            .unwrap_err();
        assert!(matches!(err, FrameIoError::Format(_)));
    }

    #[test]
    fn bilinear_sampling_is_exact_at_centers_and_none_outside() {
        let f = ramp_frame();
        assert_eq!(f.sample_bilinear(2.5, 1.5).unwrap(), f.get(2, 1));
        assert!(f.sample_bilinear(0.2, 1.0).is_none());
        assert!(f.sample_bilinear(4.9, 3.9).is_none());
        // Interior midpoint averages the four neighbors.
        let mid = f.sample_bilinear(2.0, 2.0).unwrap();
        let avg = (f.get(1, 1) + f.get(2, 1) + f.get(1, 2) + f.get(2, 2)) / 4.0;
        assert_relative_eq!(mid, avg, epsilon = 1e-12);
    }

    #[test]
    fn error_metrics() {
        let f = ramp_frame();
        assert_eq!(f.psnr_db(&f, None), f64::INFINITY);
        assert_eq!(f.mean_abs_error(&f, None), Some(0.0));
        let mut g = f.clone();
        g.set(0, 0, f.get(0, 0) + 0.19);
        let n = f.data().len() as f64;
        assert_relative_eq!(f.mean_abs_error(&g, None).unwrap(), 0.19 / n, epsilon = 1e-12);
        let mut mask = vec![false; f.data().len()];
        mask[0] = true;
        assert_relative_eq!(f.mean_abs_error(&g, Some(&mask)).unwrap(), 0.19, epsilon = 1e-12);
    }
}
