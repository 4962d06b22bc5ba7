//! Noise-frame removal between two dubbed variants.
//!
//! Every frame of a source stream is searched for in a bounded window of
//! the target stream using mean structural similarity. Frames with no
//! sufficiently similar counterpart (commercials, bumpers) are removed and
//! the surviving frames are compacted onto a new timeline.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::model::TrackId;

/// SSIM window side length.
pub const WINDOW: usize = 7;
/// Smallest frame side accepted by [`ssim`].
pub const MIN_SIDE: usize = 8;
pub const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

const WINDOW_AREA: f64 = (WINDOW * WINDOW) as f64;
// Unbiased window variance.
const COV_NORM: f64 = WINDOW_AREA / (WINDOW_AREA - 1.0);

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("frame {0}x{1} is smaller than the {MIN_SIDE}x{MIN_SIDE} minimum")]
    TooSmall(usize, usize),
    #[error("pixel buffer has {got} bytes, expected {expected}")]
    PixelCount { expected: usize, got: usize },
    #[error("frame rates differ: {0} vs {1} fps")]
    FpsMismatch(u32, u32),
    #[error("frame stream for {0} is empty")]
    Empty(TrackId),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FrameError + '_ {
    move |source| FrameError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl FrameImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FrameError> {
        if pixels.len() != width * height {
            return Err(FrameError::PixelCount {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Converts interleaved RGB with luma weights 0.299, 0.587, 0.114.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self, FrameError> {
        if rgb.len() != width * height * 3 {
            return Err(FrameError::PixelCount {
                expected: width * height * 3,
                got: rgb.len(),
            });
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| {
                let y = 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Loads a `.y8` blob or any PNG (color PNGs are converted to luma).
    pub fn load(path: &Path) -> Result<Self, FrameError> {
        let is_y8 = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("y8"))
            .unwrap_or(false);
        if is_y8 {
            let bytes = std::fs::read(path).map_err(io_err(path))?;
            return Self::decode_y8(&bytes).map_err(|reason| FrameError::Decode {
                path: path.to_owned(),
                reason,
            });
        }
        let img = image::open(path).map_err(|e| FrameError::Decode {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            image::DynamicImage::ImageLuma8(gray) => Self::new(w, h, gray.into_raw()),
            other => Self::from_rgb(w, h, other.to_rgb8().as_raw()),
        }
    }

    /// `.y8` layout: width (u32 LE), height (u32 LE), then width*height bytes.
    pub fn encode_y8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.pixels.len());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode_y8(bytes: &[u8]) -> Result<Self, String> {
        if bytes.len() < 8 {
            return Err("truncated y8 header".into());
        }
        let w = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        Self::new(w, h, bytes[8..].to_vec()).map_err(|e| e.to_string())
    }

    pub fn save(&self, path: &Path) -> Result<(), FrameError> {
        let is_png = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("png"))
            .unwrap_or(false);
        if is_png {
            let buf = image::GrayImage::from_raw(
                self.width as u32,
                self.height as u32,
                self.pixels.clone(),
            )
            .expect("pixel count checked at construction");
            buf.save(path).map_err(|e| FrameError::Decode {
                path: path.to_owned(),
                reason: e.to_string(),
            })
        } else {
            std::fs::write(path, self.encode_y8()).map_err(io_err(path))
        }
    }
}

/// A frame with its per-window luminance statistics precomputed, so that
/// comparing it against many others only costs the cross term.
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

/// Summed-area table with a zero first row and column.
fn integral<F: Fn(usize) -> u64>(width: usize, height: usize, value: F) -> Vec<u64> {
    let stride = width + 1;
    let mut table = vec![0u64; stride * (height + 1)];
    for y in 0..height {
        let mut row = 0u64;
        for x in 0..width {
            row += value(y * width + x);
            table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
        }
    }
    table
}

#[inline]
fn window_sum(table: &[u64], stride: usize, x: usize, y: usize) -> u64 {
    let (x1, y1) = (x + WINDOW, y + WINDOW);
    table[y1 * stride + x1] + table[y * stride + x]
        - table[y * stride + x1]
        - table[y1 * stride + x]
}

impl PreparedFrame {
    pub fn new(frame: &FrameImage) -> Result<Self, FrameError> {
        let (w, h) = (frame.width, frame.height);
        if w < MIN_SIDE || h < MIN_SIDE {
            return Err(FrameError::TooSmall(w, h));
        }
        let px = &frame.pixels;
        let sum = integral(w, h, |i| px[i] as u64);
        let sq = integral(w, h, |i| (px[i] as u64) * (px[i] as u64));
        let stride = w + 1;
        let (nx, ny) = (w - WINDOW + 1, h - WINDOW + 1);
        let mut means = Vec::with_capacity(nx * ny);
        let mut variances = Vec::with_capacity(nx * ny);
        for y in 0..ny {
            for x in 0..nx {
                let mean = window_sum(&sum, stride, x, y) as f64 / WINDOW_AREA;
                let mean_sq = window_sum(&sq, stride, x, y) as f64 / WINDOW_AREA;
                means.push(mean);
                variances.push(COV_NORM * (mean_sq - mean * mean));
            }
        }
        Ok(Self {
            width: w,
            height: h,
            pixels: px.clone(),
            means,
            variances,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Mean SSIM against `other`.
    pub fn ssim(&self, other: &PreparedFrame) -> Result<f64, FrameError> {
        if self.dims() != other.dims() {
            return Err(FrameError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        let (w, h) = self.dims();
        let (a, b) = (&self.pixels, &other.pixels);
        let cross = integral(w, h, |i| (a[i] as u64) * (b[i] as u64));
        let stride = w + 1;
        let nx = w - WINDOW + 1;
        let ny = h - WINDOW + 1;
        let mut total = 0.0;
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                let (ma, mb) = (self.means[i], other.means[i]);
                let (va, vb) = (self.variances[i], other.variances[i]);
                let mean_ab = window_sum(&cross, stride, x, y) as f64 / WINDOW_AREA;
                let cov = COV_NORM * (mean_ab - ma * mb);
                let num = (2.0 * ma * mb + C1) * (2.0 * cov + C2);
                let den = (ma * ma + mb * mb + C1) * (va + vb + C2);
                total += num / den;
            }
        }
        Ok((total / (nx * ny) as f64).clamp(-1.0, 1.0))
    }
}

/// Mean structural similarity over all 7x7 windows of two equally sized
/// grayscale frames, with stabilizers for an 8-bit data range.
pub fn ssim(a: &FrameImage, b: &FrameImage) -> Result<f64, FrameError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(FrameError::DimensionMismatch(
            a.width, a.height, b.width, b.height,
        ));
    }
    PreparedFrame::new(a)?.ssim(&PreparedFrame::new(b)?)
}

/// On-disk frame listing: header `fps=<int>`, then `<index>\t<path>` lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameManifest {
    pub track: TrackId,
    pub fps: u32,
    pub entries: Vec<(usize, PathBuf)>,
}

fn parse_fps_header(path: &Path, line: Option<&str>) -> Result<u32, FrameError> {
    let bad = |reason: String| FrameError::Parse {
        path: path.to_owned(),
        line: 1,
        reason,
    };
    let header = line.ok_or_else(|| bad("missing 'fps=<int>' header".into()))?;
    let value = header
        .trim()
        .strip_prefix("fps=")
        .ok_or_else(|| bad(format!("expected 'fps=<int>', got '{header}'")))?;
    let fps: u32 = value
        .parse()
        .map_err(|_| bad(format!("bad fps value '{value}'")))?;
    if fps == 0 {
        return Err(bad("fps must be > 0".into()));
    }
    Ok(fps)
}

impl FrameManifest {
    /// Reads a manifest; relative image paths resolve against its directory.
    pub fn read(path: &Path, track: TrackId) -> Result<Self, FrameError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut lines = text.lines();
        let fps = parse_fps_header(path, lines.next())?;
        let mut entries = Vec::new();
        for (i, raw) in lines.enumerate() {
            let line = i + 2;
            if raw.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| FrameError::Parse {
                path: path.to_owned(),
                line,
                reason,
            };
            let (idx, file) = raw
                .split_once('\t')
                .ok_or_else(|| bad("expected '<index>\\t<path>'".into()))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad frame index '{idx}'")))?;
            if idx != entries.len() {
                return Err(bad(format!(
                    "frame index {idx} breaks the gap-free sequence (expected {})",
                    entries.len()
                )));
            }
            let file = Path::new(file.trim());
            let resolved = if file.is_absolute() {
                file.to_owned()
            } else {
                base.join(file)
            };
            entries.push((idx, resolved));
        }
        Ok(Self {
            track,
            fps,
            entries,
        })
    }

    /// Writes the manifest, storing paths relative to `path`'s directory when possible.
    pub fn write(&self, path: &Path) -> Result<(), FrameError> {
        let base = path.parent().unwrap_or(Path::new("."));
        let mut out = format!("fps={}\n", self.fps);
        for (idx, file) in &self.entries {
            let shown = file.strip_prefix(base).unwrap_or(file);
            let _ = writeln!(out, "{idx}\t{}", shown.display());
        }
        std::fs::write(path, out).map_err(io_err(path))
    }
}

/// Frames of one track, loaded and prepared for repeated comparison.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub track: TrackId,
    pub fps: u32,
    pub frames: Vec<PreparedFrame>,
}

impl FrameSequence {
    pub fn from_images(
        track: TrackId,
        fps: u32,
        images: &[FrameImage],
    ) -> Result<Self, FrameError> {
        let frames = images
            .par_iter()
            .map(PreparedFrame::new)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { track, fps, frames })
    }

    pub fn load(manifest: &FrameManifest) -> Result<Self, FrameError> {
        let frames = manifest
            .entries
            .par_iter()
            .map(|(_, path)| PreparedFrame::new(&FrameImage::load(path)?))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            track: manifest.track.clone(),
            fps: manifest.fps,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-frame keep/remove verdicts plus the compacted timeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalMask {
    pub track: TrackId,
    pub fps: u32,
    pub keep: Vec<bool>,
    /// New timeline position (ms) of each kept frame; `None` for removed ones.
    pub compaction: Vec<Option<u64>>,
}

impl RemovalMask {
    pub fn from_keep(track: TrackId, fps: u32, keep: Vec<bool>) -> Self {
        let fps64 = fps as u64;
        let mut kept = 0u64;
        let compaction = keep
            .iter()
            .map(|&k| {
                k.then(|| {
                    let ms = (kept * 1000 + fps64 / 2) / fps64;
                    kept += 1;
                    ms
                })
            })
            .collect();
        Self {
            track,
            fps,
            keep,
            compaction,
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    pub fn removed_count(&self) -> usize {
        self.len() - self.kept_count()
    }

    pub fn original_duration_s(&self) -> f64 {
        self.len() as f64 / self.fps as f64
    }

    pub fn compacted_duration_s(&self) -> f64 {
        self.kept_count() as f64 / self.fps as f64
    }

    /// `fps=<int>` header, then `<index>\t<keep:0|1>\t<new_ms|->` per frame.
    pub fn to_text(&self) -> String {
        let mut out = format!("fps={}\n", self.fps);
        for (i, (k, ms)) in self.keep.iter().zip(&self.compaction).enumerate() {
            let ms = ms.map_or_else(|| "-".to_owned(), |m| m.to_string());
            let _ = writeln!(out, "{i}\t{}\t{ms}", u8::from(*k));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), FrameError> {
        let mut f = std::fs::File::create(path).map_err(io_err(path))?;
        f.write_all(self.to_text().as_bytes()).map_err(io_err(path))
    }

    pub fn read(path: &Path, track: TrackId) -> Result<Self, FrameError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut lines = text.lines();
        let fps = parse_fps_header(path, lines.next())?;
        let mut keep = Vec::new();
        let mut compaction = Vec::new();
        for (i, raw) in lines.enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let bad = |reason: &str| FrameError::Parse {
                path: path.to_owned(),
                line: i + 2,
                reason: reason.to_owned(),
            };
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected 3 tab-separated columns"));
            }
            if cols[0].parse::<usize>().ok() != Some(keep.len()) {
                return Err(bad("frame indices must be gap-free from 0"));
            }
            let k = match cols[1] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("keep flag must be 0 or 1")),
            };
            let ms = match (k, cols[2]) {
                (false, "-") => None,
                (true, v) => Some(v.parse::<u64>().map_err(|_| bad("bad new_ms"))?),
                _ => return Err(bad("removed frames must have '-' as new_ms")),
            };
            keep.push(k);
            compaction.push(ms);
        }
        let mask = Self::from_keep(track, fps, keep);
        if mask.compaction != compaction {
            return Err(FrameError::Parse {
                path: path.to_owned(),
                line: 1,
                reason: "compaction column is inconsistent with the keep flags".into(),
            });
        }
        Ok(mask)
    }
}

/// First index in `range` of a target frame at least `threshold` similar to
/// `frame`; ties resolve to the lowest index regardless of worker count.
fn first_match(
    frame: &PreparedFrame,
    target: &[PreparedFrame],
    range: std::ops::Range<usize>,
    threshold: f64,
    parallel: bool,
) -> Result<Option<usize>, FrameError> {
    const SEQUENTIAL_PREFIX: usize = 8;
    let split = (range.start + SEQUENTIAL_PREFIX).min(range.end);
    let sequential_end = if parallel { split } else { range.end };
    for (j, candidate) in target
        .iter()
        .enumerate()
        .take(sequential_end)
        .skip(range.start)
    {
        if frame.ssim(candidate)? >= threshold {
            return Ok(Some(j));
        }
    }
    if !parallel {
        return Ok(None);
    }
    // Errors can only be dimension mismatches; treat as a non-match here and
    // surface them through the sequential prefix or the caller's check.
    Ok((split..range.end)
        .into_par_iter()
        .with_min_len(4)
        .position_first(|j| frame.ssim(&target[j]).is_ok_and(|s| s >= threshold))
        .map(|p| split + p))
}

/// One directed pass: decides for every frame of `source` whether it has a
/// counterpart in `target`.
pub fn frame_pass(
    source: &FrameSequence,
    target: &FrameSequence,
    cfg: &PipelineConfig,
) -> Result<RemovalMask, FrameError> {
    if source.fps != target.fps {
        return Err(FrameError::FpsMismatch(source.fps, target.fps));
    }
    if source.is_empty() {
        return Err(FrameError::Empty(source.track.clone()));
    }
    if target.is_empty() {
        return Err(FrameError::Empty(target.track.clone()));
    }
    let (sw, sh) = source.frames[0].dims();
    let (tw, th) = target.frames[0].dims();
    if (sw, sh) != (tw, th) {
        return Err(FrameError::DimensionMismatch(sw, sh, tw, th));
    }

    let n = source.len();
    let m = target.len();
    let window = cfg.search_window_frames;
    let stride = cfg.frame_stride.max(1);
    let threshold = cfg.ssim_threshold;
    let probes: Vec<usize> = (0..n).step_by(stride).collect();

    let verdicts: Vec<bool> = if cfg.drift_compensation {
        let mut anchor = 0usize;
        let mut out = Vec::with_capacity(probes.len());
        for &t in &probes {
            let end = (anchor + window).min(m);
            match first_match(
                &source.frames[t],
                &target.frames,
                anchor..end,
                threshold,
                true,
            )? {
                Some(j) => {
                    anchor = j;
                    out.push(true);
                }
                None => out.push(false),
            }
        }
        out
    } else {
        probes
            .par_iter()
            .map(|&t| {
                let start = t.min(m);
                let end = (t + window).min(m);
                first_match(
                    &source.frames[t],
                    &target.frames,
                    start..end,
                    threshold,
                    false,
                )
                .map(|hit| hit.is_some())
            })
            .collect::<Result<_, _>>()?
    };

    let keep = (0..n).map(|i| verdicts[i / stride]).collect();
    Ok(RemovalMask::from_keep(
        source.track.clone(),
        source.fps,
        keep,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub d1: RemovalMask,
    pub d2: RemovalMask,
}

impl CleanReport {
    pub fn summary(&self) -> String {
        let line = |m: &RemovalMask| {
            format!(
                "{}: {} frames ({:.3} s) -> {} kept ({:.3} s), {} removed",
                m.track,
                m.len(),
                m.original_duration_s(),
                m.kept_count(),
                m.compacted_duration_s(),
                m.removed_count()
            )
        };
        format!("{}\n{}", line(&self.d1), line(&self.d2))
    }
}

/// Runs the pass in both directions.
pub fn clean_pair(
    d1: &FrameSequence,
    d2: &FrameSequence,
    cfg: &PipelineConfig,
) -> Result<CleanReport, FrameError> {
    let (a, b) = rayon::join(|| frame_pass(d1, d2, cfg), || frame_pass(d2, d1, cfg));
    Ok(CleanReport { d1: a?, d2: b? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct per-window evaluation with no shared sums or precomputation.
    fn naive_ssim(a: &FrameImage, b: &FrameImage) -> f64 {
        let (w, h) = (a.width(), a.height());
        let n = (WINDOW * WINDOW) as f64;
        let mut acc = 0.0;
        let mut count = 0usize;
        for y in 0..=h - WINDOW {
            for x in 0..=w - WINDOW {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for dy in 0..WINDOW {
                    for dx in 0..WINDOW {
                        xs.push(a.pixels()[(y + dy) * w + x + dx] as f64);
                        ys.push(b.pixels()[(y + dy) * w + x + dx] as f64);
                    }
                }
                let mx = xs.iter().sum::<f64>() / n;
                let my = ys.iter().sum::<f64>() / n;
                let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0);
                let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
                let cxy = xs
                    .iter()
                    .zip(&ys)
                    .map(|(p, q)| (p - mx) * (q - my))
                    .sum::<f64>()
                    / (n - 1.0);
                acc += ((2.0 * mx * my + C1) * (2.0 * cxy + C2))
                    / ((mx * mx + my * my + C1) * (vx + vy + C2));
                count += 1;
            }
        }
        acc / count as f64
    }

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> FrameImage {
        FrameImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
    }

    #[test]
    fn identical_images_score_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 20, 13);
        assert_eq!(ssim(&img, &img).unwrap(), 1.0);
    }

    #[test]
    fn constant_black_vs_white_has_closed_form_value() {
        let black = FrameImage::new(16, 16, vec![0; 256]).unwrap();
        let white = FrameImage::new(16, 16, vec![255; 256]).unwrap();
        let expected = C1 / (255.0 * 255.0 + C1);
        let got = ssim(&black, &white).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 1.0e-4).abs() < 1e-6);
        assert!((naive_ssim(&black, &white) - expected).abs() < 1e-12);
    }

    #[test]
    fn matches_naive_reference_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_image(&mut rng, 64, 64);
            let mut b = a.clone();
            for p in b.pixels.iter_mut() {
                *p = p.saturating_add(rng.gen_range(0..40));
            }
            let fast = ssim(&a, &b).unwrap();
            let slow = naive_ssim(&a, &b);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
            assert_eq!(fast, ssim(&b, &a).unwrap());
        }
    }

    #[test]
    fn rejects_mismatched_or_tiny_frames() {
        let a = FrameImage::new(8, 8, vec![0; 64]).unwrap();
        let b = FrameImage::new(9, 8, vec![0; 72]).unwrap();
        assert!(matches!(
            ssim(&a, &b),
            Err(FrameError::DimensionMismatch(..))
        ));
        let tiny = FrameImage::new(7, 7, vec![0; 49]).unwrap();
        assert!(matches!(
            ssim(&tiny, &tiny),
            Err(FrameError::TooSmall(7, 7))
        ));
        assert!(FrameImage::new(8, 8, vec![0; 10]).is_err());
    }

    #[test]
    fn rgb_conversion_uses_luma_weights() {
        let img = FrameImage::from_rgb(1, 1, &[255, 0, 0]).unwrap();
        assert_eq!(img.pixels(), &[76]);
    }

    fn seq(track: TrackId, images: &[FrameImage]) -> FrameSequence {
        FrameSequence::from_images(track, 30, images).unwrap()
    }

    #[test]
    fn identical_streams_keep_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frames: Vec<_> = (0..40).map(|_| random_image(&mut rng, 16, 16)).collect();
        let a = seq(TrackId::d1(), &frames);
        let b = seq(TrackId::d2(), &frames);
        for drift in [true, false] {
            let cfg = PipelineConfig {
                drift_compensation: drift,
                ..PipelineConfig::default()
            };
            let report = clean_pair(&a, &b, &cfg).unwrap();
            assert_eq!(report.d1.kept_count(), 40);
            assert_eq!(report.d2.kept_count(), 40);
            let expected: Vec<_> = (0..40u64).map(|k| Some((k * 1000 + 15) / 30)).collect();
            assert_eq!(report.d1.compaction, expected);
        }
    }

    #[test]
    fn unrelated_streams_remove_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Vec<_> = (0..10).map(|_| random_image(&mut rng, 16, 16)).collect();
        let b: Vec<_> = (0..10).map(|_| random_image(&mut rng, 16, 16)).collect();
        let mask = frame_pass(
            &seq(TrackId::d1(), &a),
            &seq(TrackId::d2(), &b),
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(mask.kept_count(), 0);
        assert!(mask.compaction.iter().all(Option::is_none));
    }

    #[test]
    fn match_at_last_window_slot_keeps_the_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let needle = random_image(&mut rng, 16, 16);
        let mut target: Vec<_> = (0..4).map(|_| random_image(&mut rng, 16, 16)).collect();
        target.push(needle.clone());
        let cfg = PipelineConfig {
            search_window_frames: 5,
            drift_compensation: false,
            ..PipelineConfig::default()
        };
        let mask = frame_pass(
            &seq(TrackId::d1(), std::slice::from_ref(&needle)),
            &seq(TrackId::d2(), &target),
            &cfg,
        )
        .unwrap();
        assert_eq!(mask.keep, vec![true]);
        let narrow = PipelineConfig {
            search_window_frames: 4,
            ..cfg
        };
        let mask = frame_pass(
            &seq(TrackId::d1(), &[needle]),
            &seq(TrackId::d2(), &target),
            &narrow,
        )
        .unwrap();
        assert_eq!(mask.keep, vec![false]);
    }

    #[test]
    fn stride_propagates_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let frames: Vec<_> = (0..9).map(|_| random_image(&mut rng, 16, 16)).collect();
        let mut other = frames.clone();
        other[3] = random_image(&mut rng, 16, 16);
        let cfg = PipelineConfig {
            frame_stride: 3,
            drift_compensation: false,
            ..PipelineConfig::default()
        };
        let mask = frame_pass(
            &seq(TrackId::d1(), &other),
            &seq(TrackId::d2(), &frames),
            &cfg,
        )
        .unwrap();
        assert_eq!(
            mask.keep,
            vec![true, true, true, false, false, false, true, true, true]
        );
    }

    #[test]
    fn fps_mismatch_and_empty_are_errors() {
        let img = FrameImage::new(8, 8, vec![9; 64]).unwrap();
        let a = FrameSequence::from_images(TrackId::d1(), 30, std::slice::from_ref(&img)).unwrap();
        let b = FrameSequence::from_images(TrackId::d2(), 25, &[img]).unwrap();
        let cfg = PipelineConfig::default();
        assert!(matches!(
            frame_pass(&a, &b, &cfg),
            Err(FrameError::FpsMismatch(30, 25))
        ));
        let empty = FrameSequence::from_images(TrackId::d2(), 30, &[]).unwrap();
        assert!(matches!(
            frame_pass(&a, &empty, &cfg),
            Err(FrameError::Empty(_))
        ));
    }

    #[test]
    fn mask_and_manifest_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = RemovalMask::from_keep(TrackId::d2(), 30, vec![true, false, true, true]);
        let path = dir.path().join("d2.mask");
        mask.write(&path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "fps=30\n0\t1\t0\n1\t0\t-\n2\t1\t33\n3\t1\t67\n"
        );
        assert_eq!(RemovalMask::read(&path, TrackId::d2()).unwrap(), mask);

        let img = FrameImage::new(8, 8, (0..64).collect()).unwrap();
        let y8 = dir.path().join("f0.y8");
        let png = dir.path().join("f1.png");
        img.save(&y8).unwrap();
        img.save(&png).unwrap();
        assert_eq!(FrameImage::load(&y8).unwrap(), img);
        assert_eq!(FrameImage::load(&png).unwrap(), img);

        let manifest = FrameManifest {
            track: TrackId::d1(),
            fps: 30,
            entries: vec![(0, y8), (1, png)],
        };
        let mpath = dir.path().join("frames.txt");
        manifest.write(&mpath).unwrap();
        assert_eq!(
            std::fs::read_to_string(&mpath).unwrap(),
            "fps=30\n0\tf0.y8\n1\tf1.png\n"
        );
        assert_eq!(
            FrameManifest::read(&mpath, TrackId::d1()).unwrap(),
            manifest
        );
    }

    #[test]
    fn manifest_with_gap_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        std::fs::write(&p, "fps=30\n0\ta.y8\n2\tb.y8\n").unwrap();
        assert!(matches!(
            FrameManifest::read(&p, TrackId::d1()),
            Err(FrameError::Parse { line: 3, .. })
        ));
    }
}
