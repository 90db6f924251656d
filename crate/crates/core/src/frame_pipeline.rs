//! Frame quality gating and batching.
//!
//! Frames arrive at the camera rate, blurry frames are dropped by Laplacian
//! variance, near-duplicates by global SSIM against the last kept frame, and
//! the survivors of every `batch_size` raw frames form one [`FrameBatch`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("image is {width}x{height}; at least 3x3 is required")]
    TooSmall { width: usize, height: usize },
    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("pixel buffer length {len} does not match {width}x{height}")]
    BadBuffer { width: usize, height: usize, len: usize },
    #[error("frame {frame_id} is not after frame {last}")]
    OutOfOrderFrame { frame_id: u64, last: u64 },
    #[error("invalid config: {0}")]
    InvalidConfig(&'static str),
}

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::EmptyImage);
        }
        if data.len() != width * height {
            return Err(FrameError::BadBuffer {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, FrameError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, FrameError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let data: Vec<u8> = rows.iter().flatten().copied().collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<[u8; 3]>) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::EmptyImage);
        }
        if data.len() != width * height {
            return Err(FrameError::BadBuffer {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, FrameError> {
        Self::new(width, height, vec![rgb; width * height])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pixels {
    Gray(GrayImage),
    Rgb(RgbImage),
}

/// ITU-R BT.601 luma, rounded half up. Grayscale input is returned unchanged.
pub fn to_grayscale(pixels: &Pixels) -> Result<GrayImage, FrameError> {
    match pixels {
        Pixels::Gray(g) => {
            if g.data.is_empty() {
                return Err(FrameError::EmptyImage);
            }
            Ok(g.clone())
        }
        Pixels::Rgb(rgb) => {
            if rgb.data.is_empty() {
                return Err(FrameError::EmptyImage);
            }
            // integer form of round(0.299 R + 0.587 G + 0.114 B)
            let data = rgb
                .data
                .iter()
                .map(|&[r, g, b]| ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8)
                .collect();
            GrayImage::new(rgb.width, rgb.height, data)
        }
    }
}

/// Population variance of the 4-neighbour Laplacian over interior pixels.
pub fn laplacian_variance(gray: &GrayImage) -> Result<f64, FrameError> {
    let (w, h) = gray.dims();
    if w < 3 || h < 3 {
        return Err(FrameError::TooSmall { width: w, height: h });
    }
    let px = |x: usize, y: usize| gray.get(x, y) as i32;
    let mut responses = Vec::with_capacity((w - 2) * (h - 2));
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let r = px(x, y - 1) + px(x - 1, y) + px(x + 1, y) + px(x, y + 1) - 4 * px(x, y);
            responses.push(r as f64);
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    Ok(responses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SsimWindow {
    /// One window covering the whole image.
    #[default]
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub sharpness_min: f64,
    pub ssim_drop_threshold: f64,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
    pub ssim_window: SsimWindow,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            sharpness_min: 25.0,
            ssim_drop_threshold: 0.95,
            ssim_c1: (0.01f64 * 255.0).powi(2),
            ssim_c2: (0.03f64 * 255.0).powi(2),
            ssim_window: SsimWindow::Global,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FrameError> {
        if !(self.ssim_drop_threshold > 0.0 && self.ssim_drop_threshold <= 1.0) {
            return Err(FrameError::InvalidConfig("ssim_drop_threshold must be in (0, 1]"));
        }
        if self.sharpness_min.is_nan() || self.sharpness_min < 0.0 {
            return Err(FrameError::InvalidConfig("sharpness_min must be >= 0"));
        }
        if !(self.ssim_c1 >= 0.0 && self.ssim_c2 >= 0.0) {
            return Err(FrameError::InvalidConfig("ssim constants must be >= 0"));
        }
        Ok(())
    }
}

/// Single-window structural similarity.
pub fn ssim(a: &GrayImage, b: &GrayImage, cfg: &FilterConfig) -> Result<f64, FrameError> {
    if a.dims() != b.dims() {
        return Err(FrameError::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    if a.data.is_empty() {
        return Err(FrameError::EmptyImage);
    }
    let n = a.data.len() as f64;
    let mean = |img: &GrayImage| img.data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mu_a, mu_b) = (mean(a), mean(b));
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        let dx = x as f64 - mu_a;
        let dy = y as f64 - mu_b;
        var_a += dx * dx;
        var_b += dy * dy;
        cov += dx * dy;
    }
    var_a /= n;
    var_b /= n;
    cov /= n;
    let (c1, c2) = (cfg.ssim_c1, cfg.ssim_c2);
    Ok(((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSample {
    pub frame_id: u64,
    pub ts_ms: u64,
    pub pixels: GrayImage,
}

impl FrameSample {
    pub fn new(frame_id: u64, ts_ms: u64, pixels: &Pixels) -> Result<Self, FrameError> {
        Ok(Self {
            frame_id,
            ts_ms,
            pixels: to_grayscale(pixels)?,
        })
    }

    pub fn gray(frame_id: u64, ts_ms: u64, pixels: GrayImage) -> Self {
        Self {
            frame_id,
            ts_ms,
            pixels,
        }
    }
}

/// Indices of the frames that survive both passes, in input order.
///
/// Pass one drops frames below `sharpness_min`; pass two walks the survivors
/// and drops any frame whose SSIM with the last kept frame reaches the threshold.
pub fn filter_batch(frames: &[FrameSample], cfg: &FilterConfig) -> Result<Vec<usize>, FrameError> {
    let mut sharp = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        if laplacian_variance(&f.pixels)? >= cfg.sharpness_min {
            sharp.push(i);
        }
    }
    let mut kept: Vec<usize> = Vec::with_capacity(sharp.len());
    for i in sharp {
        let keep = match kept.last() {
            None => true,
            Some(&last) => ssim(&frames[last].pixels, &frames[i].pixels, cfg)? < cfg.ssim_drop_threshold,
        };
        if keep {
            kept.push(i);
        }
    }
    Ok(kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fps: f64,
    /// Diagonal field of view; metadata only.
    pub dfov_deg: f64,
    /// Metadata only.
    pub resolution: (u32, u32),
    pub batch_size: usize,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            fps: 5.0,
            dfov_deg: 78.0,
            resolution: (1920, 1080),
            batch_size: 10,
        }
    }
}

impl CameraConfig {
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.fps.is_nan() || self.fps <= 0.0 {
            return Err(FrameError::InvalidConfig("fps must be positive"));
        }
        if self.batch_size == 0 {
            return Err(FrameError::InvalidConfig("batch_size must be >= 1"));
        }
        Ok(())
    }

    pub fn frame_interval_ms(&self) -> u64 {
        (1000.0 / self.fps).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBatch {
    pub batch_id: u64,
    pub source_frame_ids: Vec<u64>,
    pub kept_frame_ids: Vec<u64>,
    pub kept_frames: Vec<GrayImage>,
    pub first_ts_ms: u64,
    pub last_ts_ms: u64,
}

impl FrameBatch {
    pub fn dropped(&self) -> usize {
        self.source_frame_ids.len() - self.kept_frame_ids.len()
    }
}

/// Tumbling-window batcher for one ordered frame stream.
#[derive(Debug, Clone)]
pub struct Batcher {
    camera: CameraConfig,
    filter: FilterConfig,
    pending: Vec<FrameSample>,
    next_batch_id: u64,
    last_frame_id: Option<u64>,
    dims: Option<(usize, usize)>,
}

impl Batcher {
    pub fn new(camera: CameraConfig, filter: FilterConfig) -> Result<Self, FrameError> {
        camera.validate()?;
        filter.validate()?;
        Ok(Self {
            camera,
            filter,
            pending: Vec::with_capacity(camera.batch_size),
            next_batch_id: 0,
            last_frame_id: None,
            dims: None,
        })
    }

    pub fn camera(&self) -> &CameraConfig {
        &self.camera
    }

    pub fn filter(&self) -> &FilterConfig {
        &self.filter
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn push_frame(&mut self, frame: FrameSample) -> Result<Option<FrameBatch>, FrameError> {
        if let Some(last) = self.last_frame_id {
            if frame.frame_id <= last {
                return Err(FrameError::OutOfOrderFrame {
                    frame_id: frame.frame_id,
                    last,
                });
            }
        }
        let dims = frame.pixels.dims();
        if dims.0 < 3 || dims.1 < 3 {
            return Err(FrameError::TooSmall {
                width: dims.0,
                height: dims.1,
            });
        }
        match self.dims {
            Some(expected) if expected != dims => {
                return Err(FrameError::DimensionMismatch {
                    left: expected,
                    right: dims,
                })
            }
            _ => self.dims = Some(dims),
        }
        self.last_frame_id = Some(frame.frame_id);
        self.pending.push(frame);
        if self.pending.len() < self.camera.batch_size {
            return Ok(None);
        }

        let frames = std::mem::take(&mut self.pending);
        let kept = filter_batch(&frames, &self.filter)?;
        let batch = FrameBatch {
            batch_id: self.next_batch_id,
            source_frame_ids: frames.iter().map(|f| f.frame_id).collect(),
            kept_frame_ids: kept.iter().map(|&i| frames[i].frame_id).collect(),
            kept_frames: kept.iter().map(|&i| frames[i].pixels.clone()).collect(),
            first_ts_ms: frames.first().map_or(0, |f| f.ts_ms),
            last_ts_ms: frames.last().map_or(0, |f| f.ts_ms),
        };
        self.next_batch_id += 1;
        Ok(Some(batch))
    }

    /// Claims the next batch id for an observation that did not come from frames.
    pub fn reserve_batch_id(&mut self) -> u64 {
        let id = self.next_batch_id;
        self.next_batch_id += 1;
        id
    }

    /// Drops pending frames and restarts numbering.
    pub fn reset(&mut self) {
        self.pending.clear();
        self.next_batch_id = 0;
        self.last_frame_id = None;
        self.dims = None;
    }
}
