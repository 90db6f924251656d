//! Where frame pixels come from: image files, inline grids, or procedural test patterns.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_pipeline::{FrameError, GrayImage, Pixels, RgbImage};

#[derive(Debug, Error)]
pub enum FrameSourceError {
    #[error("missing image file {0}")]
    MissingAsset(PathBuf),
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSource {
    /// Image file, resolved against the script directory when relative.
    Path(PathBuf),
    /// Row-major grayscale rows.
    Gray(Vec<Vec<u8>>),
    /// Row-major RGB rows.
    Rgb(Vec<Vec<[u8; 3]>>),
    Synthetic(SyntheticFrame),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticFrame {
    pub pattern: SyntheticPattern,
    #[serde(default = "default_width")]
    pub width: usize,
    #[serde(default = "default_height")]
    pub height: usize,
}

fn default_width() -> usize {
    32
}

fn default_height() -> usize {
    24
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SyntheticPattern {
    /// Uniform random pixels; sharp, and unrelated to any other seed.
    Noise { seed: u64 },
    /// A single value everywhere; zero Laplacian variance.
    Flat { value: u8 },
    /// Square checkerboard, optionally shifted by `phase` pixels.
    Checker {
        cell: usize,
        #[serde(default)]
        phase: usize,
    },
}

impl SyntheticFrame {
    pub fn render(&self) -> Result<GrayImage, FrameError> {
        let (w, h) = (self.width, self.height);
        let data = match self.pattern {
            SyntheticPattern::Noise { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..w * h).map(|_| rng.random()).collect()
            }
            SyntheticPattern::Flat { value } => vec![value; w * h],
            SyntheticPattern::Checker { cell, phase } => {
                let cell = cell.max(1);
                (0..h)
                    .flat_map(|y| (0..w).map(move |x| if ((x + phase) / cell + y / cell) % 2 == 0 { 230 } else { 20 }))
                    .collect()
            }
        };
        GrayImage::new(w, h, data)
    }
}

impl FrameSource {
    pub fn noise(seed: u64) -> Self {
        FrameSource::Synthetic(SyntheticFrame {
            pattern: SyntheticPattern::Noise { seed },
            width: default_width(),
            height: default_height(),
        })
    }

    pub fn flat(value: u8) -> Self {
        FrameSource::Synthetic(SyntheticFrame {
            pattern: SyntheticPattern::Flat { value },
            width: default_width(),
            height: default_height(),
        })
    }

    /// Rewrites a relative path against `base`.
    pub fn resolved(&self, base: &Path) -> FrameSource {
        match self {
            FrameSource::Path(p) if p.is_relative() => FrameSource::Path(base.join(p)),
            other => other.clone(),
        }
    }

    pub fn check_exists(&self) -> Result<(), FrameSourceError> {
        match self {
            FrameSource::Path(p) if !p.is_file() => Err(FrameSourceError::MissingAsset(p.clone())),
            _ => Ok(()),
        }
    }

    pub fn load(&self) -> Result<Pixels, FrameSourceError> {
        match self {
            FrameSource::Path(path) => {
                self.check_exists()?;
                let img = image::open(path).map_err(|source| FrameSourceError::Decode {
                    path: path.clone(),
                    source,
                })?;
                let rgb = img.to_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let data = rgb.pixels().map(|p| p.0).collect();
                Ok(Pixels::Rgb(RgbImage::new(w, h, data)?))
            }
            FrameSource::Gray(rows) => Ok(Pixels::Gray(GrayImage::from_rows(rows)?)),
            FrameSource::Rgb(rows) => {
                let h = rows.len();
                let w = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != w) {
                    return Err(FrameError::BadBuffer {
                        width: w,
                        height: h,
                        len: rows.iter().map(Vec::len).sum(),
                    }
                    .into());
                }
                Ok(Pixels::Rgb(RgbImage::new(w, h, rows.concat())?))
            }
            FrameSource::Synthetic(s) => Ok(Pixels::Gray(s.render()?)),
        }
    }
}
