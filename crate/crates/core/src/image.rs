//! Raster data model shared by every pipeline stage.
//!
//! Samples live in `[0, 1]`; the 8-bit `{0, 255}` convention only appears at
//! the file boundary.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or malformed image {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("image dimensions {height}x{width}x{channels} are invalid")]
    Dimensions {
        height: usize,
        width: usize,
        channels: usize,
    },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    Mismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
}

/// H×W×C raster, interleaved row-major, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image, clamping every sample into `[0, 1]`. NaN becomes 0.
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        mut data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if height == 0 || width == 0 || !(channels == 1 || channels == 3) {
            return Err(ImageError::Dimensions {
                height,
                width,
                channels,
            });
        }
        let len = height
            .checked_mul(width)
            .and_then(|n| n.checked_mul(channels))
            .ok_or(ImageError::Dimensions {
                height,
                width,
                channels,
            })?;
        if data.len() != len {
            return Err(ImageError::Dimensions {
                height,
                width,
                channels,
            });
        }
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(
        height: usize,
        width: usize,
        channels: usize,
        value: f64,
    ) -> Result<Self, ImageError> {
        Self::new(
            height,
            width,
            channels,
            vec![value; height * width * channels],
        )
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Result<Self, ImageError> {
        Self::filled(height, width, channels, 0.0)
    }

    /// Builds an image by evaluating `f(row, col, channel)`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    /// Single-channel plane for channel `ch`, row-major.
    pub fn plane(&self, ch: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(ch)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Rebuilds an image from per-channel planes.
    pub fn from_planes(
        height: usize,
        width: usize,
        planes: &[Vec<f64>],
    ) -> Result<Self, ImageError> {
        let channels = planes.len();
        let n = height * width;
        if planes.iter().any(|p| p.len() != n) {
            return Err(ImageError::Dimensions {
                height,
                width,
                channels,
            });
        }
        let mut data = vec![0.0; n * channels];
        for (ch, plane) in planes.iter().enumerate() {
            for (i, v) in plane.iter().enumerate() {
                data[i * channels + ch] = *v;
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Luma (BT.601 weights) for colour images; a copy for grayscale.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn same_dims(&self, other: &Image) -> Result<(), ImageError> {
        if self.dims() != other.dims() {
            return Err(ImageError::Mismatch {
                left: self.dims(),
                right: other.dims(),
            });
        }
        Ok(())
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel binary raster; `true` marks pixels that must be transmitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 || bits.len() != height * width {
            return Err(ImageError::Dimensions {
                height,
                width,
                channels: 1,
            });
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self {
            height,
            width,
            bits: vec![value; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count_true(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Fraction of pixels marked for transmission.
    pub fn true_fraction(&self) -> f64 {
        self.count_true() as f64 / self.bits.len() as f64
    }

    pub fn complement(&self) -> Mask {
        Mask {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// `{0, 255}` raster, one byte per pixel.
    pub fn to_u8(&self) -> Vec<u8> {
        self.bits.iter().map(|b| if *b { 255 } else { 0 }).collect()
    }

    /// Inverse of [`Mask::to_u8`]; any nonzero byte is `true`.
    pub fn from_u8(height: usize, width: usize, raster: &[u8]) -> Result<Self, ImageError> {
        Self::new(height, width, raster.iter().map(|v| *v != 0).collect())
    }

    pub fn to_image(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            channels: 1,
            data: self
                .bits
                .iter()
                .map(|b| if *b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    fn check(&self, img: &Image) -> Result<(), ImageError> {
        if self.height != img.height || self.width != img.width {
            return Err(ImageError::Mismatch {
                left: img.dims(),
                right: (self.height, self.width, img.channels),
            });
        }
        Ok(())
    }
}

/// Keeps pixels where the mask is set and zeroes the rest, in every channel.
pub fn apply_mask(img: &Image, mask: &Mask) -> Result<Image, ImageError> {
    mask.check(img)?;
    let c = img.channels;
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| if mask.bits[i / c] { *v } else { 0.0 })
        .collect();
    Ok(Image {
        data,
        ..img.clone()
    })
}

/// Signed per-sample difference `x - x_star`.
pub fn residual_signed(x: &Image, x_star: &Image) -> Result<Vec<f64>, ImageError> {
    x.same_dims(x_star)?;
    Ok(x.data
        .iter()
        .zip(&x_star.data)
        .map(|(a, b)| a - b)
        .collect())
}

/// Residual `x - x_star` stored as an image (clamped to `[0, 1]`).
///
/// When `x_star` is `x` masked by the complement of the transmit mask the
/// difference is already nonnegative and nothing is lost to clamping.
pub fn residual(x: &Image, x_star: &Image) -> Result<Image, ImageError> {
    let (h, w, c) = x.dims();
    Image::new(h, w, c, residual_signed(x, x_star)?)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|source| ImageError::Io {
        path: shown.clone(),
        source,
    })?;
    let format = image::guess_format(&bytes).map_err(|e| ImageError::Format {
        path: shown.clone(),
        reason: e.to_string(),
    })?;
    if !matches!(format, ImageFormat::Png | ImageFormat::Pnm) {
        return Err(ImageError::Format {
            path: shown,
            reason: format!("{format:?} is not supported"),
        });
    }
    let decoded =
        image::load_from_memory_with_format(&bytes, format).map_err(|e| ImageError::Format {
            path: shown.clone(),
            reason: e.to_string(),
        })?;
    from_dynamic(decoded, &shown)
}

fn from_dynamic(img: DynamicImage, shown: &str) -> Result<Image, ImageError> {
    let to_unit = |v: &u8| f64::from(*v) / 255.0;
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Image::new(
                h as usize,
                w as usize,
                1,
                g.as_raw().iter().map(to_unit).collect(),
            )
        }
        DynamicImage::ImageRgb8(rgb) => {
            let (w, h) = rgb.dimensions();
            Image::new(
                h as usize,
                w as usize,
                3,
                rgb.as_raw().iter().map(to_unit).collect(),
            )
        }
        other => Err(ImageError::Format {
            path: shown.to_string(),
            reason: format!(
                "only 8-bit gray or RGB is supported, got {:?}",
                other.color()
            ),
        }),
    }
}

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes PNG, or binary PPM/PGM when the extension is `.ppm`/`.pgm`/`.pnm`.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let format = match ext.as_str() {
        "ppm" | "pgm" | "pnm" => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    let bytes: Vec<u8> = img.data.iter().map(|v| quantize(*v)).collect();
    let (w, h) = (img.width as u32, img.height as u32);
    let dynamic = if img.channels == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).expect("buffer sized from dims"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).expect("buffer sized from dims"))
    };
    let file = std::fs::File::create(path).map_err(|source| ImageError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut writer = std::io::BufWriter::new(file);
    dynamic.write_to(&mut writer, format).map_err(|e| match e {
        image::ImageError::IoError(source) => ImageError::Io {
            path: shown,
            source,
        },
        other => ImageError::Format {
            path: shown,
            reason: other.to_string(),
        },
    })
}
