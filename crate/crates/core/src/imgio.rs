//! Grayscale images, PGM (P2/P5) file I/O, and block padding / cropping.
//!
//! Pixels are held as `f64` in row-major order. Images loaded from disk are
//! normalized to `[0, 1]` by dividing by the file's maxval. The same [`Image`]
//! type doubles as the coefficient grid for the wavelet transforms.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    NotFound(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(
        "unsupported magic number {magic:?} at byte 0 (only P2 and P5 grayscale PGM are supported)"
    )]
    UnsupportedMagic { magic: String },
    #[error("malformed PGM header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("truncated pixel data at byte {offset}: expected {expected} samples, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("crop dims {want_rows}x{want_cols} exceed image dims {rows}x{cols}")]
    DimsExceedImage {
        want_rows: usize,
        want_cols: usize,
        rows: usize,
        cols: usize,
    },
}

/// Row/column extent of an image before padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    pub fn new(rows: usize, cols: usize) -> Self {
        Dims { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A 2D grid of real values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
}

impl Image {
    /// Builds an image, checking the length and finiteness invariants.
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if rows == 0 || cols == 0 {
            return Err(ImageError::Invalid(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(ImageError::Invalid(format!(
                "pixel count {} does not match {rows}x{cols}",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !p.is_finite()) {
            return Err(ImageError::Invalid(format!(
                "non-finite pixel at index {i}"
            )));
        }
        Ok(Image { rows, cols, pixels })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "image dimensions must be positive");
        Image {
            rows,
            cols,
            pixels: vec![value; rows * cols],
        }
    }

    /// Builds an image from nested rows. Panics on ragged or empty input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let n = rows.len();
        assert!(n > 0, "from_rows needs at least one row");
        let m = rows[0].as_ref().len();
        let mut pixels = Vec::with_capacity(n * m);
        for r in rows {
            assert_eq!(r.as_ref().len(), m, "ragged rows");
            pixels.extend_from_slice(r.as_ref());
        }
        Image::new(n, m, pixels).expect("from_rows: invalid image")
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut pixels = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                pixels.push(f(r, c));
            }
        }
        Image::new(rows, cols, pixels).expect("from_fn: invalid image")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.rows, self.cols)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.pixels[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.pixels[r * self.cols..(r + 1) * self.cols]
    }

    /// Sum of squared entries.
    pub fn energy(&self) -> f64 {
        self.pixels.iter().map(|p| p * p).sum()
    }

    /// Largest absolute entrywise difference. Panics if dims differ.
    pub fn max_abs_diff(&self, other: &Image) -> f64 {
        assert_eq!(self.dims(), other.dims(), "max_abs_diff: dims differ");
        self.pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        Image {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Pixels clamped to `[0, 1]`.
    pub fn clamped(&self) -> Image {
        self.map(|p| p.clamp(0.0, 1.0))
    }
}

/// Loads a P2 or P5 PGM file, scaling samples to `[0, 1]`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ImageError::NotFound(path.display().to_string())
        } else {
            ImageError::Io {
                path: path.display().to_string(),
                source: e,
            }
        }
    })?;
    decode_pgm(&bytes)
}

/// Decodes an in-memory PGM byte buffer.
pub fn decode_pgm(bytes: &[u8]) -> Result<Image, ImageError> {
    if bytes.len() < 2 {
        return Err(ImageError::MalformedHeader {
            offset: 0,
            reason: "file shorter than the magic number".into(),
        });
    }
    let binary = match &bytes[..2] {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(ImageError::UnsupportedMagic {
                magic: String::from_utf8_lossy(other).into_owned(),
            })
        }
    };

    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let cols = cursor.next_number("width")?;
    let rows = cursor.next_number("height")?;
    let maxval = cursor.next_number("maxval")?;
    if cols == 0 || rows == 0 {
        return Err(ImageError::MalformedHeader {
            offset: cursor.pos,
            reason: format!("zero dimension {cols}x{rows}"),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::MalformedHeader {
            offset: cursor.pos,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    let count = rows * cols;
    let scale = maxval as f64;

    let samples: Vec<u32> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => {
                return Err(ImageError::MalformedHeader {
                    offset: cursor.pos,
                    reason: "expected whitespace after maxval".into(),
                })
            }
        }
        let width = if maxval > 255 { 2 } else { 1 };
        let raster = &bytes[cursor.pos..];
        if raster.len() < count * width {
            return Err(ImageError::Truncated {
                offset: bytes.len(),
                expected: count,
                found: raster.len() / width,
            });
        }
        if width == 1 {
            raster[..count].iter().map(|&b| b as u32).collect()
        } else {
            raster[..count * 2]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                .collect()
        }
    } else {
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            match cursor.try_number()? {
                Some(v) => out.push(v as u32),
                None => {
                    return Err(ImageError::Truncated {
                        offset: cursor.pos,
                        expected: count,
                        found: out.len(),
                    })
                }
            }
        }
        out
    };

    if let Some(i) = samples.iter().position(|&s| s as usize > maxval) {
        return Err(ImageError::MalformedHeader {
            offset: cursor.pos,
            reason: format!("sample {i} exceeds maxval {maxval}"),
        });
    }
    let pixels = samples.into_iter().map(|s| s as f64 / scale).collect();
    Image::new(rows, cols, pixels)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Reads a decimal token, or `None` at end of input.
    fn try_number(&mut self) -> Result<Option<usize>, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.bytes.get(self.pos) {
                None => Ok(None),
                Some(&b) => Err(ImageError::MalformedHeader {
                    offset: self.pos,
                    reason: format!("unexpected byte 0x{b:02x}, expected a decimal number"),
                }),
            };
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap_or_default();
        text.parse::<usize>()
            .map(Some)
            .map_err(|_| ImageError::MalformedHeader {
                offset: start,
                reason: format!("number {text:?} out of range"),
            })
    }

    fn next_number(&mut self, what: &str) -> Result<usize, ImageError> {
        self.try_number()?
            .ok_or_else(|| ImageError::MalformedHeader {
                offset: self.pos,
                reason: format!("missing {what}"),
            })
    }
}

/// Quantizes a pixel to 8 bits: clamp to `[0, 1]`, scale by 255, round half away from zero.
pub fn quantize_u8(p: f64) -> u8 {
    (p.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes an image as a binary P5 PGM with maxval 255.
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.cols, img.rows);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.pixels.iter().map(|&p| quantize_u8(p)));
    out
}

/// Writes a binary P5 PGM (maxval 255). Pixels are clamped to `[0, 1]` first.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let io_err = |source| ImageError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(&encode_pgm(img)).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Pads an image by edge replication so both dims are multiples of `block`.
///
/// Returns the padded image and the original dims for [`crop`].
pub fn pad_to_block(img: &Image, block: usize) -> (Image, Dims) {
    assert!(block >= 1, "block must be positive");
    let orig = img.dims();
    let rows = orig.rows.div_ceil(block) * block;
    let cols = orig.cols.div_ceil(block) * block;
    if rows == orig.rows && cols == orig.cols {
        return (img.clone(), orig);
    }
    let padded = Image::from_fn(rows, cols, |r, c| {
        img.get(r.min(orig.rows - 1), c.min(orig.cols - 1))
    });
    (padded, orig)
}

/// Top-left `dims` sub-image.
pub fn crop(img: &Image, dims: Dims) -> Result<Image, ImageError> {
    if dims.rows > img.rows || dims.cols > img.cols || dims.is_empty() {
        return Err(ImageError::DimsExceedImage {
            want_rows: dims.rows,
            want_cols: dims.cols,
            rows: img.rows,
            cols: img.cols,
        });
    }
    if dims == img.dims() {
        return Ok(img.clone());
    }
    let mut pixels = Vec::with_capacity(dims.len());
    for r in 0..dims.rows {
        pixels.extend_from_slice(&img.row(r)[..dims.cols]);
    }
    Ok(Image {
        rows: dims.rows,
        cols: dims.cols,
        pixels,
    })
}
