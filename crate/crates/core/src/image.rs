//! Grayscale rasters, the PGM codec and nearest-neighbour geometry.
//!
//! Coordinates follow the image convention used throughout the crate: `x`
//! runs along the width (`0..width`), `y` along the height (`0..height`), and
//! pixels are stored row-major, `pixels[y * width + x]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// An 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    /// An image filled with a single intensity.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        GrayImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at signed coordinates, `None` outside the frame.
    #[inline]
    pub fn get_checked(&self, x: i64, y: i64) -> Option<u8> {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.pixels[y * self.width + x] = value;
    }

    /// Mean absolute difference between two equally sized images, in
    /// intensity levels.
    pub fn mean_abs_diff(&self, other: &GrayImage) -> Result<f64> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::invalid(format!(
                "cannot compare {}x{} with {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let total: u64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(&a, &b)| u64::from(a.abs_diff(b)))
            .sum();
        Ok(total as f64 / self.pixels.len() as f64)
    }
}

/// An image flattened into a real vector (column-major, see [`to_vector`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageVector(Vec<f64>);

impl ImageVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("image vector must not be empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "image vector entry {i} is not finite"
            )));
        }
        Ok(ImageVector(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ImageVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Stacks the columns of `img` into one vector: every row of column 0, then
/// column 1, and so on.
pub fn to_vector(img: &GrayImage) -> ImageVector {
    let mut values = Vec::with_capacity(img.width * img.height);
    for x in 0..img.width {
        for y in 0..img.height {
            values.push(f64::from(img.get(x, y)));
        }
    }
    ImageVector(values)
}

/// Inverse of [`to_vector`]. Values are rounded and clamped to `0..=255`.
pub fn from_vector(v: &ImageVector, width: usize, height: usize) -> Result<GrayImage> {
    if v.len() != width * height {
        return Err(Error::invalid(format!(
            "vector of length {} cannot be reshaped to {width}x{height}",
            v.len()
        )));
    }
    let mut img = GrayImage::filled(width, height, 0)?;
    for x in 0..width {
        for y in 0..height {
            let value = v.0[x * height + y].round().clamp(0.0, 255.0) as u8;
            img.set(x, y, value);
        }
    }
    Ok(img)
}

/// Nearest-neighbour resampling by coordinate scaling.
pub fn resize_nearest(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid(format!(
            "target size must be positive, got {out_w}x{out_h}"
        )));
    }
    GrayImage::from_fn(out_w, out_h, |i, j| {
        img.get(i * img.width / out_w, j * img.height / out_h)
    })
}

/// Rotates `img` by `degrees` about its geometric center `(⌊W/2⌋, ⌊H/2⌋)`.
///
/// Each output pixel takes the nearest input pixel of its preimage; samples
/// falling outside the frame are 0. Positive angles rotate from the +x axis
/// towards the +y axis, the same sense in which polar angles increase in
/// [`crate::logpolar`].
pub fn rotate_nearest(img: &GrayImage, degrees: f64) -> GrayImage {
    let m = (img.width / 2) as f64;
    let n = (img.height / 2) as f64;
    let (sin, cos) = degrees.to_radians().sin_cos();
    let mut out = img.clone();
    for y in 0..img.height {
        for x in 0..img.width {
            let dx = x as f64 - m;
            let dy = y as f64 - n;
            let sx = (m + dx * cos + dy * sin).round() as i64;
            let sy = (n - dx * sin + dy * cos).round() as i64;
            out.set(x, y, img.get_checked(sx, sy).unwrap_or(0));
        }
    }
    out
}

fn decode_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Decode {
        offset,
        message: message.into(),
    }
}

/// Splits a PGM header into whitespace-separated tokens, skipping `#` comments.
struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<(usize, &'a [u8])> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            if self.bytes[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| (start, &self.bytes[start..self.pos]))
    }

    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        let (offset, tok) = self.token().ok_or_else(|| {
            decode_error(
                self.pos,
                format!("unexpected end of header, expected {what}"),
            )
        })?;
        let text = std::str::from_utf8(tok)
            .map_err(|_| decode_error(offset, format!("invalid {what}")))?;
        let value = text
            .parse::<usize>()
            .map_err(|_| decode_error(offset, format!("invalid {what} {text:?}")))?;
        Ok((offset, value))
    }
}

/// Decodes a binary (`P5`) or ASCII (`P2`) PGM stream with maxval ≤ 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'2') {
        return Err(decode_error(0, "missing P5/P2 magic number"));
    }
    let binary = bytes[1] == b'5';
    let mut rd = HeaderReader { bytes, pos: 2 };
    let (w_off, width) = rd.number("width")?;
    let (h_off, height) = rd.number("height")?;
    let (mv_off, maxval) = rd.number("maxval")?;
    if width == 0 {
        return Err(decode_error(w_off, "width must be positive"));
    }
    if height == 0 {
        return Err(decode_error(h_off, "height must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(decode_error(mv_off, format!("unsupported maxval {maxval}")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| decode_error(w_off, "image dimensions overflow"))?;

    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        let ws = rd.pos;
        if ws >= bytes.len() || !bytes[ws].is_ascii_whitespace() {
            return Err(decode_error(ws, "expected whitespace after maxval"));
        }
        let start = ws + 1;
        let available = bytes.len() - start;
        if available < count {
            return Err(decode_error(
                bytes.len(),
                format!("truncated payload: expected {count} bytes, found {available}"),
            ));
        }
        let raster = &bytes[start..start + count];
        if let Some(i) = raster.iter().position(|&p| usize::from(p) > maxval) {
            return Err(decode_error(
                start + i,
                format!("sample exceeds maxval {maxval}"),
            ));
        }
        raster.to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        while pixels.len() < count {
            let (offset, value) = match rd.number("sample") {
                Ok(v) => v,
                Err(_) if rd.pos >= bytes.len() => {
                    return Err(decode_error(
                        bytes.len(),
                        format!(
                            "truncated payload: expected {count} samples, found {}",
                            pixels.len()
                        ),
                    ))
                }
                Err(e) => return Err(e),
            };
            if value > maxval {
                return Err(decode_error(
                    offset,
                    format!("sample {value} exceeds maxval {maxval}"),
                ));
            }
            pixels.push(value as u8);
        }
        pixels
    };
    GrayImage::new(width, height, pixels)
}

/// Encodes `img` as a binary `P5` stream with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut header = String::new();
    let _ = write!(header, "P5\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.pixels.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn read_pgm(path: impl AsRef<std::path::Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::ingestion(path, e.to_string()))?;
    decode_pgm(&bytes).map_err(|e| Error::ingestion(path, e.to_string()))
}

pub fn write_pgm(path: impl AsRef<std::path::Path>, img: &GrayImage) -> Result<()> {
    std::fs::write(path, encode_pgm(img))?;
    Ok(())
}
