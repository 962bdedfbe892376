//! Cartesian to log-polar resampling about the image center.
//!
//! Output rows index the normalized log-radius (row 0 at `r_min`, the last row
//! at the reference radius `R`) and columns index the polar angle, so rotating
//! the input about its center shifts the output columns circularly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogPolarConfig {
    /// Sizing base `Z`: the output is `Z^q × Z^q` with `q = ⌈log_Z R⌉`.
    pub base: u32,
    /// Inner radius cutoff as a fraction of the reference radius `R`; the
    /// log is undefined at the center. Tying the cutoff to `R` keeps the
    /// radial axis aligned when the whole frame is rescaled. The default is
    /// one pixel on a 92×112 frame (`R = 45`).
    pub inner_ratio: f64,
    /// Intensity written where a sample would fall outside the frame.
    pub fill: u8,
}

impl Default for LogPolarConfig {
    fn default() -> Self {
        LogPolarConfig {
            base: 2,
            inner_ratio: 1.0 / 45.0,
            fill: 0,
        }
    }
}

impl LogPolarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(Error::invalid(format!(
                "log-polar base must be >= 2, got {}",
                self.base
            )));
        }
        if !(self.inner_ratio > 0.0 && self.inner_ratio < 1.0) {
            return Err(Error::invalid(format!(
                "inner_ratio must lie in (0, 1), got {}",
                self.inner_ratio
            )));
        }
        Ok(())
    }

    /// Inner cutoff in pixels for a circle of the given radius.
    pub fn r_min(&self, radius: f64) -> f64 {
        self.inner_ratio * radius
    }
}

/// Center and radius of the disk sampled by the transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCircle {
    pub m: usize,
    pub n: usize,
    pub radius: f64,
}

/// Center `(⌊W/2⌋, ⌊H/2⌋)` and the largest disk about it that fits inside
/// the frame.
pub fn reference_circle(img: &GrayImage) -> Result<ReferenceCircle> {
    let (w, h) = img.dimensions();
    let m = w / 2;
    let n = h / 2;
    let radius = m.min(n).min(w - 1 - m).min(h - 1 - n);
    if radius < 2 {
        return Err(Error::Degenerate(format!(
            "{w}x{h} image is too small for a log-polar transform"
        )));
    }
    Ok(ReferenceCircle {
        m,
        n,
        radius: radius as f64,
    })
}

/// Radius and angle (degrees in `[0, 360)`) of `(x, y)` about the circle
/// center. The center itself maps to `(0, 0)`.
pub fn cartesian_to_polar(x: f64, y: f64, c: &ReferenceCircle) -> (f64, f64) {
    let dx = x - c.m as f64;
    let dy = y - c.n as f64;
    let r = dx.hypot(dy);
    if r == 0.0 {
        return (0.0, 0.0);
    }
    let mut theta = dy.atan2(dx).to_degrees();
    if theta < 0.0 {
        theta += 360.0;
    }
    if theta >= 360.0 {
        theta -= 360.0;
    }
    (r, theta)
}

/// `ln(r / r_min) / ln(R / r_min)`: maps `[r_min, R]` monotonically onto `[0, 1]`.
pub fn log_radial(r: f64, radius: f64, r_min: f64) -> Result<f64> {
    if !(r_min > 0.0 && r_min < radius) {
        return Err(Error::invalid(format!(
            "need 0 < r_min < R, got r_min={r_min}, R={radius}"
        )));
    }
    if !(r >= r_min && r <= radius) {
        return Err(Error::OutOfDomain {
            value: r,
            min: r_min,
            max: radius,
        });
    }
    Ok((r / r_min).ln() / (radius / r_min).ln())
}

/// Inverse of [`log_radial`].
pub fn radius_at(p: f64, radius: f64, r_min: f64) -> f64 {
    r_min * (radius / r_min).powf(p)
}

/// Side length `Z^q` with `q = ⌈log_Z R⌉`, computed in integers.
pub fn output_side(radius: f64, base: u32) -> usize {
    let base = base.max(2) as usize;
    let mut side = 1usize;
    while (side as f64) < radius {
        side *= base;
    }
    side
}

/// Log-polar image at the size given by the sizing rule.
pub fn log_polar_transform(img: &GrayImage, cfg: &LogPolarConfig) -> Result<GrayImage> {
    cfg.validate()?;
    let circle = reference_circle(img)?;
    let side = output_side(circle.radius, cfg.base);
    sample(img, &circle, cfg, side)
}

/// Log-polar image at a fixed `side × side`, so differently sized inputs can
/// be compared cell by cell.
pub fn log_polar_transform_sized(
    img: &GrayImage,
    cfg: &LogPolarConfig,
    side: usize,
) -> Result<GrayImage> {
    cfg.validate()?;
    if side < 2 {
        return Err(Error::invalid(format!(
            "log-polar side must be >= 2, got {side}"
        )));
    }
    let circle = reference_circle(img)?;
    sample(img, &circle, cfg, side)
}

/// Output geometry `(side, side)` for an input of the given size.
pub fn output_dimensions(
    width: usize,
    height: usize,
    cfg: &LogPolarConfig,
) -> Result<(usize, usize)> {
    let probe = GrayImage::filled(width, height, 0)?;
    let circle = reference_circle(&probe)?;
    let side = output_side(circle.radius, cfg.base);
    Ok((side, side))
}

fn sample(
    img: &GrayImage,
    circle: &ReferenceCircle,
    cfg: &LogPolarConfig,
    side: usize,
) -> Result<GrayImage> {
    let r_min = cfg.r_min(circle.radius);
    let angles: Vec<(f64, f64)> = (0..side)
        .map(|j| (360.0 * j as f64 / side as f64).to_radians().sin_cos())
        .collect();
    let (m, n) = (circle.m as f64, circle.n as f64);
    let mut out = GrayImage::filled(side, side, cfg.fill)?;
    for row in 0..side {
        let p = row as f64 / (side - 1) as f64;
        let r = radius_at(p, circle.radius, r_min);
        for (col, &(sin, cos)) in angles.iter().enumerate() {
            let sx = (m + r * cos).round() as i64;
            let sy = (n + r * sin).round() as i64;
            if let Some(v) = img.get_checked(sx, sy) {
                out.set(col, row, v);
            }
        }
    }
    Ok(out)
}

/// Circular shift of every row: output column `j` takes input column
/// `(j - shift) mod width`.
pub fn shift_columns(img: &GrayImage, shift: i64) -> GrayImage {
    let w = img.width() as i64;
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        img.get((x as i64 - shift).rem_euclid(w) as usize, y)
    })
    .expect("same dimensions as a valid image")
}
