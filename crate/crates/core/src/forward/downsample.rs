use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::resample::{self, Taps};
use crate::error::{Error, Result};

/// Band-wise antialiased bilinear downsampling of a multi-band image.
///
/// Images are flattened band-major, then row-major within a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownsampleSpec {
    pub bands: usize,
    /// High-resolution height.
    pub height: usize,
    /// High-resolution width.
    pub width: usize,
    pub factor: usize,
    /// Maximum reflectance; the signal box is `[0, r_max]` per pixel.
    pub r_max: f64,
}

/// Upscaling kernels available as reconstruction maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upscaler {
    Bilinear,
    Bicubic,
}

impl Upscaler {
    pub fn name(self) -> &'static str {
        match self {
            Upscaler::Bilinear => "bilinear",
            Upscaler::Bicubic => "bicubic",
        }
    }
}

impl DownsampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bands == 0 {
            return Err(Error::usage("downsample model needs at least one band"));
        }
        if self.factor < 2 {
            return Err(Error::usage(format!("downsample factor must be >= 2, got {}", self.factor)));
        }
        if self.height == 0 || self.width == 0 || self.height % self.factor != 0 || self.width % self.factor != 0 {
            return Err(Error::usage(format!(
                "image size {}x{} must be a positive multiple of the factor {}",
                self.height, self.width, self.factor
            )));
        }
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::usage("r_max must be positive"));
        }
        Ok(())
    }

    pub fn low_height(&self) -> usize {
        self.height / self.factor
    }

    pub fn low_width(&self) -> usize {
        self.width / self.factor
    }

    pub fn d1(&self) -> usize {
        self.bands * self.height * self.width
    }

    pub fn d2(&self) -> usize {
        self.bands * self.low_height() * self.low_width()
    }

    /// Signal box `[0, r_max]^{d1}`.
    pub fn signal_bounds(&self) -> Vec<[f64; 2]> {
        vec![[0.0, self.r_max]; self.d1()]
    }

    fn taps(&self) -> (Vec<Taps>, Vec<Taps>) {
        (
            resample::downsample_taps(self.height, self.factor),
            resample::downsample_taps(self.width, self.factor),
        )
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (rt, ct) = self.taps();
        let band = self.height * self.width;
        x.chunks(band)
            .flat_map(|b| resample::apply_separable(b, self.height, self.width, &rt, &ct))
            .collect()
    }

    /// Dense matrix of the operator on a single band.
    pub fn band_matrix(&self) -> DMatrix<f64> {
        let (rt, ct) = self.taps();
        resample::separable_matrix(self.height, self.width, &rt, &ct)
    }

    /// Upscales a low-resolution measurement back to signal size.
    pub fn upscale(&self, y: &[f64], kind: Upscaler) -> Vec<f64> {
        let (h, w) = (self.low_height(), self.low_width());
        let (rt, ct) = match kind {
            Upscaler::Bilinear => (
                resample::bilinear_taps(h, self.factor),
                resample::bilinear_taps(w, self.factor),
            ),
            Upscaler::Bicubic => (
                resample::bicubic_taps(h, self.factor),
                resample::bicubic_taps(w, self.factor),
            ),
        };
        y.chunks(h * w)
            .flat_map(|b| resample::apply_separable(b, h, w, &rt, &ct))
            .collect()
    }
}
