//! Pixel-integrated Gaussian PSF model of a single emitter on a camera.
//!
//! The signal is `Θ = (x, y, z, C, h)`: emitter position in nm, background
//! photon flux `C` and emitter photon rate `h`. Pixel `(px, py)` covers
//! `[px·s, (px+1)·s] × [py·s, (py+1)·s]` and the image is flattened with
//! `py` as the row index.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroscopySpec {
    pub pixels_x: usize,
    pub pixels_y: usize,
    /// Pixel edge length in nm.
    pub pixel_size: f64,
    /// In-focus PSF standard deviation in nm.
    pub psf_sigma0: f64,
    /// Defocus depth at which the PSF width grows by `√2`, in nm.
    pub psf_z0: f64,
    pub c_max: f64,
    pub h_max: f64,
    pub exposure: f64,
}

pub const SIGNAL_DIM: usize = 5;

impl MicroscopySpec {
    pub fn validate(&self) -> Result<()> {
        if self.pixels_x == 0 || self.pixels_y == 0 {
            return Err(Error::usage("microscopy sensor needs at least one pixel"));
        }
        for (name, v) in [
            ("pixel_size", self.pixel_size),
            ("psf_sigma0", self.psf_sigma0),
            ("psf_z0", self.psf_z0),
            ("c_max", self.c_max),
            ("h_max", self.h_max),
            ("exposure", self.exposure),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::usage(format!("microscopy {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn num_pixels(&self) -> usize {
        self.pixels_x * self.pixels_y
    }

    /// Sensor extent `(width, height)` in nm.
    pub fn extent(&self) -> (f64, f64) {
        (
            self.pixels_x as f64 * self.pixel_size,
            self.pixels_y as f64 * self.pixel_size,
        )
    }

    /// PSF width at depth `z`.
    pub fn sigma(&self, z: f64) -> f64 {
        let r = z / self.psf_z0;
        self.psf_sigma0 * (1.0 + r * r).sqrt()
    }

    /// Signal box: the given volume followed by `[0, C_max] × [0, h_max]`.
    pub fn signal_bounds(&self, volume: [[f64; 2]; 3]) -> Vec<[f64; 2]> {
        let mut b = volume.to_vec();
        b.push([0.0, self.c_max]);
        b.push([0.0, self.h_max]);
        b
    }

    /// Expected pixel intensities `μ(Θ)`.
    pub fn intensity(&self, theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(theta.len(), SIGNAL_DIM);
        let (x, y, z, c, h) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
        let sigma = self.sigma(z);
        let s = self.pixel_size;
        let t = self.exposure;
        let wx: Vec<f64> = (0..self.pixels_x)
            .map(|px| gauss_mass((px as f64 * s - x) / sigma, (px as f64 * s + s - x) / sigma))
            .collect();
        let wy: Vec<f64> = (0..self.pixels_y)
            .map(|py| gauss_mass((py as f64 * s - y) / sigma, (py as f64 * s + s - y) / sigma))
            .collect();
        let background = c * t;
        let mut out = Vec::with_capacity(self.num_pixels());
        for &my in &wy {
            for &mx in &wx {
                out.push(background + h * t * mx * my);
            }
        }
        out
    }
}

/// Standard normal probability mass of `[a, b]`, evaluated on the tail
/// side to keep precision far from the mean.
pub fn gauss_mass(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        0.5 * (libm::erf(b * FRAC_1_SQRT_2) - libm::erf(a * FRAC_1_SQRT_2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize) -> MicroscopySpec {
        MicroscopySpec {
            pixels_x: n,
            pixels_y: n,
            pixel_size: 100.0,
            psf_sigma0: 120.0,
            psf_z0: 400.0,
            c_max: 50.0,
            h_max: 5000.0,
            exposure: 1.0,
        }
    }

    #[test]
    fn background_only_without_emitter() {
        let s = spec(5);
        let mu = s.intensity(&[250.0, 250.0, 0.0, 3.0, 0.0]);
        assert_eq!(mu.len(), 25);
        assert!(mu.iter().all(|&v| v == 3.0));
    }

    #[test]
    fn centred_emitter_gives_point_symmetric_image() {
        let s = spec(6);
        let mu = s.intensity(&[300.0, 300.0, 0.0, 1.0, 1000.0]);
        let n = mu.len();
        for i in 0..n {
            assert!((mu[i] - mu[n - 1 - i]).abs() < 1e-9 * mu[i].abs().max(1.0), "pixel {i}");
        }
    }

    #[test]
    fn emitter_photons_match_quadrature_of_sensor_mass() {
        // Oracle: 2-D midpoint quadrature of the Gaussian density over the sensor.
        let s = spec(4);
        let (x, y, z, h) = (170.0, 230.0, 150.0, 2000.0);
        let mu = s.intensity(&[x, y, z, 0.0, h]);
        let total: f64 = mu.iter().sum();
        let sigma = s.sigma(z);
        let density = |u: f64| (-(u * u) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        let steps = 4000;
        let (w, _) = s.extent();
        let du = w / steps as f64;
        let mx: f64 = (0..steps).map(|i| density((i as f64 + 0.5) * du - x) * du).sum();
        let my: f64 = (0..steps).map(|i| density((i as f64 + 0.5) * du - y) * du).sum();
        let expected = h * mx * my;
        assert!((total - expected).abs() < 1e-5 * expected);
        assert!(total < h);
        // a larger sensor catches more of the PSF
        let big = spec(12).intensity(&[x + 400.0, y + 400.0, z, 0.0, h]).iter().sum::<f64>();
        assert!(big > total && big < h && (h - big) / h < 1e-4);
    }

    #[test]
    fn intensity_strictly_increasing_in_flux_and_rate() {
        let s = spec(5);
        let base = [240.0, 260.0, -100.0, 5.0, 800.0];
        let mu = s.intensity(&base);
        let mut more_c = base;
        more_c[3] += 0.5;
        let mut more_h = base;
        more_h[4] += 10.0;
        for (a, b) in mu.iter().zip(s.intensity(&more_c)) {
            assert!(b > *a);
        }
        for (a, b) in mu.iter().zip(s.intensity(&more_h)) {
            assert!(b > *a);
        }
    }

    #[test]
    fn gauss_mass_tail_precision() {
        let far = gauss_mass(9.0, 10.0);
        assert!(far > 0.0 && far < 1e-18);
        assert!((gauss_mass(-1.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-15);
        assert!((gauss_mass(-10.0, -9.0) - far).abs() < 1e-30);
    }
}
