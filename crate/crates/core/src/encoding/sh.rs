//! Real spherical-harmonics encoding of directions, bands 0..=3.
//!
//! Components are ordered by band `l`, then `m` from `-l` to `l`, and use
//! the orthonormal real basis with the Condon-Shortley phase.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::nn::Tensor;

pub const MAX_BANDS: usize = 4;

/// Encodes positions by the direction from `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShEncoding {
    bands: usize,
    center: [f64; 3],
}

/// Writes `bands²` basis values for unit direction `d` into `out`.
pub fn sh_basis(d: [f64; 3], bands: usize, out: &mut [f32]) {
    let [x, y, z] = d;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let all = [
        0.282_094_791_773_878_14,
        -0.488_602_511_902_919_9 * y,
        0.488_602_511_902_919_9 * z,
        -0.488_602_511_902_919_9 * x,
        1.092_548_430_592_079_2 * x * y,
        -1.092_548_430_592_079_2 * y * z,
        0.946_174_695_757_56 * zz - 0.315_391_565_252_52,
        -1.092_548_430_592_079_2 * x * z,
        0.546_274_215_296_039_6 * (xx - yy),
        0.590_043_589_926_643_5 * y * (3.0 * xx - yy),
        2.890_611_442_640_554 * x * y * z,
        0.457_045_799_464_465_7 * y * (5.0 * zz - 1.0),
        0.373_176_332_590_115_4 * z * (5.0 * zz - 3.0),
        0.457_045_799_464_465_7 * x * (5.0 * zz - 1.0),
        1.445_305_721_320_277 * z * (xx - yy),
        0.590_043_589_926_643_5 * x * (xx - 3.0 * yy),
    ];
    for (o, v) in out.iter_mut().zip(&all[..bands * bands]) {
        *o = *v as f32;
    }
}

impl ShEncoding {
    pub fn new(bands: usize, center: Point3) -> Result<Self> {
        if !(1..=MAX_BANDS).contains(&bands) {
            return Err(Error::Config(format!("sh bands must lie in 1..={MAX_BANDS}, got {bands}")));
        }
        Ok(Self {
            bands,
            center: center.into(),
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn center(&self) -> Point3 {
        Point3::from(self.center)
    }

    pub fn output_dim(&self) -> usize {
        self.bands * self.bands
    }

    /// Basis values of the direction from the center to `p`.
    pub fn encode_point(&self, p: &Point3, out: &mut [f32]) -> Result<()> {
        let v = p - self.center();
        let n = v.norm();
        if !(n > 1e-12) {
            return Err(Error::DegenerateDirection);
        }
        let d = v / n;
        sh_basis([d.x, d.y, d.z], self.bands, out);
        Ok(())
    }

    /// `B × bands²` encoding of a batch.
    pub fn encode(&self, points: &[Point3]) -> Result<Tensor> {
        let dim = self.output_dim();
        let mut values = vec![0.0f32; points.len() * dim];
        for (p, out) in points.iter().zip(values.chunks_mut(dim)) {
            self.encode_point(p, out)?;
        }
        Tensor::new(vec![points.len(), dim], values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_band_zero() {
        let enc = ShEncoding::new(4, Point3::zeros()).unwrap();
        let mut out = [0.0f32; 16];
        for p in [Point3::new(1.0, 2.0, -3.0), Point3::new(0.0, 0.0, -1.0)] {
            enc.encode_point(&p, &mut out).unwrap();
            assert!((f64::from(out[0]) - 1.0 / (2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-7);
        }
    }

    #[test]
    fn pole_values_of_band_one() {
        let enc = ShEncoding::new(4, Point3::zeros()).unwrap();
        let mut out = [0.0f32; 16];
        enc.encode_point(&Point3::new(0.0, 0.0, 1.0), &mut out).unwrap();
        let y10 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((f64::from(out[2]) - y10).abs() < 1e-7);
        assert_eq!(out[1], 0.0);
        assert_eq!(out[3], 0.0);
    }

    #[test]
    fn center_is_degenerate() {
        let c = Point3::new(0.1, 0.2, 0.3);
        let enc = ShEncoding::new(4, c).unwrap();
        assert!(matches!(enc.encode(&[c]), Err(Error::DegenerateDirection)));
    }

    #[test]
    fn band_count_controls_width() {
        assert_eq!(ShEncoding::new(3, Point3::zeros()).unwrap().output_dim(), 9);
        assert_eq!(ShEncoding::new(4, Point3::zeros()).unwrap().output_dim(), 16);
        assert!(ShEncoding::new(5, Point3::zeros()).is_err());
        assert!(ShEncoding::new(0, Point3::zeros()).is_err());
    }
}
