use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Scene;
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::material::Material;

const MAX_PROJECTION_ITERS: usize = 64;
/// Candidates are drawn from a shell of this half-width (fraction of the
/// bounds diagonal) before projection, which keeps the result close to
/// area-uniform.
const SHELL_FRACTION: f64 = 0.01;
const ATTEMPTS_PER_SAMPLE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSample {
    pub point: Point3,
    pub sdf: f64,
    pub true_class: Material,
    pub normal: Point3,
}

impl Scene {
    /// Uniform-in-area surface samples, deterministic in `seed`.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<Vec<GroundTruthSample>> {
        self.sample_where(n, seed, |_| true)
    }

    /// Surface samples restricted to the region of interest.
    pub fn sample_roi(&self, n: usize, seed: u64) -> Result<Vec<GroundTruthSample>> {
        self.sample_where(n, seed, |p| self.in_roi(p))
    }

    fn sample_where(&self, n: usize, seed: u64, keep: impl Fn(&Point3) -> bool) -> Result<Vec<GroundTruthSample>> {
        if n == 0 {
            return Err(Error::contract("sample count must be positive"));
        }
        let bounds = self.bounds();
        let (lo, hi) = (bounds.min_point(), bounds.max_point());
        let shell = bounds.diagonal() * SHELL_FRACTION;
        let tol = bounds.diagonal() * 1e-8;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let budget = n.saturating_mul(ATTEMPTS_PER_SAMPLE);
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            if attempts > budget {
                return Err(Error::Run(format!(
                    "surface sampling gave up after {budget} attempts with {} of {n} samples",
                    out.len()
                )));
            }
            let c = Point3::from_fn(|a, _| rng.random_range(lo[a]..hi[a]));
            if self.sdf(&c).abs() > shell {
                continue;
            }
            let Some(p) = self.project(c, tol) else {
                continue;
            };
            if !keep(&p) {
                continue;
            }
            let Some(normal) = self.normal(&p) else {
                continue;
            };
            out.push(GroundTruthSample {
                point: p,
                sdf: self.sdf(&p),
                true_class: self.material_at(&p),
                normal,
            });
        }
        Ok(out)
    }

    /// Newton steps along the numerical gradient until |sdf| < `tol`.
    pub fn project(&self, mut x: Point3, tol: f64) -> Option<Point3> {
        let h = self.gradient_step();
        for _ in 0..MAX_PROJECTION_ITERS {
            let d = self.sdf(&x);
            if d.abs() < tol {
                return Some(x);
            }
            let g = self.sdf_gradient(&x, h);
            let g2 = g.norm_squared();
            if !(g2 > 1e-12) {
                return None;
            }
            x -= g * (d / g2);
        }
        None
    }
}
