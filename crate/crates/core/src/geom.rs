use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the object frame, in meters.
pub type Point3 = Vector3<f64>;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    pub fn cube(half: f64) -> Self {
        Self {
            min: [-half; 3],
            max: [half; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            if !(self.min[a].is_finite() && self.max[a].is_finite() && self.max[a] > self.min[a]) {
                return Err(Error::Config(format!(
                    "bounds axis {a}: min {} must be below max {}",
                    self.min[a], self.max[a]
                )));
            }
        }
        Ok(())
    }

    pub fn min_point(&self) -> Point3 {
        Point3::from(self.min)
    }

    pub fn max_point(&self) -> Point3 {
        Point3::from(self.max)
    }

    pub fn center(&self) -> Point3 {
        (self.min_point() + self.max_point()) * 0.5
    }

    pub fn extent(&self) -> Point3 {
        self.max_point() - self.min_point()
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        for a in 0..3 {
            out.min[a] = out.min[a].min(other.min[a]);
            out.max[a] = out.max[a].max(other.max[a]);
        }
        out
    }

    /// Grows every axis by `fraction` of its extent on both sides.
    pub fn expanded(&self, fraction: f64) -> Aabb {
        let e = self.extent();
        let mut out = *self;
        for a in 0..3 {
            out.min[a] -= e[a] * fraction;
            out.max[a] += e[a] * fraction;
        }
        out
    }

    /// Maps `p` into the unit cube, clamping. Returns whether clamping occurred.
    pub fn normalize(&self, p: &Point3) -> ([f64; 3], bool) {
        let mut u = [0.0; 3];
        let mut clamped = false;
        for a in 0..3 {
            let v = (p[a] - self.min[a]) / (self.max[a] - self.min[a]);
            if !(0.0..=1.0).contains(&v) {
                clamped = true;
            }
            u[a] = v.clamp(0.0, 1.0);
        }
        (u, clamped)
    }
}
