use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    /// Capped cylinder along the local z axis.
    Cylinder { radius: f64, half_height: f64 },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            Shape::Cylinder { radius, half_height } => radius > 0.0 && half_height > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("primitive sizes must be positive: {self:?}")))
        }
    }

    /// Exact SDF in the local frame.
    fn sdf(&self, p: &Point3) -> f64 {
        match *self {
            Shape::Sphere { radius } => p.norm() - radius,
            Shape::Box { half_extents } => {
                let q = p.abs() - Point3::from(half_extents);
                q.map(|v| v.max(0.0)).norm() + q.max().min(0.0)
            }
            Shape::Cylinder { radius, half_height } => {
                let dx = p.xy().norm() - radius;
                let dz = p.z.abs() - half_height;
                dx.max(dz).min(0.0) + dx.max(0.0).hypot(dz.max(0.0))
            }
        }
    }

    fn half_extents(&self) -> Point3 {
        match *self {
            Shape::Sphere { radius } => Point3::repeat(radius),
            Shape::Box { half_extents } => Point3::from(half_extents),
            Shape::Cylinder { radius, half_height } => Point3::new(radius, radius, half_height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsgOp {
    #[default]
    Union,
}

/// A posed shape. `rotation` is an axis-angle vector in radians applied
/// before `translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitive {
    pub shape: Shape,
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub rotation: [f64; 3],
    #[serde(default)]
    pub op: CsgOp,
}

impl Primitive {
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            translation: [0.0; 3],
            rotation: [0.0; 3],
            op: CsgOp::Union,
        }
    }

    pub fn with_pose(mut self, translation: [f64; 3], rotation: [f64; 3]) -> Self {
        self.translation = translation;
        self.rotation = rotation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.translation.iter().chain(&self.rotation).all(|v| v.is_finite()) {
            return Err(Error::Config("primitive pose must be finite".into()));
        }
        self.shape.validate()
    }

    fn rotation(&self) -> Rotation3<f64> {
        Rotation3::new(Point3::from(self.rotation))
    }

    pub fn sdf(&self, x: &Point3) -> f64 {
        let local = self.rotation().inverse_transform_vector(&(x - Point3::from(self.translation)));
        self.shape.sdf(&local)
    }

    /// World-space box around the posed shape (conservative under rotation).
    pub fn bounds(&self) -> Aabb {
        let r = self.rotation();
        let h = self.shape.half_extents();
        let abs = r.matrix().abs();
        let half = abs * h;
        let t = Point3::from(self.translation);
        Aabb {
            min: (t - half).into(),
            max: (t + half).into(),
        }
    }
}
