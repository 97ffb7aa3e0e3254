//! Analytic ground-truth worlds: primitive-union geometry with material
//! regions painted on the surface and an explicit region of interest.
//!
//! Scenes are described in JSON (see `docs/scene-format.md`).

mod predicate;
mod primitive;
mod sampling;

pub use predicate::RegionPredicate;
pub use primitive::{CsgOp, Primitive, Shape};
pub use sampling::GroundTruthSample;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};
use crate::material::Material;

/// Minimum margin between geometry and scene bounds, as a fraction of the
/// geometry extent on each side.
pub const MIN_BOUNDS_MARGIN: f64 = 0.10;
const AUTO_BOUNDS_MARGIN: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRegion {
    pub predicate: RegionPredicate,
    pub class: Material,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default)]
    pub name: String,
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub regions: Vec<MaterialRegion>,
    pub default_class: Material,
    /// Surface points count toward metrics when any predicate holds;
    /// an empty list means the whole surface.
    #[serde(default)]
    pub roi: Vec<RegionPredicate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Aabb>,
    /// Largest |sdf| (m) at which a point still counts as on the surface.
    #[serde(default = "default_surface_tolerance")]
    pub surface_tolerance: f64,
}

fn default_surface_tolerance() -> f64 {
    5e-3
}

impl Scene {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| Error::Config(format!("scene: {e}")))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(Error::Config("scene has no primitives".into()));
        }
        for p in &self.primitives {
            p.validate()?;
        }
        for r in &self.regions {
            r.predicate.validate()?;
        }
        for r in &self.roi {
            r.validate()?;
        }
        if !(self.surface_tolerance > 0.0) {
            return Err(Error::Config("surface_tolerance must be positive".into()));
        }
        if let Some(b) = &self.bounds {
            b.validate()?;
            let required = self.geometry_bounds().expanded(MIN_BOUNDS_MARGIN);
            if !b.contains_box(&required) {
                return Err(Error::Config(format!(
                    "bounds must enclose the geometry with a {:.0}% margin (need at least {:?}..{:?})",
                    MIN_BOUNDS_MARGIN * 100.0,
                    required.min,
                    required.max
                )));
            }
        }
        Ok(())
    }

    /// Tight-ish box around all primitives.
    pub fn geometry_bounds(&self) -> Aabb {
        self.primitives
            .iter()
            .map(Primitive::bounds)
            .reduce(|a, b| a.union(&b))
            .expect("validated scenes have primitives")
    }

    /// Working volume: the explicit bounds, or the geometry box plus a 25% margin.
    pub fn bounds(&self) -> Aabb {
        self.bounds.unwrap_or_else(|| self.geometry_bounds().expanded(AUTO_BOUNDS_MARGIN))
    }

    /// Signed distance: minimum over primitives.
    pub fn sdf(&self, x: &Point3) -> f64 {
        self.primitives
            .iter()
            .map(|p| p.sdf(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Central-difference gradient of the scene SDF.
    pub fn sdf_gradient(&self, x: &Point3, h: f64) -> Point3 {
        let mut g = Point3::zeros();
        for a in 0..3 {
            let mut e = Point3::zeros();
            e[a] = h;
            g[a] = (self.sdf(&(x + e)) - self.sdf(&(x - e))) / (2.0 * h);
        }
        g
    }

    /// Outward unit normal, or `None` where the gradient vanishes.
    pub fn normal(&self, x: &Point3) -> Option<Point3> {
        let g = self.sdf_gradient(x, self.gradient_step());
        let n = g.norm();
        (n > 1e-12).then(|| g / n)
    }

    pub(crate) fn gradient_step(&self) -> f64 {
        self.bounds().diagonal() * 1e-6
    }

    /// Class painted at a surface position, ignoring the distance check.
    pub fn material_at(&self, x: &Point3) -> Material {
        self.regions
            .iter()
            .find(|r| r.predicate.contains(x))
            .map_or(self.default_class, |r| r.class)
    }

    /// Ground-truth class of a point on the surface. First listed region wins.
    pub fn true_material(&self, x: &Point3) -> Result<Material> {
        let d = self.sdf(x);
        if d.abs() >= self.surface_tolerance {
            return Err(Error::contract(format!(
                "point ({:.4}, {:.4}, {:.4}) is {:.4} m from the surface (tolerance {})",
                x.x, x.y, x.z, d, self.surface_tolerance
            )));
        }
        Ok(self.material_at(x))
    }

    pub fn in_roi(&self, x: &Point3) -> bool {
        self.roi.is_empty() || self.roi.iter().any(|r| r.contains(x))
    }

    /// Unit sphere at the origin, single plastic class.
    pub fn unit_sphere() -> Self {
        Scene {
            name: "unit_sphere".into(),
            primitives: vec![Primitive::new(Shape::Sphere { radius: 1.0 })],
            regions: Vec::new(),
            default_class: Material::Plastic,
            roi: Vec::new(),
            bounds: Some(Aabb::cube(1.25)),
            surface_tolerance: 5e-3,
        }
    }

    /// Unit sphere with fabric on the upper hemisphere (z ≥ 0) over plastic.
    pub fn hemisphere_sphere() -> Self {
        Scene {
            name: "hemisphere_sphere".into(),
            regions: vec![MaterialRegion {
                predicate: RegionPredicate::HalfSpace {
                    normal: [0.0, 0.0, 1.0],
                    offset: 0.0,
                },
                class: Material::Fabric,
            }],
            ..Self::unit_sphere()
        }
    }

    /// Desk-scale cylinder (r = 4 cm, h = 12 cm) covered by a checkerboard of
    /// 15° × 1 cm fabric patches over a plastic body. The ROI is the lateral
    /// surface away from the caps.
    pub fn two_material_cylinder() -> Self {
        const SECTORS: usize = 24;
        const BANDS: usize = 12;
        let (radius, half_height) = (0.04, 0.06);
        let axis = [0.0, 0.0, 1.0];
        let width = 360.0 / SECTORS as f64;
        // band edges in whole centimeters from the bottom cap
        let edge = |h: usize| (h as f64 - BANDS as f64 / 2.0) / 100.0;
        let mut regions = Vec::new();
        for a in 0..SECTORS {
            for h in (0..BANDS).filter(|h| (a + h) % 2 == 0) {
                regions.push(MaterialRegion {
                    predicate: RegionPredicate::AngularSector {
                        axis,
                        origin: [0.0; 3],
                        reference: None,
                        start_deg: width * a as f64,
                        end_deg: width * (a + 1) as f64,
                        height: Some([edge(h), edge(h + 1)]),
                    },
                    class: Material::Fabric,
                });
            }
        }
        Scene {
            name: "two_material_cylinder".into(),
            primitives: vec![Primitive::new(Shape::Cylinder { radius, half_height })],
            regions,
            default_class: Material::Plastic,
            roi: vec![RegionPredicate::HeightBand {
                axis,
                min: -0.054,
                max: 0.054,
            }],
            bounds: Some(Aabb::new([-0.07, -0.07, -0.09], [0.07, 0.07, 0.09]).expect("valid")),
            surface_tolerance: 5e-3,
        }
    }
}
