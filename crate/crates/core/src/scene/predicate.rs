use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point3;

/// Membership test over surface positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionPredicate {
    /// `normal · x >= offset`.
    HalfSpace { normal: [f64; 3], offset: f64 },
    /// Azimuth about `axis` through `origin`, counter-clockwise from
    /// `reference` (default: world x, or y when the axis is close to x),
    /// in the half-open range `[start_deg, end_deg)`. Wraps past 360.
    /// With `height`, only points whose offset from `origin` along the
    /// axis lies in `[lo, hi]` count, which makes the sector a patch.
    AngularSector {
        axis: [f64; 3],
        #[serde(default)]
        origin: [f64; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<[f64; 3]>,
        start_deg: f64,
        end_deg: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        height: Option<[f64; 2]>,
    },
    /// `min <= axis · x <= max`.
    HeightBand { axis: [f64; 3], min: f64, max: f64 },
}

fn unit(v: [f64; 3], what: &str) -> Result<Point3> {
    let p = Point3::from(v);
    let n = p.norm();
    if !(n > 1e-12 && n.is_finite()) {
        return Err(Error::Config(format!("{what} must be a non-zero finite vector")));
    }
    Ok(p / n)
}

impl RegionPredicate {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionPredicate::HalfSpace { normal, offset } => {
                unit(normal, "half_space normal")?;
                if !offset.is_finite() {
                    return Err(Error::Config("half_space offset must be finite".into()));
                }
            }
            RegionPredicate::AngularSector {
                axis,
                reference,
                start_deg,
                end_deg,
                height,
                ..
            } => {
                let a = unit(axis, "angular_sector axis")?;
                if let Some([lo, hi]) = height {
                    if !(lo <= hi) {
                        return Err(Error::Config("angular_sector height needs lo <= hi".into()));
                    }
                }
                if let Some(r) = reference {
                    let r = unit(r, "angular_sector reference")?;
                    if (r - a * r.dot(&a)).norm() < 1e-6 {
                        return Err(Error::Config("angular_sector reference is parallel to the axis".into()));
                    }
                }
                if !(start_deg.is_finite() && end_deg.is_finite() && end_deg > start_deg) {
                    return Err(Error::Config("angular_sector needs start_deg < end_deg".into()));
                }
            }
            RegionPredicate::HeightBand { axis, min, max } => {
                unit(axis, "height_band axis")?;
                if !(min <= max) {
                    return Err(Error::Config("height_band needs min <= max".into()));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &Point3) -> bool {
        match *self {
            RegionPredicate::HalfSpace { normal, offset } => Point3::from(normal).dot(x) >= offset,
            RegionPredicate::AngularSector {
                axis,
                origin,
                reference,
                start_deg,
                end_deg,
                height,
            } => {
                if let Some([lo, hi]) = height {
                    let h = Point3::from(axis).normalize().dot(&(x - Point3::from(origin)));
                    if !(lo..=hi).contains(&h) {
                        return false;
                    }
                }
                if end_deg - start_deg >= 360.0 {
                    return true;
                }
                let Some(az) = azimuth_deg(axis, origin, reference, x) else {
                    return false;
                };
                (az - start_deg).rem_euclid(360.0) < end_deg - start_deg
            }
            RegionPredicate::HeightBand { axis, min, max } => {
                let a = Point3::from(axis).normalize();
                (min..=max).contains(&a.dot(x))
            }
        }
    }
}

/// Azimuth in `[0, 360)`, or `None` on the axis itself.
fn azimuth_deg(axis: [f64; 3], origin: [f64; 3], reference: Option<[f64; 3]>, x: &Point3) -> Option<f64> {
    let a = Point3::from(axis).normalize();
    let r = reference.map(Point3::from).unwrap_or_else(|| {
        if a.x.abs() > 0.9 {
            Point3::y()
        } else {
            Point3::x()
        }
    });
    let r = (r - a * r.dot(&a)).normalize();
    let s = a.cross(&r);
    let v = x - Point3::from(origin);
    let (u, w) = (v.dot(&r), v.dot(&s));
    if u.hypot(w) < 1e-12 {
        return None;
    }
    Some(w.atan2(u).to_degrees().rem_euclid(360.0))
}
