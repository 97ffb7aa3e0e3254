use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::profile::{draw_label, ConfusionMatrix, Finger, SensorProfile};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::material::Material;
use crate::scene::Scene;

const RAY_ATTEMPTS: usize = 32;
const MAX_MARCH_STEPS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub profiles: Vec<SensorProfile>,
    /// Object rotation per timestep (degrees).
    pub angular_velocity_deg: f64,
    pub rotation_axis: [f64; 3],
    /// Rotation center; the scene bounds center when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 3]>,
    /// Azimuthal jitter window around each fingertip (degrees).
    pub azimuth_window_deg: f64,
    /// Standard deviation of the contact position noise (m), truncated at 3σ.
    pub position_noise: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            profiles: SensorProfile::defaults(),
            angular_velocity_deg: 0.6,
            rotation_axis: [0.0, 0.0, 1.0],
            center: None,
            azimuth_window_deg: 10.0,
            position_noise: 1e-3,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.profiles.is_empty() {
            return Err(Error::Config("at least one sensor profile is required".into()));
        }
        for (i, p) in self.profiles.iter().enumerate() {
            p.validate()?;
            if self.profiles[..i].iter().any(|q| q.finger == p.finger) {
                return Err(Error::Config(format!("duplicate sensor profile for {}", p.finger)));
            }
        }
        let axis = Point3::from(self.rotation_axis);
        if !(axis.norm() > 1e-12) {
            return Err(Error::Config("rotation_axis must be non-zero".into()));
        }
        if !self.angular_velocity_deg.is_finite() {
            return Err(Error::Config("angular_velocity_deg must be finite".into()));
        }
        if !(self.azimuth_window_deg > 0.0 && self.azimuth_window_deg <= 360.0) {
            return Err(Error::Config("azimuth_window_deg must lie in (0, 360]".into()));
        }
        if !(self.position_noise >= 0.0 && self.position_noise.is_finite()) {
            return Err(Error::Config("position_noise must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactObservation {
    pub timestep: u32,
    pub finger: Finger,
    pub point: Point3,
    pub noisy_label: Material,
    /// Kept for evaluation only.
    pub true_label: Material,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactBatch {
    pub timestep: u32,
    pub observations: Vec<ContactObservation>,
}

/// Object-frame cylindrical coordinates around the rotation axis.
#[derive(Debug, Clone, Copy)]
struct Frame {
    center: Point3,
    axis: Point3,
    r: Point3,
    s: Point3,
}

impl Frame {
    fn new(center: Point3, axis: [f64; 3]) -> Self {
        let a = Point3::from(axis).normalize();
        let r0 = if a.x.abs() > 0.9 { Point3::y() } else { Point3::x() };
        let r = (r0 - a * r0.dot(&a)).normalize();
        Self {
            center,
            axis: a,
            r,
            s: a.cross(&r),
        }
    }

    fn direction(&self, azimuth_deg: f64, elevation_deg: f64) -> Point3 {
        let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
        (self.r * az.cos() + self.s * az.sin()) * el.cos() + self.axis * el.sin()
    }

    /// (azimuth, elevation) in degrees, azimuth in [0, 360).
    fn angles(&self, p: &Point3) -> (f64, f64) {
        let v = p - self.center;
        let (u, w, h) = (v.dot(&self.r), v.dot(&self.s), v.dot(&self.axis));
        (w.atan2(u).to_degrees().rem_euclid(360.0), h.atan2(u.hypot(w)).to_degrees())
    }
}

/// Generates contact batches one timestep at a time.
pub struct Simulator<'a> {
    scene: &'a Scene,
    config: SimConfig,
    confusion: Vec<ConfusionMatrix>,
    frame: Frame,
    reach: f64,
    tol: f64,
    rng: ChaCha8Rng,
    next_step: u32,
}

impl<'a> Simulator<'a> {
    pub fn new(scene: &'a Scene, config: SimConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let bounds = scene.bounds();
        let center = config.center.map(Point3::from).unwrap_or_else(|| bounds.center());
        let confusion = config
            .profiles
            .iter()
            .map(SensorProfile::confusion_rows)
            .collect::<Result<_>>()?;
        Ok(Self {
            scene,
            frame: Frame::new(center, config.rotation_axis),
            confusion,
            config,
            reach: bounds.diagonal(),
            tol: bounds.diagonal() * 1e-8,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_step: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Object rotation (degrees) at `timestep`.
    pub fn rotation_deg(&self, timestep: u32) -> f64 {
        self.config.angular_velocity_deg * f64::from(timestep)
    }

    /// Outermost surface crossing along the ray toward the center from direction `d`.
    fn cast(&self, d: &Point3) -> Option<Point3> {
        let mut t = 0.0;
        let start = self.frame.center + d * self.reach;
        for _ in 0..MAX_MARCH_STEPS {
            let p = start - d * t;
            let f = self.scene.sdf(&p);
            if f.abs() < self.tol {
                return Some(p);
            }
            if f < 0.0 || t > self.reach {
                return None;
            }
            t += f;
        }
        None
    }

    fn noise(&mut self) -> Point3 {
        let sigma = self.config.position_noise;
        if sigma == 0.0 {
            return Point3::zeros();
        }
        loop {
            let v = Point3::from_fn(|_, _| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                z * sigma
            });
            if v.norm() < 3.0 * sigma {
                return v;
            }
        }
    }

    /// Simulates the next timestep.
    pub fn step(&mut self) -> Result<ContactBatch> {
        let t = self.next_step;
        self.next_step += 1;
        let rot = self.rotation_deg(t);
        let half = self.config.azimuth_window_deg * 0.5;
        let mut observations = Vec::new();
        for fi in 0..self.config.profiles.len() {
            let p = &self.config.profiles[fi];
            let (finger, az0, [lo, hi], rate) = (p.finger, p.azimuth_deg, p.elevation_deg, p.contact_rate);
            let whole = rate.floor();
            let count = whole as usize + usize::from(self.rng.random::<f64>() < rate - whole);
            for _ in 0..count {
                let mut hit = None;
                for _ in 0..RAY_ATTEMPTS {
                    let az = az0 - rot + self.rng.random_range(-half..=half);
                    let el = self.rng.random_range(lo..=hi);
                    if let Some(s) = self.cast(&self.frame.direction(az, el)) {
                        hit = Some(s);
                        break;
                    }
                }
                let Some(surface) = hit else {
                    return Err(Error::Run(format!(
                        "{finger} finger found no surface in its contact band at step {t}"
                    )));
                };
                let truth = self.scene.material_at(&surface);
                let noisy_label = draw_label(&self.confusion[fi], truth, &mut self.rng);
                let point = surface + self.noise();
                observations.push(ContactObservation {
                    timestep: t,
                    finger,
                    point,
                    noisy_label,
                    true_label: truth,
                });
            }
        }
        Ok(ContactBatch {
            timestep: t,
            observations,
        })
    }

    /// Whether some finger's band sweeps over `p` during timesteps `0..steps`.
    pub fn band_covers(&self, p: &Point3, steps: u32) -> bool {
        let (az, el) = self.frame.angles(p);
        let half = self.config.azimuth_window_deg * 0.5;
        let w = self.config.angular_velocity_deg;
        self.config.profiles.iter().any(|prof| {
            let [lo, hi] = prof.elevation_deg;
            if el < lo || el > hi {
                return false;
            }
            (0..steps).any(|t| {
                let c = prof.azimuth_deg - w * f64::from(t);
                let d = (az - c + 180.0).rem_euclid(360.0) - 180.0;
                d.abs() <= half
            })
        })
    }
}

/// Runs the simulator for `steps` timesteps.
pub fn simulate_run(scene: &Scene, config: &SimConfig, steps: u32, seed: u64) -> Result<Vec<ContactBatch>> {
    if steps == 0 {
        return Err(Error::contract("simulate_run needs at least one step"));
    }
    let mut sim = Simulator::new(scene, config.clone(), seed)?;
    (0..steps).map(|_| sim.step()).collect()
}

/// Fraction of `reference` points swept by some contact band within `steps`.
pub fn band_coverage(scene: &Scene, config: &SimConfig, steps: u32, reference: &[Point3]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Metric("empty coverage reference set".into()));
    }
    let sim = Simulator::new(scene, config.clone(), 0)?;
    let covered = reference.iter().filter(|p| sim.band_covers(p, steps)).count();
    Ok(covered as f64 / reference.len() as f64)
}
