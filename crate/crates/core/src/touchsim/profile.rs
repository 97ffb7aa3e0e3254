use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{Material, NUM_CLASSES};

pub type ConfusionMatrix = [[f64; NUM_CLASSES]; NUM_CLASSES];

const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Finger {
    Index = 0,
    Middle = 1,
    Ring = 2,
    Thumb = 3,
}

impl Finger {
    pub const ALL: [Finger; 4] = [Finger::Index, Finger::Middle, Finger::Ring, Finger::Thumb];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::Index {
            context: "finger",
            index,
            limit: 4,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Thumb => "thumb",
        }
    }
}

impl std::fmt::Display for Finger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Diagonal = accuracy, the remainder split evenly over the other classes.
pub fn confusion_from_accuracy(per_class_accuracy: &[f64; NUM_CLASSES]) -> Result<ConfusionMatrix> {
    let mut m = [[0.0; NUM_CLASSES]; NUM_CLASSES];
    for (c, &acc) in per_class_accuracy.iter().enumerate() {
        if !(0.0..=1.0).contains(&acc) {
            return Err(Error::contract(format!(
                "accuracy for class {} is {acc}, outside [0, 1]",
                Material::ALL[c]
            )));
        }
        let off = (1.0 - acc) / (NUM_CLASSES - 1) as f64;
        for (k, v) in m[c].iter_mut().enumerate() {
            *v = if k == c { acc } else { off };
        }
    }
    Ok(m)
}

/// One fingertip sensor: classifier noise plus where and how often it touches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorProfile {
    pub finger: Finger,
    /// Probability of reporting the true class, indexed plastic, metal, fabric, wood.
    pub per_class_accuracy: [f64; NUM_CLASSES],
    /// Full row-stochastic override; its diagonal must match `per_class_accuracy`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    /// Expected contacts per timestep.
    pub contact_rate: f64,
    /// Azimuth of the fingertip in the hand frame (degrees).
    pub azimuth_deg: f64,
    /// Elevation band, seen from the rotation center (degrees).
    pub elevation_deg: [f64; 2],
}

impl SensorProfile {
    /// Paper-reported accuracies where stated; remaining entries are defaults.
    pub fn default_for(finger: Finger) -> Self {
        let (acc, azimuth, elevation) = match finger {
            // wood 0.75 is the stated index peak; plastic and metal are defaults
            Finger::Index => ([1.0, 0.6, 0.9, 0.75], 20.0, [18.0, 56.0]),
            // stated: none; all defaults, kept below the index and ring fingers
            Finger::Middle => ([1.0, 0.5, 0.88, 0.5], 0.0, [-18.0, 18.0]),
            // stated: metal 0.74, fabric 0.95
            Finger::Ring => ([1.0, 0.74, 0.95, 0.7], -20.0, [-56.0, -18.0]),
            // stated: metal 0.32, fabric 0.83, wood 0.23
            Finger::Thumb => ([0.85, 0.32, 0.83, 0.23], 180.0, [-40.0, 40.0]),
        };
        Self {
            finger,
            per_class_accuracy: acc,
            confusion: None,
            contact_rate: 8.0,
            azimuth_deg: azimuth,
            elevation_deg: elevation,
        }
    }

    pub fn defaults() -> Vec<Self> {
        Finger::ALL.into_iter().map(Self::default_for).collect()
    }

    /// Noise-free sensor with the same contact geometry.
    pub fn perfect(finger: Finger) -> Self {
        Self {
            per_class_accuracy: [1.0; NUM_CLASSES],
            ..Self::default_for(finger)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.confusion_rows()?;
        for (c, row) in m.iter().enumerate() {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::Config(format!("{} confusion row {c} has entries outside [0, 1]", self.finger)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("{} confusion row {c} sums to {sum}", self.finger)));
            }
            if (row[c] - self.per_class_accuracy[c]).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!(
                    "{} confusion diagonal {c} is {} but accuracy is {}",
                    self.finger, row[c], self.per_class_accuracy[c]
                )));
            }
        }
        if !(self.contact_rate >= 0.0 && self.contact_rate.is_finite()) {
            return Err(Error::Config(format!("{} contact_rate must be non-negative", self.finger)));
        }
        let [lo, hi] = self.elevation_deg;
        if !(lo < hi && lo >= -90.0 && hi <= 90.0) || !self.azimuth_deg.is_finite() {
            return Err(Error::Config(format!("{} contact band is malformed", self.finger)));
        }
        Ok(())
    }

    pub fn confusion_rows(&self) -> Result<ConfusionMatrix> {
        match self.confusion {
            Some(m) => Ok(m),
            None => confusion_from_accuracy(&self.per_class_accuracy).map_err(|e| match e {
                Error::Contract(msg) => Error::Config(format!("{}: {msg}", self.finger)),
                other => other,
            }),
        }
    }
}

/// Draws a reported class from the confusion row of `truth`.
pub fn draw_label(rows: &ConfusionMatrix, truth: Material, rng: &mut impl Rng) -> Material {
    let u: f64 = rng.random();
    let row = &rows[truth.index()];
    let mut acc = 0.0;
    for (k, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return Material::ALL[k];
        }
    }
    // rounding left a sliver above the last cumulative sum
    let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(truth.index());
    Material::ALL[last]
}
