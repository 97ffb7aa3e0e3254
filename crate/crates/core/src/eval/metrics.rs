use crate::error::{Error, Result};
use crate::field::DualBranchField;
use crate::geom::Point3;
use crate::material::{Material, NUM_CLASSES};
use crate::scene::{GroundTruthSample, Scene};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSample {
    pub point: Point3,
    pub predicted: Material,
    pub truth: Material,
    pub in_roi: bool,
}

impl MapSample {
    pub fn matches(&self) -> bool {
        self.predicted == self.truth
    }
}

/// Predicted and true classes at a set of surface points.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialMap {
    pub samples: Vec<MapSample>,
}

/// Per-sample match flags over the ROI and the matching percentage.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceMask {
    /// `(sample index, matched)` for every ROI sample.
    pub entries: Vec<(usize, bool)>,
    pub matches: u64,
    pub roi_count: u64,
}

impl DifferenceMask {
    pub fn matching_pct(&self) -> f64 {
        100.0 * self.matches as f64 / self.roi_count as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassAccuracy {
    /// Percent correct per true class; `None` for classes absent from the ROI.
    pub accuracy: [Option<f64>; NUM_CLASSES],
    pub support: [u64; NUM_CLASSES],
    pub correct: [u64; NUM_CLASSES],
}

impl MaterialMap {
    pub fn roi_count(&self) -> usize {
        self.samples.iter().filter(|s| s.in_roi).count()
    }

    pub fn difference_mask(&self) -> Result<DifferenceMask> {
        let entries: Vec<(usize, bool)> = self
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.in_roi)
            .map(|(i, s)| (i, s.matches()))
            .collect();
        if entries.is_empty() {
            return Err(Error::Metric("material map has no samples inside the region of interest".into()));
        }
        let matches = entries.iter().filter(|(_, m)| *m).count() as u64;
        Ok(DifferenceMask {
            roi_count: entries.len() as u64,
            matches,
            entries,
        })
    }
}

/// `100 · matches / roi_count` over ROI samples.
pub fn matching_percentage(map: &MaterialMap) -> Result<f64> {
    map.difference_mask().map(|m| m.matching_pct())
}

/// Rounds a percentage to two decimals for reporting.
pub fn round_pct(pct: f64) -> f64 {
    (pct * 100.0).round() / 100.0
}

pub fn per_class_accuracy(map: &MaterialMap) -> ClassAccuracy {
    let mut support = [0u64; NUM_CLASSES];
    let mut correct = [0u64; NUM_CLASSES];
    for s in map.samples.iter().filter(|s| s.in_roi) {
        support[s.truth.index()] += 1;
        correct[s.truth.index()] += u64::from(s.matches());
    }
    let accuracy = std::array::from_fn(|c| (support[c] > 0).then(|| 100.0 * correct[c] as f64 / support[c] as f64));
    ClassAccuracy {
        accuracy,
        support,
        correct,
    }
}

/// Classifies each evaluation point with the field.
pub fn snapshot(field: &DualBranchField, scene: &Scene, eval_points: &[GroundTruthSample]) -> Result<MaterialMap> {
    let points: Vec<Point3> = eval_points.iter().map(|g| g.point).collect();
    let preds = field.predict_materials(&points)?;
    let samples = eval_points
        .iter()
        .zip(preds)
        .map(|(g, (class, _))| {
            Ok(MapSample {
                point: g.point,
                predicted: Material::from_index(class)?,
                truth: g.true_class,
                in_roi: scene.in_roi(&g.point),
            })
        })
        .collect::<Result<_>>()?;
    Ok(MaterialMap { samples })
}
