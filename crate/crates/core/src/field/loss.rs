use serde::{Deserialize, Serialize};

use super::DualBranchField;
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::nn::{NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub sdf_weight: f32,
    pub material_weight: f32,
    /// Distance band (m) to which both predictions and targets are clamped.
    pub truncation: f32,
    pub eikonal_weight: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            sdf_weight: 1.0,
            material_weight: 1.0,
            truncation: 0.02,
            eikonal_weight: 0.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.sdf_weight >= 0.0 && self.material_weight >= 0.0 && self.eikonal_weight >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::Config("truncation must be positive".into()));
        }
        Ok(())
    }
}

/// One optimization batch. Rows without a label only supervise geometry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingBatch {
    pub points: Vec<Point3>,
    pub sdf_targets: Vec<f32>,
    pub labels: Vec<Option<usize>>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossNodes {
    pub total: NodeId,
    pub sdf: NodeId,
    pub material: NodeId,
    pub eikonal: Option<NodeId>,
}

/// Argmax with ties resolved toward the lowest index, plus softmax.
pub fn classify(logits: &[f32]) -> (usize, Vec<f32>) {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate() {
        if v > logits[best] {
            best = i;
        }
    }
    let max = f64::from(logits[best]);
    let exps: Vec<f64> = logits.iter().map(|&v| (f64::from(v) - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    (best, exps.iter().map(|e| (e / sum) as f32).collect())
}

/// Truncated L1 between predicted and target distances, scaled by `sdf_weight`.
pub fn sdf_loss(tape: &mut Tape, pred: NodeId, targets: &[f32], weights: &LossWeights) -> Result<NodeId> {
    let l1 = tape.clamped_l1(pred, targets, weights.truncation)?;
    Ok(tape.scale(l1, weights.sdf_weight))
}

/// Cross-entropy over labeled rows, scaled by `material_weight`.
pub fn material_loss(tape: &mut Tape, logits: NodeId, labels: &[Option<usize>], weights: &LossWeights) -> Result<NodeId> {
    let ce = tape.masked_softmax_cross_entropy(logits, labels)?;
    Ok(tape.scale(ce, weights.material_weight))
}

impl DualBranchField {
    /// `mean((|∇sdf|² − 1)²)` with the gradient taken by central differences
    /// of step `h`, differentiable with respect to all geometry parameters.
    pub fn eikonal_loss(&self, tape: &mut Tape, points: &[Point3], h: f64) -> Result<NodeId> {
        let mut squared = None;
        for axis in 0..3 {
            let mut offset = Point3::zeros();
            offset[axis] = h;
            let plus: Vec<Point3> = points.iter().map(|p| p + offset).collect();
            let minus: Vec<Point3> = points.iter().map(|p| p - offset).collect();
            let (fp, _, _) = self.forward_sdf(tape, &plus)?;
            let (fm, _, _) = self.forward_sdf(tape, &minus)?;
            let diff = tape.sub(fp, fm)?;
            let g = tape.scale(diff, (0.5 / h) as f32);
            let g2 = tape.mul(g, g)?;
            squared = Some(match squared {
                None => g2,
                Some(acc) => tape.add(acc, g2)?,
            });
        }
        let residual = tape.add_scalar(squared.expect("three axes"), -1.0);
        let r2 = tape.mul(residual, residual)?;
        Ok(tape.mean(r2))
    }

    /// Records the weighted training objective for a batch.
    pub fn total_loss(&self, tape: &mut Tape, batch: &TrainingBatch, weights: &LossWeights) -> Result<LossNodes> {
        if batch.sdf_targets.len() != batch.len() || batch.labels.len() != batch.len() {
            return Err(Error::Dimension {
                axis: "training batch columns",
                expected: batch.len(),
                found: batch.sdf_targets.len().min(batch.labels.len()),
            });
        }
        let nodes = self.forward_tape(tape, &batch.points)?;
        let sdf = sdf_loss(tape, nodes.sdf, &batch.sdf_targets, weights)?;
        let material = material_loss(tape, nodes.logits, &batch.labels, weights)?;
        let mut total = tape.add(sdf, material)?;
        let mut eikonal = None;
        if weights.eikonal_weight > 0.0 {
            let h = self.bounds().diagonal() * 1e-3;
            let e = self.eikonal_loss(tape, &batch.points, h)?;
            let e = tape.scale(e, weights.eikonal_weight);
            total = tape.add(total, e)?;
            eikonal = Some(e);
        }
        Ok(LossNodes {
            total,
            sdf,
            material,
            eikonal,
        })
    }
}
