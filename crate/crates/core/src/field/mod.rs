//! The dual-branch field: signed distance from a hash-grid MLP, material
//! logits from a second MLP fed with a direction encoding of the query and
//! the geometry branch's last hidden activation.

mod loss;

pub use loss::{classify, LossNodes, LossWeights, TrainingBatch};

use serde::{Deserialize, Serialize};

use crate::encoding::{HashGridConfig, HashGridEncoding, ShEncoding};
use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};
use crate::material::NUM_CLASSES;
use crate::nn::{Mlp, NodeId, ParamStore, Tape, Tensor};

const FORWARD_CHUNK: usize = 2048;

/// What the material branch sees of the query position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialInput {
    /// Spherical-harmonics encoding of the direction from the bounds center.
    SphericalHarmonics,
    /// The raw object-frame coordinates.
    RawPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub hash_grid: HashGridConfig,
    pub sh_bands: usize,
    pub hidden_width: usize,
    pub sdf_hidden_layers: usize,
    pub material_hidden_layers: usize,
    pub num_classes: usize,
    /// Concatenate the geometry branch's last hidden activation into the
    /// material branch input.
    pub feature_concat: bool,
    pub material_input: MaterialInput,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            hash_grid: HashGridConfig::default(),
            sh_bands: 4,
            hidden_width: 64,
            sdf_hidden_layers: 2,
            material_hidden_layers: 1,
            num_classes: NUM_CLASSES,
            feature_concat: true,
            material_input: MaterialInput::SphericalHarmonics,
        }
    }
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        self.hash_grid.validate()?;
        if !(1..=crate::encoding::MAX_BANDS).contains(&self.sh_bands) {
            return Err(Error::Config(format!("sh_bands must lie in 1..=4, got {}", self.sh_bands)));
        }
        if self.hidden_width == 0 || self.sdf_hidden_layers == 0 {
            return Err(Error::Config("the geometry branch needs at least one non-empty hidden layer".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        Ok(())
    }

    /// Width of z(x), the geometry branch's last hidden layer.
    pub fn feature_dim(&self) -> usize {
        self.hidden_width
    }

    pub fn material_input_width(&self) -> usize {
        let position = match self.material_input {
            MaterialInput::SphericalHarmonics => self.sh_bands * self.sh_bands,
            MaterialInput::RawPosition => 3,
        };
        position + if self.feature_concat { self.feature_dim() } else { 0 }
    }

    fn sdf_widths(&self) -> Vec<usize> {
        let mut w = vec![self.hash_grid.output_dim()];
        w.extend(std::iter::repeat_n(self.hidden_width, self.sdf_hidden_layers));
        w.push(1);
        w
    }

    fn material_widths(&self) -> Vec<usize> {
        let mut w = vec![self.material_input_width()];
        w.extend(std::iter::repeat_n(self.hidden_width, self.material_hidden_layers));
        w.push(self.num_classes);
        w
    }
}

/// Per-point output of the field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldOutput {
    /// Signed distance in meters, negative inside.
    pub sdf: f32,
    pub logits: Vec<f32>,
    /// Last hidden activation of the geometry branch.
    pub feature: Vec<f32>,
}

/// Tape nodes of one batched forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldNodes {
    /// `B × 1`
    pub sdf: NodeId,
    /// `B × num_classes`
    pub logits: NodeId,
    /// `B × hidden_width`
    pub feature: NodeId,
    /// `B × material_input_width`
    pub material_input: NodeId,
    /// Queries that fell outside the bounds and were clamped.
    pub clamped: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualBranchField {
    config: FieldConfig,
    bounds: Aabb,
    store: ParamStore,
    hash: HashGridEncoding,
    sh: ShEncoding,
    sdf_mlp: Mlp,
    material_mlp: Mlp,
}

impl DualBranchField {
    pub fn new(config: FieldConfig, bounds: Aabb, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let hash = HashGridEncoding::new(config.hash_grid, bounds, &mut store, seed)?;
        let sdf_mlp = Mlp::new(&mut store, "sdf", &config.sdf_widths(), seed ^ 0x5df0);
        let material_mlp = Mlp::new(&mut store, "material", &config.material_widths(), seed ^ 0x3a7e);
        let sh = ShEncoding::new(config.sh_bands, bounds.center())?;
        Ok(Self {
            config,
            bounds,
            store,
            hash,
            sh,
            sdf_mlp,
            material_mlp,
        })
    }

    /// Rebuilds a field around previously saved parameters.
    pub fn from_store(config: FieldConfig, bounds: Aabb, store: ParamStore) -> Result<Self> {
        config.validate()?;
        let hash = HashGridEncoding::bind(config.hash_grid, bounds, &store)?;
        let sdf_mlp = Mlp::bind(&store, "sdf", &config.sdf_widths())?;
        let material_mlp = Mlp::bind(&store, "material", &config.material_widths())?;
        for mlp in [&sdf_mlp, &material_mlp] {
            for (&(w, _), win) in mlp.layers().iter().zip(mlp.widths().windows(2)) {
                if store.tensor(w).shape() != win {
                    return Err(Error::contract(format!(
                        "parameter `{}` has shape {:?}, configuration expects {:?}",
                        store.tensor_name(w),
                        store.tensor(w).shape(),
                        win
                    )));
                }
            }
        }
        let sh = ShEncoding::new(config.sh_bands, bounds.center())?;
        Ok(Self {
            config,
            bounds,
            store,
            hash,
            sh,
            sdf_mlp,
            material_mlp,
        })
    }

    pub fn config(&self) -> &FieldConfig {
        &self.config
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn hash_encoding(&self) -> &HashGridEncoding {
        &self.hash
    }

    pub fn sh_encoding(&self) -> &ShEncoding {
        &self.sh
    }

    pub fn sdf_mlp(&self) -> &Mlp {
        &self.sdf_mlp
    }

    pub fn material_mlp(&self) -> &Mlp {
        &self.material_mlp
    }

    pub fn material_input_width(&self) -> usize {
        self.config.material_input_width()
    }

    /// Geometry branch only.
    pub fn forward_sdf(&self, tape: &mut Tape, points: &[Point3]) -> Result<(NodeId, NodeId, Vec<bool>)> {
        let (enc, clamped) = self.hash.encode(tape, &self.store, points)?;
        let (sdf, feature) = self.sdf_mlp.forward(tape, &self.store, enc)?;
        Ok((sdf, feature, clamped))
    }

    /// Records both branches for a batch.
    pub fn forward_tape(&self, tape: &mut Tape, points: &[Point3]) -> Result<FieldNodes> {
        let (sdf, feature, clamped) = self.forward_sdf(tape, points)?;
        let position = match self.config.material_input {
            MaterialInput::SphericalHarmonics => tape.input(self.sh.encode(points)?),
            MaterialInput::RawPosition => {
                let vals = points.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect();
                tape.input(Tensor::new(vec![points.len(), 3], vals)?)
            }
        };
        let material_input = if self.config.feature_concat {
            tape.concat(position, feature)?
        } else {
            position
        };
        let (logits, _) = self.material_mlp.forward(tape, &self.store, material_input)?;
        Ok(FieldNodes {
            sdf,
            logits,
            feature,
            material_input,
            clamped,
        })
    }

    /// Evaluates the field without keeping the tape.
    pub fn forward(&self, points: &[Point3]) -> Result<Vec<FieldOutput>> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(FORWARD_CHUNK) {
            let mut tape = Tape::new();
            let nodes = self.forward_tape(&mut tape, chunk)?;
            let (sdf, logits, feature) = (tape.value(nodes.sdf), tape.value(nodes.logits), tape.value(nodes.feature));
            for r in 0..chunk.len() {
                out.push(FieldOutput {
                    sdf: sdf.values()[r],
                    logits: logits.row(r).to_vec(),
                    feature: feature.row(r).to_vec(),
                });
            }
        }
        Ok(out)
    }

    /// Signed distances only; skips the material branch.
    pub fn sdf(&self, points: &[Point3]) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(FORWARD_CHUNK) {
            let mut tape = Tape::new();
            let (sdf, _, _) = self.forward_sdf(&mut tape, chunk)?;
            out.extend_from_slice(tape.value(sdf).values());
        }
        Ok(out)
    }

    /// Most likely class (ties go to the lowest index) and its softmax probabilities.
    pub fn predict_material(&self, point: &Point3) -> Result<(usize, Vec<f32>)> {
        let out = self.forward(std::slice::from_ref(point))?;
        Ok(classify(&out[0].logits))
    }

    /// Batched [`DualBranchField::predict_material`].
    pub fn predict_materials(&self, points: &[Point3]) -> Result<Vec<(usize, Vec<f32>)>> {
        Ok(self.forward(points)?.iter().map(|o| classify(&o.logits)).collect())
    }
}
