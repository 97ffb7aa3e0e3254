use std::fmt::Write as _;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::buffer::{ingest, FreeSpace, ReplayBuffer};
use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{matching_percentage, snapshot, MaterialMap};
use crate::field::{DualBranchField, TrainingBatch};
use crate::geom::Point3;
use crate::nn::{AdamState, Tape};
use crate::scene::{GroundTruthSample, Scene};
use crate::touchsim::{group_batches, ContactBatch, ContactObservation, Simulator};

pub const REPORT_HEADER: &str = "timestep,matching_pct,sdf_loss,material_loss";

// independent ChaCha streams under the run seed
const STREAM_REPLAY: u64 = 1;
const STREAM_INGEST: u64 = 2;
const STREAM_EVAL: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The fixed ROI evaluation set a run with `seed` scores its snapshots on.
pub fn evaluation_points(scene: &Scene, n: usize, seed: u64) -> Result<Vec<GroundTruthSample>> {
    scene.sample_roi(n, rng_for(seed, STREAM_EVAL).random())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    /// Timesteps consumed when the snapshot was taken.
    pub timestep: u32,
    pub matching_pct: f64,
    /// Mean weighted losses over the optimization steps since the previous snapshot.
    pub sdf_loss: f64,
    pub material_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub rows: Vec<SnapshotRow>,
    pub stopped_early: bool,
    pub timesteps: u32,
}

impl RunReport {
    pub fn final_matching_pct(&self) -> Option<f64> {
        self.rows.last().map(|r| r.matching_pct)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.2},{:.6},{:.6}",
                r.timestep, r.matching_pct, r.sdf_loss, r.material_loss
            );
        }
        s
    }
}

/// Where contact batches come from.
#[derive(Debug, Clone, Copy)]
pub enum StreamSource<'a> {
    Simulate,
    /// Recorded observations, regrouped by timestep.
    Replay(&'a [ContactObservation]),
}

/// Online mapping state for one run.
pub struct Mapper<'s> {
    config: RunConfig,
    scene: &'s Scene,
    field: DualBranchField,
    adam: AdamState,
    buffer: ReplayBuffer,
    free: FreeSpace,
    replay_rng: ChaCha8Rng,
    ingest_rng: ChaCha8Rng,
    eval_points: Vec<GroundTruthSample>,
    timestep: u32,
    losses: (f64, f64, u32),
    best: f64,
    plateau: u32,
    report: RunReport,
}

impl<'s> Mapper<'s> {
    pub fn new(config: RunConfig, scene: &'s Scene) -> Result<Self> {
        config.validate()?;
        let bounds = scene.bounds();
        let field = DualBranchField::new(config.field, bounds, config.field_seed())?;
        let adam = AdamState::new(config.adam(), field.params());
        let eval_points = evaluation_points(scene, config.eval_points, config.seed)?;
        Ok(Self {
            buffer: ReplayBuffer::new(config.replay_capacity)?,
            free: FreeSpace {
                per_contact: config.free_space_per_contact,
                min_distance: config.free_space_min_distance,
                max_distance: f64::from(config.loss.truncation),
            },
            replay_rng: rng_for(config.seed, STREAM_REPLAY),
            ingest_rng: rng_for(config.seed, STREAM_INGEST),
            eval_points,
            field,
            adam,
            scene,
            config,
            timestep: 0,
            losses: (0.0, 0.0, 0),
            best: f64::NEG_INFINITY,
            plateau: 0,
            report: RunReport::default(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn field(&self) -> &DualBranchField {
        &self.field
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn eval_points(&self) -> &[GroundTruthSample] {
        &self.eval_points
    }

    pub fn timestep(&self) -> u32 {
        self.timestep
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn into_parts(self) -> (DualBranchField, AdamState, RunReport) {
        (self.field, self.adam, self.report)
    }

    pub fn ingest(&mut self, batch: &ContactBatch) {
        ingest(batch, &mut self.buffer, self.scene, &self.free, &mut self.ingest_rng);
    }

    /// One optimizer update on a replay batch plus uniform volume samples.
    /// Returns the weighted (sdf, material) loss values.
    pub fn train_step(&mut self) -> Result<(f32, f32)> {
        let records = self.buffer.sample(self.config.batch_size, &mut self.replay_rng)?;
        let mut batch = TrainingBatch::default();
        for r in records {
            batch.points.push(r.point);
            batch.sdf_targets.push(r.target_sdf);
            batch.labels.push(r.label.map(|m| m.index()));
        }
        let bounds = self.scene.bounds();
        let (lo, hi) = (bounds.min_point(), bounds.max_point());
        for _ in 0..self.config.volume_samples_per_step {
            let p = Point3::from_fn(|a, _| self.replay_rng.random_range(lo[a]..hi[a]));
            batch.sdf_targets.push(self.scene.sdf(&p) as f32);
            batch.points.push(p);
            batch.labels.push(None);
        }
        let mut tape = Tape::new();
        let nodes = self.field.total_loss(&mut tape, &batch, &self.config.loss)?;
        let sdf = tape.value(nodes.sdf).item()?;
        let material = tape.value(nodes.material).item()?;
        if !(sdf.is_finite() && material.is_finite()) {
            return Err(Error::Run(format!(
                "non-finite loss at timestep {}: sdf {sdf}, material {material}",
                self.timestep
            )));
        }
        tape.backward(nodes.total, self.field.params_mut())?;
        self.adam.step(self.field.params_mut())?;
        Ok((sdf, material))
    }

    /// Classifies the fixed evaluation set.
    pub fn snapshot(&self) -> Result<MaterialMap> {
        snapshot(&self.field, self.scene, &self.eval_points)
    }

    /// Consumes one timestep. Returns the snapshot row when one was taken.
    pub fn process(&mut self, batch: &ContactBatch) -> Result<Option<SnapshotRow>> {
        self.ingest(batch);
        if !self.buffer.is_empty() {
            for _ in 0..self.config.grad_steps_per_timestep {
                let (s, m) = self.train_step()?;
                self.losses.0 += f64::from(s);
                self.losses.1 += f64::from(m);
                self.losses.2 += 1;
            }
        }
        self.timestep += 1;
        self.report.timesteps = self.timestep;
        let due = self.timestep.is_multiple_of(self.config.snapshot_every) || self.timestep == self.config.steps;
        if !due {
            return Ok(None);
        }
        let pct = matching_percentage(&self.snapshot()?)?;
        let n = f64::from(self.losses.2.max(1));
        let row = SnapshotRow {
            timestep: self.timestep,
            matching_pct: pct,
            sdf_loss: self.losses.0 / n,
            material_loss: self.losses.1 / n,
        };
        self.losses = (0.0, 0.0, 0);
        debug!(
            "t={} matching={:.2}% sdf={:.6} material={:.6}",
            row.timestep, row.matching_pct, row.sdf_loss, row.material_loss
        );
        if pct > self.best {
            self.best = pct;
            self.plateau = 0;
        } else {
            self.plateau += 1;
        }
        self.report.rows.push(row);
        Ok(Some(row))
    }

    /// Whether the plateau counter has reached the patience.
    pub fn should_stop(&self) -> bool {
        self.config.early_stop_patience > 0 && self.plateau >= self.config.early_stop_patience
    }
}

/// Drives a mapper through a stream. `on_snapshot` runs after every snapshot.
pub fn run_with_scene(
    config: &RunConfig,
    scene: &Scene,
    source: StreamSource<'_>,
    mut on_snapshot: impl FnMut(&SnapshotRow, &Mapper<'_>) -> Result<()>,
) -> Result<(DualBranchField, AdamState, RunReport)> {
    let mut mapper = Mapper::new(config.clone(), scene)?;
    let replay = match source {
        StreamSource::Simulate => None,
        StreamSource::Replay(obs) => {
            if obs.is_empty() {
                return Err(Error::Run("replay stream contains no records".into()));
            }
            Some(group_batches(obs, config.steps))
        }
    };
    let mut sim = match replay {
        None => Some(Simulator::new(scene, config.sim.clone(), config.seed)?),
        Some(_) => None,
    };
    for t in 0..config.steps {
        let batch = match (&mut sim, &replay) {
            (Some(sim), _) => sim.step()?,
            (None, Some(batches)) => batches[t as usize].clone(),
            (None, None) => unreachable!("one stream source is always set"),
        };
        if let Some(row) = mapper.process(&batch)? {
            on_snapshot(&row, &mapper)?;
            if mapper.should_stop() {
                info!("early stop after {} timesteps", mapper.timestep());
                mapper.report.stopped_early = true;
                break;
            }
        }
    }
    Ok(mapper.into_parts())
}

/// Loads the configured scene and runs the mapper on a simulated stream.
pub fn run_mapping(config: &RunConfig) -> Result<(DualBranchField, AdamState, RunReport)> {
    let scene = Scene::load(&config.scene)
        .map_err(|e| Error::Run(format!("cannot load scene {}: {e}", config.scene.display())))?;
    run_with_scene(config, &scene, StreamSource::Simulate, |_, _| Ok(()))
}
