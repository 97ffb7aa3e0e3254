use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::material::Material;
use crate::scene::Scene;
use crate::touchsim::ContactBatch;

/// One supervision record. Free-space records carry no label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub point: Point3,
    pub label: Option<Material>,
    pub target_sdf: f32,
}

/// Fixed-capacity ring of records; the oldest record is overwritten first.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    records: Vec<Record>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            records: Vec::new(),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, r: Record) {
        if self.records.len() < self.capacity {
            self.records.push(r);
        } else {
            self.records[self.head] = r;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Records from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Record> {
        let (newer, older) = self.records.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform draws with replacement.
    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<Record>> {
        if self.records.is_empty() {
            return Err(Error::contract("cannot sample from an empty replay buffer"));
        }
        Ok((0..n).map(|_| self.records[rng.random_range(0..self.records.len())]).collect())
    }
}

/// Free-space sampling parameters for [`ingest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpace {
    pub per_contact: usize,
    pub min_distance: f64,
    pub max_distance: f64,
}

/// Stores every contact with target distance 0, plus free-space points
/// offset along the oracle normal and labeled with the oracle distance.
/// Only the noisy label is read from each observation.
pub fn ingest(batch: &ContactBatch, buffer: &mut ReplayBuffer, scene: &Scene, free: &FreeSpace, rng: &mut impl Rng) {
    for o in &batch.observations {
        buffer.push(Record {
            point: o.point,
            label: Some(o.noisy_label),
            target_sdf: 0.0,
        });
        if free.per_contact == 0 {
            continue;
        }
        let Some(n) = scene.normal(&o.point) else {
            continue;
        };
        for _ in 0..free.per_contact {
            let d = rng.random_range(free.min_distance..=free.max_distance);
            let p = o.point + n * d;
            buffer.push(Record {
                point: p,
                label: None,
                target_sdf: scene.sdf(&p) as f32,
            });
        }
    }
}
