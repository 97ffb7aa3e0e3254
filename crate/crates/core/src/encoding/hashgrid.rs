//! Multiresolution hash-grid encoding.
//!
//! Level `l` covers the unit cube with a grid of resolution
//! `floor(base · scale^l)`. A query is trilinearly interpolated from the
//! eight surrounding vertex feature rows of every level and the per-level
//! results are concatenated. Coarse levels index their vertices densely;
//! levels whose vertex count exceeds the table size use a spatial hash.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Point3};
use crate::nn::{EmbeddingTable, InterpStencil, NodeId, ParamStore, TableId, Tape};

const PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];
const TABLE_INIT_SCALE: f32 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HashGridConfig {
    pub levels: usize,
    pub features_per_level: usize,
    pub base_resolution: u32,
    pub per_level_scale: f64,
    pub log2_hashmap_size: u32,
}

impl Default for HashGridConfig {
    fn default() -> Self {
        Self {
            levels: 16,
            features_per_level: 2,
            base_resolution: 16,
            per_level_scale: 1.3819,
            log2_hashmap_size: 24,
        }
    }
}

impl HashGridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.features_per_level == 0 || self.base_resolution == 0 {
            return Err(Error::Config("hash grid levels, features and base resolution must be positive".into()));
        }
        if !(self.per_level_scale >= 1.0) {
            return Err(Error::Config("per_level_scale must be at least 1".into()));
        }
        if !(1..=30).contains(&self.log2_hashmap_size) {
            return Err(Error::Config("log2_hashmap_size must lie in 1..=30".into()));
        }
        if f64::from(self.base_resolution) * self.per_level_scale.powi(self.levels as i32 - 1) >= f64::from(u32::MAX / 2) {
            return Err(Error::Config("finest hash grid resolution overflows".into()));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.levels * self.features_per_level
    }

    pub fn table_capacity(&self) -> u64 {
        1u64 << self.log2_hashmap_size
    }

    /// `floor(base · scale^level)`.
    pub fn grid_resolution(&self, level: usize) -> Result<u32> {
        if level >= self.levels {
            return Err(Error::contract(format!(
                "level {level} out of range for a {}-level grid",
                self.levels
            )));
        }
        Ok((f64::from(self.base_resolution) * self.per_level_scale.powi(level as i32)).floor() as u32)
    }

    /// Whether a level addresses its vertices without hashing.
    pub fn is_dense(&self, level: usize) -> Result<bool> {
        let n = u64::from(self.grid_resolution(level)?) + 1;
        Ok(n * n * n <= self.table_capacity())
    }

    /// Rows in the level's table: `min(2^log2, (N+1)^3)`.
    pub fn table_rows(&self, level: usize) -> Result<u32> {
        let n = u64::from(self.grid_resolution(level)?) + 1;
        Ok((n * n * n).min(self.table_capacity()) as u32)
    }

    /// Table row of an integer vertex of the given level.
    pub fn hash_index(&self, corner: [u32; 3], level: usize) -> Result<u32> {
        let n = self.grid_resolution(level)? + 1;
        if self.is_dense(level)? {
            let (x, y, z) = (u64::from(corner[0]), u64::from(corner[1]), u64::from(corner[2]));
            let n = u64::from(n);
            Ok((x + n * y + n * n * z) as u32)
        } else {
            let h = corner
                .iter()
                .zip(PRIMES)
                .fold(0u32, |acc, (&c, p)| acc ^ c.wrapping_mul(p));
            Ok(h & (self.table_capacity() as u32 - 1))
        }
    }
}

/// Trilinear weights of the 8 cell corners, corner `k` at offset
/// `(k & 1, (k >> 1) & 1, (k >> 2) & 1)`.
pub fn trilinear_weights(frac: [f64; 3]) -> [f64; 8] {
    let mut w = [0.0; 8];
    for (k, wk) in w.iter_mut().enumerate() {
        *wk = (0..3)
            .map(|a| if (k >> a) & 1 == 1 { frac[a] } else { 1.0 - frac[a] })
            .product();
    }
    w
}

/// Hash-grid encoder bound to its tables in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct HashGridEncoding {
    config: HashGridConfig,
    bounds: Aabb,
    resolutions: Vec<u32>,
    dense: Vec<bool>,
    tables: Vec<TableId>,
}

/// Interpolation plan for a batch, plus which queries were clamped into bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodePlan {
    pub stencil: InterpStencil,
    pub clamped: Vec<bool>,
}

impl HashGridEncoding {
    /// Allocates one table per level in `store`.
    pub fn new(config: HashGridConfig, bounds: Aabb, store: &mut ParamStore, seed: u64) -> Result<Self> {
        config.validate()?;
        bounds.validate()?;
        let mut tables = Vec::with_capacity(config.levels);
        for level in 0..config.levels {
            let table = EmbeddingTable::new(
                config.table_rows(level)?,
                config.features_per_level,
                seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(level as u64),
                TABLE_INIT_SCALE,
            );
            tables.push(store.add_table(format!("hashgrid.level{level}"), table));
        }
        Self::with_tables(config, bounds, tables)
    }

    /// Rebinds to tables previously registered under `hashgrid.level{l}`.
    pub fn bind(config: HashGridConfig, bounds: Aabb, store: &ParamStore) -> Result<Self> {
        config.validate()?;
        let mut tables = Vec::with_capacity(config.levels);
        for level in 0..config.levels {
            let name = format!("hashgrid.level{level}");
            let id = store
                .table_ids()
                .find(|&t| store.table_name(t) == name)
                .ok_or_else(|| Error::contract(format!("missing table `{name}`")))?;
            let t = store.table(id);
            if t.rows() != config.table_rows(level)? || t.width() != config.features_per_level {
                return Err(Error::contract(format!("table `{name}` does not match the hash grid configuration")));
            }
            tables.push(id);
        }
        Self::with_tables(config, bounds, tables)
    }

    fn with_tables(config: HashGridConfig, bounds: Aabb, tables: Vec<TableId>) -> Result<Self> {
        let resolutions = (0..config.levels).map(|l| config.grid_resolution(l)).collect::<Result<_>>()?;
        let dense = (0..config.levels).map(|l| config.is_dense(l)).collect::<Result<_>>()?;
        Ok(Self {
            config,
            bounds,
            resolutions,
            dense,
            tables,
        })
    }

    pub fn config(&self) -> &HashGridConfig {
        &self.config
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn tables(&self) -> &[TableId] {
        &self.tables
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    fn index(&self, corner: [u32; 3], level: usize) -> u32 {
        if self.dense[level] {
            let n = u64::from(self.resolutions[level]) + 1;
            (u64::from(corner[0]) + n * u64::from(corner[1]) + n * n * u64::from(corner[2])) as u32
        } else {
            let h = corner
                .iter()
                .zip(PRIMES)
                .fold(0u32, |acc, (&c, p)| acc ^ c.wrapping_mul(p));
            h & (self.config.table_capacity() as u32 - 1)
        }
    }

    /// Corner rows and trilinear weights for every query and level.
    pub fn plan(&self, points: &[Point3]) -> EncodePlan {
        let levels = self.config.levels;
        let mut rows = Vec::with_capacity(points.len() * levels * 8);
        let mut weights = Vec::with_capacity(points.len() * levels * 8);
        let mut clamped = Vec::with_capacity(points.len());
        for p in points {
            let (u, was_clamped) = self.bounds.normalize(p);
            clamped.push(was_clamped);
            for (level, &res) in self.resolutions.iter().enumerate() {
                let mut base = [0u32; 3];
                let mut frac = [0.0; 3];
                for a in 0..3 {
                    let pos = u[a] * f64::from(res);
                    let cell = (pos.floor() as u32).min(res - 1);
                    base[a] = cell;
                    frac[a] = pos - f64::from(cell);
                }
                let w = trilinear_weights(frac);
                for (k, &wk) in w.iter().enumerate() {
                    let corner = [
                        base[0] + (k as u32 & 1),
                        base[1] + ((k as u32 >> 1) & 1),
                        base[2] + ((k as u32 >> 2) & 1),
                    ];
                    rows.push(self.index(corner, level));
                    weights.push(wk as f32);
                }
            }
        }
        EncodePlan {
            stencil: InterpStencil {
                tables: levels,
                corners: 8,
                rows,
                weights,
            },
            clamped,
        }
    }

    /// Records the encoding of `points` on the tape; output is `B × (L·F)`.
    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, points: &[Point3]) -> Result<(NodeId, Vec<bool>)> {
        let plan = self.plan(points);
        let node = tape.interpolate(store, &self.tables, plan.stencil)?;
        Ok((node, plan.clamped))
    }
}
