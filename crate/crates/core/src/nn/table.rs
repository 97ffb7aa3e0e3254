//! Learnable embedding tables with lazily materialized rows.
//!
//! A hash-grid level can address up to 2^24 rows. Only rows that the
//! optimizer has actually updated are stored; every other row reads its
//! initial value from a counter-based generator keyed by `(seed, row, column)`,
//! so the table behaves exactly like a fully allocated uniform-initialized
//! array while costing memory proportional to the rows touched by training.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::error::{Error, Result};

/// Multiplicative hasher for `u32` row keys. Deterministic across runs.
#[derive(Default, Clone, Copy)]
pub(crate) struct RowHasher(u64);

impl Hasher for RowHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(5) ^ u64::from(b)).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
        }
    }

    fn write_u32(&mut self, n: u32) {
        self.0 = (u64::from(n) ^ self.0).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
}

pub(crate) type RowMap<V> = HashMap<u32, V, BuildHasherDefault<RowHasher>>;

/// Row-sparse storage of fixed-width records, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    width: usize,
    index: RowMap<u32>,
    rows: Vec<u32>,
    data: Vec<f32>,
}

impl SparseRows {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            index: RowMap::default(),
            rows: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, row: u32) -> Option<&[f32]> {
        self.index.get(&row).map(|&slot| self.slot(slot as usize))
    }

    fn slot(&self, slot: usize) -> &[f32] {
        &self.data[slot * self.width..(slot + 1) * self.width]
    }

    /// Returns the record for `row`, inserting one produced by `init` if absent.
    pub fn get_or_insert_with(&mut self, row: u32, init: impl FnOnce(&mut [f32])) -> &mut [f32] {
        let width = self.width;
        let slot = match self.index.get(&row) {
            Some(&s) => s as usize,
            None => {
                let s = self.rows.len();
                self.index.insert(row, s as u32);
                self.rows.push(row);
                self.data.resize(self.data.len() + width, 0.0);
                init(&mut self.data[s * width..(s + 1) * width]);
                s
            }
        };
        &mut self.data[slot * width..(slot + 1) * width]
    }

    pub fn clear(&mut self) {
        self.index.clear();
        self.rows.clear();
        self.data.clear();
    }

    /// Records in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f32])> + '_ {
        self.rows
            .iter()
            .enumerate()
            .map(move |(slot, &row)| (row, self.slot(slot)))
    }

    /// Row keys in ascending order.
    pub fn sorted_rows(&self) -> Vec<u32> {
        let mut rows = self.rows.clone();
        rows.sort_unstable();
        rows
    }
}

/// Learnable `rows × width` table, uniform(-scale, scale) initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: u32,
    init_seed: u64,
    init_scale: f32,
    values: SparseRows,
    grads: SparseRows,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn initial_entry(seed: u64, scale: f32, width: usize, row: u32, col: usize) -> f32 {
    let key = u64::from(row) * width as u64 + col as u64;
    let bits = splitmix64(seed ^ splitmix64(key));
    let unit = (bits >> 40) as f32 / (1u64 << 24) as f32;
    (2.0 * unit - 1.0) * scale
}

impl EmbeddingTable {
    pub fn new(rows: u32, width: usize, init_seed: u64, init_scale: f32) -> Self {
        Self {
            rows,
            init_seed,
            init_scale,
            values: SparseRows::new(width),
            grads: SparseRows::new(width),
        }
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn init_scale(&self) -> f32 {
        self.init_scale
    }

    /// Initial value of one entry, independent of any training history.
    pub fn initial_value(&self, row: u32, col: usize) -> f32 {
        initial_entry(self.init_seed, self.init_scale, self.width(), row, col)
    }

    /// Copies row `row` into `out`.
    pub fn read(&self, row: u32, out: &mut [f32]) {
        debug_assert!(row < self.rows);
        match self.values.get(row) {
            Some(v) => out.copy_from_slice(v),
            None => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = self.initial_value(row, c);
                }
            }
        }
    }

    pub fn value(&self, row: u32, col: usize) -> f32 {
        match self.values.get(row) {
            Some(v) => v[col],
            None => self.initial_value(row, col),
        }
    }

    /// Mutable access to a row, materializing it from its initial value.
    pub fn row_mut(&mut self, row: u32) -> Result<&mut [f32]> {
        if row >= self.rows {
            return Err(Error::Index {
                context: "embedding table row",
                index: row as usize,
                limit: self.rows as usize,
            });
        }
        let seed = self.init_seed;
        let scale = self.init_scale;
        let width = self.width();
        Ok(self.values.get_or_insert_with(row, |dst| {
            for (c, d) in dst.iter_mut().enumerate() {
                *d = initial_entry(seed, scale, width, row, c);
            }
        }))
    }

    pub fn accumulate_grad(&mut self, row: u32, delta: &[f32]) {
        let g = self.grads.get_or_insert_with(row, |d| d.fill(0.0));
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += di;
        }
    }

    pub fn grads(&self) -> &SparseRows {
        &self.grads
    }

    pub fn materialized(&self) -> &SparseRows {
        &self.values
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
    }

    pub(crate) fn take_grads(&mut self) -> SparseRows {
        let width = self.width();
        std::mem::replace(&mut self.grads, SparseRows::new(width))
    }
}
