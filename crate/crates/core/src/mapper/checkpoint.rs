//! `.sfck` checkpoints.
//!
//! Layout, all integers and reals little-endian:
//!
//! ```text
//! "SFCK" version:u8
//! header_len:u32 header:JSON {field, bounds, adam, timestep}
//! adam_steps:u64
//! n_tensors:u32 { name ndim:u32 dims:u32* values:f32* m:f32* v:f32* }
//! n_tables:u32  { name rows:u32 width:u32 init_seed:u64 init_scale:f32
//!                 n:u32 { row:u32 values:f32*width }
//!                 n:u32 { row:u32 moments:f32*(2*width) } }
//! ```
//!
//! Strings are `len:u32` plus UTF-8 bytes. Sparse rows are written in
//! ascending row order, so a load-save cycle reproduces the file exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DualBranchField, FieldConfig};
use crate::geom::Aabb;
use crate::nn::{AdamConfig, AdamState, EmbeddingTable, ParamStore, SparseRows, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SFCK";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub field: FieldConfig,
    pub bounds: Aabb,
    pub adam: AdamConfig,
    /// Timesteps consumed when the checkpoint was written.
    pub timestep: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub field: DualBranchField,
    pub adam: AdamState,
    pub timestep: u32,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_len(out: &mut Vec<u8>, v: usize) {
    put_u32(out, u32::try_from(v).expect("checkpoint section exceeds u32 range"));
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_len(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn put_rows(out: &mut Vec<u8>, rows: &SparseRows) {
    let order = rows.sorted_rows();
    put_len(out, order.len());
    for r in order {
        put_u32(out, r);
        put_f32s(out, rows.get(r).expect("listed row exists"));
    }
}

pub fn encode_checkpoint(field: &DualBranchField, adam: &AdamState, timestep: u32) -> Vec<u8> {
    let header = CheckpointHeader {
        field: *field.config(),
        bounds: *field.bounds(),
        adam: *adam.config(),
        timestep,
    };
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    put_str(&mut out, &serde_json::to_string(&header).expect("header serializes"));
    out.extend_from_slice(&adam.step_count().to_le_bytes());

    let store = field.params();
    put_len(&mut out, store.tensor_count());
    for (i, (name, t)) in store.tensors().enumerate() {
        put_str(&mut out, name);
        put_len(&mut out, t.shape().len());
        for &d in t.shape() {
            put_len(&mut out, d);
        }
        put_f32s(&mut out, t.values());
        put_f32s(&mut out, &adam.first_moment()[i]);
        put_f32s(&mut out, &adam.second_moment()[i]);
    }
    put_len(&mut out, store.table_count());
    for (i, (name, t)) in store.tables().enumerate() {
        put_str(&mut out, name);
        put_u32(&mut out, t.rows());
        put_len(&mut out, t.width());
        out.extend_from_slice(&t.init_seed().to_le_bytes());
        out.extend_from_slice(&t.init_scale().to_le_bytes());
        put_rows(&mut out, t.materialized());
        put_rows(&mut out, &adam.table_moments()[i]);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            kind: "checkpoint",
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated while reading {what} at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let len = n.checked_mul(4).ok_or_else(|| self.fail(format!("{what} is too large")))?;
        let raw = self.take(len, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| self.fail(format!("{what} is not UTF-8")))
    }

    fn rows(&mut self, width: usize, what: &str) -> Result<Vec<(u32, Vec<f32>)>> {
        let n = self.u32(what)? as usize;
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let r = self.u32(what)?;
            out.push((r, self.f32s(width, what)?));
        }
        Ok(out)
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut rd = Reader { bytes, pos: 0, path };
    if rd.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(rd.fail("missing SFCK header"));
    }
    let version = rd.take(1, "version")?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            kind: "checkpoint",
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_text = rd.string("header")?;
    let header: CheckpointHeader =
        serde_json::from_str(&header_text).map_err(|e| rd.fail(format!("bad header: {e}")))?;
    let steps = rd.u64("optimizer step count")?;

    let mut store = ParamStore::new();
    let (mut m1, mut m2) = (Vec::new(), Vec::new());
    let n_tensors = rd.u32("tensor count")?;
    for _ in 0..n_tensors {
        let name = rd.string("tensor name")?;
        let ndim = rd.u32("tensor rank")? as usize;
        if ndim > 8 {
            return Err(rd.fail(format!("tensor `{name}` has rank {ndim}")));
        }
        let shape = (0..ndim)
            .map(|_| rd.u32("tensor shape").map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let values = rd.f32s(len, "tensor values")?;
        m1.push(rd.f32s(len, "tensor first moment")?);
        m2.push(rd.f32s(len, "tensor second moment")?);
        store.add_tensor(name, Tensor::new(shape, values)?);
    }
    let mut table_moments = Vec::new();
    let n_tables = rd.u32("table count")?;
    for _ in 0..n_tables {
        let name = rd.string("table name")?;
        let rows = rd.u32("table rows")?;
        let width = rd.u32("table width")? as usize;
        let seed = rd.u64("table seed")?;
        let scale = f32::from_le_bytes(rd.take(4, "table scale")?.try_into().expect("4 bytes"));
        let mut table = EmbeddingTable::new(rows, width, seed, scale);
        for (r, vals) in rd.rows(width, "table rows")? {
            table.row_mut(r).map_err(|e| rd.fail(format!("table `{name}`: {e}")))?.copy_from_slice(&vals);
        }
        let mut moments = SparseRows::new(2 * width);
        for (r, vals) in rd.rows(2 * width, "table moments")? {
            moments.get_or_insert_with(r, |d| d.copy_from_slice(&vals));
        }
        table_moments.push(moments);
        store.add_table(name, table);
    }
    if rd.pos != bytes.len() {
        return Err(rd.fail(format!("{} trailing bytes", bytes.len() - rd.pos)));
    }
    let field = DualBranchField::from_store(header.field, header.bounds, store)?;
    Ok(Checkpoint {
        field,
        adam: AdamState::from_parts(header.adam, steps, m1, m2, table_moments),
        timestep: header.timestep,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, field: &DualBranchField, adam: &AdamState, timestep: u32) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(field, adam, timestep)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

impl Checkpoint {
    /// Rejects a checkpoint whose architecture or bounds differ from the request.
    pub fn ensure_compatible(&self, field: &FieldConfig, bounds: &Aabb) -> Result<()> {
        if self.field.config() != field {
            return Err(Error::Config(format!(
                "checkpoint field hyperparameters differ from the configuration: saved {}, requested {}",
                serde_json::to_string(self.field.config()).expect("serializes"),
                serde_json::to_string(field).expect("serializes")
            )));
        }
        if self.field.bounds() != bounds {
            return Err(Error::Config(format!(
                "checkpoint bounds {:?}..{:?} differ from scene bounds {:?}..{:?}",
                self.field.bounds().min,
                self.field.bounds().max,
                bounds.min,
                bounds.max
            )));
        }
        Ok(())
    }
}
