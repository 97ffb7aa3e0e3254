//! Binary dump and replay of contact streams.
//!
//! Layout: `b"SFTS"`, a version byte, then records, each a little-endian
//! `u32` payload length followed by the payload
//! `timestep u32 | finger u8 | x f64 | y f64 | z f64 | noisy u8 | true u8`.

use std::io::{Read, Write};
use std::path::Path;

use super::profile::Finger;
use super::sim::{ContactBatch, ContactObservation};
use crate::error::{Error, Result};
use crate::geom::Point3;
use crate::material::Material;

pub const STREAM_MAGIC: &[u8; 4] = b"SFTS";
pub const STREAM_VERSION: u8 = 1;
const PAYLOAD_LEN: usize = 4 + 1 + 24 + 1 + 1;

pub fn encode_observation(o: &ContactObservation, out: &mut Vec<u8>) {
    out.extend_from_slice(&(PAYLOAD_LEN as u32).to_le_bytes());
    out.extend_from_slice(&o.timestep.to_le_bytes());
    out.push(o.finger.index() as u8);
    for v in o.point.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.push(o.noisy_label.index() as u8);
    out.push(o.true_label.index() as u8);
}

/// Serializes a whole stream, header included.
pub fn encode_stream<'a>(observations: impl IntoIterator<Item = &'a ContactObservation>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(STREAM_MAGIC);
    out.push(STREAM_VERSION);
    for o in observations {
        encode_observation(o, &mut out);
    }
    out
}

pub fn decode_stream(bytes: &[u8], path: &Path) -> Result<Vec<ContactObservation>> {
    let bad = |reason: String| Error::Format {
        kind: "stream",
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < 5 || &bytes[..4] != STREAM_MAGIC {
        return Err(bad("missing SFTS header".into()));
    }
    if bytes[4] != STREAM_VERSION {
        return Err(Error::Version {
            kind: "stream",
            found: bytes[4],
            expected: STREAM_VERSION,
        });
    }
    let mut rest = &bytes[5..];
    let mut out = Vec::new();
    let mut last_step = 0;
    while !rest.is_empty() {
        let index = out.len();
        if rest.len() < 4 {
            return Err(bad(format!("record {index} is truncated in its length prefix")));
        }
        let len = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        if len != PAYLOAD_LEN {
            return Err(bad(format!("record {index} declares length {len}, expected {PAYLOAD_LEN}")));
        }
        if rest.len() < 4 + len {
            return Err(bad(format!(
                "record {index} is truncated ({} of {len} payload bytes)",
                rest.len() - 4
            )));
        }
        let p = &rest[4..4 + len];
        let f64_at = |i: usize| f64::from_le_bytes(p[i..i + 8].try_into().expect("8 bytes"));
        let timestep = u32::from_le_bytes(p[..4].try_into().expect("4 bytes"));
        if timestep < last_step {
            return Err(bad(format!("record {index} goes back in time ({timestep} < {last_step})")));
        }
        last_step = timestep;
        let label = |b: u8| Material::from_index(b.into()).map_err(|_| bad(format!("record {index} has class {b}")));
        out.push(ContactObservation {
            timestep,
            finger: Finger::from_index(p[4].into()).map_err(|_| bad(format!("record {index} has finger {}", p[4])))?,
            point: Point3::new(f64_at(5), f64_at(13), f64_at(21)),
            noisy_label: label(p[29])?,
            true_label: label(p[30])?,
        });
        rest = &rest[4 + len..];
    }
    Ok(out)
}

pub fn write_stream(path: impl AsRef<Path>, batches: &[ContactBatch]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_stream(batches.iter().flat_map(|b| &b.observations));
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_stream(path: impl AsRef<Path>) -> Result<Vec<ContactObservation>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_stream(&bytes, path)
}

/// Regroups a flat record list into one batch per timestep `0..steps`;
/// steps without records yield empty batches.
pub fn group_batches(observations: &[ContactObservation], steps: u32) -> Vec<ContactBatch> {
    let mut out: Vec<ContactBatch> = (0..steps)
        .map(|timestep| ContactBatch {
            timestep,
            observations: Vec::new(),
        })
        .collect();
    for o in observations {
        if let Some(b) = out.get_mut(o.timestep as usize) {
            b.observations.push(*o);
        }
    }
    out
}
