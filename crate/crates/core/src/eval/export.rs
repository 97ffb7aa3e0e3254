//! Mesh and image artifacts.
//!
//! Meshes are ASCII PLY with per-vertex `red green blue`, coordinates
//! written with six decimals so that a read-write cycle is byte-identical.
//! Difference masks are binary PPM (`P6`) images.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::mesh::ExtractedSurface;
use super::metrics::MaterialMap;
use crate::error::{Error, Result};
use crate::geom::Point3;

pub const MATCH_COLOR: [u8; 3] = [0, 200, 0];
pub const MISMATCH_COLOR: [u8; 3] = [220, 0, 0];
pub const OUTSIDE_COLOR: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyMesh {
    pub vertices: Vec<Point3>,
    pub colors: Vec<[u8; 3]>,
    pub faces: Vec<[u32; 3]>,
}

impl From<&ExtractedSurface> for PlyMesh {
    fn from(s: &ExtractedSurface) -> Self {
        Self {
            vertices: s.vertices.clone(),
            colors: s.classes.iter().map(|c| c.color()).collect(),
            faces: s.triangles.clone(),
        }
    }
}

pub fn ply_string(mesh: &PlyMesh) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\ncomment semfield material map\n");
    let _ = writeln!(s, "element vertex {}", mesh.vertices.len());
    s.push_str("property float x\nproperty float y\nproperty float z\n");
    s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    let _ = writeln!(s, "element face {}", mesh.faces.len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (v, c) in mesh.vertices.iter().zip(&mesh.colors) {
        let _ = writeln!(s, "{:.6} {:.6} {:.6} {} {} {}", v.x, v.y, v.z, c[0], c[1], c[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn write_ply(mesh: &PlyMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if mesh.colors.len() != mesh.vertices.len() {
        return Err(Error::Dimension {
            axis: "vertex colors",
            expected: mesh.vertices.len(),
            found: mesh.colors.len(),
        });
    }
    std::fs::write(path, ply_string(mesh)).map_err(|e| Error::io(path, e))
}

/// Writes the surface with the fixed class-color table.
pub fn export_ply(surface: &ExtractedSurface, path: impl AsRef<Path>) -> Result<()> {
    write_ply(&PlyMesh::from(surface), path)
}

/// Parses the PLY dialect written by [`write_ply`].
pub fn parse_ply(text: &str, path: &Path) -> Result<PlyMesh> {
    let bad = |reason: String| Error::Format {
        kind: "ply",
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    if lines.next() != Some("ply") {
        return Err(bad("missing ply magic".into()));
    }
    let (mut nv, mut nf) = (None, None);
    loop {
        let line = lines.next().ok_or_else(|| bad("missing end_header".into()))?;
        if line == "end_header" {
            break;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if let ["element", kind, count] = parts[..] {
            let count: usize = count.parse().map_err(|_| bad(format!("bad element count {count:?}")))?;
            match kind {
                "vertex" => nv = Some(count),
                "face" => nf = Some(count),
                other => return Err(bad(format!("unsupported element {other}"))),
            }
        } else if parts.first() == Some(&"format") && parts.get(1) != Some(&"ascii") {
            return Err(bad("only ascii PLY is supported".into()));
        }
    }
    let (nv, nf) = (nv.unwrap_or(0), nf.unwrap_or(0));
    let mut mesh = PlyMesh::default();
    for i in 0..nv {
        let line = lines.next().ok_or_else(|| bad(format!("missing vertex {i}")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(bad(format!("vertex {i} has {} fields", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("vertex {i}: bad number {s:?}")));
        let byte = |s: &str| s.parse::<u8>().map_err(|_| bad(format!("vertex {i}: bad color {s:?}")));
        mesh.vertices.push(Point3::new(num(f[0])?, num(f[1])?, num(f[2])?));
        mesh.colors.push([byte(f[3])?, byte(f[4])?, byte(f[5])?]);
    }
    for i in 0..nf {
        let line = lines.next().ok_or_else(|| bad(format!("missing face {i}")))?;
        let f: Vec<u32> = line
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| bad(format!("face {i}: bad index {s:?}"))))
            .collect::<Result<_>>()?;
        if f.len() != 4 || f[0] != 3 {
            return Err(bad(format!("face {i} is not a triangle")));
        }
        if f[1..].iter().any(|&v| v as usize >= nv) {
            return Err(bad(format!("face {i} references a missing vertex")));
        }
        mesh.faces.push([f[1], f[2], f[3]]);
    }
    Ok(mesh)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<PlyMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionAxis {
    X,
    Y,
    Z,
}

impl ProjectionAxis {
    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for ProjectionAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "z" => Ok(Self::Z),
            _ => Err(Error::Config(format!("projection axis must be x, y or z, got {s:?}"))),
        }
    }
}

/// RGB raster of the difference mask seen from the positive end of `axis`.
///
/// Each pixel shows the ROI sample nearest the viewer: green for a match,
/// red for a mismatch. Pixels whose front sample is outside the ROI, or
/// that no sample reaches, stay black.
pub fn render_mask(map: &MaterialMap, axis: ProjectionAxis, width: usize, height: usize) -> Result<Vec<[u8; 3]>> {
    if map.samples.is_empty() {
        return Err(Error::Metric("cannot render an empty material map".into()));
    }
    if width == 0 || height == 0 {
        return Err(Error::Config("mask image size must be positive".into()));
    }
    let d = axis.index();
    let (a, b) = ((d + 1) % 3, (d + 2) % 3);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for s in &map.samples {
        for (k, ax) in [a, b].into_iter().enumerate() {
            lo[k] = lo[k].min(s.point[ax]);
            hi[k] = hi[k].max(s.point[ax]);
        }
    }
    let mut depth = vec![f64::NEG_INFINITY; width * height];
    let mut pixels = vec![OUTSIDE_COLOR; width * height];
    for s in &map.samples {
        let u = (s.point[a] - lo[0]) / (hi[0] - lo[0]).max(1e-12);
        let v = (s.point[b] - lo[1]) / (hi[1] - lo[1]).max(1e-12);
        let px = ((u * width as f64) as usize).min(width - 1);
        // image rows run top to bottom
        let py = height - 1 - ((v * height as f64) as usize).min(height - 1);
        let i = py * width + px;
        if s.point[d] > depth[i] {
            depth[i] = s.point[d];
            pixels[i] = match (s.in_roi, s.matches()) {
                (false, _) => OUTSIDE_COLOR,
                (true, true) => MATCH_COLOR,
                (true, false) => MISMATCH_COLOR,
            };
        }
    }
    Ok(pixels)
}

pub fn export_mask_image(
    map: &MaterialMap,
    axis: ProjectionAxis,
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let pixels = render_mask(map, axis, width, height)?;
    let mut bytes = format!("P6\n{width} {height}\n255\n").into_bytes();
    bytes.extend(pixels.iter().flatten());
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
