use std::collections::{HashMap, HashSet};

use log::warn;

use super::tables::{EDGE_TABLE, TRIANGLE_TABLE};
use crate::error::{Error, Result};
use crate::field::DualBranchField;
use crate::geom::{Aabb, Point3};
use crate::material::Material;

pub const MIN_RESOLUTION: usize = 16;

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceStatus {
    Ok,
    /// The level set never crossed zero inside the bounds.
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedSurface {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub classes: Vec<Material>,
    /// Softmax probability of the predicted class at each vertex.
    pub probabilities: Vec<f32>,
    pub status: SurfaceStatus,
    pub cell_size: f64,
}

impl ExtractedSurface {
    pub fn empty(cell_size: f64) -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            classes: Vec::new(),
            probabilities: Vec::new(),
            status: SurfaceStatus::Empty,
            cell_size,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// `V - E + F` over the triangle mesh.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = HashSet::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.triangles.len() as i64
    }
}

/// Geometry-only marching cubes over `sdf` sampled on a `resolution³` cell grid.
/// Vertices on shared edges are shared, triangles wind counter-clockwise
/// seen from outside (positive side).
pub fn marching_cubes(
    bounds: &Aabb,
    resolution: usize,
    sdf: impl Fn(&[Point3]) -> Result<Vec<f32>>,
) -> Result<(Vec<Point3>, Vec<[u32; 3]>)> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::contract(format!(
            "marching cubes resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let n = resolution + 1;
    let lo = bounds.min_point();
    let step = bounds.extent() / resolution as f64;
    let at = |i: usize, j: usize, k: usize| lo + Point3::new(i as f64 * step.x, j as f64 * step.y, k as f64 * step.z);

    // one z-slab at a time keeps batches bounded
    let mut values = Vec::with_capacity(n * n * n);
    for k in 0..n {
        let slab: Vec<Point3> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| at(i, j, k)).collect();
        values.extend(sdf(&slab)?);
    }
    let idx = |i: usize, j: usize, k: usize| (k * n + j) * n + i;

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut edge_vertex: HashMap<(usize, u8), u32> = HashMap::new();
    for k in 0..resolution {
        for j in 0..resolution {
            for i in 0..resolution {
                let corner_pos = CORNERS.map(|c| [i + c[0], j + c[1], k + c[2]]);
                let v = corner_pos.map(|[a, b, c]| values[idx(a, b, c)]);
                let mut case = 0usize;
                for (bit, &val) in v.iter().enumerate() {
                    if val < 0.0 {
                        case |= 1 << bit;
                    }
                }
                let mask = EDGE_TABLE[case];
                if mask == 0 {
                    continue;
                }
                let mut ids = [u32::MAX; 12];
                for (e, &(a, b)) in EDGES.iter().enumerate() {
                    if mask & (1 << e) == 0 {
                        continue;
                    }
                    let (pa, pb) = (corner_pos[a], corner_pos[b]);
                    let axis = (0..3).find(|&d| pa[d] != pb[d]).expect("edge spans one axis") as u8;
                    let base = if pa[axis as usize] < pb[axis as usize] { pa } else { pb };
                    let key = (idx(base[0], base[1], base[2]), axis);
                    ids[e] = *edge_vertex.entry(key).or_insert_with(|| {
                        let (fa, fb) = (f64::from(v[a]), f64::from(v[b]));
                        let t = fa / (fa - fb);
                        let (xa, xb) = (at(pa[0], pa[1], pa[2]), at(pb[0], pb[1], pb[2]));
                        vertices.push(xa + (xb - xa) * t);
                        (vertices.len() - 1) as u32
                    });
                }
                for tri in TRIANGLE_TABLE[case].chunks(3).take_while(|t| t[0] >= 0) {
                    // the table winds clockwise seen from the positive side
                    triangles.push([ids[tri[0] as usize], ids[tri[2] as usize], ids[tri[1] as usize]]);
                }
            }
        }
    }
    Ok((vertices, triangles))
}

/// Zero level set of the field's SDF branch, colored by the material branch.
pub fn extract_surface(field: &DualBranchField, bounds: &Aabb, resolution: usize) -> Result<ExtractedSurface> {
    let cell_size = bounds.extent().max() / resolution.max(1) as f64;
    let (vertices, triangles) = marching_cubes(bounds, resolution, |pts| field.sdf(pts))?;
    if triangles.is_empty() {
        warn!("no zero crossing of the field inside the bounds at resolution {resolution}");
        return Ok(ExtractedSurface::empty(cell_size));
    }
    let preds = field.predict_materials(&vertices)?;
    let mut classes = Vec::with_capacity(preds.len());
    let mut probabilities = Vec::with_capacity(preds.len());
    for (c, p) in preds {
        classes.push(Material::from_index(c)?);
        probabilities.push(p[c]);
    }
    Ok(ExtractedSurface {
        vertices,
        triangles,
        classes,
        probabilities,
        status: SurfaceStatus::Ok,
        cell_size,
    })
}
