//! Matching metrics, surface extraction and artifact export.

mod export;
mod mesh;
mod metrics;
mod tables;

pub use export::{
    export_mask_image, export_ply, parse_ply, ply_string, read_ply, render_mask, write_ply, PlyMesh, ProjectionAxis,
    MATCH_COLOR, MISMATCH_COLOR, OUTSIDE_COLOR,
};
pub use mesh::{extract_surface, marching_cubes, ExtractedSurface, SurfaceStatus, MIN_RESOLUTION};
pub use metrics::{
    matching_percentage, per_class_accuracy, round_pct, snapshot, ClassAccuracy, DifferenceMask, MapSample,
    MaterialMap,
};
