//! Online fusion: replay buffer, incremental training, periodic snapshots
//! and checkpoints.

mod buffer;
mod checkpoint;
mod config;
mod run;

pub use buffer::{ingest, FreeSpace, Record, ReplayBuffer};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::RunConfig;
pub use run::{evaluation_points, run_mapping, run_with_scene, Mapper, RunReport, SnapshotRow, StreamSource, REPORT_HEADER};
