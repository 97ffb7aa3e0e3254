//! Simulated in-hand tactile stream: fingertip contacts on a rotating object
//! with per-sensor classifier noise.

mod profile;
mod sim;
mod stream;

pub use profile::{confusion_from_accuracy, draw_label, ConfusionMatrix, Finger, SensorProfile};
pub use sim::{band_coverage, simulate_run, ContactBatch, ContactObservation, SimConfig, Simulator};
pub use stream::{
    decode_stream, encode_observation, encode_stream, group_batches, read_stream, write_stream, STREAM_MAGIC,
    STREAM_VERSION,
};
