//! Reverse-mode differentiation, parameters and optimizer.

mod adam;
mod mlp;
mod store;
mod table;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{xavier_uniform, Mlp};
pub use store::{ParamId, ParamStore, TableId};
pub use table::{EmbeddingTable, SparseRows};
pub use tape::{InterpStencil, NodeId, Tape};
pub use tensor::Tensor;
