//! Input encodings of the two field branches.

mod hashgrid;
mod sh;

pub use hashgrid::{trilinear_weights, EncodePlan, HashGridConfig, HashGridEncoding};
pub use sh::{sh_basis, ShEncoding, MAX_BANDS};
