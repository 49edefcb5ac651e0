//! Compression-format taxonomy, compressed storage, conversion, random
//! generation and MatrixMarket I/O.

mod ccf;
mod matrix;
mod mtx;
mod random;

pub use ccf::{parse_ccf, CcfDescriptor, Dim, Mode, Role};
pub use matrix::{compress, convert, decompress, storage_bytes, Payload, StoredMatrix};
pub use mtx::{read_matrix_market, write_matrix_market};
pub use random::{gen_uniform_random, NONZERO_RANGE};

/// Default value width in bytes.
pub const DEFAULT_VALUE_BYTES: u64 = 4;
/// Default coordinate/position width in bytes.
pub const DEFAULT_INDEX_BYTES: u64 = 4;
