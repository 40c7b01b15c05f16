//! Guest aggregates: the dynamic array and the bucketless associative table.

pub mod array;
pub mod hash;
pub mod table;

pub use array::DynArray;
pub use hash::{hash2, hash_value};
pub use table::AssocTable;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CollectionError {
    #[error("index {index} out of range for length {len}")]
    IndexRange { index: i64, len: usize },
    #[error("value of type {0} cannot be a table key")]
    Unhashable(&'static str),
    #[error("cannot modify an immutable {0}")]
    Immutable(&'static str),
    #[error("reference cycle encountered while comparing values")]
    Cycle,
}
