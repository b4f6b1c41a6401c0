//! Orthogonal operators, random sources and column-block utilities.

mod block;
mod operator;
mod sources;

pub use block::{block_view, BlockIndex};
pub use operator::{identity, permuted_dft, sample_haar, Direction, OperatorKind, OrthogonalOperator};
pub use sources::{gaussian_matrix, gaussian_rows, sample_sources, SourceKind};
