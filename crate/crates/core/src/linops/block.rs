use crate::error::{Error, Result};
use nalgebra::{DMatrix, DMatrixView, Scalar as NaScalar};

/// Partition of `total` columns into `count` blocks of `block` columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockIndex {
    total: usize,
    block: usize,
}

impl BlockIndex {
    pub fn new(total: usize, block: usize) -> Result<Self> {
        if block == 0 || total == 0 || !total.is_multiple_of(block) {
            return Err(Error::Dimension(format!("{total} columns cannot be split into blocks of {block}")));
        }
        Ok(Self { total, block })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn count(&self) -> usize {
        self.total / self.block
    }
}

/// Columns `(k-1)M .. kM` of `m`, with `k` counted from 1.
pub fn block_view<'a, T: NaScalar>(m: &'a DMatrix<T>, idx: BlockIndex, k: usize) -> Result<DMatrixView<'a, T>> {
    if m.ncols() != idx.total() {
        return Err(Error::Dimension(format!("matrix has {} columns, index expects {}", m.ncols(), idx.total())));
    }
    if k == 0 || k > idx.count() {
        return Err(Error::Index(format!("block {k} outside 1..={}", idx.count())));
    }
    Ok(m.columns((k - 1) * idx.block(), idx.block()))
}
