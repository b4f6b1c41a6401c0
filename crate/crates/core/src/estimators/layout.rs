/// One row of a two-port node: the shared physical index and the row of
/// each port's matrix present at that index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointRow {
    pub phys: usize,
    pub rows: [Option<usize>; 2],
}

/// Row bookkeeping for a node evaluation. `phys[k][r]` is the physical
/// index (channel gain / observation index) of row `r` of port `k`.
/// Surrogate samples reuse physical indices cyclically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowLayout {
    pub phys: Vec<Vec<usize>>,
    pub joint: Vec<JointRow>,
}

impl RowLayout {
    pub fn single(n: usize) -> Self {
        Self { phys: vec![(0..n).collect()], joint: vec![] }
    }

    /// Two ports of equal height sharing rows one-to-one.
    pub fn aligned(n: usize) -> Self {
        let idx: Vec<usize> = (0..n).collect();
        Self {
            phys: vec![idx.clone(), idx],
            joint: (0..n).map(|i| JointRow { phys: i, rows: [Some(i), Some(i)] }).collect(),
        }
    }

    /// Two ports of heights `na`, `nb` sharing physical rows from the top.
    pub fn pair(na: usize, nb: usize) -> Self {
        let n = na.max(nb);
        Self {
            phys: vec![(0..na).collect(), (0..nb).collect()],
            joint: (0..n).map(|i| JointRow { phys: i, rows: [(i < na).then_some(i), (i < nb).then_some(i)] }).collect(),
        }
    }

    /// `count` surrogate rows cycling over `na.max(nb)` physical rows.
    pub fn cyclic_pair(count: usize, na: usize, nb: usize) -> Self {
        let n = na.max(nb).max(1);
        let mut phys = vec![vec![], vec![]];
        let mut joint = Vec::with_capacity(count);
        for j in 0..count {
            let i = j % n;
            let mut rows = [None, None];
            for (k, &h) in [na, nb].iter().enumerate() {
                if i < h {
                    rows[k] = Some(phys[k].len());
                    phys[k].push(i);
                }
            }
            joint.push(JointRow { phys: i, rows });
        }
        Self { phys, joint }
    }

    pub fn cyclic_single(count: usize, n: usize) -> Self {
        let n = n.max(1);
        Self { phys: vec![(0..count).map(|j| j % n).collect()], joint: vec![] }
    }

    pub fn rows(&self, port: usize) -> usize {
        self.phys[port].len()
    }
}
