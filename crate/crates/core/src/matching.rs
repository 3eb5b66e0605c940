//! Maximum-weight bipartite matching by the Hungarian method with
//! potentials, plus single-column re-optimization for pivot solves.

/// Square min-cost assignment state. Row and column 0 are sentinels.
#[derive(Debug, Clone)]
pub struct Assignment {
    n: usize,
    cost: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    /// p[j] = row assigned to column j (0 = none).
    p: Vec<usize>,
}

impl Assignment {
    /// Solve max Σ w over a rows × cols weight matrix (row-major), padded to
    /// a square with zero weights.
    pub fn maximize(weights: &[f64], rows: usize, cols: usize) -> Self {
        assert_eq!(weights.len(), rows * cols);
        let n = rows.max(cols);
        let mut cost = vec![0.0; (n + 1) * (n + 1)];
        for i in 0..rows {
            for j in 0..cols {
                cost[(i + 1) * (n + 1) + j + 1] = -weights[i * cols + j];
            }
        }
        let mut a = Self { n, cost, u: vec![0.0; n + 1], v: vec![0.0; n + 1], p: vec![0; n + 1] };
        for i in 1..=n {
            a.augment(i);
        }
        a
    }

    #[inline]
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[i * (self.n + 1) + j]
    }

    /// Insert free row `i` along a shortest augmenting path.
    fn augment(&mut self, i: usize) {
        let n = self.n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        let mut way = vec![0usize; n + 1];
        self.p[0] = i;
        let mut j0 = 0;
        loop {
            used[j0] = true;
            let i0 = self.p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = self.c(i0, j) - self.u[i0] - self.v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    self.u[self.p[j]] += delta;
                    self.v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if self.p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            self.p[j0] = self.p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    /// Column assigned to each row (0-based, over the padded square).
    pub fn row_to_col(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for j in 1..=self.n {
            if self.p[j] > 0 {
                out[self.p[j] - 1] = j - 1;
            }
        }
        out
    }

    /// Total weight of the current assignment.
    pub fn value(&self) -> f64 {
        -(1..=self.n).map(|j| self.c(self.p[j], j)).sum::<f64>()
    }

    /// Optimal value once column `col` (0-based) is replaced by a zero-weight
    /// dummy: the freed row is re-inserted along one augmenting path.
    pub fn value_without_col(&self, col: usize) -> f64 {
        let mut a = self.clone();
        let j = col + 1;
        let n = a.n;
        for i in 1..=n {
            a.cost[i * (n + 1) + j] = 0.0;
        }
        let row = a.p[j];
        a.p[j] = 0;
        a.v[j] = (1..=n).map(|i| -a.u[i]).fold(f64::INFINITY, f64::min);
        if row > 0 {
            a.augment(row);
        }
        a.value()
    }
}

/// Exact maximum-weight matching. Returns the column matched to each row
/// (None when unmatched or when the matched weight is not positive) and the
/// optimal value.
pub fn max_weight_matching(weights: &[f64], rows: usize, cols: usize) -> (Vec<Option<usize>>, f64) {
    if rows == 0 || cols == 0 {
        return (vec![None; rows], 0.0);
    }
    let a = Assignment::maximize(weights, rows, cols);
    let r2c = a.row_to_col();
    let mut value = 0.0;
    let matched = (0..rows)
        .map(|i| {
            let j = r2c[i];
            (j < cols && weights[i * cols + j] > 0.0).then(|| {
                value += weights[i * cols + j];
                j
            })
        })
        .collect();
    (matched, value)
}
