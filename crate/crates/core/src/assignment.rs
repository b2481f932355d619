//! Square linear assignment and row-set alignment of palette blocks.

use crate::color::{mhd, LabColor};
use crate::error::{Error, Result};
use crate::palette::PaletteSet;

/// Square matrix of finite assignment costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::NonSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        let entries: Vec<f64> = rows.into_iter().flatten().collect();
        if entries.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCost);
        }
        Ok(CostMatrix { n, entries })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sum of `cost[k][perm[k]]`, accumulated in row order.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// A bijection `perm: row -> column` and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub perm: Vec<usize>,
    pub total_cost: f64,
}

/// O(n^3) shortest-augmenting-path Hungarian method on a dense matrix.
/// Returns the row->column assignment and the row/column potentials.
fn solve_dense(n: usize, cost: impl Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-based internally; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    (assignment, u[1..].to_vec(), v[1..].to_vec())
}

/// Optimal assignment for a square cost matrix.
///
/// Among equal-cost optima the lexicographically smallest permutation is
/// returned, so results do not depend on the solver's internal pivoting.
pub fn hungarian(cost: &CostMatrix) -> AssignmentResult {
    let n = cost.size();
    if n == 0 {
        return AssignmentResult {
            perm: Vec::new(),
            total_cost: 0.0,
        };
    }
    let min = cost.entries.iter().copied().fold(f64::INFINITY, f64::min);
    let shift = if min < 0.0 { -min } else { 0.0 };
    let shifted = |i: usize, j: usize| cost.get(i, j) + shift;

    let (mut best, u, v) = solve_dense(n, shifted);
    let optimum: f64 = (0..n).map(|i| shifted(i, best[i])).sum();
    let scale = cost
        .entries
        .iter()
        .fold(0.0f64, |m, c| m.max((c + shift).abs()))
        .max(1.0);
    let tol = 1e-10 * scale * n as f64;

    // Lexicographic refinement: fix rows in order, taking the smallest column
    // that still admits an optimal completion. The dual potentials bound the
    // cost of any assignment using (i, j), which prunes most candidates.
    let mut col_used = vec![false; n];
    let mut prefix_cost = 0.0;
    for i in 0..n {
        for j in 0..n {
            if col_used[j] {
                continue;
            }
            if j == best[i] {
                break;
            }
            if shifted(i, j) - u[i] - v[j] > tol {
                continue;
            }
            let rows: Vec<usize> = (i + 1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| !col_used[c] && c != j).collect();
            let (sub, _, _) = solve_dense(rows.len(), |r, c| shifted(rows[r], cols[c]));
            let sub_cost: f64 = sub.iter().enumerate().map(|(r, &c)| shifted(rows[r], cols[c])).sum();
            if prefix_cost + shifted(i, j) + sub_cost <= optimum + tol {
                best[i] = j;
                for (r, &c) in sub.iter().enumerate() {
                    best[rows[r]] = cols[c];
                }
                break;
            }
        }
        col_used[best[i]] = true;
        prefix_cost += shifted(i, best[i]);
    }

    AssignmentResult {
        total_cost: cost.cost_of(&best),
        perm: best,
    }
}

/// Cost matrix between the color rows of two blocks: `cost[k][h] = mhd(p_rows[k], q_rows[h])`.
pub fn row_cost_matrix(p_rows: &[Vec<LabColor>], q_rows: &[Vec<LabColor>]) -> Result<CostMatrix> {
    if p_rows.len() != q_rows.len() {
        return Err(Error::SizeMismatch {
            expected: p_rows.len(),
            found: q_rows.len(),
        });
    }
    let mut rows = Vec::with_capacity(p_rows.len());
    for p in p_rows {
        let mut row = Vec::with_capacity(q_rows.len());
        for q in q_rows {
            row.push(mhd(p, q)?);
        }
        rows.push(row);
    }
    CostMatrix::new(rows)
}

/// Aligns the color rows of `q` to those of `p`: `perm[k] = h` pairs row `k`
/// of `p` with row `h` of `q`, minimizing the summed row-set MHD.
pub fn align_row_sets(p: &PaletteSet, q: &PaletteSet) -> Result<AssignmentResult> {
    if p.k() != q.k() {
        return Err(Error::SizeMismatch {
            expected: p.k(),
            found: q.k(),
        });
    }
    let p_rows: Vec<_> = (0..p.k()).map(|k| p.row(k)).collect();
    let q_rows: Vec<_> = (0..q.k()).map(|k| q.row(k)).collect();
    Ok(hungarian(&row_cost_matrix(&p_rows, &q_rows)?))
}
