//! Compressed sparse row matrices and a direct LU solver with partial
//! pivoting for the nonsymmetric saddle-point and convection-diffusion
//! systems.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinAlgError {
    #[error("matrix is not square ({0} x {1})")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: matrix has {0} rows, vector has {1} entries")]
    DimensionMismatch(usize, usize),
    #[error("numerically singular factorization at column {0}")]
    SingularMatrix(usize),
}

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and duplicates are summed at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet out of range");
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        // Sort each row and merge duplicates.
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for r in 0..n_rows {
            let lo = counts[r];
            let hi = counts[r + 1];
            let mut row: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if let Some(last) = col_idx.last() {
                    if *last == c && col_idx.len() > row_ptr[r] {
                        *values.last_mut().unwrap() += v;
                        continue;
                    }
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[r + 1] = col_idx.len();
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

}

/// Symmetric fill-reducing ordering: reverse Cuthill-McKee on the
/// symmetrized pattern, with near-dense rows (e.g. a zero-mean multiplier)
/// pinned to the end where they add only one row/column of fill.
/// Returns `order` with `order[position] = original index`.
fn symmetric_order(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r) {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let dense_threshold = (n / 2).max(16);
    let mut seen = vec![false; n];
    let dense: Vec<usize> = (0..n).filter(|&i| adj[i].len() >= dense_threshold).collect();
    for &d in &dense {
        seen[d] = true;
    }
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();
    loop {
        let start = (0..n).filter(|&i| !seen[i]).min_by_key(|&i| adj[i].len());
        let Some(s) = start else { break };
        seen[s] = true;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !seen[v]).collect();
            nb.sort_by_key(|&v| adj[v].len());
            for v in nb {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order.extend(dense);
    order
}

/// Sparse LU factorization with partial pivoting (left-looking,
/// Gilbert-Peierls) on a fill-reducing symmetric permutation of the input.
/// Immutable after construction.
pub struct SparseLu {
    n: usize,
    /// L stored by column in elimination order, unit diagonal implicit.
    /// Row indices are permuted row ids.
    l_ptr: Vec<usize>,
    l_rows: Vec<usize>,
    l_vals: Vec<f64>,
    /// U stored by column; row indices are pivot (elimination) positions,
    /// diagonal entry last.
    u_ptr: Vec<usize>,
    u_rows: Vec<usize>,
    u_vals: Vec<f64>,
    /// perm[permuted row] = pivot position.
    perm: Vec<usize>,
    /// order[permuted index] = original index.
    order: Vec<usize>,
}

impl SparseLu {
    pub fn factor(a: &SparseMatrix) -> Result<Self, LinAlgError> {
        if a.n_rows != a.n_cols {
            return Err(LinAlgError::NotSquare(a.n_rows, a.n_cols));
        }
        let n = a.n_rows;
        let order = symmetric_order(a);
        let mut inv = vec![0usize; n];
        for (i, &o) in order.iter().enumerate() {
            inv[o] = i;
        }
        // CSC of the symmetrically permuted matrix; rows within a column
        // are unordered, which the solver below does not require.
        let (col_ptr, a_rows, a_vals) = {
            let mut col_ptr = vec![0usize; n + 1];
            for r in 0..n {
                for (c, _) in a.row(r) {
                    col_ptr[inv[c] + 1] += 1;
                }
            }
            for j in 0..n {
                col_ptr[j + 1] += col_ptr[j];
            }
            let mut rows = vec![0usize; a.nnz()];
            let mut vals = vec![0.0; a.nnz()];
            let mut next = col_ptr.clone();
            for r in 0..n {
                for (c, v) in a.row(r) {
                    let k = next[inv[c]];
                    rows[k] = inv[r];
                    vals[k] = v;
                    next[inv[c]] += 1;
                }
            }
            (col_ptr, rows, vals)
        };
        let pivot_floor = 1e-14 * a.max_abs();

        let mut perm = vec![usize::MAX; n]; // original row -> pivot position
        let mut pivot_row = vec![usize::MAX; n]; // pivot position -> original row
        let mut l_ptr = vec![0usize];
        let mut l_rows: Vec<usize> = Vec::new();
        let mut l_vals: Vec<f64> = Vec::new();
        let mut u_ptr = vec![0usize];
        let mut u_rows: Vec<usize> = Vec::new();
        let mut u_vals: Vec<f64> = Vec::new();

        let mut x = vec![0.0f64; n];
        let mut visited = vec![usize::MAX; n];
        // DFS stacks, reused across columns.
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut topo: Vec<usize> = Vec::new();

        for j in 0..n {
            // Symbolic step: rows reachable from the pattern of A(:, j)
            // through the columns of L already computed.
            topo.clear();
            for &r0 in &a_rows[col_ptr[j]..col_ptr[j + 1]] {
                if visited[r0] == j {
                    continue;
                }
                stack.push((r0, 0));
                visited[r0] = j;
                while let Some(&(r, k)) = stack.last() {
                    let (lo, hi) = if perm[r] != usize::MAX {
                        let c = perm[r];
                        (l_ptr[c], l_ptr[c + 1])
                    } else {
                        (0, 0)
                    };
                    let mut pushed = false;
                    let mut kk = k;
                    while lo + kk < hi {
                        let child = l_rows[lo + kk];
                        kk += 1;
                        if visited[child] != j {
                            visited[child] = j;
                            stack.last_mut().unwrap().1 = kk;
                            stack.push((child, 0));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        topo.push(r);
                        stack.pop();
                    }
                }
            }
            topo.reverse(); // reverse post-order = topological order

            // Numeric step: sparse triangular solve.
            for &r in &topo {
                x[r] = 0.0;
            }
            for (idx, &r) in a_rows[col_ptr[j]..col_ptr[j + 1]].iter().enumerate() {
                x[r] = a_vals[col_ptr[j] + idx];
            }
            for &r in &topo {
                let c = perm[r];
                if c == usize::MAX {
                    continue;
                }
                let xr = x[r];
                if xr == 0.0 {
                    continue;
                }
                for k in l_ptr[c]..l_ptr[c + 1] {
                    x[l_rows[k]] -= xr * l_vals[k];
                }
            }

            // Partial pivoting among not-yet-pivoted rows.
            let mut pivot = usize::MAX;
            let mut pmax = 0.0f64;
            for &r in &topo {
                if perm[r] == usize::MAX && x[r].abs() > pmax {
                    pmax = x[r].abs();
                    pivot = r;
                }
            }
            if pivot == usize::MAX || pmax <= pivot_floor {
                return Err(LinAlgError::SingularMatrix(j));
            }

            // Scatter results: U gets the pivoted rows, L the rest.
            for &r in &topo {
                let c = perm[r];
                if c != usize::MAX && x[r] != 0.0 {
                    u_rows.push(c);
                    u_vals.push(x[r]);
                }
            }
            let piv_val = x[pivot];
            u_rows.push(j);
            u_vals.push(piv_val);
            u_ptr.push(u_rows.len());
            for &r in &topo {
                if perm[r] == usize::MAX && r != pivot && x[r] != 0.0 {
                    l_rows.push(r);
                    l_vals.push(x[r] / piv_val);
                }
            }
            l_ptr.push(l_rows.len());
            perm[pivot] = j;
            pivot_row[j] = pivot;
        }

        Ok(SparseLu {
            n,
            l_ptr,
            l_rows,
            l_vals,
            u_ptr,
            u_rows,
            u_vals,
            perm,
            order,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinAlgError> {
        if b.len() != self.n {
            return Err(LinAlgError::DimensionMismatch(self.n, b.len()));
        }
        // Forward solve L y = P b, y indexed by pivot position; b is read
        // through the fill-reducing order.
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            y[self.perm[r]] = b[self.order[r]];
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj == 0.0 {
                continue;
            }
            for k in self.l_ptr[j]..self.l_ptr[j + 1] {
                y[self.perm[self.l_rows[k]]] -= yj * self.l_vals[k];
            }
        }
        // Backward solve U x = y (column-oriented; diagonal stored last).
        let mut x = y;
        for j in (0..self.n).rev() {
            let lo = self.u_ptr[j];
            let hi = self.u_ptr[j + 1];
            let xj = x[j] / self.u_vals[hi - 1];
            x[j] = xj;
            if xj == 0.0 {
                continue;
            }
            for k in lo..hi - 1 {
                x[self.u_rows[k]] -= xj * self.u_vals[k];
            }
        }
        // Undo the fill-reducing order; columns of the permuted matrix are
        // original unknowns order[j].
        let mut out = vec![0.0; self.n];
        for j in 0..self.n {
            out[self.order[j]] = x[j];
        }
        Ok(out)
    }
}

/// Factors `a` and solves `a x = b` in one call, asserting the residual
/// contract in debug mode.
pub fn factor_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, LinAlgError> {
    let lu = SparseLu::factor(a)?;
    let x = lu.solve(b)?;
    #[cfg(debug_assertions)]
    {
        let r = a.matvec(&x);
        let res: f64 = r
            .iter()
            .zip(b)
            .map(|(ri, bi)| (ri - bi) * (ri - bi))
            .sum::<f64>()
            .sqrt();
        let xnorm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bnorm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        debug_assert!(
            res <= 1e-10 * (a.frobenius_norm() * xnorm + bnorm),
            "direct solve residual {res} exceeds contract"
        );
    }
    Ok(x)
}
