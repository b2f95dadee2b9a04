//! Compressed sparse row storage with a mesh-derived pattern.

use crate::error::{Error, Result};
use crate::geometry::mesh::TriMesh;
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Zero matrix on the dof-coupling pattern of `mesh` (sorted columns).
    pub fn from_mesh_pattern(mesh: &TriMesh<T>) -> Self {
        let n = mesh.n_dofs();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for tri in &mesh.triangles {
            let d = [mesh.dof(tri[0]), mesh.dof(tri[1]), mesh.dof(tri[2])];
            for &i in &d {
                for &j in &d {
                    adj[i].push(j);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for (i, row) in adj.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
            row.clear();
            row.shrink_to_fit();
        }
        let nnz = col_idx.len();
        CsrMatrix { n, row_ptr, col_idx, values: vec![T::zero(); nnz] }
    }

    /// Builds from triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::Dimension { expected: n, got: i.max(j) + 1 });
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in rows.iter_mut() {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(j, v) in row.iter() {
                if last == Some(j) {
                    let k = values.len() - 1;
                    values[k] += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { n, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        let k = a + self.col_idx[a..b]
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (cols, vals) = self.row(i);
            let mut s = T::zero();
            for (&j, &a) in cols.iter().zip(vals) {
                s += a * x[j];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                m = m.max((a - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Symmetric permutation `B[a][b] = A[order[a]][order[b]]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.n;
        let mut inv = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            inv[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        let mut row: Vec<(usize, T)> = Vec::new();
        for &old in order {
            let (cols, vals) = self.row(old);
            row.clear();
            row.extend(cols.iter().zip(vals).map(|(&j, &v)| (inv[j], v)));
            row.sort_unstable_by_key(|e| e.0);
            for &(j, v) in &row {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    /// Reverse Cuthill-McKee order of the pattern: `order[new] = old`.
    pub fn rcm_order(&self) -> Vec<usize> {
        let ones = vec![1u8; self.nnz()];
        let view = sprs::CsMatView::new((self.n, self.n), &self.row_ptr, &self.col_idx, &ones);
        sprs::linalg::reverse_cuthill_mckee(view).perm.vec()
    }

    /// First column of row `i` with a stored entry (lower envelope).
    pub(crate) fn first_col(&self, i: usize) -> usize {
        let (cols, _) = self.row(i);
        cols.first().copied().unwrap_or(i).min(i)
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: T) {
        for i in 0..self.n {
            self.add(i, i, shift);
        }
    }
}
