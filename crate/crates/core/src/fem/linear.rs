//! Symmetric positive definite solvers: Jacobi-preconditioned CG and an
//! envelope (skyline) Cholesky factorization for banded layered meshes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::CsrMatrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Envelope Cholesky when the envelope fits the budget, CG otherwise.
    #[default]
    Auto,
    Cg,
    Direct,
}

/// Envelope entries above which `Auto` falls back to CG.
pub const ENVELOPE_BUDGET: usize = 80_000_000;

pub const CG_TOLERANCE: f64 = 1e-12;

/// Solves `A x = b` for SPD `A` (relative residual `<= 1e-12` for CG).
pub fn solve_linear_spd<T: Real>(a: &CsrMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    solve_with(a, b, LinearSolver::Auto)
}

pub fn solve_with<T: Real>(a: &CsrMatrix<T>, b: &[T], kind: LinearSolver) -> Result<Vec<T>> {
    if b.len() != a.n() {
        return Err(Error::Dimension { expected: a.n(), got: b.len() });
    }
    match direct_factor(a, kind, false)? {
        Some(f) => {
            let mut x = f.solve(b);
            // one step of iterative refinement
            let r: Vec<T> = a.mul(&x).iter().zip(b).map(|(&ax, &bi)| bi - ax).collect();
            let dx = f.solve(&r);
            x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
            Ok(x)
        }
        None => {
            let n = a.n();
            Ok(pcg(a, b, None, T::lit(CG_TOLERANCE), 20 * n + 1000, false)?.x)
        }
    }
}

/// Envelope Cholesky factor in the better of the natural and the reverse
/// Cuthill-McKee orders. With `pin` the last unknown of that order is fixed
/// to zero, which makes a semidefinite matrix with constant null space
/// definite.
pub struct DirectFactor<T> {
    order: Option<Vec<usize>>,
    pin: bool,
    sky: Skyline<T>,
}

impl<T: Real> DirectFactor<T> {
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = b.len();
        let m = if self.pin { n - 1 } else { n };
        let pb: Vec<T> = match &self.order {
            Some(o) => o[..m].iter().map(|&i| b[i]).collect(),
            None => b[..m].to_vec(),
        };
        let mut y = self.sky.solve(&pb);
        y.resize(n, T::zero());
        match &self.order {
            Some(o) => {
                let mut x = vec![T::zero(); n];
                for (new, &old) in o.iter().enumerate() {
                    x[old] = y[new];
                }
                x
            }
            None => y,
        }
    }
}

/// `None` when `kind` asks for CG or the envelope exceeds the budget.
fn direct_factor<T: Real>(a: &CsrMatrix<T>, kind: LinearSolver, pin: bool) -> Result<Option<DirectFactor<T>>> {
    if kind == LinearSolver::Cg {
        return Ok(None);
    }
    let natural = envelope_size(a);
    let order = a.rcm_order();
    let b = a.permuted(&order);
    let reordered = envelope_size(&b);
    let (mat, order, env) = if reordered < natural { (b, Some(order), reordered) } else { (a.clone(), None, natural) };
    if kind == LinearSolver::Auto && env > ENVELOPE_BUDGET {
        return Ok(None);
    }
    let m = if pin { mat.n() - 1 } else { mat.n() };
    let sky = Skyline::factor_leading(&mat, m)?;
    Ok(Some(DirectFactor { order, pin, sky }))
}

/// Solves `A x = b` for `A` positive semidefinite with the constants as null
/// space and `b` orthogonal to them. The result has zero mean.
pub fn solve_singular<T: Real>(a: &CsrMatrix<T>, b: &[T], kind: LinearSolver) -> Result<Vec<T>> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::Dimension { expected: n, got: b.len() });
    }
    let f = if n < 2 { None } else { direct_factor(a, kind, true)? };
    let Some(f) = f else {
        return Ok(pcg(a, b, None, T::lit(CG_TOLERANCE), 20 * n + 1000, true)?.x);
    };
    let mut rhs = b.to_vec();
    remove_mean(&mut rhs);
    let mut x = f.solve(&rhs);
    let r: Vec<T> = a.mul(&x).iter().zip(&rhs).map(|(&ax, &bi)| bi - ax).collect();
    let dx = f.solve(&r);
    x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
    remove_mean(&mut x);
    Ok(x)
}

pub fn envelope_size<T: Real>(a: &CsrMatrix<T>) -> usize {
    (0..a.n()).map(|i| i - a.first_col(i) + 1).sum()
}

#[derive(Debug, Clone)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub relative_residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn remove_mean<T: Real>(v: &mut [T]) {
    let m = v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len());
    v.iter_mut().for_each(|x| *x -= m);
}

/// Jacobi-preconditioned conjugate gradients. With `singular = true` the
/// constant vector is treated as the null space and projected out of the
/// residual at every step.
pub fn pcg<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x0: Option<&[T]>,
    tol: T,
    max_iter: usize,
    singular: bool,
) -> Result<CgOutcome<T>> {
    let n = a.n();
    let diag = a.diagonal();
    if diag.iter().any(|&d| !(d > T::zero())) {
        return Err(Error::LinearSolver("non-positive diagonal entry".into()));
    }
    let mut rhs = b.to_vec();
    if singular {
        remove_mean(&mut rhs);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![T::zero(); n]);
    if bnorm == T::zero() {
        return Ok(CgOutcome { x: vec![T::zero(); n], iterations: 0, relative_residual: T::zero() });
    }
    let mut ax = a.mul(&x);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&bi, &v)| bi - v).collect();
    if singular {
        remove_mean(&mut r);
    }
    let mut z: Vec<T> = r.iter().zip(&diag).map(|(&ri, &d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    while rel > tol && it < max_iter {
        a.matvec(&p, &mut ax);
        let pap = dot(&p, &ax);
        if !(pap > T::zero()) {
            return Err(Error::LinearSolver(format!("CG breakdown: p'Ap = {pap} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        if singular {
            remove_mean(&mut r);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        it += 1;
        // refresh the recursive residual against drift
        if it % 200 == 0 {
            a.matvec(&x, &mut ax);
            for i in 0..n {
                r[i] = rhs[i] - ax[i];
            }
            if singular {
                remove_mean(&mut r);
            }
            rel = dot(&r, &r).sqrt() / bnorm;
        }
    }
    if rel > tol {
        return Err(Error::LinearSolver(format!(
            "CG reached {it} iterations with relative residual {:e}", rel.to_f64_lossy()
        )));
    }
    if singular {
        remove_mean(&mut x);
    }
    Ok(CgOutcome { x, iterations: it, relative_residual: rel })
}

/// Envelope Cholesky `A = L L^T`, row-wise storage of the lower profile.
#[derive(Debug, Clone)]
pub struct Skyline<T> {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Skyline<T> {
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        Self::factor_leading(a, a.n())
    }

    /// Factors the leading `m x m` block.
    pub fn factor_leading(a: &CsrMatrix<T>, m: usize) -> Result<Self> {
        let n = m.min(a.n());
        let mut first = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            let f = a.first_col(i);
            first.push(f);
            start.push(start[i] + i - f + 1);
        }
        let mut data = vec![T::zero(); start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        let mut sky = Skyline { first, start, data };
        sky.factor_in_place()?;
        Ok(sky)
    }

    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..=i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut s = self.data[si + j - fi];
                let (ri, rj) = (si + k0 - fi, sj + k0 - fj);
                let len = j - k0;
                for k in 0..len {
                    s -= self.data[ri + k] * self.data[rj + k];
                }
                if j < i {
                    self.data[si + j - fi] = s / self.data[sj + j - fj];
                } else {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::LinearSolver(format!(
                            "matrix is not positive definite (pivot {s} at row {i})"
                        )));
                    }
                    self.data[si + i - fi] = s.sqrt();
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.first.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for j in fi..i {
                s -= self.data[si + j - fi] * y[j];
            }
            y[i] = s / self.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] = y[i] / self.data[si + i - fi];
            let yi = y[i];
            for j in fi..i {
                y[j] -= self.data[si + j - fi] * yi;
            }
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t).unwrap()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::<f64>::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(solve_with(&a, &b, LinearSolver::Cg).unwrap(), b);
        assert_eq!(solve_with(&a, &b, LinearSolver::Direct).unwrap(), b);
    }

    #[test]
    fn skyline_matches_cg() {
        let a = laplace_1d(40);
        let b = vec![1.0; 40];
        let x1 = solve_with(&a, &b, LinearSolver::Direct).unwrap();
        let x2 = solve_with(&a, &b, LinearSolver::Cg).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn pinned_solve_matches_projected_cg() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            t.extend([(i, i, 1.0), (j, j, 1.0), (i, j, -1.0), (j, i, -1.0)]);
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x1 = solve_singular(&a, &b, LinearSolver::Direct).unwrap();
        let x2 = solve_singular(&a, &b, LinearSolver::Cg).unwrap();
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-9, "{u} vs {v}");
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        assert!(matches!(solve_with(&a, &[1.0, 1.0], LinearSolver::Direct), Err(Error::LinearSolver(_))));
    }
}
