//! Residual, Jacobian, energy and norms of the duality map
//! `(Ju, v) = int |grad u|^(p-2) grad u . grad v + |u|^(p-2) u v`.
//!
//! Gradients are exact per element; the mass term is lumped at the vertices.
//! Element contributions are computed in parallel and scattered in element
//! order, so results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::field::FemField;
use crate::fem::sparse::CsrMatrix;
use crate::geometry::mesh::TriMesh;
use crate::scalar::{abs_pow, signed_pow, Real};

const CHUNK: usize = 1 << 16;

/// Which pieces of the operator are active.
#[derive(Debug, Clone, Copy)]
pub struct Terms<T> {
    pub mass: bool,
    /// Constant vector added to every element gradient (`e1` for the cell
    /// problem written for `w = v - y1`).
    pub shift: [T; 2],
}

impl<T: Real> Terms<T> {
    pub fn duality() -> Self {
        Terms { mass: true, shift: [T::zero(); 2] }
    }

    pub fn cell() -> Self {
        Terms { mass: false, shift: [T::one(), T::zero()] }
    }
}

/// Nodal load vector `b_i = <F, phi_i>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFunctional<T> {
    pub values: Vec<T>,
}

impl<T: Real> LoadFunctional<T> {
    pub fn zeros(n: usize) -> Self {
        LoadFunctional { values: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn dot(&self, u: &[T]) -> T {
        self.values.iter().zip(u).map(|(&b, &x)| b * x).sum()
    }
}

/// Runs `f` over all elements in parallel, in fixed-size chunks, and hands the
/// results to `sink` in element order.
pub(crate) fn for_elements<T, R, F, S>(mesh: &TriMesh<T>, f: F, mut sink: S)
where
    T: Real,
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
    S: FnMut(usize, R),
{
    let n = mesh.n_triangles();
    let mut lo = 0;
    while lo < n {
        let hi = (lo + CHUNK).min(n);
        let part: Vec<R> = (lo..hi).into_par_iter().map(&f).collect();
        for (k, r) in part.into_iter().enumerate() {
            sink(lo + k, r);
        }
        lo = hi;
    }
}

fn check_len<T: Real>(mesh: &TriMesh<T>, n: usize) -> Result<()> {
    if n != mesh.n_dofs() {
        return Err(Error::Dimension { expected: mesh.n_dofs(), got: n });
    }
    Ok(())
}

fn local_grad<T: Real>(mesh: &TriMesh<T>, u: &[T], t: usize, shift: [T; 2]) -> ([T; 2], crate::geometry::ElementGeometry<T>) {
    let e = mesh.element(t);
    let tri = mesh.triangles[t];
    let mut g = shift;
    for i in 0..3 {
        let ui = u[mesh.dof(tri[i])];
        g[0] += ui * e.grads[i][0];
        g[1] += ui * e.grads[i][1];
    }
    (g, e)
}

/// Residual of the duality equation on raw nodal values.
pub fn residual_values<T: Real>(mesh: &TriMesh<T>, p: T, u: &[T], load: Option<&[T]>, terms: Terms<T>) -> Result<Vec<T>> {
    check_len(mesh, u.len())?;
    if let Some(b) = load {
        check_len(mesh, b.len())?;
    }
    let pm2 = p - T::lit(2.0);
    let mut r = vec![T::zero(); mesh.n_dofs()];
    for_elements(
        mesh,
        |t| {
            let (g, e) = local_grad(mesh, u, t, terms.shift);
            let s = abs_pow((g[0] * g[0] + g[1] * g[1]).sqrt(), pm2) * e.area;
            let mut out = [T::zero(); 3];
            for i in 0..3 {
                out[i] = s * (g[0] * e.grads[i][0] + g[1] * e.grads[i][1]);
            }
            out
        },
        |t, out| {
            let tri = mesh.triangles[t];
            for i in 0..3 {
                r[mesh.dof(tri[i])] += out[i];
            }
        },
    );
    if terms.mass {
        let w = mesh.lumped_weights();
        for i in 0..r.len() {
            r[i] += w[i] * signed_pow(u[i], pm2);
        }
    }
    if let Some(b) = load {
        for i in 0..r.len() {
            r[i] -= b[i];
        }
    }
    Ok(r)
}

/// `int |grad u|^(p-2) grad u . grad phi_i + |u|^(p-2) u phi_i - b_i`.
pub fn assemble_residual<T: Real>(mesh: &TriMesh<T>, p: T, u: &FemField<T>, load: &LoadFunctional<T>) -> Result<Vec<T>> {
    residual_values(mesh, p, u.values(), Some(&load.values), Terms::duality())
}

/// Jacobian of the residual on raw nodal values, with gradient
/// regularization `delta`.
pub fn jacobian_values<T: Real>(mesh: &TriMesh<T>, p: T, u: &[T], delta: T, terms: Terms<T>) -> Result<CsrMatrix<T>> {
    check_len(mesh, u.len())?;
    if p < T::lit(2.0) && delta == T::zero() {
        return Err(Error::Singular(format!(
            "p = {p} < 2 needs a positive gradient regularization"
        )));
    }
    let pm2 = p - T::lit(2.0);
    let two = T::lit(2.0);
    let mut a = CsrMatrix::from_mesh_pattern(mesh);
    let d2 = delta * delta;
    for_elements(
        mesh,
        |t| {
            let (g, e) = local_grad(mesh, u, t, terms.shift);
            let m2 = d2 + g[0] * g[0] + g[1] * g[1];
            let (s, s2) = if m2 == T::zero() {
                (if pm2 == T::zero() { T::one() } else { T::zero() }, T::zero())
            } else {
                (m2.powf(pm2 / two), pm2 * m2.powf(pm2 / two - T::one()))
            };
            let mut k = [[T::zero(); 3]; 3];
            let gd: [T; 3] = std::array::from_fn(|i| g[0] * e.grads[i][0] + g[1] * e.grads[i][1]);
            for i in 0..3 {
                for j in 0..3 {
                    let gg = e.grads[i][0] * e.grads[j][0] + e.grads[i][1] * e.grads[j][1];
                    k[i][j] = e.area * (s * gg + s2 * gd[i] * gd[j]);
                }
            }
            k
        },
        |t, k| {
            let tri = mesh.triangles[t];
            for i in 0..3 {
                for j in 0..3 {
                    a.add(mesh.dof(tri[i]), mesh.dof(tri[j]), k[i][j]);
                }
            }
        },
    );
    if terms.mass {
        let w = mesh.lumped_weights();
        for i in 0..mesh.n_dofs() {
            let m = if d2 > T::zero() {
                (d2 + u[i] * u[i]).powf(pm2 / two)
            } else {
                abs_pow(u[i], pm2)
            };
            a.add(i, i, (p - T::one()) * w[i] * m);
        }
    }
    Ok(a)
}

pub fn assemble_jacobian<T: Real>(mesh: &TriMesh<T>, p: T, u: &FemField<T>, delta: T) -> Result<CsrMatrix<T>> {
    jacobian_values(mesh, p, u.values(), delta, Terms::duality())
}

/// Convex potential `(1/p) int |grad u|^p + |u|^p - <b, u>`.
pub fn energy_values<T: Real>(mesh: &TriMesh<T>, p: T, u: &[T], load: Option<&[T]>, terms: Terms<T>) -> Result<T> {
    check_len(mesh, u.len())?;
    let mut e_grad = T::zero();
    for_elements(
        mesh,
        |t| {
            let (g, e) = local_grad(mesh, u, t, terms.shift);
            e.area * abs_pow((g[0] * g[0] + g[1] * g[1]).sqrt(), p)
        },
        |_, v| e_grad += v,
    );
    let mut e = e_grad / p;
    if terms.mass {
        let w = mesh.lumped_weights();
        e += w.iter().zip(u).map(|(&wi, &ui)| wi * abs_pow(ui, p)).sum::<T>() / p;
    }
    if let Some(b) = load {
        e -= b.iter().zip(u).map(|(&bi, &ui)| bi * ui).sum::<T>();
    }
    Ok(e)
}

pub fn energy<T: Real>(mesh: &TriMesh<T>, p: T, u: &FemField<T>, load: &LoadFunctional<T>) -> Result<T> {
    energy_values(mesh, p, u.values(), Some(&load.values), Terms::duality())
}

/// `b_i = int F phi_i` by the edge-midpoint rule (exact for quadratic F phi).
pub fn bulk_load<T: Real, F: Fn(T, T) -> T + Sync>(mesh: &TriMesh<T>, f: F) -> LoadFunctional<T> {
    let mut b = vec![T::zero(); mesh.n_dofs()];
    for_elements(mesh, |t| midpoint_contrib(mesh, t, &f), |t, c| {
        let tri = mesh.triangles[t];
        for i in 0..3 {
            b[mesh.dof(tri[i])] += c[i];
        }
    });
    LoadFunctional { values: b }
}

/// Element contributions `int_T F phi_i` by the edge-midpoint rule.
pub(crate) fn midpoint_contrib<T: Real, F: Fn(T, T) -> T>(mesh: &TriMesh<T>, t: usize, f: &F) -> [T; 3] {
    let tri = mesh.triangles[t];
    let v = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
    let half = T::lit(0.5);
    let mid = |a: usize, b: usize| f((v[a][0] + v[b][0]) * half, (v[a][1] + v[b][1]) * half);
    let (m01, m12, m20) = (mid(0, 1), mid(1, 2), mid(2, 0));
    let w = mesh.signed_area(t) / T::lit(3.0) * half;
    [w * (m01 + m20), w * (m01 + m12), w * (m12 + m20)]
}

/// `(int |u|^p)^(1/p)` with the vertex rule.
pub fn lp_norm<T: Real>(field: &FemField<T>, p: T) -> T {
    let w = field.mesh().lumped_weights();
    let s: T = w.iter().zip(field.values()).map(|(&wi, &u)| wi * abs_pow(u, p)).sum();
    s.powf(T::one() / p)
}

/// `(int |grad u|^p)^(1/p)`, exact for P1 fields.
pub fn w1p_seminorm<T: Real>(field: &FemField<T>, p: T) -> T {
    seminorm_pow(field, p).powf(T::one() / p)
}

fn seminorm_pow<T: Real>(field: &FemField<T>, p: T) -> T {
    let mesh = field.mesh();
    let mut s = T::zero();
    for_elements(
        mesh,
        |t| {
            let (g, e) = local_grad(mesh, field.values(), t, [T::zero(); 2]);
            e.area * abs_pow((g[0] * g[0] + g[1] * g[1]).sqrt(), p)
        },
        |_, v| s += v,
    );
    s
}

/// `(||u||_p^p + ||grad u||_p^p)^(1/p)`.
pub fn w1p_norm<T: Real>(field: &FemField<T>, p: T) -> T {
    let w = field.mesh().lumped_weights();
    let l: T = w.iter().zip(field.values()).map(|(&wi, &u)| wi * abs_pow(u, p)).sum();
    (l + seminorm_pow(field, p)).powf(T::one() / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_rectangle_mesh;
    use std::sync::Arc;

    #[test]
    fn unit_square_norms() {
        let mesh = Arc::new(build_rectangle_mesh(1.0, 1.0, 8, 8).unwrap());
        let one = FemField::constant(mesh.clone(), 1.0);
        assert!((lp_norm(&one, 3.0f64) - 1.0).abs() < 1e-14);
        let x = FemField::interpolate(mesh, |x, _| x);
        assert!((w1p_seminorm(&x, 2.5f64) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn jacobian_refuses_singular_setting() {
        let mesh = build_rectangle_mesh(1.0, 1.0, 2, 2).unwrap();
        let u = vec![0.0; mesh.n_dofs()];
        assert!(matches!(
            jacobian_values(&mesh, 1.5, &u, 0.0, Terms::duality()),
            Err(Error::Singular(_))
        ));
    }
}
