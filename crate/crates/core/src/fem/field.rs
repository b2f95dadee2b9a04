//! P1 nodal fields over a shared mesh.

use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::mesh::TriMesh;
use crate::scalar::Real;

/// Nodal values indexed by degree of freedom (paired vertices share one).
#[derive(Debug, Clone)]
pub struct FemField<T> {
    mesh: Arc<TriMesh<T>>,
    values: Vec<T>,
}

impl<T: Real> FemField<T> {
    pub fn new(mesh: Arc<TriMesh<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.n_dofs() {
            return Err(Error::Dimension { expected: mesh.n_dofs(), got: values.len() });
        }
        Ok(FemField { mesh, values })
    }

    pub fn zeros(mesh: Arc<TriMesh<T>>) -> Self {
        let n = mesh.n_dofs();
        FemField { mesh, values: vec![T::zero(); n] }
    }

    pub fn constant(mesh: Arc<TriMesh<T>>, c: T) -> Self {
        let n = mesh.n_dofs();
        FemField { mesh, values: vec![c; n] }
    }

    /// Nodal interpolant of `f(x, y)`. For paired vertices the left one wins.
    pub fn interpolate<F: Fn(T, T) -> T>(mesh: Arc<TriMesh<T>>, f: F) -> Self {
        let mut values = vec![T::zero(); mesh.n_dofs()];
        let mut set = vec![false; mesh.n_dofs()];
        for (v, p) in mesh.vertices.iter().enumerate() {
            let d = mesh.dof(v);
            if !set[d] {
                values[d] = f(p[0], p[1]);
                set[d] = true;
            }
        }
        FemField { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<TriMesh<T>> {
        &self.mesh
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn at_vertex(&self, v: usize) -> T {
        self.values[self.mesh.dof(v)]
    }

    /// Nodal values of triangle `t`.
    pub fn local(&self, t: usize) -> [T; 3] {
        let tri = self.mesh.triangles[t];
        [self.at_vertex(tri[0]), self.at_vertex(tri[1]), self.at_vertex(tri[2])]
    }

    /// Constant gradient on triangle `t`.
    pub fn gradient(&self, t: usize) -> [T; 2] {
        let e = self.mesh.element(t);
        let u = self.local(t);
        let mut g = [T::zero(); 2];
        for i in 0..3 {
            g[0] += u[i] * e.grads[i][0];
            g[1] += u[i] * e.grads[i][1];
        }
        g
    }

    /// P1 interpolant at `pt`; the flag reports a clamped sample.
    pub fn eval(&self, pt: [T; 2]) -> Result<(T, bool)> {
        let loc = self.mesh.locate(pt)?;
        let u = self.local(loc.triangle);
        Ok((loc.bary[0] * u[0] + loc.bary[1] * u[1] + loc.bary[2] * u[2], loc.clamped))
    }

    /// Value and gradient of the element containing `pt`.
    pub fn eval_with_gradient(&self, pt: [T; 2]) -> Result<(T, [T; 2], bool)> {
        let loc = self.mesh.locate(pt)?;
        let u = self.local(loc.triangle);
        let v = loc.bary[0] * u[0] + loc.bary[1] * u[1] + loc.bary[2] * u[2];
        Ok((v, self.gradient(loc.triangle), loc.clamped))
    }

    pub fn same_mesh(&self, other: &FemField<T>) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: T, other: &FemField<T>, b: T) -> Result<FemField<T>> {
        if self.values.len() != other.values.len() {
            return Err(Error::Dimension { expected: self.values.len(), got: other.values.len() });
        }
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect();
        Ok(FemField { mesh: self.mesh.clone(), values })
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> FemField<T> {
        FemField { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `x y value` records, one per vertex.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# x y u")?;
        for (v, p) in self.mesh.vertices.iter().enumerate() {
            writeln!(
                w,
                "{:.17e} {:.17e} {:.17e}",
                p[0].to_f64_lossy(),
                p[1].to_f64_lossy(),
                self.at_vertex(v).to_f64_lossy()
            )?;
        }
        Ok(())
    }
}
