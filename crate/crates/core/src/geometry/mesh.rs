//! Conforming P1 triangulations with strip tags and optional periodic pairing.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Column structure of the layered meshes: vertex `col * levels + lev` sits at
/// `xs[col]`, and every quad `(col, lev)` is cut along one diagonal.
#[derive(Debug, Clone)]
pub struct ColumnLayout<T> {
    pub xs: Vec<T>,
    pub levels: usize,
    /// `true`: quad split along bottom-left to top-right.
    pub diag_up: Vec<bool>,
}

impl<T: Real> ColumnLayout<T> {
    pub fn vertex(&self, col: usize, lev: usize) -> usize {
        col * self.levels + lev
    }

    pub fn n_layers(&self) -> usize {
        self.levels - 1
    }

    /// Triangles of quad `(col, lay)` are `2 * (col * n_layers + lay) + {0, 1}`.
    pub fn quad_triangles(&self, col: usize, lay: usize) -> [usize; 2] {
        let q = col * self.n_layers() + lay;
        [2 * q, 2 * q + 1]
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh<T> {
    pub vertices: Vec<[T; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub strip_tag: Vec<bool>,
    pub periodic_pairs: Option<Vec<(usize, usize)>>,
    pub mesh_size: T,
    strip_tagged: bool,
    dof_of_vertex: Vec<usize>,
    n_dofs: usize,
    layout: Option<ColumnLayout<T>>,
}

/// Element data: area and the constant gradients of the three hat functions.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry<T> {
    pub area: T,
    pub grads: [[T; 2]; 3],
}

/// Result of point location.
#[derive(Debug, Clone, Copy)]
pub struct Located<T> {
    pub triangle: usize,
    pub bary: [T; 3],
    pub clamped: bool,
}

impl<T: Real> TriMesh<T> {
    /// Assembles a mesh from raw tables; checks orientation and pairing.
    pub fn from_parts(
        vertices: Vec<[T; 2]>,
        triangles: Vec<[usize; 3]>,
        strip_tag: Option<Vec<bool>>,
        periodic_pairs: Option<Vec<(usize, usize)>>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for t in &triangles {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Geometry(format!("triangle {t:?} references a missing vertex")));
            }
        }
        let strip_tagged = strip_tag.is_some();
        let strip_tag = strip_tag.unwrap_or_else(|| vec![false; triangles.len()]);
        if strip_tag.len() != triangles.len() {
            return Err(Error::Dimension { expected: triangles.len(), got: strip_tag.len() });
        }
        let mut dof_of_vertex: Vec<usize> = (0..nv).collect();
        if let Some(pairs) = &periodic_pairs {
            let mut seen = vec![false; nv];
            for &(l, r) in pairs {
                if l >= nv || r >= nv || seen[r] || seen[l] || l == r {
                    return Err(Error::Geometry("periodic pairing is not a bijection".into()));
                }
                if vertices[l][1] != vertices[r][1] {
                    return Err(Error::Geometry(format!(
                        "paired vertices {l} and {r} have different heights"
                    )));
                }
                seen[l] = true;
                seen[r] = true;
                dof_of_vertex[r] = l;
            }
        }
        // compress to consecutive dof numbers
        let mut remap = vec![usize::MAX; nv];
        let mut n_dofs = 0;
        for v in 0..nv {
            if dof_of_vertex[v] == v {
                remap[v] = n_dofs;
                n_dofs += 1;
            }
        }
        for v in 0..nv {
            dof_of_vertex[v] = remap[dof_of_vertex[v]];
        }
        let mut mesh = TriMesh {
            vertices,
            triangles,
            strip_tag,
            periodic_pairs,
            mesh_size: T::zero(),
            strip_tagged,
            dof_of_vertex,
            n_dofs,
            layout: None,
        };
        for t in 0..mesh.triangles.len() {
            if mesh.signed_area(t) <= T::zero() {
                return Err(Error::Geometry(format!("triangle {t} has non-positive area")));
            }
        }
        mesh.mesh_size = mesh.max_edge();
        Ok(mesh)
    }

    pub(crate) fn with_layout(mut self, layout: ColumnLayout<T>) -> Self {
        self.layout = Some(layout);
        self
    }

    pub fn layout(&self) -> Option<&ColumnLayout<T>> {
        self.layout.as_ref()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dof(&self, vertex: usize) -> usize {
        self.dof_of_vertex[vertex]
    }

    pub fn dof_map(&self) -> &[usize] {
        &self.dof_of_vertex
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic_pairs.is_some()
    }

    pub fn is_strip_tagged(&self) -> bool {
        self.strip_tagged
    }

    /// Replaces the strip tags (used to build deliberately wrong meshes).
    pub fn set_strip_tags(&mut self, tags: Vec<bool>) -> Result<()> {
        if tags.len() != self.triangles.len() {
            return Err(Error::Dimension { expected: self.triangles.len(), got: tags.len() });
        }
        self.strip_tag = tags;
        self.strip_tagged = true;
        Ok(())
    }

    pub fn signed_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])) * T::lit(0.5)
    }

    pub fn element(&self, t: usize) -> ElementGeometry<T> {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let inv = T::one() / det;
        // grad phi_i = rot90(opposite edge) / (2 area)
        let g = |p: [T; 2], q: [T; 2]| [(p[1] - q[1]) * inv, (q[0] - p[0]) * inv];
        ElementGeometry {
            area: det * T::lit(0.5),
            grads: [g(pb, pc), g(pc, pa), g(pa, pb)],
        }
    }

    pub fn area(&self) -> T {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn strip_area(&self) -> T {
        (0..self.n_triangles())
            .filter(|&t| self.strip_tag[t])
            .map(|t| self.signed_area(t))
            .sum()
    }

    /// Lumped vertex weights `sum_T |T|/3`, accumulated per degree of freedom.
    pub fn lumped_weights(&self) -> Vec<T> {
        let mut w = vec![T::zero(); self.n_dofs];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a3 = self.signed_area(t) / T::lit(3.0);
            for &v in tri {
                w[self.dof_of_vertex[v]] += a3;
            }
        }
        w
    }

    fn max_edge(&self) -> T {
        let mut h = T::zero();
        for tri in &self.triangles {
            for k in 0..3 {
                let p = self.vertices[tri[k]];
                let q = self.vertices[tri[(k + 1) % 3]];
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                h = h.max(d);
            }
        }
        h
    }

    /// Barycentric coordinates of `pt` in triangle `t`.
    pub fn barycentric(&self, t: usize, pt: [T; 2]) -> [T; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let l1 = ((pt[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pt[1] - pa[1])) / det;
        let l2 = ((pb[0] - pa[0]) * (pt[1] - pa[1]) - (pt[0] - pa[0]) * (pb[1] - pa[1])) / det;
        [T::one() - l1 - l2, l1, l2]
    }

    /// Locates `pt`, clamping points that graze the boundary into the mesh.
    /// Requires a layered mesh.
    pub fn locate(&self, pt: [T; 2]) -> Result<Located<T>> {
        let lay = self
            .layout
            .as_ref()
            .ok_or_else(|| Error::Geometry("point location needs a layered mesh".into()))?;
        let xs = &lay.xs;
        let ncol = xs.len() - 1;
        let mut clamped = false;
        let mut x = pt[0];
        let nudge = T::lit(1e-13);
        if x < xs[0] {
            x = xs[0] + nudge;
            clamped = true;
        } else if x > xs[ncol] {
            x = xs[ncol] - nudge;
            clamped = true;
        }
        // column with xs[col] <= x <= xs[col + 1]
        let col = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(ncol - 1),
            Err(i) => (i - 1).min(ncol - 1),
        };
        let (x0, x1) = (xs[col], xs[col + 1]);
        let s = (x - x0) / (x1 - x0);
        let level_y = |lev: usize| -> T {
            let y0 = self.vertices[lay.vertex(col, lev)][1];
            let y1 = self.vertices[lay.vertex(col + 1, lev)][1];
            y0 + s * (y1 - y0)
        };
        let nl = lay.n_layers();
        let mut y = pt[1];
        let (bot, top) = (level_y(0), level_y(nl));
        if y < bot {
            y = bot + nudge;
            clamped = true;
        } else if y > top {
            y = top - nudge;
            clamped = true;
        }
        let (mut lo, mut hi) = (0usize, nl);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if level_y(mid) <= y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let [t0, t1] = lay.quad_triangles(col, lo);
        let q = [x, y];
        let b0 = self.barycentric(t0, q);
        let tiny = -T::lit(1e-12);
        let (triangle, mut bary) = if b0.iter().all(|&l| l >= tiny) {
            (t0, b0)
        } else {
            (t1, self.barycentric(t1, q))
        };
        for l in bary.iter_mut() {
            if *l < T::zero() {
                *l = T::zero();
            }
        }
        let s: T = bary.iter().copied().sum();
        for l in bary.iter_mut() {
            *l /= s;
        }
        Ok(Located { triangle, bary, clamped })
    }

    /// Writes `index x y` records.
    pub fn write_vertices<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# index x y dof")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{} {:.17e} {:.17e} {}", i, v[0].to_f64_lossy(), v[1].to_f64_lossy(), self.dof_of_vertex[i])?;
        }
        Ok(())
    }

    /// Writes `index a b c strip` records.
    pub fn write_triangles<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# index a b c strip")?;
        for (i, t) in self.triangles.iter().enumerate() {
            writeln!(w, "{} {} {} {} {}", i, t[0], t[1], t[2], u8::from(self.strip_tag[i]))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_clockwise_triangles() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(TriMesh::<f64>::from_parts(v.clone(), vec![[0, 1, 2]], None, None).is_ok());
        assert!(TriMesh::<f64>::from_parts(v, vec![[0, 2, 1]], None, None).is_err());
    }

    #[test]
    fn hat_gradients_sum_to_zero() {
        let v = vec![[0.0, 0.0], [2.0, 0.1], [0.3, 1.0]];
        let m = TriMesh::<f64>::from_parts(v, vec![[0, 1, 2]], None, None).unwrap();
        let e = m.element(0);
        for d in 0..2 {
            let s: f64 = e.grads.iter().map(|g| g[d]).sum();
            assert!(s.abs() < 1e-14);
        }
        // grad of x is (1, 0)
        let gx: f64 = (0..3).map(|i| e.grads[i][0] * m.vertices[m.triangles[0][i]][0]).sum();
        assert!((gx - 1.0).abs() < 1e-14);
    }
}
