//! Grid realizations of the unfolding operator `T_eps` and its iterated strip
//! version `T_eps^g`, together with the identity checks built on them.
//!
//! `T_eps phi(x, y1, y2) = phi(eps^a [x/eps^a]_{L_g} L_g + eps^a y1, eps y2)` on
//! the whole periods `I_eps` and zero on the leftover `Lambda_eps`. It does not
//! depend on `x` inside one period, so samples are stored per period.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::field::FemField;
use crate::functions::ReactionFn;
use crate::geometry::domain::{PeriodicSplit, ThinDomainSpec};
use crate::geometry::mesh::TriMesh;
use crate::geometry::profile::PeriodicProfile;
use crate::limit1d::LimitSolution;
use crate::quadrature::GaussLegendre;
use crate::scalar::{abs_pow, Real};

/// Default number of samples per cell dimension.
pub const SAMPLES_PER_DIM: usize = 64;
/// Cap on the number of samples of one grid.
pub const MAX_SAMPLES: usize = 10_000_000;

/// Point value of a field with its gradient.
#[derive(Debug, Clone, Copy)]
pub struct Sample<T> {
    pub value: T,
    pub grad: [T; 2],
    pub clamped: bool,
}

/// Anything that can be sampled on the thin domain.
pub trait Field2D<T: Real>: Sync {
    fn sample(&self, pt: [T; 2]) -> Result<Sample<T>>;
}

impl<T: Real> Field2D<T> for FemField<T> {
    fn sample(&self, pt: [T; 2]) -> Result<Sample<T>> {
        let (value, grad, clamped) = self.eval_with_gradient(pt)?;
        Ok(Sample { value, grad, clamped })
    }
}

/// Closed-form field with its gradient.
pub struct SmoothField<F, G> {
    f: F,
    g: G,
}

impl<F, G> SmoothField<F, G> {
    pub fn new(f: F, g: G) -> Self {
        SmoothField { f, g }
    }
}

impl<T, F, G> Field2D<T> for SmoothField<F, G>
where
    T: Real,
    F: Fn(T, T) -> T + Sync,
    G: Fn(T, T) -> [T; 2] + Sync,
{
    fn sample(&self, pt: [T; 2]) -> Result<Sample<T>> {
        Ok(Sample { value: (self.f)(pt[0], pt[1]), grad: (self.g)(pt[0], pt[1]), clamped: false })
    }
}

/// `f(inner)`, pointwise.
pub struct ComposedField<'a, D> {
    pub inner: &'a D,
    pub f: ReactionFn,
}

impl<'a, T: Real, D: Field2D<T>> Field2D<T> for ComposedField<'a, D> {
    fn sample(&self, pt: [T; 2]) -> Result<Sample<T>> {
        let s = self.inner.sample(pt)?;
        let d = self.f.derivative(s.value);
        Ok(Sample { value: self.f.eval(s.value), grad: [d * s.grad[0], d * s.grad[1]], clamped: s.clamped })
    }
}

/// Composite Gauss–Legendre nodes on `(a, b)`: `n` points rounded to whole
/// 4-point panels.
fn composite<T: Real>(a: T, b: T, n: usize) -> Vec<(T, T)> {
    let rule = GaussLegendre::<T>::new(4);
    let panels = n.div_ceil(4).max(1);
    rule.composite_points(a, b, panels)
}

#[derive(Debug, Clone, Copy)]
pub struct YSample<T> {
    pub y1: T,
    pub y2: T,
    pub weight: T,
}

/// Samples of `(0, 1) x Y*` for one `eps`.
#[derive(Debug, Clone)]
pub struct UnfoldGrid<T> {
    pub epsilon: T,
    pub alpha: T,
    pub lg: T,
    pub split: PeriodicSplit<T>,
    pub g: PeriodicProfile<T>,
    /// Offsets in `(0, 1)` (fraction of a period) and weights summing to 1.
    pub x_nodes: Vec<(T, T)>,
    /// Weights sum to `|Y*|`.
    pub y_samples: Vec<YSample<T>>,
    pub per_dim: usize,
}

impl<T: Real> UnfoldGrid<T> {
    pub fn new(spec: &ThinDomainSpec<T>, per_dim: usize, x_per_cell: usize) -> Result<Self> {
        if per_dim < 4 || x_per_cell < 1 {
            return Err(Error::InvalidOption("sampling resolution too small".into()));
        }
        let split = spec.g_split();
        if split.n_cells == 0 {
            return Err(Error::Geometry("no whole period fits in (0, 1)".into()));
        }
        let (mut per_dim, mut nx) = (per_dim, x_per_cell);
        while split.n_cells * nx * per_dim * per_dim > MAX_SAMPLES {
            if nx > 4 {
                nx /= 2;
            } else if per_dim > 8 {
                per_dim /= 2;
            } else {
                break;
            }
        }
        let lg = spec.g.period();
        let x_nodes = composite(T::zero(), T::one(), nx);
        let mut y_samples = Vec::new();
        let t_nodes = composite(T::zero(), T::one(), per_dim);
        for (y1, w1) in composite(T::zero(), lg, per_dim) {
            let top = spec.g.eval(y1);
            for &(t, wt) in &t_nodes {
                y_samples.push(YSample { y1, y2: t * top, weight: w1 * wt * top });
            }
        }
        Ok(UnfoldGrid {
            epsilon: spec.epsilon,
            alpha: spec.alpha,
            lg,
            split,
            g: spec.g.clone(),
            x_nodes,
            y_samples,
            per_dim,
        })
    }

    /// 64 samples per cell dimension, reduced above the sample cap.
    pub fn standard(spec: &ThinDomainSpec<T>) -> Result<Self> {
        Self::new(spec, SAMPLES_PER_DIM, SAMPLES_PER_DIM)
    }

    pub fn eps_alpha(&self) -> T {
        self.epsilon.powf(self.alpha)
    }

    pub fn n_cells(&self) -> usize {
        self.split.n_cells
    }

    /// `|Y*|` of the sampling rule.
    pub fn cell_area(&self) -> T {
        self.y_samples.iter().map(|s| s.weight).sum()
    }

    /// Physical point of sample `(k, y1, y2)`.
    pub fn point(&self, k: usize, y1: T, y2: T) -> [T; 2] {
        [self.split.cell_start(k) + self.eps_alpha() * y1, self.epsilon * y2]
    }

    /// `|Lambda_eps|`.
    pub fn lambda_len(&self) -> T {
        self.split.lambda_len()
    }
}

/// `T_eps field` on `I_eps x Y*`, stored as `values[k * ny + j]`.
#[derive(Debug, Clone)]
pub struct Unfolded<T> {
    pub n_cells: usize,
    pub ny: usize,
    pub values: Vec<T>,
    /// Physical gradients `(d_x, d_y)` at the samples.
    pub grads: Vec<[T; 2]>,
    pub clamped: usize,
}

impl<T: Real> Unfolded<T> {
    pub fn value(&self, k: usize, j: usize) -> T {
        self.values[k * self.ny + j]
    }

    /// Value at `(x, j)`; zero on `Lambda_eps`.
    pub fn at(&self, grid: &UnfoldGrid<T>, x: T, j: usize) -> T {
        match grid.split.cell_of(x) {
            Some(k) => self.value(k, j),
            None => T::zero(),
        }
    }

    /// `int_{(0,1) x Y*} |T_eps phi|^p`.
    pub fn norm_pow(&self, grid: &UnfoldGrid<T>, p: T) -> T {
        let ea = grid.split.period;
        let mut s = T::zero();
        for k in 0..self.n_cells {
            let mut c = T::zero();
            for (j, ys) in grid.y_samples.iter().enumerate() {
                c += ys.weight * abs_pow(self.value(k, j), p);
            }
            s += ea * c;
        }
        s
    }
}

pub fn unfold<T: Real, D: Field2D<T>>(field: &D, grid: &UnfoldGrid<T>) -> Result<Unfolded<T>> {
    let ny = grid.y_samples.len();
    let rows: Vec<Result<(Vec<T>, Vec<[T; 2]>, usize)>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|k| {
            let mut vals = Vec::with_capacity(ny);
            let mut grads = Vec::with_capacity(ny);
            let mut clamped = 0;
            for ys in &grid.y_samples {
                let s = field.sample(grid.point(k, ys.y1, ys.y2))?;
                vals.push(s.value);
                grads.push(s.grad);
                clamped += usize::from(s.clamped);
            }
            Ok((vals, grads, clamped))
        })
        .collect();
    let mut out = Unfolded { n_cells: grid.n_cells(), ny, values: Vec::with_capacity(grid.n_cells() * ny), grads: Vec::new(), clamped: 0 };
    out.grads.reserve(grid.n_cells() * ny);
    for r in rows {
        let (v, g, c) = r?;
        out.values.extend(v);
        out.grads.extend(g);
        out.clamped += c;
    }
    Ok(out)
}

/// Degree-5 seven-point rule on the reference triangle (barycentric, weights
/// summing to 1).
pub(crate) fn triangle_rule<T: Real>() -> Vec<([T; 3], T)> {
    let mut r = vec![([T::lit(1.0 / 3.0); 3], T::lit(0.225))];
    let orbit = |a: f64, b: f64, w: f64, r: &mut Vec<([T; 3], T)>| {
        for perm in [[a, b, b], [b, a, b], [b, b, a]] {
            r.push(([T::lit(perm[0]), T::lit(perm[1]), T::lit(perm[2])], T::lit(w)));
        }
    };
    orbit(0.059715871789770, 0.470142064105115, 0.132394152788506, &mut r);
    orbit(0.797426985353087, 0.101286507323456, 0.125939180544827, &mut r);
    r
}

/// `int_T F` over the triangles selected by `keep`, degree-5 rule.
pub(crate) fn mesh_integral<T: Real, K, F>(mesh: &TriMesh<T>, keep: K, f: F) -> T
where
    K: Fn(usize) -> bool + Sync,
    F: Fn(usize, [T; 3], [T; 2]) -> T + Sync,
{
    let rule = triangle_rule::<T>();
    let parts: Vec<T> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            if !keep(t) {
                return T::zero();
            }
            let tri = mesh.triangles[t];
            let v = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
            let mut s = T::zero();
            for (b, w) in &rule {
                let pt = [
                    b[0] * v[0][0] + b[1] * v[1][0] + b[2] * v[2][0],
                    b[0] * v[0][1] + b[1] * v[1][1] + b[2] * v[2][1],
                ];
                s += *w * f(t, *b, pt);
            }
            s * mesh.signed_area(t)
        })
        .collect();
    parts.into_iter().sum()
}

fn centroid_x<T: Real>(mesh: &TriMesh<T>, t: usize) -> T {
    let tri = mesh.triangles[t];
    (mesh.vertices[tri[0]][0] + mesh.vertices[tri[1]][0] + mesh.vertices[tri[2]][0]) / T::lit(3.0)
}

/// Both sides of `||T_eps phi||_p^p = (L_g / eps) ||phi||_{L^p(R_0)}^p`.
#[derive(Debug, Clone, Copy)]
pub struct NormIdentity<T> {
    pub unfolded: T,
    pub scaled_direct: T,
    /// Relative gap of the `p`-th roots.
    pub relative: T,
}

pub fn norm_identity<T: Real>(field: &FemField<T>, grid: &UnfoldGrid<T>, p: T) -> Result<NormIdentity<T>> {
    let unf = unfold(field, grid)?;
    let lhs = unf.norm_pow(grid, p);
    let mesh = field.mesh();
    let lam = grid.split.lambda_start;
    let direct = mesh_integral(
        mesh,
        |t| centroid_x(mesh, t) < lam,
        |t, b, _| {
            let u = field.local(t);
            abs_pow(b[0] * u[0] + b[1] * u[1] + b[2] * u[2], p)
        },
    );
    let rhs = grid.lg / grid.epsilon * direct;
    let inv = T::one() / p;
    let (a, b) = (lhs.powf(inv), rhs.powf(inv));
    let relative = if b > T::zero() { (a - b).abs() / b } else { a };
    Ok(NormIdentity { unfolded: lhs, scaled_direct: rhs, relative })
}

/// `(e_Lp, e_W1p)` of `T_eps u_eps - u` on `(0, 1) x Y*`.
pub fn unfolding_error<T: Real>(u_eps: &FemField<T>, u: &LimitSolution<T>, p: T, grid: &UnfoldGrid<T>) -> Result<(T, T)> {
    let r = unfolding_error_report(u_eps, u, p, grid)?;
    Ok((r.e_lp, r.e_w1p))
}

#[derive(Debug, Clone, Copy)]
pub struct UnfoldingError<T> {
    pub e_lp: T,
    pub e_w1p: T,
    /// Samples that had to be clamped into the mesh.
    pub clamped: usize,
}

/// [`unfolding_error`] with the clamped-sample count.
pub fn unfolding_error_report<T: Real>(
    u_eps: &FemField<T>,
    u: &LimitSolution<T>,
    p: T,
    grid: &UnfoldGrid<T>,
) -> Result<UnfoldingError<T>> {
    let unf = unfold(u_eps, grid)?;
    let ea = grid.split.period;
    let ystar = grid.cell_area();
    let (eps_a, eps) = (grid.eps_alpha(), grid.epsilon);
    let per_cell: Vec<(T, T)> = (0..unf.n_cells)
        .into_par_iter()
        .map(|k| {
            let x0 = grid.split.cell_start(k);
            let mut lp = T::zero();
            for &(s, wx) in &grid.x_nodes {
                let ux = u.eval(x0 + s * ea);
                let mut c = T::zero();
                for (j, ys) in grid.y_samples.iter().enumerate() {
                    c += ys.weight * abs_pow(unf.value(k, j) - ux, p);
                }
                lp += wx * c;
            }
            let mut d = T::zero();
            for (j, ys) in grid.y_samples.iter().enumerate() {
                let g = unf.grads[k * unf.ny + j];
                let (a, b) = (eps_a * g[0], eps * g[1]);
                d += ys.weight * abs_pow((a * a + b * b).sqrt(), p);
            }
            (ea * lp, ea * d)
        })
        .collect();
    let mut lp = T::zero();
    let mut dd = T::zero();
    for (a, b) in per_cell {
        lp += a;
        dd += b;
    }
    if grid.split.has_lambda() {
        let rule = GaussLegendre::<T>::new(8);
        let tail = rule.composite(grid.split.lambda_start, T::one(), 8, |x| abs_pow(u.eval(x), p));
        lp += tail * ystar;
    }
    let inv = T::one() / p;
    Ok(UnfoldingError { e_lp: lp.powf(inv), e_w1p: (lp + dd).powf(inv), clamped: unf.clamped })
}

/// Largest gap between one-sided differences of the unfolded samples in
/// `y1` / `y2` and `eps^alpha T(d_x u)` / `eps T(d_y u)`, over sample pairs
/// that stay inside one element.
pub fn derivative_exchange_check<T: Real>(field: &FemField<T>, grid: &UnfoldGrid<T>) -> Result<T> {
    let mesh = field.mesh();
    let eta = T::lit(1e-6) * grid.lg.min(grid.g.min_value());
    let (ea, eps) = (grid.eps_alpha(), grid.epsilon);
    let worst: Vec<Result<T>> = (0..grid.n_cells())
        .into_par_iter()
        .map(|k| {
            let mut m = T::zero();
            for ys in &grid.y_samples {
                let p0 = grid.point(k, ys.y1, ys.y2);
                let l0 = mesh.locate(p0)?;
                if l0.clamped {
                    continue;
                }
                let grad = field.gradient(l0.triangle);
                let (v0, _) = field.eval(p0)?;
                for (dir, scale, gd) in [(0usize, ea, grad[0]), (1usize, eps, grad[1])] {
                    let mut q = [ys.y1, ys.y2];
                    q[dir] += eta;
                    let p1 = grid.point(k, q[0], q[1]);
                    let l1 = mesh.locate(p1)?;
                    if l1.clamped || l1.triangle != l0.triangle {
                        continue;
                    }
                    let (v1, _) = field.eval(p1)?;
                    let fd = (v1 - v0) / eta;
                    m = m.max((fd - scale * gd).abs());
                }
            }
            Ok(m)
        })
        .collect();
    let mut m = T::zero();
    for w in worst {
        m = m.max(w?);
    }
    Ok(m)
}

/// Samples of `(0, 1) x (0, L_g) x Y*_h`, `Y*_h = {0 < z1 < L_h, -h(z1) < z2 < 0}`.
///
/// The `z1` nodes depend on the strip cell: they are split wherever the
/// abscissa `rho` crosses a boundary of a `g`-period, where `T_eps` jumps.
#[derive(Debug, Clone)]
pub struct StripUnfoldGrid<T> {
    pub spec: ThinDomainSpec<T>,
    pub g_split: PeriodicSplit<T>,
    pub h_split: PeriodicSplit<T>,
    pub y1_nodes: Vec<(T, T)>,
    pub x_nodes: Vec<(T, T)>,
    pub per_dim: usize,
}

/// Multiples of the split period in `(a, b)`, up to the start of `Lambda`.
fn cell_bounds<T: Real>(split: &PeriodicSplit<T>, a: T, b: T) -> Vec<T> {
    let mut out = Vec::new();
    for m in 1..=split.n_cells {
        let x = split.cell_start(m.min(split.n_cells));
        let x = if m == split.n_cells { split.lambda_start } else { x };
        if x > a && x < b {
            out.push(x);
        }
    }
    out
}

/// Points `s` in `(lo, hi)` with `origin + scale * s` at a kink of `h(./eps^beta)`.
fn h_kink_preimages<T: Real>(spec: &ThinDomainSpec<T>, origin: T, scale: T, lo: T, hi: T) -> Vec<T> {
    let kinks = spec.h.kinks();
    if kinks.is_empty() {
        return Vec::new();
    }
    let eb = spec.epsilon.powf(spec.beta);
    let per = spec.strip_period();
    let (xa, xb) = (origin + scale * lo, origin + scale * hi);
    let mut out = Vec::new();
    let mut m = (xa / per).floor();
    while m * per <= xb {
        for &k in &kinks {
            let x = m * per + k * eb;
            if x > xa && x < xb {
                out.push((x - origin) / scale);
            }
        }
        m += T::one();
    }
    out
}

impl<T: Real> StripUnfoldGrid<T> {
    pub fn new(spec: &ThinDomainSpec<T>, per_dim: usize) -> Result<Self> {
        let h_split = spec.h_split();
        if h_split.n_cells == 0 {
            return Err(Error::Geometry("no whole strip period fits in (0, 1)".into()));
        }
        let mut per_dim = per_dim.max(4);
        while h_split.n_cells * per_dim * per_dim * per_dim > MAX_SAMPLES && per_dim > 8 {
            per_dim /= 2;
        }
        Ok(StripUnfoldGrid {
            spec: spec.clone(),
            g_split: spec.g_split(),
            h_split,
            y1_nodes: composite(T::zero(), spec.g.period(), per_dim),
            x_nodes: composite(T::zero(), T::one(), per_dim),
            per_dim,
        })
    }

    /// `z1` nodes of strip cell `kh`.
    pub fn z1_nodes(&self, kh: usize) -> Vec<(T, T)> {
        let s = &self.spec;
        let lh = s.h.period();
        let eb = s.epsilon.powf(s.beta);
        let x0 = self.h_split.cell_start(kh);
        let mut breaks: Vec<T> = cell_bounds(&self.g_split, x0, x0 + self.h_split.period)
            .into_iter()
            .map(|b| (b - x0) / eb)
            .collect();
        breaks.extend(s.h.kinks());
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        panel_nodes(T::zero(), lh, &breaks, lh / T::from_usize_lossy((self.per_dim / 4).max(1)), 4)
    }

    /// `(z1, z2, weight)` samples of `Y*_h` for strip cell `kh`.
    pub fn z_samples(&self, kh: usize) -> Vec<(T, T, T)> {
        let t_nodes = composite(T::zero(), T::one(), self.per_dim);
        let mut out = Vec::new();
        for (z1, w1) in self.z1_nodes(kh) {
            let depth = self.spec.h.eval(z1);
            for &(t, wt) in &t_nodes {
                out.push((z1, -t * depth, w1 * wt * depth));
            }
        }
        out
    }

    /// `(rho, y1, y2)` argument of `T_eps` for sample `(k_h, y1, z1, z2)`.
    fn unfold_args(&self, kh: usize, y1: T, z1: T, z2: T) -> (T, T, T) {
        let s = &self.spec;
        let rho = self.h_split.cell_start(kh) + s.epsilon.powf(s.beta) * z1;
        (rho, y1, s.eps_gamma() * z2 + s.g.eval(y1))
    }

    /// `T_eps` at `(rho, y1, y2)`, zero on `Lambda_eps`.
    fn t_eps<D: Field2D<T>>(&self, field: &D, rho: T, y1: T, y2: T) -> Result<T> {
        match self.g_split.cell_of(rho) {
            None => Ok(T::zero()),
            Some(k) => {
                let s = &self.spec;
                let pt = [self.g_split.cell_start(k) + s.epsilon.powf(s.alpha) * y1, s.epsilon * y2];
                Ok(field.sample(pt)?.value)
            }
        }
    }
}

/// `T_eps^g (T_eps field)` on `I^h_eps`; zero on `Lambda^h_eps`.
#[derive(Debug, Clone)]
pub struct StripUnfolded<T> {
    pub n_cells: usize,
    pub n_y1: usize,
    /// Per strip cell: `(z1, z2, weight)` samples.
    pub z: Vec<Vec<(T, T, T)>>,
    /// Per strip cell: values at `[i * n_z + j]` for `y1` node `i`, `z` sample `j`.
    pub values: Vec<Vec<T>>,
}

pub fn unfold_strip<T: Real, D: Field2D<T>>(field: &D, grid: &StripUnfoldGrid<T>) -> Result<StripUnfolded<T>> {
    let rows: Vec<Result<(Vec<(T, T, T)>, Vec<T>)>> = (0..grid.h_split.n_cells)
        .into_par_iter()
        .map(|kh| {
            let z = grid.z_samples(kh);
            let mut out = Vec::with_capacity(grid.y1_nodes.len() * z.len());
            for &(y1, _) in &grid.y1_nodes {
                for &(z1, z2, _) in &z {
                    let (rho, a, b) = grid.unfold_args(kh, y1, z1, z2);
                    out.push(grid.t_eps(field, rho, a, b)?);
                }
            }
            Ok((z, out))
        })
        .collect();
    let mut res = StripUnfolded { n_cells: grid.h_split.n_cells, n_y1: grid.y1_nodes.len(), z: Vec::new(), values: Vec::new() };
    for r in rows {
        let (z, v) = r?;
        res.z.push(z);
        res.values.push(v);
    }
    Ok(res)
}

impl<T: Real> StripUnfolded<T> {
    pub fn value(&self, kh: usize, i: usize, j: usize) -> T {
        self.values[kh][i * self.z[kh].len() + j]
    }

    /// `int_{(0,1) x (0,L_g) x Y*_h}` of the samples.
    pub fn integral(&self, grid: &StripUnfoldGrid<T>) -> T {
        let per = grid.h_split.period;
        let mut s = T::zero();
        for kh in 0..self.n_cells {
            for (i, &(_, wy)) in grid.y1_nodes.iter().enumerate() {
                for (j, &(_, _, wz)) in self.z[kh].iter().enumerate() {
                    s += per * wy * wz * self.value(kh, i, j);
                }
            }
        }
        s
    }
}

/// `|| T_eps^g (T_eps phi) - phi ||_{L^p}` for a function of `x` only.
pub fn strip_test_function_error<T: Real, F: Fn(T) -> T + Sync>(phi: F, grid: &StripUnfoldGrid<T>, p: T) -> T {
    let s = &grid.spec;
    let (eb, ea) = (s.epsilon.powf(s.beta), s.epsilon.powf(s.alpha));
    let per = grid.h_split.period;
    let lh = s.h.period();
    let parts: Vec<T> = (0..grid.h_split.n_cells)
        .into_par_iter()
        .map(|kh| {
            let x0 = grid.h_split.cell_start(kh);
            let mut acc = T::zero();
            // the integrand does not depend on z2
            for (z1, wz) in grid.z1_nodes(kh) {
                let rho = x0 + eb * z1;
                let depth = s.h.eval(z1);
                for &(y1, wy) in &grid.y1_nodes {
                    let val = match grid.g_split.cell_of(rho) {
                        Some(k) => phi(grid.g_split.cell_start(k) + ea * y1),
                        None => T::zero(),
                    };
                    for &(t, wx) in &grid.x_nodes {
                        acc += per * wx * wy * wz * depth * abs_pow(val - phi(x0 + t * per), p);
                    }
                }
            }
            acc
        })
        .collect();
    let mut total: T = parts.into_iter().sum();
    if grid.h_split.has_lambda() {
        let rule = GaussLegendre::<T>::new(8);
        let area = s.g.period() * s.h.average(T::one()).unwrap_or(T::one()) * lh;
        total += area * rule.composite(grid.h_split.lambda_start, T::one(), 4, |x| abs_pow(phi(x), p));
    }
    total.powf(T::one() / p)
}

/// Gauss nodes over `(a, b)` split at every point of `breaks` and refined to
/// panels no longer than `max_len`.
pub(crate) fn panel_nodes<T: Real>(a: T, b: T, breaks: &[T], max_len: T, order: usize) -> Vec<(T, T)> {
    let rule = GaussLegendre::<T>::new(order);
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        if len <= T::zero() {
            continue;
        }
        let n = (len / max_len).ceil().to_usize().unwrap_or(1).max(1);
        out.extend(rule.composite_points(w[0], w[1], n));
    }
    out
}

fn x_breaks<T: Real>(spec: &ThinDomainSpec<T>) -> Vec<T> {
    let mut breaks = spec.breakpoints();
    breaks.extend(cell_bounds(&spec.g_split(), T::zero(), T::one()));
    breaks.extend(cell_bounds(&spec.h_split(), T::zero(), T::one()));
    breaks
}

fn panel_len<T: Real>(spec: &ThinDomainSpec<T>, per_dim: usize) -> T {
    let finest = spec.cell_length().min(spec.strip_period());
    finest / T::from_usize_lossy((per_dim / 4).max(1))
}

/// `eps^(-gamma-1) int_{O^eps cap {a < x < b}} phi` over the exact strip.
pub fn strip_integral_exact<T: Real, D: Field2D<T>>(field: &D, spec: &ThinDomainSpec<T>, a: T, b: T, per_dim: usize) -> Result<T> {
    if b <= a {
        return Ok(T::zero());
    }
    let xs = panel_nodes(a, b, &x_breaks(spec), panel_len(spec, per_dim), 4);
    let ynodes = GaussLegendre::<T>::new(8);
    let parts: Vec<Result<T>> = xs
        .par_iter()
        .map(|&(x, wx)| {
            let (lo, hi) = (spec.interface(x), spec.top(x));
            let mut s = T::zero();
            for (y, wy) in ynodes.on_interval(lo, hi) {
                s += wy * field.sample([x, y])?.value;
            }
            Ok(wx * s)
        })
        .collect();
    let mut total = T::zero();
    for p in parts {
        total += p?;
    }
    Ok(total / (spec.epsilon * spec.eps_gamma()))
}

/// `(1 / (L_g eps^gamma)) int_{(0,1) x Y*_eps(x)} T_eps phi` with the strip
/// depth `h(rho / eps^beta)` at the physical abscissa `rho` of each sample.
pub fn unfolded_strip_exact<T: Real, D: Field2D<T>>(field: &D, spec: &ThinDomainSpec<T>, per_dim: usize) -> Result<T> {
    let split = spec.g_split();
    let lg = spec.g.period();
    let ea = spec.epsilon.powf(spec.alpha);
    let eg = spec.eps_gamma();
    let znodes = GaussLegendre::<T>::new(8);
    let parts: Vec<Result<T>> = (0..split.n_cells)
        .into_par_iter()
        .map(|k| {
            let x0 = split.cell_start(k);
            let mut breaks = spec.g.kinks();
            breaks.extend(h_kink_preimages(spec, x0, ea, T::zero(), lg));
            let y1_nodes = panel_nodes(T::zero(), lg, &breaks, lg / T::from_usize_lossy((per_dim / 4).max(1)), 4);
            let mut s = T::zero();
            for &(y1, w1) in &y1_nodes {
                let rho = x0 + ea * y1;
                let top = spec.g.eval(y1);
                let lo = top - eg * spec.h_at(rho);
                for (y2, w2) in znodes.on_interval(lo, top) {
                    s += w1 * w2 * field.sample([rho, spec.epsilon * y2])?.value;
                }
            }
            Ok(split.period * s)
        })
        .collect();
    let mut total = T::zero();
    for p in parts {
        total += p?;
    }
    Ok(total / (lg * eg))
}

/// `(1 / (L_g eps^gamma)) int_{A x Y*_eps(x)} T_eps phi` with the simplified
/// depth `h(x / eps^beta)`, for `A = (a, b)`.
pub fn unfolded_strip_simplified<T: Real, D: Field2D<T>>(
    field: &D,
    spec: &ThinDomainSpec<T>,
    a: T,
    b: T,
    per_dim: usize,
) -> Result<T> {
    if b <= a {
        return Ok(T::zero());
    }
    let split = spec.g_split();
    let lg = spec.g.period();
    let ea = spec.epsilon.powf(spec.alpha);
    let eg = spec.eps_gamma();
    let xs = panel_nodes(a, b, &x_breaks(spec), panel_len(spec, per_dim), 4);
    let y1_nodes = panel_nodes(T::zero(), lg, &spec.g.kinks(), lg / T::from_usize_lossy((per_dim / 4).max(1)), 4);
    let znodes = GaussLegendre::<T>::new(8);
    let parts: Vec<Result<T>> = xs
        .par_iter()
        .map(|&(x, wx)| {
            let k = match split.cell_of(x) {
                Some(k) => k,
                None => return Ok(T::zero()),
            };
            let depth = eg * spec.h_at(x);
            let x0 = split.cell_start(k);
            let mut s = T::zero();
            for &(y1, w1) in &y1_nodes {
                let top = spec.g.eval(y1);
                for (y2, w2) in znodes.on_interval(top - depth, top) {
                    s += w1 * w2 * field.sample([x0 + ea * y1, spec.epsilon * y2])?.value;
                }
            }
            Ok(wx * s)
        })
        .collect();
    let mut total = T::zero();
    for p in parts {
        total += p?;
    }
    Ok(total / (lg * eg))
}

/// Terms of the iterated strip identity.
#[derive(Debug, Clone, Copy)]
pub struct IterationIdentity<T> {
    /// `eps^(-gamma-1) int_{O^eps} phi`
    pub concentrated: T,
    /// `(1/(L_g L_h)) int T_eps^g(T_eps phi)`
    pub iterated: T,
    /// Contribution of `Lambda^h_eps`.
    pub lambda_h_term: T,
    /// `eps^(-gamma-1) int_{O_1^eps} phi`
    pub o1_term: T,
    /// Difference between the exact and the simplified strip depth.
    pub gap: T,
    /// `|concentrated - iterated - lambda_h_term - o1_term|`
    pub raw_residual: T,
    /// Same with the depth gap included.
    pub residual: T,
    pub relative: T,
}

pub fn verify_iteration<T: Real, D: Field2D<T>>(field: &D, grid: &StripUnfoldGrid<T>) -> Result<IterationIdentity<T>> {
    let spec = &grid.spec;
    let per_dim = grid.per_dim;
    let concentrated = strip_integral_exact(field, spec, T::zero(), T::one(), per_dim)?;
    let lam_g = grid.g_split.lambda_start;
    let o1_term = strip_integral_exact(field, spec, lam_g, T::one(), per_dim)?;
    let strip = unfold_strip(field, grid)?;
    let iterated = strip.integral(grid) / (spec.g.period() * spec.h.period());
    let lambda_h_term = unfolded_strip_simplified(field, spec, grid.h_split.lambda_start, T::one(), per_dim)?;
    let exact = unfolded_strip_exact(field, spec, per_dim)?;
    let simplified = unfolded_strip_simplified(field, spec, T::zero(), T::one(), per_dim)?;
    let gap = exact - simplified;
    let raw_residual = (concentrated - iterated - lambda_h_term - o1_term).abs();
    let residual = (concentrated - iterated - lambda_h_term - o1_term - gap).abs();
    let relative = residual / concentrated.abs().max(T::min_positive_value());
    Ok(IterationIdentity { concentrated, iterated, lambda_h_term, o1_term, gap, raw_residual, residual, relative })
}

/// `(1/eps) int_{R_1} |u|` and `eps^(-gamma-1) int_{O_1} |u|` over the part of
/// the mesh above `Lambda_eps`.
pub fn remainder_integrals<T: Real>(field: &FemField<T>, spec: &ThinDomainSpec<T>) -> (T, T) {
    let mesh = field.mesh();
    let lam = spec.g_split().lambda_start;
    let abs_u = |t: usize, b: [T; 3], _pt: [T; 2]| {
        let u = field.local(t);
        (b[0] * u[0] + b[1] * u[1] + b[2] * u[2]).abs()
    };
    let r1 = mesh_integral(mesh, |t| centroid_x(mesh, t) > lam, abs_u);
    let o1 = mesh_integral(mesh, |t| mesh.strip_tag[t] && centroid_x(mesh, t) > lam, abs_u);
    (r1 / spec.epsilon, o1 / (spec.epsilon * spec.eps_gamma()))
}
