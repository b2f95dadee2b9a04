//! Structured layered meshes: columns aligned to both oscillation periods,
//! fibers split at the strip interface, each quad cut into two triangles.

use crate::error::{Error, Result};
use crate::geometry::domain::{clean_points, ThinDomainSpec};
use crate::geometry::mesh::{ColumnLayout, TriMesh};
use crate::geometry::profile::PeriodicProfile;
use crate::scalar::Real;

/// Minimum number of x-segments per oscillation period.
pub const SEGMENTS_PER_PERIOD: usize = 8;

/// Subdivides every gap of `pts` (sorted, including both ends) into a power
/// of two of equal pieces no longer than `dx`, so halving `dx` nests.
fn subdivide<T: Real>(pts: &[T], dx: T) -> Vec<T> {
    let mut xs = vec![pts[0]];
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        let mut n = 1usize;
        while len / T::from_usize_lossy(n) > dx * T::lit(1.0 + 1e-9) {
            n *= 2;
        }
        for k in 1..n {
            xs.push(w[0] + len * T::from_usize_lossy(k) / T::from_usize_lossy(n));
        }
        xs.push(w[1]);
    }
    xs
}

/// Bisects every piece of `xs` while `split(a, b)` holds, at most `depth`
/// times.
fn refine<T: Real>(xs: &[T], depth: usize, split: impl Fn(T, T) -> bool) -> Vec<T> {
    fn go<T: Real>(a: T, b: T, depth: usize, split: &dyn Fn(T, T) -> bool, out: &mut Vec<T>) {
        if depth > 0 && split(a, b) {
            let m = (a + b) / T::lit(2.0);
            go(a, m, depth - 1, split, out);
            go(m, b, depth - 1, split, out);
        } else {
            out.push(b);
        }
    }
    let mut out = vec![xs[0]];
    for w in xs.windows(2) {
        go(w[0], w[1], depth, &split, &mut out);
    }
    out
}

/// Maximum number of shear bisections of a column.
const SHEAR_DEPTH: usize = 12;

/// `true` when the terrain-following levels over `[a, b]` shift by more than
/// the zone thickness, `level(x) - base` with `level` the zone top.
fn sheared<T: Real>(a: T, b: T, level: &impl Fn(T) -> T, base: T) -> bool {
    let m = (a + b) / T::lit(2.0);
    let (la, lb, lm) = (level(a), level(b), level(m));
    let thick = (la.min(lb).min(lm) - base).max(T::zero());
    (lb - la).abs() > thick || (lm - (la + lb) / T::lit(2.0)).abs() > thick
}

/// Cuts each quad along its shorter diagonal, so sheared quads do not yield
/// triangles with angles near pi; `diag_up` breaks ties.
fn cut_quads<T: Real>(layout: &ColumnLayout<T>, vertices: &[[T; 2]]) -> Vec<[usize; 3]> {
    let ncol = layout.xs.len() - 1;
    let nl = layout.n_layers();
    let dist2 = |i: usize, j: usize| {
        let (p, q) = (vertices[i], vertices[j]);
        (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1])
    };
    let mut tris = Vec::with_capacity(2 * ncol * nl);
    for col in 0..ncol {
        for lay in 0..nl {
            let a = layout.vertex(col, lay);
            let b = layout.vertex(col + 1, lay);
            let c = layout.vertex(col + 1, lay + 1);
            let d = layout.vertex(col, lay + 1);
            let (up, down) = (dist2(a, c), dist2(b, d));
            let tie = T::lit(1e-9) * (up + down);
            let diag_up = if (up - down).abs() <= tie { layout.diag_up[col] } else { up < down };
            if diag_up {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    tris
}

/// Height of the flat zone for interface minimum `lo`.
fn flat_height<T: Real>(lo: T, target_h: T) -> T {
    lo - target_h.min(lo / T::lit(4.0))
}

/// Layer counts `(flat, following, strip)` of the thin mesh over columns
/// `xs`, and the height of the flat zone. Below that height the layers are
/// horizontal and shared by all columns; above it they follow the interface,
/// so steep teeth do not shear the elements of the base channel.
pub fn thin_layer_counts<T: Real>(spec: &ThinDomainSpec<T>, xs: &[T], target_h: T) -> (usize, usize, usize, T) {
    let mut lo = T::infinity();
    let mut hi = T::zero();
    for &x in xs {
        let m = spec.interface(x);
        lo = lo.min(m);
        hi = hi.max(m);
    }
    let y_flat = flat_height(lo, target_h);
    let n_f = (y_flat / target_h).ceil().to_usize().unwrap_or(1).max(1);
    let n_m = ((hi - y_flat) / target_h).ceil().to_usize().unwrap_or(1).max(1);
    let strip = spec.epsilon * spec.eps_gamma() * spec.h.max_value();
    let n_s = (strip / target_h).ceil().to_usize().unwrap_or(1).max(1);
    (n_f, n_m, n_s, y_flat)
}

/// Mesh of `R^eps` with the strip `O^eps` resolved by the top `n_s` layers.
pub fn build_thin_mesh<T: Real>(spec: &ThinDomainSpec<T>, target_h: T) -> Result<TriMesh<T>> {
    spec.validate()?;
    if !(target_h > T::zero() && target_h.is_finite()) {
        return Err(Error::InvalidSpec(format!("target_h = {target_h} must be positive")));
    }
    let thickness = spec.epsilon * spec.g.min_value();
    if target_h >= thickness {
        return Err(Error::TooCoarse {
            reason: format!("target_h = {target_h} does not resolve the domain height eps*g0"),
            required: (thickness / T::lit(2.0)).to_f64_lossy(),
        });
    }
    let seg = T::from_usize_lossy(SEGMENTS_PER_PERIOD);
    let mut dx = target_h;
    if !spec.g.is_constant() {
        dx = dx.min(spec.cell_length() / seg);
    }
    if !spec.h.is_constant() {
        dx = dx.min(spec.strip_period() / seg);
    }
    let mut pts = vec![T::zero()];
    pts.extend(spec.breakpoints());
    pts.push(T::one());
    let xs = subdivide(&clean_ends(pts), dx);
    // columns where the following layers shift by more than their thickness
    // are bisected; the flat height comes from a denser sampling first
    let dense = refine(&xs, 3, |_, _| true);
    let lo = dense.iter().map(|&x| spec.interface(x)).fold(T::infinity(), |a, b| a.min(b));
    let base = flat_height(lo, target_h);
    let mid_of = |x: T| spec.interface(x);
    let xs = refine(&xs, SHEAR_DEPTH, |a, b| sheared(a, b, &mid_of, base));

    let (n_f, n_m, n_s, y_flat) = thin_layer_counts(spec, &xs, target_h);
    let n_b = n_f + n_m;
    let levels = n_b + n_s + 1;
    let frac = |l: usize, n: usize| T::from_usize_lossy(l) / T::from_usize_lossy(n);
    let mut vertices = Vec::with_capacity(xs.len() * levels);
    for &x in &xs {
        let top = spec.top(x);
        let mid = spec.interface(x);
        for l in 0..=n_f {
            vertices.push([x, y_flat * frac(l, n_f)]);
        }
        for l in 1..=n_m {
            let y = if l == n_m { mid } else { y_flat + (mid - y_flat) * frac(l, n_m) };
            vertices.push([x, y]);
        }
        for l in 1..=n_s {
            let y = if l == n_s { top } else { mid + (top - mid) * frac(l, n_s) };
            vertices.push([x, y]);
        }
    }
    let ncol = xs.len() - 1;
    let layout = ColumnLayout {
        diag_up: (0..ncol).map(|c| c % 2 == 0).collect(),
        xs,
        levels,
    };
    let triangles = cut_quads(&layout, &vertices);
    let nl = layout.n_layers();
    let strip_tag = (0..triangles.len()).map(|t| (t / 2) % nl >= n_b).collect();
    let mesh = TriMesh::from_parts(vertices, triangles, Some(strip_tag), None)?;
    Ok(mesh.with_layout(layout))
}

fn clean_ends<T: Real>(pts: Vec<T>) -> Vec<T> {
    let mut inner = clean_points(pts);
    inner.insert(0, T::zero());
    inner.push(T::one());
    inner
}

/// Mesh of `Y* = {0 < y1 < L, 0 < y2 < g(y1)}` with the right column paired
/// to the left one. Diagonals are mirrored about `L/2`.
pub fn build_cell_mesh<T: Real>(g: &PeriodicProfile<T>, target_h: T) -> Result<TriMesh<T>> {
    if !(target_h > T::zero() && target_h.is_finite()) {
        return Err(Error::InvalidSpec(format!("target_h = {target_h} must be positive")));
    }
    if target_h >= g.min_value() {
        return Err(Error::TooCoarse {
            reason: format!("target_h = {target_h} is not below g0 = {}", g.min_value()),
            required: (g.min_value() / T::lit(2.0)).to_f64_lossy(),
        });
    }
    let l = g.period();
    let mut n1 = (l / target_h).ceil().to_usize().unwrap_or(2).max(2);
    if n1 % 2 == 1 {
        n1 += 1;
    }
    let mut pts = vec![T::zero()];
    pts.extend(g.kinks());
    pts.push(l);
    let mut xs: Vec<T> = (0..=n1).map(|k| l * T::from_usize_lossy(k) / T::from_usize_lossy(n1)).collect();
    if !g.kinks().is_empty() {
        xs = kink_aligned(&pts, n1);
    }
    // flat layers below g0, following layers above; columns bisected where
    // the following layers shear
    let g0 = g.min_value();
    let y_flat = flat_height(g0, target_h);
    let top_of = |x: T| g.eval(x);
    let xs = refine(&xs, SHEAR_DEPTH, |a, b| sheared(a, b, &top_of, y_flat));
    let n_f = (y_flat / target_h).ceil().to_usize().unwrap_or(1).max(1);
    let n_m = ((g.max_value() - y_flat) / target_h).ceil().to_usize().unwrap_or(1).max(1);
    let ncol = xs.len() - 1;
    let levels = n_f + n_m + 1;
    let frac = |l: usize, n: usize| T::from_usize_lossy(l) / T::from_usize_lossy(n);
    let mut vertices = Vec::with_capacity(xs.len() * levels);
    for (c, &x) in xs.iter().enumerate() {
        let top = if c == ncol { g.eval(T::zero()) } else { g.eval(x) };
        for l in 0..=n_f {
            vertices.push([x, y_flat * frac(l, n_f)]);
        }
        for l in 1..=n_m {
            let y = if l == n_m { top } else { y_flat + (top - y_flat) * frac(l, n_m) };
            vertices.push([x, y]);
        }
    }
    let mid = l / T::lit(2.0);
    let layout = ColumnLayout {
        diag_up: xs.windows(2).map(|w| w[0] + w[1] < mid + mid).collect(),
        xs,
        levels,
    };
    let triangles = cut_quads(&layout, &vertices);
    let pairs = (0..levels).map(|lev| (layout.vertex(0, lev), layout.vertex(ncol, lev))).collect();
    let mesh = TriMesh::from_parts(vertices, triangles, None, Some(pairs))?;
    Ok(mesh.with_layout(layout))
}

/// About `n` columns over one period, with every kink a column boundary.
fn kink_aligned<T: Real>(pts: &[T], n: usize) -> Vec<T> {
    let l = pts[pts.len() - 1];
    let mut xs = vec![pts[0]];
    for w in pts.windows(2) {
        let k = ((w[1] - w[0]) / l * T::from_usize_lossy(n)).round().to_usize().unwrap_or(1).max(1);
        for j in 1..=k {
            xs.push(w[0] + (w[1] - w[0]) * T::from_usize_lossy(j) / T::from_usize_lossy(k));
        }
    }
    xs
}

/// Layered mesh of the rectangle `(0, w) x (0, ht)`.
pub fn build_rectangle_mesh<T: Real>(w: T, ht: T, nx: usize, ny: usize) -> Result<TriMesh<T>> {
    if nx == 0 || ny == 0 || !(w > T::zero()) || !(ht > T::zero()) {
        return Err(Error::InvalidSpec("rectangle needs positive sides and cell counts".into()));
    }
    let xs: Vec<T> = (0..=nx).map(|i| w * T::from_usize_lossy(i) / T::from_usize_lossy(nx)).collect();
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for &x in &xs {
        for j in 0..=ny {
            vertices.push([x, ht * T::from_usize_lossy(j) / T::from_usize_lossy(ny)]);
        }
    }
    let layout = ColumnLayout {
        diag_up: (0..nx).map(|c| c % 2 == 0).collect(),
        xs,
        levels: ny + 1,
    };
    let triangles = cut_quads(&layout, &vertices);
    let mesh = TriMesh::from_parts(vertices, triangles, None, None)?;
    Ok(mesh.with_layout(layout))
}
