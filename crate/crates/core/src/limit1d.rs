//! The homogenized one-dimensional problems on `(0, 1)` with natural Neumann
//! conditions:
//! `-q (|u'|^(p-2) u')' + |u|^(p-2) u = fbar` and its semilinear variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::ReactionFn;
use crate::homogenize::{HomogenizedModel, LimitForcing};
use crate::quadrature::GaussLegendre;
use crate::scalar::{abs_pow, signed_pow, Real};

/// Uniform grid with `n` intervals on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid1D {
    pub n: usize,
}

impl Grid1D {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("1D grid needs n >= 2 intervals, got {n}")));
        }
        Ok(Grid1D { n })
    }

    pub fn h<T: Real>(&self) -> T {
        T::one() / T::from_usize_lossy(self.n)
    }

    pub fn node<T: Real>(&self, i: usize) -> T {
        T::from_usize_lossy(i) / T::from_usize_lossy(self.n)
    }

    pub fn nodes<T: Real>(&self) -> Vec<T> {
        (0..=self.n).map(|i| self.node(i)).collect()
    }

    /// Lumped weights `h/2, h, ..., h, h/2`.
    pub fn weights<T: Real>(&self) -> Vec<T> {
        let h = self.h::<T>();
        let mut w = vec![h; self.n + 1];
        w[0] = h / T::lit(2.0);
        w[self.n] = h / T::lit(2.0);
        w
    }
}

#[derive(Debug, Clone)]
pub struct LimitSolution<T> {
    pub grid: Grid1D,
    pub values: Vec<T>,
    pub model: HomogenizedModel<T>,
    pub residual: f64,
    pub iterations: usize,
}

impl<T: Real> LimitSolution<T> {
    /// Piecewise-linear interpolant.
    pub fn eval(&self, x: T) -> T {
        let n = self.grid.n;
        let s = (x.max(T::zero()).min(T::one())) * T::from_usize_lossy(n);
        let i = s.floor().to_usize().unwrap_or(0).min(n - 1);
        let t = s - T::from_usize_lossy(i);
        self.values[i] * (T::one() - t) + self.values[i + 1] * t
    }

    pub fn derivative(&self, x: T) -> T {
        let n = self.grid.n;
        let s = (x.max(T::zero()).min(T::one())) * T::from_usize_lossy(n);
        let i = s.floor().to_usize().unwrap_or(0).min(n - 1);
        (self.values[i + 1] - self.values[i]) * T::from_usize_lossy(n)
    }

    /// `(x, u)` rows.
    pub fn rows(&self) -> Vec<(T, T)> {
        self.grid.nodes().into_iter().zip(self.values.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limit1dOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Outer fixed-point tolerance (successive `W^{1,p}` difference).
    pub fixed_point_tolerance: f64,
    pub max_outer: usize,
    pub relaxation: f64,
}

impl Default for Limit1dOptions {
    fn default() -> Self {
        Limit1dOptions {
            tolerance: 1e-12,
            max_iterations: 100,
            fixed_point_tolerance: 1e-10,
            max_outer: 200,
            relaxation: 1.0,
        }
    }
}

/// `b_i = int f phi_i` with 3-point Gauss per element.
pub fn load_1d<T: Real, F: Fn(T) -> T>(grid: Grid1D, f: F) -> Vec<T> {
    let rule = GaussLegendre::<T>::new(3);
    let h = grid.h::<T>();
    let mut b = vec![T::zero(); grid.n + 1];
    for e in 0..grid.n {
        let x0 = grid.node::<T>(e);
        for (x, w) in rule.on_interval(x0, x0 + h) {
            let t = (x - x0) / h;
            let fx = f(x) * w;
            b[e] += fx * (T::one() - t);
            b[e + 1] += fx * t;
        }
    }
    b
}

struct Discrete<T> {
    q: T,
    p: T,
    h: T,
    w: Vec<T>,
}

impl<T: Real> Discrete<T> {
    fn residual(&self, u: &[T], b: &[T]) -> Vec<T> {
        let n = u.len() - 1;
        let pm2 = self.p - T::lit(2.0);
        let mut r: Vec<T> = (0..=n).map(|i| self.w[i] * signed_pow(u[i], pm2) - b[i]).collect();
        for e in 0..n {
            let d = (u[e + 1] - u[e]) / self.h;
            let flux = self.q * signed_pow(d, pm2);
            r[e] -= flux;
            r[e + 1] += flux;
        }
        r
    }

    fn energy(&self, u: &[T], b: &[T]) -> T {
        let n = u.len() - 1;
        let mut e = T::zero();
        for k in 0..n {
            let d = (u[k + 1] - u[k]) / self.h;
            e += self.q * self.h * abs_pow(d, self.p);
        }
        for i in 0..=n {
            e += self.w[i] * abs_pow(u[i], self.p);
        }
        e / self.p - b.iter().zip(u).map(|(&x, &y)| x * y).sum::<T>()
    }

    /// Tridiagonal Jacobian `(lower, diag, upper)`.
    fn jacobian(&self, u: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = u.len() - 1;
        let pm1 = self.p - T::one();
        let pm2 = self.p - T::lit(2.0);
        // p < 2: regularize the vanishing-gradient singularity
        let pw = |s: T| {
            if pm2 < T::zero() {
                (s * s + T::lit(1e-16)).powf(pm2 / T::lit(2.0))
            } else {
                abs_pow(s, pm2)
            }
        };
        let mut diag: Vec<T> = (0..=n).map(|i| pm1 * self.w[i] * pw(u[i])).collect();
        let mut off = vec![T::zero(); n];
        for e in 0..n {
            let d = (u[e + 1] - u[e]) / self.h;
            let k = self.q * pm1 * pw(d) / self.h;
            diag[e] += k;
            diag[e + 1] += k;
            off[e] = -k;
        }
        (off.clone(), diag, off)
    }
}

/// Thomas algorithm; `lower[i]` couples rows `i + 1` and `i`.
fn tridiag_solve<T: Real>(lower: &[T], diag: &[T], upper: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let n = diag.len();
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut m = diag[0];
    if m == T::zero() {
        return Err(Error::Singular("zero pivot in tridiagonal solve".into()));
    }
    c[0] = if n > 1 { upper[0] / m } else { T::zero() };
    d[0] = rhs[0] / m;
    for i in 1..n {
        m = diag[i] - lower[i - 1] * c[i - 1];
        if m == T::zero() || !m.is_finite() {
            return Err(Error::Singular(format!("zero pivot at row {i} of tridiagonal solve")));
        }
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] = d[i] - c[i] * d[i + 1];
    }
    Ok(d)
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Newton with backtracking on the 1D energy. Returns `(u, residual, iterations)`.
fn solve_discrete<T: Real>(disc: &Discrete<T>, b: &[T], init: Option<&[T]>, opts: &Limit1dOptions) -> Result<(Vec<T>, f64, usize)> {
    let np = b.len();
    if b.iter().all(|&x| x == T::zero()) {
        return Ok((vec![T::zero(); np], 0.0, 0));
    }
    let mut u = match init {
        Some(u0) => u0.to_vec(),
        None => {
            let lin = Discrete { q: disc.q, p: T::lit(2.0), h: disc.h, w: disc.w.clone() };
            let (l, dg, up) = lin.jacobian(&vec![T::zero(); np]);
            let v = tridiag_solve(&l, &dg, &up, b)?;
            if disc.p == T::lit(2.0) {
                v
            } else {
                let bv: T = b.iter().zip(&v).map(|(&x, &y)| x * y).sum();
                let zero = vec![T::zero(); np];
                let s = disc.energy(&v, &zero) * disc.p;
                if bv > T::zero() && s > T::zero() {
                    let t = (bv / s).powf(T::one() / (disc.p - T::one()));
                    v.into_iter().map(|x| x * t).collect()
                } else {
                    v
                }
            }
        }
    };
    let tol = T::lit(opts.tolerance);
    let mut r = disc.residual(&u, b);
    let mut e = disc.energy(&u, b);
    let mut res = norm(&r);
    let mut history = vec![res.to_f64_lossy()];
    let mut it = 0;
    let mut stalled = false;
    while res > tol {
        if it >= opts.max_iterations {
            return Err(Error::NonConvergence {
                iterations: it,
                last_residual: res.to_f64_lossy(),
                residual_history: history,
                last_iterate: u.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        let (l, dg, up) = disc.jacobian(&u);
        let neg: Vec<T> = r.iter().map(|&x| -x).collect();
        let d = tridiag_solve(&l, &dg, &up, &neg)?;
        let slope: T = r.iter().zip(&d).map(|(&a, &b)| a * b).sum();
        let mut step = T::one();
        let mut next = None;
        for _ in 0..50 {
            let trial: Vec<T> = u.iter().zip(&d).map(|(&a, &b)| a + step * b).collect();
            let et = disc.energy(&trial, b);
            if et <= e + T::lit(1e-4) * step * slope {
                next = Some((trial, et));
                break;
            }
            step = step / T::lit(2.0);
        }
        let (trial, et) = match next {
            Some(x) => x,
            None => {
                let trial: Vec<T> = u.iter().zip(&d).map(|(&a, &b)| a + b).collect();
                let rt = norm(&disc.residual(&trial, b));
                if rt < res {
                    let et = disc.energy(&trial, b);
                    (trial, et)
                } else {
                    // round-off floor reached
                    break;
                }
            }
        };
        let inc = norm(&trial.iter().zip(&u).map(|(&a, &b)| a - b).collect::<Vec<T>>());
        u = trial;
        e = et;
        r = disc.residual(&u, b);
        res = norm(&r);
        history.push(res.to_f64_lossy());
        it += 1;
        // for p < 2 the flux |u'|^(p-2) u' is not differentiable at u' = 0 and
        // the residual stalls at |u'|^(p-1); the update size decides instead
        if inc <= T::epsilon() * T::lit(1e2) * (norm(&u) + T::one()) {
            stalled = true;
            break;
        }
    }
    let floor = T::epsilon() * T::lit(1e4) * (norm(b) + T::one());
    if res > tol && res > floor && !stalled {
        return Err(Error::NonConvergence {
            iterations: it,
            last_residual: res.to_f64_lossy(),
            residual_history: history,
            last_iterate: u.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    Ok((u, res.to_f64_lossy(), it))
}

fn discrete<T: Real>(model: &HomogenizedModel<T>, grid: Grid1D) -> Discrete<T> {
    Discrete { q: model.q, p: model.p.value(), h: grid.h(), w: grid.weights() }
}

/// Galerkin solve of `int q |u'|^(p-2) u' phi' + |u|^(p-2) u phi = int fbar phi`.
pub fn solve_limit_linear<T: Real, F: Fn(T) -> T>(
    model: &HomogenizedModel<T>,
    fbar: F,
    n: usize,
    opts: &Limit1dOptions,
) -> Result<LimitSolution<T>> {
    let grid = Grid1D::new(n)?;
    let b = load_1d(grid, fbar);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("limit source is not finite".into()));
    }
    let disc = discrete(model, grid);
    let (values, residual, iterations) = solve_discrete(&disc, &b, None, opts)?;
    Ok(LimitSolution { grid, values, model: model.clone(), residual, iterations })
}

/// Solves with the model's own linear source.
pub fn solve_limit_model<T: Real>(model: &HomogenizedModel<T>, n: usize, opts: &Limit1dOptions) -> Result<LimitSolution<T>> {
    match &model.forcing {
        LimitForcing::Linear(src) => solve_limit_linear(model, |x| src.eval(x), n, opts),
        LimitForcing::Semilinear { .. } => Err(Error::InvalidOption(
            "semilinear model needs a reaction; use solve_limit_semilinear".into(),
        )),
    }
}

/// Outer iteration record of a fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// Successive differences in the `W^{1,p}` norm.
    pub history: Vec<f64>,
    pub converged: bool,
    pub final_relaxation: f64,
}

fn w1p_diff_1d<T: Real>(a: &[T], b: &[T], grid: Grid1D, p: T) -> T {
    let h = grid.h::<T>();
    let w = grid.weights::<T>();
    let mut s = T::zero();
    for i in 0..a.len() {
        s += w[i] * abs_pow(a[i] - b[i], p);
    }
    for e in 0..grid.n {
        let d = ((a[e + 1] - b[e + 1]) - (a[e] - b[e])) / h;
        s += h * abs_pow(d, p);
    }
    s.powf(T::one() / p)
}

/// Fixed point `u = J^{-1}(c_f f(u))` for the limit problem.
pub fn solve_limit_semilinear<T: Real>(
    model: &HomogenizedModel<T>,
    f: &ReactionFn,
    n: usize,
    opts: &Limit1dOptions,
) -> Result<(LimitSolution<T>, FixedPointReport)> {
    let c_f = model
        .c_f()
        .ok_or_else(|| Error::InvalidOption("model has no source coefficient".into()))?;
    let p = model.p.value::<T>();
    if p < T::lit(2.0) {
        return Err(Error::InvalidSpec("the semilinear problem needs p >= 2".into()));
    }
    f.validate()?;
    let grid = Grid1D::new(n)?;
    let disc = discrete(model, grid);
    let w = grid.weights::<T>();
    let tol = T::lit(opts.fixed_point_tolerance);
    let mut omega = T::lit(opts.relaxation);
    let mut u = vec![T::zero(); n + 1];
    let mut history = Vec::new();
    let mut converged = false;
    let mut residual = 0.0;
    let mut iterations = 0;
    for k in 0..opts.max_outer {
        let b: Vec<T> = (0..=n).map(|i| w[i] * c_f * f.eval(u[i])).collect();
        let warm = if k == 0 { None } else { Some(u.as_slice()) };
        let (next, res, _) = solve_discrete(&disc, &b, warm, opts)?;
        residual = res;
        let relaxed: Vec<T> = u.iter().zip(&next).map(|(&a, &b)| (T::one() - omega) * a + omega * b).collect();
        let diff = w1p_diff_1d(&relaxed, &u, grid, p);
        if let Some(&prev) = history.last() {
            if diff.to_f64_lossy() > prev {
                omega = omega / T::lit(2.0);
            }
        }
        history.push(diff.to_f64_lossy());
        u = relaxed;
        iterations = k + 1;
        if diff <= tol {
            converged = true;
            break;
        }
    }
    let report = FixedPointReport { iterations, history, converged, final_relaxation: omega.to_f64_lossy() };
    let sol = LimitSolution { grid, values: u, model: model.clone(), residual, iterations };
    Ok((sol, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{Exponent, SourceFn};
    use crate::homogenize::{LimitSource, Regime};

    fn model(q: f64, p: f64) -> HomogenizedModel<f64> {
        let src = LimitSource { f: SourceFn::Constant { value: 1.0 }, factor: 1.0 };
        HomogenizedModel::new(q, Regime::Sub, Exponent::new(p).unwrap(), LimitForcing::Linear(src)).unwrap()
    }

    #[test]
    fn thomas_matches_dense() {
        let l = [-1.0f64, -1.0];
        let d = [2.0, 2.0, 2.0];
        let x = tridiag_solve(&l, &d, &l, &[1.0, 1.0, 1.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_source_gives_constant_solution() {
        for p in [2.0, 3.0, 1.5] {
            let m = model(0.7, p);
            let s = solve_limit_linear(&m, |_| 2.0, 17, &Limit1dOptions::default()).unwrap();
            let exact = 2f64.powf(1.0 / (p - 1.0));
            assert!(s.values.iter().all(|v| (v - exact).abs() < 1e-10), "p = {p}");
        }
    }
}
