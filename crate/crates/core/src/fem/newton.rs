//! Damped Newton for the duality equation `J u = b` with backtracking on the
//! convex energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{energy_values, jacobian_values, residual_values, LoadFunctional, Terms};
use crate::fem::field::FemField;
use crate::fem::linear::{solve_singular, solve_with, LinearSolver};
use crate::geometry::mesh::TriMesh;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stopping tolerance on `||r||_2 / |Omega|^(1/p')`.
    pub residual_tolerance: f64,
    pub max_newton_iterations: usize,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
    /// Gradient regularization used in the Jacobian only.
    pub delta: f64,
    pub linear_solver: LinearSolver,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            residual_tolerance: 1e-10,
            max_newton_iterations: 100,
            backtrack_factor: 0.5,
            max_halvings: 40,
            delta: 0.0,
            linear_solver: LinearSolver::Auto,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tolerance > 0.0) {
            return Err(Error::InvalidOption("residual_tolerance must be > 0".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidOption("delta must be >= 0".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::InvalidOption("backtrack_factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DualitySolution<T> {
    pub field: FemField<T>,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Solves `J u = b` from the scaled linear predictor.
pub fn solve_duality<T: Real>(
    mesh: &Arc<TriMesh<T>>,
    p: T,
    load: &LoadFunctional<T>,
    opts: &SolverOptions,
) -> Result<DualitySolution<T>> {
    solve_duality_with(mesh, p, load, opts, None)
}

/// As [`solve_duality`], optionally warm-started.
pub fn solve_duality_with<T: Real>(
    mesh: &Arc<TriMesh<T>>,
    p: T,
    load: &LoadFunctional<T>,
    opts: &SolverOptions,
    initial: Option<&[T]>,
) -> Result<DualitySolution<T>> {
    opts.validate()?;
    if load.len() != mesh.n_dofs() {
        return Err(Error::Dimension { expected: mesh.n_dofs(), got: load.len() });
    }
    if load.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("load has non-finite entries".into()));
    }
    let n = mesh.n_dofs();
    if load.values.iter().all(|&b| b == T::zero()) {
        let field = FemField::zeros(mesh.clone());
        return Ok(DualitySolution { field, iterations: 0, residual: 0.0, residual_history: vec![0.0], energy_history: vec![0.0] });
    }
    let u0 = match initial {
        Some(u) if u.len() == n => u.to_vec(),
        Some(u) => return Err(Error::Dimension { expected: n, got: u.len() }),
        None => predictor(mesh, p, &load.values, opts)?,
    };
    let terms = Terms::duality();
    let scale = mesh.area().powf(T::one() - T::one() / p);
    let out = newton(mesh, p, u0, Some(&load.values), terms, opts, scale, false)?;
    Ok(DualitySolution {
        field: FemField::new(mesh.clone(), out.u)?,
        iterations: out.iterations,
        residual: out.residual,
        residual_history: out.residual_history,
        energy_history: out.energy_history,
    })
}

/// Linear (p = 2) solve scaled to the energy minimizer along its direction.
fn predictor<T: Real>(mesh: &Arc<TriMesh<T>>, p: T, b: &[T], opts: &SolverOptions) -> Result<Vec<T>> {
    let two = T::lit(2.0);
    let zero = vec![T::zero(); mesh.n_dofs()];
    let k = jacobian_values(mesh, two, &zero, T::zero(), Terms::duality())?;
    let v = solve_with(&k, b, opts.linear_solver)?;
    if p == two {
        return Ok(v);
    }
    let bv: T = b.iter().zip(&v).map(|(&x, &y)| x * y).sum();
    let s = energy_values(mesh, p, &v, None, Terms::duality())? * p;
    if !(bv > T::zero() && s > T::zero()) {
        return Ok(v);
    }
    let t = (bv / s).powf(T::one() / (p - T::one()));
    Ok(v.into_iter().map(|x| x * t).collect())
}

/// Relative Newton correction below which the iteration counts as converged.
pub const STALL_UPDATE: f64 = 1e-10;

pub(crate) struct NewtonOutcome<T> {
    pub u: Vec<T>,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub energy_history: Vec<f64>,
}

/// Newton iteration shared by the duality and cell solvers. With `singular`
/// the constant mode is removed (zero mean w.r.t. lumped weights) after every
/// step and the linear systems are solved by projected CG.
#[allow(clippy::too_many_arguments)]
pub(crate) fn newton<T: Real>(
    mesh: &TriMesh<T>,
    p: T,
    mut u: Vec<T>,
    load: Option<&[T]>,
    terms: Terms<T>,
    opts: &SolverOptions,
    scale: T,
    singular: bool,
) -> Result<NewtonOutcome<T>> {
    let weights = if singular { Some(mesh.lumped_weights()) } else { None };
    let project = |v: &mut Vec<T>| {
        if let Some(w) = &weights {
            let total: T = w.iter().copied().sum();
            let m = w.iter().zip(v.iter()).map(|(&a, &b)| a * b).sum::<T>() / total;
            v.iter_mut().for_each(|x| *x -= m);
        }
    };
    project(&mut u);
    let tol = T::lit(opts.residual_tolerance);
    let delta = T::lit(opts.delta);
    let beta = T::lit(opts.backtrack_factor);
    let c1 = T::lit(1e-4);
    let mut r = residual_values(mesh, p, &u, load, terms)?;
    let mut e = energy_values(mesh, p, &u, load, terms)?;
    let mut res = norm(&r) / scale;
    let mut residual_history = vec![res.to_f64_lossy()];
    let mut energy_history = vec![e.to_f64_lossy()];
    let mut it = 0;
    // at least one step, so a warm start close to the solution is still
    // corrected rather than returned unchanged
    while res > tol || (it == 0 && res > T::zero()) {
        if it >= opts.max_newton_iterations {
            return Err(Error::NonConvergence {
                iterations: it,
                last_residual: res.to_f64_lossy(),
                residual_history,
                last_iterate: u.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        let jac = jacobian_values(mesh, p, &u, delta, terms)?;
        let neg_r: Vec<T> = r.iter().map(|&x| -x).collect();
        let mut d = if singular {
            solve_singular(&jac, &neg_r, opts.linear_solver)?
        } else {
            solve_with(&jac, &neg_r, opts.linear_solver)?
        };
        project(&mut d);
        // a Newton correction at round-off size: the residual has reached its
        // floor, which for large skewed meshes can sit above the tolerance
        if it > 0 && norm(&d) <= T::lit(STALL_UPDATE) * norm(&u) {
            break;
        }
        let slope: T = r.iter().zip(&d).map(|(&a, &b)| a * b).sum();
        if !(slope < T::zero()) {
            if res <= tol {
                break;
            }
            return Err(Error::Singular(format!("Newton direction is not a descent direction (slope {slope})")));
        }
        let roundoff = T::epsilon() * T::lit(1e3) * (e.abs() + T::one());
        let mut step = T::one();
        let mut accepted = None;
        if -slope > roundoff {
            for _ in 0..=opts.max_halvings {
                let trial: Vec<T> = u.iter().zip(&d).map(|(&a, &b)| a + step * b).collect();
                let et = energy_values(mesh, p, &trial, load, terms)?;
                if et <= e + c1 * step * slope {
                    accepted = Some((trial, et));
                    break;
                }
                step *= beta;
            }
        }
        if accepted.is_none() {
            // energy differences below round-off: backtrack on the residual
            step = T::one();
            for _ in 0..=opts.max_halvings {
                let trial: Vec<T> = u.iter().zip(&d).map(|(&a, &b)| a + step * b).collect();
                let rt = norm(&residual_values(mesh, p, &trial, load, terms)?) / scale;
                if rt < res {
                    let et = energy_values(mesh, p, &trial, load, terms)?;
                    if et <= e + roundoff {
                        accepted = Some((trial, et));
                    }
                    break;
                }
                step *= beta;
            }
        }
        let Some((trial, et)) = accepted else {
            return Err(Error::NonConvergence {
                iterations: it,
                last_residual: res.to_f64_lossy(),
                residual_history,
                last_iterate: u.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        };
        u = trial;
        project(&mut u);
        e = et;
        r = residual_values(mesh, p, &u, load, terms)?;
        res = norm(&r) / scale;
        residual_history.push(res.to_f64_lossy());
        energy_history.push(e.to_f64_lossy());
        it += 1;
    }
    Ok(NewtonOutcome { u, iterations: it, residual: res.to_f64_lossy(), residual_history, energy_history })
}
