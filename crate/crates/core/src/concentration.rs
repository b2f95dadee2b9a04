//! Loads concentrated in the strip `O^eps`, the semilinear fixed point
//! `u = J^{-1} F_eps(u)` and checks of the concentrated-integral identity.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{for_elements, midpoint_contrib, w1p_norm, LoadFunctional};
use crate::fem::field::FemField;
use crate::fem::newton::{solve_duality_with, SolverOptions};
use crate::functions::ReactionFn;
use crate::geometry::domain::ThinDomainSpec;
use crate::geometry::mesh::TriMesh;
use crate::scalar::{abs_pow, Real};
use crate::unfolding::{mesh_integral, strip_integral_exact, unfolded_strip_exact, Field2D};

pub use crate::limit1d::FixedPointReport;

/// Nodal vector of `(1/eps^gamma) int_{O^eps} f phi_i`.
#[derive(Debug, Clone)]
pub struct ConcentratedLoad<T> {
    pub spec: ThinDomainSpec<T>,
    pub load: LoadFunctional<T>,
}

fn require_tags<T: Real>(mesh: &TriMesh<T>) -> Result<()> {
    if mesh.is_strip_tagged() {
        Ok(())
    } else {
        Err(Error::Geometry("mesh carries no strip tags".into()))
    }
}

fn strip_load<T: Real, F: Fn(usize, T, T) -> T + Sync>(mesh: &TriMesh<T>, spec: &ThinDomainSpec<T>, f: F) -> Vec<T> {
    let scale = T::one() / spec.eps_gamma();
    let mut b = vec![T::zero(); mesh.n_dofs()];
    for_elements(
        mesh,
        |t| {
            if mesh.strip_tag[t] {
                Some(midpoint_contrib(mesh, t, &|x, y| f(t, x, y)))
            } else {
                None
            }
        },
        |t, c| {
            if let Some(c) = c {
                let tri = mesh.triangles[t];
                for i in 0..3 {
                    b[mesh.dof(tri[i])] += scale * c[i];
                }
            }
        },
    );
    b
}

/// Edge-midpoint rule on the tagged triangles; exact for `f` affine.
pub fn assemble_concentrated_load<T: Real, F: Fn(T) -> T + Sync>(
    mesh: &TriMesh<T>,
    spec: &ThinDomainSpec<T>,
    f: F,
) -> Result<ConcentratedLoad<T>> {
    require_tags(mesh)?;
    let values = strip_load(mesh, spec, |_, x, _| f(x));
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec("concentrated load has non-finite entries".into()));
    }
    Ok(ConcentratedLoad { spec: spec.clone(), load: LoadFunctional { values } })
}

/// `(1/eps^gamma) int_{O^eps} f(u) phi_i`, with `u` taken at edge midpoints.
pub fn semilinear_load<T: Real>(u: &FemField<T>, spec: &ThinDomainSpec<T>, f: &ReactionFn) -> Result<LoadFunctional<T>> {
    let mesh = u.mesh();
    require_tags(mesh)?;
    let values = strip_load(mesh, spec, |t, x, y| {
        let b = mesh.barycentric(t, [x, y]);
        let l = u.local(t);
        f.eval(b[0] * l[0] + b[1] * l[1] + b[2] * l[2])
    });
    Ok(LoadFunctional { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemilinearOptions {
    pub inner: SolverOptions,
    /// Stop when the successive `W^{1,p}` difference drops below this.
    pub tolerance: f64,
    pub max_outer: usize,
    /// Initial relaxation, halved whenever the difference grows.
    pub relaxation: f64,
}

impl Default for SemilinearOptions {
    fn default() -> Self {
        SemilinearOptions { inner: SolverOptions::default(), tolerance: 1e-10, max_outer: 50, relaxation: 1.0 }
    }
}

/// `u <- (1 - w) u + w J^{-1}(F_eps(u))` from `initial` (zero by default).
pub fn solve_semilinear<T: Real>(
    mesh: &Arc<TriMesh<T>>,
    spec: &ThinDomainSpec<T>,
    f: &ReactionFn,
    opts: &SemilinearOptions,
    initial: Option<&FemField<T>>,
) -> Result<(FemField<T>, FixedPointReport)> {
    opts.inner.validate()?;
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::InvalidOption("relaxation must lie in (0, 1]".into()));
    }
    f.validate()?;
    let p = spec.p_value();
    if p < T::lit(2.0) {
        return Err(Error::InvalidSpec("the semilinear problem needs p >= 2".into()));
    }
    require_tags(mesh)?;
    let mut u = match initial {
        Some(u0) if Arc::ptr_eq(u0.mesh(), mesh) || u0.mesh().n_dofs() == mesh.n_dofs() => {
            FemField::new(mesh.clone(), u0.values().to_vec())?
        }
        Some(u0) => return Err(Error::Dimension { expected: mesh.n_dofs(), got: u0.values().len() }),
        None => FemField::zeros(mesh.clone()),
    };
    let tol = T::lit(opts.tolerance);
    let mut omega = T::lit(opts.relaxation);
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..opts.max_outer {
        let load = semilinear_load(&u, spec, f)?;
        let warm = if k == 0 && initial.is_none() { None } else { Some(u.values()) };
        let next = solve_duality_with(mesh, p, &load, &opts.inner, warm)?.field;
        let relaxed = u.combine(T::one() - omega, &next, omega)?;
        let diff = w1p_norm(&relaxed.combine(T::one(), &u, -T::one())?, p);
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
    Ok((u, FixedPointReport { iterations, history, converged, final_relaxation: omega.to_f64_lossy() }))
}

/// Two-sided check of `eps^(-gamma-1) int_{O^eps} phi =
/// (1/(L_g eps^gamma)) int T_eps phi + eps^(-gamma-1) int_{O_1^eps} phi`.
#[derive(Debug, Clone, Copy)]
pub struct ConcentrationIdentity<T> {
    /// Left side over the exact strip.
    pub concentrated: T,
    /// Unfolded integral over `(0,1) x Y*_eps(x)`.
    pub unfolded: T,
    /// Part over `O_1^eps` (above `Lambda_eps`).
    pub remainder: T,
    /// Left side over the strip-tagged triangles.
    pub tagged: T,
    /// Same over the triangles lying geometrically under the mesh top
    /// and above the mesh interface.
    pub geometric: T,
    /// `|concentrated - unfolded - remainder|`
    pub identity_residual: T,
    /// `|tagged - geometric|`
    pub tagging_residual: T,
    /// Larger of the two, relative to `|concentrated|`.
    pub relative: T,
}

impl<T: Real> ConcentrationIdentity<T> {
    pub fn residual(&self) -> T {
        self.identity_residual.max(self.tagging_residual)
    }
}

/// Whether triangle `t` lies above the piecewise linear interface of `spec`.
fn geometrically_in_strip<T: Real>(mesh: &TriMesh<T>, spec: &ThinDomainSpec<T>, t: usize) -> bool {
    let tri = mesh.triangles[t];
    let v = [mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]];
    let xa = v.iter().map(|p| p[0]).fold(T::infinity(), T::min);
    let xb = v.iter().map(|p| p[0]).fold(T::neg_infinity(), T::max);
    let cx = (v[0][0] + v[1][0] + v[2][0]) / T::lit(3.0);
    let cy = (v[0][1] + v[1][1] + v[2][1]) / T::lit(3.0);
    let s = if xb > xa { (cx - xa) / (xb - xa) } else { T::lit(0.5) };
    let level = (T::one() - s) * spec.interface(xa) + s * spec.interface(xb);
    cy > level
}

/// Residuals of the concentrated-integral identity for `phi`, plus the
/// consistency of the mesh strip tags with the geometry.
pub fn verify_concentration_identity<T: Real, D: Field2D<T>>(
    mesh: &TriMesh<T>,
    spec: &ThinDomainSpec<T>,
    phi: &D,
    per_dim: usize,
) -> Result<ConcentrationIdentity<T>> {
    require_tags(mesh)?;
    let concentrated = strip_integral_exact(phi, spec, T::zero(), T::one(), per_dim)?;
    let remainder = strip_integral_exact(phi, spec, spec.g_split().lambda_start, T::one(), per_dim)?;
    let unfolded = unfolded_strip_exact(phi, spec, per_dim)?;
    let value = |_: usize, _: [T; 3], pt: [T; 2]| phi.sample(pt).map(|s| s.value).unwrap_or(T::nan());
    let scale = T::one() / (spec.epsilon * spec.eps_gamma());
    let tagged = mesh_integral(mesh, |t| mesh.strip_tag[t], value) * scale;
    let geometric = mesh_integral(mesh, |t| geometrically_in_strip(mesh, spec, t), value) * scale;
    if !tagged.is_finite() || !geometric.is_finite() {
        return Err(Error::Geometry("test field could not be sampled on the mesh".into()));
    }
    let identity_residual = (concentrated - unfolded - remainder).abs();
    let tagging_residual = (tagged - geometric).abs();
    let relative = identity_residual.max(tagging_residual) / concentrated.abs().max(T::min_positive_value());
    Ok(ConcentrationIdentity {
        concentrated,
        unfolded,
        remainder,
        tagged,
        geometric,
        identity_residual,
        tagging_residual,
        relative,
    })
}

/// `(1/eps^gamma) int_{O^eps} |u|^q / ||u||^q_{W^{1,p}(R^eps)}`.
pub fn trace_ratio<T: Real>(u: &FemField<T>, spec: &ThinDomainSpec<T>, q_exp: T) -> Result<T> {
    let mesh = u.mesh();
    require_tags(mesh)?;
    let p = spec.p_value();
    if q_exp > p || !(q_exp > T::zero()) {
        return Err(Error::InvalidOption(format!("trace exponent {q_exp} must lie in (0, p]")));
    }
    let norm = w1p_norm(u, p);
    if !(norm > T::zero()) {
        return Err(Error::Undefined("trace ratio of the zero field".into()));
    }
    let num = mesh_integral(
        mesh,
        |t| mesh.strip_tag[t],
        |t, b, _| {
            let l = u.local(t);
            abs_pow(b[0] * l[0] + b[1] * l[1] + b[2] * l[2], q_exp)
        },
    ) / spec.eps_gamma();
    Ok(num / norm.powf(q_exp))
}

/// `|eps^(-gamma-1) int_{O^eps} f phi - <h> int_0^1 f phi|` and the limit
/// `<h> int_0^1 f phi`, for `f`, `phi` functions of `x`.
pub fn concentrated_limit_error<T: Real, F, P>(spec: &ThinDomainSpec<T>, f: F, phi: P, per_dim: usize) -> Result<(T, T)>
where
    F: Fn(T) -> T + Sync,
    P: Fn(T) -> T + Sync,
{
    let field = crate::unfolding::SmoothField::new(|x: T, _y: T| f(x) * phi(x), |_x: T, _y: T| [T::zero(); 2]);
    let value = strip_integral_exact(&field, spec, T::zero(), T::one(), per_dim)?;
    let rule = crate::quadrature::GaussLegendre::<T>::new(10);
    let base = rule.composite(T::zero(), T::one(), 16, |x| f(x) * phi(x));
    let limit = spec.h.average(T::one())? * base;
    Ok(((value - limit).abs(), limit))
}
