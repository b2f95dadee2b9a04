//! Homogenized coefficient `q` for the three oscillation regimes and the limit
//! source of the linear problem.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{for_elements, Terms};
use crate::fem::field::FemField;
use crate::fem::newton::{newton, SolverOptions};
use crate::functions::{Exponent, SourceFn};
use crate::geometry::builders::build_cell_mesh;
use crate::geometry::mesh::TriMesh;
use crate::geometry::profile::PeriodicProfile;
use crate::scalar::{abs_pow, Real};

/// Oscillation regime, fixed by `alpha` relative to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "sub")]
    Sub,
    #[serde(rename = "res")]
    Resonant,
    #[serde(rename = "super")]
    Super,
}

impl Regime {
    pub fn from_alpha<T: Real>(alpha: T) -> Self {
        if alpha < T::one() {
            Regime::Sub
        } else if alpha > T::one() {
            Regime::Super
        } else {
            Regime::Resonant
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Sub => "sub",
            Regime::Resonant => "res",
            Regime::Super => "super",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sub" => Ok(Regime::Sub),
            "res" | "resonant" => Ok(Regime::Resonant),
            "super" => Ok(Regime::Super),
            other => Err(Error::InvalidOption(format!("unknown regime {other:?} (sub|res|super)"))),
        }
    }
}

/// `1 / (<g> <g^-(p'-1)>^(p-1))`.
pub fn q_subcritical<T: Real>(g: &PeriodicProfile<T>, p: Exponent) -> Result<T> {
    let mean = g.average(T::one())?;
    let e = p.conjugate_minus_one::<T>();
    let inv = g.average(-e)?;
    Ok(T::one() / (mean * inv.powf(p.value::<T>() - T::one())))
}

/// `g0 / <g>`, independent of `p`.
pub fn q_supercritical<T: Real>(g: &PeriodicProfile<T>) -> Result<T> {
    Ok(g.min_value() / g.average(T::one())?)
}

/// Solution of the periodic cell problem, stored as `w = v - y1`.
#[derive(Debug, Clone)]
pub struct CellSolution<T> {
    pub mesh: Arc<TriMesh<T>>,
    pub w: FemField<T>,
    pub q_value: T,
    pub residual: f64,
    pub iterations: usize,
}

impl<T: Real> CellSolution<T> {
    /// `v(y) = y1 + w(y)`.
    pub fn v_at(&self, y: [T; 2]) -> Result<T> {
        Ok(y[0] + self.w.eval(y)?.0)
    }

    /// Area-weighted mean of `w`.
    pub fn mean_offset(&self) -> T {
        let wts = self.mesh.lumped_weights();
        let total: T = wts.iter().copied().sum();
        wts.iter().zip(self.w.values()).map(|(&a, &b)| a * b).sum::<T>() / total
    }

    /// `max |v(L - y1, y2) + v(y1, y2) - L - 2 mean(w)|` over mesh vertices.
    pub fn reflection_defect(&self) -> Result<T> {
        let l = self.mesh.layout().map(|lay| lay.xs[lay.xs.len() - 1]).unwrap_or(T::one());
        let off = self.mean_offset();
        let mut worst = T::zero();
        for p in &self.mesh.vertices {
            let a = self.v_at(*p)?;
            let b = self.v_at([l - p[0], p[1]])?;
            worst = worst.max((a + b - l - off - off).abs());
        }
        Ok(worst)
    }
}

/// Newton solve of `int |grad v|^(p-2) grad v . grad phi = 0`, `v = y1 + w`,
/// `w` periodic with zero mean.
pub fn solve_cell_problem<T: Real>(mesh: &Arc<TriMesh<T>>, p: T, opts: &SolverOptions) -> Result<CellSolution<T>> {
    opts.validate()?;
    if !mesh.is_periodic() {
        return Err(Error::Geometry("cell mesh has no periodic pairing".into()));
    }
    if !(p > T::one()) {
        return Err(Error::InvalidSpec(format!("p = {p} must be > 1")));
    }
    let terms = Terms::cell();
    let area = mesh.area();
    let scale = area.powf(T::one() - T::one() / p);
    let w0 = vec![T::zero(); mesh.n_dofs()];
    let out = newton(mesh, p, w0, None, terms, opts, scale, true)?;
    let w = FemField::new(mesh.clone(), out.u)?;
    let q_value = cell_flux(&w, p) / area;
    Ok(CellSolution { mesh: mesh.clone(), w, q_value, residual: out.residual, iterations: out.iterations })
}

/// `int |grad v|^(p-2) d_{y1} v` for `v = y1 + w`.
fn cell_flux<T: Real>(w: &FemField<T>, p: T) -> T {
    let mesh = w.mesh();
    let pm2 = p - T::lit(2.0);
    let mut s = T::zero();
    for_elements(
        mesh,
        |t| {
            let mut g = w.gradient(t);
            g[0] += T::one();
            mesh.signed_area(t) * abs_pow((g[0] * g[0] + g[1] * g[1]).sqrt(), pm2) * g[0]
        },
        |_, v| s += v,
    );
    s
}

/// Resonant coefficient from cell meshes at `h` and `h/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonantQ<T> {
    pub q_coarse: T,
    pub q_fine: T,
    /// `(4 q_fine - q_coarse) / 3`
    pub q: T,
}

pub fn q_resonant<T: Real>(g: &PeriodicProfile<T>, p: T, target_h: T, opts: &SolverOptions) -> Result<ResonantQ<T>> {
    let coarse = Arc::new(build_cell_mesh(g, target_h)?);
    let fine = Arc::new(build_cell_mesh(g, target_h / T::lit(2.0))?);
    let q_coarse = solve_cell_problem(&coarse, p, opts)?.q_value;
    let q_fine = solve_cell_problem(&fine, p, opts)?.q_value;
    let q = (T::lit(4.0) * q_fine - q_coarse) / T::lit(3.0);
    Ok(ResonantQ { q_coarse, q_fine, q })
}

/// `q` for the regime of `alpha`.
pub fn q_for_regime<T: Real>(
    regime: Regime,
    g: &PeriodicProfile<T>,
    p: Exponent,
    cell_h: T,
    opts: &SolverOptions,
) -> Result<T> {
    match regime {
        Regime::Sub => q_subcritical(g, p),
        Regime::Super => q_supercritical(g),
        Regime::Resonant => {
            if g.is_constant() {
                return Ok(T::one());
            }
            Ok(q_resonant(g, p.value::<T>(), cell_h, opts)?.q)
        }
    }
}

/// `fbar(x) = f(x) <h> / <g>`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSource<T> {
    pub f: SourceFn,
    pub factor: T,
}

impl<T: Real> LimitSource<T> {
    pub fn eval(&self, x: T) -> T {
        self.f.eval(x) * self.factor
    }
}

pub fn limit_source<T: Real>(f: &SourceFn, g: &PeriodicProfile<T>, h: &PeriodicProfile<T>) -> Result<LimitSource<T>> {
    Ok(LimitSource { f: f.clone(), factor: semilinear_coefficient(g, h)? })
}

/// `c_f = <h> / <g>`.
pub fn semilinear_coefficient<T: Real>(g: &PeriodicProfile<T>, h: &PeriodicProfile<T>) -> Result<T> {
    Ok(h.average(T::one())? / g.average(T::one())?)
}

/// Right-hand side of the limit problem.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitForcing<T> {
    Linear(LimitSource<T>),
    Semilinear { c_f: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizedModel<T> {
    pub q: T,
    pub regime: Regime,
    pub p: Exponent,
    pub forcing: LimitForcing<T>,
}

impl<T: Real> HomogenizedModel<T> {
    pub fn new(q: T, regime: Regime, p: Exponent, forcing: LimitForcing<T>) -> Result<Self> {
        if !(q > T::zero()) {
            return Err(Error::InvalidSpec(format!("q = {q} must be positive")));
        }
        if let LimitForcing::Semilinear { c_f } = &forcing {
            if !(*c_f > T::zero()) {
                return Err(Error::InvalidSpec(format!("c_f = {c_f} must be positive")));
            }
        }
        Ok(HomogenizedModel { q, regime, p, forcing })
    }

    pub fn c_f(&self) -> Option<T> {
        match &self.forcing {
            LimitForcing::Semilinear { c_f } => Some(*c_f),
            LimitForcing::Linear(s) => Some(s.factor),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let g = PeriodicProfile::<f64>::cosine(2.0, 1.0, 1.0).unwrap();
        let p2 = Exponent::new(2.0).unwrap();
        assert!((q_subcritical(&g, p2).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-9);
        assert!((q_supercritical(&g).unwrap() - 0.5).abs() < 1e-12);
        let c = PeriodicProfile::<f64>::constant(3.7).unwrap();
        for p in [1.5, 2.0, 3.0, 4.5] {
            let q = q_subcritical(&c, Exponent::new(p).unwrap()).unwrap();
            assert!((q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn regime_parsing() {
        assert_eq!("res".parse::<Regime>().unwrap(), Regime::Resonant);
        assert_eq!(Regime::from_alpha(0.5), Regime::Sub);
        assert_eq!(Regime::from_alpha(1.0), Regime::Resonant);
        assert!("middle".parse::<Regime>().is_err());
    }
}
