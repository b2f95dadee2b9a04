//! Every unfolding and concentration check at every eps of a config.

use std::f64::consts::PI;
use std::sync::Arc;

use anyhow::Result;
use rayon::prelude::*;

use thinpl_core::concentration::verify_concentration_identity;
use thinpl_core::geometry::build_thin_mesh;
use thinpl_core::unfolding::{
    derivative_exchange_check, norm_identity, strip_test_function_error, unfold, unfold_strip, verify_iteration,
    ComposedField, SmoothField, StripUnfoldGrid, UnfoldGrid,
};
use thinpl_core::{DomainSpec, Field, Mesh, ReactionFn};

use crate::config::StudyConfig;
use crate::csvout::{num, Table};

pub const IDENTITY_TOLERANCE: f64 = 1e-4;
pub const NORM_TOLERANCE: f64 = 1e-2;
pub const EXCHANGE_TOLERANCE: f64 = 1e-6;
/// Trend values below this are round-off and count as converged.
pub const TREND_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Must hold to the threshold at each eps.
    Exact,
    /// Asymptotic; judged on the sweep as a whole.
    Trend,
}

#[derive(Debug, Clone)]
pub struct Check {
    /// `NaN` for checks over the whole sweep.
    pub eps: f64,
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub kind: CheckKind,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub config_hash: String,
    pub checks: Vec<Check>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn find(&self, name: &str, eps: f64) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name && (c.eps == eps || (c.eps.is_nan() && eps.is_nan())))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new("verify", &self.config_hash, &["eps", "check", "kind", "value", "threshold", "result"]);
        for c in &self.checks {
            t.push(vec![
                if c.eps.is_nan() { "sweep".into() } else { num(c.eps) },
                c.name.into(),
                match c.kind {
                    CheckKind::Exact => "exact".into(),
                    CheckKind::Trend => "trend".into(),
                },
                num(c.value),
                num(c.threshold),
                if c.pass { "pass".into() } else { "FAIL".into() },
            ]);
        }
        t
    }
}

/// Test hook for the negative control: flips the strip tag of every
/// seventh triangle.
pub fn mis_tag(mesh: &mut Mesh) {
    let tags: Vec<bool> = mesh.strip_tag.iter().enumerate().map(|(t, &s)| if t % 7 == 3 { !s } else { s }).collect();
    mesh.set_strip_tags(tags).expect("same length");
}

fn exact(eps: f64, name: &'static str, value: f64, threshold: f64) -> Check {
    Check { eps, name, value, threshold, kind: CheckKind::Exact, pass: value <= threshold }
}

fn phi_value(eps: f64) -> impl Fn(f64, f64) -> f64 + Sync + Copy {
    move |x: f64, y: f64| (1.0 + x * x) * (PI * x).cos() + y / eps + 0.5
}

fn phi_grad(eps: f64) -> impl Fn(f64, f64) -> [f64; 2] + Sync + Copy {
    move |x: f64, _y: f64| [2.0 * x * (PI * x).cos() - (1.0 + x * x) * PI * (PI * x).sin(), 1.0 / eps]
}

struct EpsChecks {
    checks: Vec<Check>,
    gap: f64,
    strip_error: f64,
}

fn checks_at(cfg: &StudyConfig, spec: &DomainSpec, tamper: bool) -> Result<EpsChecks> {
    let eps = spec.epsilon;
    let per_dim = cfg.sampling.per_dim;
    let mut mesh = build_thin_mesh(spec, cfg.target_h(eps))?;
    if tamper {
        mis_tag(&mut mesh);
    }
    let mesh = Arc::new(mesh);
    let smooth = SmoothField::new(phi_value(eps), phi_grad(eps));
    let mut out = Vec::new();

    let first = verify_concentration_identity(&mesh, spec, &smooth, per_dim)?;
    out.push(exact(eps, "first_unfolding", first.relative, IDENTITY_TOLERANCE));

    let p1 = Field::interpolate(mesh.clone(), phi_value(eps));
    let first_p1 = verify_concentration_identity(&mesh, spec, &p1, per_dim)?;
    out.push(exact(eps, "first_unfolding_p1", first_p1.relative, IDENTITY_TOLERANCE));

    let sgrid = StripUnfoldGrid::new(spec, per_dim)?;
    let iter = verify_iteration(&smooth, &sgrid)?;
    out.push(exact(eps, "iteration", iter.relative, IDENTITY_TOLERANCE));

    let grid = UnfoldGrid::new(spec, per_dim, cfg.sampling.x_per_cell)?;
    let norm = norm_identity(&p1, &grid, spec.p_value())?;
    out.push(exact(eps, "norm_identity", norm.relative, NORM_TOLERANCE));

    let exchange = derivative_exchange_check(&p1, &grid)?;
    out.push(exact(eps, "derivative_exchange", exchange, EXCHANGE_TOLERANCE));

    // linearity and composition, sample by sample
    let v = Field::interpolate(mesh.clone(), |x, y| (3.0 * x).sin() * (1.0 + y / eps));
    let w = p1.combine(2.0, &v, -0.5)?;
    let (tu, tv, tw) = (unfold(&p1, &grid)?, unfold(&v, &grid)?, unfold(&w, &grid)?);
    let mut lin = 0.0f64;
    for i in 0..tw.values.len() {
        let expect = 2.0 * tu.values[i] - 0.5 * tv.values[i];
        lin = lin.max((tw.values[i] - expect).abs() / (1.0 + expect.abs()));
    }
    out.push(exact(eps, "linearity", lin, 1e-12));

    let f = match &spec.forcing {
        thinpl_core::geometry::ForcingSpec::Reaction { f } => f.clone(),
        _ => ReactionFn::Lorentzian { c: 1.0 },
    };
    let coarse = StripUnfoldGrid::new(spec, 8)?;
    let a = unfold_strip(&ComposedField { inner: &p1, f: f.clone() }, &coarse)?;
    let b = unfold_strip(&p1, &coarse)?;
    let mut comp = 0.0f64;
    for (ra, rb) in a.values.iter().zip(&b.values) {
        for (x, y) in ra.iter().zip(rb) {
            comp = comp.max((x - f.eval(*y)).abs());
        }
    }
    out.push(exact(eps, "composition", comp, 0.0));

    let gap = iter.gap.abs() / iter.concentrated.abs().max(f64::MIN_POSITIVE);
    let strip_error = strip_test_function_error(|x: f64| (PI * x).cos(), &sgrid, spec.p_value());
    Ok(EpsChecks { checks: out, gap, strip_error })
}

fn trend(name: &'static str, values: &[f64]) -> Check {
    let first = values.first().copied().unwrap_or(f64::NAN);
    let last = values.last().copied().unwrap_or(f64::NAN);
    let ratio = last / first;
    Check { eps: f64::NAN, name, value: ratio, threshold: 1.0, kind: CheckKind::Trend, pass: values.len() > 1 && (ratio < 1.0 || last <= TREND_FLOOR) }
}

/// Runs every check at every eps of `cfg`. With `tamper` the strip tags are
/// corrupted first (negative control).
pub fn run_identity_suite(cfg: &StudyConfig, tamper: bool) -> Result<IdentityReport> {
    cfg.validate()?;
    let per_eps: Vec<Result<EpsChecks>> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let spec = cfg.spec(eps)?;
            checks_at(cfg, &spec, tamper)
        })
        .collect();
    let mut checks = Vec::new();
    let mut gaps = Vec::new();
    let mut strip = Vec::new();
    for r in per_eps {
        let r = r?;
        checks.extend(r.checks);
        gaps.push(r.gap);
        strip.push(r.strip_error);
    }
    for (eps, (g, s)) in cfg.eps_list.iter().zip(gaps.iter().zip(&strip)) {
        checks.push(Check { eps: *eps, name: "depth_gap", value: *g, threshold: f64::NAN, kind: CheckKind::Trend, pass: true });
        checks.push(Check { eps: *eps, name: "strip_test_function", value: *s, threshold: f64::NAN, kind: CheckKind::Trend, pass: true });
    }
    checks.push(trend("depth_gap", &gaps));
    checks.push(trend("strip_test_function", &strip));
    Ok(IdentityReport { config_hash: cfg.hash(), checks })
}
