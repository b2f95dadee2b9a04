//! Stages shared by the CLI and the studies: limit model, 1D solve, 2D solve.

use std::sync::Arc;

use anyhow::{bail, Result};

use thinpl_core::concentration::{assemble_concentrated_load, solve_semilinear};
use thinpl_core::fem::solve_duality;
use thinpl_core::geometry::{build_thin_mesh, ForcingSpec};
use thinpl_core::homogenize::{limit_source, q_for_regime, semilinear_coefficient, HomogenizedModel, LimitForcing};
use thinpl_core::limit1d::{solve_limit_model, solve_limit_semilinear};
use thinpl_core::{DomainSpec, Field, Mesh, Model, Solution1D};

use crate::config::StudyConfig;

/// `q` for the configured regime and the matching right-hand side.
pub fn homogenized_model(cfg: &StudyConfig) -> Result<Model> {
    let g = cfg.g_profile()?;
    let h = cfg.h_profile()?;
    let p = cfg.exponent()?;
    let regime = cfg.regime();
    let q = q_for_regime(regime, &g, p, cfg.cell_h, &cfg.solver)?;
    let forcing = match &cfg.forcing {
        ForcingSpec::XDependent { f } => LimitForcing::Linear(limit_source(f, &g, &h)?),
        ForcingSpec::Reaction { .. } => LimitForcing::Semilinear { c_f: semilinear_coefficient(&g, &h)? },
        ForcingSpec::None => bail!("the study needs a forcing"),
    };
    Ok(HomogenizedModel::new(q, regime, p, forcing)?)
}

/// 1D limit solution on the reference grid.
pub fn solve_limit(cfg: &StudyConfig, model: &Model) -> Result<Solution1D> {
    match &cfg.forcing {
        ForcingSpec::Reaction { f } => {
            let (sol, report) = solve_limit_semilinear(model, f, cfg.reference_n, &cfg.limit)?;
            if !report.converged {
                bail!("1D fixed point stalled after {} iterations", report.iterations);
            }
            Ok(sol)
        }
        _ => Ok(solve_limit_model(model, cfg.reference_n, &cfg.limit)?),
    }
}

/// A solved thin-domain problem.
pub struct Solve2d {
    pub spec: DomainSpec,
    pub mesh: Arc<Mesh>,
    pub field: Field,
    pub newton_iters: usize,
    pub outer_iters: usize,
    /// Last successive difference of the fixed point (0 for linear forcing).
    pub fixed_point_diff: f64,
    pub converged: bool,
}

pub fn solve_2d(cfg: &StudyConfig, eps: f64) -> Result<Solve2d> {
    let spec = cfg.spec(eps)?;
    let mesh = Arc::new(build_thin_mesh(&spec, cfg.target_h(eps))?);
    match &cfg.forcing {
        ForcingSpec::XDependent { f } => {
            let load = assemble_concentrated_load(&mesh, &spec, |x| f.eval(x))?;
            let sol = solve_duality(&mesh, spec.p_value(), &load.load, &cfg.solver)?;
            Ok(Solve2d {
                spec,
                mesh,
                field: sol.field,
                newton_iters: sol.iterations,
                outer_iters: 0,
                fixed_point_diff: 0.0,
                converged: true,
            })
        }
        ForcingSpec::Reaction { f } => {
            let mut opts = cfg.semilinear;
            opts.inner = cfg.solver;
            let (field, report) = solve_semilinear(&mesh, &spec, f, &opts, None)?;
            Ok(Solve2d {
                spec,
                mesh,
                field,
                newton_iters: 0,
                outer_iters: report.iterations,
                fixed_point_diff: report.history.last().copied().unwrap_or(0.0),
                converged: report.converged,
            })
        }
        ForcingSpec::None => {
            let field = Field::zeros(mesh.clone());
            Ok(Solve2d { spec, mesh, field, newton_iters: 0, outer_iters: 0, fixed_point_diff: 0.0, converged: true })
        }
    }
}
